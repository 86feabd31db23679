//! JSON-lines reading and writing.
//!
//! Blank lines and lines starting with `#` are skipped on read. Paths
//! ending in `.gz` are transparently gzip-decoded/encoded.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Schema { path: String, line: usize, message: String },
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

fn open(path: &Path) -> Result<Box<dyn BufRead>, JsonlError> {
    let file = File::open(path).map_err(|source| JsonlError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(if is_gz(path) {
        Box::new(BufReader::new(GzDecoder::new(file)))
    } else {
        Box::new(BufReader::new(file))
    })
}

/// Reads every record, reporting the 1-based line of the first bad one.
pub fn read<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, JsonlError> {
    read_with(path, |_, record| Ok(record))
}

/// Reads records, mapping each through `f` together with its line number.
pub fn read_with<T: DeserializeOwned, U>(
    path: &Path,
    mut f: impl FnMut(usize, T) -> Result<U, String>,
) -> Result<Vec<U>, JsonlError> {
    let reader = open(path)?;
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| JsonlError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let schema = |message: String| JsonlError::Schema {
            path: path.display().to_string(),
            line: i + 1,
            message,
        };
        let record = serde_json::from_str(&line).map_err(|e| schema(e.to_string()))?;
        out.push(f(i + 1, record).map_err(schema)?);
    }
    Ok(out)
}

/// Line-oriented writer; one serialized value per line.
pub struct JsonlWriter {
    path: String,
    inner: Box<dyn Write>,
}

impl JsonlWriter {
    /// Creates `path`, gzip-compressing when it ends in `.gz`.
    pub fn create(path: &Path) -> Result<Self, JsonlError> {
        let file = File::create(path).map_err(|source| JsonlError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let inner: Box<dyn Write> = if is_gz(path) {
            // mtime is zero in the gzip header, so output stays reproducible.
            Box::new(GzEncoder::new(BufWriter::new(file), Compression::default()))
        } else {
            Box::new(BufWriter::new(file))
        };
        Ok(Self {
            path: path.display().to_string(),
            inner,
        })
    }

    fn io(&self, source: io::Error) -> JsonlError {
        JsonlError::Io {
            path: self.path.clone(),
            source,
        }
    }

    pub fn write<T: Serialize>(&mut self, value: &T) -> Result<(), JsonlError> {
        let line = serde_json::to_string(value).map_err(|e| self.io(e.into()))?;
        writeln!(self.inner, "{line}").map_err(|e| self.io(e))
    }

    /// Writes a `#` comment line.
    pub fn comment(&mut self, text: &str) -> Result<(), JsonlError> {
        writeln!(self.inner, "# {text}").map_err(|e| self.io(e))
    }

    pub fn finish(mut self) -> Result<(), JsonlError> {
        self.inner.flush().map_err(|e| self.io(e))
    }
}

/// Writes all `values` to `path`.
pub fn write_all<'a, T: Serialize + 'a>(
    path: &Path,
    values: impl IntoIterator<Item = &'a T>,
) -> Result<(), JsonlError> {
    let mut w = JsonlWriter::create(path)?;
    for v in values {
        w.write(v)?;
    }
    w.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Row {
        a: u32,
    }

    #[test]
    fn round_trip_plain_and_gz() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["rows.jsonl", "rows.jsonl.gz"] {
            let path = dir.path().join(name);
            let rows = vec![Row { a: 1 }, Row { a: 2 }];
            let mut w = JsonlWriter::create(&path).unwrap();
            w.comment("header").unwrap();
            for r in &rows {
                w.write(r).unwrap();
            }
            w.finish().unwrap();
            assert_eq!(read::<Row>(&path).unwrap(), rows);
        }
    }

    #[test]
    fn schema_error_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{\"a\":1}\n\n{\"a\":\"x\"}\n").unwrap();
        match read::<Row>(&path) {
            Err(JsonlError::Schema { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
