//! Function/docstring pair extraction.
//!
//! Source files are parsed with a pluggable [`Grammar`]; every function or
//! method (nested ones included) becomes a [`FunctionUnit`] carrying the
//! structural features the quality filters consume. Units with a non-empty
//! docstring are joined with repository metadata into [`CodeDocPair`]s.

pub mod complexity;
pub mod docstring;
mod python;

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use walkdir::WalkDir;

pub use complexity::cyclomatic_complexity;
pub use docstring::trim_docstring;
pub use python::PythonGrammar;

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("source path must be non-empty")]
    EmptyPath,
    #[error("manifest {path}:{line}: {message}")]
    Manifest { path: String, line: usize, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

/// The grammar could not produce a syntax tree for a file.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("parse error in {path} at line {line}")]
pub struct ParseError {
    pub path: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    /// Relative path with forward slashes.
    pub path: String,
    pub repo_id: String,
    pub content: String,
}

impl SourceFile {
    pub fn new(path: impl Into<String>, repo_id: impl Into<String>, content: String) -> Result<Self, ExtractError> {
        let path = normalize_path(&path.into());
        if path.is_empty() {
            return Err(ExtractError::EmptyPath);
        }
        Ok(Self {
            path,
            repo_id: repo_id.into(),
            content,
        })
    }

    /// Invalid UTF-8 is replaced with U+FFFD rather than rejected.
    pub fn from_bytes(path: impl Into<String>, repo_id: impl Into<String>, bytes: &[u8]) -> Result<Self, ExtractError> {
        Self::new(path, repo_id, String::from_utf8_lossy(bytes).into_owned())
    }
}

fn normalize_path(path: &str) -> String {
    let path = path.replace('\\', "/");
    let mut path = path.as_str();
    while let Some(rest) = path.strip_prefix("./") {
        path = rest;
    }
    path.trim_start_matches('/').to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchKind {
    If,
    Elif,
    Except,
}

/// An outer-level branching block of a function body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchBlock {
    pub kind: BranchKind,
    /// 1-based line within [`FunctionUnit::code`].
    pub line: usize,
    /// Identifiers of the condition (or caught exception types).
    pub identifiers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionUnit {
    pub qualified_name: String,
    /// Decorators and the `def` header, up to the body.
    pub signature: String,
    /// Body source with the docstring statement removed.
    pub body_code: String,
    pub docstring: Option<String>,
    pub start_line: usize,
    pub end_line: usize,
    pub code_line_count: usize,
    pub doc_line_count: usize,
    pub complexity: u32,
    pub branch_blocks: Vec<BranchBlock>,
}

impl FunctionUnit {
    /// Signature and body as shown to annotators and scorers.
    pub fn code(&self) -> String {
        if self.body_code.is_empty() {
            self.signature.clone()
        } else {
            format!("{}\n{}", self.signature, self.body_code)
        }
    }

    pub fn has_branch_blocks(&self) -> bool {
        !self.branch_blocks.is_empty()
    }

    pub fn docstring_text(&self) -> &str {
        self.docstring.as_deref().unwrap_or("")
    }
}

/// A documented function joined with its provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeDocPair {
    pub pair_id: String,
    pub repo_id: String,
    pub path: String,
    #[serde(flatten)]
    pub unit: FunctionUnit,
    pub repo_stars: Option<u64>,
}

impl CodeDocPair {
    pub fn code(&self) -> String {
        self.unit.code()
    }

    pub fn docstring(&self) -> &str {
        self.unit.docstring_text()
    }
}

/// Deterministic id over (repo, path, qualified name, start line).
pub fn pair_id(repo_id: &str, path: &str, qualified_name: &str, start_line: usize) -> String {
    let mut hasher = Sha256::new();
    for part in [repo_id, path, qualified_name, &start_line.to_string()] {
        hasher.update(part.as_bytes());
        hasher.update([0x1f]);
    }
    hex::encode(&hasher.finalize()[..8])
}

/// A language grammar able to enumerate function units in a file.
pub trait Grammar: Sync {
    fn name(&self) -> &str;
    /// File extensions (without the dot) this grammar handles.
    fn extensions(&self) -> &[&str];
    fn parse_functions(&self, file: &SourceFile) -> Result<Vec<FunctionUnit>, ParseError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoEntry {
    pub repo_id: String,
    pub stars: u64,
    pub license: String,
    pub root: PathBuf,
}

/// Repository metadata keyed by `repo_id`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RepoManifest {
    repos: BTreeMap<String, RepoEntry>,
}

impl RepoManifest {
    pub fn new(entries: impl IntoIterator<Item = RepoEntry>) -> Self {
        Self {
            repos: entries.into_iter().map(|e| (e.repo_id.clone(), e)).collect(),
        }
    }

    /// Reads a JSON-lines manifest. Relative roots resolve against the
    /// manifest's directory.
    pub fn load(path: &Path) -> Result<Self, ExtractError> {
        let text = fs::read_to_string(path).map_err(|source| ExtractError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut entry: RepoEntry = serde_json::from_str(line).map_err(|e| ExtractError::Manifest {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })?;
            if entry.root.is_relative() {
                entry.root = base.join(&entry.root);
            }
            entries.push(entry);
        }
        Ok(Self::new(entries))
    }

    pub fn get(&self, repo_id: &str) -> Option<&RepoEntry> {
        self.repos.get(repo_id)
    }

    /// Entries in `repo_id` order.
    pub fn entries(&self) -> impl Iterator<Item = &RepoEntry> {
        self.repos.values()
    }

    pub fn len(&self) -> usize {
        self.repos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.repos.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractSummary {
    pub repos: usize,
    pub skipped_repos: usize,
    pub files: usize,
    pub functions: usize,
    pub pairs: usize,
    pub parse_errors: Vec<ParseError>,
}

impl ExtractSummary {
    fn merge(&mut self, other: ExtractSummary) {
        self.repos += other.repos;
        self.skipped_repos += other.skipped_repos;
        self.files += other.files;
        self.functions += other.functions;
        self.pairs += other.pairs;
        self.parse_errors.extend(other.parse_errors);
    }
}

/// Extracts documented pairs from `files`.
///
/// Files are ordered by (repo, path) before parsing and parsed in
/// parallel; pairs are emitted in file order and by start line within a
/// file. Parse failures are logged and counted, never fatal.
pub fn extract_pairs(
    files: Vec<SourceFile>,
    manifest: &RepoManifest,
    grammar: &dyn Grammar,
    mut emit: impl FnMut(CodeDocPair),
) -> ExtractSummary {
    let mut files = files;
    files.sort_by(|a, b| (&a.repo_id, &a.path).cmp(&(&b.repo_id, &b.path)));

    let parsed: Vec<_> = files.par_iter().map(|f| grammar.parse_functions(f)).collect();

    let mut summary = ExtractSummary {
        files: files.len(),
        ..Default::default()
    };
    for (file, result) in files.iter().zip(parsed) {
        let units = match result {
            Ok(units) => units,
            Err(err) => {
                log::warn!("skipping {}: {err}", file.path);
                summary.parse_errors.push(err);
                continue;
            }
        };
        summary.functions += units.len();
        let stars = manifest.get(&file.repo_id).map(|r| r.stars);
        for unit in units {
            if matches!(unit.docstring.as_deref(), None | Some("")) {
                continue;
            }
            summary.pairs += 1;
            emit(CodeDocPair {
                pair_id: pair_id(&file.repo_id, &file.path, &unit.qualified_name, unit.start_line),
                repo_id: file.repo_id.clone(),
                path: file.path.clone(),
                unit,
                repo_stars: stars,
            });
        }
    }
    summary
}

/// Loads every file under a repository root that the grammar handles,
/// sorted by relative path.
pub fn load_repo_files(entry: &RepoEntry, grammar: &dyn Grammar) -> Result<Vec<SourceFile>, ExtractError> {
    let mut files = Vec::new();
    for item in WalkDir::new(&entry.root).sort_by_file_name() {
        let item = item.map_err(|e| ExtractError::Io {
            path: entry.root.display().to_string(),
            source: e.into(),
        })?;
        if !item.file_type().is_file() {
            continue;
        }
        let handled = item
            .path()
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| grammar.extensions().contains(&e));
        if !handled {
            continue;
        }
        let rel = item
            .path()
            .strip_prefix(&entry.root)
            .unwrap_or(item.path())
            .to_string_lossy()
            .into_owned();
        let bytes = fs::read(item.path()).map_err(|source| ExtractError::Io {
            path: item.path().display().to_string(),
            source,
        })?;
        files.push(SourceFile::from_bytes(rel, entry.repo_id.clone(), &bytes)?);
    }
    files.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(files)
}

/// Extracts every repository in the manifest with more than `min_stars`
/// stars, one repository at a time in `repo_id` order.
pub fn extract_manifest(
    manifest: &RepoManifest,
    grammar: &dyn Grammar,
    min_stars: u64,
    mut emit: impl FnMut(CodeDocPair),
) -> Result<ExtractSummary, ExtractError> {
    let mut summary = ExtractSummary::default();
    for entry in manifest.entries() {
        if entry.stars <= min_stars {
            summary.skipped_repos += 1;
            continue;
        }
        let files = load_repo_files(entry, grammar)?;
        let mut part = extract_pairs(files, manifest, grammar, &mut emit);
        part.repos = 1;
        summary.merge(part);
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(path: &str, src: &str) -> SourceFile {
        SourceFile::new(path, "r1", src.to_string()).unwrap()
    }

    fn manifest() -> RepoManifest {
        RepoManifest::new([RepoEntry {
            repo_id: "r1".into(),
            stars: 120,
            license: "mit".into(),
            root: PathBuf::from("."),
        }])
    }

    #[test]
    fn paths_are_normalized() {
        assert_eq!(file(".\\pkg\\m.py", "").path, "pkg/m.py");
        assert!(matches!(
            SourceFile::new("", "r", String::new()),
            Err(ExtractError::EmptyPath)
        ));
    }

    #[test]
    fn invalid_utf8_is_replaced() {
        let f = SourceFile::from_bytes("a.py", "r", b"x = '\xff'\n").unwrap();
        assert!(f.content.contains('\u{FFFD}'));
    }

    #[test]
    fn only_documented_functions_become_pairs() {
        let src = "def a():\n    \"\"\"Doc.\"\"\"\n    return 1\n\ndef b():\n    return 2\n";
        let mut pairs = Vec::new();
        let summary = extract_pairs(vec![file("m.py", src)], &manifest(), &PythonGrammar, |p| pairs.push(p));
        assert_eq!(summary.functions, 2);
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].unit.qualified_name, "a");
        assert_eq!(pairs[0].repo_stars, Some(120));
    }

    #[test]
    fn empty_docstring_is_not_a_pair() {
        let mut n = 0;
        extract_pairs(
            vec![file("m.py", "def a():\n    \"\"\"  \"\"\"\n    return 1\n")],
            &manifest(),
            &PythonGrammar,
            |_| n += 1,
        );
        assert_eq!(n, 0);
    }

    #[test]
    fn empty_input() {
        let summary = extract_pairs(Vec::new(), &manifest(), &PythonGrammar, |_| unreachable!());
        assert_eq!(summary.files, 0);
        assert_eq!(summary.pairs, 0);
    }

    #[test]
    fn parse_errors_are_counted_not_fatal() {
        let files = vec![
            file("bad.py", "def (:\n"),
            file("good.py", "def a():\n    'Doc.'\n    return 1\n"),
        ];
        let mut pairs = Vec::new();
        let summary = extract_pairs(files, &manifest(), &PythonGrammar, |p| pairs.push(p));
        assert_eq!(summary.parse_errors.len(), 1);
        assert_eq!(summary.parse_errors[0].path, "bad.py");
        assert_eq!(pairs.len(), 1);
    }

    #[test]
    fn pair_id_is_stable() {
        let a = pair_id("r", "m.py", "f", 3);
        assert_eq!(a, pair_id("r", "m.py", "f", 3));
        assert_ne!(a, pair_id("r", "m.py", "f", 4));
        assert_eq!(a.len(), 16);
    }

    #[test]
    fn serialized_field_order_is_fixed() {
        let mut pairs = Vec::new();
        extract_pairs(
            vec![file("m.py", "def a():\n    'Doc.'\n    return 1\n")],
            &manifest(),
            &PythonGrammar,
            |p| pairs.push(p),
        );
        let line = serde_json::to_string(&pairs[0]).unwrap();
        let keys: Vec<_> = [
            "pair_id",
            "repo_id",
            "path",
            "qualified_name",
            "signature",
            "body_code",
            "docstring",
            "start_line",
            "end_line",
            "code_line_count",
            "doc_line_count",
            "complexity",
            "branch_blocks",
            "repo_stars",
        ]
        .iter()
        .map(|k| line.find(&format!("\"{k}\":")).unwrap())
        .collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]), "{line}");
        let back: CodeDocPair = serde_json::from_str(&line).unwrap();
        assert_eq!(back, pairs[0]);
    }
}
