//! Corpus and annotation statistics with JSON and CSV output.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::annotation::{aggregate_annotations, AnnotationRecord, EvalRating};
use crate::extract::CodeDocPair;
use crate::filter::ScoreRecord;
use crate::jsonl::{self, JsonlError};

/// Width of the docstring-length buckets, in characters.
pub const DOC_CHARS_BUCKET: usize = 50;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureHistograms {
    pub code_lines: BTreeMap<usize, usize>,
    pub doc_lines: BTreeMap<usize, usize>,
    pub complexity: BTreeMap<u32, usize>,
    /// Keyed by bucket lower bound.
    pub docstring_chars: BTreeMap<usize, usize>,
}

impl FeatureHistograms {
    pub fn of(pairs: &[CodeDocPair]) -> Self {
        let mut h = Self::default();
        for p in pairs {
            let u = &p.unit;
            *h.code_lines.entry(u.code_line_count).or_default() += 1;
            *h.doc_lines.entry(u.doc_line_count).or_default() += 1;
            *h.complexity.entry(u.complexity).or_default() += 1;
            let chars = p.docstring().chars().count();
            *h.docstring_chars
                .entry(chars / DOC_CHARS_BUCKET * DOC_CHARS_BUCKET)
                .or_default() += 1;
        }
        h
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageStats {
    pub stage: String,
    pub pairs: usize,
    pub histograms: FeatureHistograms,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    /// In pipeline order.
    pub stages: Vec<StageStats>,
    pub duplicates: usize,
}

impl CorpusStats {
    pub fn push(&mut self, stage: &str, pairs: &[CodeDocPair]) {
        self.stages.push(StageStats {
            stage: stage.to_string(),
            pairs: pairs.len(),
            histograms: FeatureHistograms::of(pairs),
        });
    }

    pub fn count(&self, stage: &str) -> Option<usize> {
        self.stages.iter().find(|s| s.stage == stage).map(|s| s.pairs)
    }

    /// True when no stage holds more pairs than the one before it.
    pub fn is_monotone(&self) -> bool {
        self.stages.windows(2).all(|w| w[1].pairs <= w[0].pairs)
    }
}

/// Counts per rating value; fractional means fall into the bucket of
/// their integer part.
pub type ScoreHistogram = BTreeMap<String, usize>;

fn score_histogram(max: u8) -> ScoreHistogram {
    (0..=max)
        .map(|v| v.to_string())
        .chain(["blank".to_string()])
        .map(|k| (k, 0))
        .collect()
}

fn bump(h: &mut ScoreHistogram, value: Option<f64>) {
    let key = match value {
        Some(v) => (v.max(0.0).floor() as u64).to_string(),
        None => "blank".to_string(),
    };
    *h.entry(key).or_default() += 1;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreStats {
    pub records: usize,
    pub step1: ScoreHistogram,
    pub step2: ScoreHistogram,
    pub step3: ScoreHistogram,
}

impl ScoreStats {
    pub fn of(records: &[ScoreRecord]) -> Self {
        let mut s = Self {
            records: records.len(),
            step1: score_histogram(3),
            step2: score_histogram(3),
            step3: score_histogram(3),
        };
        for r in records {
            let raw = r.scores.to_raw();
            bump(&mut s.step1, Some(raw.step1));
            bump(&mut s.step2, raw.step2);
            bump(&mut s.step3, raw.step3);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingStats {
    pub ratings: usize,
    pub a1: ScoreHistogram,
    pub a2: ScoreHistogram,
    pub a3: ScoreHistogram,
    pub a4: ScoreHistogram,
}

impl RatingStats {
    pub fn of(ratings: &[EvalRating]) -> Self {
        let mut s = Self {
            ratings: ratings.len(),
            a1: score_histogram(4),
            a2: score_histogram(4),
            a3: score_histogram(4),
            a4: score_histogram(4),
        };
        for r in ratings {
            bump(&mut s.a1, Some(f64::from(r.a1)));
            bump(&mut s.a2, Some(f64::from(r.a2)));
            bump(&mut s.a3, Some(f64::from(r.a3)));
            bump(&mut s.a4, Some(f64::from(r.a4)));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StatsReport {
    Corpus(CorpusStats),
    Scores(ScoreStats),
    Ratings(RatingStats),
}

/// Every non-comment line of a JSON-lines file with its line number.
pub(crate) fn read_values(path: &Path) -> Result<Vec<(usize, Value)>, JsonlError> {
    jsonl::read_with(path, |line, v: Value| Ok((line, v)))
}

pub(crate) fn parse_values<T: serde::de::DeserializeOwned>(
    path: &Path,
    values: Vec<(usize, Value)>,
) -> Result<Vec<T>, JsonlError> {
    values
        .into_iter()
        .map(|(line, v)| {
            serde_json::from_value(v).map_err(|e| JsonlError::Schema {
                path: path.display().to_string(),
                line,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Reads per-pair scores from a score file or, averaging across
/// annotators, from a 3-step annotation export.
pub fn load_score_records(path: &Path) -> Result<Vec<ScoreRecord>, JsonlError> {
    let values = read_values(path)?;
    if values.first().is_some_and(|(_, v)| v.get("annotator_id").is_some()) {
        let records: Vec<AnnotationRecord> = parse_values(path, values)?;
        Ok(aggregate_annotations(&records).iter().map(|a| a.to_record()).collect())
    } else {
        values
            .into_iter()
            .map(|(line, v)| {
                let schema = |message: String| JsonlError::Schema {
                    path: path.display().to_string(),
                    line,
                    message,
                };
                let r: ScoreRecord = serde_json::from_value(v).map_err(|e| schema(e.to_string()))?;
                r.scores.validate().map_err(|e| schema(e.to_string()))?;
                Ok(r)
            })
            .collect()
    }
}

/// Statistics for a pair corpus, a score file, a 3-step annotation export
/// or a rating export; the kind is taken from the first record.
pub fn stats(path: &Path) -> Result<StatsReport, JsonlError> {
    let values = read_values(path)?;
    let has = |k: &str| values.first().is_some_and(|(_, v)| v.get(k).is_some());
    if has("a1") {
        let ratings: Vec<EvalRating> = parse_values(path, values)?;
        Ok(StatsReport::Ratings(RatingStats::of(&ratings)))
    } else if has("annotator_id") {
        let records: Vec<AnnotationRecord> = parse_values(path, values)?;
        let scores: Vec<ScoreRecord> = records
            .iter()
            .map(|r| ScoreRecord {
                pair_id: r.pair_id.clone(),
                scores: crate::filter::QualityScores {
                    step1: f64::from(r.step1),
                    step2: r.step2.map(f64::from),
                    step3: r.step3.map(f64::from),
                    scale: crate::filter::Scale::Raw,
                },
            })
            .collect();
        Ok(StatsReport::Scores(ScoreStats::of(&scores)))
    } else if has("step1") {
        let records: Vec<ScoreRecord> = parse_values(path, values)?;
        Ok(StatsReport::Scores(ScoreStats::of(&records)))
    } else {
        let pairs: Vec<CodeDocPair> = parse_values(path, values)?;
        let mut s = CorpusStats::default();
        s.push("input", &pairs);
        Ok(StatsReport::Corpus(s))
    }
}

/// Long-format CSV: `group,histogram,bucket,count`. Stage sizes appear as
/// histogram `pairs` with an empty bucket.
pub fn write_stats_csv<W: Write>(report: &StatsReport, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["group", "histogram", "bucket", "count"])?;
    let mut row = |g: &str, h: &str, b: String, c: usize| w.write_record([g, h, &b, &c.to_string()]);
    match report {
        StatsReport::Corpus(s) => {
            for st in &s.stages {
                row(&st.stage, "pairs", String::new(), st.pairs)?;
                let h = &st.histograms;
                for (k, v) in &h.code_lines {
                    row(&st.stage, "code_lines", k.to_string(), *v)?;
                }
                for (k, v) in &h.doc_lines {
                    row(&st.stage, "doc_lines", k.to_string(), *v)?;
                }
                for (k, v) in &h.complexity {
                    row(&st.stage, "complexity", k.to_string(), *v)?;
                }
                for (k, v) in &h.docstring_chars {
                    row(&st.stage, "docstring_chars", k.to_string(), *v)?;
                }
            }
            row("corpus", "duplicates", String::new(), s.duplicates)?;
        }
        StatsReport::Scores(s) => {
            row("scores", "records", String::new(), s.records)?;
            for (name, h) in [("step1", &s.step1), ("step2", &s.step2), ("step3", &s.step3)] {
                for (k, v) in h {
                    row("scores", name, k.clone(), *v)?;
                }
            }
        }
        StatsReport::Ratings(s) => {
            row("ratings", "ratings", String::new(), s.ratings)?;
            for (name, h) in [("a1", &s.a1), ("a2", &s.a2), ("a3", &s.a3), ("a4", &s.a4)] {
                for (k, v) in h {
                    row("ratings", name, k.clone(), *v)?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::{QualityScores, Scale};

    fn rec(step1: f64, step2: Option<f64>) -> ScoreRecord {
        ScoreRecord {
            pair_id: "p".into(),
            scores: QualityScores {
                step1,
                step2,
                step3: None,
                scale: Scale::Raw,
            },
        }
    }

    #[test]
    fn score_buckets() {
        let s = ScoreStats::of(&[rec(2.5, Some(0.0)), rec(3.0, None), rec(0.0, Some(1.0))]);
        assert_eq!(s.step1["2"], 1);
        assert_eq!(s.step1["3"], 1);
        assert_eq!(s.step2["0"], 1);
        assert_eq!(s.step2["blank"], 1);
        assert_eq!(s.step3["blank"], 3);
    }

    #[test]
    fn empty_inputs_give_zero_histograms() {
        let s = ScoreStats::of(&[]);
        assert!(s.step1.values().all(|&c| c == 0));
        assert_eq!(s.step1.len(), 5);
        let mut c = CorpusStats::default();
        c.push("raw", &[]);
        assert!(c.is_monotone());
        assert!(c.stages[0].histograms.code_lines.is_empty());
    }

    #[test]
    fn schema_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        std::fs::write(&path, "# header\n{\"pair_id\":\"p\",\"step1\":1,\"step2\":null,\"step3\":null,\"scale\":\"raw\"}\n{\"pair_id\":\"q\",\"step1\":\"x\"}\n").unwrap();
        match stats(&path) {
            Err(JsonlError::Schema { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
