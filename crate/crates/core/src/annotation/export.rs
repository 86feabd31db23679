//! Unblinded JSON-lines exports and per-pair score aggregation.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::{AnnotationRecord, AnnotationStore, Protocol, SCHEMA_VERSION};
use crate::filter::{QualityScores, Scale, ScoreRecord};

/// Writes every current record of `protocol` after a `#` header line and
/// returns the record count.
pub fn export<W: Write>(store: &AnnotationStore, protocol: Protocol, mut out: W) -> io::Result<usize> {
    let lines: Vec<String> = match protocol {
        Protocol::Annotate3Step => store.annotations().iter().map(to_line).collect(),
        Protocol::Eval4Aspect => store.ratings().iter().map(to_line).collect(),
    };
    writeln!(
        out,
        "# docmine export protocol={protocol} schema_version={SCHEMA_VERSION} records={}",
        lines.len()
    )?;
    for line in &lines {
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(lines.len())
}

fn to_line<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("records serialize")
}

/// Mean raw step scores of one pair across its annotators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedScores {
    pub pair_id: String,
    pub annotators: usize,
    #[serde(flatten)]
    pub scores: QualityScores,
}

impl AggregatedScores {
    pub fn to_record(&self) -> ScoreRecord {
        ScoreRecord {
            pair_id: self.pair_id.clone(),
            scores: self.scores,
        }
    }
}

fn mean(values: &[u8]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().map(|&v| f64::from(v)).sum::<f64>() / values.len() as f64)
    }
}

/// Averages each step over the annotators who gave it; a step nobody
/// scored stays blank. Output is ordered by pair id.
pub fn aggregate_annotations(records: &[AnnotationRecord]) -> Vec<AggregatedScores> {
    let mut by_pair: BTreeMap<&str, Vec<&AnnotationRecord>> = BTreeMap::new();
    for r in records {
        by_pair.entry(&r.pair_id).or_default().push(r);
    }
    by_pair
        .into_iter()
        .map(|(pair_id, rs)| {
            let step1: Vec<u8> = rs.iter().map(|r| r.step1).collect();
            let step2: Vec<u8> = rs.iter().filter_map(|r| r.step2).collect();
            let step3: Vec<u8> = rs.iter().filter_map(|r| r.step3).collect();
            AggregatedScores {
                pair_id: pair_id.to_string(),
                annotators: rs.len(),
                scores: QualityScores {
                    step1: mean(&step1).expect("at least one record"),
                    step2: mean(&step2),
                    step3: mean(&step3),
                    scale: Scale::Raw,
                },
            }
        })
        .collect()
}
