//! Test-set assembly from annotated pairs.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::dedup::{CorpusIndex, DedupReport, DedupText};
use crate::extract::CodeDocPair;
use crate::filter::{QualityScores, ScoreRecord};

/// Raw score every present step must reach.
pub const TEST_SET_MIN_RAW: f64 = 1.0;

/// True when every present step is at least 1 on the raw scale; blank
/// steps pass.
pub fn passes_test_rule(scores: &QualityScores) -> bool {
    let raw = scores.to_raw();
    [Some(raw.step1), raw.step2, raw.step3]
        .into_iter()
        .flatten()
        .all(|s| s >= TEST_SET_MIN_RAW)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TestSetOutcome {
    pub kept: Vec<CodeDocPair>,
    /// Pairs failing the score rule.
    pub low_score: Vec<String>,
    /// Pairs dropped as duplicates of a raw-corpus entry.
    pub duplicates: Vec<DedupReport>,
    /// Annotated ids with no pair in the pool.
    pub missing: Vec<String>,
}

/// Keeps annotated pairs passing [`passes_test_rule`] that duplicate no
/// other entry of the raw corpus. Pairs are looked up by id in `pool`; a
/// pair never counts as its own duplicate.
pub fn assemble_test_set(annotated: &[ScoreRecord], pool: &[CodeDocPair], raw: &CorpusIndex) -> TestSetOutcome {
    let by_id: HashMap<&str, &CodeDocPair> = pool.iter().map(|p| (p.pair_id.as_str(), p)).collect();
    let mut seen = HashSet::new();
    let mut out = TestSetOutcome::default();
    let mut passing = Vec::new();
    for r in annotated {
        if !seen.insert(r.pair_id.as_str()) {
            continue;
        }
        let Some(&pair) = by_id.get(r.pair_id.as_str()) else {
            out.missing.push(r.pair_id.clone());
            continue;
        };
        if passes_test_rule(&r.scores) {
            passing.push(pair);
        } else {
            out.low_score.push(r.pair_id.clone());
        }
    }
    for pair in passing {
        let report = raw.lookup_excluding_self(&DedupText::from(pair));
        if report.is_duplicate {
            out.duplicates.push(report);
        } else {
            out.kept.push(pair.clone());
        }
    }
    out
}
