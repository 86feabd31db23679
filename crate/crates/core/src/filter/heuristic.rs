use std::collections::BTreeSet;

use crate::extract::CodeDocPair;
use crate::metrics::{is_word, tokenize, Origin};

use super::{FilterError, QualityScores, Scale, Scorer};

const PYTHON_KEYWORDS: &[&str] = &[
    "false", "none", "true", "and", "as", "assert", "async", "await", "break", "class", "continue", "def", "del",
    "elif", "else", "except", "finally", "for", "from", "global", "if", "import", "in", "is", "lambda", "nonlocal",
    "not", "or", "pass", "raise", "return", "try", "while", "with", "yield", "self", "cls",
];

/// Docstring lines at which the length weight saturates.
const FULL_LENGTH_LINES: f64 = 4.0;

fn doc_words(doc: &str) -> BTreeSet<String> {
    tokenize(doc, Origin::NaturalLanguage)
        .tokens
        .into_iter()
        .filter(|t| is_word(t))
        .collect()
}

fn code_identifiers(code: &str) -> BTreeSet<String> {
    tokenize(code, Origin::Code)
        .tokens
        .into_iter()
        .filter(|t| t.chars().any(char::is_alphabetic))
        .map(|t| t.to_lowercase())
        .filter(|t| !PYTHON_KEYWORDS.contains(&t.as_str()))
        .collect()
}

/// The step-2 coverage fraction before length weighting, if applicable.
pub fn branch_coverage(pair: &CodeDocPair) -> Option<f64> {
    let blocks = &pair.unit.branch_blocks;
    if blocks.is_empty() {
        return None;
    }
    let words = doc_words(pair.docstring());
    let covered = blocks
        .iter()
        .filter(|b| b.identifiers.iter().any(|id| words.contains(&id.to_lowercase())))
        .count();
    Some(covered as f64 / blocks.len() as f64)
}

/// Deterministic stand-in for a learned quality scorer.
///
/// With `D` the word tokens of the docstring, `C` the non-keyword
/// identifiers of the code (both lowercased) and `L = min(1, doc_lines/4)`:
///
/// - `step1 = L * (0.4 + 0.6 * min(1, 2 * |D ∩ C| / |C|))`, and 0 for an
///   empty docstring (`|C| = 0` counts as no overlap);
/// - `step2 = L * covered / blocks` over the outer branch blocks, where a
///   block is covered when any of its condition identifiers is in `D`;
///   absent when there are no such blocks;
/// - `step3` is never produced.
///
/// All values are on the normalized scale.
pub fn heuristic_score(pair: &CodeDocPair) -> QualityScores {
    let doc = pair.docstring();
    if doc.trim().is_empty() {
        return QualityScores {
            step1: 0.0,
            step2: pair.unit.has_branch_blocks().then_some(0.0),
            step3: None,
            scale: Scale::Normalized,
        };
    }
    let length = (pair.unit.doc_line_count as f64 / FULL_LENGTH_LINES).min(1.0);
    let words = doc_words(doc);
    let idents = code_identifiers(&pair.code());
    let overlap = if idents.is_empty() {
        0.0
    } else {
        idents.intersection(&words).count() as f64 / idents.len() as f64
    };
    QualityScores {
        step1: length * (0.4 + 0.6 * (2.0 * overlap).min(1.0)),
        step2: branch_coverage(pair).map(|c| length * c),
        step3: None,
        scale: Scale::Normalized,
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct HeuristicScorer;

impl Scorer for HeuristicScorer {
    fn score(&self, pairs: &[CodeDocPair]) -> Result<Vec<QualityScores>, FilterError> {
        Ok(pairs.iter().map(heuristic_score).collect())
    }
}
