use std::collections::HashMap;

use super::MetricError;

const MAX_ORDER: usize = 4;
/// Constant of the length-scaled smoothing ("method 4").
const SMOOTHING_K: f64 = 5.0;

/// Clipped match count and candidate n-gram total for one order.
fn modified_precision(candidate: &[String], reference: &[String], n: usize) -> (usize, usize) {
    let mut counts: HashMap<&[String], usize> = HashMap::new();
    for gram in candidate.windows(n) {
        *counts.entry(gram).or_default() += 1;
    }
    let mut ref_counts: HashMap<&[String], usize> = HashMap::new();
    for gram in reference.windows(n) {
        *ref_counts.entry(gram).or_default() += 1;
    }
    let clipped = counts
        .iter()
        .map(|(gram, &c)| c.min(ref_counts.get(gram).copied().unwrap_or(0)))
        .sum();
    let total = candidate.len().saturating_sub(n - 1).max(1);
    (clipped, total)
}

/// Sentence BLEU against one reference with uniform 1–4-gram weights.
///
/// The i-th zero precision (i = 1, 2, ...) becomes
/// `ln(len) / (2^i * k) / total_ngrams` with k = 5, for candidates longer
/// than one token. A precision left at zero makes the score zero.
pub fn bleu(candidate: &[String], reference: &[String]) -> Result<f64, MetricError> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let hyp_len = candidate.len();
    let mut log_sum = 0.0;
    let mut zeros_seen = 0;
    for n in 1..=MAX_ORDER {
        let (matched, total) = modified_precision(candidate, reference, n);
        let p = if matched > 0 {
            matched as f64 / total as f64
        } else if hyp_len > 1 {
            zeros_seen += 1;
            let smoothed = 1.0 / (2f64.powi(zeros_seen) * SMOOTHING_K / (hyp_len as f64).ln());
            smoothed / total as f64
        } else {
            return Ok(0.0);
        };
        log_sum += p.ln() / MAX_ORDER as f64;
    }
    Ok(brevity_penalty(hyp_len, reference.len()) * log_sum.exp())
}

pub fn brevity_penalty(hyp_len: usize, ref_len: usize) -> f64 {
    if hyp_len > ref_len {
        1.0
    } else if hyp_len == 0 {
        0.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    }
}
