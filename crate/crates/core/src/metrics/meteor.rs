use std::sync::OnceLock;

use rust_stemmers::{Algorithm, Stemmer};

use super::MetricError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeteorParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for MeteorParams {
    fn default() -> Self {
        Self {
            alpha: 0.9,
            beta: 3.0,
            gamma: 0.5,
        }
    }
}

fn stemmer() -> &'static Stemmer {
    static STEMMER: OnceLock<Stemmer> = OnceLock::new();
    STEMMER.get_or_init(|| Stemmer::create(Algorithm::English))
}

pub fn stem(word: &str) -> String {
    stemmer().stem(word).into_owned()
}

/// Greedy matching pass: hypothesis words from last to first, each taking
/// the last equal unmatched reference word. Matched entries are removed.
fn match_pass(hyp: &mut Vec<(usize, String)>, reference: &mut Vec<(usize, String)>) -> Vec<(usize, usize)> {
    let mut matches = Vec::new();
    for i in (0..hyp.len()).rev() {
        if let Some(j) = (0..reference.len()).rev().find(|&j| reference[j].1 == hyp[i].1) {
            matches.push((hyp[i].0, reference[j].0));
            hyp.remove(i);
            reference.remove(j);
        }
    }
    matches
}

/// Exact-then-stem unigram alignment as (hypothesis, reference) index
/// pairs sorted by hypothesis index.
pub fn align(candidate: &[String], reference: &[String]) -> Vec<(usize, usize)> {
    let mut hyp: Vec<_> = candidate.iter().cloned().enumerate().collect();
    let mut refs: Vec<_> = reference.iter().cloned().enumerate().collect();
    let mut matches = match_pass(&mut hyp, &mut refs);

    let mut hyp_stems: Vec<_> = hyp.into_iter().map(|(i, w)| (i, stem(&w))).collect();
    let mut ref_stems: Vec<_> = refs.into_iter().map(|(i, w)| (i, stem(&w))).collect();
    matches.extend(match_pass(&mut hyp_stems, &mut ref_stems));

    matches.sort_by_key(|m| m.0);
    matches
}

/// Number of runs of matches contiguous in both sequences.
pub fn count_chunks(matches: &[(usize, usize)]) -> usize {
    if matches.is_empty() {
        return 0;
    }
    1 + matches
        .windows(2)
        .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
        .count()
}

pub fn meteor(candidate: &[String], reference: &[String]) -> Result<f64, MetricError> {
    meteor_with(candidate, reference, MeteorParams::default())
}

/// METEOR with exact and stem matching stages (no synonym stage).
pub fn meteor_with(candidate: &[String], reference: &[String], params: MeteorParams) -> Result<f64, MetricError> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let matches = align(candidate, reference);
    if matches.is_empty() {
        return Ok(0.0);
    }
    let m = matches.len() as f64;
    let precision = m / candidate.len() as f64;
    let recall = m / reference.len() as f64;
    let fmean = precision * recall / (params.alpha * precision + (1.0 - params.alpha) * recall);
    let frag = count_chunks(&matches) as f64 / m;
    let penalty = params.gamma * frag.powf(params.beta);
    Ok((1.0 - penalty) * fmean)
}
