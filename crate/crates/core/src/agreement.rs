//! Metric/human agreement by an adapted Kendall's tau.
//!
//! Over all unordered pairs of examples: a pair with equal human scores is
//! dropped; otherwise it is concordant when the metric orders it the same
//! way, discordant when it orders it the other way and a tie when the
//! metric scores are equal. Then
//!
//! ```text
//! tau = |con - dis| / (con + dis + tie)
//! ```
//!
//! The absolute value means a perfectly anti-correlated metric also scores
//! 1. [`TauMode::Signed`] drops the absolute value for diagnostics.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{EvalRating, REFERENCE_SYSTEM};
use crate::metrics::MetricReport;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgreementError {
    #[error("need at least 2 examples, got {0}")]
    TooFewExamples(usize),
    #[error("every pair has equal human scores")]
    DegenerateInput,
    #[error("non-finite score for example {0}")]
    NonFinite(String),
    #[error("join failed: {0}")]
    Join(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredExample {
    pub example_id: String,
    pub metric_score: f64,
    pub human_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairClass {
    Concordant,
    Discordant,
    Tie,
    Dropped,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TauMode {
    #[default]
    Absolute,
    Signed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementResult {
    pub tau: f64,
    pub concordant: u64,
    pub discordant: u64,
    pub tie: u64,
    pub dropped_human_ties: u64,
}

/// Classifies one pair; scores are compared exactly.
pub fn classify_pair(s1_metric: f64, s2_metric: f64, s1_human: f64, s2_human: f64) -> PairClass {
    let human = s1_human.partial_cmp(&s2_human);
    let metric = s1_metric.partial_cmp(&s2_metric);
    use std::cmp::Ordering::Equal;
    match (human, metric) {
        (Some(Equal), _) | (None, _) => PairClass::Dropped,
        (_, Some(Equal)) | (_, None) => PairClass::Tie,
        (h, m) if h == m => PairClass::Concordant,
        _ => PairClass::Discordant,
    }
}

#[derive(Default, Clone, Copy)]
struct Counts {
    con: u64,
    dis: u64,
    tie: u64,
    dropped: u64,
}

impl Counts {
    fn add(mut self, class: PairClass) -> Self {
        match class {
            PairClass::Concordant => self.con += 1,
            PairClass::Discordant => self.dis += 1,
            PairClass::Tie => self.tie += 1,
            PairClass::Dropped => self.dropped += 1,
        }
        self
    }

    fn merge(self, o: Counts) -> Self {
        Counts {
            con: self.con + o.con,
            dis: self.dis + o.dis,
            tie: self.tie + o.tie,
            dropped: self.dropped + o.dropped,
        }
    }
}

fn count_pairs(examples: &[(f64, f64)]) -> Counts {
    (0..examples.len())
        .into_par_iter()
        .map(|i| {
            let (m1, h1) = examples[i];
            examples[i + 1..]
                .iter()
                .fold(Counts::default(), |c, &(m2, h2)| c.add(classify_pair(m1, m2, h1, h2)))
        })
        .reduce(Counts::default, Counts::merge)
}

fn finish(counts: Counts, mode: TauMode) -> Result<AgreementResult, AgreementError> {
    let denom = counts.con + counts.dis + counts.tie;
    if denom == 0 {
        return Err(AgreementError::DegenerateInput);
    }
    let diff = counts.con as f64 - counts.dis as f64;
    let numerator = match mode {
        TauMode::Absolute => diff.abs(),
        TauMode::Signed => diff,
    };
    Ok(AgreementResult {
        tau: numerator / denom as f64,
        concordant: counts.con,
        discordant: counts.dis,
        tie: counts.tie,
        dropped_human_ties: counts.dropped,
    })
}

fn validated(examples: &[ScoredExample]) -> Result<Vec<(f64, f64)>, AgreementError> {
    examples
        .iter()
        .map(|e| {
            if e.metric_score.is_finite() && e.human_score.is_finite() {
                Ok((e.metric_score, e.human_score))
            } else {
                Err(AgreementError::NonFinite(e.example_id.clone()))
            }
        })
        .collect()
}

pub fn kendall_tau(examples: &[ScoredExample]) -> Result<AgreementResult, AgreementError> {
    kendall_tau_with(examples, TauMode::Absolute)
}

pub fn kendall_tau_with(examples: &[ScoredExample], mode: TauMode) -> Result<AgreementResult, AgreementError> {
    if examples.len() < 2 {
        return Err(AgreementError::TooFewExamples(examples.len()));
    }
    finish(count_pairs(&validated(examples)?), mode)
}

/// Counts pairs only within each group, then applies the formula to the
/// summed counts.
pub fn kendall_tau_grouped(groups: &[Vec<ScoredExample>], mode: TauMode) -> Result<AgreementResult, AgreementError> {
    let total: usize = groups.iter().map(Vec::len).sum();
    if total < 2 {
        return Err(AgreementError::TooFewExamples(total));
    }
    let mut counts = Counts::default();
    for g in groups {
        counts = counts.merge(count_pairs(&validated(g)?));
    }
    finish(counts, mode)
}

/// Human-rated aspects, in table column order.
pub const ASPECTS: [&str; 5] = ["A1", "A2", "A3", "A4", "Overall"];

/// Automatic metrics, in table row order.
pub const METRICS: [&str; 7] = [
    "ROUGE-1f",
    "ROUGE-Lf",
    "BLEU",
    "METEOR",
    "BERTScore",
    "CodeBERTScore",
    "CER",
];

fn metric_value(report: &MetricReport, metric: &str) -> Option<f64> {
    match metric {
        "ROUGE-1f" => Some(report.rouge1_f),
        "ROUGE-Lf" => Some(report.rouge_l_f),
        "BLEU" => Some(report.bleu),
        "METEOR" => Some(report.meteor),
        "BERTScore" => report.bertscore_like,
        "CodeBERTScore" => report.codebertscore_like,
        "CER" => report.cer,
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TableOptions {
    pub within_system: bool,
    pub mode: TauMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub metric: String,
    /// One entry per [`ASPECTS`] column; `None` where tau is undefined.
    pub tau: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementTable {
    pub rows: Vec<TableRow>,
    pub examples: usize,
}

/// Mean human aspect scores per (example, system).
fn human_means(ratings: &[EvalRating]) -> BTreeMap<(String, String), [f64; 5]> {
    let mut sums: BTreeMap<(String, String), ([f64; 5], usize)> = BTreeMap::new();
    for r in ratings.iter().filter(|r| r.system_id != REFERENCE_SYSTEM) {
        let e = sums
            .entry((r.example_id.clone(), r.system_id.clone()))
            .or_insert(([0.0; 5], 0));
        let aspects = [r.a1, r.a2, r.a3, r.a4].map(f64::from);
        for (s, a) in e.0.iter_mut().zip(aspects) {
            *s += a;
        }
        e.0[4] += r.overall;
        e.1 += 1;
    }
    sums.into_iter()
        .map(|(k, (s, n))| (k, s.map(|x| x / n as f64)))
        .collect()
}

/// Tau for every metric × aspect over reports joined with human ratings
/// on (example id, system). Ratings of the reference docstring itself are
/// left out; any other unmatched key is an error.
pub fn agreement_table(
    reports: &[MetricReport],
    ratings: &[EvalRating],
    options: TableOptions,
) -> Result<AgreementTable, AgreementError> {
    let human = human_means(ratings);
    let metrics: BTreeMap<(String, String), &MetricReport> = reports
        .iter()
        .map(|r| ((r.pair_id.clone(), r.system.clone()), r))
        .collect();

    let human_keys: BTreeSet<_> = human.keys().collect();
    let metric_keys: BTreeSet<_> = metrics.keys().collect();
    let unmatched: Vec<String> = human_keys
        .symmetric_difference(&metric_keys)
        .map(|(e, s)| format!("{e}/{s}"))
        .collect();
    if !unmatched.is_empty() {
        return Err(AgreementError::Join(format!(
            "{} unmatched (example/system) keys: {}",
            unmatched.len(),
            unmatched.join(", ")
        )));
    }
    if human.is_empty() {
        return Err(AgreementError::Join("no (example, system) rows to join".into()));
    }

    let mut rows = Vec::new();
    for metric in METRICS {
        if !reports.iter().any(|r| metric_value(r, metric).is_some()) {
            continue;
        }
        let tau = (0..ASPECTS.len())
            .map(|aspect| {
                let mut groups: BTreeMap<&str, Vec<ScoredExample>> = BTreeMap::new();
                for (key, scores) in &human {
                    let Some(m) = metric_value(metrics[key], metric) else {
                        continue;
                    };
                    let group = if options.within_system { key.1.as_str() } else { "" };
                    groups.entry(group).or_default().push(ScoredExample {
                        example_id: key.0.clone(),
                        metric_score: m,
                        human_score: scores[aspect],
                    });
                }
                let groups: Vec<_> = groups.into_values().collect();
                kendall_tau_grouped(&groups, options.mode).ok().map(|r| r.tau)
            })
            .collect();
        rows.push(TableRow {
            metric: metric.to_string(),
            tau,
        });
    }
    Ok(AgreementTable {
        rows,
        examples: human.len(),
    })
}

pub fn write_table_csv<W: Write>(table: &AgreementTable, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["Metric"];
    header.extend(ASPECTS);
    w.write_record(&header)?;
    for row in &table.rows {
        let mut record = vec![row.metric.clone()];
        record.extend(row.tau.iter().map(|t| t.map(|t| format!("{t:.3}")).unwrap_or_default()));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn examples(metric: &[f64], human: &[f64]) -> Vec<ScoredExample> {
        metric
            .iter()
            .zip(human)
            .enumerate()
            .map(|(i, (&m, &h))| ScoredExample {
                example_id: format!("e{i}"),
                metric_score: m,
                human_score: h,
            })
            .collect()
    }

    #[test]
    fn classification_table() {
        assert_eq!(classify_pair(0.3, 0.4, 1.0, 2.0), PairClass::Concordant);
        assert_eq!(classify_pair(0.4, 0.3, 1.0, 2.0), PairClass::Discordant);
        assert_eq!(classify_pair(0.4, 0.4, 1.0, 2.0), PairClass::Tie);
        assert_eq!(classify_pair(0.1, 0.9, 2.0, 2.0), PairClass::Dropped);
        assert_eq!(classify_pair(0.9, 0.1, 3.0, 2.0), PairClass::Concordant);
    }

    #[test]
    fn hand_enumerated() {
        let r = kendall_tau(&examples(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0])).unwrap();
        assert_eq!((r.concordant, r.tau), (3, 1.0));

        let r = kendall_tau(&examples(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0])).unwrap();
        assert_eq!((r.discordant, r.tau), (3, 1.0));
        let s = kendall_tau_with(&examples(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), TauMode::Signed).unwrap();
        assert_eq!(s.tau, -1.0);

        let r = kendall_tau(&examples(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0])).unwrap();
        assert_eq!((r.concordant, r.tie, r.tau), (2, 1, 2.0 / 3.0));
    }

    #[test]
    fn degenerate_and_short_inputs() {
        assert_eq!(
            kendall_tau(&examples(&[1.0, 2.0], &[2.0, 2.0])),
            Err(AgreementError::DegenerateInput)
        );
        assert_eq!(
            kendall_tau(&examples(&[1.0], &[2.0])),
            Err(AgreementError::TooFewExamples(1))
        );
        assert!(matches!(
            kendall_tau(&examples(&[f64::NAN, 1.0], &[1.0, 2.0])),
            Err(AgreementError::NonFinite(_))
        ));
    }

    #[test]
    fn grouped_counts_only_within_groups() {
        let a = examples(&[1.0, 2.0], &[1.0, 2.0]);
        let b = examples(&[2.0, 1.0], &[1.0, 2.0]);
        let r = kendall_tau_grouped(&[a, b], TauMode::Absolute).unwrap();
        assert_eq!((r.concordant, r.discordant, r.tau), (1, 1, 0.0));
    }
}
