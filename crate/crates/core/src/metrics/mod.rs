//! Automatic metrics for generated docstrings.
//!
//! All n-gram metrics consume [`tokenize`]d natural-language sequences; CER
//! additionally consumes the code-origin tokens of the function. Embedding
//! scores run only when an [`EmbeddingProvider`] is configured.

mod bleu;
mod cer;
mod embedding;
mod meteor;
mod rouge;
mod tokenize;

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bleu::{bleu, brevity_penalty};
pub use cer::cer;
pub use embedding::{embedding_score, EmbeddingProvider, HttpEmbeddingProvider, Serialized};
pub use meteor::{align as meteor_align, count_chunks, meteor, meteor_with, stem, MeteorParams};
pub use rouge::{lcs_len, rouge, RougeScores};
pub use tokenize::{is_word, tokenize, Origin, TokenSequence};

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
pub enum MetricError {
    #[error("empty input")]
    EmptyInput,
    #[error("no reference for pair {0}")]
    MissingReference(String),
    #[error("embedding provider error: {0}")]
    Provider(String),
}

/// Metric values for one candidate, stored unscaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub pair_id: String,
    pub system: String,
    pub rouge1_f: f64,
    #[serde(rename = "rougeL_f")]
    pub rouge_l_f: f64,
    pub bleu: f64,
    pub meteor: f64,
    /// Absent when code and reference share no word.
    pub cer: Option<f64>,
    pub bertscore_like: Option<f64>,
    pub codebertscore_like: Option<f64>,
}

/// Arithmetic means over the non-excluded pairs of one system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub system: String,
    pub pairs: usize,
    pub excluded: usize,
    pub rouge1_f: f64,
    #[serde(rename = "rougeL_f")]
    pub rouge_l_f: f64,
    pub bleu: f64,
    pub meteor: f64,
    pub cer: Option<f64>,
    pub cer_pairs: usize,
    pub bertscore_like: Option<f64>,
    pub codebertscore_like: Option<f64>,
}

/// A reference docstring with the code it documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub code: String,
    pub docstring: String,
}

/// One line of a candidate file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub pair_id: String,
    pub candidate: String,
    pub system: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFailure {
    pub pair_id: String,
    pub system: String,
    pub error: MetricError,
}

#[derive(Default, Clone, Copy)]
pub struct EvalConfig<'a> {
    pub nl_embedder: Option<&'a (dyn EmbeddingProvider + Sync)>,
    pub code_embedder: Option<&'a (dyn EmbeddingProvider + Sync)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEvaluation {
    pub reports: Vec<MetricReport>,
    /// One per system, ordered by system name.
    pub aggregates: Vec<AggregateReport>,
    pub failures: Vec<PairFailure>,
}

/// Scores one candidate against its reference.
pub fn evaluate_pair(
    pair_id: &str,
    system: &str,
    reference: &Reference,
    candidate: &str,
    config: EvalConfig<'_>,
) -> Result<MetricReport, MetricError> {
    let cand = tokenize(candidate, Origin::NaturalLanguage).tokens;
    let refr = tokenize(&reference.docstring, Origin::NaturalLanguage).tokens;
    let code = tokenize(&reference.code, Origin::Code).tokens;
    let r = rouge(&cand, &refr)?;
    let embed = |p: Option<&(dyn EmbeddingProvider + Sync)>| p.map(|p| embedding_score(&cand, &refr, p)).transpose();
    Ok(MetricReport {
        pair_id: pair_id.to_string(),
        system: system.to_string(),
        rouge1_f: r.rouge1_f,
        rouge_l_f: r.rouge_l_f,
        bleu: bleu(&cand, &refr)?,
        meteor: meteor(&cand, &refr)?,
        cer: cer(&code, &cand, &refr),
        bertscore_like: embed(config.nl_embedder)?,
        codebertscore_like: embed(config.code_embedder)?,
    })
}

/// Order-independent mean: values are summed in sorted order.
fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(v.iter().sum::<f64>() / v.len() as f64)
}

/// Evaluates every candidate and aggregates per system.
///
/// Empty texts and unknown pair ids are recorded as failures and excluded
/// from the aggregate; embedding-provider errors abort the run.
pub fn evaluate_corpus(
    references: &HashMap<String, Reference>,
    candidates: &[Candidate],
    config: EvalConfig<'_>,
) -> Result<CorpusEvaluation, MetricError> {
    let results: Vec<Result<MetricReport, MetricError>> = candidates
        .par_iter()
        .map(|c| match references.get(&c.pair_id) {
            Some(r) => evaluate_pair(&c.pair_id, &c.system, r, &c.candidate, config),
            None => Err(MetricError::MissingReference(c.pair_id.clone())),
        })
        .collect();

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    let mut excluded: BTreeMap<&str, usize> = BTreeMap::new();
    for (c, result) in candidates.iter().zip(results) {
        match result {
            Ok(r) => reports.push(r),
            Err(err @ MetricError::Provider(_)) => return Err(err),
            Err(error) => {
                *excluded.entry(&c.system).or_default() += 1;
                failures.push(PairFailure {
                    pair_id: c.pair_id.clone(),
                    system: c.system.clone(),
                    error,
                });
            }
        }
    }

    let mut by_system: BTreeMap<&str, Vec<&MetricReport>> = BTreeMap::new();
    for system in excluded.keys() {
        by_system.entry(system).or_default();
    }
    for r in &reports {
        by_system.entry(&r.system).or_default().push(r);
    }
    let aggregates = by_system
        .into_iter()
        .map(|(system, rs)| aggregate(system, &rs, excluded.get(system).copied().unwrap_or(0)))
        .collect();

    Ok(CorpusEvaluation {
        reports,
        aggregates,
        failures,
    })
}

pub fn aggregate(system: &str, reports: &[&MetricReport], excluded: usize) -> AggregateReport {
    let m = |f: fn(&MetricReport) -> Option<f64>| mean(reports.iter().filter_map(|r| f(r)));
    AggregateReport {
        system: system.to_string(),
        pairs: reports.len(),
        excluded,
        rouge1_f: m(|r| Some(r.rouge1_f)).unwrap_or(0.0),
        rouge_l_f: m(|r| Some(r.rouge_l_f)).unwrap_or(0.0),
        bleu: m(|r| Some(r.bleu)).unwrap_or(0.0),
        meteor: m(|r| Some(r.meteor)).unwrap_or(0.0),
        cer: m(|r| r.cer),
        cer_pairs: reports.iter().filter(|r| r.cer.is_some()).count(),
        bertscore_like: m(|r| r.bertscore_like),
        codebertscore_like: m(|r| r.codebertscore_like),
    }
}

/// One line of a metrics report file: per-pair reports first, then one
/// aggregate per system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ReportLine {
    Pair(MetricReport),
    Aggregate(AggregateReport),
}

impl CorpusEvaluation {
    pub fn lines(&self) -> Vec<ReportLine> {
        self.reports
            .iter()
            .cloned()
            .map(ReportLine::Pair)
            .chain(self.aggregates.iter().cloned().map(ReportLine::Aggregate))
            .collect()
    }
}

/// The per-pair reports of a report file.
pub fn pair_reports(lines: Vec<ReportLine>) -> Vec<MetricReport> {
    lines
        .into_iter()
        .filter_map(|l| match l {
            ReportLine::Pair(r) => Some(r),
            ReportLine::Aggregate(_) => None,
        })
        .collect()
}

/// Writes the aggregate table with the display scaling of the usual
/// results table: BLEU, METEOR and embedding scores ×100, ROUGE and CER as
/// fractions.
pub fn write_table_csv<W: Write>(aggregates: &[AggregateReport], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "Model",
        "ROUGE-1 f",
        "ROUGE-L f",
        "BLEU",
        "CER",
        "METEOR",
        "BERTScore",
        "CodeBERTScore",
    ])?;
    let frac = |x: f64| format!("{x:.4}");
    let pct = |x: f64| format!("{:.2}", x * 100.0);
    for a in aggregates {
        w.write_record([
            a.system.clone(),
            frac(a.rouge1_f),
            frac(a.rouge_l_f),
            pct(a.bleu),
            a.cer.map(frac).unwrap_or_default(),
            pct(a.meteor),
            a.bertscore_like.map(pct).unwrap_or_default(),
            a.codebertscore_like.map(pct).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn refs() -> HashMap<String, Reference> {
        [
            (
                "p1",
                "def add(a, b):\n    return a + b",
                "Add a and b.\nReturns the sum.",
            ),
            ("p2", "def neg(x):\n    return -x", "Negate x and return it."),
        ]
        .into_iter()
        .map(|(id, code, doc)| {
            (
                id.to_string(),
                Reference {
                    code: code.into(),
                    docstring: doc.into(),
                },
            )
        })
        .collect()
    }

    fn cand(id: &str, text: &str, system: &str) -> Candidate {
        Candidate {
            pair_id: id.into(),
            candidate: text.into(),
            system: system.into(),
        }
    }

    #[test]
    fn candidates_equal_references() {
        let r = refs();
        let cands: Vec<_> = r.iter().map(|(id, x)| cand(id, &x.docstring, "ref")).collect();
        let eval = evaluate_corpus(&r, &cands, EvalConfig::default()).unwrap();
        let agg = &eval.aggregates[0];
        assert!((agg.bleu - 1.0).abs() < 1e-12);
        assert_eq!(agg.rouge1_f, 1.0);
        assert_eq!(agg.rouge_l_f, 1.0);
        assert_eq!(agg.cer, Some(1.0));
        // per pair METEOR is 1 - 0.5 / n^3 with n tokens
        let expected: Vec<f64> = eval
            .reports
            .iter()
            .map(|rep| {
                let n = tokenize(&r[&rep.pair_id].docstring, Origin::NaturalLanguage).len() as f64;
                1.0 - 0.5 / n.powi(3)
            })
            .collect();
        for (rep, e) in eval.reports.iter().zip(&expected) {
            assert!((rep.meteor - e).abs() < 1e-15);
        }
        assert!((agg.meteor - (expected[0] + expected[1]) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn single_pair_aggregate_equals_pair() {
        let eval = evaluate_corpus(&refs(), &[cand("p2", "negates x", "s")], EvalConfig::default()).unwrap();
        let (rep, agg) = (&eval.reports[0], &eval.aggregates[0]);
        assert_eq!(agg.bleu, rep.bleu);
        assert_eq!(agg.meteor, rep.meteor);
        assert_eq!(agg.rouge1_f, rep.rouge1_f);
        assert_eq!(agg.cer, rep.cer);
        assert_eq!(agg.pairs, 1);
    }

    #[test]
    fn empty_candidates_are_excluded_and_counted() {
        let cands = [cand("p1", "  ", "s"), cand("zz", "x", "s"), cand("p2", "negate x", "s")];
        let eval = evaluate_corpus(&refs(), &cands, EvalConfig::default()).unwrap();
        assert_eq!(eval.reports.len(), 1);
        assert_eq!(eval.failures.len(), 2);
        assert_eq!(eval.failures[0].error, MetricError::EmptyInput);
        assert_eq!(eval.aggregates[0].excluded, 2);
        assert_eq!(eval.aggregates[0].pairs, 1);
    }

    #[test]
    fn table_scaling() {
        let agg = AggregateReport {
            system: "m".into(),
            pairs: 1,
            excluded: 0,
            rouge1_f: 0.25571,
            rouge_l_f: 0.2443,
            bleu: 0.0442,
            meteor: 0.1855,
            cer: Some(0.458),
            cer_pairs: 1,
            bertscore_like: None,
            codebertscore_like: Some(0.7746),
        };
        let mut buf = Vec::new();
        write_table_csv(&[agg], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "m,0.2557,0.2443,4.42,0.4580,18.55,,77.46");
    }
}
