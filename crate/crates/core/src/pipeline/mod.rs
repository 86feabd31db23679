//! End-to-end corpus construction and evaluation.
//!
//! Stages run in order: extract, rule filter, score, score filter,
//! dedup, then the optional test-set, evaluation, agreement and campaign
//! stages. Every stage writes its output to the output directory as
//! JSON-lines; given the same config, inputs and scorer, all outputs are
//! byte-identical across runs.

mod config;
mod stats;
mod testset;

pub use config::{
    AgreementConfig, CampaignConfig, DedupStageConfig, EmbeddingConfig, EvaluateConfig, PipelineConfig, ScorerConfig,
    TestSetConfig,
};
pub use stats::{
    load_score_records, stats, write_stats_csv, CorpusStats, FeatureHistograms, RatingStats, ScoreHistogram,
    ScoreStats, StageStats, StatsReport, DOC_CHARS_BUCKET,
};
pub use testset::{assemble_test_set, passes_test_rule, TestSetOutcome, TEST_SET_MIN_RAW};

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agreement::{agreement_table, write_table_csv as write_agreement_csv, TableOptions};
use crate::annotation::{AnnotationItem, Campaign, CampaignOptions, EvalExample, EvalRating};
use crate::dedup::{CorpusIndex, DedupReport, DedupText};
use crate::extract::{extract_manifest, CodeDocPair, Grammar, ParseError, PythonGrammar, RepoManifest};
use crate::filter::{rule_filter, score_filter, HeuristicScorer, RemoteScorer, ScoreRecord, Scorer};
use crate::jsonl;
use crate::metrics::{
    evaluate_corpus, write_table_csv as write_metric_csv, Candidate, EmbeddingProvider, EvalConfig,
    HttpEmbeddingProvider, Reference,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("stage {stage} failed: {message}")]
    Stage { stage: String, message: String },
}

impl PipelineError {
    fn stage(stage: &str, e: impl std::fmt::Display) -> Self {
        PipelineError::Stage {
            stage: stage.to_string(),
            message: e.to_string(),
        }
    }
}

pub const STAGE_RAW: &str = "raw";
pub const STAGE_RULE: &str = "rule_filtered";
pub const STAGE_SCORE: &str = "score_filtered";
pub const STAGE_DEDUP: &str = "deduplicated";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub input: usize,
    pub output: usize,
    /// Non-fatal problems, such as skipped files or excluded pairs.
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub stages: Vec<StageReport>,
    pub parse_errors: Vec<ParseError>,
    /// Output files, relative to the output directory.
    pub outputs: Vec<String>,
    pub fatal: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutcome {
    pub stats: CorpusStats,
    pub report: RunReport,
}

struct Run<'a> {
    cfg: &'a PipelineConfig,
    out: PathBuf,
    report: RunReport,
}

impl Run<'_> {
    fn jsonl_name(&self, stem: &str) -> String {
        if self.cfg.gzip {
            format!("{stem}.jsonl.gz")
        } else {
            format!("{stem}.jsonl")
        }
    }

    fn write_jsonl<T: Serialize>(&mut self, stage: &str, stem: &str, values: &[T]) -> Result<(), PipelineError> {
        let name = self.jsonl_name(stem);
        jsonl::write_all(&self.out.join(&name), values).map_err(|e| PipelineError::stage(stage, e))?;
        self.report.outputs.push(name);
        Ok(())
    }

    fn write_file(&mut self, stage: &str, name: &str, bytes: Vec<u8>) -> Result<(), PipelineError> {
        fs::write(self.out.join(name), bytes).map_err(|e| PipelineError::stage(stage, e))?;
        self.report.outputs.push(name.to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, stage: &str, name: &str, value: &T) -> Result<(), PipelineError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| PipelineError::stage(stage, e))?;
        bytes.push(b'\n');
        self.write_file(stage, name, bytes)
    }

    fn stage(&mut self, stage: &str, input: usize, output: usize, notes: Vec<String>) {
        self.report.stages.push(StageReport {
            stage: stage.to_string(),
            input,
            output,
            notes,
        });
    }
}

/// Runs the pipeline with the built-in grammar and the configured scorer.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome, PipelineError> {
    cfg.validate()?;
    let scorer: Box<dyn Scorer> = match &cfg.scorer {
        ScorerConfig::Heuristic => Box::new(HeuristicScorer),
        ScorerConfig::Remote { endpoint, client } => Box::new(RemoteScorer::new(endpoint.clone(), client.clone())),
    };
    run_pipeline_with(cfg, &PythonGrammar, scorer.as_ref())
}

/// Runs the pipeline with an explicit grammar and scorer. On a fatal stage
/// error the run report is still written, with `fatal` set.
pub fn run_pipeline_with(
    cfg: &PipelineConfig,
    grammar: &dyn Grammar,
    scorer: &dyn Scorer,
) -> Result<PipelineOutcome, PipelineError> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output_dir).map_err(|e| PipelineError::stage("setup", e))?;
    let mut run = Run {
        cfg,
        out: cfg.output_dir.clone(),
        report: RunReport::default(),
    };
    let result = stages(&mut run, grammar, scorer);
    if let Err(e) = &result {
        run.report.fatal = Some(e.to_string());
    }
    let report = run.report.clone();
    run.write_json("report", "run_report.json", &report)?;
    let stats = result?;
    Ok(PipelineOutcome {
        stats,
        report: run.report,
    })
}

fn read_pairs(stage: &str, path: &Path) -> Result<Vec<CodeDocPair>, PipelineError> {
    jsonl::read(path).map_err(|e| PipelineError::stage(stage, e))
}

fn stages(run: &mut Run<'_>, grammar: &dyn Grammar, scorer: &dyn Scorer) -> Result<CorpusStats, PipelineError> {
    let cfg = run.cfg;
    run.write_json("setup", "config.resolved.json", &cfg.resolved())?;
    let mut stats = CorpusStats::default();

    let manifest = if cfg.manifest.as_os_str().is_empty() {
        RepoManifest::default()
    } else {
        RepoManifest::load(&cfg.manifest).map_err(|e| PipelineError::stage("extract", e))?
    };
    let mut raw = Vec::new();
    let summary = extract_manifest(&manifest, grammar, cfg.min_stars, |p| raw.push(p))
        .map_err(|e| PipelineError::stage("extract", e))?;
    let mut notes = Vec::new();
    if summary.skipped_repos > 0 {
        notes.push(format!(
            "{} repositories at or below {} stars skipped",
            summary.skipped_repos, cfg.min_stars
        ));
    }
    if !summary.parse_errors.is_empty() {
        notes.push(format!("{} files failed to parse", summary.parse_errors.len()));
    }
    run.report.parse_errors = summary.parse_errors.clone();
    run.stage("extract", summary.functions, raw.len(), notes);
    run.write_jsonl("extract", STAGE_RAW, &raw)?;
    stats.push(STAGE_RAW, &raw);

    let rule: Vec<CodeDocPair> = raw.iter().filter(|p| rule_filter(p, &cfg.rule)).cloned().collect();
    run.stage("rule_filter", raw.len(), rule.len(), vec![]);
    run.write_jsonl("rule_filter", STAGE_RULE, &rule)?;
    stats.push(STAGE_RULE, &rule);

    let scores = scorer.score(&rule).map_err(|e| PipelineError::stage("score", e))?;
    if scores.len() != rule.len() {
        return Err(PipelineError::stage(
            "score",
            format!("scorer returned {} scores for {} pairs", scores.len(), rule.len()),
        ));
    }
    let records: Vec<ScoreRecord> = rule
        .iter()
        .zip(&scores)
        .map(|(p, s)| ScoreRecord {
            pair_id: p.pair_id.clone(),
            scores: *s,
        })
        .collect();
    run.stage("score", rule.len(), records.len(), vec![]);
    run.write_jsonl("score", "scores", &records)?;

    let mut refined = Vec::new();
    for (p, s) in rule.iter().zip(&scores) {
        if score_filter(p, s, &cfg.score).map_err(|e| PipelineError::stage("score_filter", e))? {
            refined.push(p.clone());
        }
    }
    run.stage("score_filter", rule.len(), refined.len(), vec![]);
    run.write_jsonl("score_filter", STAGE_SCORE, &refined)?;
    stats.push(STAGE_SCORE, &refined);

    let (deduped, reports) = dedup_stage(cfg, &refined)?;
    stats.duplicates = reports.iter().filter(|r| r.is_duplicate).count();
    run.stage("dedup", refined.len(), deduped.len(), vec![]);
    run.write_jsonl("dedup", "dedup_reports", &reports)?;
    run.write_jsonl("dedup", STAGE_DEDUP, &deduped)?;
    stats.push(STAGE_DEDUP, &deduped);

    let mut test_set = None;
    if let Some(t) = &cfg.test_set {
        let annotated = load_score_records(&t.annotations).map_err(|e| PipelineError::stage("test_set", e))?;
        let index =
            CorpusIndex::from_pairs(&raw, cfg.dedup.dedup_config()).map_err(|e| PipelineError::stage("test_set", e))?;
        let outcome = assemble_test_set(&annotated, &raw, &index);
        let mut notes = vec![
            format!("{} below the score rule", outcome.low_score.len()),
            format!("{} duplicates of the raw corpus", outcome.duplicates.len()),
        ];
        if !outcome.missing.is_empty() {
            notes.push(format!("{} annotated ids not in the raw corpus", outcome.missing.len()));
        }
        run.stage("test_set", annotated.len(), outcome.kept.len(), notes);
        run.write_jsonl("test_set", "test_set", &outcome.kept)?;
        test_set = Some(outcome.kept);
    }

    let mut eval_inputs = None;
    if let Some(e) = &cfg.evaluate {
        let candidates: Vec<Candidate> =
            jsonl::read(&e.candidates).map_err(|err| PipelineError::stage("evaluate", err))?;
        let ref_pool = test_set.as_deref().unwrap_or(&raw);
        let references: HashMap<String, Reference> = ref_pool
            .iter()
            .map(|p| {
                (
                    p.pair_id.clone(),
                    Reference {
                        code: p.code(),
                        docstring: p.docstring().to_string(),
                    },
                )
            })
            .collect();
        let providers = e.embeddings.as_ref().map(|emb| {
            let make = |name: &str, endpoint: &Option<String>| {
                endpoint
                    .as_ref()
                    .map(|url| HttpEmbeddingProvider::new(name, url.clone(), emb.dimension))
            };
            (make("nl", &emb.nl_endpoint), make("code", &emb.code_endpoint))
        });
        let (nl, code) = match &providers {
            Some((nl, code)) => (nl.as_ref(), code.as_ref()),
            None => (None, None),
        };
        let config = EvalConfig {
            nl_embedder: nl.map(|p| p as &(dyn EmbeddingProvider + Sync)),
            code_embedder: code.map(|p| p as &(dyn EmbeddingProvider + Sync)),
        };
        let evaluation =
            evaluate_corpus(&references, &candidates, config).map_err(|err| PipelineError::stage("evaluate", err))?;
        let notes = evaluation
            .failures
            .iter()
            .map(|f| format!("{}/{} excluded: {}", f.pair_id, f.system, f.error))
            .collect();
        run.stage("evaluate", candidates.len(), evaluation.reports.len(), notes);
        run.write_jsonl("evaluate", "metrics", &evaluation.lines())?;
        let mut table = Vec::new();
        write_metric_csv(&evaluation.aggregates, &mut table).map_err(|err| PipelineError::stage("evaluate", err))?;
        run.write_file("evaluate", "metrics_table.csv", table)?;
        eval_inputs = Some((candidates, evaluation.reports));
    }

    if let (Some(a), Some((_, reports))) = (&cfg.agreement, &eval_inputs) {
        let ratings: Vec<EvalRating> = jsonl::read(&a.ratings).map_err(|e| PipelineError::stage("agreement", e))?;
        let table = agreement_table(
            reports,
            &ratings,
            TableOptions {
                within_system: a.within_system,
                ..Default::default()
            },
        )
        .map_err(|e| PipelineError::stage("agreement", e))?;
        run.stage("agreement", ratings.len(), table.rows.len(), vec![]);
        let mut csv = Vec::new();
        write_agreement_csv(&table, &mut csv).map_err(|e| PipelineError::stage("agreement", e))?;
        run.write_file("agreement", "agreement.csv", csv)?;
        run.write_json("agreement", "agreement.json", &table)?;
    }

    if let Some(c) = &cfg.campaign {
        let mut sampled: Vec<&CodeDocPair> = rule.iter().collect();
        sampled.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
        sampled.truncate(c.sample);
        let items = sampled.into_iter().map(AnnotationItem::from).collect();
        let examples = match (&eval_inputs, test_set.as_deref()) {
            (Some((candidates, _)), pool) => eval_examples(pool.unwrap_or(&raw), candidates),
            (None, _) => Vec::new(),
        };
        let campaign = Campaign::build(
            items,
            examples,
            c.annotators.clone(),
            CampaignOptions {
                seed: cfg.seed,
                overlap: c.overlap,
            },
        )
        .map_err(|e| PipelineError::stage("campaign", e))?;
        run.stage(
            "campaign",
            rule.len(),
            campaign.items.len() + campaign.examples.len(),
            vec![],
        );
        run.write_json("campaign", "campaign.json", &campaign)?;
    }

    run.write_json("stats", "stats.json", &StatsReport::Corpus(stats.clone()))?;
    let mut csv = Vec::new();
    write_stats_csv(&StatsReport::Corpus(stats.clone()), &mut csv).map_err(|e| PipelineError::stage("stats", e))?;
    run.write_file("stats", "stats.csv", csv)?;
    Ok(stats)
}

/// Examples for blind evaluation: every pool pair that has candidates.
fn eval_examples(pool: &[CodeDocPair], candidates: &[Candidate]) -> Vec<EvalExample> {
    let mut by_pair: BTreeMap<&str, BTreeMap<String, String>> = BTreeMap::new();
    for c in candidates {
        by_pair
            .entry(&c.pair_id)
            .or_default()
            .insert(c.system.clone(), c.candidate.clone());
    }
    pool.iter()
        .filter_map(|p| {
            by_pair.get(p.pair_id.as_str()).map(|cands| EvalExample {
                example_id: p.pair_id.clone(),
                code: p.code(),
                reference: p.docstring().to_string(),
                candidates: cands.clone(),
            })
        })
        .collect()
}

/// Drops pairs that duplicate a configured reference corpus or, when
/// `within` is set, an earlier kept pair.
pub fn dedup_stage(
    cfg: &PipelineConfig,
    pairs: &[CodeDocPair],
) -> Result<(Vec<CodeDocPair>, Vec<DedupReport>), PipelineError> {
    let dcfg = cfg.dedup.dedup_config();
    let mut against = Vec::new();
    for path in &cfg.dedup.against {
        against.extend(read_pairs("dedup", path)?);
    }
    let external = CorpusIndex::from_pairs(&against, dcfg).map_err(|e| PipelineError::stage("dedup", e))?;
    let texts: Vec<DedupText> = pairs.iter().map(DedupText::from).collect();
    let mut reports: Vec<DedupReport> = texts.par_iter().map(|t| external.lookup(t)).collect();

    let mut kept = Vec::new();
    let mut seen = CorpusIndex::build(std::iter::empty(), dcfg).map_err(|e| PipelineError::stage("dedup", e))?;
    for ((pair, text), report) in pairs.iter().zip(texts).zip(reports.iter_mut()) {
        if report.is_duplicate {
            continue;
        }
        if cfg.dedup.within {
            let earlier = seen.lookup(&text);
            if earlier.is_duplicate {
                *report = earlier;
                continue;
            }
            seen.insert(text);
        }
        kept.push(pair.clone());
    }
    Ok((kept, reports))
}
