use std::collections::HashMap;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use docmine_core::agreement::{agreement_table, write_table_csv as write_agreement_csv, TableOptions};
use docmine_core::annotation::SystemClock;
use docmine_core::dedup::DedupText;
use docmine_core::extract::extract_manifest;
use docmine_core::filter::{rule_filter, score_filter, HeuristicScorer, RemoteScorer, RemoteScorerConfig};
use docmine_core::jsonl;
use docmine_core::metrics::{
    evaluate_corpus, pair_reports, write_table_csv as write_metric_csv, EvalConfig, Reference, ReportLine,
};
use docmine_core::pipeline::{
    assemble_test_set, dedup_stage, load_score_records, run_pipeline, stats, write_stats_csv, ScorerConfig,
};
use docmine_core::{
    AnnotationStore, Campaign, Candidate, CodeDocPair, CorpusIndex, DedupField, EvalRating, PipelineConfig,
    PipelineError, PythonGrammar, RepoManifest, ScoreRecord, Scorer, TauMode,
};
use docmine_server::AppState;
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "docmine",
    version,
    about = "Mine, filter and evaluate code-docstring corpora"
)]
struct Cli {
    /// Pipeline config (TOML or JSON); supplies defaults for every command.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Gzip JSON-lines outputs.
    #[arg(long, global = true)]
    gzip: bool,
    /// Repositories need strictly more stars than this.
    #[arg(long, global = true)]
    min_stars: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract documented functions from the repositories of a manifest.
    Extract {
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Apply the rule filter or the score filter to a pair file.
    Filter(FilterArgs),
    /// Score pairs with the heuristic or a remote scorer.
    Score {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        scorer: ScorerArgs,
    },
    /// Drop candidates that duplicate a corpus.
    Dedup {
        #[arg(long)]
        candidates: PathBuf,
        /// Reference corpus; may be repeated.
        #[arg(long)]
        corpus: Vec<PathBuf>,
        /// Characters compared from the start of each text.
        #[arg(long)]
        prefix: Option<usize>,
        /// Relative distance below which texts are duplicates.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, value_parser = parse_field)]
        field: Option<DedupField>,
        /// Skip within-candidate deduplication.
        #[arg(long)]
        no_within: bool,
    },
    /// Build a test set from annotated pairs.
    AssembleTest {
        /// Annotation export or score file.
        #[arg(long)]
        annotations: PathBuf,
        /// Raw corpus holding the annotated pairs.
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Score candidate docstrings against references.
    Evaluate {
        /// Pairs whose docstrings are the references.
        #[arg(long)]
        references: PathBuf,
        #[arg(long)]
        candidates: PathBuf,
    },
    /// Kendall tau between metric scores and human ratings.
    Agreement {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long)]
        human: PathBuf,
        /// Count pairs only within each system.
        #[arg(long)]
        within_system: bool,
        /// Report signed tau instead of its absolute value.
        #[arg(long)]
        signed: bool,
    },
    /// Histograms for a corpus, score, annotation or rating file.
    Stats {
        #[arg(long)]
        input: PathBuf,
    },
    /// Run the annotation service.
    Serve {
        #[arg(long)]
        campaign: PathBuf,
        /// Append-only submission log.
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Directory with the UI bundle.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
        /// Shared bearer token.
        #[arg(long, env = "DOCMINE_TOKEN")]
        token: Option<String>,
    },
    /// Run the full pipeline.
    Run {
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long)]
    input: PathBuf,
    /// Apply the structural rules.
    #[arg(long, conflicts_with_all = ["scores", "heuristic", "endpoint"])]
    rules: bool,
    /// Existing score file for the score filter.
    #[arg(long, conflicts_with_all = ["heuristic", "endpoint"])]
    scores: Option<PathBuf>,
    #[command(flatten)]
    scorer: ScorerArgs,
    #[arg(long)]
    min_code_lines: Option<usize>,
    #[arg(long)]
    max_code_lines: Option<usize>,
    #[arg(long)]
    min_doc_lines: Option<usize>,
    #[arg(long)]
    min_complexity: Option<u32>,
    /// Raw step-1 score must exceed this.
    #[arg(long)]
    step1_threshold: Option<f64>,
    /// Raw step-2 score must exceed this.
    #[arg(long)]
    step2_threshold: Option<f64>,
}

#[derive(Args)]
struct ScorerArgs {
    /// Base URL of a scoring service.
    #[arg(long, conflicts_with = "heuristic")]
    endpoint: Option<String>,
    /// Use the built-in heuristic scorer.
    #[arg(long)]
    heuristic: bool,
}

fn parse_field(s: &str) -> std::result::Result<DedupField, String> {
    match s {
        "code" => Ok(DedupField::Code),
        "docstring" => Ok(DedupField::Docstring),
        "both" => Ok(DedupField::Both),
        other => Err(format!("unknown field {other:?}; expected code, docstring or both")),
    }
}

enum Failure {
    Config(String),
    Fatal(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Fatal(e)
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(m) => Failure::Config(m),
            other => Failure::Fatal(other.into()),
        }
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn config_err(message: impl Into<String>) -> Failure {
    Failure::Config(message.into())
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(m) = cli.min_stars {
        cfg.min_stars = m;
    }
    cfg.gzip |= cli.gzip;
    Ok(cfg)
}

struct Out {
    dir: PathBuf,
    gzip: bool,
}

impl Out {
    fn new(cfg: &PipelineConfig) -> Result<Self> {
        fs::create_dir_all(&cfg.output_dir).with_context(|| format!("creating {}", cfg.output_dir.display()))?;
        Ok(Self {
            dir: cfg.output_dir.clone(),
            gzip: cfg.gzip,
        })
    }

    fn jsonl<T: Serialize>(&self, stem: &str, values: &[T]) -> Result<PathBuf> {
        let ext = if self.gzip { "jsonl.gz" } else { "jsonl" };
        let path = self.dir.join(format!("{stem}.{ext}"));
        jsonl::write_all(&path, values).map_err(anyhow::Error::from)?;
        eprintln!("wrote {} records to {}", values.len(), path.display());
        Ok(path)
    }

    fn file(&self, name: &str, bytes: Vec<u8>) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote {}", path.display());
        Ok(path)
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(anyhow::Error::from)?;
        bytes.push(b'\n');
        self.file(name, bytes)
    }
}

fn read<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    Ok(jsonl::read(path).map_err(anyhow::Error::from)?)
}

fn scorer_for(args: &ScorerArgs, cfg: &PipelineConfig) -> Box<dyn Scorer> {
    match (&args.endpoint, args.heuristic, &cfg.scorer) {
        (Some(url), _, ScorerConfig::Remote { client, .. }) => Box::new(RemoteScorer::new(url.clone(), client.clone())),
        (Some(url), _, _) => Box::new(RemoteScorer::new(url.clone(), RemoteScorerConfig::default())),
        (None, true, _) | (None, false, ScorerConfig::Heuristic) => Box::new(HeuristicScorer),
        (None, false, ScorerConfig::Remote { endpoint, client }) => {
            Box::new(RemoteScorer::new(endpoint.clone(), client.clone()))
        }
    }
}

fn score_records(pairs: &[CodeDocPair], scorer: &dyn Scorer) -> Result<Vec<ScoreRecord>> {
    let scores = scorer.score(pairs).map_err(anyhow::Error::from)?;
    if scores.len() != pairs.len() {
        return Err(Failure::Fatal(anyhow!(
            "scorer returned {} scores for {} pairs",
            scores.len(),
            pairs.len()
        )));
    }
    Ok(pairs
        .iter()
        .zip(scores)
        .map(|(p, scores)| ScoreRecord {
            pair_id: p.pair_id.clone(),
            scores,
        })
        .collect())
}

fn filter(args: &FilterArgs, mut cfg: PipelineConfig) -> Result<()> {
    let set = |slot: &mut usize, v: Option<usize>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut cfg.rule.min_code_lines, args.min_code_lines);
    set(&mut cfg.rule.max_code_lines, args.max_code_lines);
    set(&mut cfg.rule.min_doc_lines_exclusive, args.min_doc_lines);
    if let Some(v) = args.min_complexity {
        cfg.rule.min_complexity_exclusive = v;
    }
    if let Some(v) = args.step1_threshold {
        cfg.score.step1_threshold_raw = v;
    }
    if let Some(v) = args.step2_threshold {
        cfg.score.step2_threshold_raw = v;
    }
    cfg.validate()?;
    let scored = args.scores.is_some() || args.scorer.heuristic || args.scorer.endpoint.is_some();
    if !args.rules && !scored {
        return Err(config_err(
            "filter needs one of --rules, --scores, --heuristic or --endpoint",
        ));
    }
    let pairs: Vec<CodeDocPair> = read(&args.input)?;
    let out = Out::new(&cfg)?;

    if args.rules {
        let kept: Vec<&CodeDocPair> = pairs.iter().filter(|p| rule_filter(p, &cfg.rule)).collect();
        out.jsonl("rule_filtered", &kept)?;
        return Ok(());
    }
    let records = match &args.scores {
        Some(path) => load_score_records(path).map_err(anyhow::Error::from)?,
        None => score_records(&pairs, scorer_for(&args.scorer, &cfg).as_ref())?,
    };
    let by_id: HashMap<&str, &ScoreRecord> = records.iter().map(|r| (r.pair_id.as_str(), r)).collect();
    let mut kept = Vec::new();
    let mut unscored = 0usize;
    for p in &pairs {
        let Some(r) = by_id.get(p.pair_id.as_str()) else {
            unscored += 1;
            continue;
        };
        if score_filter(p, &r.scores, &cfg.score).map_err(anyhow::Error::from)? {
            kept.push(p);
        }
    }
    if unscored > 0 {
        log::warn!("{unscored} pairs have no score and were dropped");
    }
    out.jsonl("score_filtered", &kept)?;
    Ok(())
}

fn evaluate(references: &Path, candidates: &Path, cfg: &PipelineConfig) -> Result<()> {
    let pool: Vec<CodeDocPair> = read(references)?;
    let candidates: Vec<Candidate> = read(candidates)?;
    let refs: HashMap<String, Reference> = pool
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
    let evaluation = evaluate_corpus(&refs, &candidates, EvalConfig::default()).map_err(anyhow::Error::from)?;
    for f in &evaluation.failures {
        log::warn!("{}/{} excluded: {}", f.pair_id, f.system, f.error);
    }
    let out = Out::new(cfg)?;
    out.jsonl("metrics", &evaluation.lines())?;
    let mut table = Vec::new();
    write_metric_csv(&evaluation.aggregates, &mut table).map_err(anyhow::Error::from)?;
    out.file("metrics_table.csv", table)?;
    Ok(())
}

fn agreement(metrics: &Path, human: &Path, options: TableOptions, cfg: &PipelineConfig) -> Result<()> {
    let lines: Vec<ReportLine> = read(metrics)?;
    let reports = pair_reports(lines);
    let ratings: Vec<EvalRating> = read(human)?;
    let table = agreement_table(&reports, &ratings, options).map_err(anyhow::Error::from)?;
    let out = Out::new(cfg)?;
    let mut csv = Vec::new();
    write_agreement_csv(&table, &mut csv).map_err(anyhow::Error::from)?;
    print!("{}", String::from_utf8_lossy(&csv));
    out.file("agreement.csv", csv)?;
    out.json("agreement.json", &table)?;
    Ok(())
}

fn serve(
    campaign: &Path,
    log: &Path,
    addr: SocketAddr,
    static_dir: Option<PathBuf>,
    token: Option<String>,
) -> Result<()> {
    let text = fs::read_to_string(campaign).with_context(|| format!("reading {}", campaign.display()))?;
    let campaign: Campaign =
        serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", campaign.display())))?;
    let store = AnnotationStore::open(campaign, log, Box::new(SystemClock)).map_err(anyhow::Error::from)?;
    let mut state = AppState::new(store);
    state.token = token.filter(|t| !t.is_empty());
    state.static_dir = static_dir;
    let runtime = tokio::runtime::Runtime::new().context("starting runtime")?;
    runtime
        .block_on(docmine_server::serve(addr, state))
        .with_context(|| format!("serving on {addr}"))?;
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(config_err("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| anyhow!(e))?;
    }
    let mut cfg = load_config(&cli)?;
    match cli.command {
        Command::Extract { manifest } => {
            let path = manifest
                .or_else(|| (!cfg.manifest.as_os_str().is_empty()).then(|| cfg.manifest.clone()))
                .ok_or_else(|| config_err("extract needs --manifest or a config with a manifest"))?;
            let manifest = RepoManifest::load(&path).map_err(anyhow::Error::from)?;
            let mut pairs = Vec::new();
            let summary = extract_manifest(&manifest, &PythonGrammar, cfg.min_stars, |p| pairs.push(p))
                .map_err(anyhow::Error::from)?;
            let out = Out::new(&cfg)?;
            out.jsonl("raw", &pairs)?;
            out.json("extract_summary.json", &summary)?;
        }
        Command::Filter(args) => filter(&args, cfg)?,
        Command::Score { input, scorer } => {
            cfg.validate()?;
            let pairs: Vec<CodeDocPair> = read(&input)?;
            let records = score_records(&pairs, scorer_for(&scorer, &cfg).as_ref())?;
            Out::new(&cfg)?.jsonl("scores", &records)?;
        }
        Command::Dedup {
            candidates,
            corpus,
            prefix,
            threshold,
            field,
            no_within,
        } => {
            if let Some(p) = prefix {
                cfg.dedup.prefix_chars = p;
            }
            if let Some(t) = threshold {
                cfg.dedup.relative_threshold = t;
            }
            if let Some(f) = field {
                cfg.dedup.field = f;
            }
            cfg.dedup.within &= !no_within;
            if !corpus.is_empty() {
                cfg.dedup.against = corpus;
            }
            cfg.validate()?;
            let pairs: Vec<CodeDocPair> = read(&candidates)?;
            let (kept, reports) = dedup_stage(&cfg, &pairs)?;
            let out = Out::new(&cfg)?;
            out.jsonl("dedup_reports", &reports)?;
            out.jsonl("deduplicated", &kept)?;
        }
        Command::AssembleTest { annotations, corpus } => {
            cfg.validate()?;
            let annotated = load_score_records(&annotations).map_err(anyhow::Error::from)?;
            let pool: Vec<CodeDocPair> = read(&corpus)?;
            let index = CorpusIndex::build(pool.iter().map(DedupText::from), cfg.dedup.dedup_config())
                .map_err(anyhow::Error::from)?;
            let outcome = assemble_test_set(&annotated, &pool, &index);
            eprintln!(
                "{} kept, {} below the score rule, {} duplicates, {} missing",
                outcome.kept.len(),
                outcome.low_score.len(),
                outcome.duplicates.len(),
                outcome.missing.len()
            );
            let out = Out::new(&cfg)?;
            out.jsonl("test_set", &outcome.kept)?;
            out.jsonl("test_set_duplicates", &outcome.duplicates)?;
        }
        Command::Evaluate { references, candidates } => evaluate(&references, &candidates, &cfg)?,
        Command::Agreement {
            metrics,
            human,
            within_system,
            signed,
        } => {
            let options = TableOptions {
                within_system,
                mode: if signed { TauMode::Signed } else { TauMode::Absolute },
            };
            agreement(&metrics, &human, options, &cfg)?;
        }
        Command::Stats { input } => {
            let report = stats(&input).map_err(anyhow::Error::from)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?
            );
            let out = Out::new(&cfg)?;
            out.json("stats.json", &report)?;
            let mut csv = Vec::new();
            write_stats_csv(&report, &mut csv).map_err(anyhow::Error::from)?;
            out.file("stats.csv", csv)?;
        }
        Command::Serve {
            campaign,
            log,
            addr,
            static_dir,
            token,
        } => serve(&campaign, &log, addr, static_dir, token)?,
        Command::Run { manifest } => {
            if let Some(m) = manifest {
                cfg.manifest = m;
            }
            let outcome = run_pipeline(&cfg)?;
            for s in &outcome.report.stages {
                eprintln!("{:<14} {:>8} -> {}", s.stage, s.input, s.output);
            }
            if !outcome.stats.is_monotone() {
                log::warn!("stage counts are not monotone");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("docmine: config error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Fatal(e)) => {
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let cause = cause.to_string();
                if !msg.contains(&cause) {
                    msg = format!("{msg}: {cause}");
                }
            }
            eprintln!("docmine: {msg}");
            ExitCode::from(1)
        }
    }
}
