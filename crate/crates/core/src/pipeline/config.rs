//! Pipeline configuration, loadable from JSON or TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::dedup::{DedupConfig, DedupField};
use crate::filter::{RemoteScorerConfig, RuleFilterConfig, ScoreFilterConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScorerConfig {
    #[default]
    Heuristic,
    Remote {
        endpoint: String,
        #[serde(default)]
        client: RemoteScorerConfig,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DedupStageConfig {
    pub prefix_chars: usize,
    pub relative_threshold: f64,
    pub field: DedupField,
    /// Drop pairs that duplicate an earlier kept pair of the same corpus.
    pub within: bool,
    /// Pair files whose entries the corpus must not duplicate.
    pub against: Vec<PathBuf>,
}

impl Default for DedupStageConfig {
    fn default() -> Self {
        let d = DedupConfig::default();
        Self {
            prefix_chars: d.prefix_chars,
            relative_threshold: d.relative_threshold,
            field: d.field,
            within: true,
            against: Vec::new(),
        }
    }
}

impl DedupStageConfig {
    pub fn dedup_config(&self) -> DedupConfig {
        DedupConfig {
            prefix_chars: self.prefix_chars,
            relative_threshold: self.relative_threshold,
            field: self.field,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestSetConfig {
    /// Annotation export or per-pair score file.
    pub annotations: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub dimension: usize,
    #[serde(default)]
    pub nl_endpoint: Option<String>,
    #[serde(default)]
    pub code_endpoint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateConfig {
    /// Candidate docstrings, one `{pair_id, candidate, system}` per line.
    pub candidates: PathBuf,
    #[serde(default)]
    pub embeddings: Option<EmbeddingConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgreementConfig {
    /// Exported 4-aspect ratings.
    pub ratings: PathBuf,
    #[serde(default)]
    pub within_system: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub annotators: Vec<String>,
    /// Rule-filtered pairs drawn for 3-step annotation.
    #[serde(default)]
    pub sample: usize,
    #[serde(default = "one")]
    pub overlap: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Repository manifest; empty means no input.
    pub manifest: PathBuf,
    pub min_stars: u64,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub gzip: bool,
    pub rule: RuleFilterConfig,
    pub score: ScoreFilterConfig,
    pub scorer: ScorerConfig,
    pub dedup: DedupStageConfig,
    pub test_set: Option<TestSetConfig>,
    pub evaluate: Option<EvaluateConfig>,
    pub agreement: Option<AgreementConfig>,
    pub campaign: Option<CampaignConfig>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            manifest: PathBuf::new(),
            min_stars: 60,
            seed: 0,
            output_dir: PathBuf::from("out"),
            gzip: false,
            rule: RuleFilterConfig::default(),
            score: ScoreFilterConfig::default(),
            scorer: ScorerConfig::default(),
            dedup: DedupStageConfig::default(),
            test_set: None,
            evaluate: None,
            agreement: None,
            campaign: None,
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if !p.as_os_str().is_empty() && p.is_relative() {
        *p = base.join(&*p);
    }
}

impl PipelineConfig {
    /// Parses `.toml` files as TOML and anything else as JSON. Relative
    /// paths are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: Self = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?
        } else {
            serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?
        };
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.manifest);
        resolve(base, &mut self.output_dir);
        for p in &mut self.dedup.against {
            resolve(base, p);
        }
        if let Some(t) = &mut self.test_set {
            resolve(base, &mut t.annotations);
        }
        if let Some(e) = &mut self.evaluate {
            resolve(base, &mut e.candidates);
        }
        if let Some(a) = &mut self.agreement {
            resolve(base, &mut a.ratings);
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let config = |e: String| PipelineError::Config(e);
        self.rule.validate().map_err(|e| config(e.to_string()))?;
        self.score.validate().map_err(|e| config(e.to_string()))?;
        self.dedup
            .dedup_config()
            .validate()
            .map_err(|e| config(e.to_string()))?;
        if self.output_dir.as_os_str().is_empty() {
            return Err(config("output_dir must be set".into()));
        }
        if self.agreement.is_some() && self.evaluate.is_none() {
            return Err(config("agreement needs an evaluate section".into()));
        }
        if let ScorerConfig::Remote { endpoint, client } = &self.scorer {
            if endpoint.is_empty() {
                return Err(config("remote scorer endpoint is empty".into()));
            }
            if client.max_batch == 0 || client.max_in_flight == 0 {
                return Err(config(
                    "remote scorer batch and in-flight limits must be positive".into(),
                ));
            }
        }
        if let Some(c) = &self.campaign {
            if c.annotators.is_empty() {
                return Err(config("campaign needs at least one annotator".into()));
            }
        }
        if let Some(EvaluateConfig {
            embeddings: Some(e), ..
        }) = &self.evaluate
        {
            if e.dimension == 0 {
                return Err(config("embedding dimension must be positive".into()));
            }
        }
        Ok(())
    }

    /// The configuration as written next to the outputs: paths absolute,
    /// except the output directory, which is the directory holding it.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        let abs = |p: &mut PathBuf| {
            if !p.as_os_str().is_empty() && p.is_relative() {
                if let Ok(cwd) = std::env::current_dir() {
                    *p = cwd.join(&*p);
                }
            }
        };
        abs(&mut c.manifest);
        c.dedup.against.iter_mut().for_each(abs);
        if let Some(t) = &mut c.test_set {
            abs(&mut t.annotations);
        }
        if let Some(e) = &mut c.evaluate {
            abs(&mut e.candidates);
        }
        if let Some(a) = &mut c.agreement {
            abs(&mut a.ratings);
        }
        c.output_dir = PathBuf::from(".");
        c
    }
}
