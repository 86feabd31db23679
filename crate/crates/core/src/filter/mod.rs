//! Rule-based candidate filtering and score-based refinement.
//!
//! Scores come from a [`Scorer`]: the built-in [`HeuristicScorer`] or a
//! model served behind the [`RemoteScorer`] wire protocol.

mod heuristic;
mod remote;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::CodeDocPair;

pub use heuristic::{heuristic_score, HeuristicScorer};
pub use remote::{RemoteScorer, RemoteScorerConfig};

/// Top of the raw rating scale.
pub const RAW_MAX: f64 = 3.0;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("scores marked {scale:?} but {field} = {value} is outside that scale")]
    ScaleMismatch {
        scale: Scale,
        field: &'static str,
        value: f64,
    },
    #[error("invalid filter config: {0}")]
    Config(String),
    #[error("batch of {size} exceeds the scorer maximum of {max}")]
    BatchTooLarge { size: usize, max: usize },
    #[error("scorer at {endpoint} unavailable after {attempts} attempts: {last_error}")]
    ScorerUnavailable {
        endpoint: String,
        attempts: u32,
        last_error: String,
    },
    #[error("malformed scorer response: {0}")]
    MalformedResponse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// 0 (worst) to 3 (best).
    Raw,
    /// Raw divided by 3.
    Normalized,
}

impl Scale {
    fn max(self) -> f64 {
        match self {
            Scale::Raw => RAW_MAX,
            Scale::Normalized => 1.0,
        }
    }
}

pub fn normalize(raw: f64) -> f64 {
    raw / RAW_MAX
}

pub fn denormalize(normalized: f64) -> f64 {
    normalized * RAW_MAX
}

/// Step ratings: general adequacy, coverage of outer branch blocks, and
/// coherence of documented types/returns. Step 1 always applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityScores {
    pub step1: f64,
    pub step2: Option<f64>,
    pub step3: Option<f64>,
    pub scale: Scale,
}

impl QualityScores {
    pub fn new(step1: f64, step2: Option<f64>, step3: Option<f64>, scale: Scale) -> Result<Self, FilterError> {
        let s = Self {
            step1,
            step2,
            step3,
            scale,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        let max = self.scale.max();
        let fields = [
            ("step1", Some(self.step1)),
            ("step2", self.step2),
            ("step3", self.step3),
        ];
        for (field, value) in fields {
            if let Some(value) = value {
                if !value.is_finite() || !(0.0..=max).contains(&value) {
                    return Err(FilterError::ScaleMismatch {
                        scale: self.scale,
                        field,
                        value,
                    });
                }
            }
        }
        Ok(())
    }

    fn map(self, scale: Scale, f: fn(f64) -> f64) -> Self {
        Self {
            step1: f(self.step1),
            step2: self.step2.map(f),
            step3: self.step3.map(f),
            scale,
        }
    }

    pub fn to_raw(self) -> Self {
        match self.scale {
            Scale::Raw => self,
            Scale::Normalized => self.map(Scale::Raw, denormalize),
        }
    }

    pub fn to_normalized(self) -> Self {
        match self.scale {
            Scale::Normalized => self,
            Scale::Raw => self.map(Scale::Normalized, normalize),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleFilterConfig {
    pub min_code_lines: usize,
    pub max_code_lines: usize,
    pub min_doc_lines_exclusive: usize,
    pub min_complexity_exclusive: u32,
}

impl Default for RuleFilterConfig {
    fn default() -> Self {
        Self {
            min_code_lines: 6,
            max_code_lines: 30,
            min_doc_lines_exclusive: 3,
            min_complexity_exclusive: 3,
        }
    }
}

impl RuleFilterConfig {
    pub fn validate(&self) -> Result<(), FilterError> {
        if self.min_code_lines > self.max_code_lines {
            return Err(FilterError::Config(format!(
                "min_code_lines {} > max_code_lines {}",
                self.min_code_lines, self.max_code_lines
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreFilterConfig {
    pub step1_threshold_raw: f64,
    pub step2_threshold_raw: f64,
}

impl Default for ScoreFilterConfig {
    fn default() -> Self {
        Self {
            step1_threshold_raw: 1.0,
            step2_threshold_raw: 1.0,
        }
    }
}

impl ScoreFilterConfig {
    pub fn validate(&self) -> Result<(), FilterError> {
        for (name, t) in [
            ("step1_threshold_raw", self.step1_threshold_raw),
            ("step2_threshold_raw", self.step2_threshold_raw),
        ] {
            if !(0.0..=RAW_MAX).contains(&t) {
                return Err(FilterError::Config(format!("{name} = {t} is outside [0, 3]")));
            }
        }
        Ok(())
    }
}

/// Keeps pairs with code lines inside the inclusive bounds, more doc lines
/// and higher complexity than the exclusive minimums.
pub fn rule_filter(pair: &CodeDocPair, cfg: &RuleFilterConfig) -> bool {
    let u = &pair.unit;
    (cfg.min_code_lines..=cfg.max_code_lines).contains(&u.code_line_count)
        && u.doc_line_count > cfg.min_doc_lines_exclusive
        && u.complexity > cfg.min_complexity_exclusive
}

/// Keeps pairs whose raw step-1 and step-2 scores are strictly above the
/// thresholds. Step 2 is not applicable to code without outer branch blocks
/// and passes vacuously there; step 3 is never consulted.
pub fn score_filter(pair: &CodeDocPair, scores: &QualityScores, cfg: &ScoreFilterConfig) -> Result<bool, FilterError> {
    scores.validate()?;
    let raw = scores.to_raw();
    if raw.step1 <= cfg.step1_threshold_raw {
        return Ok(false);
    }
    if !pair.unit.has_branch_blocks() {
        return Ok(true);
    }
    Ok(raw.step2.is_some_and(|s| s > cfg.step2_threshold_raw))
}

/// Anything that turns pairs into normalized quality scores, in order.
pub trait Scorer {
    fn score(&self, pairs: &[CodeDocPair]) -> Result<Vec<QualityScores>, FilterError>;
}

/// One line of a score file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub pair_id: String,
    #[serde(flatten)]
    pub scores: QualityScores,
}
