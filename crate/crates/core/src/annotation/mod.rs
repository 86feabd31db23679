//! Human annotation: the 3-step quality protocol and blind 4-aspect
//! evaluation, with a durable append-only store.

mod assign;
mod export;
mod store;

pub use assign::{build_annotation_queues, build_assignments, expected_scores};
pub use export::{aggregate_annotations, export, AggregatedScores};
pub use store::{
    Ack, AnnotationStore, AnnotatorProgress, AssignmentView, BlindCandidateView, Clock, FixedClock, NextItem, PairView,
    Progress, ProtocolProgress, SystemClock,
};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::CodeDocPair;

/// System id under which the original docstring is presented.
pub const REFERENCE_SYSTEM: &str = "reference";

pub const SCHEMA_VERSION: u32 = 1;

pub const MAX_STEP: u8 = 3;
pub const MAX_ASPECT: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "annotate3step")]
    Annotate3Step,
    #[serde(rename = "eval4aspect")]
    Eval4Aspect,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Annotate3Step => "annotate3step",
            Protocol::Eval4Aspect => "eval4aspect",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "annotate3step" => Ok(Protocol::Annotate3Step),
            "eval4aspect" => Ok(Protocol::Eval4Aspect),
            other => Err(format!("unknown protocol {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("validation failed: {}", summarize(.0))]
    Validation(Vec<FieldError>),
    #[error("item {item} is not assigned to annotator {annotator}")]
    NotAssigned { annotator: String, item: String },
    #[error("unknown annotator {0}")]
    UnknownAnnotator(String),
    #[error("invalid campaign: {0}")]
    Campaign(String),
    #[error("log {path}:{line}: {message}")]
    Corrupt { path: String, line: usize, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn summarize(errors: &[FieldError]) -> String {
    errors
        .iter()
        .map(|e| format!("{}: {}", e.field, e.message))
        .collect::<Vec<_>>()
        .join("; ")
}

/// A code-line range linked to a docstring character range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanLink {
    /// 1-based inclusive line numbers within the pair's code.
    pub code_span: (usize, usize),
    /// 0-based half-open character offsets within the trimmed docstring.
    pub doc_span: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub pair_id: String,
    pub annotator_id: String,
    pub step1: u8,
    #[serde(default)]
    pub step2: Option<u8>,
    #[serde(default)]
    pub step3: Option<u8>,
    #[serde(default)]
    pub span_links: Vec<SpanLink>,
    /// Milliseconds since the Unix epoch, set by the store.
    #[serde(default)]
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRating {
    pub example_id: String,
    pub system_id: String,
    pub annotator_id: String,
    pub a1: u8,
    pub a2: u8,
    pub a3: u8,
    pub a4: u8,
    pub overall: f64,
    pub timestamp: u64,
}

impl EvalRating {
    pub fn overall_of(a: [u8; 4]) -> f64 {
        f64::from(a.iter().map(|&x| u16::from(x)).sum::<u16>()) / 4.0
    }
}

/// What an annotator sees and judges for one pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationItem {
    pub pair_id: String,
    pub code: String,
    pub docstring: String,
    pub has_branch_blocks: bool,
}

impl From<&CodeDocPair> for AnnotationItem {
    fn from(p: &CodeDocPair) -> Self {
        Self {
            pair_id: p.pair_id.clone(),
            code: p.code(),
            docstring: p.docstring().to_string(),
            has_branch_blocks: p.unit.has_branch_blocks(),
        }
    }
}

impl AnnotationItem {
    pub fn code_lines(&self) -> usize {
        self.code.lines().count()
    }

    pub fn doc_chars(&self) -> usize {
        self.docstring.chars().count()
    }
}

fn check_step(errors: &mut Vec<FieldError>, field: &str, value: Option<u8>) {
    if let Some(v) = value {
        if v > MAX_STEP {
            errors.push(FieldError::new(field, format!("must be 0-{MAX_STEP}, got {v}")));
        }
    }
}

impl AnnotationRecord {
    /// Checks the record against the item it judges.
    pub fn validate(&self, item: &AnnotationItem) -> Result<(), AnnotationError> {
        let mut errors = Vec::new();
        if self.pair_id != item.pair_id {
            errors.push(FieldError::new("pair_id", "does not match the item"));
        }
        check_step(&mut errors, "step1", Some(self.step1));
        check_step(&mut errors, "step2", self.step2);
        check_step(&mut errors, "step3", self.step3);
        match (item.has_branch_blocks, self.step2) {
            (false, Some(_)) => errors.push(FieldError::new(
                "step2",
                "not applicable: the pair has no outer-level branch blocks",
            )),
            (true, None) => errors.push(FieldError::new(
                "step2",
                "required: the pair has outer-level branch blocks",
            )),
            _ => {}
        }
        let (lines, chars) = (item.code_lines(), item.doc_chars());
        for (i, link) in self.span_links.iter().enumerate() {
            let (s, e) = link.code_span;
            if s < 1 || s > e || e > lines {
                errors.push(FieldError::new(
                    format!("span_links[{i}].code_span"),
                    format!("({s}, {e}) outside lines 1..={lines}"),
                ));
            }
            let (s, e) = link.doc_span;
            if s > e || e > chars {
                errors.push(FieldError::new(
                    format!("span_links[{i}].doc_span"),
                    format!("({s}, {e}) outside characters 0..{chars}"),
                ));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(AnnotationError::Validation(errors))
        }
    }
}

/// One source function with its reference docstring and the candidate
/// docstrings of every system under evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalExample {
    pub example_id: String,
    pub code: String,
    pub reference: String,
    /// System id → generated docstring.
    pub candidates: BTreeMap<String, String>,
}

impl EvalExample {
    pub fn text_for(&self, system: &str) -> Option<&str> {
        if system == REFERENCE_SYSTEM {
            Some(&self.reference)
        } else {
            self.candidates.get(system).map(String::as_str)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlindCandidate {
    pub label: String,
    pub system_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalAssignment {
    pub annotator_id: String,
    pub example_id: String,
    /// Presentation order; labels stand in for system ids.
    pub candidates: Vec<BlindCandidate>,
    #[serde(default)]
    pub completed: bool,
}

impl EvalAssignment {
    pub fn system_for(&self, label: &str) -> Option<&str> {
        self.candidates
            .iter()
            .find(|c| c.label == label)
            .map(|c| c.system_id.as_str())
    }
}

/// Aspect scores for one blinded candidate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRating {
    pub label: String,
    pub a1: u8,
    pub a2: u8,
    pub a3: u8,
    pub a4: u8,
}

/// All ratings for one assignment, submitted together.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingSubmission {
    pub annotator_id: String,
    pub example_id: String,
    pub ratings: Vec<LabelRating>,
}

impl RatingSubmission {
    /// Resolves labels to systems; all candidates must be rated exactly once.
    pub fn resolve(&self, assignment: &EvalAssignment, timestamp: u64) -> Result<Vec<EvalRating>, AnnotationError> {
        let mut errors = Vec::new();
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for (i, r) in self.ratings.iter().enumerate() {
            let Some(system) = assignment.system_for(&r.label) else {
                errors.push(FieldError::new(format!("ratings[{i}].label"), "unknown label"));
                continue;
            };
            if !seen.insert(r.label.as_str()) {
                errors.push(FieldError::new(format!("ratings[{i}].label"), "rated twice"));
            }
            let aspects = [r.a1, r.a2, r.a3, r.a4];
            for (k, a) in aspects.iter().enumerate() {
                if *a > MAX_ASPECT {
                    errors.push(FieldError::new(
                        format!("ratings[{i}].a{}", k + 1),
                        format!("must be 0-{MAX_ASPECT}, got {a}"),
                    ));
                }
            }
            out.push(EvalRating {
                example_id: self.example_id.clone(),
                system_id: system.to_string(),
                annotator_id: self.annotator_id.clone(),
                a1: r.a1,
                a2: r.a2,
                a3: r.a3,
                a4: r.a4,
                overall: EvalRating::overall_of(aspects),
                timestamp,
            });
        }
        for c in &assignment.candidates {
            if !seen.contains(c.label.as_str()) {
                errors.push(FieldError::new("ratings", format!("missing label {}", c.label)));
            }
        }
        if errors.is_empty() {
            Ok(out)
        } else {
            Err(AnnotationError::Validation(errors))
        }
    }
}

/// Everything a store serves: items, queues and blinded assignments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub schema_version: u32,
    pub annotators: Vec<String>,
    #[serde(default)]
    pub items: Vec<AnnotationItem>,
    /// Annotator → pair ids in presentation order.
    #[serde(default)]
    pub queues: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub examples: Vec<EvalExample>,
    #[serde(default)]
    pub assignments: Vec<EvalAssignment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignOptions {
    pub seed: u64,
    /// Annotators per item; 1 partitions the items.
    pub overlap: usize,
}

impl Default for CampaignOptions {
    fn default() -> Self {
        Self { seed: 0, overlap: 1 }
    }
}

impl Campaign {
    pub fn build(
        items: Vec<AnnotationItem>,
        examples: Vec<EvalExample>,
        annotators: Vec<String>,
        options: CampaignOptions,
    ) -> Result<Self, AnnotationError> {
        let pair_ids: Vec<String> = items.iter().map(|i| i.pair_id.clone()).collect();
        let queues = build_annotation_queues(&pair_ids, &annotators, options.seed, options.overlap);
        let example_ids: Vec<String> = examples.iter().map(|e| e.example_id.clone()).collect();
        let systems: BTreeSet<String> = examples.iter().flat_map(|e| e.candidates.keys().cloned()).collect();
        let systems: Vec<String> = systems.into_iter().collect();
        let assignments = if examples.is_empty() {
            Vec::new()
        } else {
            build_assignments(&example_ids, &systems, &annotators, options.seed, options.overlap)
        };
        let campaign = Self {
            schema_version: SCHEMA_VERSION,
            annotators,
            items,
            queues,
            examples,
            assignments,
        };
        campaign.validate()?;
        Ok(campaign)
    }

    pub fn validate(&self) -> Result<(), AnnotationError> {
        let bad = |m: String| Err(AnnotationError::Campaign(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {}", self.schema_version));
        }
        if self.annotators.is_empty() {
            return bad("no annotators".into());
        }
        let annotators: BTreeSet<&str> = self.annotators.iter().map(String::as_str).collect();
        if annotators.len() != self.annotators.len() {
            return bad("duplicate annotator id".into());
        }
        let items: BTreeSet<&str> = self.items.iter().map(|i| i.pair_id.as_str()).collect();
        if items.len() != self.items.len() {
            return bad("duplicate pair id among items".into());
        }
        for (annotator, queue) in &self.queues {
            if !annotators.contains(annotator.as_str()) {
                return bad(format!("queue for unknown annotator {annotator}"));
            }
            if let Some(missing) = queue.iter().find(|p| !items.contains(p.as_str())) {
                return bad(format!("queued pair {missing} has no item"));
            }
        }
        let examples: BTreeMap<&str, &EvalExample> = self.examples.iter().map(|e| (e.example_id.as_str(), e)).collect();
        if examples.len() != self.examples.len() {
            return bad("duplicate example id".into());
        }
        let mut cells = BTreeSet::new();
        for a in &self.assignments {
            if !annotators.contains(a.annotator_id.as_str()) {
                return bad(format!("assignment for unknown annotator {}", a.annotator_id));
            }
            let Some(example) = examples.get(a.example_id.as_str()) else {
                return bad(format!("assignment for unknown example {}", a.example_id));
            };
            if !cells.insert((a.annotator_id.as_str(), a.example_id.as_str())) {
                return bad(format!("example {} assigned twice to {}", a.example_id, a.annotator_id));
            }
            if let Some(c) = a.candidates.iter().find(|c| example.text_for(&c.system_id).is_none()) {
                return bad(format!(
                    "example {} has no text for system {}",
                    a.example_id, c.system_id
                ));
            }
        }
        Ok(())
    }

    pub fn item(&self, pair_id: &str) -> Option<&AnnotationItem> {
        self.items.iter().find(|i| i.pair_id == pair_id)
    }

    pub fn example(&self, example_id: &str) -> Option<&EvalExample> {
        self.examples.iter().find(|e| e.example_id == example_id)
    }
}
