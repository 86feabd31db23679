//! Near-duplicate detection by prefix edit distance.
//!
//! Two texts are duplicates when the Levenshtein distance between their
//! first `prefix_chars` characters is below `relative_threshold` times the
//! longer of the two prefixes. Corpus scans prune with two lower bounds on
//! the distance, length difference and a binned character histogram
//! difference, neither of which can reject a true duplicate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::CodeDocPair;

const HIST_BINS: usize = 32;

#[derive(Debug, Error)]
pub enum DedupError {
    #[error("invalid dedup config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DedupField {
    Code,
    Docstring,
    Both,
}

impl DedupField {
    fn fields(self) -> &'static [TextField] {
        match self {
            DedupField::Code => &[TextField::Code],
            DedupField::Docstring => &[TextField::Docstring],
            DedupField::Both => &[TextField::Code, TextField::Docstring],
        }
    }
}

/// Which text produced a match.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextField {
    Code,
    Docstring,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DedupConfig {
    pub prefix_chars: usize,
    pub relative_threshold: f64,
    pub field: DedupField,
}

impl Default for DedupConfig {
    fn default() -> Self {
        Self {
            prefix_chars: 300,
            relative_threshold: 0.05,
            field: DedupField::Both,
        }
    }
}

impl DedupConfig {
    pub fn validate(&self) -> Result<(), DedupError> {
        if self.prefix_chars == 0 {
            return Err(DedupError::Config("prefix_chars must be at least 1".into()));
        }
        if !(self.relative_threshold > 0.0 && self.relative_threshold < 1.0) {
            return Err(DedupError::Config(format!(
                "relative_threshold {} must lie in (0, 1)",
                self.relative_threshold
            )));
        }
        Ok(())
    }

    /// Largest distance that still counts as a duplicate for a base length.
    pub fn max_distance(&self, base_length: usize) -> Option<usize> {
        let bound = self.relative_threshold * base_length as f64;
        if bound <= 0.0 {
            return None;
        }
        let k = bound.ceil() as usize - 1;
        debug_assert!((k as f64) < bound);
        Some(k)
    }

    pub fn is_duplicate_distance(&self, distance: usize, base_length: usize) -> bool {
        (distance as f64) < self.relative_threshold * base_length as f64
    }
}

/// Edit distance over Unicode scalar values with unit costs.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein_chars(&a, &b)
}

pub fn levenshtein_chars(a: &[char], b: &[char]) -> usize {
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let next = (diag + usize::from(ca != cb)).min(row[j] + 1).min(row[j + 1] + 1);
            diag = row[j + 1];
            row[j + 1] = next;
        }
    }
    row[b.len()]
}

/// Banded edit distance: `Some(d)` when `d <= max`, otherwise `None`.
pub fn bounded_levenshtein(a: &[char], b: &[char], max: usize) -> Option<usize> {
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
    if a.len() - b.len() > max {
        return None;
    }
    if b.is_empty() {
        return Some(a.len());
    }
    let inf = max + 1;
    let width = b.len();
    let mut prev = vec![inf; width + 1];
    let mut cur = vec![inf; width + 1];
    for (j, p) in prev.iter_mut().enumerate().take(max.min(width) + 1) {
        *p = j;
    }
    for i in 1..=a.len() {
        let lo = i.saturating_sub(max).max(1);
        let hi = (i + max).min(width);
        cur[lo - 1] = if lo == 1 && i <= max { i } else { inf };
        let mut row_min = cur[lo - 1];
        for j in lo..=hi {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            let del = prev[j] + 1;
            let ins = cur[j - 1] + 1;
            let v = sub.min(del).min(ins).min(inf);
            cur[j] = v;
            row_min = row_min.min(v);
        }
        if hi < width {
            cur[hi + 1] = inf;
        }
        if row_min > max {
            return None;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let d = prev[width];
    (d <= max).then_some(d)
}

/// Outcome of comparing two texts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparison {
    pub distance: usize,
    pub base_length: usize,
    pub is_duplicate: bool,
}

fn prefix(text: &str, n: usize) -> Vec<char> {
    text.chars().take(n).collect()
}

/// Compares two texts under the prefix rule.
pub fn is_duplicate(candidate: &str, target: &str, cfg: &DedupConfig) -> Comparison {
    let a = prefix(candidate, cfg.prefix_chars);
    let b = prefix(target, cfg.prefix_chars);
    let base_length = a.len().max(b.len());
    let distance = levenshtein_chars(&a, &b);
    Comparison {
        distance,
        base_length,
        is_duplicate: cfg.is_duplicate_distance(distance, base_length),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedupReport {
    pub candidate_id: String,
    pub matched_corpus_id: Option<String>,
    pub matched_field: Option<TextField>,
    /// Distance and base length of the match; absent when nothing matched.
    pub distance: Option<usize>,
    pub base_length: Option<usize>,
    pub is_duplicate: bool,
}

impl DedupReport {
    fn no_match(candidate_id: &str) -> Self {
        Self {
            candidate_id: candidate_id.to_string(),
            matched_corpus_id: None,
            matched_field: None,
            distance: None,
            base_length: None,
            is_duplicate: false,
        }
    }
}

/// The texts of one item to compare.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DedupText {
    pub id: String,
    pub code: String,
    pub docstring: String,
}

impl From<&CodeDocPair> for DedupText {
    fn from(p: &CodeDocPair) -> Self {
        Self {
            id: p.pair_id.clone(),
            code: p.code(),
            docstring: p.docstring().to_string(),
        }
    }
}

#[derive(Debug, Clone)]
struct Prefix {
    text: String,
    len: usize,
    hist: [u16; HIST_BINS],
}

impl Prefix {
    fn new(text: &str, n: usize) -> Self {
        let text: String = text.chars().take(n).collect();
        let mut hist = [0u16; HIST_BINS];
        let mut len = 0;
        for c in text.chars() {
            hist[c as usize % HIST_BINS] += 1;
            len += 1;
        }
        Self { text, len, hist }
    }

    /// Lower bound on the edit distance from binned character counts.
    fn hist_bound(&self, other: &Prefix) -> usize {
        let (mut pos, mut neg) = (0i32, 0i32);
        for (a, b) in self.hist.iter().zip(&other.hist) {
            let d = i32::from(*a) - i32::from(*b);
            if d > 0 {
                pos += d
            } else {
                neg -= d
            }
        }
        pos.max(neg) as usize
    }

    fn chars(&self) -> Vec<char> {
        self.text.chars().collect()
    }
}

/// Immutable index over a reference corpus, bucketed by prefix length.
pub struct CorpusIndex {
    cfg: DedupConfig,
    ids: Vec<String>,
    code: Vec<Prefix>,
    docs: Vec<Prefix>,
    code_buckets: Vec<Vec<u32>>,
    doc_buckets: Vec<Vec<u32>>,
}

impl CorpusIndex {
    pub fn build(corpus: impl IntoIterator<Item = DedupText>, cfg: DedupConfig) -> Result<Self, DedupError> {
        cfg.validate()?;
        let mut index = Self {
            cfg,
            ids: Vec::new(),
            code: Vec::new(),
            docs: Vec::new(),
            code_buckets: vec![Vec::new(); cfg.prefix_chars + 1],
            doc_buckets: vec![Vec::new(); cfg.prefix_chars + 1],
        };
        for item in corpus {
            index.insert(item);
        }
        Ok(index)
    }

    /// Appends one entry; it gets the next (highest) index.
    pub fn insert(&mut self, item: DedupText) {
        let i = u32::try_from(self.ids.len()).expect("corpus index exceeds u32 entries");
        let code = Prefix::new(&item.code, self.cfg.prefix_chars);
        let doc = Prefix::new(&item.docstring, self.cfg.prefix_chars);
        self.code_buckets[code.len].push(i);
        self.doc_buckets[doc.len].push(i);
        self.ids.push(item.id);
        self.code.push(code);
        self.docs.push(doc);
    }

    pub fn from_pairs(pairs: &[CodeDocPair], cfg: DedupConfig) -> Result<Self, DedupError> {
        Self::build(pairs.iter().map(DedupText::from), cfg)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn config(&self) -> &DedupConfig {
        &self.cfg
    }

    fn field(&self, field: TextField) -> (&[Prefix], &[Vec<u32>]) {
        match field {
            TextField::Code => (&self.code, &self.code_buckets),
            TextField::Docstring => (&self.docs, &self.doc_buckets),
        }
    }

    /// Corpus entries whose prefix length could still allow a duplicate.
    fn length_candidates(&self, field: TextField, len: usize, out: &mut Vec<(u32, TextField)>) {
        let (_, buckets) = self.field(field);
        for (l, bucket) in buckets.iter().enumerate() {
            if bucket.is_empty() {
                continue;
            }
            let diff = len.abs_diff(l);
            if self.cfg.is_duplicate_distance(diff, len.max(l)) {
                out.extend(bucket.iter().map(|&i| (i, field)));
            }
        }
    }

    fn compare(&self, cand: &Prefix, cand_chars: &[char], i: u32, field: TextField) -> Option<Comparison> {
        let (prefixes, _) = self.field(field);
        let target = &prefixes[i as usize];
        let base_length = cand.len.max(target.len);
        let max = self.cfg.max_distance(base_length)?;
        if cand.hist_bound(target) > max {
            return None;
        }
        let distance = bounded_levenshtein(cand_chars, &target.chars(), max)?;
        Some(Comparison {
            distance,
            base_length,
            is_duplicate: true,
        })
    }

    /// Reports the lowest-index corpus entry that duplicates the candidate
    /// (code before docstring within one entry), or no match.
    pub fn lookup(&self, candidate: &DedupText) -> DedupReport {
        self.lookup_inner(candidate, false)
    }

    /// Like [`lookup`](Self::lookup) but ignores entries carrying the
    /// candidate's own id.
    pub fn lookup_excluding_self(&self, candidate: &DedupText) -> DedupReport {
        self.lookup_inner(candidate, true)
    }

    fn lookup_inner(&self, candidate: &DedupText, skip_self: bool) -> DedupReport {
        let n = self.cfg.prefix_chars;
        let mut pool = Vec::new();
        let mut prefixes = Vec::new();
        for &field in self.cfg.field.fields() {
            let text = match field {
                TextField::Code => &candidate.code,
                TextField::Docstring => &candidate.docstring,
            };
            let p = Prefix::new(text, n);
            self.length_candidates(field, p.len, &mut pool);
            prefixes.push((field, p));
        }
        pool.sort_unstable();

        let chars: Vec<(TextField, &Prefix, Vec<char>)> = prefixes.iter().map(|(f, p)| (*f, p, p.chars())).collect();
        for (i, field) in pool {
            if skip_self && self.ids[i as usize] == candidate.id {
                continue;
            }
            let (_, p, c) = chars.iter().find(|(f, _, _)| *f == field).expect("field prefix");
            if let Some(cmp) = self.compare(p, c, i, field) {
                return DedupReport {
                    candidate_id: candidate.id.clone(),
                    matched_corpus_id: Some(self.ids[i as usize].clone()),
                    matched_field: Some(field),
                    distance: Some(cmp.distance),
                    base_length: Some(cmp.base_length),
                    is_duplicate: true,
                };
            }
        }
        DedupReport::no_match(&candidate.id)
    }
}

/// Looks every candidate up in parallel; reports keep candidate order.
pub fn dedup_against_corpus(candidates: &[DedupText], index: &CorpusIndex) -> Vec<DedupReport> {
    candidates.par_iter().map(|c| index.lookup(c)).collect()
}
