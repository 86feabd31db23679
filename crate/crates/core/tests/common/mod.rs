//! Brute-force reference implementations and fixture helpers shared by the
//! integration test targets. Each oracle is written from the metric
//! definitions without reusing library internals.

#![allow(dead_code)]

use std::path::PathBuf;

use docmine_core::metrics::stem;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(rel)
}

pub fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

/// Vocabulary with stem-sharing variants so both METEOR stages fire.
pub const VOCAB: [&str; 14] = [
    "return", "returns", "returned", "value", "values", "the", "a", "list", "lists", "index", "error", "errors",
    "raise", "x",
];

pub fn random_tokens(rng: &mut ChaCha8Rng, min: usize, max: usize) -> Vec<String> {
    let n = rng.gen_range(min..=max);
    (0..n)
        .map(|_| VOCAB[rng.gen_range(0..VOCAB.len())].to_string())
        .collect()
}

fn occurrences(seq: &[String], gram: &[String]) -> usize {
    if gram.len() > seq.len() {
        return 0;
    }
    (0..=seq.len() - gram.len())
        .filter(|&i| seq[i..i + gram.len()] == *gram)
        .count()
}

/// Sentence BLEU with the length-scaled smoothing for zero precisions.
pub fn bleu_oracle(cand: &[String], refr: &[String]) -> f64 {
    let len = cand.len();
    let mut product = 1.0;
    let mut zeros = 0;
    for n in 1..=4usize {
        let positions = if len >= n { len - n + 1 } else { 0 };
        let mut clipped = 0;
        for i in 0..positions {
            let gram = &cand[i..i + n];
            let first = (0..positions).position(|k| cand[k..k + n] == *gram).unwrap();
            if first == i {
                clipped += occurrences(cand, gram).min(occurrences(refr, gram));
            }
        }
        let denom = positions.max(1) as f64;
        let p = if clipped > 0 {
            clipped as f64 / denom
        } else {
            if len <= 1 {
                return 0.0;
            }
            zeros += 1;
            1.0 / (2f64.powi(zeros) * (5.0 / (len as f64).ln())) / denom
        };
        product *= p;
    }
    let bp = if len > refr.len() {
        1.0
    } else {
        (1.0 - refr.len() as f64 / len as f64).exp()
    };
    bp * product.powf(0.25)
}

/// Longest common subsequence by exhaustive subset search over the shorter
/// sequence; inputs must be short.
pub fn lcs_oracle(a: &[String], b: &[String]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    assert!(short.len() <= 16, "subset search needs short inputs");
    let mut best = 0;
    for mask in 0u32..(1 << short.len()) {
        let k = mask.count_ones() as usize;
        if k <= best {
            continue;
        }
        let sub: Vec<&String> = (0..short.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| &short[i])
            .collect();
        let mut it = long.iter();
        if sub.iter().all(|s| it.any(|t| t == *s)) {
            best = k;
        }
    }
    best
}

fn f1(overlap: usize, c: usize, r: usize) -> f64 {
    if overlap == 0 {
        0.0
    } else {
        let p = overlap as f64 / c as f64;
        let q = overlap as f64 / r as f64;
        2.0 * p * q / (p + q)
    }
}

/// (ROUGE-1 F1, ROUGE-L F1).
pub fn rouge_oracle(cand: &[String], refr: &[String]) -> (f64, f64) {
    let mut distinct: Vec<&String> = Vec::new();
    for t in cand {
        if !distinct.contains(&t) {
            distinct.push(t);
        }
    }
    let overlap: usize = distinct
        .iter()
        .map(|t| {
            let c = cand.iter().filter(|x| x == t).count();
            let r = refr.iter().filter(|x| x == t).count();
            c.min(r)
        })
        .sum();
    (
        f1(overlap, cand.len(), refr.len()),
        f1(lcs_oracle(cand, refr), cand.len(), refr.len()),
    )
}

/// One greedy stage: hypothesis positions from last to first, each taking
/// the last free reference position with an equal key.
fn greedy_stage(
    hyp: &[String],
    refr: &[String],
    hyp_used: &mut [bool],
    ref_used: &mut [bool],
    out: &mut Vec<(usize, usize)>,
) {
    for i in (0..hyp.len()).rev() {
        if hyp_used[i] {
            continue;
        }
        for j in (0..refr.len()).rev() {
            if !ref_used[j] && refr[j] == hyp[i] {
                hyp_used[i] = true;
                ref_used[j] = true;
                out.push((i, j));
                break;
            }
        }
    }
}

/// METEOR with exact then stem matching, alpha 0.9, beta 3, gamma 0.5.
pub fn meteor_oracle(cand: &[String], refr: &[String]) -> f64 {
    let mut hyp_used = vec![false; cand.len()];
    let mut ref_used = vec![false; refr.len()];
    let mut matches = Vec::new();
    greedy_stage(cand, refr, &mut hyp_used, &mut ref_used, &mut matches);
    let cs: Vec<String> = cand.iter().map(|w| stem(w)).collect();
    let rs: Vec<String> = refr.iter().map(|w| stem(w)).collect();
    greedy_stage(&cs, &rs, &mut hyp_used, &mut ref_used, &mut matches);
    let m = matches.len();
    if m == 0 {
        return 0.0;
    }
    // A chunk starts at every match whose diagonal predecessor is not a match.
    let chunks = matches
        .iter()
        .filter(|&&(h, r)| h == 0 || r == 0 || !matches.contains(&(h - 1, r - 1)))
        .count();
    let p = m as f64 / cand.len() as f64;
    let r = m as f64 / refr.len() as f64;
    let f = p * r / (0.9 * p + 0.1 * r);
    let penalty = 0.5 * (chunks as f64 / m as f64).powi(3);
    f * (1.0 - penalty)
}

fn words_lower(tokens: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for t in tokens {
        if t.chars().any(|c| c.is_alphanumeric()) {
            let w = t.to_lowercase();
            if !out.contains(&w) {
                out.push(w);
            }
        }
    }
    out
}

/// |code ∩ cand ∩ ref| / |code ∩ ref| over lowercased word sets.
pub fn cer_oracle(code: &[String], cand: &[String], refr: &[String]) -> Option<f64> {
    let (code, cand, refr) = (words_lower(code), words_lower(cand), words_lower(refr));
    let shared: Vec<&String> = code.iter().filter(|w| refr.contains(w)).collect();
    if shared.is_empty() {
        return None;
    }
    let hit = shared.iter().filter(|w| cand.contains(w)).count();
    Some(hit as f64 / shared.len() as f64)
}

/// Full-table edit distance over chars.
pub fn levenshtein_oracle(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

/// (concordant, discordant, tie, dropped) from every unordered pair.
pub fn kendall_counts_oracle(metric: &[f64], human: &[f64]) -> (u64, u64, u64, u64) {
    let (mut c, mut d, mut t, mut x) = (0, 0, 0, 0);
    for i in 0..metric.len() {
        for j in i + 1..metric.len() {
            let dh = human[j] - human[i];
            let dm = metric[j] - metric[i];
            if dh == 0.0 {
                x += 1;
            } else if dm == 0.0 {
                t += 1;
            } else if (dh > 0.0) == (dm > 0.0) {
                c += 1;
            } else {
                d += 1;
            }
        }
    }
    (c, d, t, x)
}

pub fn kendall_tau_oracle(metric: &[f64], human: &[f64]) -> Option<f64> {
    let (c, d, t, _) = kendall_counts_oracle(metric, human);
    let denom = c + d + t;
    (denom > 0).then(|| (c as f64 - d as f64).abs() / denom as f64)
}

/// Edit-distance DP restricted to the diagonal band |i - j| <= max, with
/// cells capped at max + 1. Stops once a whole row exceeds `max`; row minima
/// never decrease, so the answer is exact whenever it is `<= max`.
pub fn within_distance(a: &[char], b: &[char], max: usize) -> bool {
    let cap = max + 1;
    let mut prev: Vec<usize> = (0..=b.len()).map(|j| j.min(cap)).collect();
    for i in 1..=a.len() {
        let mut cur = vec![cap; b.len() + 1];
        cur[0] = i.min(cap);
        let lo = i.saturating_sub(max).max(1);
        let hi = (i + max).min(b.len());
        for j in lo..=hi {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1).min(cap);
        }
        if cur.iter().min().copied().unwrap_or(0) > max {
            return false;
        }
        prev = cur;
    }
    prev[b.len()] <= max
}

/// Exhaustive duplicate scan: lowest corpus index whose code (then
/// docstring) prefix is within the relative bound, with the matched field.
pub fn exhaustive_match(
    cand_code: &str,
    cand_doc: &str,
    corpus: &[(String, String)],
    prefix: usize,
    threshold: f64,
) -> Option<(usize, &'static str)> {
    let cut = |s: &str| s.chars().take(prefix).collect::<Vec<char>>();
    let (cc, cd) = (cut(cand_code), cut(cand_doc));
    let dup = |a: &[char], b: &[char]| {
        let base = a.len().max(b.len());
        // largest integer distance strictly below threshold * base
        let bound = threshold * base as f64;
        let max = (0..=base).take_while(|&d| (d as f64) < bound).last();
        max.is_some_and(|m| within_distance(a, b, m))
    };
    corpus.iter().enumerate().find_map(|(i, (code, doc))| {
        if dup(&cc, &cut(code)) {
            Some((i, "code"))
        } else if dup(&cd, &cut(doc)) {
            Some((i, "docstring"))
        } else {
            None
        }
    })
}

/// A pair with the given rule-filter features; branch blocks are `if x`.
pub fn synthetic_pair(
    id: &str,
    code_lines: usize,
    doc_lines: usize,
    complexity: u32,
    branches: usize,
) -> docmine_core::CodeDocPair {
    use docmine_core::extract::{BranchBlock, BranchKind};
    docmine_core::CodeDocPair {
        pair_id: id.into(),
        repo_id: "r".into(),
        path: "m.py".into(),
        unit: docmine_core::FunctionUnit {
            qualified_name: id.into(),
            signature: "def f(x):".into(),
            body_code: "    return x".into(),
            docstring: Some("Doc.".into()),
            start_line: 1,
            end_line: code_lines,
            code_line_count: code_lines,
            doc_line_count: doc_lines,
            complexity,
            branch_blocks: (0..branches)
                .map(|i| BranchBlock {
                    kind: BranchKind::If,
                    line: i + 2,
                    identifiers: vec!["x".into()],
                })
                .collect(),
        },
        repo_stars: None,
    }
}
