use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::MetricError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScores {
    pub rouge1_f: f64,
    #[serde(rename = "rougeL_f")]
    pub rouge_l_f: f64,
}

fn f1(overlap: usize, cand_len: usize, ref_len: usize) -> f64 {
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / cand_len as f64;
    let r = overlap as f64 / ref_len as f64;
    2.0 * p * r / (p + r)
}

/// ROUGE-1 (clipped unigram overlap) and ROUGE-L (LCS) F1 scores.
pub fn rouge(candidate: &[String], reference: &[String]) -> Result<RougeScores, MetricError> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let mut ref_counts: HashMap<&str, usize> = HashMap::new();
    for t in reference {
        *ref_counts.entry(t).or_default() += 1;
    }
    let mut overlap = 0;
    for t in candidate {
        if let Some(c) = ref_counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    let lcs = lcs_len(candidate, reference);
    Ok(RougeScores {
        rouge1_f: f1(overlap, candidate.len(), reference.len()),
        rouge_l_f: f1(lcs, candidate.len(), reference.len()),
    })
}

pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn swapped_middle() {
        let r = rouge(&t("a b c d"), &t("a c b d")).unwrap();
        assert_eq!(r.rouge1_f, 1.0);
        assert_eq!(r.rouge_l_f, 0.75);
    }

    #[test]
    fn identical_and_disjoint() {
        let s = t("x y z");
        assert_eq!(
            rouge(&s, &s).unwrap(),
            RougeScores {
                rouge1_f: 1.0,
                rouge_l_f: 1.0
            }
        );
        assert_eq!(
            rouge(&s, &t("p q")).unwrap(),
            RougeScores {
                rouge1_f: 0.0,
                rouge_l_f: 0.0
            }
        );
    }

    #[test]
    fn repeated_tokens_are_clipped() {
        // overlap 1 (one "a" in reference): P = 1/3, R = 1/2
        let r = rouge(&t("a a a"), &t("a b")).unwrap();
        assert!((r.rouge1_f - 0.4).abs() < 1e-12);
    }
}
