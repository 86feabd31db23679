use std::collections::BTreeSet;

use super::tokenize::is_word;

fn word_set(tokens: &[String]) -> BTreeSet<String> {
    tokens.iter().filter(|t| is_word(t)).map(|t| t.to_lowercase()).collect()
}

/// Common Entity Recall: the share of 1-grams common to code and reference
/// that the candidate also contains.
///
/// Matching is case-insensitive and ignores punctuation-only tokens.
/// Returns `None` when code and reference share no word.
pub fn cer(code: &[String], candidate: &[String], reference: &[String]) -> Option<f64> {
    let code = word_set(code);
    let reference = word_set(reference);
    let shared: BTreeSet<_> = code.intersection(&reference).collect();
    if shared.is_empty() {
        return None;
    }
    let candidate = word_set(candidate);
    let recalled = shared.iter().filter(|t| candidate.contains(**t)).count();
    Some(recalled as f64 / shared.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn half_recalled() {
        // code ∩ ref = {a, b}; candidate holds a only
        assert_eq!(cer(&t("a b c"), &t("a z"), &t("a b q")), Some(0.5));
    }

    #[test]
    fn candidate_equal_reference() {
        assert_eq!(cer(&t("x y"), &t("y w"), &t("y w")), Some(1.0));
    }

    #[test]
    fn nothing_recalled() {
        assert_eq!(cer(&t("a b"), &t("q"), &t("a b")), Some(0.0));
    }

    #[test]
    fn empty_denominator_is_absent() {
        assert_eq!(cer(&t("a"), &t("a"), &t("b")), None);
    }

    #[test]
    fn identifiers_match_case_insensitively() {
        assert_eq!(
            cer(&t("raise ValueError"), &t("valueerror"), &t("raises valueerror .")),
            Some(1.0)
        );
    }
}
