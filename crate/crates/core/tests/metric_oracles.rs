mod common;

use std::time::Instant;

use common::*;
use docmine_core::metrics::{bleu, cer, meteor, rouge, tokenize, Origin};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CASES: usize = 200;
const TOL: f64 = 1e-9;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

#[test]
fn metrics_match_brute_force_oracles() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for case in 0..CASES {
        let cand = random_tokens(&mut rng, 1, 12);
        let refr = random_tokens(&mut rng, 1, 12);
        let code = random_tokens(&mut rng, 0, 12);

        let got = bleu(&cand, &refr).unwrap();
        let want = bleu_oracle(&cand, &refr);
        assert!(
            close(got, want),
            "case {case} bleu {got} vs {want}: {cand:?} / {refr:?}"
        );

        let r = rouge(&cand, &refr).unwrap();
        let (r1, rl) = rouge_oracle(&cand, &refr);
        assert!(close(r.rouge1_f, r1), "case {case} rouge1 {} vs {r1}", r.rouge1_f);
        assert!(close(r.rouge_l_f, rl), "case {case} rougeL {} vs {rl}", r.rouge_l_f);

        let got = meteor(&cand, &refr).unwrap();
        let want = meteor_oracle(&cand, &refr);
        assert!(
            close(got, want),
            "case {case} meteor {got} vs {want}: {cand:?} / {refr:?}"
        );

        match (cer(&code, &cand, &refr), cer_oracle(&code, &cand, &refr)) {
            (Some(a), Some(b)) => assert!(close(a, b), "case {case} cer {a} vs {b}"),
            (a, b) => assert_eq!(a, b, "case {case} cer"),
        }
    }
    assert!(
        start.elapsed().as_secs_f64() < 10.0,
        "oracle suite took {:?}",
        start.elapsed()
    );
}

#[test]
fn oracles_agree_on_hand_values() {
    assert_eq!(rouge_oracle(&toks("a b c d"), &toks("a c b d")), (1.0, 0.75));
    assert_eq!(meteor_oracle(&toks("a b"), &toks("a b")), 0.9375);
    assert_eq!(meteor_oracle(&toks("d c b a"), &toks("a b c d")), 0.5);
    assert_eq!(cer_oracle(&toks("a b"), &toks("a"), &toks("a b")), Some(0.5));
    assert_eq!(levenshtein_oracle("kitten", "sitting"), 3);
    assert!(close(bleu_oracle(&toks("a b c d e f"), &toks("a b c d e f")), 1.0));
}

#[test]
fn repeated_tokens_and_short_candidates() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let n = rng.gen_range(1..=3);
        let cand: Vec<String> = (0..n).map(|_| ["x", "the"][rng.gen_range(0..2)].to_string()).collect();
        let refr = random_tokens(&mut rng, 1, 6);
        assert!(close(bleu(&cand, &refr).unwrap(), bleu_oracle(&cand, &refr)));
        assert!(close(meteor(&cand, &refr).unwrap(), meteor_oracle(&cand, &refr)));
    }
}

#[test]
fn tokenizer_golden() {
    let input = std::fs::read_to_string(fixture("tokenizer/input.txt")).unwrap();
    let mut rendered = String::new();
    for (i, line) in input.lines().enumerate() {
        let origin = if i % 2 == 0 {
            Origin::NaturalLanguage
        } else {
            Origin::Code
        };
        let tokens = tokenize(line, origin).tokens;
        rendered.push_str(&serde_json::to_string(&tokens).unwrap());
        rendered.push('\n');
    }
    let golden_path = fixture("tokenizer/golden.jsonl");
    if std::env::var_os("DOCMINE_BLESS").is_some() {
        std::fs::write(&golden_path, &rendered).unwrap();
    }
    let golden = std::fs::read_to_string(golden_path).unwrap();
    assert_eq!(input.lines().count(), 50);
    for (i, (got, want)) in rendered.lines().zip(golden.lines()).enumerate() {
        assert_eq!(got, want, "line {}", i + 1);
    }
    assert_eq!(rendered.lines().count(), golden.lines().count());
}
