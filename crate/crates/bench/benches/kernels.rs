use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use docmine_core::agreement::{kendall_tau, ScoredExample};
use docmine_core::dedup::{dedup_against_corpus, CorpusIndex, DedupConfig, DedupText};
use docmine_core::extract::Grammar;
use docmine_core::metrics::{bleu, meteor, rouge, tokenize, Origin};
use docmine_core::{levenshtein, PythonGrammar, SourceFile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS: [&str; 16] = [
    "return", "the", "value", "of", "list", "index", "if", "none", "raise", "error", "parse", "string", "number",
    "count", "path", "file",
];

fn sentence(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len)
        .map(|_| WORDS[rng.gen_range(0..WORDS.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

fn text(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len).map(|_| rng.gen_range(b'a'..=b'h') as char).collect()
}

fn bench_levenshtein(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut g = c.benchmark_group("levenshtein");
    for n in [50, 300] {
        let (a, b) = (text(&mut rng, n), text(&mut rng, n));
        g.bench_with_input(BenchmarkId::from_parameter(n), &(a, b), |bench, (a, b)| {
            bench.iter(|| levenshtein(black_box(a), black_box(b)))
        });
    }
    g.finish();
}

fn bench_dedup(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let corpus: Vec<DedupText> = (0..2000)
        .map(|i| DedupText {
            id: format!("c{i}"),
            code: text(&mut rng, 200),
            docstring: sentence(&mut rng, 20),
        })
        .collect();
    let candidates: Vec<DedupText> = (0..200)
        .map(|i| DedupText {
            id: format!("q{i}"),
            code: text(&mut rng, 200),
            docstring: sentence(&mut rng, 20),
        })
        .collect();
    let index = CorpusIndex::build(corpus, DedupConfig::default()).unwrap();
    c.bench_function("dedup_200x2000", |b| {
        b.iter(|| dedup_against_corpus(black_box(&candidates), &index))
    });
}

fn bench_metrics(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cand = tokenize(&sentence(&mut rng, 30), Origin::NaturalLanguage).tokens;
    let refr = tokenize(&sentence(&mut rng, 30), Origin::NaturalLanguage).tokens;
    c.bench_function("bleu_30", |b| b.iter(|| bleu(black_box(&cand), black_box(&refr))));
    c.bench_function("rouge_30", |b| b.iter(|| rouge(black_box(&cand), black_box(&refr))));
    c.bench_function("meteor_30", |b| b.iter(|| meteor(black_box(&cand), black_box(&refr))));
}

fn bench_kendall(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let examples: Vec<ScoredExample> = (0..1620)
        .map(|i| ScoredExample {
            example_id: format!("e{i}"),
            metric_score: rng.gen(),
            human_score: f64::from(rng.gen_range(0..17u8)) / 4.0,
        })
        .collect();
    c.bench_function("kendall_1620", |b| b.iter(|| kendall_tau(black_box(&examples))));
}

fn bench_parse(c: &mut Criterion) {
    let body: String = (0..200)
        .map(|i| {
            format!(
                "def f{i}(x, y):\n    \"\"\"Add things.\n\n    Args:\n        x: first\n    \"\"\"\n    if x > y:\n        return x - y\n    elif x == y:\n        return 0\n    return y - x\n\n"
            )
        })
        .collect();
    let file = SourceFile::new("bench.py", "r", body).unwrap();
    c.bench_function("parse_200_functions", |b| {
        b.iter(|| PythonGrammar.parse_functions(black_box(&file)).unwrap())
    });
}

criterion_group!(
    benches,
    bench_levenshtein,
    bench_dedup,
    bench_metrics,
    bench_kendall,
    bench_parse
);
criterion_main!(benches);
