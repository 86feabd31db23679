mod common;

use common::fixture;
use docmine_core::extract::{extract_manifest, BranchKind, RepoEntry, RepoManifest};
use docmine_core::{CodeDocPair, PythonGrammar};

fn manifest(stars: u64) -> RepoManifest {
    RepoManifest::new([RepoEntry {
        repo_id: "fx".into(),
        stars,
        license: "mit".into(),
        root: fixture("extract_repo"),
    }])
}

fn run(stars: u64) -> (Vec<CodeDocPair>, docmine_core::extract::ExtractSummary) {
    let mut pairs = Vec::new();
    let summary = extract_manifest(&manifest(stars), &PythonGrammar, 10, |p| pairs.push(p)).unwrap();
    (pairs, summary)
}

fn render(pairs: &[CodeDocPair]) -> String {
    pairs.iter().map(|p| serde_json::to_string(p).unwrap() + "\n").collect()
}

#[test]
fn ten_pairs_in_path_then_line_order() {
    let (pairs, summary) = run(50);
    let got: Vec<(&str, &str, usize)> = pairs
        .iter()
        .map(|p| (p.path.as_str(), p.unit.qualified_name.as_str(), p.unit.start_line))
        .collect();
    assert_eq!(
        got,
        vec![
            ("a.py", "add", 4),
            ("a.py", "classify", 13),
            ("pkg/b.py", "Stack.push", 4),
            ("pkg/b.py", "Stack.pop", 8),
            ("pkg/b.py", "Stack.size", 12),
            ("pkg/b.py", "outer", 18),
            ("pkg/b.py", "outer.keep", 21),
            ("pkg/c.py", "fetch", 4),
            ("pkg/c.py", "single_quotes", 14),
            ("pkg/c.py", "raw_doc", 19),
        ]
    );
    assert_eq!(summary.files, 3);
    assert_eq!(summary.functions, 12);
    assert_eq!(summary.pairs, 10);
    assert!(summary.parse_errors.is_empty());
    assert!(pairs.iter().all(|p| p.repo_stars == Some(50)));
}

#[test]
fn unit_features() {
    let (pairs, _) = run(50);
    let by_name = |n: &str| &pairs.iter().find(|p| p.unit.qualified_name == n).unwrap().unit;

    let classify = by_name("classify");
    assert_eq!(
        classify.docstring.as_deref(),
        Some("Classify a number.\n\nReturns a label.")
    );
    assert_eq!(classify.doc_line_count, 3);
    assert_eq!(classify.code_line_count, 8);
    assert_eq!(classify.complexity, 4);
    let kinds: Vec<_> = classify.branch_blocks.iter().map(|b| b.kind).collect();
    assert_eq!(kinds, vec![BranchKind::If, BranchKind::Elif]);
    assert_eq!(classify.branch_blocks[0].identifiers, vec!["n".to_string()]);
    let fetch = by_name("fetch");
    assert_eq!(fetch.branch_blocks.len(), 2);
    assert!(fetch.branch_blocks.iter().all(|b| b.kind == BranchKind::Except));
    assert!(!by_name("outer").has_branch_blocks());

    assert_eq!(by_name("add").complexity, 1);
    assert_eq!(by_name("outer.keep").complexity, 2);
    assert_eq!(by_name("fetch").complexity, 3);
    assert_eq!(by_name("raw_doc").docstring.as_deref(), Some(r"Raw docstring with \d."));
    assert_eq!(
        by_name("single_quotes").docstring.as_deref(),
        Some("Uses single quotes.")
    );
    assert!(!by_name("add").code().contains("Add two numbers"));
}

#[test]
fn rerun_is_byte_identical() {
    let first = render(&run(50).0);
    let second = render(&run(50).0);
    assert_eq!(first, second);
    let ids: std::collections::BTreeSet<_> = run(50).0.into_iter().map(|p| p.pair_id).collect();
    assert_eq!(ids.len(), 10);
}

#[test]
fn repo_at_star_floor_is_skipped() {
    let (pairs, summary) = run(10);
    assert!(pairs.is_empty());
    assert_eq!(summary.skipped_repos, 1);
    assert_eq!(summary.repos, 0);
}
