use std::io::Write;

use docmine_core::pipeline::{stats, write_stats_csv, StatsReport};

#[test]
fn step2_zero_bucket_from_annotation_export() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("export.jsonl");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(
        f,
        "# docmine export protocol=annotate3step schema_version=1 records=12000"
    )
    .unwrap();
    for i in 0..12_000 {
        let step2 = match i {
            0..=6299 => "0".to_string(),
            6300..=11899 => (1 + i % 3).to_string(),
            _ => "null".to_string(),
        };
        writeln!(
            f,
            r#"{{"pair_id":"p{i}","annotator_id":"ann1","step1":2,"step2":{step2},"step3":null,"timestamp":0}}"#
        )
        .unwrap();
    }
    drop(f);

    let StatsReport::Scores(s) = stats(&path).unwrap() else {
        panic!("expected score statistics");
    };
    assert_eq!(s.records, 12_000);
    assert_eq!(s.step2["0"], 6300);
    assert_eq!(s.step2["blank"], 100);
    assert_eq!(s.step2["1"] + s.step2["2"] + s.step2["3"], 5600);
    assert_eq!(s.step1["2"], 12_000);
    assert_eq!(s.step3["blank"], 12_000);

    let mut csv = Vec::new();
    write_stats_csv(&StatsReport::Scores(s), &mut csv).unwrap();
    let csv = String::from_utf8(csv).unwrap();
    assert!(csv.lines().any(|l| l == "scores,step2,0,6300"), "{csv}");
}
