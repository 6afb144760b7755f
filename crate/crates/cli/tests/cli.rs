//! End-to-end runs of the `seqpack` binary over small fixtures.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn seqpack(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqpack"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write_figure_corpus(dir: &Path) -> String {
    let path = dir.join("fig.jsonl");
    let mut body = String::new();
    for (id, len) in [("a", 14), ("b", 7), ("c", 5), ("d", 2), ("e", 3)] {
        body.push_str(&format!("{{\"id\": \"{id}\", \"length\": {len}}}\n"));
    }
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

#[test]
fn pack_writes_plan_and_reports() {
    let dir = TempDir::new().unwrap();
    let input = write_figure_corpus(dir.path());
    let out = seqpack(
        &["pack", &input, "--max-seq-len", "8", "--out", "out"],
        dir.path(),
    );
    assert!(out.status.success(), "{out:?}");

    let plan = fs::read_to_string(dir.path().join("out/plan.jsonl")).unwrap();
    assert_eq!(plan.lines().count(), 4);

    let compact: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/compactness.json")).unwrap())
            .unwrap();
    assert_eq!(compact["num_sequences"], 4);
    assert_eq!(compact["num_padding_tokens"], 1);
    assert_eq!(compact["delta_vs_concat"], 0);

    let trunc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/truncation.json")).unwrap())
            .unwrap();
    assert_eq!(trunc["total_truncations"], 1);

    let csv = fs::read_to_string(dir.path().join("out/truncation.csv")).unwrap();
    assert!(csv.starts_with("length,doc_count,truncations\n"));
}

#[test]
fn stats_reproduces_pack_reports_byte_for_byte() {
    let dir = TempDir::new().unwrap();
    let input = write_figure_corpus(dir.path());
    assert!(seqpack(
        &["pack", &input, "--max-seq-len", "8", "--out", "a"],
        dir.path()
    )
    .status
    .success());
    assert!(seqpack(
        &[
            "stats",
            &input,
            "--plan",
            "a/plan.jsonl",
            "--method",
            "bfd",
            "--max-seq-len",
            "8",
            "--out",
            "b",
        ],
        dir.path()
    )
    .status
    .success());
    for name in ["compactness.json", "truncation.json", "truncation.csv"] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        let b = fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
}

#[test]
fn materialize_round_trips_tokens() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("toks.jsonl");
    fs::write(
        &input,
        "{\"id\": \"t\", \"tokens\": [3, 1, 4, 1, 5]}\n",
    )
    .unwrap();
    let input = input.display().to_string();
    assert!(seqpack(
        &[
            "pack",
            &input,
            "--mode",
            "token-ids",
            "--max-seq-len",
            "4",
            "--out",
            "out",
        ],
        dir.path()
    )
    .status
    .success());
    assert!(seqpack(
        &[
            "materialize",
            &input,
            "--mode",
            "token-ids",
            "--max-seq-len",
            "4",
            "--plan",
            "out/plan.jsonl",
            "--pad-id",
            "7",
            "--out",
            "rows.bin",
        ],
        dir.path()
    )
    .status
    .success());
    let bytes = fs::read(dir.path().join("rows.bin")).unwrap();
    let words: Vec<u32> = bytes
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    assert_eq!(words, vec![3, 1, 4, 1, 5, 7, 7, 7]);
}

#[test]
fn toy_boundary_probability_has_zero_increase() {
    let dir = TempDir::new().unwrap();
    let out = seqpack(&["toy", "--p-grid", "0.5", "--m-max", "20"], dir.path());
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let mut rows = 0;
    for line in stdout.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[4], "0", "nonzero increase in {line}");
        rows += 1;
    }
    assert_eq!(rows, 20);
}

#[test]
fn exit_codes_follow_error_categories() {
    let dir = TempDir::new().unwrap();
    let input = write_figure_corpus(dir.path());

    // Missing input: plain I/O failure.
    let out = seqpack(
        &["pack", "nope.jsonl", "--max-seq-len", "8", "--out", "x"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));

    // Config rejection.
    let out = seqpack(
        &["pack", &input, "--max-seq-len", "0", "--out", "x"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));

    // Parse failure with a line number in the message.
    fs::write(dir.path().join("bad.jsonl"), "{\"id\": \"a\"}\n").unwrap();
    let out = seqpack(
        &["pack", "bad.jsonl", "--max-seq-len", "8", "--out", "x"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.jsonl:1"));

    // Capacity limit: exact solver refuses large instances.
    let mut many = String::new();
    for i in 0..20 {
        many.push_str(&format!("{{\"id\": \"m{i}\", \"length\": 2}}\n"));
    }
    fs::write(dir.path().join("many.jsonl"), many).unwrap();
    let out = seqpack(
        &[
            "pack",
            "many.jsonl",
            "--max-seq-len",
            "8",
            "--method",
            "optimal",
            "--out",
            "x",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(4));

    // Failed runs leave no partial plan behind.
    assert!(!dir.path().join("x/plan.jsonl").exists());
}

#[test]
fn sentinel_flag_accepts_optional_id() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("one.jsonl");
    fs::write(&input, "{\"id\": \"a\", \"length\": 3}\n").unwrap();
    let input = input.display().to_string();
    let out = seqpack(
        &[
            "pack",
            &input,
            "--max-seq-len",
            "8",
            "--sentinel",
            "--out",
            "out",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{out:?}");
    let plan = fs::read_to_string(dir.path().join("out/plan.jsonl")).unwrap();
    // Effective length 4: slice end includes the sentinel position.
    assert!(plan.contains("\"end\":4"), "{plan}");
}
