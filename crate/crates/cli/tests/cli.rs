//! The `owah` command end to end on a small data directory.

use std::path::Path;
use std::process::{Command, Output};

fn owah(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_owah")).arg("--data-dir").arg(dir).args(args).output().unwrap()
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn generate_train_evaluate_and_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(owah(dir, &["gen-data", "--split", "train_small", "--count", "6"]));
    ok(owah(dir, &["gen-data", "--split", "test", "--count", "2"]));
    let train = ok(owah(dir, &["train-gpn", "--dataset", dir.join("train_small.json").to_str().unwrap(), "--epochs", "2"]));
    assert!(train.contains("held-out loss"), "{train}");
    assert!(dir.join("gpn_large.bin").exists());

    let records = dir.join("records");
    let report = dir.join("nopa.json");
    let args = ["eval", "--helper", "nopa", "--runs", "1", "--out", report.to_str().unwrap()];
    let out = ok(owah(dir, &[&args[..], &["--records", records.to_str().unwrap()]].concat()));
    assert!(out.contains("speedup"), "{out}");
    assert!(report.with_extension("csv").exists());

    let mut files: Vec<_> = std::fs::read_dir(&records).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    assert_eq!(files.len(), 2);
    for f in &files {
        let out = ok(owah(dir, &["replay", f.to_str().unwrap()]));
        assert!(out.contains("ticks replayed"), "{out}");
    }

    // a corrupted record fails replay
    let text = std::fs::read_to_string(&files[0]).unwrap();
    let bad = dir.join("bad.jsonl");
    let mut lines: Vec<&str> = text.lines().collect();
    lines.truncate(lines.len() - 1);
    lines.swap(1, 2);
    std::fs::write(&bad, lines.join("\n")).unwrap();
    assert!(!owah(dir, &["replay", bad.to_str().unwrap()]).status.success());
}

#[test]
fn helpful_errors_for_missing_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = owah(dir, &["eval", "--helper", "hp_gt"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("test.json"));

    ok(owah(dir, &["gen-data", "--split", "test", "--count", "1"]));
    let out = owah(dir, &["eval", "--helper", "nopa"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("train-gpn"));
    let out = owah(dir, &["eval", "--helper", "nopa,bogus"]);
    assert!(!out.status.success());
}
