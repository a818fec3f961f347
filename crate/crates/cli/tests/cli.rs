use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use glycemlp::bench::{parse_speedup_table, BenchReport, SPEEDUP_HEADER};
use glycemlp::dataset::parse_csv;
use glycemlp::trainer::CurveTable;
use glycemlp::{Network, TrainReport};

fn glycemlp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glycemlp"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth_into(dir: &Path, rows: &str, seed: &str) {
    let o = glycemlp(dir, &["synth", "--rows", rows, "--seed", seed, "--signal", "planted-linear", "--out", "data.csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn synth_output_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    synth_into(dir.path(), "120", "7");
    let records = parse_csv(fs::File::open(dir.path().join("data.csv")).unwrap()).unwrap();
    assert_eq!(records.len(), 120);
}

#[test]
fn train_male_full_length_parallel() {
    let dir = tempfile::tempdir().unwrap();
    synth_into(dir.path(), "120", "7");
    let o = glycemlp(
        dir.path(),
        &["train", "--input", "data.csv", "--sex", "male", "--epochs", "100000", "--backend", "parallel", "--out", "runs/"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let runs = dir.path().join("runs");
    let report = TrainReport::from_json(&fs::read_to_string(runs.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.meta.epochs, 100_000);
    assert_eq!(report.rows.last().unwrap().epoch, 100_000);
    let net = Network::load(runs.join("network.json")).unwrap();
    assert_eq!(net, report.network);
}

#[test]
fn artifacts_are_rereadable_and_bodies_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    synth_into(dir.path(), "60", "3");
    let args = |out: &'static str| {
        vec!["train", "--input", "data.csv", "--sex", "female", "--epochs", "300", "--checkpoints", "1,10,100,300", "--seed", "5", "--out", out]
    };
    for out in ["a", "b"] {
        let o = glycemlp(dir.path(), &args(out));
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let read = |p: &str| fs::read_to_string(dir.path().join(p)).unwrap();
    let (ra, rb) = (
        TrainReport::from_json(&read("a/report.json")).unwrap(),
        TrainReport::from_json(&read("b/report.json")).unwrap(),
    );
    assert_eq!(ra.body_json().unwrap(), rb.body_json().unwrap());
    assert_eq!(read("a/network.json"), read("b/network.json"));

    let curve = CurveTable::from_csv(&read("a/curve.csv")).unwrap();
    assert_eq!(curve.rows.iter().map(|r| r.epoch).collect::<Vec<_>>(), vec![1, 10, 100, 300]);
    assert_eq!(curve.to_csv(), read("a/curve.csv"));

    let net = Network::load(dir.path().join("a/network.json")).unwrap();
    assert_eq!(net.to_checkpoint_json().unwrap() + "\n", read("a/network.json"));

    let o = glycemlp(dir.path(), &["eval", "--input", "data.csv", "--sex", "female", "--seed", "5", "--network", "a/network.json", "--out", "a"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let eval: serde_json::Value = serde_json::from_str(&read("a/eval.json")).unwrap();
    let last = ra.final_row().unwrap();
    assert_eq!(eval["train"]["correct"], last.train.correct);
    assert_eq!(eval["test"]["correct"], last.test.correct);
}

#[test]
fn pooled_sexes_are_flagged() {
    let dir = tempfile::tempdir().unwrap();
    synth_into(dir.path(), "40", "1");
    let o = glycemlp(dir.path(), &["sweep", "--input", "data.csv", "--sex", "all", "--epochs", "20", "--out", "s"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.starts_with("epoch,train_accuracy,test_accuracy"));
    let report = TrainReport::from_json(&fs::read_to_string(dir.path().join("s/report.json")).unwrap()).unwrap();
    assert!(report.meta.deviations.iter().any(|d| d == "pooled-sexes"));
    assert_eq!(report.meta.train_rows + report.meta.test_rows, 40);
}

#[test]
fn negative_learning_rate_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    synth_into(dir.path(), "20", "0");
    let o = glycemlp(dir.path(), &["train", "--input", "data.csv", "--learning-rate", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("learning-rate"), "{}", stderr(&o));
    assert!(!dir.path().join("runs").exists());
}

#[test]
fn usage_errors_exit_2_with_distinct_messages() {
    let dir = tempfile::tempdir().unwrap();
    synth_into(dir.path(), "20", "0");

    let unknown = glycemlp(dir.path(), &["train", "--input", "data.csv", "--bogus"]);
    let missing = glycemlp(dir.path(), &["train", "--input", "absent.csv"]);
    let text = fs::read_to_string(dir.path().join("data.csv")).unwrap();
    fs::write(dir.path().join("bad.csv"), text.replace("hba1c_pct", "hba1c")).unwrap();
    let schema = glycemlp(dir.path(), &["train", "--input", "bad.csv"]);
    let split = glycemlp(dir.path(), &["train", "--input", "data.csv", "--split", "1.5"]);
    let zero = glycemlp(dir.path(), &["train", "--input", "data.csv", "--epochs", "0"]);

    let outs = [&unknown, &missing, &schema, &split, &zero];
    for o in outs {
        assert_eq!(o.status.code(), Some(2), "{}", stderr(o));
    }
    assert!(stderr(&unknown).contains("--bogus"));
    assert!(stderr(&missing).contains("not found"));
    assert!(stderr(&schema).contains("hba1c_pct"));
    assert!(stderr(&split).contains("--split"));
    assert!(stderr(&zero).contains("--epochs"));
    let messages: std::collections::HashSet<String> = outs.iter().map(|o| stderr(o)).collect();
    assert_eq!(messages.len(), outs.len());
}

#[test]
fn help_shows_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let o = glycemlp(dir.path(), &["train", "--help"]);
    assert_eq!(o.status.code(), Some(0));
    let help = String::from_utf8(o.stdout).unwrap();
    for needle in [
        "[default: 100000]",
        "[default: 0.1]",
        "[default: 0.75]",
        "[default: male]",
        "[default: number of input features]",
        "[default: 1,10,100,",
        "[default: sequential]",
    ] {
        assert!(help.contains(needle), "missing {needle}\n{help}");
    }
}

#[test]
fn bench_writes_readable_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = glycemlp(
        dir.path(),
        &["bench", "--rows", "30", "--columns", "6", "--hidden-dim", "8", "--epochs-grid", "5,10", "--repetitions", "2", "--workers", "2", "--out", "b"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("reference GPU figure: 50x"), "{stdout}");
    let csv = fs::read_to_string(dir.path().join("b/bench.csv")).unwrap();
    assert!(csv.starts_with(SPEEDUP_HEADER));
    let rows = parse_speedup_table(&csv).unwrap();
    assert_eq!(rows.iter().map(|r| r.epochs).collect::<Vec<_>>(), vec![5, 10]);
    let report = BenchReport::from_json(&fs::read_to_string(dir.path().join("b/bench.json")).unwrap()).unwrap();
    assert_eq!(report.cells.len(), 4);
    assert_eq!(report.environment.workers, vec![1, 2]);
    for (r, s) in rows.iter().zip(&report.speedups) {
        assert_eq!(r.speedup, s.speedup);
    }

    let bad = glycemlp(dir.path(), &["bench", "--epochs-grid", "10,5", "--out", "c"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("--epochs-grid"));
}
