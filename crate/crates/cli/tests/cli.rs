use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hob2srnn"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_SPEC: &str = "levels = [2, 4, 8]\nsegments = 80\nsegments_per_group = 4\nradar_dates = 6\noptical_dates = 7\nseed = 5\n";

fn synth(dir: &Path) -> String {
    fs::write(dir.join("spec.in.toml"), SMALL_SPEC).unwrap();
    let out_dir = dir.join("data");
    let o = run(&[
        "synth",
        "--spec",
        dir.join("spec.in.toml").to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    out_dir.join("dataset.csv").to_str().unwrap().to_string()
}

const FAST: [&str; 10] = [
    "--epochs",
    "2",
    "--hidden-units",
    "6",
    "--fc1-units",
    "3",
    "--fc2-units",
    "4",
    "--batch-size",
    "16",
];

fn train(dir: &Path, dataset: &str, extra: &[&str]) -> std::path::PathBuf {
    let runs = dir.join("runs");
    let mut args = vec!["train", "--dataset", dataset, "--out", runs.to_str().unwrap()];
    args.extend(FAST);
    args.extend(extra);
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let line = stdout(&o).lines().find(|l| l.starts_with("run_dir")).unwrap().to_string();
    let path = line.split('"').nth(1).unwrap().to_string();
    path.into()
}

#[test]
fn synth_is_reproducible_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(&["synth", "--out", dir.path().join("a").to_str().unwrap(), "--seed", "3"]);
    let b = run(&["synth", "--out", dir.path().join("b").to_str().unwrap(), "--seed", "3"]);
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).contains("segments = 500"));
    let header = fs::read_to_string(dir.path().join("a/header.toml")).unwrap();
    let header = hob2srnn::data::DatasetHeader::parse(&header).unwrap();
    assert_eq!(header.values_per_row(), 16 * 2 + 19 * 5);
    let h = fs::read_to_string(dir.path().join("a/hierarchy.txt")).unwrap();
    let h = hob2srnn::hierarchy::ClassHierarchy::load(&h).unwrap();
    assert_eq!(h.class_counts(), vec![2, 4, 8]);
}

#[test]
fn bad_spec_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.toml");
    fs::write(&spec, "levels = [3, 1]\n").unwrap();
    let o = run(&["synth", "--spec", spec.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["synth"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_hierarchy_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth(dir.path());
    let o = run(&["train", "--dataset", &ds, "--hierarchy", "/nonexistent/h.txt", "--epochs", "1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("hierarchy not found"), "{}", stderr(&o));
}

#[test]
fn train_eval_attention_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth(dir.path());
    let run_dir = train(dir.path(), &ds, &["--seed", "4"]);
    for f in ["manifest.toml", "checkpoint.txt", "epoch_log.csv", "split.csv", "metrics.toml"] {
        assert!(run_dir.join(f).exists(), "{f}");
    }
    assert!(run_dir.file_name().unwrap().to_str().unwrap().starts_with("run-4-"));
    let manifest = fs::read_to_string(run_dir.join("manifest.toml")).unwrap();
    assert!(manifest.contains("dataset_digest") && manifest.contains("seed = 4"));
    let log = fs::read_to_string(run_dir.join("epoch_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 1 + 3 * 2);

    let ck = run_dir.join("checkpoint.txt");
    let split = run_dir.join("split.csv");
    let metrics_file = dir.path().join("eval.toml");
    let o = run(&[
        "eval",
        "--checkpoint",
        ck.to_str().unwrap(),
        "--dataset",
        &ds,
        "--split",
        split.to_str().unwrap(),
        "--out",
        metrics_file.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let printed = stdout(&o);
    assert_eq!(printed, fs::read_to_string(&metrics_file).unwrap());
    assert_eq!(printed, fs::read_to_string(run_dir.join("metrics.toml")).unwrap());
    assert!(printed.contains("kappa") && printed.contains("weighted_f1") && printed.contains("accuracy"));

    let att = dir.path().join("att");
    let o = run(&[
        "attention",
        "--checkpoint",
        ck.to_str().unwrap(),
        "--dataset",
        &ds,
        "--out",
        att.to_str().unwrap(),
        "--class",
        "L2-C3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let fused = fs::read_to_string(att.join("fused.csv")).unwrap();
    let mut lines = fused.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), 3 + 6 + 7);
    let rows: Vec<&str> = lines.collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.split(',').nth(1) == Some("L2-C3")));

    let o = run(&[
        "attention",
        "--checkpoint",
        ck.to_str().unwrap(),
        "--dataset",
        &ds,
        "--out",
        att.to_str().unwrap(),
        "--class",
        "Nope",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn training_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth(dir.path());
    let a = train(&dir.path().join("x"), &ds, &["--seed", "9"]);
    let b = train(&dir.path().join("y"), &ds, &["--seed", "9"]);
    for f in ["checkpoint.txt", "epoch_log.csv", "split.csv", "metrics.toml"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth(dir.path());
    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, "seed = 11\nablation = \"noHierPre\"\nsources = \"radar\"\n").unwrap();
    let run_dir = train(dir.path(), &ds, &["--config", cfg.to_str().unwrap(), "--seed", "12"]);
    let manifest = fs::read_to_string(run_dir.join("manifest.toml")).unwrap();
    assert!(manifest.contains("seed = 12"));
    assert!(manifest.contains("ablation = \"noHierPre\""));
    let log = fs::read_to_string(run_dir.join("epoch_log.csv")).unwrap();
    assert!(log.lines().skip(1).all(|l| l.starts_with("2,")));
    let ck = fs::read_to_string(run_dir.join("checkpoint.txt")).unwrap();
    assert!(ck.contains("sources radar"));
}

#[test]
fn eval_rejects_mismatched_channels() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth(dir.path());
    let run_dir = train(dir.path(), &ds, &["--ablate", "noNDVI"]);
    let ck = run_dir.join("checkpoint.txt");
    let o = run(&["eval", "--checkpoint", ck.to_str().unwrap(), "--dataset", &ds, "--partition", "all"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("channels"));
    let o = run(&[
        "eval",
        "--checkpoint",
        ck.to_str().unwrap(),
        "--dataset",
        &ds,
        "--partition",
        "all",
        "--drop-ndvi",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn split_and_ablate_commands() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth(dir.path());
    let split = dir.path().join("split.csv");
    let o = run(&["split", "--dataset", &ds, "--seed", "2", "--out", split.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(&split).unwrap().lines().count(), 80);

    let mut args = vec!["ablate", "--dataset", &ds, "--splits", "1", "--variants", "full,noAtt,radar"];
    args.extend(FAST);
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    for v in ["[full]", "[noAtt]", "[radar]"] {
        assert!(text.contains(v), "{text}");
    }
    let o = run(&["ablate", "--dataset", &ds, "--variants", "bogus"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["train", "--dataset", &ds, "--ablate", "bogus"]);
    assert_eq!(o.status.code(), Some(2));
}
