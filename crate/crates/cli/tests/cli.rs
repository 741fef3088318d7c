use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn idea_eval(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_idea-eval"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth(dir: &Path) {
    let o = idea_eval(&["synth", "--out", "data", "--papers", "40", "--hidden", "8"], dir);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.join("data/manifest.jsonl").exists());
    assert!(dir.join("data/sweep.toml").exists());
    assert_eq!(fs::read_dir(dir.join("data/reps")).unwrap().count(), 40);
}

const FAST: [&str; 4] = ["--epochs", "3", "--hidden-dim", "16"];

#[test]
fn synth_verify_validate_ok() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    let o = idea_eval(&["verify", "--reps-dir", "data/reps"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = idea_eval(&["validate", "--config", "data/sweep.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn sweep_writes_report_and_report_reemits() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    let mut args = vec![
        "sweep", "--config", "data/sweep.toml", "--out", "out", "--train-ratio", "0.3,0.5",
        "--seeds", "0,1", "--jobs", "2",
    ];
    args.extend(FAST);
    let o = idea_eval(&args, tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("best layer"));
    for f in [
        "grid.csv", "summary.csv", "metrics.csv", "bins.csv", "hist.csv", "domains.csv",
        "layers_0.3.svg", "layers_0.5.svg", "report.json",
    ] {
        assert!(tmp.path().join("out").join(f).exists(), "{f}");
    }
    let grid = fs::read_to_string(tmp.path().join("out/grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 1 + 2 * 4 * 2);
    assert!(grid.starts_with("ratio,layer,seed,rho,pvalue"));

    let o = idea_eval(&["report", "--input", "out", "--out", "again"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["grid.csv", "summary.csv", "hist.csv", "domains.csv", "layers_0.5.svg"] {
        assert_eq!(
            fs::read(tmp.path().join("out").join(f)).unwrap(),
            fs::read(tmp.path().join("again").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn sweep_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    for out in ["a", "b"] {
        let mut args = vec!["sweep", "--config", "data/sweep.toml", "--out", out];
        args.extend(FAST);
        let o = idea_eval(&args, tmp.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in ["grid.csv", "summary.csv", "metrics.csv", "bins.csv", "hist.csv", "domains.csv"] {
        assert_eq!(
            fs::read(tmp.path().join("a").join(f)).unwrap(),
            fs::read(tmp.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn split_writes_json() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    let o = idea_eval(
        &[
            "split", "--manifest", "data/manifest.jsonl", "--criterion", "overall_quality",
            "--train-ratio", "0.25", "--out", "split.json",
        ],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("split.json")).unwrap()).unwrap();
    assert_eq!(v["criterion"], "overall_quality");
    assert_eq!(v["ratio"], 0.25);
    assert_eq!(v["train_ids"].as_array().unwrap().len(), 10);
    assert_eq!(v["test_ids"].as_array().unwrap().len(), 30);
}

#[test]
fn train_saves_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    let mut args = vec![
        "train", "--manifest", "data/manifest.jsonl", "--reps-dir", "data/reps", "--criterion",
        "overall_quality", "--layers", "-2", "--out", "models/m.json",
    ];
    args.extend(FAST);
    let o = idea_eval(&args, tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("models/m.json")).unwrap()).unwrap();
    assert_eq!(v["format"], "idea-eval-model/1");
    assert_eq!(v["input_dim"], 8);
    assert_eq!(v["hidden_dim"], 16);
}

#[test]
fn missing_reps_exit_one_naming_id() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    fs::remove_file(tmp.path().join("data/reps/p0005.idrp")).unwrap();
    let o = idea_eval(&["validate", "--config", "data/sweep.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("p0005"), "{}", stderr(&o));
    let o = idea_eval(&["sweep", "--config", "data/sweep.toml", "--out", "x"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_strategy_labels_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    let o = idea_eval(
        &["validate", "--config", "data/sweep.toml", "--strategy", "section_last"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("section_last"), "{}", stderr(&o));
}

#[test]
fn corrupt_reps_fail_verify() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    let path = tmp.path().join("data/reps/p0001.idrp");
    let mut bytes = fs::read(&path).unwrap();
    bytes[0] = b'X';
    fs::write(&path, bytes).unwrap();
    let o = idea_eval(&["verify", "--reps-dir", "data/reps"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("p0001"));
}

#[test]
fn runtime_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let o = idea_eval(&["report", "--input", "nowhere", "--out", "x"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let o = idea_eval(&["split", "--manifest", "nope.jsonl", "--criterion", "c"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let o = idea_eval(&["sweep", "--manifest", "m.jsonl"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--reps-dir"));
}
