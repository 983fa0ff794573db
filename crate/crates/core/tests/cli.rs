use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mhpinn::training::TrainConfig;

fn mhpinn(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mhpinn"))
        .args(args)
        .current_dir(cwd)
        .env("MHPINN_THREADS", "1")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const TINY: &str = "epochs = 20\ndepth = 2\nwidth = 6\nn_b = 3\nn_x = 6\nn_t = 5\nn_nu = 2\nwarmup_epochs = 4\ncheckpoint_every = 10\nics_path = \"ics.json\"\n";

#[test]
fn help_lists_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let o = mhpinn(&["--help"], dir.path());
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for sub in ["gen-ics", "train", "pca", "reference", "eval"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn unknown_flag_is_a_one_line_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = mhpinn(&["pca", "--checkpoint", "c.json", "--points", "10", "--frobnicate"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error[usage]:") && err.contains("--frobnicate"), "{err}");
}

#[test]
fn unknown_subcommand_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let o = mhpinn(&["fit"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("fit"));
}

#[test]
fn missing_checkpoint_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let o = mhpinn(&["eval", "--checkpoint", "nope/checkpoint.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error[io]:") && err.contains("nope/checkpoint.json"), "{err}");
}

#[test]
fn invalid_config_value_is_named() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "n_x = 1\n").unwrap();
    let o = mhpinn(&["train", "--config", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.starts_with("error[invalid-config]:") && err.contains("n_x"), "{err}");

    fs::write(dir.path().join("typo.toml"), "widht = 4\n").unwrap();
    let o = mhpinn(&["train", "--config", "typo.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("widht"), "{}", stderr(&o));
}

#[test]
fn bad_thread_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_mhpinn"))
        .args(["gen-ics", "--n-ics", "1"])
        .current_dir(dir.path())
        .env("MHPINN_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("MHPINN_THREADS"));
}

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("tiny.toml"), TINY).unwrap();

    let o = mhpinn(&["gen-ics", "--n-ics", "2", "--seed", "3", "--out", "ics.json"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    let ics = mhpinn::sampling::load_ic_set(&d.join("ics.json")).unwrap();
    assert_eq!(ics.len(), 2);

    let o = mhpinn(&["train", "--config", "tiny.toml", "--deterministic", "--out-dir", "run"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    let curve = fs::read_to_string(d.join("run/loss_curve.csv")).unwrap();
    assert!(curve.starts_with("epoch,total,pde,ortho,lr,wall_ms\n"));
    assert_eq!(curve.lines().count(), 21);
    assert!(d.join("run/checkpoint.json").exists());

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("run/manifest_train.json")).unwrap()).unwrap();
    let mut cfg = TrainConfig::load(&d.join("tiny.toml")).unwrap();
    cfg.deterministic = true;
    cfg.out_dir = Some("run".into());
    assert_eq!(manifest["config_hash"], cfg.hash());
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 3);

    let o = mhpinn(&["pca", "--checkpoint", "run/checkpoint.json", "--points", "200"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    let spectrum = fs::read_to_string(d.join("run/spectrum.csv")).unwrap();
    assert!(spectrum.starts_with("component,eigenvalue,explained_ratio,cumulative\n"));
    assert_eq!(spectrum.lines().count(), 4);

    let o = mhpinn(&["pca", "--checkpoint", "run/checkpoint.json", "--points", "200", "--mixed", "--out", "mixed.csv"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(d.join("mixed.csv")).unwrap().lines().count(), 3);

    let o = mhpinn(
        &["reference", "--ic", "ics.json", "--index", "1", "--nu", "0.2", "--nx", "33", "--t-final", "0.5", "--snapshots", "2", "--out", "ref.csv"],
        d,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(d.join("ref.csv")).unwrap();
    assert!(csv.starts_with("t,x,u\n"));
    assert_eq!(csv.lines().count(), 1 + 3 * 33);

    let o = mhpinn(
        &["eval", "--checkpoint", "run/checkpoint.json", "--nx", "33", "--snapshots", "5", "--t-final", "1", "--nu", "0.1,0.5"],
        d,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let eval: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("run/eval.json")).unwrap()).unwrap();
    assert_eq!(eval["entries"].as_array().unwrap().len(), 4);
    assert!(eval["median_rel_l2"].as_f64().unwrap().is_finite());
    assert!(d.join("run/manifest_eval.json").exists());
}

#[test]
fn resume_continues_the_curve() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("tiny.toml"), TINY.replace("ics_path = \"ics.json\"\n", "n_ics = 2\n")).unwrap();
    assert!(mhpinn(&["train", "--config", "tiny.toml", "--deterministic", "--out-dir", "full"], d).status.success());

    fs::write(d.join("half.toml"), TINY.replace("ics_path = \"ics.json\"\n", "n_ics = 2\n").replace("epochs = 20", "epochs = 10")).unwrap();
    assert!(mhpinn(&["train", "--config", "half.toml", "--deterministic", "--out-dir", "split"], d).status.success());
    let o = mhpinn(
        &["train", "--config", "tiny.toml", "--deterministic", "--out-dir", "split", "--resume", "split/checkpoint.json"],
        d,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read_to_string(d.join("full/loss_curve.csv")).unwrap(),
        fs::read_to_string(d.join("split/loss_curve.csv")).unwrap()
    );
}
