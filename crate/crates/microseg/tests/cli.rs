use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use microseg::io::{file_sha256, load_dataset, load_model, load_trajectories};
use microseg::manifest::manifest_path;
use microseg_core::nn::param_count;

fn microseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_microseg"))
        .args(args)
        .env_remove("MICROSEG_SEED")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = microseg(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

#[test]
fn gen_is_deterministic_and_writes_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (p(dir.path(), "a.jsonl"), p(dir.path(), "b.jsonl"));
    ok(&["gen", "--customers", "100", "--seed", "7", "--out", &a]);
    ok(&["gen", "--customers", "100", "--seed", "7", "--out", &b]);
    assert_eq!(file_sha256(Path::new(&a)).unwrap(), file_sha256(Path::new(&b)).unwrap());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(manifest_path(Path::new(&a))).unwrap()).unwrap();
    assert_eq!(manifest["command"], "gen");
    assert_eq!(manifest["master_seed"], 7);
    assert_eq!(manifest["outputs"][0]["sha256"], file_sha256(Path::new(&a)).unwrap().as_str());
}

#[test]
fn gen_defaults_give_the_documented_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path(), "d.jsonl");
    ok(&["gen", "--out", &out]);
    let cube = load_dataset(Path::new(&out)).unwrap();
    assert_eq!((cube.n_customers(), cube.n_years(), cube.n_categories()), (2000, 6, 12));
}

#[test]
fn seed_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (p(dir.path(), "a.jsonl"), p(dir.path(), "b.jsonl"));
    let status = Command::new(env!("CARGO_BIN_EXE_microseg"))
        .args(["gen", "--customers", "20", "--out", &a])
        .env("MICROSEG_SEED", "7")
        .status()
        .unwrap();
    assert!(status.success());
    ok(&["gen", "--customers", "20", "--seed", "7", "--out", &b]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn zero_customers_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = microseg(&["gen", "--customers", "0", "--out", &p(dir.path(), "d.jsonl")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_customers must be >= 1"));
    assert!(!dir.path().join("d.jsonl").exists());
}

#[test]
fn exit_codes_follow_the_taxonomy() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(microseg(&["gen", "--no-such-flag"]).status.code(), Some(2));
    let missing = microseg(&["score", "--data", &p(dir.path(), "missing.jsonl"), "--out", &p(dir.path(), "x")]);
    assert_eq!(missing.status.code(), Some(1));

    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, "{\"customer_id\": \"a\", \"income\": [1, 2]}\n").unwrap();
    let schema = microseg(&["score", "--data", bad.to_str().unwrap(), "--out", &p(dir.path(), "x")]);
    assert_eq!(schema.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&schema.stderr).contains(":1:"));

    let coeffs = dir.path().join("c.csv");
    fs::write(
        &coeffs,
        "category,openness,conscientiousness,extraversion,agreeableness,neuroticism\nbooks,-0.1,0.0,-4,0.0,0.0\nx,1,0,0,0,0\n",
    )
    .unwrap();
    let data = p(dir.path(), "d.jsonl");
    ok(&["gen", "--customers", "10", "--out", &data]);
    let invalid = microseg(&["score", "--data", &data, "--coeffs", coeffs.to_str().unwrap(), "--out", &p(dir.path(), "x")]);
    assert_eq!(invalid.status.code(), Some(3));
}

#[test]
fn diverging_training_exits_with_the_numeric_code() {
    let dir = tempfile::tempdir().unwrap();
    let data = p(dir.path(), "d.jsonl");
    ok(&["gen", "--customers", "60", "--out", &data]);
    let out = microseg(&[
        "train", "--arch", "ff-pred", "--data", &data, "--learning-rate", "1e300", "--epochs", "5", "--out",
        &p(dir.path(), "m.json"),
    ]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn inputs_are_never_modified() {
    let dir = tempfile::tempdir().unwrap();
    let data = p(dir.path(), "d.jsonl");
    ok(&["gen", "--customers", "50", "--out", &data]);
    let before = fs::read(&data).unwrap();
    ok(&["score", "--data", &data, "--out", &p(dir.path(), "p.jsonl")]);
    ok(&["train", "--arch", "ff-ae", "--data", &data, "--epochs", "2", "--out", &p(dir.path(), "m.json")]);
    assert_eq!(fs::read(&data).unwrap(), before);
}

#[test]
fn every_architecture_trains_and_matches_its_parameter_count() {
    let dir = tempfile::tempdir().unwrap();
    let data = p(dir.path(), "d.jsonl");
    let coeffs = p(dir.path(), "c.csv");
    ok(&["gen", "--customers", "80", "--out", &data, "--write-coeffs", &coeffs]);
    for arch in ["ff-ae", "ff-pred", "rnn-ae", "rnn-pred"] {
        let out = p(dir.path(), &format!("{arch}.json"));
        ok(&["train", "--arch", arch, "--data", &data, "--coeffs", &coeffs, "--epochs", "3", "--out", &out]);
        let model = load_model(Path::new(&out)).unwrap();
        assert_eq!(model.weights.len(), param_count(model.layers()), "{arch}");
        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(format!("{arch}.report.json"))).unwrap()).unwrap();
        assert!(report["train_loss_curve"].as_array().unwrap().len() <= 3);
    }
    let rnn = load_model(&dir.path().join("rnn-pred.json")).unwrap();
    assert_eq!(rnn.weights.len(), 212);
}

#[test]
fn sweep_writes_a_loss_table_and_a_choice() {
    let dir = tempfile::tempdir().unwrap();
    let data = p(dir.path(), "d.jsonl");
    let out = p(dir.path(), "sweep.json");
    ok(&["gen", "--customers", "120", "--out", &data]);
    ok(&["sweep", "--data", &data, "--h", "1..3", "--runs", "2", "--epochs", "5", "--out", &out]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let table = v["table"].as_array().unwrap();
    assert_eq!(table.len(), 3);
    assert!(table.iter().all(|r| r["val_losses"].as_array().unwrap().len() == 2));
    assert!((1..=3).contains(&v["chosen_hidden"].as_u64().unwrap()));
}

#[test]
fn benchmark_reports_one_pair_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = p(dir.path(), "d.jsonl");
    let out = p(dir.path(), "bench.json");
    ok(&["gen", "--customers", "300", "--out", &data]);
    ok(&[
        "benchmark", "--task", "default-rate", "--data", &data, "--train-size", "100", "--runs", "20",
        "--validation-size", "150", "--epochs", "20", "--out", &out,
    ]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["task"], "default_rate");
    let runs = v["per_run"].as_array().unwrap();
    assert_eq!(runs.len(), 20);
    assert!(runs.iter().all(|r| r["transfer_mse"].is_f64() && r["random_mse"].is_f64() && r["seed"].is_u64()));
    assert_eq!(v["arms"]["transfer"]["trainable_weights"], 4);
    assert_eq!(v["arms"]["random"]["trainable_weights"], v["arms"]["random"]["total_weights"]);
}

#[test]
fn scripted_pipeline_runs_on_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let f = |n: &str| -> PathBuf { dir.path().join(n) };
    let s = |n: &str| f(n).display().to_string();
    ok(&["gen", "--customers", "300", "--out", &s("d.jsonl")]);
    ok(&["score", "--data", &s("d.jsonl"), "--out", &s("p.jsonl")]);
    ok(&["train", "--arch", "rnn-pred", "--data", &s("d.jsonl"), "--out", &s("m.json")]);
    ok(&["extract", "--model", &s("m.json"), "--data", &s("d.jsonl"), "--out", &s("t.jsonl")]);
    ok(&["segment", "--trajectories", &s("t.jsonl"), "--out", &s("seg.json")]);
    ok(&["plot", "--trajectories", &s("t.jsonl"), "--out", &s("plot.svg")]);
    ok(&[
        "benchmark", "--task", "liquidity", "--data", &s("d.jsonl"), "--model", &s("m.json"), "--validation-size",
        "100", "--runs", "3", "--out", &s("b.json"),
    ]);
    for name in ["d.jsonl", "p.jsonl", "m.json", "t.jsonl", "seg.json", "plot.svg", "b.json"] {
        assert!(manifest_path(&f(name)).exists(), "{name} has no manifest");
    }
    let personalities = fs::read_to_string(f("p.jsonl")).unwrap();
    assert_eq!(personalities.lines().count(), 300 * 7);
    let trajectories = load_trajectories(&f("t.jsonl")).unwrap();
    assert_eq!(trajectories.len(), 300);
    assert!(trajectories.iter().all(|t| t.states.len() == 6 && t.states[0].len() == 3));
    let seg: serde_json::Value = serde_json::from_str(&fs::read_to_string(f("seg.json")).unwrap()).unwrap();
    assert_eq!(seg["tree"]["members"].as_array().unwrap().len(), 300);
    assert!(seg["tree"]["trait"].is_null());
}

#[test]
fn extracting_with_a_feed_forward_model_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = p(dir.path(), "d.jsonl");
    let model = p(dir.path(), "m.json");
    ok(&["gen", "--customers", "40", "--out", &data]);
    ok(&["train", "--arch", "ff-pred", "--data", &data, "--epochs", "1", "--out", &model]);
    let out = microseg(&["extract", "--model", &model, "--data", &data, "--out", &p(dir.path(), "t.jsonl")]);
    assert_eq!(out.status.code(), Some(2));
}
