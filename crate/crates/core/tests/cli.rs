use std::path::Path;
use std::process::{Command, Output};

use geomcmc::experiment::ExperimentConfig;

fn geomcmc(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geomcmc"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const BANANA: &str = r#"
n_iters = 40
burn_in = 10
seed = 3
output_dir = "run"

[[models]]
family = "banana"
n = 100
data_seed = 2024

[[samplers]]
method = "ermlmc"
epsilon = 0.1
steps = 5
"#;

#[test]
fn sample_writes_summary_samples_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "banana.toml", BANANA);
    let out = geomcmc(&["sample", &cfg, "--trace"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let run = dir.path().join("run");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("summary.json")).unwrap()).unwrap();
    for key in [
        "model",
        "method",
        "seed",
        "kept_iterations",
        "acceptance_rate",
        "seconds_per_iteration",
        "ess",
        "min_ess_per_second",
        "divergences",
        "fp_failures",
        "posterior_mean",
        "config",
    ] {
        assert!(summary.get(key).is_some(), "missing {key}");
    }
    assert_eq!(summary["kept_iterations"], 30);
    assert_eq!(summary["method"], "ermlmc");

    let samples = std::fs::read_to_string(run.join("samples.csv")).unwrap();
    let lines: Vec<&str> = samples.lines().collect();
    assert_eq!(lines[0], "theta1,theta2");
    assert_eq!(lines.len(), 31);

    let trace = std::fs::read_to_string(run.join("trace.csv")).unwrap();
    let rows: Vec<&str> = trace.lines().skip(1).collect();
    assert_eq!(rows.len(), 40 * 6);
    assert!(rows.iter().filter(|r| r.starts_with("7,")).count() == 6);
}

#[test]
fn summary_config_echo_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "banana.toml", BANANA);
    let out = geomcmc(&["sample", &cfg, "--seed", "17", "--out", "other"], dir.path());
    assert!(out.status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("other/summary.json")).unwrap())
            .unwrap();
    let echoed: ExperimentConfig = serde_json::from_value(summary["config"].clone()).unwrap();
    assert_eq!(echoed.seed, 17);
    let reparsed = ExperimentConfig::from_toml(&echoed.to_toml().unwrap()).unwrap();
    assert_eq!(reparsed, echoed);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write_config(
        dir.path(),
        "empty.toml",
        "n_iters = 10\nburn_in = 1\nseed = 0\noutput_dir = \"x\"\nmodels = []\nsamplers = []\n",
    );
    assert_eq!(geomcmc(&["benchmark", &empty], dir.path()).status.code(), Some(1));
    assert_eq!(geomcmc(&["sample", "missing.toml"], dir.path()).status.code(), Some(1));
    assert_eq!(geomcmc(&["frobnicate"], dir.path()).status.code(), Some(1));
    let bad = write_config(dir.path(), "bad.toml", &BANANA.replace("epsilon = 0.1", "epsilon = -1.0"));
    assert_eq!(geomcmc(&["sample", &bad], dir.path()).status.code(), Some(1));
    let data = write_config(
        dir.path(),
        "data.toml",
        &BANANA.replace("n = 100\ndata_seed = 2024", "data = \"nowhere.csv\""),
    );
    assert_eq!(geomcmc(&["sample", &data], dir.path()).status.code(), Some(1));
    std::fs::write(dir.path().join("nowhere.csv"), "y\n1.0\nnot-a-number\n").unwrap();
    assert_eq!(geomcmc(&["sample", &data], dir.path()).status.code(), Some(2));
}

#[test]
fn gen_data_is_deterministic_and_sized() {
    let dir = tempfile::tempdir().unwrap();
    for run in ["a", "b"] {
        let out = geomcmc(
            &["gen-data", "banana", "--n", "100", "--seed", "4", "--out", &format!("{run}/banana.csv")],
            dir.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(dir.path().join("a/banana.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/banana.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 101);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a/banana.json")).unwrap()).unwrap();
    assert_eq!(meta["rows"], 100);

    let out = geomcmc(&["gen-data", "gmm", "--n", "50", "--seed", "1", "--out", "g.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = geomcmc(
        &["gen-data", "gmm", "--recipe", "claw", "--n", "50", "--seed", "1", "--out", "g.csv"],
        dir.path(),
    );
    assert!(out.status.success());
}

#[test]
fn generated_data_feeds_a_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let out = geomcmc(
        &["gen-data", "logistic", "--n", "80", "--d", "2", "--seed", "2", "--out", "data/lr.csv"],
        dir.path(),
    );
    assert!(out.status.success());
    let cfg = write_config(
        dir.path(),
        "bench.toml",
        r#"
n_iters = 30
burn_in = 5
seed = 1
output_dir = "bench"

[[models]]
family = "logistic"
name = "lr"
data = "data/lr.csv"

[[samplers]]
method = "hmc"
epsilon = 0.05
steps = 5

[[samplers]]
method = "rmlmc"
epsilon = 0.2
steps = 3
"#,
    );
    let out = geomcmc(&["benchmark", &cfg, "--workers", "2"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("bench/benchmark.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let table = std::fs::read_to_string(dir.path().join("bench/benchmark.txt")).unwrap();
    assert!(table.contains("min(ESS)/s"));
    assert!(table.contains("RMLMC"));
}
