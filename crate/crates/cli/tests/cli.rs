use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sparsedag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparsedag"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(bytes: &[u8]) -> serde_json::Value {
    serde_json::from_slice(bytes).expect("valid JSON")
}

#[test]
fn constants_report_c1() {
    let out = sparsedag(&[
        "constants",
        "--sigma0",
        "1",
        "--lambda-min",
        "1",
        "--p",
        "10",
        "--s0",
        "10",
        "--n",
        "1000",
    ]);
    assert!(out.status.success());
    let v = json(&out.stdout);
    assert_eq!(v["c1"], 96.0);
    assert_eq!(v["c2"], 3840.0);
    assert_eq!(v["c"], 38976.0);
}

#[test]
fn fit_without_data_is_a_usage_error() {
    let out = sparsedag(&["fit", "--lambda2", "0.1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = sparsedag(&["constants", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_cleanly() {
    assert_eq!(sparsedag(&["--help"]).status.code(), Some(0));
}

#[test]
fn indefinite_covariance_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    fs::write(&path, "1,2\n2,1\n").unwrap();
    let out = sparsedag(&[
        "represent",
        "--sigma",
        path.to_str().unwrap(),
        "--pi",
        "1,2",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_then_fit_and_represent() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let sim_s = sim.to_str().unwrap();
    let out = sparsedag(&[
        "simulate", "--kind", "ar1", "--p", "4", "--beta0", "0.6", "--n", "300", "--seed", "2",
        "--out", sim_s,
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in [
        "model.json",
        "data.csv",
        "sigma0.csv",
        "config.json",
        "manifest.json",
    ] {
        assert!(sim.join(f).exists(), "{f}");
    }
    assert_eq!(
        json(&fs::read(sim.join("manifest.json")).unwrap())["seed"],
        2
    );

    let fit_path = dir.path().join("fit.json");
    let data = sim.join("data.csv");
    let out = sparsedag(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--lambda2",
        "0.04",
        "--mode",
        "equalvar",
        "--out",
        fit_path.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let fit = json(&fs::read(&fit_path).unwrap());
    assert_eq!(fit["method"], "exact");
    assert_eq!(fit["s_hat"], 3);
    assert!(dir.path().join("fit.json.manifest.json").exists());

    let sigma0 = sim.join("sigma0.csv");
    let out = sparsedag(&[
        "represent",
        "--sigma",
        sigma0.to_str().unwrap(),
        "--pi",
        "4,3,2,1",
    ]);
    assert!(out.status.success());
    assert_eq!(json(&out.stdout)["edge_profile"]["total"], 3);
}

fn run_experiment(config: &Path, out: &Path, threads: &str) -> Vec<u8> {
    let o = sparsedag(&[
        "experiment",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--threads",
        threads,
        "--gnuplot",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    fs::read(out.join("records.csv")).unwrap()
}

#[test]
fn experiment_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("rate.json");
    fs::write(
        &config,
        r#"{"kind": "rate", "p": 5, "s0": null, "beta0": 0.5, "n_grid": [100, 400],
            "lambda2_rule": {"type": "c_logp_over_n", "c": 2.0},
            "mode": "profile", "method": "exact", "reps": 4, "seed": 11}"#,
    )
    .unwrap();
    let a = run_experiment(&config, &dir.path().join("a"), "1");
    let b = run_experiment(&config, &dir.path().join("b"), "3");
    assert_eq!(a, b);
    assert!(String::from_utf8_lossy(&a).starts_with("rep,n,p,s0,lambda2,s_hat,frob_err"));
    assert_eq!(
        fs::read(dir.path().join("a/manifest.json")).unwrap(),
        fs::read(dir.path().join("b/manifest.json")).unwrap()
    );
    assert!(dir.path().join("a/error_vs_n.dat").exists());
}

#[test]
fn experiment_rejects_unknown_config_fields() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    fs::write(&config, r#"{"kind": "rate", "p": 5, "typo": 1}"#).unwrap();
    let o = sparsedag(&[
        "experiment",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}
