use std::path::Path;
use std::process::{Command, Output};

use gwtheta_core::harness::scenario;
use gwtheta_core::step_pgf;

fn gwtheta(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gwtheta"))
        .args(args)
        .env_remove("GWTHETA_WORKERS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "{e}: {}\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

/// `f_1(f_2(...f_n(s)))` evaluated from the inside out.
fn iterated(id: &str, sigma: f64, n: u64, s: f64) -> f64 {
    let ov = [("sigma".to_string(), sigma)].into_iter().collect();
    let m = scenario(id, &ov).unwrap().model;
    (1..=n).rev().fold(s, |x, k| step_pgf(&m, k, x).unwrap())
}

#[test]
fn analyze_matches_iterated_composition() {
    let out = gwtheta(&[
        "analyze",
        "--scenario",
        "Ex1",
        "--theta",
        "1",
        "--sigma",
        "1",
        "--n",
        "100",
    ]);
    assert!(out.status.success());
    let row = &json(&out)[0];
    assert_eq!(row["n"], 100);
    let c = row["C_n"].as_f64().unwrap();
    assert!((c - 100.0 / 101.0).abs() < 1e-12, "{c}");
    let f0 = row["F_n(0)"].as_f64().unwrap();
    assert!((f0 - iterated("Ex1", 1.0, 100, 0.0)).abs() < 1e-12);
    assert!(f0.abs() < 1e-12);

    let out = gwtheta(&[
        "analyze",
        "--scenario",
        "Ex1",
        "--sigma",
        "2",
        "--n",
        "7,100",
    ]);
    let rows = json(&out);
    for (row, n) in rows.as_array().unwrap().iter().zip([7, 100]) {
        let f0 = row["F_n(0)"].as_f64().unwrap();
        assert!((f0 - iterated("Ex1", 2.0, n, 0.0)).abs() < 1e-12, "n={n}");
    }
}

#[test]
fn analyze_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = path(dir.path(), "a.csv");
    let out = gwtheta(&[
        "analyze",
        "--scenario",
        "Ex9i",
        "--n",
        "1,2,3",
        "--csv-out",
        &csv,
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("n,A_n,C_n,D_n,B_n,F_n(0),F_n(1)"));
    assert!(lines[3].starts_with("3,"));
}

#[test]
fn classify_example_three_is_critical() {
    let out = gwtheta(&["classify", "--scenario", "Ex3"]);
    assert!(out.status.success());
    assert_eq!(json(&out)["regime"], "critical");
}

#[test]
fn classify_defective_sub_label() {
    let out = gwtheta(&["classify", "--scenario", "Ex8ii"]);
    let v = json(&out);
    assert_eq!(v["regime"], "defective");
    assert_eq!(v["sub_label"], "ii");
}

#[test]
fn model_json_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let first = path(dir.path(), "m1.json");
    let second = path(dir.path(), "m2.json");
    let out = gwtheta(&["classify", "--scenario", "Ex7i", "--model-out", &first]);
    assert!(out.status.success());
    let before = std::fs::read(&first).unwrap();
    let out = gwtheta(&["classify", "--model", &first, "--model-out", &second]);
    assert!(out.status.success());
    assert_eq!(
        std::fs::read(&first).unwrap(),
        before,
        "input left untouched"
    );
    assert_eq!(std::fs::read(&second).unwrap(), before);
    assert_eq!(json(&out)["regime"], "defective");
}

#[test]
fn invalid_parameters_exit_two() {
    let out = gwtheta(&["analyze", "--scenario", "Ex1", "--theta", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("theta must lie in (0, 1]"), "{err}");

    let out = gwtheta(&["classify", "--scenario", "Ex11"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown scenario"));

    let out = gwtheta(&["simulate", "--scenario", "Ex1"]);
    assert_eq!(out.status.code(), Some(2), "missing --horizon");

    let dir = tempfile::tempdir().unwrap();
    let bad = path(dir.path(), "bad.json");
    std::fs::write(
        &bad,
        r#"{"theta": 0, "r": 2, "a": {"family": "constant", "params": {"value": 0.5}},
            "c": {"family": "constant", "params": {"value": 1.5}}}"#,
    )
    .unwrap();
    let out = gwtheta(&["classify", "--model", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rejected"));
}

#[test]
fn simulate_is_seeded_and_worker_invariant() {
    let run = |workers: &str| {
        Command::new(env!("CARGO_BIN_EXE_gwtheta"))
            .args([
                "simulate",
                "--scenario",
                "Ex8i",
                "--horizon",
                "30",
                "--replicates",
                "9000",
                "--seed",
                "11",
            ])
            .env("GWTHETA_WORKERS", workers)
            .output()
            .unwrap()
    };
    let a = run("1");
    let b = run("3");
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["replicates"], 9000);
    assert_eq!(v["base_seed"], 11);
}

#[test]
fn simulate_logs_a_fresh_seed() {
    let dir = tempfile::tempdir().unwrap();
    let traj = path(dir.path(), "t.csv");
    let out = gwtheta(&[
        "simulate",
        "--scenario",
        "Ex2",
        "--horizon",
        "10",
        "--replicates",
        "100",
        "--mode",
        "generational",
        "--trajectory-out",
        &traj,
    ]);
    assert!(out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    let logged: u64 = err
        .lines()
        .find_map(|l| l.strip_prefix("seed: "))
        .expect("seed logged")
        .parse()
        .unwrap();
    assert_eq!(json(&out)["base_seed"], logged);
    let rows = std::fs::read_to_string(&traj).unwrap();
    assert_eq!(rows.lines().count(), 12);
    assert!(rows.starts_with("generation,state\n0,1\n"));
}

#[test]
fn pmf_mass_adds_up() {
    let out = gwtheta(&["pmf", "--scenario", "Ex7i", "--n", "5"]);
    assert!(out.status.success());
    let v = json(&out);
    let weights: f64 = v["weights"]
        .as_array()
        .unwrap()
        .iter()
        .map(|w| w.as_f64().unwrap())
        .sum();
    let total = weights + v["tail_mass"].as_f64().unwrap() + v["defect_mass"].as_f64().unwrap();
    assert!((total - 1.0).abs() < 1e-10, "{total}");

    let out = gwtheta(&["pmf", "--scenario", "Ex7i", "--n", "0", "--offspring"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (path(dir.path(), "a.json"), path(dir.path(), "b.json"));
    let csv = path(dir.path(), "plot.csv");
    for file in [&a, &b] {
        let out = gwtheta(&[
            "verify",
            "--scenario",
            "Ex9i",
            "--seed",
            "7",
            "--json-out",
            file,
            "--csv-out",
            &csv,
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let summary = String::from_utf8_lossy(&out.stdout);
        assert!(summary
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("Ex9i,T9i,true,"));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let plot = std::fs::read_to_string(&csv).unwrap();
    assert!(plot.starts_with("scenario,check,x,empirical,theoretical\n"));
    assert!(plot.lines().skip(1).all(|l| l.starts_with("Ex9i,")));
}

#[test]
fn verify_failure_exits_one() {
    // two generations are far from the limit: the finite-n bias check fails
    let out = gwtheta(&[
        "verify",
        "--scenario",
        "Ex6i",
        "--horizon",
        "2",
        "--replicates",
        "2000",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL"));
}

#[test]
fn verify_overrides_need_one_scenario() {
    let out = gwtheta(&["verify", "--sigma", "2"]);
    assert_eq!(out.status.code(), Some(2));
}
