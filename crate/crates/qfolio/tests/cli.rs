//! Black-box tests of the command-line driver.

use std::path::Path;
use std::process::{Command, Output};

fn qfolio(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qfolio"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn gen_instances(dir: &Path, count: u64, name: &str) {
    let out = qfolio(
        dir,
        &[
            "gen", "--count", &count.to_string(), "--seed", "7", "-o", name,
        ],
    );
    assert!(out.status.success(), "gen failed: {out:?}");
}

#[test]
fn gen_is_deterministic_and_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    gen_instances(dir.path(), 3, "a.json");
    gen_instances(dir.path(), 3, "b.json");
    let a = std::fs::read(dir.path().join("a.json")).unwrap();
    let b = std::fs::read(dir.path().join("b.json")).unwrap();
    assert_eq!(a, b, "same flags must give byte-identical files");

    let manifest = read_json(&dir.path().join("a.manifest.json"));
    assert_eq!(manifest["command"], "gen");
    assert_eq!(manifest["config"]["count"], 3);
    assert_eq!(manifest["config"]["seed"], 7);

    let file = read_json(&dir.path().join("a.json"));
    assert_eq!(file["instances"].as_array().unwrap().len(), 3);
    // 3 assets x 3 slices -> 9 qubits per instance.
    assert_eq!(file["instances"][0]["ising"]["h"].as_array().unwrap().len(), 9);
}

#[test]
fn gen_count_zero_gives_empty_list() {
    let dir = tempfile::tempdir().unwrap();
    gen_instances(dir.path(), 0, "empty.json");
    let file = read_json(&dir.path().join("empty.json"));
    assert_eq!(file["instances"].as_array().unwrap().len(), 0);
}

#[test]
fn exact_prints_ground_state() {
    let dir = tempfile::tempdir().unwrap();
    gen_instances(dir.path(), 1, "inst.json");
    let out = qfolio(dir.path(), &["exact", "--instance", "inst.json", "--id", "0"]);
    assert!(out.status.success(), "{out:?}");
    let body: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(body["E_g"].is_number());
    assert_eq!(body["ground_bitstring"].as_str().unwrap().len(), 9);
    assert!(body["F_max"].is_number());
}

#[test]
fn qaoa_smoke_run_writes_result() {
    let dir = tempfile::tempdir().unwrap();
    gen_instances(dir.path(), 1, "inst.json");
    let out = qfolio(
        dir.path(),
        &[
            "qaoa", "--instance", "inst.json", "--id", "0", "--max-evals", "60",
            "-o", "r.json",
        ],
    );
    assert!(out.status.success(), "{out:?}");
    let body = read_json(&dir.path().join("r.json"));
    assert!(body["min_energy_deviation"].as_f64().unwrap().is_finite());
    assert_eq!(body["trace"].as_array().unwrap().len(), 60);
    assert!(body["histogram"].is_object());
    // Manifest records the resolved configuration.
    let manifest = read_json(&dir.path().join("r.manifest.json"));
    assert_eq!(manifest["command"], "qaoa");
    assert_eq!(manifest["config"]["config"]["layers"], 2);
}

#[test]
fn qite_exact_smoke_run() {
    let dir = tempfile::tempdir().unwrap();
    gen_instances(dir.path(), 1, "inst.json");
    let out = qfolio(
        dir.path(),
        &["qite", "--instance", "inst.json", "--id", "0", "-o", "q.json"],
    );
    assert!(out.status.success(), "{out:?}");
    let body = read_json(&dir.path().join("q.json"));
    let p = body["success_probability"].as_f64().unwrap();
    assert!(p > 0.0 && p <= 1.0);
    assert!(body["beta"].as_f64().unwrap() > 0.0);
}

#[test]
fn bench_sweep_shape() {
    let dir = tempfile::tempdir().unwrap();
    gen_instances(dir.path(), 2, "inst.json");
    let out = qfolio(
        dir.path(),
        &[
            "bench", "--instance", "inst.json", "--solver", "qite-exact",
            "--sweep", "cx_x_flip:0.001,0.007", "--seeds", "2", "-o", "b.csv",
        ],
    );
    assert!(out.status.success(), "{out:?}");
    let csv = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    // Header + |p| x seeds x instances rows.
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 2);
    assert!(dir.path().join("b.json").exists());
}

#[test]
fn baseline_reports_per_instance() {
    let dir = tempfile::tempdir().unwrap();
    gen_instances(dir.path(), 2, "inst.json");
    let out = qfolio(
        dir.path(),
        &["baseline", "--instance", "inst.json", "-o", "base.json"],
    );
    assert!(out.status.success(), "{out:?}");
    let body = read_json(&dir.path().join("base.json"));
    let entries = body["baselines"].as_array().unwrap();
    assert_eq!(entries.len(), 2);
    assert!(entries[0]["mean_f_error"].as_f64().unwrap() > 0.0);
}

#[test]
fn malformed_input_exits_one_and_names_path() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), "{ not json").unwrap();
    let out = qfolio(
        dir.path(),
        &["exact", "--instance", "bad.json", "--id", "0"],
    );
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("bad.json"), "stderr: {stderr}");
}

#[test]
fn missing_id_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    gen_instances(dir.path(), 1, "inst.json");
    let out = qfolio(
        dir.path(),
        &["exact", "--instance", "inst.json", "--id", "5"],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn degenerate_bench_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    gen_instances(dir.path(), 1, "inst.json");
    // An absurd beta overflows u = e^{beta*E_min} in every cell, so every
    // benchmark row fails and the run is degenerate.
    let out = qfolio(
        dir.path(),
        &[
            "bench", "--instance", "inst.json", "--solver", "qite-exact",
            "--beta", "1e9", "-o", "b.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}
