//! End-to-end tests of the varmin binary: exit codes, artifact schemas,
//! byte determinism, and the bit-exact round-trip of solve results.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use varmin::model::catalog;
use varmin::solve::Problem;
use varmin::{discrete_action, discrete_gradient, piecewise_linear};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_varmin"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const FP_SOLVE: &str = r#"{
  "schema": 1,
  "model": { "name": "free_particle", "dim": 1 },
  "problem": { "kind": "two_point", "t": 1.0, "start": [0.0], "end": [1.0] },
  "solver": { "k": 16 }
}"#;

#[test]
fn solve_free_particle_exactly() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "fp.json", FP_SOLVE);
    let out = run(&["solve", "-c", "fp.json", "--format", "both"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let result = read_json(&dir.path().join("fp.out.json"));
    assert_eq!(result["action"].as_f64().unwrap(), 0.5);
    assert_eq!(result["converged"], serde_json::json!(true));
    assert_eq!(result["certificate"]["holds"], serde_json::json!(true));
    assert_eq!(result["nodes"].as_array().unwrap().len(), 17);
    assert_eq!(result["momenta"].as_array().unwrap().len(), 16);

    let csv = fs::read_to_string(dir.path().join("fp.out.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "k,t_k,y0,z0");
    assert_eq!(lines.len(), 1 + 17);
    // Terminal momentum row repeats z_{K-1}.
    let last: Vec<&str> = lines[17].split(',').collect();
    let prev: Vec<&str> = lines[16].split(',').collect();
    assert_eq!(last[3], prev[3]);
}

#[test]
fn solve_result_round_trips_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "fp.json", FP_SOLVE);
    assert_eq!(code(&run(&["solve", "-c", "fp.json", "--quiet"], dir.path())), 0);

    let result = read_json(&dir.path().join("fp.out.json"));
    let nodes: Vec<f64> = result["nodes"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|row| row.as_array().unwrap().iter().map(|v| v.as_f64().unwrap()))
        .collect();

    let model = catalog::free_particle(1).unwrap();
    let problem = Problem::two_point(model, vec![0.0], vec![1.0], 1.0).unwrap();
    // The pinned endpoints in the file match the problem data bit-exactly,
    // so rebuilding from the free interior reproduces the full path.
    let path = problem.path_with_free_nodes(16, &nodes[1..16]).unwrap();
    assert_eq!(path.node(0)[0], nodes[0]);
    assert_eq!(path.node(16)[0], nodes[16]);
    let action = discrete_action(&problem, &path).unwrap();
    let grad = discrete_gradient(&problem, &path).unwrap();
    let grad_norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));

    assert_eq!(action, result["action"].as_f64().unwrap());
    assert_eq!(grad_norm, result["grad_norm"].as_f64().unwrap());
}

#[test]
fn identical_configs_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "fp.json", FP_SOLVE);
    for out in ["a", "b"] {
        let st = run(
            &["solve", "-c", "fp.json", "--format", "both", "--quiet", "-o", out],
            dir.path(),
        );
        assert_eq!(code(&st), 0);
    }
    for ext in ["json", "csv"] {
        let a = fs::read(dir.path().join(format!("a.{ext}"))).unwrap();
        let b = fs::read(dir.path().join(format!("b.{ext}"))).unwrap();
        assert_eq!(a, b, "{ext} artifacts differ between identical runs");
    }
}

#[test]
fn unknown_model_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "bad.json",
        &FP_SOLVE.replace("free_particle", "nosuch_model"),
    );
    let out = run(&["solve", "-c", "bad.json"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown model"));
}

#[test]
fn missing_config_sections_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "nomodel.json", r#"{ "schema": 1 }"#);
    assert_eq!(code(&run(&["verify", "-c", "nomodel.json"], dir.path())), 2);

    write(
        dir.path(),
        "noproblem.json",
        r#"{ "schema": 1, "model": { "name": "free_particle", "dim": 1 } }"#,
    );
    assert_eq!(code(&run(&["solve", "-c", "noproblem.json"], dir.path())), 2);

    write(dir.path(), "schema9.json", &FP_SOLVE.replace("\"schema\": 1", "\"schema\": 9"));
    assert_eq!(code(&run(&["solve", "-c", "schema9.json"], dir.path())), 2);

    assert_eq!(code(&run(&["solve", "-c", "absent.json"], dir.path())), 2);
}

#[test]
fn non_convergence_exits_one_with_result_written() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "ho.json",
        r#"{
  "schema": 1,
  "model": { "name": "harmonic_oscillator", "dim": 1, "params": { "omega": 1.0 } },
  "problem": { "kind": "two_point", "t": 1.0, "start": [0.0], "end": [1.0] },
  "solver": { "k": 32, "max_iter": 1 }
}"#,
    );
    let out = run(&["solve", "-c", "ho.json", "--quiet"], dir.path());
    assert_eq!(code(&out), 1);
    let result = read_json(&dir.path().join("ho.out.json"));
    assert_eq!(result["converged"], serde_json::json!(false));
    assert_eq!(result["iterations"].as_u64().unwrap(), 1);
}

const HO_STUDY: &str = r#"{
  "schema": 1,
  "model": { "name": "harmonic_oscillator", "dim": 1, "params": { "omega": 1.0 } },
  "problem": { "kind": "two_point", "t": 1.0, "start": [0.0], "end": [1.0] },
  "study": { "k0": 8, "levels": 4 }
}"#;

#[test]
fn converge_reports_first_order_for_the_oscillator() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "ho.json", HO_STUDY);
    let out = run(&["converge", "-c", "ho.json", "--format", "both"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("verdict: first_order"), "table:\n{table}");

    let report = read_json(&dir.path().join("ho.out.json"));
    assert_eq!(report["verdict"], serde_json::json!("first_order"));
    assert_eq!(report["levels"].as_array().unwrap().len(), 4);

    let csv = fs::read_to_string(dir.path().join("ho.out.polygon.csv")).unwrap();
    assert!(csv.starts_with("s,y0,z0\n"));
    assert_eq!(csv.lines().count(), 1 + 65);
}

#[test]
fn converge_is_exact_for_the_free_particle() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "fp.json",
        r#"{
  "schema": 1,
  "model": { "name": "free_particle", "dim": 1 },
  "problem": { "kind": "two_point", "t": 1.0, "start": [0.0], "end": [1.0] },
  "study": { "k0": 8, "levels": 4 }
}"#,
    );
    let out = run(&["converge", "-c", "fp.json", "--quiet"], dir.path());
    assert_eq!(code(&out), 0);
    let report = read_json(&dir.path().join("fp.out.json"));
    assert_eq!(report["verdict"], serde_json::json!("exact"));
}

#[test]
fn converge_rejects_single_level_studies() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "lev1.json",
        &HO_STUDY.replace("\"levels\": 4", "\"levels\": 1"),
    );
    assert_eq!(code(&run(&["converge", "-c", "lev1.json"], dir.path())), 2);
}

#[test]
fn verify_passes_catalog_and_flags_degenerate_models() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "mech.json",
        r#"{
  "schema": 1,
  "model": { "name": "mechanical", "dim": 2, "params": { "amplitude": 0.7, "frequency": 1.1 } },
  "verify": { "n_samples": 256 }
}"#,
    );
    assert_eq!(code(&run(&["verify", "-c", "mech.json", "--quiet"], dir.path())), 0);
    let report = read_json(&dir.path().join("mech.out.json"));
    assert_eq!(report["pass"], serde_json::json!(true));

    write(
        dir.path(),
        "degen.json",
        r#"{
  "schema": 1,
  "model": { "name": "quadratic_form", "dim": 1, "params": { "matrix": [[0.0]] } },
  "verify": { "n_samples": 64 }
}"#,
    );
    let out = run(&["verify", "-c", "degen.json", "--quiet"], dir.path());
    assert_eq!(code(&out), 1);
    let report = read_json(&dir.path().join("degen.out.json"));
    assert_eq!(report["pass"], serde_json::json!(false));
    assert_eq!(report["conditions"]["convexity"]["pass"], serde_json::json!(false));
}

fn write_curve_csv(path: &Path, curve: &varmin::SampledCurve) {
    let mut text = String::from("s,y0,v0\n");
    for i in 0..curve.samples() {
        text.push_str(&format!(
            "{:.16e},{:.16e},{:.16e}\n",
            curve.times()[i],
            curve.value(i)[0],
            curve.deriv(i).unwrap()[0],
        ));
    }
    fs::write(path, text).unwrap();
}

fn zigzag_config(curve: &str, eps: &str) -> String {
    format!(
        r#"{{
  "schema": 1,
  "model": {{ "name": "free_particle", "dim": 1 }},
  "problem": {{ "kind": "two_point", "t": 1.0, "start": [0.0], "end": [1.0] }},
  "mollify": {{ "curve": "{curve}", "eps": {eps}, "minimizer_action": 0.5 }}
}}"#
    )
}

#[test]
fn mollify_zigzag_dominates_the_minimizer() {
    let dir = tempfile::tempdir().unwrap();
    let zigzag = piecewise_linear(
        &[0.0, 0.25, 0.5, 0.75, 1.0],
        &[0.0, 0.75, 0.0, 0.75, 1.0],
        1,
        1025,
    )
    .unwrap();
    write_curve_csv(&dir.path().join("zigzag.csv"), &zigzag);
    write(
        dir.path(),
        "moll.json",
        &zigzag_config("zigzag.csv", "[0.125, 0.0625, 0.03125]"),
    );
    let out = run(&["mollify", "-c", "moll.json"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let study = read_json(&dir.path().join("moll.out.json"));
    assert_eq!(study["all_dominate"], serde_json::json!(true));
    for row in study["rows"].as_array().unwrap() {
        assert!(row["action"].as_f64().unwrap() >= 0.5 - 1e-9);
        assert!(row["endpoint_err"].as_f64().unwrap() <= 1e-12);
    }
    let table = fs::read_to_string(dir.path().join("moll.out.txt")).unwrap();
    assert!(table.contains("all dominate: true"));
}

#[test]
fn mollify_fixes_the_straight_line() {
    let dir = tempfile::tempdir().unwrap();
    let line = piecewise_linear(&[0.0, 1.0], &[0.0, 1.0], 1, 513).unwrap();
    write_curve_csv(&dir.path().join("line.csv"), &line);
    write(dir.path(), "moll.json", &zigzag_config("line.csv", "[0.2, 0.1]"));
    assert_eq!(code(&run(&["mollify", "-c", "moll.json", "--quiet"], dir.path())), 0);
    let study = read_json(&dir.path().join("moll.out.json"));
    for row in study["rows"].as_array().unwrap() {
        assert!((row["action"].as_f64().unwrap() - 0.5).abs() <= 1e-10);
    }
}

#[test]
fn mollify_rejects_bad_radii_and_malformed_curves() {
    let dir = tempfile::tempdir().unwrap();
    let line = piecewise_linear(&[0.0, 1.0], &[0.0, 1.0], 1, 129).unwrap();
    write_curve_csv(&dir.path().join("line.csv"), &line);

    write(dir.path(), "eps.json", &zigzag_config("line.csv", "[0.25]"));
    assert_eq!(code(&run(&["mollify", "-c", "eps.json"], dir.path())), 2);

    write(dir.path(), "curve.json", &zigzag_config("wrong.csv", "[0.1]"));
    assert_eq!(code(&run(&["mollify", "-c", "curve.json"], dir.path())), 2);

    fs::write(dir.path().join("header.csv"), "s,q0,v0\n0.0,0.0,1.0\n").unwrap();
    write(dir.path(), "head.json", &zigzag_config("header.csv", "[0.1]"));
    let out = run(&["mollify", "-c", "head.json"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("header"));
}

#[test]
fn bolza_solve_with_quadratic_cost() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "bolza.json",
        r#"{
  "schema": 1,
  "model": { "name": "free_particle", "dim": 1 },
  "problem": { "kind": "bolza", "t": 1.0, "end": [1.0], "terminal_cost": { "type": "quadratic", "weight": 1.0 } },
  "solver": { "k": 64, "init": "constant" }
}"#,
    );
    let out = run(&["solve", "-c", "bolza.json", "--quiet"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let result = read_json(&dir.path().join("bolza.out.json"));
    assert!((result["action"].as_f64().unwrap() - 0.25).abs() < 1e-6);
    let y0 = result["nodes"].as_array().unwrap()[0].as_array().unwrap()[0]
        .as_f64()
        .unwrap();
    assert!((y0 - 0.5).abs() < 1e-5);
}

#[test]
fn thread_cap_env_var() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "fp.json", FP_SOLVE);
    let out = Command::new(env!("CARGO_BIN_EXE_varmin"))
        .args(["solve", "-c", "fp.json", "--quiet"])
        .env("VARMIN_THREADS", "1")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);

    let out = Command::new(env!("CARGO_BIN_EXE_varmin"))
        .args(["solve", "-c", "fp.json", "--quiet"])
        .env("VARMIN_THREADS", "many")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}
