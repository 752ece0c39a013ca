use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use periodic_jacobi::background::PeriodicBackground;
use periodic_jacobi::jost::{build_xi_data, Perturbation, PerturbedOperator};
use periodic_jacobi::states::{locate_states, StateKind, StateReport, DEFAULT_STATE_TOL};
use serde_json::Value;
use tempfile::TempDir;

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(format!("{name}.toml"))
}

fn pjacobi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pjacobi")).args(args).output().unwrap()
}

fn run_to(dir: &TempDir, task: &str, config: &Path, format: &str) -> (i32, String) {
    let out = dir.path().join(format!("{task}.{format}"));
    let o = pjacobi(&[
        task,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--format",
        format,
    ]);
    let text = std::fs::read_to_string(&out).unwrap_or_default();
    (o.status.code().unwrap(), text)
}

fn write_config(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn every_example_runs_cleanly() {
    let dir = TempDir::new().unwrap();
    for task in ["bands", "states", "scattering", "smallt", "asymptotics", "verify"] {
        for format in ["json", "csv"] {
            let (code, text) = run_to(&dir, task, &example(task), format);
            assert_eq!(code, 0, "{task} {format}");
            assert!(!text.is_empty());
        }
    }
}

#[test]
fn verify_on_rank_one_free_example() {
    let dir = TempDir::new().unwrap();
    let (code, text) = run_to(&dir, "verify", &example("verify"), "json");
    assert_eq!(code, 0);
    let doc: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["ok"], Value::Bool(true));
    let checks = doc["result"]["checks"].as_array().unwrap();
    assert!(checks.iter().all(|c| c["pass"] == Value::Bool(true)));
    assert_eq!(doc["result"]["states"]["total_with_multiplicity"], 2);
}

#[test]
fn bands_reports_the_unit_gap() {
    let dir = TempDir::new().unwrap();
    let (_, text) = run_to(&dir, "bands", &example("bands"), "csv");
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let gap: Vec<String> = reader
        .records()
        .map(|r| r.unwrap())
        .find(|r| &r[0] == "gap")
        .unwrap()
        .iter()
        .map(String::from)
        .collect();
    assert_eq!(gap[2].parse::<f64>().unwrap(), 0.0);
    assert_eq!(gap[3].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn unperturbed_states_stay_at_the_edges() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "zero.toml", "q = 2\na0 = [1.0, 1.0]\nb0 = [1.0, 0.0]\np = 1\nu = [0.0, 0.0]\nv = [0.0, 0.0]\n");
    let (code, text) = run_to(&dir, "states", &cfg, "json");
    assert_eq!(code, 0);
    let doc: Value = serde_json::from_str(&text).unwrap();
    let report: StateReport = serde_json::from_value(doc["result"]["report"].clone()).unwrap();
    assert!(report.states.iter().all(|s| s.kind == StateKind::Virtual));
    assert_eq!(report.bound_count, 0);
}

#[test]
fn json_round_trip_is_bit_exact() {
    let dir = TempDir::new().unwrap();
    let (_, text) = run_to(&dir, "states", &example("states"), "json");
    let doc: Value = serde_json::from_str(&text).unwrap();
    let read: StateReport = serde_json::from_value(doc["result"]["report"].clone()).unwrap();

    let op = PerturbedOperator::new(
        PeriodicBackground::new(vec![1.0, 1.5], vec![0.5, -0.5]).unwrap(),
        Perturbation::new(vec![0.2, 0.0, -0.1], vec![1.0, 0.3, -0.7]).unwrap(),
    )
    .unwrap();
    let data = build_xi_data(&op);
    let direct = locate_states(&op, &data, DEFAULT_STATE_TOL).unwrap();
    assert_eq!(read, direct);
    for (a, b) in read.states.iter().zip(&direct.states) {
        assert_eq!(a.lambda.re.to_bits(), b.lambda.re.to_bits());
        assert_eq!(a.lambda.im.to_bits(), b.lambda.im.to_bits());
    }
}

#[test]
fn csv_values_parse_back_exactly() {
    let dir = TempDir::new().unwrap();
    let (_, json) = run_to(&dir, "scattering", &example("scattering"), "json");
    let (_, csv_text) = run_to(&dir, "scattering", &example("scattering"), "csv");
    let doc: Value = serde_json::from_str(&json).unwrap();
    let rows = doc["result"].as_array().unwrap();
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    for (row, rec) in rows.iter().zip(reader.records()) {
        let rec = rec.unwrap();
        assert_eq!(rec[1].parse::<f64>().unwrap(), row["t"][0].as_f64().unwrap());
        assert_eq!(rec[4].parse::<f64>().unwrap(), row["r_plus"][1].as_f64().unwrap());
    }
}

#[test]
fn repeated_runs_are_identical() {
    let dir = TempDir::new().unwrap();
    for task in ["states", "verify"] {
        let (_, first) = run_to(&dir, task, &example(task), "json");
        let (_, second) = run_to(&dir, task, &example(task), "json");
        assert_eq!(first, second, "{task}");
    }
}

#[test]
fn seed_flag_is_honoured() {
    let dir = TempDir::new().unwrap();
    let body = std::fs::read_to_string(example("states")).unwrap().replace("task = \"states\"\n", "");
    let cfg = write_config(&dir, "untasked.toml", &body);
    let cfg = cfg.to_str().unwrap();
    let run = |seed: &str| pjacobi(&["verify", "--config", cfg, "--seed", seed]);
    let (a, b, c) = (run("4"), run("4"), run("5"));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn malformed_config_is_an_input_error_naming_the_field() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "bad.toml", "q = 2\na0 = [1.0]\nb0 = [1.0, 0.0]\n");
    let o = pjacobi(&["bands", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`a0`"));

    let cfg = write_config(&dir, "syntax.toml", "q = 2\na0 = [1.0, \n");
    assert_eq!(pjacobi(&["bands", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));

    let o = pjacobi(&["bands", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn task_mismatch_and_bad_flags_are_input_errors() {
    let o = pjacobi(&["states", "--config", example("bands").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`task`"));
    let o = pjacobi(&["verify", "--config", example("verify").to_str().unwrap(), "--tol", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = pjacobi(&["verify", "--config", example("verify").to_str().unwrap(), "--format", "xml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn smallt_with_off_diagonal_perturbation_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "u.toml",
        "q = 2\na0 = [1.0, 1.0]\nb0 = [1.0, 0.0]\np = 1\nu = [0.1, 0.0]\nv = [1.0, 1.0]\ngap = 1\n",
    );
    let o = pjacobi(&["smallt", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn scattering_outside_the_bands_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "gap.toml", "q = 2\na0 = [1.0, 1.0]\nb0 = [1.0, 0.0]\nv = [1.0]\nlambda = [0.5]\n");
    let o = pjacobi(&["scattering", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
}
