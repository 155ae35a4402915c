use std::process::{Command, Output};

use serde_json::Value;

fn multicorr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_multicorr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(args: &[&str]) -> Value {
    let out = multicorr(args);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let doc: Value = serde_json::from_slice(&out.stdout).expect("JSON report");
    validate(&doc);
    doc
}

fn validate(doc: &Value) {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/report.schema.json"))
        .unwrap();
    let schema: Value = serde_json::from_str(&text).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "schema violations: {errors:?}");
}

fn f(v: &Value) -> f64 {
    v.as_f64().expect("number")
}

#[test]
fn kaszlikowski_five_pauli_scan() {
    let doc = report(&[
        "covariance",
        "--family",
        "kaszlikowski",
        "--n",
        "5",
        "--mode",
        "pauli",
    ]);
    let cov = &doc["covariance"];
    assert_eq!(cov["all_below_tol"], true);
    assert_eq!(cov["evaluated_count"], 243);
    assert_eq!(doc["verified"], true);
}

#[test]
fn ghz_covariance_parity_dependence() {
    let four = report(&["covariance", "--family", "ghz_classical", "--n", "4"]);
    assert_eq!(f(&four["covariance"]["max_abs"]), 1.0);
    assert_eq!(four["covariance"]["argmax"], "zzzz");
    let three = report(&["covariance", "--family", "ghz_classical", "--n", "3"]);
    assert_eq!(three["covariance"]["all_below_tol"], true);
}

#[test]
fn optimizer_mode_on_kaszlikowski() {
    let doc = report(&[
        "covariance",
        "--family",
        "kaszlikowski",
        "--n",
        "5",
        "--mode",
        "optimize",
        "--restarts",
        "8",
    ]);
    assert_eq!(doc["covariance"]["mode"], "optimize");
    assert!(f(&doc["covariance"]["max_abs"]) < 1e-7);
}

#[test]
fn dephased_kaszlikowski_seven_cuts() {
    let doc = report(&["cuts", "--family", "kaszlikowski", "--n", "7", "--dephase"]);
    let rows = doc["cuts"].as_array().unwrap();
    assert_eq!(rows.len(), 63);
    for r in rows {
        assert!(f(&r["abs_delta"]) < 1e-9, "{r}");
    }
    assert_eq!(doc["genuine"]["genuine"], true);
}

#[test]
fn parity_even_cuts_have_unit_mi() {
    let doc = report(&["cuts", "--family", "parity_even", "--n", "4"]);
    for r in doc["cuts"].as_array().unwrap() {
        assert!((f(&r["mutual_information"]) - 1.0).abs() < 1e-9);
    }
}

#[test]
fn random_product_is_not_genuinely_correlated() {
    let doc = report(&[
        "cuts",
        "--family",
        "random_product",
        "--n",
        "4",
        "--seed",
        "9",
    ]);
    assert_eq!(doc["genuine"]["genuine"], false);
    assert_eq!(doc["state"]["seed"], 9);
}

#[test]
fn hv_on_dephased_three_qubits() {
    let doc = report(&[
        "cuts",
        "--family",
        "dephased_kaszlikowski",
        "--n",
        "3",
        "--hv",
        "--hv-restarts",
        "4",
    ]);
    for r in doc["cuts"].as_array().unwrap() {
        assert!((f(&r["hv_computational"]) - 1.0 / 3.0).abs() < 1e-9);
        assert!(f(&r["hv_value"]) <= 1.0 / 3.0 + 1e-6);
    }
}

#[test]
fn postulate_counterexample() {
    let doc = report(&["postulate"]);
    let v = &doc["postulate"]["verdicts"][0];
    assert_eq!(v["measure"], "max_abs_pauli_covariance");
    assert_eq!(f(&v["value_before"]), 0.0);
    assert_eq!(f(&v["value_after"]), 1.0);
    assert_eq!(v["postulate_violated"], true);
    assert_eq!(doc["postulate"]["verdicts"][1]["postulate_violated"], false);
    assert_eq!(doc["postulate"]["witness"], "zzzz");
}

#[test]
fn lemma_twenty_trials() {
    let doc = report(&["lemma", "--n", "3", "--trials", "20", "--seed", "1"]);
    assert_eq!(doc["lemma_summary"]["agreeing_trials"], 20);
    assert_eq!(doc["lemma"].as_array().unwrap().len(), 60);
}

#[test]
fn pairwise_dephased_kaszlikowski() {
    let doc = report(&[
        "pairwise",
        "--family",
        "kaszlikowski",
        "--n",
        "5",
        "--dephase",
    ]);
    let rows = doc["pairwise"].as_array().unwrap();
    assert_eq!(rows.len(), 10);
    for r in rows {
        assert!((f(&r["mutual_information"]) - 0.029049405545331).abs() < 1e-9);
    }
}

#[test]
fn reports_are_byte_identical() {
    let args = [
        "cuts",
        "--family",
        "random_classical",
        "--n",
        "4",
        "--seed",
        "3",
        "--hv",
        "--ppt",
    ];
    assert_eq!(multicorr(&args).stdout, multicorr(&args).stdout);
}

#[test]
fn csv_output() {
    let out = multicorr(&[
        "pairwise",
        "--family",
        "ghz_classical",
        "--n",
        "3",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("i,j,mutual_information,closed_form_mi,abs_delta")
    );
    assert_eq!(lines.next(), Some("0,1,1.0,1.0,0.0"));
}

#[test]
fn exit_codes() {
    assert_eq!(
        multicorr(&["covariance", "--family", "bogus", "--n", "3"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        multicorr(&[
            "covariance",
            "--family",
            "ghz_classical",
            "--n",
            "4",
            "--tol",
            "2"
        ])
        .status
        .code(),
        Some(3)
    );
    assert_eq!(multicorr(&["lemma", "--n", "6"]).status.code(), Some(4));
}

#[test]
fn capacity_override_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_multicorr"))
        .args(["covariance", "--family", "ghz_classical", "--n", "4"])
        .env("MULTICORR_MAX_QUBITS", "3")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
}
