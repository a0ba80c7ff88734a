use std::path::PathBuf;

use loccforge_cli::{run, EXIT_BUDGET, EXIT_IMPOSSIBLE, EXIT_INPUT, EXIT_OK};
use serde_json::Value;

fn fixture(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "core", "fixtures", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["loccforge"];
    argv.extend_from_slice(args);
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(args: &[&str]) -> (i32, Value) {
    let mut a = vec!["--format", "json"];
    a.extend_from_slice(args);
    let (code, out, err) = call(&a);
    let v = serde_json::from_str(&out).unwrap_or_else(|e| panic!("{e}: {out} {err}"));
    (code, v)
}

#[test]
fn validate_accepts_fixture() {
    let (code, out, _) = call(&["validate", &fixture("ex10.json")]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("valid: 5 operators on parties A,B"), "{out}");
}

#[test]
fn validate_reports_diagnostics() {
    let (code, v) = json(&["validate", &fixture("broken.json")]);
    assert_eq!(code, EXIT_INPUT);
    assert_eq!(v["valid"], false);
    let diags: Vec<&str> = v["diagnostics"].as_array().unwrap().iter().map(|d| d.as_str().unwrap()).collect();
    assert!(diags.iter().any(|d| d.contains("not positive semidefinite")));
    assert!(diags.iter().any(|d| d.contains("operators 1 and 2")));
}

#[test]
fn validate_rejects_incomplete() {
    let (code, v) = json(&["validate", &fixture("fig2_unequal.json")]);
    assert_eq!(code, EXIT_INPUT);
    assert!(v["diagnostics"][0].as_str().unwrap().starts_with("not complete"));
}

#[test]
fn missing_file_is_an_input_error() {
    let (code, _, err) = call(&["validate", "/nonexistent/m.json"]);
    assert_eq!(code, EXIT_INPUT);
    assert!(err.starts_with("error: "));
}

#[test]
fn bad_arguments_are_input_errors() {
    assert_eq!(call(&["synthesize"]).0, EXIT_INPUT);
    assert_eq!(call(&["frobnicate"]).0, EXIT_INPUT);
    assert_eq!(call(&["--help"]).0, EXIT_OK);
}

#[test]
fn nogo_on_domino() {
    let (code, v) = json(&["check-nogo", &fixture("dom9.json")]);
    assert_eq!(code, EXIT_IMPOSSIBLE);
    assert_eq!(v["singular_extreme_ray"]["operators"], serde_json::json!([1]));
    assert_eq!(v["bipartition"]["operators"], serde_json::json!([1]));
    let (code, out, _) = call(&["check-nogo", &fixture("ex10.json")]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("no obstruction found"));
}

#[test]
fn synthesize_worked_example() {
    let (code, out, _) = call(&["synthesize", &fixture("ex10.json"), "--rounds", "4"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("order B,A,B,A; 5 leaves"), "{out}");
}

#[test]
fn synthesize_exit_codes() {
    let (code, v) = json(&["synthesize", &fixture("dom9.json"), "--rounds", "2"]);
    assert_eq!(code, EXIT_IMPOSSIBLE);
    assert_eq!(v["verdict"], "impossible");
    let (code, v) = json(&["synthesize", &fixture("ex10.json"), "--rounds", "2"]);
    assert_eq!(code, EXIT_BUDGET);
    assert_eq!(v["reason"], "rounds");
    let (code, v) = json(&["synthesize", &fixture("dom9.json"), "--rounds", "4", "--no-precheck", "--max-trees", "10"]);
    assert_eq!(code, EXIT_BUDGET);
    assert_eq!(v["reason"], "max-trees");
}

#[test]
fn exhaustive_product_basis_orders() {
    let (code, v) = json(&["synthesize", &fixture("product_basis.json"), "--rounds", "2", "--exhaustive"]);
    assert_eq!(code, EXIT_OK);
    let orders = v["protocol"]["orders"].as_array().unwrap();
    assert!(orders.contains(&serde_json::json!(["A", "B"])));
    assert!(orders.contains(&serde_json::json!(["B", "A"])));
}

#[test]
fn config_file_and_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, "{\"rounds\": 4}").unwrap();
    let cfg = cfg.to_string_lossy().into_owned();
    let (code, _, _) = call(&["--config", &cfg, "synthesize", &fixture("ex10.json")]);
    assert_eq!(code, EXIT_OK);
    // the flag wins over the file
    let (code, _, _) = call(&["--config", &cfg, "synthesize", &fixture("ex10.json"), "--rounds", "3"]);
    assert_eq!(code, EXIT_BUDGET);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"rounds\": 0}").unwrap();
    let (code, _, err) = call(&["--config", &bad.to_string_lossy(), "validate", &fixture("ex10.json")]);
    assert_eq!(code, EXIT_INPUT, "{err}");
}

#[test]
fn save_dot_and_lift() {
    let dir = tempfile::tempdir().unwrap();
    let dot = dir.path().join("p.dot");
    let saved = dir.path().join("p.json");
    let (code, _, err) = call(&[
        "synthesize",
        &fixture("kraus_multiplicity.json"),
        "--rounds",
        "2",
        "--dot",
        &dot.to_string_lossy(),
        "--save",
        &saved.to_string_lossy(),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let dot_text = std::fs::read_to_string(&dot).unwrap();
    assert!(dot_text.starts_with("digraph protocol {"));

    let (code, v) = json(&["lift", &fixture("kraus_multiplicity.json"), "--protocol", &saved.to_string_lossy()]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(v["coin_rounds"], 1);
    assert!(v["max_residual"].as_f64().unwrap() <= 1e-8);

    // a measurement without Kraus data cannot be lifted
    let (code, _, err) = call(&["lift", &fixture("product_basis.json"), "--protocol", &saved.to_string_lossy()]);
    assert_eq!(code, EXIT_INPUT);
    assert!(err.contains("different measurement") || err.contains("Kraus"), "{err}");
}
