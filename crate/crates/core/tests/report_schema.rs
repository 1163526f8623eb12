use jsonschema::JSONSchema;
use serde_json::{json, Value};

use wijsman_lab::cli::RunConfig;
use wijsman_lab::reproduce::{reproduce, TheoremId};

fn schema() -> JSONSchema {
    let text = include_str!("../schemas/reproduction_report.schema.json");
    let value: Value = serde_json::from_str(text).unwrap();
    JSONSchema::compile(&value).expect("schema compiles")
}

fn assert_valid(schema: &JSONSchema, report: &Value) {
    if let Err(errors) = schema.validate(report) {
        let msgs: Vec<String> = errors.map(|e| format!("{} at {}", e, e.instance_path)).collect();
        panic!("report does not match the schema: {msgs:?}\n{report:#}");
    }
}

#[test]
fn every_suite_report_matches_the_schema() {
    let schema = schema();
    let cfg = RunConfig { traces: Some(3), scale: Some(5_000), ..RunConfig::default() };
    for id in TheoremId::ALL {
        let report = reproduce(id, &cfg).unwrap();
        assert!(report.passed(), "{id}: {:?}", report.failed_assertions().collect::<Vec<_>>());
        assert_valid(&schema, &serde_json::to_value(&report).unwrap());
    }
}

#[test]
fn construction_failures_match_the_schema() {
    let schema = schema();
    let cfg = RunConfig { modulus: Some("identity".into()), c: Some(0.9), ..RunConfig::default() };
    let report = serde_json::to_value(reproduce(TheoremId::Converse1, &cfg).unwrap()).unwrap();
    assert_eq!(report["status"], "construction-failure");
    assert_valid(&schema, &report);
}

#[test]
fn schema_rejects_malformed_reports() {
    let schema = schema();
    let good = json!({
        "theorem_id": "converse1",
        "status": "pass",
        "seed": 1,
        "parameters": {},
        "assertions": [{"name": "a", "relation": "<=", "measured": 0.0, "bound": 1.0, "passed": true}],
        "artifacts": []
    });
    assert!(schema.is_valid(&good));
    let mut bad = good.clone();
    bad["theorem_id"] = json!("converse3");
    assert!(!schema.is_valid(&bad));
    let mut bad = good.clone();
    bad["status"] = json!("construction-failure");
    assert!(!schema.is_valid(&bad), "construction failures must carry an error");
    let mut bad = good;
    bad["assertions"][0]["relation"] = json!("<");
    assert!(!schema.is_valid(&bad));
}
