use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::{json, Value};

use lcs_verify::cli::{RunReport, PAPER_EXAMPLE_JSON};
use lcs_verify::report::Verdict;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lcs-verify")).args(args).output().unwrap()
}

fn write(name: &str, text: &str) -> String {
    let p = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn example() -> Value {
    serde_json::from_str(PAPER_EXAMPLE_JSON).unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn validate_prints_one_line_per_check() {
    let f = write("cli_example.json", PAPER_EXAMPLE_JSON);
    let o = bin(&["validate", &f, "--points", "10"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.last(), Some(&"overall  PASS"));
    for line in &lines[..lines.len() - 1] {
        let fields: Vec<_> = line.split("  ").collect();
        assert_eq!(fields.len(), 5, "{line}");
        assert!(fields[0].starts_with("EQ(") && fields[0].ends_with(')'), "{line}");
        assert!(fields[2].parse::<f64>().is_ok(), "{line}");
        assert_eq!(fields[3], "10");
        assert_eq!(fields[4], "PASS");
    }
    assert!(text.contains("EQ(3.4)  concircular  "));
}

#[test]
fn identities_report_the_curvature_of_xi() {
    let f = write("cli_identities.json", PAPER_EXAMPLE_JSON);
    let o = bin(&["identities", &f, "--points", "8"]);
    assert_eq!(o.status.code(), Some(0));
    let line = stdout(&o).lines().find(|l| l.contains(" qsmc_curvature_xi ")).unwrap().to_string();
    assert!(line.starts_with("EQ(4.11)  qsmc_curvature_xi  ") && line.ends_with("  8  PASS"), "{line}");
}

#[test]
fn json_report_parses_and_round_trips() {
    let o = bin(&["paper-example", "--format", "json", "--points", "6", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let r: RunReport = serde_json::from_str(&text).unwrap();
    assert_eq!(r.verdict, Verdict::Pass);
    assert_eq!((r.sampling.points, r.sampling.seed), (6, 3));
    let suites: Vec<_> = r.suites.iter().map(|s| s.suite.as_str()).collect();
    assert_eq!(suites, ["structure", "connection", "qsmc", "invariance", "invariant", "parallelism", "theorem5"]);
    assert_eq!(serde_json::to_string_pretty(&r).unwrap() + "\n", text);
    // field order is fixed by the struct declaration
    let at = |k: &str| text.find(&format!("\n  \"{k}\":")).unwrap();
    let keys = ["tool_version", "input_digest", "sampling", "suites", "verdict"];
    assert!(keys.windows(2).all(|w| at(w[0]) < at(w[1])));
}

#[test]
fn digest_identifies_the_document() {
    let a = write("cli_digest_a.json", PAPER_EXAMPLE_JSON);
    let b = write("cli_digest_b.json", &example().to_string());
    let digest = |f: &str| {
        let r: RunReport = serde_json::from_str(&stdout(&bin(&["validate", f, "--format", "json", "--points", "4"]))).unwrap();
        r.input_digest
    };
    assert_eq!(digest(&a), digest(&a));
    assert_ne!(digest(&a), digest(&b));
}

#[test]
fn input_errors_exit_with_two() {
    let malformed = write("cli_malformed.json", "{\"coordinates\": [\"x\"");
    let o = bin(&["validate", &malformed]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    assert!(String::from_utf8_lossy(&o.stderr).contains("malformed document"));

    let mut doc = example();
    doc.as_object_mut().unwrap().remove("xi");
    let missing = write("cli_missing.json", &doc.to_string());
    let o = bin(&["validate", &missing]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`xi`"));

    let mut doc = example();
    doc["metric"][0][1] = json!("z");
    let asym = write("cli_asymmetric.json", &doc.to_string());
    assert_eq!(bin(&["validate", &asym]).status.code(), Some(2));

    assert_eq!(bin(&["paper-example", "--format", "xml"]).status.code(), Some(2));
    assert_eq!(bin(&["validate", "/nonexistent/definition.json"]).status.code(), Some(2));
    assert_eq!(bin(&["identities", &malformed, "--perturb-gamma", "1,2"]).status.code(), Some(2));

    let mut doc = example();
    doc.as_object_mut().unwrap().remove("immersion");
    let no_immersion = write("cli_no_immersion.json", &doc.to_string());
    assert_eq!(bin(&["submanifold", &no_immersion]).status.code(), Some(2));
}

#[test]
fn failures_exit_with_one() {
    let mut doc = example();
    doc["metric"][4][4] = json!("exp(2.1*z)");
    let f = write("cli_perturbed.json", &doc.to_string());
    let o = bin(&["validate", &f, "--points", "10"]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("EQ(3.4)  concircular  ") && l.contains("  FAIL")), "{text}");
    assert!(text.ends_with("overall  FAIL\n"));
}

#[test]
fn command_line_overrides_document_sampling() {
    let mut doc = example();
    doc["sampling"] = json!({"points": 7, "atol": 1e-30, "rtol": 1e-30});
    let f = write("cli_sampling.json", &doc.to_string());
    // tolerances this tight fail on round-off alone
    assert_eq!(bin(&["validate", &f]).status.code(), Some(1));
    let o = bin(&["validate", &f, "--atol", "1e-9", "--rtol", "1e-9", "--points", "5"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().next().unwrap().ends_with("  5  PASS"));
}

#[test]
fn print_document_emits_the_shipped_example() {
    let o = bin(&["paper-example", "--print-document"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), PAPER_EXAMPLE_JSON);
}
