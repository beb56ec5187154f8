use std::path::Path;
use std::process::{Command, Output};

use sysrel::config::AnalysisConfig;
use sysrel::report::ReportDocument;

const SMALL: &str = r#"{
    "name": "two_lines",
    "inputs": [
        {"name": "a", "kind": "gaussian", "mean": 0, "std": 1},
        {"name": "b", "kind": "gaussian", "mean": 0, "std": 1}
    ],
    "components": [
        {"id": "g1", "expression": "3 - a", "map": ["a", "b"]},
        {"id": "g2", "expression": "3.5 - 0.6*a - 0.8*b", "map": ["a", "b"]}
    ],
    "composition": "min(g1, g2)",
    "surrogate": {"kind": "kriging", "trend": "linear"},
    "learning": {"final_repeats": 2, "max_iterations": 20},
    "sus": {"n_level": 2000},
    "sus_final": {"n_level": 5000},
    "seed": 11
}"#;

fn sysrel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sysrel")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn validate_reports_the_missing_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", &SMALL.replace(r#""composition": "min(g1, g2)","#, ""));
    let out = sysrel(&["validate", &bad]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`composition`"), "{err}");

    let typo = write(dir.path(), "typo.json", &SMALL.replace("\"eps_bar\"", "\"epsbar\"").replace("\"max_iterations\": 20", "\"max_iter\": 20"));
    let out = sysrel(&["validate", &typo]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning"));

    let good = write(dir.path(), "good.json", SMALL);
    let out = sysrel(&["validate", &good]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("2 components"));
}

#[test]
fn unknown_builtin_lists_the_available_problems() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.json", r#"{"problem": "cantilever"}"#);
    let out = sysrel(&["validate", &p]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    for name in ["four_branch_p7", "four_branch_p6", "roof_truss"] {
        assert!(err.contains(name), "{err}");
    }
    let out = sysrel(&["validate", &dir.path().join("absent.json").to_string_lossy()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_writes_a_report_that_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.json", SMALL);
    let first = dir.path().join("first.json");
    let out = sysrel(&["run", &cfg, "--out", &first.to_string_lossy()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = ReportDocument::from_json(&std::fs::read_to_string(&first).unwrap()).unwrap();
    assert!(doc.report.converged);
    assert_eq!(doc.report.evaluations.iter().sum::<usize>(), doc.report.total_evaluations);
    assert_eq!(doc.config.effective_seeds(), AnalysisConfig::from_json(SMALL).unwrap().effective_seeds());

    let echo = write(dir.path(), "echo.json", &doc.config.to_json());
    let second = dir.path().join("second.json");
    let out = sysrel(&["run", &echo, "--out", &second.to_string_lossy()]);
    assert_eq!(out.status.code(), Some(0));
    let again = ReportDocument::from_json(&std::fs::read_to_string(&second).unwrap()).unwrap();
    assert_eq!(again.report.pf.to_bits(), doc.report.pf.to_bits());
    assert_eq!(again.report.history, doc.report.history);
    assert_eq!(again.report.enrichments, doc.report.enrichments);

    let out = sysrel(&["run", &cfg, "--format", "csv"]);
    let csv = String::from_utf8_lossy(&out.stdout);
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("iteration,pf,beta,"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let pf: f64 = row[1].parse().unwrap();
    assert_eq!(pf.to_bits(), doc.report.history[0].pf.to_bits());
}

#[test]
fn seed_flag_changes_the_streams() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.json", SMALL);
    let out_path = dir.path().join("r.json");
    let out = sysrel(&["run", &cfg, "--seed", "99", "--out", &out_path.to_string_lossy()]);
    assert!(out.status.code() == Some(0) || out.status.code() == Some(2));
    let doc = ReportDocument::from_json(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(doc.config.effective_seeds(), sysrel::learning::Seeds::from_single(99));
}

#[test]
fn not_converged_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "short.json", &SMALL.replace("\"max_iterations\": 20", "\"max_iterations\": 1"));
    let out = sysrel(&["run", &cfg, "--out", &dir.path().join("r.json").to_string_lossy()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn reference_and_repeat() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.json", SMALL);
    let out = sysrel(&["reference", &cfg, "--repeats", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let pf = v["pf"].as_f64().unwrap();
    assert!(pf > 1e-3 && pf < 3e-3, "{pf}");
    assert_eq!(v["repeats"], 2);

    let summary = dir.path().join("summary.json");
    let out = sysrel(&["repeat", "-n", "3", &cfg, "--out", &summary.to_string_lossy()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("median") && table.contains("evaluations_g2"), "{table}");
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(v["runs"].as_array().unwrap().len(), 3);
    assert_eq!(v["runs"][2]["seed"], 2);

    let out = sysrel(&["repeat", "-n", "2", &cfg, "--format", "csv"]);
    let csv = String::from_utf8_lossy(&out.stdout);
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("seed,converged,pf,beta"));
}

#[test]
fn shipped_configs_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        let out = sysrel(&["validate", &path.to_string_lossy()]);
        assert_eq!(out.status.code(), Some(0), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
        n += 1;
    }
    assert!(n >= 4);
}
