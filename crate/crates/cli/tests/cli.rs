//! End-to-end checks of the command-line surface: output contents,
//! exit codes, and diagnostics.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_recon-fusion")
}

fn run_cli<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(binary()).args(args).output().expect("binary runs")
}

fn write_file(path: &Path, contents: &str) {
    fs::write(path, contents).unwrap();
}

const EVIDENCE: &str = "\
building_id,image_id,task,p_positive
b1,i1,overview,0.9
b1,i1,damage,0.9
b1,i2,overview,0.3
b1,i2,damage,0.99
b2,i1,overview,0.8
b2,i1,damage,0.05
b2,i1,elevation,0.8
b2,i2,elevation,0.4
";

const TRUTH: &str = "\
building_id,task,label
b1,damage,MD
b2,damage,NMD
b2,elevation,EL
";

#[test]
fn fuse_prints_the_fused_probability() {
    let dir = tempfile::tempdir().unwrap();
    let evidence = dir.path().join("evidence.csv");
    write_file(&evidence, EVIDENCE);

    // Only i1 passes the gate; q1 = 0.2 and theta = 0.5 on a 0.9 score.
    let output = run_cli([
        "fuse",
        "--evidence",
        evidence.to_str().unwrap(),
        "--building",
        "b1",
        "--task",
        "damage",
        "--coverage",
        "0.2,1",
        "--theta",
        "0.5",
    ]);
    assert!(output.status.success());
    assert_eq!(String::from_utf8_lossy(&output.stdout).trim(), "0.940000");

    // Pre-event task averages without gating.
    let output = run_cli([
        "fuse",
        "--evidence",
        evidence.to_str().unwrap(),
        "--building",
        "b2",
        "--task",
        "elevation",
    ]);
    assert!(output.status.success());
    assert_eq!(String::from_utf8_lossy(&output.stdout).trim(), "0.600000");
}

#[test]
fn fuse_rejects_the_gate_task_and_missing_buildings() {
    let dir = tempfile::tempdir().unwrap();
    let evidence = dir.path().join("evidence.csv");
    write_file(&evidence, EVIDENCE);

    let output = run_cli([
        "fuse",
        "--evidence",
        evidence.to_str().unwrap(),
        "--building",
        "b1",
        "--task",
        "overview",
    ]);
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("gate"));

    let output = run_cli([
        "fuse",
        "--evidence",
        evidence.to_str().unwrap(),
        "--building",
        "zz",
        "--task",
        "damage",
    ]);
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("not found"));
}

#[test]
fn run_writes_outcomes_and_confusion_files() {
    let dir = tempfile::tempdir().unwrap();
    let evidence = dir.path().join("evidence.csv");
    let truth = dir.path().join("truth.csv");
    write_file(&evidence, EVIDENCE);
    write_file(&truth, TRUTH);
    let out = dir.path().join("out");

    let output = run_cli([
        "run",
        "--evidence",
        evidence.to_str().unwrap(),
        "--truth",
        truth.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));

    let outcomes = fs::read_to_string(out.join("outcomes.csv")).unwrap();
    // b1: only i1 passes the gate, fused 0.9 -> MD. b2: fused 0.05 -> NMD.
    assert!(outcomes.contains("b1,damage,positive,0.900000,1"));
    assert!(outcomes.contains("b2,damage,negative,0.050000,1"));
    // Elevation mean 0.6 falls inside the [0.3, 0.7] reject region.
    assert!(outcomes.contains("b2,elevation,no_decision,0.600000,2"));
    assert!(outcomes.contains("b1,elevation,no_evidence,,0"));

    let confusion = fs::read_to_string(out.join("confusion_damage.csv")).unwrap();
    assert!(confusion.starts_with("truth,no_OV,ND,MD,NMD,all\n"));
    assert!(confusion.contains("MD,0,0,1,0,1"));
    assert!(confusion.contains("NMD,0,0,0,1,1"));
}

#[test]
fn run_supports_structured_output() {
    let dir = tempfile::tempdir().unwrap();
    let evidence = dir.path().join("evidence.csv");
    write_file(&evidence, EVIDENCE);
    let out = dir.path().join("out");

    let output = run_cli([
        "run",
        "--evidence",
        evidence.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--format",
        "structured",
    ]);
    assert!(output.status.success());
    let text = fs::read_to_string(out.join("outcomes.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(value["outcomes"].as_array().unwrap().len() >= 4);
    let confusion = fs::read_to_string(out.join("confusion_damage.json")).unwrap();
    assert!(serde_json::from_str::<serde_json::Value>(&confusion).is_ok());
}

#[test]
fn report_rebuilds_matrices_from_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    let evidence = dir.path().join("evidence.csv");
    let truth = dir.path().join("truth.csv");
    write_file(&evidence, EVIDENCE);
    write_file(&truth, TRUTH);
    let run_out = dir.path().join("run");
    assert!(run_cli([
        "run",
        "--evidence",
        evidence.to_str().unwrap(),
        "--truth",
        truth.to_str().unwrap(),
        "--out",
        run_out.to_str().unwrap(),
    ])
    .status
    .success());

    let report_out = dir.path().join("report");
    let output = run_cli([
        "report",
        "--outcomes",
        run_out.join("outcomes.csv").to_str().unwrap(),
        "--truth",
        truth.to_str().unwrap(),
        "--out",
        report_out.to_str().unwrap(),
        "--bins",
        "5",
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));

    let direct = fs::read_to_string(run_out.join("confusion_damage.csv")).unwrap();
    let rebuilt = fs::read_to_string(report_out.join("confusion_damage.csv")).unwrap();
    assert_eq!(direct, rebuilt);

    let histogram = fs::read_to_string(report_out.join("histogram_damage.csv")).unwrap();
    assert!(histogram.starts_with("truth,decision,bin_lo,bin_hi,count\n"));
    assert!(histogram.contains("MD,MD,0.800000,1.000000,1"));
}

#[test]
fn sweep_validates_its_grid() {
    let dir = tempfile::tempdir().unwrap();
    let evidence = dir.path().join("evidence.csv");
    write_file(&evidence, EVIDENCE);
    let out = dir.path().join("sweep.csv");

    let output = run_cli([
        "sweep",
        "--evidence",
        evidence.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--alpha1",
        "0.3,0.2",
    ]);
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("ascending"));
}

#[test]
fn malformed_input_exits_nonzero_with_line_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let evidence = dir.path().join("evidence.csv");
    write_file(
        &evidence,
        "building_id,image_id,task,p_positive\nb1,i1,damage,1.2\n",
    );
    let output = run_cli([
        "run",
        "--evidence",
        evidence.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("line 2"), "{stderr}");
    assert!(stderr.contains("out of range"), "{stderr}");
}

#[test]
fn conflicting_truth_is_a_named_error() {
    let dir = tempfile::tempdir().unwrap();
    let evidence = dir.path().join("evidence.csv");
    let truth = dir.path().join("truth.csv");
    write_file(&evidence, EVIDENCE);
    write_file(&truth, "building_id,task,label\nb1,damage,MD\nb1,damage,NMD\n");
    let output = run_cli([
        "run",
        "--evidence",
        evidence.to_str().unwrap(),
        "--truth",
        truth.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("b1"));
}
