//! Full acceptance suite through the binary: one line per criterion.

use std::process::Command;

#[test]
fn acceptance_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_schroreg"))
        .args(["verify", "--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let criteria = report["criteria"].as_array().unwrap();
    for line in stdout.lines().filter(|l| l.starts_with("criterion")) {
        println!("{line}");
    }
    assert_eq!(criteria.len(), 12);
    let failed: Vec<u64> = criteria
        .iter()
        .filter(|c| !c["pass"].as_bool().unwrap())
        .map(|c| c["id"].as_u64().unwrap())
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
    assert_eq!(report["exit_hint"], 0);
    assert_eq!(out.status.code(), Some(0));
}
