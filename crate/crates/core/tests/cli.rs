use std::path::Path;
use std::process::{Command, Output};

fn fairsim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairsim"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn fairsim")
}

#[test]
fn run_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = fairsim(
        &["run", "jitter_only", "--races", "300", "--out", "run1", "--plot-data", "--trace"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.path().join("run1");
    for f in ["races.csv", "trades.csv", "fairness.json", "resolved_config.json", "ecdf.csv", "trace.ndjson"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let races = std::fs::read_to_string(run.join("races.csv")).unwrap();
    assert!(races.starts_with("stimulus_id,participant,r_ns,t_e_ns,t_arrival_ns,won"));

    let rep = fairsim(&["report", "run1"], dir.path());
    assert!(rep.status.success());
    assert!(run.join("summary.txt").exists());
}

#[test]
fn resolved_config_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    assert!(fairsim(&["run", "cme_gateway_broadcast", "--races", "200", "--out", "a"], dir.path())
        .status
        .success());
    assert!(fairsim(&["run", "a/resolved_config.json", "--out", "b"], dir.path())
        .status
        .success());
    let a = std::fs::read(dir.path().join("a/races.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/races.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn validate_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(fairsim(&["validate", "batch_window"], dir.path()).status.success());
    std::fs::write(dir.path().join("bad.json"), "{\"name\": 3}").unwrap();
    let bad = fairsim(&["validate", "bad.json"], dir.path());
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).starts_with("error:"));
    assert!(!fairsim(&["run", "no_such_scenario"], dir.path()).status.success());
    assert!(!fairsim(&["sweep", "batch_window", "--param", "name", "--values", "1"], dir.path())
        .status
        .success());
}

#[test]
fn list_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let list = fairsim(&["list"], dir.path());
    assert!(String::from_utf8_lossy(&list.stdout).contains("port_offset_1ms"));
    let sw = fairsim(
        &["sweep", "batch_window", "--param", "remediation.batch.window_ns", "--values", "0,10000", "--seeds", "2", "--races", "200", "--out", "s.csv"],
        dir.path(),
    );
    assert!(sw.status.success(), "{}", String::from_utf8_lossy(&sw.stderr));
    let csv = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}
