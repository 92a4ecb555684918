use std::process::Command;

fn nodal() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nodal"))
}

#[test]
fn solve_writes_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.json");
    let st = nodal()
        .args(["solve", "--mesh", "interval:128", "--p", "3", "--q", "4", "--mu", "0", "--kappa", "1", "--eps", "0", "--n-starts", "2", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(0), "{}", String::from_utf8_lossy(&st.stderr));
    let rec: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(rec["schema_version"], 1);
    assert_eq!(rec["status"], "ok");
    assert_eq!(rec["problem"]["mesh"]["kind"], "interval");
    assert_eq!(rec["result"]["morse_index"], 2);
    assert_eq!(rec["result"]["nodal_domains"], 2);
    assert_eq!(rec["solution"]["coeffs"].as_array().unwrap().len(), 129);
}

#[test]
fn p_two_is_rejected() {
    let st = nodal().args(["solve", "--p", "2"]).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
}

#[test]
fn unknown_flag_prints_usage() {
    let st = nodal().args(["solve", "--bogus", "1"]).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&st.stderr).contains("Usage"));
}

#[test]
fn bad_mesh_spec_is_rejected() {
    let st = nodal().args(["eigen", "--p", "2", "--mesh", "triangle:4"]).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
    let st = nodal().args(["eigen", "--p", "2", "--mesh", "interval:1"]).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
}

#[test]
fn eigen_prints_pi_squared() {
    let st = nodal().args(["eigen", "--p", "2", "--mesh", "interval:256"]).output().unwrap();
    assert_eq!(st.status.code(), Some(0));
    let text = String::from_utf8_lossy(&st.stdout);
    let lambda: f64 = text.trim().rsplit(' ').next().unwrap().parse().unwrap();
    let pi2 = std::f64::consts::PI.powi(2);
    assert!((lambda - pi2).abs() < 5e-3 * pi2, "{lambda}");
}

#[test]
fn validate_reports_hypotheses() {
    let st = nodal().args(["validate", "--mesh", "interval:64"]).output().unwrap();
    assert_eq!(st.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&st.stdout).unwrap();
    assert_eq!(v["all_pass"], true);
    assert_eq!(v["m"], 4.0);
    let st = nodal().args(["validate", "--mesh", "interval:64", "--mu", "1000"]).output().unwrap();
    assert_eq!(st.status.code(), Some(1));
}

#[test]
fn sweep_writes_records_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let st = nodal()
        .args(["sweep", "--mesh", "interval:64", "--eps-grid", "0,0.1,0.2", "--n-starts", "2", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(0), "{}", String::from_utf8_lossy(&st.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(dir.path().join("run_002.json").exists());
    let v: serde_json::Value = serde_json::from_slice(&st.stdout).unwrap();
    assert_eq!(v["monotone"], true);
}

#[test]
fn sweep_grid_must_start_at_zero() {
    let st = nodal().args(["sweep", "--mesh", "interval:32", "--eps-grid", "0.1,0.2"]).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
}
