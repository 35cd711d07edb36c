use std::process::Command;

fn mhess(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_mhess")).args(args).output().unwrap()
}

#[test]
fn solve_default_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = mhess(&["solve", "--quiet", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "pass");
    assert_eq!(summary["kappa"], 1.0);
    for f in summary["files"].as_array().unwrap() {
        assert!(dir.path().join(f.as_str().unwrap()).exists(), "{f}");
    }
}

#[test]
fn oracle_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = mhess(&["oracle-suite", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("[PASS] oracle/poisson-reduction"));
}

#[test]
fn m_above_n_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"m": 2}"#).unwrap();
    let out = mhess(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("m must lie"));
}

#[test]
fn unknown_keys_and_functions_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for (i, body) in [
        r#"{"colour": 1}"#,
        r#"{"functions": {"g": "nope"}}"#,
        r#"{"resolutions": [0.01, 0.02]}"#,
        r#"{"tolerances": {"sweep": -1}}"#,
        "not json",
    ]
    .iter()
    .enumerate()
    {
        let cfg = dir.path().join(format!("c{i}.json"));
        std::fs::write(&cfg, body).unwrap();
        let out = mhess(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{body}");
    }
}

#[test]
fn resolution_override_replaces_ladder() {
    let dir = tempfile::tempdir().unwrap();
    let out = mhess(&["solve", "--quiet", "--resolution-override", "0.0625", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["grids"].as_array().unwrap().len(), 1);
    assert_eq!(summary["config"]["resolutions"][0], 0.0625);
}

#[test]
fn failing_assertion_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    // The quadratic is not the solution for density 2.
    std::fs::write(&cfg, r#"{"f_scale": 2.0, "resolutions": [0.0625]}"#).unwrap();
    let out = mhess(&["solve", "--quiet", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("solve/h0/exact"));
}

#[test]
fn registry_lists_catalog() {
    let out = mhess(&["registry"]);
    assert_eq!(out.status.code(), Some(0));
    let lines: Vec<serde_json::Value> = String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(lines.iter().any(|l| l["name"] == "power-gamma-1/4"));
}
