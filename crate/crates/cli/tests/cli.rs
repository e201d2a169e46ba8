use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn assets() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/assets")
}

fn myoforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_myoforge"))
        .args(args)
        .output()
        .expect("spawn myoforge")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn parse_writes_native_model_equal_to_asset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("elbow.json");
    let o = myoforge(&[
        "parse",
        "--in",
        s(&assets().join("elbow.osim")),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let a = myoforge::model::load_native_model(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let b = myoforge::model::load_native_model(
        &std::fs::read_to_string(assets().join("elbow.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(a, b);
}

#[test]
fn validate_reports_ok_and_violations() {
    let o = myoforge(&["validate", "--in", s(&assets().join("finger.json"))]);
    assert!(o.status.success(), "{}", stderr(&o));

    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(assets().join("elbow.json")).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    let first = doc["muscles"][0]["name"].clone();
    doc["muscles"][1]["name"] = first;
    let bad = dir.path().join("dup.json");
    std::fs::write(&bad, serde_json::to_string(&doc).unwrap()).unwrap();
    let o = myoforge(&["validate", "--in", s(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("muscles[1]: duplicate"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn missing_scenario_is_a_domain_error() {
    let o = myoforge(&["simulate", "--scenario", "missing.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("scenario file not found: missing.json"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(myoforge(&[]).status.code(), Some(2));
    assert_eq!(
        myoforge(&["fit-wrap", "--model", "m.json"]).status.code(),
        Some(2)
    );
    assert_eq!(myoforge(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn simulate_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let o = myoforge(&[
        "simulate",
        "--scenario",
        s(&assets().join("scenarios/elbow_fatigue.json")),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let traj =
        myoforge::dynamics::Trajectory::read_csv(std::fs::File::open(&out).unwrap()).unwrap();
    assert!(traj.len() > 100);
}

#[test]
fn exported_maps_validate_against_their_source() {
    let dir = tempfile::tempdir().unwrap();
    let model = assets().join("elbow.json");
    let arms = dir.path().join("arms.csv");
    let forces = dir.path().join("forces.csv");
    let report = dir.path().join("report.json");
    for args in [
        vec![
            "export-moment-arms",
            "--model",
            s(&model),
            "--points",
            "12",
            "--out",
            s(&arms),
        ],
        vec![
            "export-force-map",
            "--model",
            s(&model),
            "--out",
            s(&forces),
        ],
        vec![
            "validate-model",
            "--model",
            s(&model),
            "--ref",
            s(&model),
            "--moment-arms",
            s(&arms),
            "--force-maps",
            s(&forces),
            "--out",
            s(&report),
        ],
    ] {
        let o = myoforge(&args);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    }
    let r: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["kinematics_rms_m"].as_f64(), Some(0.0));
    assert_eq!(r["moment_arms"]["rms"].as_f64(), Some(0.0));
    assert_eq!(r["forces"]["relative_rms_percent"].as_f64(), Some(0.0));
}

#[test]
fn fit_force_reads_config_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let model = assets().join("elbow.json");
    let forces = dir.path().join("forces.csv");
    assert!(myoforge(&[
        "export-force-map",
        "--model",
        s(&model),
        "--out",
        s(&forces)
    ])
    .status
    .success());
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"budget": 100, "seed": 1}"#).unwrap();
    let out = dir.path().join("fit.json");
    let fitted = dir.path().join("fitted.json");
    let o = myoforge(&[
        "fit-force",
        "--model",
        s(&model),
        "--ref",
        s(&forces),
        "--config",
        s(&cfg),
        "--budget",
        "300",
        "--out",
        s(&out),
        "--out-model",
        s(&fitted),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r["config"]["budget"], 300);
    assert_eq!(r["config"]["seed"], 1);
    assert!(r["residual"].as_f64().unwrap() <= r["initial_residual"].as_f64().unwrap());
    assert!(fitted.exists());

    std::fs::write(&cfg, r#"{"budget": 100, "seed": 1, "typo": 2}"#).unwrap();
    let o = myoforge(&[
        "fit-force",
        "--model",
        s(&model),
        "--ref",
        s(&forces),
        "--config",
        s(&cfg),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bench_rejects_short_runs_and_reports_rows() {
    let model = assets().join("elbow.json");
    let o = myoforge(&["bench", "--model", s(&model), "--steps", "10"]);
    assert_eq!(o.status.code(), Some(1));
    let o = myoforge(&[
        "bench",
        "--model",
        s(&model),
        "--multipliers",
        "1,2",
        "--steps",
        "1000",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["muscle_counts"].as_array().unwrap().len(), 2);
}
