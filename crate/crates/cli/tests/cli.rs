//! End-to-end tests of the `exgrade` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use grading_core::calibration::{DynamicsFile, HydraulicFeedForward};
use grading_core::control::ControllerParams;
use grading_core::log::GradingLog;
use serde_json::Value;

fn exgrade(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exgrade")).args(args).output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stdout);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {text}"))
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

fn light_scenario() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/light.toml")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Feed-forward and dynamics for m445, calibrated once through the CLI.
struct Artifacts {
    dir: tempfile::TempDir,
}

impl Artifacts {
    fn ff(&self) -> PathBuf {
        self.dir.path().join("ff.toml")
    }
    fn dynamics(&self) -> PathBuf {
        self.dir.path().join("dynamics.toml")
    }
}

fn m445() -> &'static Artifacts {
    static CELL: OnceLock<Artifacts> = OnceLock::new();
    CELL.get_or_init(|| {
        let a = Artifacts {
            dir: tempfile::tempdir().unwrap(),
        };
        let out = exgrade(&["calibrate", "ls", "--plant", "m445", "--out", s(&a.ff())]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let out = exgrade(&[
            "identify",
            "--plant",
            "m445",
            "--ff",
            s(&a.ff()),
            "--out",
            s(&a.dynamics()),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        a
    })
}

#[test]
fn help_on_every_subcommand() {
    for cmd in [
        &["--help"][..],
        &["calibrate", "--help"],
        &["calibrate", "ls", "--help"],
        &["calibrate", "nfc", "--help"],
        &["identify", "--help"],
        &["steptest", "--help"],
        &["grade", "--help"],
        &["campaign", "--help"],
        &["report", "--help"],
    ] {
        let out = exgrade(cmd);
        assert_eq!(out.status.code(), Some(0), "{cmd:?}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"), "{cmd:?}");
    }
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(exgrade(&[]).status.code(), Some(2));
    let out = exgrade(&[
        "steptest", "--plant", "m445", "--ff", "x", "--joint", "arm", "--out", "y",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_feedforward_file_exits_2_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let ff = dir.path().join("no-such-ff.toml");
    let out = exgrade(&[
        "grade",
        "--scenario",
        s(&light_scenario()),
        "--ff",
        s(&ff),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "io");
    assert!(err["message"].as_str().unwrap().contains(s(&ff)));
}

#[test]
fn unknown_plant_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = exgrade(&[
        "calibrate",
        "ls",
        "--plant",
        "d9",
        "--out",
        s(&dir.path().join("ff.toml")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    stderr_json(&out);
}

#[test]
fn calibrating_with_the_wrong_architecture_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let ff = dir.path().join("ff.toml");
    let out = exgrade(&["calibrate", "nfc", "--plant", "m445", "--out", s(&ff)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "config");
    assert!(!ff.exists());
}

#[test]
fn calibrated_artifacts_round_trip() {
    let a = m445();
    let dir = tempfile::tempdir().unwrap();

    let ff = HydraulicFeedForward::load(&a.ff()).unwrap();
    assert_eq!(ff.machine, "m445");
    let copy = dir.path().join("ff.toml");
    ff.save(&copy).unwrap();
    assert_eq!(HydraulicFeedForward::load(&copy).unwrap(), ff);

    let dynamics = DynamicsFile::load(&a.dynamics()).unwrap();
    let copy = dir.path().join("dynamics.toml");
    dynamics.save(&copy).unwrap();
    assert_eq!(DynamicsFile::load(&copy).unwrap(), dynamics);
}

#[test]
fn grade_writes_a_log_and_prints_metrics() {
    let a = m445();
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &Path| {
        exgrade(&[
            "grade",
            "--scenario",
            s(&light_scenario()),
            "--ff",
            s(&a.ff()),
            "--mpc",
            s(&a.dynamics()),
            "--out",
            s(out),
        ])
    };
    let out = args(&dir.path().join("a"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert_eq!(summary["controller"], "mpc");
    assert_eq!(summary["reason"], "end-of-travel");
    assert!(summary["metrics"]["rmse_height"].as_f64().unwrap() < 0.01);

    let log_path = PathBuf::from(summary["log"].as_str().unwrap());
    let log = GradingLog::load(&log_path).unwrap();
    assert!(log.len() > 100);
    let copy = dir.path().join("copy.csv");
    log.save(&copy).unwrap();
    assert_eq!(std::fs::read(&copy).unwrap(), std::fs::read(&log_path).unwrap());

    let again = args(&dir.path().join("b"));
    assert!(again.status.success());
    let again_log = PathBuf::from(stdout_json(&again)["log"].as_str().unwrap());
    assert_eq!(std::fs::read(&again_log).unwrap(), std::fs::read(&log_path).unwrap());
}

#[test]
fn grade_with_the_baseline_controller() {
    let a = m445();
    let dir = tempfile::tempdir().unwrap();
    let out = exgrade(&[
        "grade",
        "--scenario",
        s(&light_scenario()),
        "--ff",
        s(&a.ff()),
        "--dynamics",
        s(&a.dynamics()),
        "--controller",
        "baseline",
        "--out",
        s(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert_eq!(summary["controller"], "baseline");
    assert!(Path::new(summary["scan"].as_str().unwrap()).exists());
}

#[test]
fn steptest_prints_a_fit() {
    let a = m445();
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("params.toml");
    ControllerParams::default().save(&params).unwrap();
    let log = dir.path().join("step.csv");
    let out = exgrade(&[
        "steptest",
        "--plant",
        "m445",
        "--ff",
        s(&a.ff()),
        "--params",
        s(&params),
        "--joint",
        "bucket",
        "--rate",
        "0.05",
        "--out",
        s(&log),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fit = &stdout_json(&out)["fit"];
    assert!((fit["k"].as_f64().unwrap() - 1.0).abs() < 0.1);
    assert!(fit["tau"].as_f64().unwrap() > 0.0);
    assert!(log.exists());
}

#[test]
fn report_of_an_empty_campaign_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("manifest.toml"),
        "schema_version = 1\nname = \"empty\"\n",
    )
    .unwrap();
    let out = exgrade(&["report", "--in", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout_json(&out)["passes"], 0);
    assert!(stderr_json(&out)["warning"].is_string());
}

#[test]
fn report_without_a_campaign_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(exgrade(&["report", "--in", s(dir.path())]).status.code(), Some(2));
}

#[test]
fn campaign_then_report_then_a_lost_log() {
    let a = m445();
    let dir = tempfile::tempdir().unwrap();
    let scenario = std::fs::read_to_string(light_scenario()).unwrap();
    let body: String = scenario
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("schema_version"))
        .map(|l| if l == "[soil]" { "[scenario.soil]" } else { l })
        .collect::<Vec<_>>()
        .join("\n");
    let config = format!(
        "schema_version = 1\nname = \"one\"\n\n[[scenario]]\n{body}\n\n[scenario.controller]\nff = {:?}\ndynamics = {:?}\n",
        a.ff(),
        a.dynamics()
    );
    let config_path = dir.path().join("campaign.toml");
    std::fs::write(&config_path, config).unwrap();
    let out_dir = dir.path().join("out");

    let out = exgrade(&["campaign", "--config", s(&config_path), "--out", s(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let first = stdout_json(&out);
    assert_eq!(first["passes"], 2);
    let summary = std::fs::read(out_dir.join("summary.csv")).unwrap();

    let out = exgrade(&["report", "--in", s(&out_dir)]);
    assert!(out.status.success());
    assert_eq!(stdout_json(&out)["aggregates"], first["aggregates"]);
    assert_eq!(std::fs::read(out_dir.join("summary.csv")).unwrap(), summary);

    std::fs::remove_file(out_dir.join("logs/m445-light__baseline.csv")).unwrap();
    let out = exgrade(&["report", "--in", s(&out_dir)]);
    assert_eq!(out.status.code(), Some(1));
    let report = stdout_json(&out);
    assert_eq!(report["passes"], 1);
    assert_eq!(report["missing"].as_array().unwrap().len(), 1);
}
