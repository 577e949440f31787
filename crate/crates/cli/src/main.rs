//! `exgrade`: calibrate the hydraulic feed-forward, identify joint
//! dynamics, run grading passes and campaigns on the simulator, and build
//! reports.
//!
//! Exit status is 0 on success, 1 on a controlled failure and 2 on a
//! configuration error. Failures print one JSON line on stderr:
//! `{"error": <kind>, "message": <text>}`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use grading_core::calibration::procedures::{
    calibrate_ls_plant, calibrate_nfc, identify_dynamics, rate_step_test, RATE_STEP,
};
use grading_core::calibration::{fit_step_response, HydraulicFeedForward};
use grading_core::config::{load_plant, FIXTURE_ENV};
use grading_core::control::ControllerParams;
use grading_core::harness::{
    report, run_campaign, run_scenario, write_campaign, write_scan, BaselineParams, CampaignConfig,
    ControllerArtifacts, ControllerKind, ScenarioConfig, AGGREGATE, SUMMARY,
};
use grading_core::kinematics::{Architecture, Joint};
use grading_core::par::Execution;
use grading_core::sim::SensorNoise;
use grading_core::Error;
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "exgrade",
    version,
    about = "Hydraulics-aware excavator grading on a simulated machine"
)]
#[command(after_help = format!(
    "Machines are named by fixture (`case250`, `m445`) or by path to a plant file. \
     Set {FIXTURE_ENV} to a directory to override the built-in fixtures."
))]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Run everything on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate the hydraulic feed-forward of a simulated machine.
    Calibrate {
        #[command(subcommand)]
        kind: CalibrateKind,
    },
    /// Identify per-joint rate dynamics from closed-loop step tests.
    Identify {
        #[command(flatten)]
        plant: PlantArg,
        /// Calibrated feed-forward file.
        #[arg(long)]
        ff: PathBuf,
        /// Controller parameters (velocity-loop PID); defaults if omitted.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Where to write the dynamics file.
        #[arg(long)]
        out: PathBuf,
        /// Also store the step-test logs in this directory.
        #[arg(long)]
        logs: Option<PathBuf>,
    },
    /// Run one closed-loop rate step test and fit it.
    Steptest {
        #[command(flatten)]
        plant: PlantArg,
        #[arg(long)]
        ff: PathBuf,
        #[arg(long)]
        params: Option<PathBuf>,
        /// Joint to step: boom, stick or bucket.
        #[arg(long, value_parser = parse_joint)]
        joint: Joint,
        /// Target rate after the step [rad/s].
        #[arg(long, default_value_t = RATE_STEP, allow_negative_numbers = true)]
        rate: f64,
        /// Where to write the log (CSV).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one grading pass.
    Grade {
        /// Scenario file.
        #[arg(long)]
        scenario: PathBuf,
        /// Feed-forward file, overriding the scenario's.
        #[arg(long)]
        ff: Option<PathBuf>,
        /// Joint dynamics file for the MPC, overriding the scenario's.
        #[arg(long, visible_alias = "mpc")]
        dynamics: Option<PathBuf>,
        /// Controller parameters, overriding the scenario's.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Controller::Mpc)]
        controller: Controller,
        /// Output directory for the log and surface scan.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a campaign of scenarios with both controllers and report it.
    Campaign {
        /// Campaign file; the built-in ten-pass campaign if omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild summary tables and plots from a campaign directory.
    Report {
        /// Campaign output directory.
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Subcommand)]
enum CalibrateKind {
    /// Load-sensing machine: command sweep to velocity tables.
    Ls(CalibrateArgs),
    /// Negative-flow-control machine: pump probes, orifice fit, 2D tables.
    Nfc(CalibrateArgs),
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    plant: PlantArg,
    /// Where to write the feed-forward file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlantArg {
    /// Plant fixture name or plant file path.
    #[arg(long)]
    plant: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum Controller {
    Mpc,
    Baseline,
}

impl From<Controller> for ControllerKind {
    fn from(c: Controller) -> Self {
        match c {
            Controller::Mpc => ControllerKind::Mpc,
            Controller::Baseline => ControllerKind::Baseline,
        }
    }
}

fn parse_joint(s: &str) -> Result<Joint, String> {
    Joint::parse(s).ok_or_else(|| format!("unknown joint `{s}` (boom, stick, bucket)"))
}

/// A run that finished but should not count as a success.
struct Warning(String);

type Outcome = grading_core::Result<Option<Warning>>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match run(cli.command, exec) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(Warning(message))) => {
            eprintln!("{}", json!({ "warning": message }));
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}

fn run(command: Command, exec: Execution) -> Outcome {
    match command {
        Command::Calibrate { kind } => calibrate(kind, exec),
        Command::Identify {
            plant,
            ff,
            params,
            out,
            logs,
        } => identify(&plant.plant, &ff, params.as_deref(), &out, logs.as_deref(), exec),
        Command::Steptest {
            plant,
            ff,
            params,
            joint,
            rate,
            out,
        } => steptest(&plant.plant, &ff, params.as_deref(), joint, rate, &out),
        Command::Grade {
            scenario,
            ff,
            dynamics,
            params,
            controller,
            out,
        } => grade(&scenario, ff, dynamics, params, controller.into(), &out, exec),
        Command::Campaign { config, out } => campaign(config.as_deref(), &out, exec),
        Command::Report { input } => report_dir(&input),
    }
}

fn print(value: serde_json::Value) {
    println!("{value}");
}

fn to_json<T: serde::Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("plain data serializes")
}

fn load_params(path: Option<&Path>) -> grading_core::Result<ControllerParams> {
    path.map_or_else(|| Ok(ControllerParams::default()), ControllerParams::load)
}

fn calibrate(kind: CalibrateKind, exec: Execution) -> Outcome {
    let (args, want) = match &kind {
        CalibrateKind::Ls(a) => (a, Architecture::Ls),
        CalibrateKind::Nfc(a) => (a, Architecture::Nfc),
    };
    let plant = load_plant(&args.plant.plant)?;
    if plant.machine.architecture != want {
        return Err(Error::Config(format!(
            "machine `{}` has {} hydraulics; use `calibrate {}`",
            plant.machine.name,
            to_json(&plant.machine.architecture).as_str().unwrap_or("other"),
            if want == Architecture::Ls { "nfc" } else { "ls" }
        )));
    }
    let noise = SensorNoise::NONE;
    let (ff, details) = match kind {
        CalibrateKind::Ls(_) => (calibrate_ls_plant(&plant, &noise, exec)?, json!({})),
        CalibrateKind::Nfc(_) => {
            let cal = calibrate_nfc(&plant, &noise, exec)?;
            let joints: serde_json::Map<String, serde_json::Value> = Joint::ALL
                .iter()
                .map(|&j| {
                    let [ext, ret] = &cal.joints[j];
                    let d = |c: &grading_core::calibration::procedures::NfcDirectionCalibration| {
                        json!({ "pump_borrowed": c.pump_borrowed, "orifice_cost": c.orifice.cost })
                    };
                    (j.name().to_string(), json!({ "extend": d(ext), "retract": d(ret) }))
                })
                .collect();
            (cal.feedforward, serde_json::Value::Object(joints))
        }
    };
    ff.save(&args.out)?;
    print(json!({
        "feedforward": args.out,
        "machine": ff.machine,
        "architecture": ff.architecture,
        "dataset_sha256": ff.provenance.dataset_sha256,
        "joints": details,
    }));
    Ok(None)
}

fn identify(
    plant_ref: &str,
    ff: &Path,
    params: Option<&Path>,
    out: &Path,
    logs: Option<&Path>,
    exec: Execution,
) -> Outcome {
    let plant = load_plant(plant_ref)?;
    let ff = HydraulicFeedForward::load(ff)?;
    let params = load_params(params)?;
    let (dynamics, step_logs) = identify_dynamics(&plant, &ff, &params.pid, &SensorNoise::NONE, exec)?;
    dynamics.save(out)?;
    if let Some(dir) = logs {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.into(),
            source: e,
        })?;
        for j in Joint::ALL {
            step_logs[j].save(&dir.join(format!("step_{j}.csv")))?;
        }
    }
    print(json!({ "dynamics": out, "joints": to_json(&dynamics.joints) }));
    Ok(None)
}

fn steptest(plant_ref: &str, ff: &Path, params: Option<&Path>, joint: Joint, rate: f64, out: &Path) -> Outcome {
    let plant = load_plant(plant_ref)?;
    let ff = HydraulicFeedForward::load(ff)?;
    let params = load_params(params)?;
    let log = rate_step_test(&plant, &ff, &params.pid, joint, rate, &SensorNoise::NONE)?;
    log.save(out)?;
    let fit = fit_step_response(&log, joint)?;
    print(json!({ "log": out, "joint": joint.name(), "fit": to_json(&fit) }));
    Ok(None)
}

fn grade(
    scenario: &Path,
    ff: Option<PathBuf>,
    dynamics: Option<PathBuf>,
    params: Option<PathBuf>,
    kind: ControllerKind,
    out: &Path,
    exec: Execution,
) -> Outcome {
    let mut s = ScenarioConfig::load(scenario)?;
    for (slot, value) in [
        (&mut s.controller.ff, ff),
        (&mut s.controller.dynamics, dynamics),
        (&mut s.controller.params, params),
    ] {
        if value.is_some() {
            *slot = value;
        }
    }
    let artifacts = ControllerArtifacts::for_files(&s.plant, &s.controller, exec)?;
    let record = run_scenario(&s, kind, &artifacts, &BaselineParams::default())?;
    std::fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.into(),
        source: e,
    })?;
    let id = record.id();
    let log_path = out.join(format!("{id}.csv"));
    record.log.save(&log_path)?;
    let scan_path = out.join(format!("{id}.scan.csv"));
    write_scan(&scan_path, &record.scan)?;
    print(json!({
        "scenario": s.name,
        "controller": kind.name(),
        "reason": to_json(&record.reason),
        "log": log_path,
        "scan": scan_path,
        "metrics": to_json(&record.metrics),
    }));
    Ok(None)
}

fn campaign(config: Option<&Path>, out: &Path, exec: Execution) -> Outcome {
    let config = match config {
        Some(p) => CampaignConfig::load(p)?,
        None => CampaignConfig::shipped(),
    };
    let result = run_campaign(&config, exec)?;
    let report = write_campaign(&result, out)?;
    summarize(&report, out)
}

fn report_dir(dir: &Path) -> Outcome {
    let report = report(dir)?;
    summarize(&report, dir)
}

fn summarize(report: &grading_core::harness::Report, dir: &Path) -> Outcome {
    let aggregates: serde_json::Map<String, serde_json::Value> = report
        .aggregates
        .iter()
        .map(|a| (a.controller.name().to_string(), to_json(&a.metrics)))
        .collect();
    print(json!({
        "summary": dir.join(SUMMARY),
        "aggregate": dir.join(AGGREGATE),
        "passes": report.rows.len(),
        "aggregates": aggregates,
        "missing": report.missing,
    }));
    if report.rows.is_empty() {
        return Ok(Some(Warning("no runs to report".into())));
    }
    if !report.missing.is_empty() {
        return Ok(Some(Warning(format!(
            "{} runs could not be read",
            report.missing.len()
        ))));
    }
    Ok(None)
}
