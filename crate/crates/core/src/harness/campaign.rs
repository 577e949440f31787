use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::baseline::{BaselineController, BaselineParams};
use super::metrics::{aggregate, evaluate_pass, AggregateMetrics, PassMetrics};
use super::scenario::{ControllerArtifacts, ScenarioConfig};
use super::surface::{evaluate_surface, SurfaceReport};
use crate::config::{read_versioned, SCHEMA_VERSION};
use crate::control::{grading_pass, GradingController, TerminationReason};
use crate::error::{Error, Result};
use crate::log::GradingLog;
use crate::par::{self, Execution};
use crate::sim::scan_surface;

/// Which controller drove a pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerKind {
    Mpc,
    Baseline,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 2] = [ControllerKind::Mpc, ControllerKind::Baseline];

    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Mpc => "mpc",
            ControllerKind::Baseline => "baseline",
        }
    }
}

/// A set of scenarios run with both controllers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub baseline: Option<BaselineParams>,
    #[serde(rename = "scenario")]
    pub scenarios: Vec<ScenarioConfig>,
}

impl CampaignConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let mut c: CampaignConfig = read_versioned(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for s in &mut c.scenarios {
            s.resolve_paths(base);
        }
        c.validate().map_err(|e| Error::Parse {
            path: path.into(),
            message: e.to_string(),
        })?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.scenarios {
            s.validate()?;
            if !seen.insert(s.name.as_str()) {
                return Err(Error::Config(format!("duplicate scenario name `{}`", s.name)));
            }
        }
        Ok(())
    }

    /// The ten-pass campaign shipped with the crate.
    pub fn shipped() -> Self {
        let (text, path) = crate::config::fixture_text("campaign.toml").expect("campaign fixture is embedded");
        let c: CampaignConfig = crate::config::parse_versioned(&text, &path).expect("campaign fixture parses");
        debug_assert_eq!(c.schema_version, SCHEMA_VERSION);
        c
    }
}

/// One pass with its scores.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub scenario: ScenarioConfig,
    pub controller: ControllerKind,
    pub log: GradingLog,
    pub reason: TerminationReason,
    pub metrics: PassMetrics,
    /// Final soil profile `(x, h)`.
    pub scan: Vec<[f64; 2]>,
    pub surface: SurfaceReport,
}

impl RunRecord {
    /// Stable identifier, also used for file names.
    pub fn id(&self) -> String {
        format!("{}__{}", self.scenario.name, self.controller.name())
    }
}

/// Resolution of the post-pass surface scan [m].
pub const SCAN_RESOLUTION: f64 = 0.05;

/// Runs one scenario with the given controller.
pub fn run_scenario(
    scenario: &ScenarioConfig,
    kind: ControllerKind,
    artifacts: &ControllerArtifacts,
    baseline: &BaselineParams,
) -> Result<RunRecord> {
    let setup = scenario.setup()?;
    let machine = &setup.plant.machine;
    let outcome = match kind {
        ControllerKind::Mpc => {
            let mut c = GradingController::new(
                machine,
                artifacts.ff.clone(),
                artifacts.dynamics.joints,
                &artifacts.params,
                scenario.surface,
            )?;
            grading_pass(&setup, &mut c)?
        }
        ControllerKind::Baseline => {
            let mut c = BaselineController::new(machine, scenario.surface, *baseline)?;
            grading_pass(&setup, &mut c)?
        }
    };
    let metrics = evaluate_pass(&outcome.log, &scenario.surface, &scenario.window, &scenario.termination)?;
    let scan = scan_surface(&outcome.final_state, SCAN_RESOLUTION);
    let surface = graded_surface(&outcome.log, scenario, &scan);
    Ok(RunRecord {
        scenario: scenario.clone(),
        controller: kind,
        log: outcome.log,
        reason: outcome.reason,
        metrics,
        scan,
        surface,
    })
}

/// Surface statistics over the stretch the blade covered inside the
/// evaluation window.
pub fn graded_surface(log: &GradingLog, scenario: &ScenarioConfig, scan: &[[f64; 2]]) -> SurfaceReport {
    let x_start = log.rows.first().map_or(scenario.start.x, |r| r.ee_x);
    let (lo, hi) = log
        .rows
        .iter()
        .filter(|r| scenario.window.contains(r.ee_x, x_start, scenario.surface.v_x))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.ee_x), hi.max(r.ee_x))
        });
    evaluate_surface(scan, &scenario.surface, lo, hi)
}

#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub name: String,
    /// Every pass, ordered by scenario then controller.
    pub runs: Vec<RunRecord>,
}

impl CampaignResult {
    pub fn aggregate(&self, kind: ControllerKind) -> AggregateMetrics {
        aggregate(self.runs.iter().filter(|r| r.controller == kind).map(|r| &r.metrics))
    }
}

/// Calibrates each distinct plant once, then runs every scenario with both
/// controllers. Passes are independent and run in parallel under
/// `Execution::Parallel`; results do not depend on the schedule.
pub fn run_campaign(config: &CampaignConfig, exec: Execution) -> Result<CampaignResult> {
    config.validate()?;
    let mut keys: BTreeMap<String, (String, super::scenario::ControllerFiles)> = BTreeMap::new();
    for s in &config.scenarios {
        keys.entry(artifact_key(s))
            .or_insert_with(|| (s.plant.clone(), s.controller.clone()));
    }
    let entries: Vec<_> = keys.into_iter().collect();
    let calibrated = par::map(exec, &entries, |(_, (plant, files))| {
        ControllerArtifacts::for_files(plant, files, Execution::Sequential)
    });
    let mut artifacts = BTreeMap::new();
    for ((key, _), a) in entries.into_iter().zip(calibrated) {
        artifacts.insert(key, a?);
    }
    let baseline = config.baseline.unwrap_or_default();
    let jobs: Vec<(usize, ControllerKind)> = (0..config.scenarios.len())
        .flat_map(|i| ControllerKind::ALL.map(|k| (i, k)))
        .collect();
    let runs = par::map(exec, &jobs, |&(i, kind)| {
        let s = &config.scenarios[i];
        run_scenario(s, kind, &artifacts[&artifact_key(s)], &baseline)
    });
    Ok(CampaignResult {
        name: config.name.clone(),
        runs: runs.into_iter().collect::<Result<_>>()?,
    })
}

fn artifact_key(s: &ScenarioConfig) -> String {
    format!("{}|{:?}", s.plant, s.controller)
}
