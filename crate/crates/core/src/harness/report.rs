use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::campaign::{graded_surface, CampaignResult, ControllerKind};
use super::metrics::{aggregate, evaluate_pass, AggregateMetrics, PassMetrics};
use super::scenario::ScenarioConfig;
use super::surface::SurfaceReport;
use super::svg::{heatmap, line_chart, Series};
use crate::config::{read_versioned, write_toml, SCHEMA_VERSION};
use crate::control::TerminationReason;
use crate::error::{Error, Result};
use crate::log::GradingLog;

pub const MANIFEST: &str = "manifest.toml";
pub const SUMMARY: &str = "summary.csv";
pub const AGGREGATE: &str = "aggregate.csv";

/// Index of the runs stored in a campaign directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub name: String,
    #[serde(default, rename = "run")]
    pub runs: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub controller: ControllerKind,
    pub reason: TerminationReason,
    /// Log path relative to the directory.
    pub log: PathBuf,
    /// Final surface scan `(x, h)` CSV, relative to the directory.
    pub scan: PathBuf,
    pub scenario: ScenarioConfig,
}

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub id: String,
    pub scenario: String,
    pub controller: ControllerKind,
    pub reason: TerminationReason,
    pub rmse_height: f64,
    pub max_deviation: f64,
    pub overshoot: f64,
    pub approach_distance: Option<f64>,
    pub stall: bool,
    pub stall_pressure: Option<f64>,
    pub end_of_travel: bool,
    pub samples: usize,
    pub surface_rms: f64,
    pub surface_peak_to_peak: f64,
    pub surface_oscillation: f64,
    pub surface_coverage: f64,
}

impl SummaryRow {
    fn new(entry: &ManifestEntry, m: &PassMetrics, s: &SurfaceReport) -> Self {
        SummaryRow {
            id: entry.id.clone(),
            scenario: entry.scenario.name.clone(),
            controller: entry.controller,
            reason: entry.reason,
            rmse_height: m.rmse_height,
            max_deviation: m.max_deviation,
            overshoot: m.overshoot,
            approach_distance: m.approach_distance,
            stall: m.stall,
            stall_pressure: m.stall_pressure,
            end_of_travel: m.end_of_travel,
            samples: m.samples,
            surface_rms: s.rms,
            surface_peak_to_peak: s.peak_to_peak,
            surface_oscillation: s.oscillation_amplitude,
            surface_coverage: s.coverage,
        }
    }
}

/// Pooled metrics of one controller, one line of `aggregate.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateRow {
    pub controller: ControllerKind,
    pub metrics: AggregateMetrics,
}

/// The CSV layout of [`AggregateRow`]; the csv crate cannot flatten.
#[derive(Serialize)]
struct AggregateLine {
    controller: ControllerKind,
    passes: usize,
    rmse_height: f64,
    max_deviation: f64,
    max_overshoot: f64,
    stalls: usize,
}

impl From<&AggregateRow> for AggregateLine {
    fn from(a: &AggregateRow) -> Self {
        let m = &a.metrics;
        AggregateLine {
            controller: a.controller,
            passes: m.passes,
            rmse_height: m.rmse_height,
            max_deviation: m.max_deviation,
            max_overshoot: m.max_overshoot,
            stalls: m.stalls,
        }
    }
}

/// What `report` produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub rows: Vec<SummaryRow>,
    pub aggregates: Vec<AggregateRow>,
    /// Runs whose log or scan could not be read, with the reason.
    pub missing: Vec<String>,
}

impl Report {
    pub fn aggregate(&self, kind: ControllerKind) -> Option<AggregateMetrics> {
        self.aggregates.iter().find(|a| a.controller == kind).map(|a| a.metrics)
    }
}

/// Stores logs, scans and the manifest of a campaign under `dir`, then
/// builds the report from those files.
pub fn write_campaign(result: &CampaignResult, dir: &Path) -> Result<Report> {
    for sub in ["logs", "scans"] {
        std::fs::create_dir_all(dir.join(sub)).map_err(|e| Error::io(dir.join(sub), e))?;
    }
    let mut manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        name: result.name.clone(),
        runs: Vec::new(),
    };
    for run in &result.runs {
        let id = run.id();
        let log = PathBuf::from("logs").join(format!("{id}.csv"));
        let scan = PathBuf::from("scans").join(format!("{id}.csv"));
        run.log.save(&dir.join(&log))?;
        write_scan(&dir.join(&scan), &run.scan)?;
        manifest.runs.push(ManifestEntry {
            id,
            controller: run.controller,
            reason: run.reason,
            log,
            scan,
            scenario: run.scenario.clone(),
        });
    }
    write_toml(&manifest, &dir.join(MANIFEST))?;
    report(dir)
}

/// Writes a surface scan `(x, height)` as CSV.
pub fn write_scan(path: &Path, scan: &[[f64; 2]]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "height"])?;
    for p in scan {
        w.serialize(p)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_scan(path: &Path) -> Result<Vec<[f64; 2]>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Recomputes every metric from the stored logs and scans and writes
/// `summary.csv`, `aggregate.csv` and SVG plots into `dir`. Runs with
/// unreadable files are listed in `missing` and left out.
pub fn report(dir: &Path) -> Result<Report> {
    let manifest: RunManifest = read_versioned(&dir.join(MANIFEST))?;
    let plots = dir.join("plots");
    std::fs::create_dir_all(&plots).map_err(|e| Error::io(&plots, e))?;

    let mut rows = Vec::new();
    let mut metrics = Vec::new();
    let mut missing = Vec::new();
    let mut profiles = Vec::new();
    for entry in &manifest.runs {
        let loaded =
            GradingLog::load(&dir.join(&entry.log)).and_then(|log| Ok((log, read_scan(&dir.join(&entry.scan))?)));
        let (log, scan) = match loaded {
            Ok(v) => v,
            Err(e) => {
                log::warn!("run {}: {e}", entry.id);
                missing.push(format!("{}: {e}", entry.id));
                continue;
            }
        };
        let sc = &entry.scenario;
        let m = match evaluate_pass(&log, &sc.surface, &sc.window, &sc.termination) {
            Ok(m) => m,
            Err(e) => {
                missing.push(format!("{}: {e}", entry.id));
                continue;
            }
        };
        let s = graded_surface(&log, sc, &scan);
        rows.push(SummaryRow::new(entry, &m, &s));
        metrics.push((entry.controller, m));
        profiles.push((
            entry.id.clone(),
            s.x.iter().zip(&s.deviation).map(|(x, d)| [*x, *d]).collect::<Vec<_>>(),
        ));
        let svg = pass_chart(&entry.id, &log, sc, &scan);
        let path = plots.join(format!("{}.svg", entry.id));
        std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
    }
    let aggregates: Vec<AggregateRow> = ControllerKind::ALL
        .iter()
        .filter(|k| metrics.iter().any(|(c, _)| c == *k))
        .map(|&k| AggregateRow {
            controller: k,
            metrics: aggregate(metrics.iter().filter(|(c, _)| *c == k).map(|(_, m)| m)),
        })
        .collect();

    write_rows(&dir.join(SUMMARY), &rows)?;
    let lines: Vec<AggregateLine> = aggregates.iter().map(AggregateLine::from).collect();
    write_rows(&dir.join(AGGREGATE), &lines)?;
    let path = plots.join("deviation.svg");
    std::fs::write(
        &path,
        heatmap("Final surface deviation from the target plane", &profiles, 60, 0.05),
    )
    .map_err(|e| Error::io(&path, e))?;
    Ok(Report {
        rows,
        aggregates,
        missing,
    })
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Blade height, target plane and final soil profile against x.
fn pass_chart(id: &str, log: &GradingLog, sc: &ScenarioConfig, scan: &[[f64; 2]]) -> String {
    let blade: Vec<[f64; 2]> = log.rows.iter().step_by(5).map(|r| [r.ee_x, r.ee_z]).collect();
    let (lo, hi) = blade.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        (lo.min(p[0]), hi.max(p[0]))
    });
    let plane = vec![[lo, sc.surface.height_at(lo)], [hi, sc.surface.height_at(hi)]];
    let soil: Vec<[f64; 2]> = scan.iter().filter(|p| p[0] >= lo && p[0] <= hi).copied().collect();
    line_chart(
        id,
        "blade x [m]",
        "height [m]",
        &[
            Series {
                label: "blade",
                color: "#1f77b4",
                points: blade,
            },
            Series {
                label: "target plane",
                color: "#2ca02c",
                points: plane,
            },
            Series {
                label: "soil after pass",
                color: "#8c564b",
                points: soil,
            },
        ],
    )
}
