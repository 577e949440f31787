use serde::{Deserialize, Serialize};

use crate::control::{median, DesignSurface, Termination};
use crate::error::{Error, Result};
use crate::log::GradingLog;

/// Half-width of the band around the plane that counts as on target [m].
pub const ON_PLANE_BAND: f64 = 0.02;

/// Which samples of a pass are scored: blade at or closer than `x_max` to
/// the machine, and at least `approach` metres of travel past the start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationWindow {
    pub x_max: f64,
    #[serde(default = "default_approach")]
    pub approach: f64,
}

fn default_approach() -> f64 {
    1.0
}

impl EvaluationWindow {
    /// Whether a blade at `x` is scored, for a pass that started at
    /// `x_start` and travels in direction `sign(v_x)`.
    pub fn contains(&self, x: f64, x_start: f64, v_x: f64) -> bool {
        x <= self.x_max && (x - x_start) * v_x.signum() >= self.approach
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassMetrics {
    /// Height RMSE over the window [m].
    pub rmse_height: f64,
    /// Largest absolute height error over the window [m].
    pub max_deviation: f64,
    /// Deepest excursion below the plane anywhere in the pass [m], zero if
    /// the blade never went below it.
    pub overshoot: f64,
    /// Travel until the blade first entered the on-plane band [m]; `None`
    /// if it never did.
    pub approach_distance: Option<f64>,
    pub stall: bool,
    /// Median over the final stall hold time of the highest function
    /// pressure of a stalled pass [Pa].
    pub stall_pressure: Option<f64>,
    pub end_of_travel: bool,
    /// Samples inside the window.
    pub samples: usize,
    /// Sum of squared errors over the window [m²], for pooling passes.
    pub sum_squared: f64,
}

/// Scores a pass from its log alone. Height errors are recomputed from the
/// logged blade position and `surface`, not read from the log.
pub fn evaluate_pass(
    log: &GradingLog,
    surface: &DesignSurface,
    window: &EvaluationWindow,
    termination: &Termination,
) -> Result<PassMetrics> {
    let empty = || Error::EmptyWindow {
        lo: window.approach,
        hi: window.x_max,
    };
    let first = log.rows.first().ok_or_else(empty)?;
    let last = log.rows.last().ok_or_else(empty)?;
    let x_start = first.ee_x;
    let dir = surface.v_x.signum();

    let mut sum_squared = 0.0;
    let mut max_deviation: f64 = 0.0;
    let mut samples = 0;
    let mut overshoot: f64 = 0.0;
    let mut approach_distance = None;
    for r in &log.rows {
        let e = surface.error([r.ee_x, r.ee_z]);
        overshoot = overshoot.max(-e);
        if approach_distance.is_none() && e.abs() <= ON_PLANE_BAND {
            approach_distance = Some(((r.ee_x - x_start) * dir).max(0.0));
        }
        if window.contains(r.ee_x, x_start, surface.v_x) {
            sum_squared += e * e;
            max_deviation = max_deviation.max(e.abs());
            samples += 1;
        }
    }
    if samples == 0 {
        return Err(empty());
    }
    let stall = last.stalled;
    Ok(PassMetrics {
        rmse_height: (sum_squared / samples as f64).sqrt(),
        max_deviation,
        overshoot,
        approach_distance,
        stall,
        stall_pressure: stall.then(|| final_peak_pressure(log, termination.stall_hold)),
        end_of_travel: !stall && (last.ee_x - termination.x_end) * dir >= 0.0,
        samples,
        sum_squared,
    })
}

/// Pooled statistics over several passes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub passes: usize,
    /// RMSE over all windowed samples of all passes [m].
    pub rmse_height: f64,
    pub max_deviation: f64,
    pub max_overshoot: f64,
    pub stalls: usize,
}

pub fn aggregate<'a>(metrics: impl IntoIterator<Item = &'a PassMetrics>) -> AggregateMetrics {
    let mut out = AggregateMetrics::default();
    let mut sum = 0.0;
    let mut n = 0;
    for m in metrics {
        out.passes += 1;
        sum += m.sum_squared;
        n += m.samples;
        out.max_deviation = out.max_deviation.max(m.max_deviation);
        out.max_overshoot = out.max_overshoot.max(m.overshoot);
        out.stalls += usize::from(m.stall);
    }
    if n > 0 {
        out.rmse_height = (sum / n as f64).sqrt();
    }
    out
}

fn final_peak_pressure(log: &GradingLog, hold: f64) -> f64 {
    let end = log.rows.last().map_or(0.0, |r| r.time);
    let mut peaks: Vec<f64> = log
        .rows
        .iter()
        .filter(|r| r.time >= end - hold + 1e-9)
        .map(|r| r.fn_pressure().to_array().into_iter().fold(f64::MIN, f64::max))
        .collect();
    median(&mut peaks)
}
