use std::collections::VecDeque;

use super::cylinder_samples;
use crate::error::Result;
use crate::kinematics::{Joint, MachineModel, PerJoint};
use crate::log::GradingLog;

/// Smoothing window of the acceleration estimate [s].
pub const SAVGOL_WINDOW: f64 = 0.15;

fn ls_slope(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    if t.len() < 2 {
        return 0.0;
    }
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (ti, yi) in t.iter().zip(y) {
        num += (ti - tm) * (yi - ym);
        den += (ti - tm) * (ti - tm);
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Savitzky–Golay first derivative: slope of a local least-squares fit over
/// a centred window of `window` seconds (for a symmetric window the linear
/// and quadratic fits give the same slope). Windows are truncated at the
/// ends of the series.
pub fn derivative_savgol(t: &[f64], y: &[f64], window: f64) -> Vec<f64> {
    let half = window / 2.0;
    let n = t.len();
    let (mut lo, mut hi) = (0usize, 0usize);
    (0..n)
        .map(|k| {
            while t[lo] < t[k] - half - 1e-9 {
                lo += 1;
            }
            while hi + 1 < n && t[hi + 1] <= t[k] + half + 1e-9 {
                hi += 1;
            }
            ls_slope(&t[lo..=hi], &y[lo..=hi])
        })
        .collect()
}

/// Measured cylinder force minus the lumped-inertia reaction `γ·I·θ̈`,
/// per joint and sample. θ̈ is estimated offline from the logged rates.
pub fn compensate_inertia(log: &GradingLog, machine: &MachineModel) -> Result<PerJoint<Vec<f64>>> {
    let t = log.times();
    let mut out: PerJoint<Vec<f64>> = PerJoint::default();
    for j in Joint::ALL {
        let samples = cylinder_samples(log, machine, j)?;
        let rates: Vec<f64> = samples.iter().map(|s| s.theta_dot).collect();
        let acc = derivative_savgol(&t, &rates, SAVGOL_WINDOW);
        let inertia = machine.joints[j].inertia;
        out[j] = samples
            .iter()
            .zip(&acc)
            .map(|(s, a)| s.force - s.gamma * inertia * a)
            .collect();
    }
    Ok(out)
}

/// Online slope estimate over a trailing window, for use inside a control
/// loop where future samples are unavailable.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CausalSlope {
    window: f64,
    buf: VecDeque<(f64, f64)>,
}

impl CausalSlope {
    pub fn new(window: f64) -> Self {
        CausalSlope {
            window,
            buf: VecDeque::new(),
        }
    }

    pub fn push(&mut self, t: f64, y: f64) -> f64 {
        self.buf.push_back((t, y));
        while let Some(&(t0, _)) = self.buf.front() {
            if t0 < t - self.window - 1e-9 {
                self.buf.pop_front();
            } else {
                break;
            }
        }
        self.slope()
    }

    pub fn slope(&self) -> f64 {
        let (t, y): (Vec<f64>, Vec<f64>) = self.buf.iter().copied().unzip();
        ls_slope(&t, &y)
    }

    pub fn reset(&mut self) {
        self.buf.clear();
    }
}
