use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::Provenance;
use crate::config::{read_versioned, write_toml, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::kinematics::{Joint, PerJoint};
use crate::log::GradingLog;

/// Second-order joint velocity model with dead time:
/// `v̈ = −2ζω·v̇ − ω²·v + K·ω²·u(t − τ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointDynamicsFit {
    pub k: f64,
    pub zeta: f64,
    pub omega_n: f64,
    /// Dead time [s].
    pub tau: f64,
    /// RMS of the fit residual [rad/s].
    pub fit_residual: f64,
}

impl JointDynamicsFit {
    pub fn validate(&self) -> Result<()> {
        if self.k > 0.0 && self.zeta > 0.0 && self.omega_n > 0.0 && self.tau >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidModel(format!(
                "joint dynamics need K, ζ, ω_n > 0 and τ ≥ 0, got {self:?}"
            )))
        }
    }
}

/// Identified dynamics of all joints, as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsFile {
    pub schema_version: u32,
    pub machine: String,
    pub provenance: Provenance,
    pub joints: PerJoint<JointDynamicsFit>,
}

impl DynamicsFile {
    pub fn new(machine: &str, joints: PerJoint<JointDynamicsFit>, dataset_sha256: String) -> Self {
        DynamicsFile {
            schema_version: SCHEMA_VERSION,
            machine: machine.to_string(),
            provenance: Provenance::today(dataset_sha256),
            joints,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_toml(self, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f: DynamicsFile = read_versioned(path)?;
        for j in Joint::ALL {
            f.joints[j].validate().map_err(|e| Error::Parse {
                path: path.into(),
                message: e.to_string(),
            })?;
        }
        Ok(f)
    }
}

/// Exact response of (v, v̇) to a unit input held for `s` seconds from
/// rest, and the one-step transition for spacing `h`.
fn propagate(zeta: f64, omega: f64, gain: f64, s: f64) -> (Matrix3<f64>, Vector3<f64>) {
    let m = Matrix3::new(
        0.0,
        1.0,
        0.0,
        -omega * omega,
        -2.0 * zeta * omega,
        gain * omega * omega,
        0.0,
        0.0,
        0.0,
    );
    let e = (m * s).exp();
    (e, Vector3::new(e[(0, 2)], e[(1, 2)], 1.0))
}

/// Velocity response to a step of size `u` applied at time 0, sampled at
/// `t` (sorted). Samples before `τ` are zero.
pub fn step_response(fit: &JointDynamicsFit, u: f64, t: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(t.len());
    let mut state: Option<(f64, Vector3<f64>)> = None;
    let mut cached: Option<(f64, Matrix3<f64>)> = None;
    for &tk in t {
        let s = tk - fit.tau;
        if s < 0.0 {
            out.push(0.0);
            continue;
        }
        let next = match state {
            None => propagate(fit.zeta, fit.omega_n, fit.k, s).1,
            Some((t_prev, x)) => {
                let h = tk - t_prev;
                let phi = match cached {
                    Some((hc, p)) if (hc - h).abs() < 1e-12 => p,
                    _ => {
                        let p = propagate(fit.zeta, fit.omega_n, fit.k, h).0;
                        cached = Some((h, p));
                        p
                    }
                };
                phi * x
            }
        };
        state = Some((tk, next));
        out.push(next[0] * u);
    }
    out
}

fn rms(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(1) as f64;
    (a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n).sqrt()
}

fn model(p: &Vector3<f64>, tau: f64) -> JointDynamicsFit {
    JointDynamicsFit {
        k: p[0].exp(),
        zeta: p[1].exp(),
        omega_n: p[2].exp(),
        tau,
        fit_residual: 0.0,
    }
}

/// Levenberg–Marquardt on (ln K, ln ζ, ln ω) at fixed dead time.
fn fit_at_tau(t: &[f64], y: &[f64], u: f64, tau: f64, start: Vector3<f64>) -> (Vector3<f64>, f64) {
    let resid = |p: &Vector3<f64>| -> Vec<f64> {
        let r = step_response(&model(p, tau), u, t);
        r.iter().zip(y).map(|(m, d)| m - d).collect()
    };
    let cost = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
    let mut p = start;
    let mut r = resid(&p);
    let mut c = cost(&r);
    let mut lambda: f64 = 1e-3;
    for _ in 0..200 {
        let mut jac = vec![[0.0; 3]; r.len()];
        for i in 0..3 {
            let h = 1e-6;
            let mut q = p;
            q[i] += h;
            let rq = resid(&q);
            for (k, row) in jac.iter_mut().enumerate() {
                row[i] = (rq[k] - r[k]) / h;
            }
        }
        let mut jtj = Matrix3::<f64>::zeros();
        let mut jtr = Vector3::<f64>::zeros();
        for (row, rk) in jac.iter().zip(&r) {
            for a in 0..3 {
                jtr[a] += row[a] * rk;
                for b in 0..3 {
                    jtj[(a, b)] += row[a] * row[b];
                }
            }
        }
        let mut improved = false;
        for _ in 0..20 {
            let mut damped = jtj;
            for a in 0..3 {
                damped[(a, a)] += lambda * jtj[(a, a)].max(1e-12);
            }
            let Some(step) = damped.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let q = p + step.map(|v| v.clamp(-1.0, 1.0));
            let rq = resid(&q);
            let cq = cost(&rq);
            if cq.is_finite() && cq < c {
                let done = (c - cq) <= 1e-14 * c.max(1e-300) || step.norm() < 1e-12;
                p = q;
                r = rq;
                c = cq;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if done {
                    return (p, c);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (p, c)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// Fits the joint model to a step response sampled at `t` (seconds after
/// the step) for a step of size `u`. The dead time is searched on the
/// sample grid from zero to the 10 % threshold crossing, then refined
/// continuously by golden section, with (K, ζ, ω_n) fitted by least
/// squares at each candidate.
pub fn fit_step_samples(t: &[f64], y: &[f64], u: f64) -> Result<JointDynamicsFit> {
    if t.len() != y.len() || t.len() < 10 || u == 0.0 {
        return Err(Error::DataQuality(
            "step fit needs at least 10 samples and a non-zero step".into(),
        ));
    }
    let end = t[t.len() - 1];
    if end < 3.0 {
        return Err(Error::RunTooShort {
            command: u,
            duration: end,
            required: 3.0,
        });
    }
    let tail = |a: f64, b: f64| -> Vec<f64> {
        t.iter()
            .zip(y)
            .filter(|(tk, _)| **tk > end - a && **tk <= end - b)
            .map(|(_, v)| *v)
            .collect()
    };
    let last = tail(1.0, 0.0);
    let final_value = mean(&last);
    let drift = (mean(&tail(0.5, 0.0)) - mean(&tail(1.0, 0.5))).abs();
    let spread = (last.iter().map(|v| (v - final_value).powi(2)).sum::<f64>() / last.len() as f64).sqrt();
    if final_value * u <= 0.0 || drift > 0.02 * final_value.abs() || spread > 0.05 * final_value.abs() {
        return Err(Error::FitDivergence(
            "response does not settle to a steady value".into(),
        ));
    }

    let crossing = t
        .iter()
        .zip(y)
        .find(|(_, v)| (*v / final_value) >= 0.1)
        .map(|(tk, _)| *tk)
        .unwrap_or(0.0);
    let half = t
        .iter()
        .zip(y)
        .find(|(_, v)| (*v / final_value) >= 0.5)
        .map(|(tk, _)| *tk)
        .unwrap_or(crossing);
    let dt = (t[1] - t[0]).max(1e-6);

    let k0 = (final_value / u).ln();
    let fit_tau = |tau: f64| -> (Vector3<f64>, f64) {
        let rise = (half - tau).max(dt);
        [0.5f64, 1.0, 2.0]
            .iter()
            .map(|&z| {
                let omega = (1.7 * z.max(1.0) / rise).max(1e-3);
                fit_at_tau(t, y, u, tau, Vector3::new(k0, z.ln(), omega.ln()))
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((Vector3::zeros(), f64::INFINITY))
    };

    let n_grid = (crossing / dt).floor() as usize;
    let mut best = (0.0, fit_tau(0.0));
    for i in 1..=n_grid {
        let tau = i as f64 * dt;
        let r = fit_tau(tau);
        if r.1 < best.1 .1 {
            best = (tau, r);
        }
    }
    // Golden-section refinement of τ within one sample of the grid optimum.
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = ((best.0 - dt).max(0.0), (best.0 + dt).min(crossing.max(dt)));
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (fit_tau(c), fit_tau(d));
    for _ in 0..30 {
        if fc.1 < fd.1 {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = fit_tau(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = fit_tau(d);
        }
    }
    for (tau, r) in [(c, fc), (d, fd)] {
        if r.1 < best.1 .1 {
            best = (tau, r);
        }
    }
    let (tau, (p, _)) = best;
    let mut fit = model(&p, tau);
    let pred = step_response(&fit, u, t);
    fit.fit_residual = rms(&pred, y);
    if !fit.fit_residual.is_finite() || fit.validate().is_err() {
        return Err(Error::FitDivergence(format!("step fit produced {fit:?}")));
    }
    Ok(fit)
}

/// Fits one joint's dynamics from a logged joint-rate step: the step time
/// and size are read from the target-rate column, the response from the
/// measured rate.
pub fn fit_step_response(log: &GradingLog, joint: Joint) -> Result<JointDynamicsFit> {
    let first = log.rows.first().ok_or(Error::EmptyWindow { lo: 0.0, hi: 0.0 })?;
    let u0 = first.target_rate()[joint];
    let onset_idx = log
        .rows
        .iter()
        .position(|r| r.target_rate()[joint] != u0)
        .ok_or_else(|| Error::DataQuality(format!("no rate step on {joint}")))?;
    let onset = log.rows[onset_idx].time;
    let u = log.rows[onset_idx].target_rate()[joint] - u0;
    let before: Vec<f64> = log.rows[..onset_idx].iter().map(|r| r.theta_dot()[joint]).collect();
    let base = if before.is_empty() { 0.0 } else { mean(&before) };
    // The first rate reflecting the new target is the row after onset.
    let (t, y): (Vec<f64>, Vec<f64>) = log.rows[onset_idx..]
        .iter()
        .map(|r| (r.time - onset, r.theta_dot()[joint] - base))
        .unzip();
    fit_step_samples(&t, &y, u)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn closed_form(k: f64, z: f64, w: f64, s: f64) -> f64 {
        // Underdamped unit-step response.
        let wd = w * (1.0 - z * z).sqrt();
        k * (1.0 - (-z * w * s).exp() * ((wd * s).cos() + z / (1.0 - z * z).sqrt() * (wd * s).sin()))
    }

    #[test]
    fn response_matches_closed_form() {
        let fit = JointDynamicsFit {
            k: 1.3,
            zeta: 0.6,
            omega_n: 5.0,
            tau: 0.13,
            fit_residual: 0.0,
        };
        let t: Vec<f64> = (0..300).map(|k| k as f64 * 0.01).collect();
        let r = step_response(&fit, 0.5, &t);
        for (tk, v) in t.iter().zip(&r) {
            let expect = if *tk < 0.13 {
                0.0
            } else {
                0.5 * closed_form(1.3, 0.6, 5.0, tk - 0.13)
            };
            assert!((v - expect).abs() < 1e-10, "{tk}: {v} vs {expect}");
        }
    }

    #[test]
    fn steady_state_is_gain_times_step() {
        let fit = JointDynamicsFit {
            k: 0.8,
            zeta: 1.5,
            omega_n: 3.0,
            tau: 0.0,
            fit_residual: 0.0,
        };
        let r = step_response(&fit, 0.05, &[30.0]);
        assert!((r[0] - 0.04).abs() < 1e-12);
    }
}
