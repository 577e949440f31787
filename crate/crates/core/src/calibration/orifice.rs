use super::{compensate_inertia, cylinder_samples, CalibrationDataset, Maneuver};
use crate::error::{Error, Result};
use crate::hydraulics::{Direction, OrificeModel, PumpPressureMap};
use crate::kinematics::Joint;
use crate::par::{self, Execution};

/// Time after onset before samples count, letting the spool settle [s].
const SETTLE: f64 = 1.0;
/// Cylinder speed below which a sample carries no flow information [m/s].
const MIN_SPEED: f64 = 1e-3;
const STARTS: usize = 16;
const MAX_ITERATIONS: usize = 4000;

/// One (command, flow, load pressure) observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrificeSample {
    /// Command magnitude.
    pub command: f64,
    /// Flow into the active chamber [m³/s].
    pub flow: f64,
    /// Inertia-compensated load pressure [Pa].
    pub load_pressure: f64,
}

/// Per-command least-squares resistance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResistanceEstimate {
    pub command: f64,
    pub resistance: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrificeFit {
    pub model: OrificeModel,
    /// Σ |log R(x) − log R_test,x| at the optimum.
    pub cost: f64,
    /// Best objective after each iteration of the winning start.
    pub history: Vec<f64>,
    pub estimates: Vec<ResistanceEstimate>,
}

/// Flow and inertia-compensated load pressure of the stall-trajectory and
/// load-configuration runs of one joint and direction.
pub fn orifice_samples(dataset: &CalibrationDataset, joint: Joint, direction: Direction) -> Result<Vec<OrificeSample>> {
    let areas = dataset.machine.joints[joint].areas;
    let area = direction.area(&areas);
    let mut out = Vec::new();
    for run in dataset.runs.iter().filter(|r| {
        r.joint == joint
            && r.direction() == direction
            && matches!(r.maneuver, Maneuver::StallTrajectory | Maneuver::LoadConfiguration)
    }) {
        let samples = cylinder_samples(&run.log, &dataset.machine, joint)?;
        let compensated = compensate_inertia(&run.log, &dataset.machine)?;
        for (s, f) in samples.iter().zip(&compensated[joint]) {
            let v = direction.sign() * s.velocity;
            if s.time < run.onset + SETTLE || v < MIN_SPEED {
                continue;
            }
            out.push(OrificeSample {
                command: run.command.abs(),
                flow: v * area,
                load_pressure: direction.load_pressure(*f, &areas),
            });
        }
    }
    Ok(out)
}

/// `R_test,x = Σ ΔP·Q² / Σ Q⁴` per distinct command, with
/// `ΔP = P_p(x) − P_f`.
pub fn resistance_estimates(samples: &[OrificeSample], pump: &PumpPressureMap) -> Result<Vec<ResistanceEstimate>> {
    let mut commands: Vec<f64> = samples.iter().map(|s| s.command).collect();
    commands.sort_by(f64::total_cmp);
    commands.dedup();
    if commands.len() < 3 {
        return Err(Error::Underdetermined { found: commands.len() });
    }
    commands
        .into_iter()
        .map(|x| {
            let (mut num, mut den, mut n) = (0.0, 0.0, 0);
            for s in samples.iter().filter(|s| s.command == x) {
                let q2 = s.flow * s.flow;
                num += (pump.pressure(x) - s.load_pressure) * q2;
                den += q2 * q2;
                n += 1;
            }
            let r = num / den;
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::DataQuality(format!(
                    "non-positive resistance estimate {r:e} at command {x}"
                )));
            }
            Ok(ResistanceEstimate {
                command: x,
                resistance: r,
                samples: n,
            })
        })
        .collect()
}

fn log_cost(p: &[f64; 3], est: &[ResistanceEstimate]) -> f64 {
    let [ln_a, ln_b, c] = *p;
    let mut cost = 0.0;
    for e in est {
        let open = e.command + c;
        if open <= 0.0 {
            return f64::INFINITY;
        }
        cost += (ln_a - ln_b - 2.0 * open.ln() - e.resistance.ln()).abs();
    }
    cost
}

struct Box3 {
    lo: [f64; 3],
    hi: [f64; 3],
}

impl Box3 {
    fn project(&self, p: [f64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|i| p[i].clamp(self.lo[i], self.hi[i]))
    }
}

/// Nelder–Mead on the projected box. Returns the best point, its cost and
/// the best cost after every iteration.
fn nelder_mead(
    f: &dyn Fn(&[f64; 3]) -> f64,
    start: [f64; 3],
    step: [f64; 3],
    bounds: &Box3,
) -> ([f64; 3], f64, Vec<f64>) {
    let eval = |p: [f64; 3]| {
        let q = bounds.project(p);
        (q, f(&q))
    };
    let mut simplex: Vec<([f64; 3], f64)> = vec![eval(start)];
    for i in 0..3 {
        let mut p = start;
        p[i] += step[i];
        simplex.push(eval(p));
    }
    let mut history = Vec::new();
    for _ in 0..MAX_ITERATIONS {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        history.push(simplex[0].1);
        let spread = simplex[3].1 - simplex[0].1;
        let size = (0..3)
            .map(|i| {
                simplex
                    .iter()
                    .map(|s| (s.0[i] - simplex[0].0[i]).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread.abs() < 1e-14 && size < 1e-10 {
            break;
        }
        let mut centroid = [0.0; 3];
        for s in &simplex[..3] {
            for i in 0..3 {
                centroid[i] += s.0[i] / 3.0;
            }
        }
        let along = |t: f64| {
            let w = simplex[3].0;
            [0, 1, 2].map(|i| centroid[i] + t * (centroid[i] - w[i]))
        };
        let reflected = eval(along(1.0));
        if reflected.1 < simplex[0].1 {
            let expanded = eval(along(2.0));
            simplex[3] = if expanded.1 < reflected.1 { expanded } else { reflected };
        } else if reflected.1 < simplex[2].1 {
            simplex[3] = reflected;
        } else {
            let t = if reflected.1 < simplex[3].1 { 0.5 } else { -0.5 };
            let contracted = eval(along(t));
            if contracted.1 < simplex[3].1.min(reflected.1) {
                simplex[3] = contracted;
            } else {
                let best = simplex[0].0;
                for s in simplex.iter_mut().skip(1) {
                    *s = eval([0, 1, 2].map(|i| best[i] + 0.5 * (s.0[i] - best[i])));
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    history.push(simplex[0].1);
    (simplex[0].0, simplex[0].1, history)
}

/// Fits `R(x) = a / (b·(x + c)²)` to per-command resistances by minimising
/// the summed absolute log error, from 16 starts spread over the admissible
/// range of `c`. Only `a/b` and `c` are identifiable; `b` stays near 1.
pub fn fit_orifice_to_estimates(estimates: &[ResistanceEstimate], exec: Execution) -> Result<OrificeFit> {
    if estimates.len() < 3 {
        return Err(Error::Underdetermined { found: estimates.len() });
    }
    let x_lo = estimates.iter().map(|e| e.command).fold(f64::INFINITY, f64::min);
    let x_hi = estimates.iter().map(|e| e.command).fold(0.0, f64::max);
    let bounds = Box3 {
        lo: [-80.0, -20.0, -x_lo + 1e-6],
        hi: [80.0, 20.0, 2.0 * x_hi.max(1.0)],
    };
    let f = |p: &[f64; 3]| log_cost(p, estimates);
    let runs = par::map_range(exec, STARTS, |k| {
        let c = bounds.lo[2] + (bounds.hi[2] - bounds.lo[2]) * (k as f64 + 0.5) / STARTS as f64 * 0.5;
        let mut offsets: Vec<f64> = estimates
            .iter()
            .map(|e| e.resistance.ln() + 2.0 * (e.command + c).ln())
            .collect();
        offsets.sort_by(f64::total_cmp);
        let ln_a = offsets[offsets.len() / 2];
        nelder_mead(&f, [ln_a, 0.0, c], [0.5, 0.5, 0.05 * (x_hi - x_lo).max(0.05)], &bounds)
    });
    let (best, cost, history) = runs
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::FitDivergence("no orifice start".into()))?;
    if !cost.is_finite() {
        return Err(Error::FitDivergence("orifice cost is not finite".into()));
    }
    let [ln_a, ln_b, c] = best;
    let x_min = (-c).max(0.0);
    let model = OrificeModel {
        a: ln_a.exp(),
        b: ln_b.exp(),
        c,
        x_min,
        x_max: 1.0,
    };
    model.validate()?;
    Ok(OrificeFit {
        model,
        cost,
        history,
        estimates: estimates.to_vec(),
    })
}

/// Orifice of one joint and direction from its stall trajectories.
pub fn fit_orifice(
    dataset: &CalibrationDataset,
    joint: Joint,
    direction: Direction,
    pump: &PumpPressureMap,
    exec: Execution,
) -> Result<OrificeFit> {
    let samples = orifice_samples(dataset, joint, direction)?;
    let estimates = resistance_estimates(&samples, pump)?;
    fit_orifice_to_estimates(&estimates, exec)
}
