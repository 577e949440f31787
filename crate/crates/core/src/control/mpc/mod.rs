//! Delay-aware nonlinear MPC path tracker.
//!
//! Each joint follows a second-order velocity model with dead time,
//! discretised exactly at Δt. Dead time enters through a buffer of past
//! inputs that is part of the state. The cost lives in task space: the
//! predicted joint states go through forward kinematics to the blade pose
//! and twist. The program is solved by single shooting with analytic
//! Jacobians and a projected Levenberg–Marquardt iteration.

mod model;
mod solver;

pub use model::{delay_steps, JointModel};
pub use solver::{solve_bounded, LeastSquares, SolveReport, SolverOptions};

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::calibration::JointDynamicsFit;
use crate::error::{Error, Result};
use crate::kinematics::{wrap_angle, Joint, JointConfiguration, MachineModel, PerJoint, PlanarChain};

/// Cost weights. All non-negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpcWeights {
    pub vx: f64,
    pub vz: f64,
    pub omega: f64,
    pub phi: f64,
    pub h: f64,
    pub du: f64,
    pub h_terminal: f64,
    /// Penalty on predicted joint-limit violation [1/rad²].
    pub theta_bound: f64,
}

impl Default for MpcWeights {
    fn default() -> Self {
        MpcWeights {
            vx: 1.0,
            vz: 10.0,
            omega: 0.5,
            phi: 0.5,
            h: 10.0,
            du: 5.0,
            h_terminal: 50.0,
            theta_bound: 1e6,
        }
    }
}

/// Target plane `z = h + α·x`, grading speed and blade pitch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignSurface {
    /// Plane height at x = 0 [m].
    pub h: f64,
    /// Plane slope dz/dx.
    pub alpha: f64,
    /// Blade speed along x [m/s]; negative pulls towards the machine.
    pub v_x: f64,
    /// Bucket pitch [rad].
    pub phi: f64,
}

impl DesignSurface {
    pub fn height_at(&self, x: f64) -> f64 {
        self.h + self.alpha * x
    }

    /// Signed height of `p` above the plane [m].
    pub fn error(&self, p: [f64; 2]) -> f64 {
        p[1] - self.height_at(p[0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcProblem {
    pub dynamics: PerJoint<JointDynamicsFit>,
    pub weights: MpcWeights,
    pub targets: DesignSurface,
    pub horizon: usize,
    pub dt: f64,
    /// Length of the delayed-input buffer.
    pub n_delay: usize,
    pub u_min: [f64; 3],
    pub u_max: [f64; 3],
    pub theta_min: [f64; 3],
    pub theta_max: [f64; 3],
    pub bucket_enabled: bool,
}

impl MpcProblem {
    pub const HORIZON: usize = 20;
    pub const DT: f64 = 0.1;

    /// Horizon 20 at 0.1 s with limits from the machine and a buffer long
    /// enough for every identified dead time.
    pub fn for_machine(
        machine: &MachineModel,
        dynamics: PerJoint<JointDynamicsFit>,
        weights: MpcWeights,
        targets: DesignSurface,
    ) -> Self {
        let limits = machine.limits();
        let n_delay = Joint::ALL
            .iter()
            .map(|&j| (dynamics[j].tau / Self::DT + 1e-9).floor() as usize)
            .max()
            .unwrap_or(1)
            .max(1);
        MpcProblem {
            dynamics,
            weights,
            targets,
            horizon: Self::HORIZON,
            dt: Self::DT,
            n_delay,
            u_min: limits.map(|_, l| l.rate_min).to_array(),
            u_max: limits.map(|_, l| l.rate_max).to_array(),
            theta_min: limits.map(|_, l| l.min).to_array(),
            theta_max: limits.map(|_, l| l.max).to_array(),
            bucket_enabled: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for j in Joint::ALL {
            self.dynamics[j].validate()?;
        }
        let w = &self.weights;
        let ws = [w.vx, w.vz, w.omega, w.phi, w.h, w.du, w.h_terminal, w.theta_bound];
        if ws.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Config("MPC weights must be non-negative".into()));
        }
        if self.horizon == 0 || !(self.dt > 0.0) || self.n_delay == 0 {
            return Err(Error::Config(
                "MPC needs a positive horizon, step and buffer length".into(),
            ));
        }
        for i in 0..3 {
            if !(self.u_min[i] <= self.u_max[i]) || !(self.theta_min[i] <= self.theta_max[i]) {
                return Err(Error::InfeasibleBounds(format!(
                    "joint {i}: u ∈ [{}, {}], θ ∈ [{}, {}]",
                    self.u_min[i], self.u_max[i], self.theta_min[i], self.theta_max[i]
                )));
            }
            if (self.bucket_enabled || i != Joint::Bucket.index()) && !(self.u_min[i] <= 0.0 && self.u_max[i] >= 0.0) {
                return Err(Error::InfeasibleBounds(format!("joint {i}: input bounds exclude rest")));
            }
        }
        Ok(())
    }

    /// Weights in force: no pitch tracking without the bucket.
    pub fn effective_weights(&self) -> MpcWeights {
        let mut w = self.weights;
        if !self.bucket_enabled {
            w.phi = 0.0;
        }
        w
    }

    pub fn delays(&self) -> [usize; 3] {
        Joint::ALL.map(|j| delay_steps(self.dynamics[j].tau, self.dt, self.n_delay))
    }

    fn models(&self) -> [JointModel; 3] {
        Joint::ALL.map(|j| JointModel::new(&self.dynamics[j], self.dt))
    }

    fn active_joints(&self) -> Vec<usize> {
        if self.bucket_enabled {
            vec![0, 1, 2]
        } else {
            vec![0, 1]
        }
    }
}

/// Joint states plus the delayed-input buffer, most recent input first.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcState {
    pub joints: JointConfiguration,
    pub buffer: Vec<[f64; 3]>,
}

impl MpcState {
    /// State with an all-zero input history.
    pub fn new(joints: JointConfiguration, n_delay: usize) -> Self {
        MpcState {
            joints,
            buffer: vec![[0.0; 3]; n_delay.max(1)],
        }
    }

    /// `u_{d,1}⁺ = u`, `u_{d,j}⁺ = u_{d,j−1}`.
    pub fn push_input(&mut self, u: [f64; 3]) {
        self.buffer.pop();
        self.buffer.insert(0, u);
    }

    /// The most recently applied input.
    pub fn last_input(&self) -> [f64; 3] {
        self.buffer[0]
    }
}

/// Predicted joint trajectory `x_0 … x_N` for inputs `u_0 … u_{N−1}`.
/// Joint `i` is driven at step `k` by the buffered input `d_i` steps old.
/// With the bucket disabled its rate and acceleration are held at zero.
pub fn mpc_predict(state: &MpcState, inputs: &[[f64; 3]], problem: &MpcProblem) -> Vec<JointConfiguration> {
    let models = problem.models();
    let delays = problem.delays();
    let mut buffer = state.buffer.clone();
    buffer.resize(problem.n_delay, [0.0; 3]);
    let mut q = state.joints;
    if !problem.bucket_enabled {
        let b = Joint::Bucket.index();
        q.theta_dot[b] = 0.0;
        q.theta_ddot[b] = 0.0;
    }
    let mut out = Vec::with_capacity(inputs.len() + 1);
    out.push(q);
    for u in inputs {
        let mut next = q;
        for i in problem.active_joints() {
            let x = models[i].step([q.theta[i], q.theta_dot[i], q.theta_ddot[i]], buffer[delays[i] - 1][i]);
            next.theta[i] = x[0];
            next.theta_dot[i] = x[1];
            next.theta_ddot[i] = x[2];
        }
        buffer.pop();
        buffer.insert(0, *u);
        q = next;
        out.push(q);
    }
    out
}

/// Where the machine is, beyond its joints: cabin pitch and the chain
/// (which carries the telescopic extension).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpcContext {
    pub cabin_pitch: f64,
    pub chain: PlanarChain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcSolution {
    /// The input to apply now.
    pub u0: [f64; 3],
    /// Whole optimised sequence.
    pub inputs: Vec<[f64; 3]>,
    pub predicted: Vec<JointConfiguration>,
    pub cost: f64,
    pub iterations: usize,
    /// The iteration budget ran out before convergence; the best iterate
    /// found is returned.
    pub degraded: bool,
    pub active_constraints: usize,
    pub solve_time: Duration,
}

impl MpcSolution {
    /// Warm start for the next tick: the sequence advanced one step with
    /// the last input repeated.
    pub fn shifted(&self) -> Vec<[f64; 3]> {
        let mut s: Vec<[f64; 3]> = self.inputs.iter().skip(1).copied().collect();
        if let Some(&last) = self.inputs.last() {
            s.push(last);
        }
        s
    }
}

/// Single-shooting residuals over the horizon.
struct Shooting<'a> {
    state: &'a MpcState,
    problem: &'a MpcProblem,
    context: &'a MpcContext,
    joints: Vec<usize>,
    /// Per joint, `Φ^s·Γ` for the state response to a pulse.
    impulse: [Vec<Vector3<f64>>; 3],
    delays: [usize; 3],
    weights: MpcWeights,
}

impl Shooting<'_> {
    fn unpack(&self, x: &[f64]) -> Vec<[f64; 3]> {
        let nj = self.joints.len();
        (0..self.problem.horizon)
            .map(|k| {
                let mut u = [0.0; 3];
                for (c, &i) in self.joints.iter().enumerate() {
                    u[i] = x[k * nj + c];
                }
                u
            })
            .collect()
    }

    /// `∂x_{k,i}/∂u_{m,i}` as (θ, θ̇) sensitivities, zero if the input has
    /// not reached the joint by step `k`.
    fn sensitivity(&self, i: usize, k: usize, m: usize) -> Option<(f64, f64)> {
        // u_m enters the buffer after step m and drives step m + d_i.
        let first = m + self.delays[i] + 1;
        if k < first {
            return None;
        }
        let h = self.impulse[i][k - first];
        Some((h[0], h[1]))
    }
}

impl LeastSquares for Shooting<'_> {
    fn evaluate(&self, x: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let p = self.problem;
        let w = &self.weights;
        let t = &p.targets;
        let n = p.horizon;
        let nj = self.joints.len();
        let inputs = self.unpack(x);
        let traj = mpc_predict(self.state, &inputs, p);
        let rows = n * 8 + 1 + n * 3;
        let mut r = DVector::zeros(rows);
        let mut jac = DMatrix::zeros(rows, x.len());
        let sq = |v: f64| v.sqrt();
        let mut row = 0;
        // Rows that depend on x_k through (∂/∂θ, ∂/∂θ̇) per joint.
        let fill = |jac: &mut DMatrix<f64>, row: usize, k: usize, d_theta: [f64; 3], d_rate: [f64; 3]| {
            for (c, &i) in self.joints.iter().enumerate() {
                for m in 0..k {
                    if let Some((s_theta, s_rate)) = self.sensitivity(i, k, m) {
                        jac[(row, m * nj + c)] += d_theta[i] * s_theta + d_rate[i] * s_rate;
                    }
                }
            }
        };
        let zero = [0.0; 3];
        let pitch = self.context.cabin_pitch;
        for k in 0..=n {
            let (ee, der) = self.context.chain.state_with_derivatives(pitch, &traj[k]);
            let jx = der.jacobian[0];
            let jz = der.jacobian[1];
            let height_grad = [
                jz[0] - t.alpha * jx[0],
                jz[1] - t.alpha * jx[1],
                jz[2] - t.alpha * jx[2],
            ];
            let height = ee.p[1] - (t.h + t.alpha * ee.p[0]);
            if k == n {
                r[row] = sq(w.h_terminal) * height;
                fill(&mut jac, row, k, height_grad.map(|g| sq(w.h_terminal) * g), zero);
                row += 1;
                break;
            }
            let terms: [(f64, f64, [f64; 3], [f64; 3]); 5] = [
                (w.vx, ee.v[0] - t.v_x, der.dv_dtheta[0], jx),
                (w.vz, ee.v[1], der.dv_dtheta[1], jz),
                (w.omega, ee.omega_y, zero, der.dphi_dtheta),
                (w.phi, wrap_angle(ee.phi - t.phi), der.dphi_dtheta, zero),
                (w.h, height, height_grad, zero),
            ];
            for (weight, value, d_theta, d_rate) in terms {
                let s = sq(weight);
                r[row] = s * value;
                fill(&mut jac, row, k, d_theta.map(|g| s * g), d_rate.map(|g| s * g));
                row += 1;
            }
            // Input increments, against the last applied input at k = 0.
            let prev = if k == 0 { self.state.last_input() } else { inputs[k - 1] };
            let s = sq(w.du);
            for i in 0..3 {
                r[row] = s * (inputs[k][i] - prev[i]);
                if let Some(c) = self.joints.iter().position(|&a| a == i) {
                    jac[(row, k * nj + c)] = s;
                    if k > 0 {
                        jac[(row, (k - 1) * nj + c)] = -s;
                    }
                }
                row += 1;
            }
        }
        // Soft joint limits on x_1 … x_N.
        let s = sq(w.theta_bound);
        for k in 1..=n {
            for i in 0..3 {
                let th = traj[k].theta[i];
                let excess = if th > p.theta_max[i] {
                    th - p.theta_max[i]
                } else if th < p.theta_min[i] {
                    th - p.theta_min[i]
                } else {
                    0.0
                };
                r[row] = s * excess;
                if excess != 0.0 {
                    let mut d = [0.0; 3];
                    d[i] = s;
                    fill(&mut jac, row, k, d, zero);
                }
                row += 1;
            }
        }
        debug_assert_eq!(row, rows);
        (r, jac)
    }
}

/// Solves the tracking program from `current` and returns the first input.
/// `warm_start` (length N) seeds the iteration; otherwise the last applied
/// input is held. The cost reported is the full objective, including the
/// constant terms of the current state.
pub fn mpc_solve(
    current: &MpcState,
    problem: &MpcProblem,
    context: &MpcContext,
    warm_start: Option<&[[f64; 3]]>,
    options: &SolverOptions,
) -> Result<MpcSolution> {
    problem.validate()?;
    let started = Instant::now();
    let joints = problem.active_joints();
    let models = problem.models();
    let shooting = Shooting {
        state: current,
        problem,
        context,
        joints: joints.clone(),
        impulse: models.map(|m| m.impulse_response(problem.horizon + 1)),
        delays: problem.delays(),
        weights: problem.effective_weights(),
    };
    let n = problem.horizon;
    let nj = joints.len();
    let mut x0 = Vec::with_capacity(n * nj);
    let mut lo = Vec::with_capacity(n * nj);
    let mut hi = Vec::with_capacity(n * nj);
    for k in 0..n {
        let seed = warm_start
            .and_then(|w| w.get(k))
            .copied()
            .unwrap_or(current.last_input());
        for &i in &joints {
            x0.push(seed[i]);
            lo.push(problem.u_min[i]);
            hi.push(problem.u_max[i]);
        }
    }
    let report = solve_bounded(&shooting, &x0, &lo, &hi, options);
    let inputs = shooting.unpack(&report.x);
    let predicted = mpc_predict(current, &inputs, problem);
    let mut u0 = inputs[0];
    for i in 0..3 {
        u0[i] = u0[i].clamp(problem.u_min[i], problem.u_max[i]);
    }
    if !problem.bucket_enabled {
        u0[Joint::Bucket.index()] = 0.0;
    }
    Ok(MpcSolution {
        u0,
        inputs,
        predicted,
        cost: report.cost,
        iterations: report.iterations,
        degraded: !report.converged,
        active_constraints: report.active,
        solve_time: started.elapsed(),
    })
}
