use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mpc::{mpc_solve, DesignSurface, MpcContext, MpcProblem, MpcSolution, MpcState, MpcWeights, SolverOptions};
use super::pid::{PidGains, PidParams};
use super::velocity::{JointVelocityController, VelocityLoopConfig};
use crate::calibration::{CausalSlope, HydraulicFeedForward, JointDynamicsFit, SAVGOL_WINDOW};
use crate::config::{read_versioned, write_toml, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::hydraulics::Direction;
use crate::kinematics::{cylinder_force, Joint, JointConfiguration, MachineModel, PerJoint, PlanarChain, PlungerAreas};
use crate::log::{GradingLog, LogRow};
use crate::sim::{measure, Plant, PlantState, SensorFrame, SensorNoise};

/// Tunable controller settings, as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerParams {
    pub schema_version: u32,
    pub weights: MpcWeights,
    pub pid: PidParams,
    #[serde(default)]
    pub velocity: VelocityLoopConfig,
    /// MPC update period [s].
    pub mpc_period: f64,
    /// Solver iteration budget per MPC tick.
    pub max_iterations: usize,
    pub bucket_enabled: bool,
}

impl Default for ControllerParams {
    fn default() -> Self {
        ControllerParams {
            schema_version: SCHEMA_VERSION,
            weights: MpcWeights::default(),
            pid: PidParams {
                gains: PerJoint::splat(PidGains {
                    kp: 2.0,
                    ki: 4.0,
                    kd: 0.0,
                }),
                integrator_limit: 0.3,
                output_limit: 0.5,
            },
            velocity: VelocityLoopConfig::default(),
            mpc_period: MpcProblem::DT,
            max_iterations: 30,
            bucket_enabled: true,
        }
    }
}

impl ControllerParams {
    pub fn validate(&self) -> Result<()> {
        self.pid.validate()?;
        if !(self.mpc_period > 0.0) || self.max_iterations == 0 {
            return Err(Error::Config("MPC period and iteration budget must be positive".into()));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_toml(self, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let p: ControllerParams = read_versioned(path)?;
        p.validate().map_err(|e| Error::Parse {
            path: path.into(),
            message: e.to_string(),
        })?;
        Ok(p)
    }
}

/// A controller driven once per plant step.
pub trait PassController {
    /// Valve commands for the frame at `now`. Implementations fill the
    /// controller columns of `row` (target rates, FF/PID split, solver
    /// diagnostics, fault flag).
    fn step(&mut self, frame: &SensorFrame, now: f64, row: &mut LogRow) -> Result<[f64; 3]>;
}

/// The MPC path tracker over the hydraulic velocity loop. The MPC runs
/// every `mpc_period` and publishes one snapshot of target rates; the
/// velocity loop reads the latest snapshot every step.
#[derive(Debug, Clone)]
pub struct GradingController {
    problem: MpcProblem,
    context: MpcContext,
    velocity: JointVelocityController,
    options: SolverOptions,
    decimation: u64,
    ticks: u64,
    state: MpcState,
    acceleration: PerJoint<CausalSlope>,
    warm: Option<Vec<[f64; 3]>>,
    targets: [f64; 3],
    last: Option<MpcSolution>,
    /// Measured bucket angle at the first tick, used as the bound when the
    /// bucket is disabled.
    bucket_hold: Option<f64>,
    /// Rate bounds as configured, before load limiting.
    rate_bounds: ([f64; 3], [f64; 3]),
    relief: f64,
    areas: PerJoint<PlungerAreas>,
    commands: [f64; 3],
}

/// A function whose load pressure is within this fraction of relief
/// counts as load-limited.
pub const LOAD_LIMIT_MARGIN: f64 = 0.02;

impl GradingController {
    pub fn new(
        machine: &MachineModel,
        ff: HydraulicFeedForward,
        dynamics: PerJoint<JointDynamicsFit>,
        params: &ControllerParams,
        surface: DesignSurface,
    ) -> Result<Self> {
        params.validate()?;
        let mut problem = MpcProblem::for_machine(machine, dynamics, params.weights, surface);
        problem.dt = params.mpc_period;
        problem.bucket_enabled = params.bucket_enabled;
        problem.validate()?;
        let velocity = JointVelocityController::new(machine.clone(), ff, params.pid, params.velocity)?;
        let ratio = params.mpc_period / params.velocity.period;
        if (ratio - ratio.round()).abs() > 1e-6 || ratio < 1.0 {
            return Err(Error::Config(format!(
                "MPC period {} is not a multiple of the velocity loop period {}",
                params.mpc_period, params.velocity.period
            )));
        }
        Ok(GradingController {
            rate_bounds: (problem.u_min, problem.u_max),
            relief: machine.max_function_pressure.pa(),
            areas: machine.joints.map(|_, s| s.areas),
            commands: [0.0; 3],
            context: MpcContext {
                cabin_pitch: machine.cabin_pitch,
                chain: PlanarChain::from_model(machine),
            },
            state: MpcState::new(JointConfiguration::default(), problem.n_delay),
            problem,
            velocity,
            options: SolverOptions {
                max_iterations: params.max_iterations,
                ..SolverOptions::default()
            },
            decimation: ratio.round() as u64,
            ticks: 0,
            acceleration: PerJoint::from_fn(|_| CausalSlope::new(SAVGOL_WINDOW)),
            warm: None,
            targets: [0.0; 3],
            last: None,
            bucket_hold: None,
        })
    }

    pub fn problem(&self) -> &MpcProblem {
        &self.problem
    }

    pub fn last_solution(&self) -> Option<&MpcSolution> {
        self.last.as_ref()
    }

    fn solve(&mut self, frame: &SensorFrame, accel: [f64; 3]) -> Result<()> {
        self.context.cabin_pitch = frame.cabin_pitch;
        self.state.joints = JointConfiguration {
            theta: frame.theta,
            theta_dot: frame.theta_dot,
            theta_ddot: accel,
        };
        if !self.problem.bucket_enabled {
            let b = Joint::Bucket.index();
            let hold = *self.bucket_hold.get_or_insert(frame.theta[b]);
            self.problem.theta_min[b] = hold.min(frame.theta[b]);
            self.problem.theta_max[b] = hold.max(frame.theta[b]);
        }
        self.limit_loaded_rates(frame);
        let sol = mpc_solve(
            &self.state,
            &self.problem,
            &self.context,
            self.warm.as_deref(),
            &self.options,
        )?;
        self.targets = sol.u0;
        self.state.push_input(sol.u0);
        self.warm = Some(sol.shifted());
        self.last = Some(sol);
        Ok(())
    }
}

impl GradingController {
    /// A function pushing at relief cannot go faster than it currently
    /// does, so its rate bound in the pushing direction drops to the
    /// measured rate. The MPC then plans the other joints around the
    /// stalled one instead of assuming it keeps up, which keeps the blade
    /// on the plane and lets the pass stall rather than ride up.
    fn limit_loaded_rates(&mut self, frame: &SensorFrame) {
        let (u_min, u_max) = self.rate_bounds;
        for j in Joint::ALL {
            let i = j.index();
            self.problem.u_min[i] = u_min[i];
            self.problem.u_max[i] = u_max[i];
            let d = Direction::of(self.commands[i]);
            let f = cylinder_force(frame.p_a[i], frame.p_b[i], &self.areas[j]);
            if self.commands[i] == 0.0 || d.load_pressure(f, &self.areas[j]) < (1.0 - LOAD_LIMIT_MARGIN) * self.relief {
                continue;
            }
            let rate = frame.theta_dot[i];
            if self.commands[i] > 0.0 {
                self.problem.u_max[i] = rate.max(0.0).clamp(u_min[i], u_max[i]);
            } else {
                self.problem.u_min[i] = rate.min(0.0).clamp(u_min[i], u_max[i]);
            }
        }
    }
}

impl PassController for GradingController {
    fn step(&mut self, frame: &SensorFrame, now: f64, row: &mut LogRow) -> Result<[f64; 3]> {
        let mut accel = [0.0; 3];
        for j in Joint::ALL {
            accel[j.index()] = self.acceleration[j].push(frame.timestamp, frame.theta_dot[j.index()]);
        }
        if self.ticks.is_multiple_of(self.decimation) {
            self.solve(frame, accel)?;
        }
        self.ticks += 1;
        let out = self.velocity.update(self.targets, frame, now)?;
        self.commands = out.commands;
        row.set_target_rate(PerJoint::from_array(self.targets));
        row.set_ff(PerJoint::from_array(out.ff));
        row.set_pid(PerJoint::from_array(out.pid));
        if let Some(sol) = &self.last {
            row.mpc_cost = sol.cost;
            row.mpc_iterations = sol.iterations as u32;
            row.mpc_degraded = sol.degraded;
        }
        row.fault = out.fault;
        Ok(out.commands)
    }
}

/// Flags a stall once, over the last `hold` seconds, the highest function
/// pressure averaged within `tolerance` of relief while the blade covered
/// less than `speed · hold` along x. Averaging over the window keeps sensor
/// noise from resetting the timer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StallDetector {
    pub relief: f64,
    pub tolerance: f64,
    pub speed: f64,
    pub hold: f64,
    #[serde(skip)]
    window: VecDeque<(f64, f64, f64)>,
}

impl StallDetector {
    pub fn new(relief: f64, tolerance: f64, speed: f64, hold: f64) -> Self {
        StallDetector {
            relief,
            tolerance,
            speed,
            hold,
            window: VecDeque::new(),
        }
    }

    pub fn at_relief(&self, pressure: f64) -> bool {
        pressure >= (1.0 - self.tolerance) * self.relief
    }

    /// Feeds one sample (time, function pressures, blade x); true once the
    /// stall condition holds over a full window.
    pub fn update(&mut self, time: f64, pressures: [f64; 3], blade_x: f64) -> bool {
        let peak = pressures.iter().copied().fold(f64::MIN, f64::max);
        self.window.push_back((time, peak, blade_x));
        while self.window.len() > 1 && time - self.window[1].0 >= self.hold - 1e-9 {
            self.window.pop_front();
        }
        let (t0, _, x0) = self.window[0];
        if time - t0 < self.hold - 1e-9 {
            return false;
        }
        let mean = self.window.iter().map(|w| w.1).sum::<f64>() / self.window.len() as f64;
        self.at_relief(mean) && (blade_x - x0).abs() < self.speed * (time - t0)
    }

    /// Median of the highest function pressure over the current window
    /// [Pa]; robust to the pressure still rising at the window start.
    pub fn window_pressure(&self) -> f64 {
        let mut v: Vec<f64> = self.window.iter().map(|w| w.1).collect();
        median(&mut v)
    }
}

/// Median of `v` (mean of the middle pair for even lengths); 0 if empty.
pub fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// When a pass ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Termination {
    /// Travel ends once the blade reaches this x [m] (moving in the
    /// direction of the grading speed).
    pub x_end: f64,
    pub max_duration: f64,
    /// Blade speed below which the machine counts as stalled [m/s].
    #[serde(default = "default_stall_speed")]
    pub stall_speed: f64,
    #[serde(default = "default_stall_hold")]
    pub stall_hold: f64,
    /// Fraction of relief within which a function counts as at relief.
    #[serde(default = "default_stall_tolerance")]
    pub stall_tolerance: f64,
}

fn default_stall_speed() -> f64 {
    0.01
}
fn default_stall_hold() -> f64 {
    0.5
}
fn default_stall_tolerance() -> f64 {
    0.01
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminationReason {
    EndOfTravel,
    Stall,
    Timeout,
    Fault,
}

/// Everything a pass needs besides the controller.
#[derive(Debug, Clone)]
pub struct PassSetup {
    pub plant: Plant,
    pub initial_theta: [f64; 3],
    pub surface: DesignSurface,
    pub noise: SensorNoise,
    pub termination: Termination,
}

#[derive(Debug, Clone)]
pub struct PassOutcome {
    pub log: GradingLog,
    pub reason: TerminationReason,
    /// Median of the highest function pressure over the stall window [Pa].
    pub stall_pressure: Option<f64>,
    pub final_state: PlantState,
}

/// Runs one grading pass: the controller is stepped at the plant rate until
/// the blade reaches the end of travel, the machine stalls at relief, the
/// controller faults or time runs out. Every step is logged, including the
/// one that ends the pass.
pub fn grading_pass(setup: &PassSetup, controller: &mut dyn PassController) -> Result<PassOutcome> {
    let plant = &setup.plant;
    let term = &setup.termination;
    let machine = &plant.machine;
    let mut state = plant.initial_state(setup.initial_theta)?;
    let mut detector = StallDetector::new(
        machine.max_function_pressure.pa(),
        term.stall_tolerance,
        term.stall_speed,
        term.stall_hold,
    );
    let direction = setup.surface.v_x.signum();
    let steps = (term.max_duration / plant.dt()).round() as u64;
    let mut log = GradingLog::new();
    let mut reached_band = false;
    let mut reason = TerminationReason::Timeout;
    for _ in 0..=steps {
        let frame = measure(&state, &setup.noise);
        let mut row = LogRow::default();
        let commands = controller.step(&frame, state.clock, &mut row)?;
        let mut full = LogRow::from_frame(&frame, machine, commands);
        full.set_target_rate(row.target_rate());
        full.set_ff(row.ff());
        full.set_pid(row.pid());
        full.mpc_cost = row.mpc_cost;
        full.mpc_iterations = row.mpc_iterations;
        full.mpc_degraded = row.mpc_degraded;
        full.fault = row.fault;
        full.target_height = setup.surface.height_at(full.ee_x);
        full.height_error = full.ee_z - full.target_height;
        full.soil_force_x = state.soil_force[0];
        full.soil_force_z = state.soil_force[1];
        reached_band |= full.height_error.abs() <= 0.02;
        full.phase = u32::from(reached_band);

        let pressures = full.fn_pressure().to_array();
        let stalled = detector.update(full.time, pressures, full.ee_x);
        full.stalled = stalled;
        let end = (full.ee_x - term.x_end) * direction >= 0.0;
        let fault = full.fault;
        log.push(full);
        if fault {
            reason = TerminationReason::Fault;
            break;
        }
        if stalled {
            reason = TerminationReason::Stall;
            break;
        }
        if end {
            reason = TerminationReason::EndOfTravel;
            break;
        }
        plant.step_in_place(&mut state, commands)?;
    }
    Ok(PassOutcome {
        log,
        stall_pressure: (reason == TerminationReason::Stall).then(|| detector.window_pressure()),
        reason,
        final_state: state,
    })
}
