//! Calibration maneuvers executed on the plant simulator.
//!
//! Each maneuver holds one joint's command constant from a chosen start
//! pose while the others stay closed, and records a log. Maneuvers are
//! independent and run through [`crate::par`].

use super::{
    build_nfc_lut, fit_orifice, probe_pump_map, CalibrationDataset, CalibrationRun, FeedForwardTables,
    HydraulicFeedForward, LutGrid, Maneuver, NfcJointTables, OrificeFit,
};
use super::{fit_step_response, DynamicsFile, JointDynamicsFit};
use crate::control::{JointVelocityController, PidParams, VelocityLoopConfig};
use crate::error::{Error, Result};
use crate::hydraulics::{Direction, PumpPressureMap};
use crate::kinematics::{Architecture, Joint, PerJoint};
use crate::log::{GradingLog, LogRow};
use crate::par::{self, Execution};
use crate::sim::{measure, LoadEvent, Plant, PlantState, SensorNoise};

/// Idle time before the test command is applied [s].
pub const LEAD_IN: f64 = 0.5;

/// Test commands of the LS sweep: −0.85 … 0.85 in steps of 0.1.
pub fn ls_sweep_commands() -> Vec<f64> {
    (0..18).map(|i| -0.85 + 0.1 * i as f64).collect()
}

/// Default NFC probe commands.
pub fn pump_probe_commands() -> Vec<f64> {
    vec![0.1, 0.2, 0.3, 0.5, 0.7, 1.0]
}

/// Default NFC orifice test commands.
pub fn orifice_test_commands() -> Vec<f64> {
    vec![0.15, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
}

/// Runs the plant from `state` for `duration` seconds under `policy`,
/// logging one row per step from the sensor frame.
pub fn record(
    plant: &Plant,
    mut state: PlantState,
    duration: f64,
    noise: &SensorNoise,
    mut policy: impl FnMut(f64) -> [f64; 3],
) -> Result<GradingLog> {
    let n = (duration / plant.dt()).round() as usize;
    let mut log = GradingLog::new();
    log.rows.reserve(n + 1);
    let mut cmd = [0.0; 3];
    log.push(LogRow::from_frame(&measure(&state, noise), &plant.machine, cmd));
    for _ in 0..n {
        cmd = policy(state.clock);
        plant.step_in_place(&mut state, cmd)?;
        log.push(LogRow::from_frame(&measure(&state, noise), &plant.machine, cmd));
    }
    Ok(log)
}

/// A pose in the middle of every joint range with `joint` placed `margin`
/// rad inside the limit it moves away from (`toward_stop == false`) or
/// towards (`toward_stop == true`).
pub fn start_pose(plant: &Plant, joint: Joint, direction: Direction, margin: f64, toward_stop: bool) -> [f64; 3] {
    let mut theta = [0.0; 3];
    for j in Joint::ALL {
        let l = plant.machine.joints[j].limits;
        theta[j.index()] = 0.5 * (l.min + l.max);
    }
    let l = plant.machine.joints[joint].limits;
    let extend = direction == Direction::Extend;
    theta[joint.index()] = if extend == toward_stop {
        l.max - margin
    } else {
        l.min + margin
    };
    theta
}

/// Like [`start_pose`], but with the other two joints chosen on a grid to
/// minimise the gravity load pressure `joint` sees in `direction` at the
/// limit it moves towards, so low commands can still move it.
pub fn low_load_pose(plant: &Plant, joint: Joint, direction: Direction, margin: f64, toward_stop: bool) -> [f64; 3] {
    let base = start_pose(plant, joint, direction, margin, toward_stop);
    let stop = start_pose(plant, joint, direction, 0.0, true)[joint.index()];
    let others: Vec<Joint> = Joint::ALL.into_iter().filter(|&j| j != joint).collect();
    let nodes = 9;
    let grid = |j: Joint, k: usize| {
        let l = plant.machine.joints[j].limits;
        l.min + 0.05 + (l.max - l.min - 0.1) * k as f64 / (nodes - 1) as f64
    };
    let areas = plant.machine.joints[joint].areas;
    let load = |theta: &[f64; 3]| -> Option<f64> {
        let gamma = plant.machine.joints[joint]
            .linkage
            .sensitivity(joint, theta[joint.index()])
            .ok()?;
        let tau = plant.gravity_torque(theta)[joint.index()];
        Some(direction.load_pressure(gamma * tau, &areas))
    };
    let mut best = (f64::INFINITY, base);
    for a in 0..nodes {
        for b in 0..nodes {
            let mut theta = base;
            theta[others[0].index()] = grid(others[0], a);
            theta[others[1].index()] = grid(others[1], b);
            let mut at_stop = theta;
            at_stop[joint.index()] = stop;
            // The whole travel towards the stop must stay lightly loaded.
            let worst = [theta, at_stop]
                .iter()
                .filter_map(load)
                .fold(f64::NEG_INFINITY, f64::max);
            if worst < best.0 {
                best = (worst, theta);
            }
        }
    }
    best.1
}

fn constant(joint: Joint, command: f64) -> impl FnMut(f64) -> [f64; 3] {
    move |t| {
        let mut u = [0.0; 3];
        if t >= LEAD_IN - 1e-9 {
            u[joint.index()] = command;
        }
        u
    }
}

fn run(
    plant: &Plant,
    joint: Joint,
    command: f64,
    maneuver: Maneuver,
    theta: [f64; 3],
    duration: f64,
    noise: &SensorNoise,
) -> Result<CalibrationRun> {
    let state = plant.initial_state(theta)?;
    let log = record(plant, state, LEAD_IN + duration, noise, constant(joint, command))?;
    Ok(CalibrationRun {
        joint,
        command,
        maneuver,
        onset: LEAD_IN,
        log,
    })
}

fn collect(plant: &Plant, runs: Vec<Result<CalibrationRun>>) -> Result<CalibrationDataset> {
    let mut ds = CalibrationDataset::new(plant.machine.clone());
    for r in runs {
        ds.runs.push(r?);
    }
    Ok(ds)
}

/// Step runs of 3.5 s per joint and command, each starting near the limit
/// opposite to the direction of motion.
pub fn ls_sweep(plant: &Plant, commands: &[f64], noise: &SensorNoise, exec: Execution) -> Result<CalibrationDataset> {
    let jobs: Vec<(Joint, f64)> = Joint::ALL
        .iter()
        .flat_map(|&j| commands.iter().map(move |&c| (j, c)))
        .collect();
    let runs = par::map(exec, &jobs, |&(j, c)| {
        let theta = start_pose(plant, j, Direction::of(c), 0.02, false);
        run(plant, j, c, Maneuver::Step, theta, 3.5, noise)
    });
    collect(plant, runs)
}

/// Stall probes against the end stop in `direction`, one per command.
pub fn stall_probes(
    plant: &Plant,
    joint: Joint,
    direction: Direction,
    commands: &[f64],
    noise: &SensorNoise,
    exec: Execution,
) -> Result<CalibrationDataset> {
    let runs = par::map(exec, commands, |&x| {
        let theta = low_load_pose(plant, joint, direction, 0.01, true);
        run(plant, joint, direction.sign() * x, Maneuver::Stall, theta, 6.0, noise)
    });
    collect(plant, runs)
}

/// Constant-command runs under a load growing from one second after onset
/// until the function stalls, emulating a progressive stall in the ground.
pub fn stall_trajectories(
    plant: &Plant,
    joint: Joint,
    direction: Direction,
    commands: &[f64],
    noise: &SensorNoise,
    exec: Execution,
) -> Result<CalibrationDataset> {
    let areas = plant.machine.joints[joint].areas;
    let relief = plant.params.circuits[joint].relief_pressure();
    let duration = 7.0;
    let rate = 1.5 * relief * direction.area(&areas) / (duration - 1.0);
    let runs = par::map(exec, commands, |&x| {
        let mut p = plant.clone();
        p.load_events.push(LoadEvent {
            joint,
            start: LEAD_IN + 1.0,
            end: f64::INFINITY,
            force: 0.0,
            rate: direction.sign() * rate,
        });
        let theta = low_load_pose(&p, joint, direction, 0.02, false);
        run(
            &p,
            joint,
            direction.sign() * x,
            Maneuver::StallTrajectory,
            theta,
            duration,
            noise,
        )
    });
    collect(plant, runs)
}

/// Everything identified for one NFC function direction.
#[derive(Debug, Clone)]
pub struct NfcDirectionCalibration {
    pub pump: PumpPressureMap,
    /// The pump map was taken from the opposite direction because this one
    /// could not be stalled from motion.
    pub pump_borrowed: bool,
    pub orifice: OrificeFit,
}

#[derive(Debug, Clone)]
pub struct NfcCalibration {
    pub feedforward: HydraulicFeedForward,
    pub joints: PerJoint<[NfcDirectionCalibration; 2]>,
}

/// Full NFC pipeline on the simulator: stall probes for the pump map,
/// progressive stalls for the orifice, then the inverted tables.
pub fn calibrate_nfc(plant: &Plant, noise: &SensorNoise, exec: Execution) -> Result<NfcCalibration> {
    let mut dataset = CalibrationDataset::new(plant.machine.clone());
    let mut per_joint = Vec::new();
    for j in Joint::ALL {
        let mut pumps = Vec::new();
        for d in [Direction::Extend, Direction::Retract] {
            let probes = stall_probes(plant, j, d, &pump_probe_commands(), noise, exec)?;
            let map = probe_pump_map(&probes, j, d);
            dataset.runs.extend(probes.runs);
            pumps.push(map);
        }
        let resolved: Vec<(PumpPressureMap, bool)> = match (&pumps[0], &pumps[1]) {
            (Ok(e), Ok(r)) => vec![(e.clone(), false), (r.clone(), false)],
            (Ok(e), Err(err)) => {
                log::warn!("{j} retract pump probe failed ({err}); using the extend map");
                vec![(e.clone(), false), (e.clone(), true)]
            }
            (Err(err), Ok(r)) => {
                log::warn!("{j} extend pump probe failed ({err}); using the retract map");
                vec![(r.clone(), true), (r.clone(), false)]
            }
            (Err(e), Err(_)) => return Err(Error::DataQuality(format!("{j}: no usable pump probe: {e}"))),
        };
        let mut dirs = Vec::new();
        for (d, (pump, borrowed)) in [Direction::Extend, Direction::Retract].into_iter().zip(resolved) {
            let traj = stall_trajectories(plant, j, d, &orifice_test_commands(), noise, exec)?;
            let fit = fit_orifice(&traj, j, d, &pump, exec)?;
            dataset.runs.extend(traj.runs);
            dirs.push(NfcDirectionCalibration {
                pump,
                pump_borrowed: borrowed,
                orifice: fit,
            });
        }
        let [e, r]: [NfcDirectionCalibration; 2] = dirs
            .try_into()
            .map_err(|_| Error::DataQuality("direction count".into()))?;
        per_joint.push([e, r]);
    }
    let [b, s, k]: [[NfcDirectionCalibration; 2]; 3] = per_joint
        .try_into()
        .map_err(|_| Error::DataQuality("joint count".into()))?;
    let joints = PerJoint::new(b, s, k);
    let tables = joints.map(|j, [e, r]| {
        let relief = plant.params.circuits[j].relief_pressure();
        let table = |c: &NfcDirectionCalibration| {
            let grid = LutGrid::standard(&c.orifice.model, &c.pump, relief);
            build_nfc_lut(&c.orifice.model, &c.pump, &grid)
        };
        NfcJointTables {
            extend: table(e),
            retract: table(r),
        }
    });
    let feedforward = HydraulicFeedForward::new(
        &plant.machine.name,
        Architecture::Nfc,
        FeedForwardTables::Nfc(tables),
        dataset.hash()?,
    )?;
    Ok(NfcCalibration { feedforward, joints })
}

/// LS sweep and table construction on the simulator.
pub fn calibrate_ls_plant(plant: &Plant, noise: &SensorNoise, exec: Execution) -> Result<HydraulicFeedForward> {
    let ds = ls_sweep(plant, &ls_sweep_commands(), noise, exec)?;
    super::calibrate_ls(&ds)
}

/// Joint-rate step used to identify the closed-loop joint dynamics [rad/s].
pub const RATE_STEP: f64 = 0.05;
/// Recording time after the rate step [s].
pub const RATE_STEP_DURATION: f64 = 4.0;

/// Closed-loop step test: the velocity loop holds every joint still, then
/// `joint`'s target rate steps to `rate` at [`LEAD_IN`]. The start pose puts
/// the joint mid-range so the step never reaches a stop.
pub fn rate_step_test(
    plant: &Plant,
    ff: &HydraulicFeedForward,
    pid: &PidParams,
    joint: Joint,
    rate: f64,
    noise: &SensorNoise,
) -> Result<GradingLog> {
    let mut theta = start_pose(plant, joint, Direction::of(rate), 0.0, false);
    let l = plant.machine.joints[joint].limits;
    let travel = rate.abs() * RATE_STEP_DURATION * 1.2;
    theta[joint.index()] = if rate >= 0.0 {
        (0.5 * (l.min + l.max) - 0.5 * travel).max(l.min + 0.02)
    } else {
        (0.5 * (l.min + l.max) + 0.5 * travel).min(l.max - 0.02)
    };
    let config = VelocityLoopConfig {
        period: plant.dt(),
        ..VelocityLoopConfig::default()
    };
    let mut ctl = JointVelocityController::new(plant.machine.clone(), ff.clone(), *pid, config)?;
    let mut state = plant.initial_state(theta)?;
    let n = ((LEAD_IN + RATE_STEP_DURATION) / plant.dt()).round() as usize;
    let mut log = GradingLog::new();
    for _ in 0..=n {
        let frame = measure(&state, noise);
        let mut target = [0.0; 3];
        if state.clock >= LEAD_IN - 1e-9 {
            target[joint.index()] = rate;
        }
        let out = ctl.update(target, &frame, state.clock)?;
        let mut row = LogRow::from_frame(&frame, &plant.machine, out.commands);
        row.set_target_rate(PerJoint::from_array(target));
        row.set_ff(PerJoint::from_array(out.ff));
        row.set_pid(PerJoint::from_array(out.pid));
        log.push(row);
        plant.step_in_place(&mut state, out.commands)?;
    }
    Ok(log)
}

/// Step tests on all joints and the fitted dynamics file.
pub fn identify_dynamics(
    plant: &Plant,
    ff: &HydraulicFeedForward,
    pid: &PidParams,
    noise: &SensorNoise,
    exec: Execution,
) -> Result<(DynamicsFile, PerJoint<GradingLog>)> {
    let logs = par::map(exec, &Joint::ALL, |&j| {
        rate_step_test(plant, ff, pid, j, RATE_STEP, noise)
    });
    let mut out: Vec<GradingLog> = Vec::with_capacity(3);
    for l in logs {
        out.push(l?);
    }
    let fits: Vec<JointDynamicsFit> = Joint::ALL
        .iter()
        .zip(&out)
        .map(|(&j, log)| fit_step_response(log, j))
        .collect::<Result<_>>()?;
    let mut hasher_input = Vec::new();
    for log in &out {
        log.write(&mut hasher_input)?;
    }
    let file = DynamicsFile::new(
        &plant.machine.name,
        PerJoint::new(fits[0], fits[1], fits[2]),
        super::sha256_hex(&hasher_input),
    );
    let [b, s, k]: [GradingLog; 3] = out.try_into().map_err(|_| Error::DataQuality("joint count".into()))?;
    Ok((file, PerJoint::new(b, s, k)))
}
