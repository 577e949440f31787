use super::{cylinder_samples, CalibrationDataset, CalibrationRun, Maneuver};
use crate::error::{Error, Result};
use crate::hydraulics::{Direction, PumpPressureMap};
use crate::kinematics::{Joint, MachineModel};

/// Cylinder speed below which a function counts as stalled [m/s].
const STALL_SPEED: f64 = 5e-4;
/// Minimum stall duration [s].
const STALL_HOLD: f64 = 0.5;
/// Speed the function must have reached before stalling [m/s], so a
/// function that never moved (load held by the check valve) is not taken
/// for a probe.
const MOVED_SPEED: f64 = 2e-3;
/// Averaging span at the end of the stalled segment [s].
const AVERAGE_SPAN: f64 = 0.3;

/// Load pressure of the commanded direction at the end of a run, if the
/// run ends in a stall of at least half a second after having moved.
pub fn stall_pressure(run: &CalibrationRun, machine: &MachineModel) -> Result<Option<f64>> {
    let samples = cylinder_samples(&run.log, machine, run.joint)?;
    let Some(last) = samples.last() else {
        return Ok(None);
    };
    let start = samples
        .iter()
        .rposition(|s| s.velocity.abs() >= STALL_SPEED)
        .map_or(0, |i| i + 1);
    if start >= samples.len() || last.time - samples[start].time < STALL_HOLD {
        return Ok(None);
    }
    if !samples[..start]
        .iter()
        .any(|s| s.time >= run.onset && s.velocity.abs() >= MOVED_SPEED)
    {
        return Ok(None);
    }
    let d = run.direction();
    let areas = machine.joints[run.joint].areas;
    let tail: Vec<f64> = samples[start..]
        .iter()
        .filter(|s| s.time >= last.time - AVERAGE_SPAN)
        .map(|s| d.load_pressure(s.force, &areas))
        .collect();
    Ok(Some(tail.iter().sum::<f64>() / tail.len() as f64))
}

/// Pump pressure map of one joint and direction from its stall runs.
/// Duplicate commands are averaged; a decreasing reading is clamped up to
/// its predecessor with a warning.
pub fn probe_pump_map(dataset: &CalibrationDataset, joint: Joint, direction: Direction) -> Result<PumpPressureMap> {
    let mut readings: Vec<(f64, f64, usize)> = Vec::new();
    for run in dataset
        .runs_for(joint, Maneuver::Stall)
        .filter(|r| r.direction() == direction && r.command != 0.0)
    {
        let x = run.command.abs();
        let p = stall_pressure(run, &dataset.machine)?.ok_or(Error::MissingProbe { command: run.command })?;
        match readings.iter_mut().find(|r| r.0 == x) {
            Some(r) => {
                r.1 += p;
                r.2 += 1;
            }
            None => readings.push((x, p, 1)),
        }
    }
    if readings.len() < 2 {
        return Err(Error::DataQuality(format!(
            "{joint} {direction:?}: pump map needs stall probes at two or more commands"
        )));
    }
    readings.sort_by(|a, b| a.0.total_cmp(&b.0));
    let commands: Vec<f64> = readings.iter().map(|r| r.0).collect();
    let mut pressures: Vec<f64> = readings.iter().map(|r| r.1 / r.2 as f64).collect();
    for i in 1..pressures.len() {
        if pressures[i] < pressures[i - 1] {
            log::warn!(
                "{joint} {direction:?}: pump reading at x = {} below x = {}, clamped",
                commands[i],
                commands[i - 1]
            );
            pressures[i] = pressures[i - 1];
        }
    }
    PumpPressureMap::new(commands, pressures)
}
