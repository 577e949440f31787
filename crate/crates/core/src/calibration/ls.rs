use super::{cylinder_samples, CalibrationDataset, FeedForwardTables, HydraulicFeedForward, LsJointTable, Maneuver};
use crate::error::{Error, Result};
use crate::kinematics::{Architecture, Joint, PerJoint};

/// Averaging window after command onset [s]: the third second.
pub const STEADY_WINDOW: (f64, f64) = (2.0, 3.0);

/// Builds one joint's LS table from its step runs: the mean cylinder
/// velocity over the third second after onset, per test command.
pub fn calibrate_ls_joint(dataset: &CalibrationDataset, joint: Joint) -> Result<LsJointTable> {
    let mut nodes = Vec::new();
    for run in dataset.runs_for(joint, Maneuver::Step) {
        let end = run.log.rows.last().map_or(run.onset, |r| r.time);
        if end - run.onset < STEADY_WINDOW.1 - 1e-9 {
            return Err(Error::RunTooShort {
                command: run.command,
                duration: end - run.onset,
                required: STEADY_WINDOW.1,
            });
        }
        let lo = run.onset + STEADY_WINDOW.0;
        let hi = run.onset + STEADY_WINDOW.1;
        let window: Vec<f64> = cylinder_samples(&run.log, &dataset.machine, joint)?
            .into_iter()
            .filter(|s| s.time >= lo - 1e-9 && s.time <= hi + 1e-9)
            .map(|s| s.velocity)
            .collect();
        if window.is_empty() {
            return Err(Error::EmptyWindow { lo, hi });
        }
        nodes.push((run.command, window.iter().sum::<f64>() / window.len() as f64));
    }
    if nodes.is_empty() {
        return Err(Error::DataQuality(format!("no step runs for {joint}")));
    }
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    nodes.dedup_by(|b, a| {
        if a.0 == b.0 {
            a.1 = 0.5 * (a.1 + b.1);
            true
        } else {
            false
        }
    });
    let vmax = nodes.iter().map(|n| n.1.abs()).fold(0.0, f64::max);
    let tol = 1e-3 * vmax;
    for w in nodes.windows(2) {
        if w[1].1 < w[0].1 - tol {
            return Err(Error::NonMonotone { lo: w[0].0, hi: w[1].0 });
        }
    }
    // Clear sub-tolerance dips so the stored table is non-decreasing.
    for i in 1..nodes.len() {
        if nodes[i].1 < nodes[i - 1].1 {
            nodes[i].1 = nodes[i - 1].1;
        }
    }
    let (commands, velocities) = nodes.into_iter().unzip();
    Ok(LsJointTable { commands, velocities })
}

/// LS feed-forward for all three joints.
pub fn calibrate_ls(dataset: &CalibrationDataset) -> Result<HydraulicFeedForward> {
    let mut tables = Vec::with_capacity(3);
    for j in Joint::ALL {
        tables.push(calibrate_ls_joint(dataset, j)?);
    }
    let [b, s, k]: [LsJointTable; 3] = tables
        .try_into()
        .map_err(|_| Error::DataQuality("joint count".into()))?;
    HydraulicFeedForward::new(
        &dataset.machine.name,
        Architecture::Ls,
        FeedForwardTables::Ls(PerJoint::new(b, s, k)),
        dataset.hash()?,
    )
}
