//! Calibration from logged runs: LS velocity tables, NFC pump and orifice
//! identification with inertia compensation, the 2D NFC table, and
//! step-response fits of the joint dynamics used by the MPC.
//!
//! All procedures consume [`GradingLog`] segments, so they work the same on
//! simulated and recorded data. [`procedures`] generates such segments from
//! the plant simulator.

mod feedforward;
mod inertia;
mod ls;
mod nfc_lut;
mod orifice;
pub mod procedures;
mod pump;
mod step;

pub use feedforward::{FeedForwardTables, HydraulicFeedForward, LsJointTable, NfcJointTables, NfcTable, Provenance};
pub use inertia::{compensate_inertia, derivative_savgol, CausalSlope, SAVGOL_WINDOW};
pub use ls::{calibrate_ls, calibrate_ls_joint, STEADY_WINDOW};
pub use nfc_lut::{build_nfc_lut, LutGrid, FLOW_NODES, PRESSURE_NODES};
pub use orifice::{
    fit_orifice, fit_orifice_to_estimates, orifice_samples, resistance_estimates, OrificeFit, OrificeSample,
    ResistanceEstimate,
};
pub use pump::{probe_pump_map, stall_pressure};
pub use step::{fit_step_response, fit_step_samples, step_response, DynamicsFile, JointDynamicsFit};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::hydraulics::Direction;
use crate::kinematics::{Joint, MachineModel};
use crate::log::GradingLog;

/// What a calibration run was recorded for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Maneuver {
    /// Constant command from rest, for steady-state velocity.
    Step,
    /// Constant command until the function stalls, for the pump map.
    Stall,
    /// Constant command under a growing load until stall, for the orifice.
    StallTrajectory,
    /// Constant command in one of several fixed load configurations.
    LoadConfiguration,
}

/// One constant-command segment of a calibration dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRun {
    pub joint: Joint,
    /// Signed test command, constant over the run.
    pub command: f64,
    pub maneuver: Maneuver,
    /// Time at which the command was applied.
    pub onset: f64,
    pub log: GradingLog,
}

impl CalibrationRun {
    pub fn direction(&self) -> Direction {
        Direction::of(self.command)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationDataset {
    pub machine: MachineModel,
    pub runs: Vec<CalibrationRun>,
}

impl CalibrationDataset {
    pub fn new(machine: MachineModel) -> Self {
        CalibrationDataset {
            machine,
            runs: Vec::new(),
        }
    }

    pub fn runs_for(&self, joint: Joint, maneuver: Maneuver) -> impl Iterator<Item = &CalibrationRun> {
        self.runs
            .iter()
            .filter(move |r| r.joint == joint && r.maneuver == maneuver)
    }

    /// SHA-256 over every run's tags and CSV log, in order.
    pub fn hash(&self) -> Result<String> {
        let mut h = Sha256::new();
        for r in &self.runs {
            h.update(format!("{}|{}|{:?}|{}\n", r.joint, r.command, r.maneuver, r.onset));
            let mut buf = Vec::new();
            r.log.write(&mut buf)?;
            h.update(&buf);
        }
        Ok(hex::encode(h.finalize()))
    }
}

/// Per-sample cylinder quantities of one joint recovered from a log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylinderSample {
    pub time: f64,
    pub theta: f64,
    pub theta_dot: f64,
    /// Sensitivity γ = dθ/dℓ at the sample.
    pub gamma: f64,
    /// Cylinder velocity θ̇/γ [m/s].
    pub velocity: f64,
    /// Measured cylinder force from the chamber pressures [N].
    pub force: f64,
}

pub fn cylinder_samples(log: &GradingLog, machine: &MachineModel, joint: Joint) -> Result<Vec<CylinderSample>> {
    let spec = machine.joints[joint];
    log.rows
        .iter()
        .map(|r| {
            let theta = r.theta()[joint];
            let gamma = spec.linkage.sensitivity(joint, theta)?;
            let theta_dot = r.theta_dot()[joint];
            Ok(CylinderSample {
                time: r.time,
                theta,
                theta_dot,
                gamma,
                velocity: theta_dot / gamma,
                force: crate::kinematics::cylinder_force(r.p_a()[joint], r.p_b()[joint], &spec.areas),
            })
        })
        .collect()
}

/// Hex SHA-256 of raw bytes, for provenance of artifacts not built from a
/// [`CalibrationDataset`].
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
