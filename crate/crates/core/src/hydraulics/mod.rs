//! Hydraulic circuit models shared by the plant simulator (ground truth) and
//! the calibration fits (identified instances of the same shapes).
//!
//! Commands are normalised spool positions in [−1, 1]; positive extends the
//! cylinder. Each travel direction is modelled separately, and within a
//! direction the command magnitude `x ∈ [0, 1]` is used.
//!
//! The load on a function is expressed as a direction-specific pressure
//! `P_f`: the cylinder force resisting motion in that direction divided by
//! the active plunger area (A_a when extending, A_b when retracting). It is
//! negative for overrunning loads.

mod ls;
mod nfc;
mod orifice;
mod pump;

pub use ls::LsCircuitModel;
pub use nfc::{NfcCircuitModel, NfcDirection};
pub use orifice::{orifice_drop, orifice_flow, OrificeModel};
pub use pump::PumpPressureMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kinematics::PlungerAreas;

/// Travel direction of a cylinder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Extend,
    Retract,
}

impl Direction {
    pub fn of(command: f64) -> Direction {
        if command < 0.0 {
            Direction::Retract
        } else {
            Direction::Extend
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Direction::Extend => 1.0,
            Direction::Retract => -1.0,
        }
    }

    /// Active plunger area for this direction.
    pub fn area(self, areas: &PlungerAreas) -> f64 {
        match self {
            Direction::Extend => areas.a_a,
            Direction::Retract => areas.a_b,
        }
    }

    /// Load pressure opposing motion in this direction, from the net
    /// cylinder force `f` (positive pushes the rod out).
    pub fn load_pressure(self, f: f64, areas: &PlungerAreas) -> f64 {
        self.sign() * f / self.area(areas)
    }
}

/// One joint's hydraulic function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum HydraulicCircuit {
    #[serde(rename = "LS")]
    Ls(LsCircuitModel),
    #[serde(rename = "NFC")]
    Nfc(NfcCircuitModel),
}

impl HydraulicCircuit {
    pub fn relief_pressure(&self) -> f64 {
        match self {
            HydraulicCircuit::Ls(c) => c.relief_pressure.pa(),
            HydraulicCircuit::Nfc(c) => c.relief_pressure.pa(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            HydraulicCircuit::Ls(c) => c.validate(),
            HydraulicCircuit::Nfc(c) => c.validate(),
        }
    }
}

/// Splits a net cylinder force into chamber pressures such that
/// `p_a·A_a − p_b·A_b = f` exactly, with the passive chamber at `tank`.
pub fn chamber_pressures(f: f64, tank: f64, areas: &PlungerAreas) -> (f64, f64) {
    if f >= 0.0 {
        ((f + tank * areas.a_b) / areas.a_a, tank)
    } else {
        (tank, (tank * areas.a_a - f) / areas.a_b)
    }
}
