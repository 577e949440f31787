use serde::{Deserialize, Serialize};

use super::{orifice_flow, Direction, OrificeModel, PumpPressureMap};
use crate::error::Result;
use crate::units::Pressure;

/// Lumped NFC model of one travel direction: the pump pressure loop (bypass
/// and reference orifices, pump regulator) collapses into `pump_map`, and
/// the function power line is the variable orifice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NfcDirection {
    pub orifice: OrificeModel,
    pub pump_map: PumpPressureMap,
    /// Active plunger area in this direction [m²].
    pub area: f64,
}

impl NfcDirection {
    /// Flow into the function [m³/s] at command magnitude `x` against load
    /// pressure `p_f`: `Q = sqrt(max(P_p(x) − P_f, 0) / R(x))`.
    pub fn flow(&self, x: f64, p_f: f64) -> f64 {
        orifice_flow(self.orifice.resistance(x), self.pump_map.pressure(x) - p_f)
    }

    pub fn pump_pressure(&self, x: f64) -> f64 {
        self.pump_map.pressure(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NfcCircuitModel {
    pub extend: NfcDirection,
    pub retract: NfcDirection,
    pub relief_pressure: Pressure,
}

impl NfcCircuitModel {
    pub fn direction(&self, d: Direction) -> &NfcDirection {
        match d {
            Direction::Extend => &self.extend,
            Direction::Retract => &self.retract,
        }
    }

    /// Flow magnitude for a signed command against the load pressure of the
    /// commanded direction.
    pub fn flow(&self, command: f64, p_f: f64) -> f64 {
        self.direction(Direction::of(command)).flow(command.abs(), p_f)
    }

    pub fn validate(&self) -> Result<()> {
        for d in [&self.extend, &self.retract] {
            d.orifice.validate()?;
            d.pump_map.validate(self.relief_pressure.pa())?;
            if !(d.area > 0.0) {
                return Err(crate::Error::InvalidModel("NFC area must be positive".into()));
            }
        }
        Ok(())
    }
}
