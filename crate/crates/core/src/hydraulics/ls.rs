use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lut::Table1d;
use crate::units::Pressure;

/// Pressure-compensated load-sensing function. The pump holds a constant
/// margin across the valve, so velocity follows the command alone until the
/// load plus margin reaches the relief setting; beyond that the valve drop
/// shrinks and flow falls off as `sqrt(available / margin)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsCircuitModel {
    /// Signed command → signed cylinder velocity [m/s], monotone.
    pub command_to_velocity: Table1d,
    /// |x| at or below which the spool is closed.
    pub deadband: f64,
    pub relief_pressure: Pressure,
    /// Load-sensing margin across the valve.
    pub margin: Pressure,
}

impl LsCircuitModel {
    /// Cylinder velocity [m/s] for command `x` against the load pressure
    /// `p_f` of the commanded direction.
    pub fn velocity(&self, x: f64, p_f: f64) -> f64 {
        if x.abs() <= self.deadband {
            return 0.0;
        }
        let free = self.command_to_velocity.eval(x);
        let available = (self.relief_pressure.pa() - p_f) / self.margin.pa();
        free * available.clamp(0.0, 1.0).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        self.command_to_velocity.validate()?;
        let t = &self.command_to_velocity;
        if !t.is_non_decreasing() {
            return Err(Error::InvalidModel("LS command map must be monotone".into()));
        }
        if t.eval(0.0) != 0.0 {
            return Err(Error::InvalidModel("LS command map must pass through zero".into()));
        }
        if !(self.margin.pa() > 0.0) || !(self.relief_pressure.pa() > self.margin.pa()) {
            return Err(Error::InvalidModel(
                "LS margin must be positive and below relief".into(),
            ));
        }
        Ok(())
    }
}
