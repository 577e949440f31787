use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lut::{interp_linear, Table1d};

/// Pump pressure-loop setpoint as a function of command magnitude,
/// interpolated linearly and held constant beyond the end breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpPressureMap {
    /// Command magnitudes, strictly increasing.
    pub commands: Vec<f64>,
    /// Setpoint pressures [Pa], non-decreasing.
    #[serde(deserialize_with = "crate::units::de_pressures")]
    pub pressures: Vec<f64>,
}

impl PumpPressureMap {
    pub fn new(commands: Vec<f64>, pressures: Vec<f64>) -> Result<Self> {
        let m = PumpPressureMap { commands, pressures };
        m.table()?;
        Ok(m)
    }

    fn table(&self) -> Result<Table1d> {
        Table1d::new(self.commands.clone(), self.pressures.clone())
    }

    pub fn pressure(&self, x: f64) -> f64 {
        interp_linear(&self.commands, &self.pressures, x)
    }

    pub fn max_pressure(&self) -> f64 {
        self.pressures.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest command whose setpoint exceeds `p`, or `None` if no
    /// command reaches it.
    pub fn onset_command(&self, p: f64) -> Option<f64> {
        if self.pressures[0] > p {
            return Some(self.commands[0]);
        }
        for i in 0..self.commands.len() - 1 {
            let (p0, p1) = (self.pressures[i], self.pressures[i + 1]);
            if p1 > p && p0 <= p {
                let t = (p - p0) / (p1 - p0);
                return Some(self.commands[i] + t * (self.commands[i + 1] - self.commands[i]));
            }
        }
        None
    }

    pub fn validate(&self, relief: f64) -> Result<()> {
        let t = self.table()?;
        if !t.is_non_decreasing() {
            return Err(Error::InvalidModel("pump map must be non-decreasing".into()));
        }
        if self.max_pressure() > relief * (1.0 + 1e-12) {
            return Err(Error::InvalidModel(format!(
                "pump map exceeds relief pressure {relief} Pa"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_and_finds_onset() {
        let m = PumpPressureMap::new(vec![0.1, 0.5, 1.0], vec![3.0e6, 2.3e7, 3.5e7]).unwrap();
        m.validate(3.5e7).unwrap();
        assert_eq!(m.pressure(0.0), 3.0e6);
        assert!((m.pressure(0.3) - 1.3e7).abs() < 1e-6);
        assert_eq!(m.pressure(1.0), 3.5e7);
        let x = m.onset_command(1.3e7).unwrap();
        assert!((x - 0.3).abs() < 1e-12);
        assert_eq!(m.onset_command(1.0e6), Some(0.1));
        assert_eq!(m.onset_command(3.5e7), None);
        assert!(m.validate(3.0e7).is_err());
    }
}
