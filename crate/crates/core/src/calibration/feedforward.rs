use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{read_versioned, write_toml, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::hydraulics::Direction;
use crate::kinematics::{Architecture, Joint, PerJoint};
use crate::lut::{interp_linear, Grid2d, GridValue};

/// Sampled LS steady-state map, command → cylinder velocity, stored
/// non-decreasing and inverted on lookup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsJointTable {
    /// Signed test commands, strictly increasing.
    pub commands: Vec<f64>,
    /// Steady-state cylinder velocity at each command [m/s].
    pub velocities: Vec<f64>,
}

impl LsJointTable {
    pub fn velocity(&self, command: f64) -> f64 {
        interp_linear(&self.commands, &self.velocities, command)
    }

    /// Command for a desired cylinder velocity. Positive requests take the
    /// smallest command reaching the velocity, negative ones the largest,
    /// so a deadband plateau is jumped across in the direction of motion.
    /// Requests beyond the sampled range return the end command and `true`.
    pub fn command(&self, v: f64) -> (f64, bool) {
        let (x, y) = (&self.commands, &self.velocities);
        let n = x.len();
        if n == 1 || v == 0.0 {
            return (if n == 1 { x[0] } else { 0.0 }, false);
        }
        if v > 0.0 {
            if y[0] >= v {
                return (x[0], false);
            }
            for i in 0..n - 1 {
                if y[i + 1] >= v {
                    if y[i + 1] == v {
                        return (x[i + 1], false);
                    }
                    let t = (v - y[i]) / (y[i + 1] - y[i]);
                    return (x[i] + t * (x[i + 1] - x[i]), false);
                }
            }
            (x[n - 1], true)
        } else {
            if y[n - 1] <= v {
                return (x[n - 1], false);
            }
            for i in (1..n).rev() {
                if y[i - 1] <= v {
                    if y[i - 1] == v {
                        return (x[i - 1], false);
                    }
                    let t = (y[i] - v) / (y[i] - y[i - 1]);
                    return (x[i] - t * (x[i] - x[i - 1]), false);
                }
            }
            (x[0], true)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.commands.len() == self.velocities.len()
            && !self.commands.is_empty()
            && self.commands.windows(2).all(|w| w[0] < w[1])
            && self.velocities.windows(2).all(|w| w[0] <= w[1])
            && self.commands.iter().all(|c| (-1.0..=1.0).contains(c));
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidModel(
                "LS table needs increasing commands in [-1, 1] and non-decreasing velocities".into(),
            ))
        }
    }
}

/// Inverted NFC flow law for one direction: command magnitude on a grid of
/// desired flow × load pressure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NfcTable {
    /// Desired flow nodes [m³/s].
    pub flow: Vec<f64>,
    /// Load pressure nodes [Pa].
    pub load_pressure: Vec<f64>,
    /// `command[i][j]` at `(flow[i], load_pressure[j])`.
    pub command: Vec<Vec<f64>>,
    /// Cells whose flow is out of reach even at full command; they hold
    /// the maximum command.
    pub saturated: Vec<Vec<bool>>,
}

impl NfcTable {
    fn grid(&self) -> Grid2d {
        Grid2d {
            axis0: self.flow.clone(),
            axis1: self.load_pressure.clone(),
            values: self.command.clone(),
        }
    }

    /// Bilinear lookup; `clamped` reports a query outside the grid.
    pub fn eval(&self, flow: f64, load_pressure: f64) -> GridValue {
        let mut g = self.grid().eval(flow, load_pressure);
        g.value = g.value.clamp(0.0, 1.0);
        g
    }

    pub fn max_flow(&self) -> f64 {
        self.flow[self.flow.len() - 1]
    }

    pub fn validate(&self) -> Result<()> {
        self.grid().validate()?;
        if self.saturated.len() != self.flow.len() || self.saturated.iter().any(|r| r.len() != self.load_pressure.len())
        {
            return Err(Error::InvalidModel("saturation mask shape does not match grid".into()));
        }
        let c = &self.command;
        let tol = 1e-12;
        for i in 0..self.flow.len() {
            for j in 0..self.load_pressure.len() {
                if !(0.0..=1.0).contains(&c[i][j]) {
                    return Err(Error::InvalidModel("NFC command outside [0, 1]".into()));
                }
                if i > 0 && c[i][j] < c[i - 1][j] - tol {
                    return Err(Error::InvalidModel("NFC table not monotone in flow".into()));
                }
                if j > 0 && c[i][j] < c[i][j - 1] - tol {
                    return Err(Error::InvalidModel("NFC table not monotone in load pressure".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NfcJointTables {
    pub extend: NfcTable,
    pub retract: NfcTable,
}

impl NfcJointTables {
    pub fn direction(&self, d: Direction) -> &NfcTable {
        match d {
            Direction::Extend => &self.extend,
            Direction::Retract => &self.retract,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
#[allow(clippy::large_enum_variant)]
pub enum FeedForwardTables {
    #[serde(rename = "LS_1D")]
    Ls(PerJoint<LsJointTable>),
    #[serde(rename = "NFC_2D")]
    Nfc(PerJoint<NfcJointTables>),
}

/// Where a calibrated artifact came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the calibration dataset.
    pub dataset_sha256: String,
    /// Creation date, `YYYY-MM-DD`.
    pub created: String,
}

impl Provenance {
    pub fn today(dataset_sha256: String) -> Self {
        Provenance {
            dataset_sha256,
            created: chrono::Utc::now().format("%Y-%m-%d").to_string(),
        }
    }
}

/// Calibrated hydraulic feed-forward of one machine, as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydraulicFeedForward {
    pub schema_version: u32,
    pub machine: String,
    pub architecture: Architecture,
    pub provenance: Provenance,
    pub tables: FeedForwardTables,
}

impl HydraulicFeedForward {
    pub fn new(
        machine: &str,
        architecture: Architecture,
        tables: FeedForwardTables,
        dataset_sha256: String,
    ) -> Result<Self> {
        let ff = HydraulicFeedForward {
            schema_version: SCHEMA_VERSION,
            machine: machine.to_string(),
            architecture,
            provenance: Provenance::today(dataset_sha256),
            tables,
        };
        ff.validate()?;
        Ok(ff)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.tables, self.architecture) {
            (FeedForwardTables::Ls(t), Architecture::Ls) => {
                for j in Joint::ALL {
                    t[j].validate()?;
                }
            }
            (FeedForwardTables::Nfc(t), Architecture::Nfc) => {
                for j in Joint::ALL {
                    t[j].extend.validate()?;
                    t[j].retract.validate()?;
                }
            }
            _ => {
                return Err(Error::InvalidModel(
                    "feed-forward tables do not match the architecture".into(),
                ))
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_toml(self, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ff: HydraulicFeedForward = read_versioned(path)?;
        ff.validate().map_err(|e| Error::Parse {
            path: path.into(),
            message: e.to_string(),
        })?;
        Ok(ff)
    }
}
