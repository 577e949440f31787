//! Per-step run logs with a fixed CSV column schema.
//!
//! One row per plant step. Joint quantities come in boom, stick, bucket
//! order. Everything is derived from the sensor frame the controller saw,
//! plus the commands it issued, so the same schema serves simulated and
//! recorded runs.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hydraulics::Direction;
use crate::kinematics::{cylinder_force, Joint, JointConfiguration, MachineModel, PerJoint, PlanarChain};
use crate::sim::SensorFrame;

/// Column order of the CSV representation.
pub const COLUMNS: [&str; 44] = [
    "time",
    "cabin_pitch",
    "cmd_boom",
    "cmd_stick",
    "cmd_bucket",
    "theta_boom",
    "theta_stick",
    "theta_bucket",
    "theta_dot_boom",
    "theta_dot_stick",
    "theta_dot_bucket",
    "p_a_boom",
    "p_a_stick",
    "p_a_bucket",
    "p_b_boom",
    "p_b_stick",
    "p_b_bucket",
    "fn_pressure_boom",
    "fn_pressure_stick",
    "fn_pressure_bucket",
    "target_rate_boom",
    "target_rate_stick",
    "target_rate_bucket",
    "ff_boom",
    "ff_stick",
    "ff_bucket",
    "pid_boom",
    "pid_stick",
    "pid_bucket",
    "ee_x",
    "ee_z",
    "ee_phi",
    "ee_vx",
    "ee_vz",
    "target_height",
    "height_error",
    "soil_force_x",
    "soil_force_z",
    "mpc_cost",
    "mpc_iterations",
    "mpc_degraded",
    "stalled",
    "fault",
    "phase",
];

/// One logged step. Pressures in Pa, angles in rad, positions in m.
/// `fn_pressure_*` is the measured force over the active area of the
/// commanded direction.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LogRow {
    pub time: f64,
    pub cabin_pitch: f64,
    pub cmd_boom: f64,
    pub cmd_stick: f64,
    pub cmd_bucket: f64,
    pub theta_boom: f64,
    pub theta_stick: f64,
    pub theta_bucket: f64,
    pub theta_dot_boom: f64,
    pub theta_dot_stick: f64,
    pub theta_dot_bucket: f64,
    pub p_a_boom: f64,
    pub p_a_stick: f64,
    pub p_a_bucket: f64,
    pub p_b_boom: f64,
    pub p_b_stick: f64,
    pub p_b_bucket: f64,
    pub fn_pressure_boom: f64,
    pub fn_pressure_stick: f64,
    pub fn_pressure_bucket: f64,
    pub target_rate_boom: f64,
    pub target_rate_stick: f64,
    pub target_rate_bucket: f64,
    pub ff_boom: f64,
    pub ff_stick: f64,
    pub ff_bucket: f64,
    pub pid_boom: f64,
    pub pid_stick: f64,
    pub pid_bucket: f64,
    pub ee_x: f64,
    pub ee_z: f64,
    pub ee_phi: f64,
    pub ee_vx: f64,
    pub ee_vz: f64,
    /// Design-surface height at `ee_x`.
    pub target_height: f64,
    /// `ee_z − target_height`.
    pub height_error: f64,
    pub soil_force_x: f64,
    pub soil_force_z: f64,
    pub mpc_cost: f64,
    pub mpc_iterations: u32,
    pub mpc_degraded: bool,
    pub stalled: bool,
    pub fault: bool,
    /// Free-form segment label (e.g. a calibration maneuver id).
    pub phase: u32,
}

macro_rules! joint_accessors {
    ($($get:ident, $set:ident => $b:ident, $s:ident, $k:ident;)*) => {
        impl LogRow {
            $(
                pub fn $get(&self) -> PerJoint<f64> {
                    PerJoint::new(self.$b, self.$s, self.$k)
                }

                pub fn $set(&mut self, v: PerJoint<f64>) {
                    self.$b = v.boom;
                    self.$s = v.stick;
                    self.$k = v.bucket;
                }
            )*
        }
    };
}

joint_accessors! {
    cmd, set_cmd => cmd_boom, cmd_stick, cmd_bucket;
    theta, set_theta => theta_boom, theta_stick, theta_bucket;
    theta_dot, set_theta_dot => theta_dot_boom, theta_dot_stick, theta_dot_bucket;
    p_a, set_p_a => p_a_boom, p_a_stick, p_a_bucket;
    p_b, set_p_b => p_b_boom, p_b_stick, p_b_bucket;
    fn_pressure, set_fn_pressure => fn_pressure_boom, fn_pressure_stick, fn_pressure_bucket;
    target_rate, set_target_rate => target_rate_boom, target_rate_stick, target_rate_bucket;
    ff, set_ff => ff_boom, ff_stick, ff_bucket;
    pid, set_pid => pid_boom, pid_stick, pid_bucket;
}

impl LogRow {
    /// Row filled from a sensor frame and the commands issued in response:
    /// joint signals, pressures, function pressures in the commanded
    /// direction, and the blade pose from forward kinematics.
    pub fn from_frame(frame: &SensorFrame, machine: &MachineModel, commands: [f64; 3]) -> LogRow {
        let chain = PlanarChain::from_model(machine);
        let q = JointConfiguration {
            theta: frame.theta,
            theta_dot: frame.theta_dot,
            theta_ddot: [0.0; 3],
        };
        let ee = chain.state(frame.cabin_pitch, &q);
        let mut row = LogRow {
            time: frame.timestamp,
            cabin_pitch: frame.cabin_pitch,
            ee_x: ee.p[0],
            ee_z: ee.p[1],
            ee_phi: ee.phi,
            ee_vx: ee.v[0],
            ee_vz: ee.v[1],
            ..LogRow::default()
        };
        row.set_cmd(PerJoint::from_array(commands));
        row.set_theta(PerJoint::from_array(frame.theta));
        row.set_theta_dot(PerJoint::from_array(frame.theta_dot));
        row.set_p_a(PerJoint::from_array(frame.p_a));
        row.set_p_b(PerJoint::from_array(frame.p_b));
        row.set_fn_pressure(PerJoint::from_fn(|j| {
            let i = j.index();
            let areas = machine.joints[j].areas;
            let f = cylinder_force(frame.p_a[i], frame.p_b[i], &areas);
            Direction::of(commands[i]).load_pressure(f, &areas)
        }));
        row
    }
}

/// An ordered sequence of log rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradingLog {
    pub rows: Vec<LogRow>,
}

impl GradingLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: LogRow) {
        self.rows.push(row);
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.time).collect()
    }

    /// One column of a per-joint quantity.
    pub fn series(&self, joint: Joint, f: impl Fn(&LogRow) -> PerJoint<f64>) -> Vec<f64> {
        self.rows.iter().map(|r| f(r)[joint]).collect()
    }

    pub fn duration(&self) -> f64 {
        match (self.rows.first(), self.rows.last()) {
            (Some(a), Some(b)) => b.time - a.time,
            _ => 0.0,
        }
    }

    pub fn timestamps_increasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].time > w[0].time)
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        if self.rows.is_empty() {
            wtr.write_record(COLUMNS)?;
        }
        for r in &self.rows {
            wtr.serialize(r)?;
        }
        wtr.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers()?.clone();
        if header.iter().ne(COLUMNS.iter().copied()) {
            return Err(Error::Parse {
                path: "<log>".into(),
                message: "log header does not match the expected column schema".into(),
            });
        }
        let rows = rdr.deserialize().collect::<std::result::Result<Vec<LogRow>, _>>()?;
        Ok(GradingLog { rows })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(std::io::BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(std::io::BufReader::new(file)).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                path: path.into(),
                message,
            },
            Error::Csv(c) => Error::Parse {
                path: path.into(),
                message: c.to_string(),
            },
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_matches_schema() {
        let log = GradingLog {
            rows: vec![LogRow::default()],
        };
        let mut buf = Vec::new();
        log.write(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), COLUMNS.join(","));
    }

    #[test]
    fn round_trip_is_exact() {
        let mut row = LogRow {
            time: 0.1 + 0.2,
            ee_x: -1.0 / 3.0,
            p_a_stick: 3.4999999e7,
            mpc_iterations: 7,
            stalled: true,
            ..LogRow::default()
        };
        row.set_theta(PerJoint::new(1e-300, -0.0, std::f64::consts::PI));
        let log = GradingLog {
            rows: vec![row, LogRow::default()],
        };
        let mut buf = Vec::new();
        log.write(&mut buf).unwrap();
        let back = GradingLog::read(buf.as_slice()).unwrap();
        assert_eq!(back, log);
    }

    #[test]
    fn empty_log_keeps_header() {
        let mut buf = Vec::new();
        GradingLog::new().write(&mut buf).unwrap();
        assert!(GradingLog::read(buf.as_slice()).unwrap().is_empty());
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(GradingLog::read("a,b\n1,2\n".as_bytes()).is_err());
    }
}
