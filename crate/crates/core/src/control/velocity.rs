use serde::{Deserialize, Serialize};

use super::pid::{PidParams, PidState};
use crate::calibration::{CausalSlope, FeedForwardTables, HydraulicFeedForward, SAVGOL_WINDOW};
use crate::error::{Error, Result};
use crate::hydraulics::Direction;
use crate::kinematics::{cylinder_force, Joint, MachineModel, PerJoint};
use crate::sim::SensorFrame;

/// Load pressure the NFC feed-forward is evaluated at.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "pressure")]
pub enum LoadInput {
    /// Inertia-compensated pressure from the chamber sensors.
    #[default]
    Measured,
    /// A fixed pressure [Pa], ignoring the load (for comparisons).
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityLoopConfig {
    /// Loop period [s].
    pub period: f64,
    /// Target rates below this magnitude get no feed-forward [rad/s].
    pub rate_deadband: f64,
    #[serde(default)]
    pub load_input: LoadInput,
}

impl Default for VelocityLoopConfig {
    fn default() -> Self {
        VelocityLoopConfig {
            period: 0.01,
            rate_deadband: 1e-4,
            load_input: LoadInput::Measured,
        }
    }
}

/// One velocity-loop output with its parts.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VelocityCommand {
    /// Valve commands sent, in [−1, 1].
    pub commands: [f64; 3],
    pub ff: [f64; 3],
    pub pid: [f64; 3],
    /// Load pressure the NFC table was evaluated at [Pa]; zero for LS.
    pub load_pressure: [f64; 3],
    /// The sensor frame was stale and the previous command was held.
    pub fault: bool,
}

/// Hydraulics-aware joint velocity loop: target joint rates become
/// cylinder velocities through γ, a calibrated feed-forward turns those
/// into valve commands, and a parallel PID on the rate error corrects the
/// rest.
#[derive(Debug, Clone)]
pub struct JointVelocityController {
    machine: MachineModel,
    ff: HydraulicFeedForward,
    pid: PidParams,
    config: VelocityLoopConfig,
    pid_state: PerJoint<PidState>,
    acceleration: PerJoint<CausalSlope>,
    last: VelocityCommand,
    saturation: [f64; 3],
}

impl JointVelocityController {
    pub fn new(
        machine: MachineModel,
        ff: HydraulicFeedForward,
        pid: PidParams,
        config: VelocityLoopConfig,
    ) -> Result<Self> {
        ff.validate()?;
        pid.validate()?;
        if ff.architecture != machine.architecture {
            return Err(Error::Config(format!(
                "feed-forward is for {:?} hydraulics but machine `{}` is {:?}",
                ff.architecture, machine.name, machine.architecture
            )));
        }
        if !(config.period > 0.0) {
            return Err(Error::Config("velocity loop period must be positive".into()));
        }
        Ok(JointVelocityController {
            machine,
            ff,
            pid,
            config,
            pid_state: PerJoint::default(),
            acceleration: PerJoint::from_fn(|_| CausalSlope::new(SAVGOL_WINDOW)),
            last: VelocityCommand::default(),
            saturation: [0.0; 3],
        })
    }

    pub fn config(&self) -> &VelocityLoopConfig {
        &self.config
    }

    pub fn reset(&mut self) {
        self.pid_state = PerJoint::default();
        for j in Joint::ALL {
            self.acceleration[j].reset();
        }
        self.last = VelocityCommand::default();
        self.saturation = [0.0; 3];
    }

    /// Command for `target_rates` given the latest frame, at time `now`. A
    /// frame older than two loop periods holds the previous command and
    /// flags a fault.
    pub fn update(&mut self, target_rates: [f64; 3], frame: &SensorFrame, now: f64) -> Result<VelocityCommand> {
        if target_rates.iter().any(|r| !r.is_finite()) {
            return Err(Error::DataQuality(format!("non-finite target rates {target_rates:?}")));
        }
        let age = now - frame.timestamp;
        if age > 2.0 * self.config.period + 1e-9 {
            log::warn!(
                "stale sensor frame: {}",
                Error::StaleSensor {
                    age,
                    limit: 2.0 * self.config.period
                }
            );
            return Ok(VelocityCommand {
                fault: true,
                ..self.last
            });
        }
        let gamma = self.machine.sensitivity(&frame.theta)?;
        let mut out = VelocityCommand::default();
        for j in Joint::ALL {
            let i = j.index();
            let accel = self.acceleration[j].push(frame.timestamp, frame.theta_dot[i]);
            let (ff, p_f) = self.feedforward(j, target_rates[i], gamma[j], accel, frame);
            let error = target_rates[i] - frame.theta_dot[i];
            let gains = self.pid.gains[j];
            let pid = self.pid_state[j].update(&gains, &self.pid, error, self.config.period, self.saturation[i]);
            let raw = ff + pid;
            let cmd = raw.clamp(-1.0, 1.0);
            self.saturation[i] = if raw > 1.0 {
                1.0
            } else if raw < -1.0 {
                -1.0
            } else {
                0.0
            };
            out.commands[i] = cmd;
            out.ff[i] = ff;
            out.pid[i] = pid;
            out.load_pressure[i] = p_f;
        }
        self.last = out;
        Ok(out)
    }

    /// Feed-forward command and the load pressure used, for one joint.
    fn feedforward(&self, j: Joint, rate: f64, gamma: f64, accel: f64, frame: &SensorFrame) -> (f64, f64) {
        if rate.abs() < self.config.rate_deadband {
            return (0.0, 0.0);
        }
        let v = rate / gamma;
        match &self.ff.tables {
            FeedForwardTables::Ls(t) => (t[j].command(v).0, 0.0),
            FeedForwardTables::Nfc(t) => {
                let spec = &self.machine.joints[j];
                let d = Direction::of(v);
                let p_f = match self.config.load_input {
                    LoadInput::Measured => {
                        let i = j.index();
                        let f_m = cylinder_force(frame.p_a[i], frame.p_b[i], &spec.areas);
                        d.load_pressure(f_m - gamma * spec.inertia * accel, &spec.areas)
                    }
                    LoadInput::Fixed(p) => p,
                };
                let flow = v.abs() * d.area(&spec.areas);
                (d.sign() * t[j].direction(d).eval(flow, p_f).value, p_f)
            }
        }
    }
}
