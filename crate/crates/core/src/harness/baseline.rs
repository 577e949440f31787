use serde::{Deserialize, Serialize};

use crate::control::{DesignSurface, PassController, PidGains, PidParams, PidState};
use crate::error::Result;
use crate::kinematics::{Joint, MachineModel, PerJoint, PlanarChain};
use crate::log::LogRow;
use crate::sim::SensorFrame;

/// Gains of the comparison controller, tuned once for in-air tracking on
/// the shipped machines and then frozen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    pub pid: PidParams,
    /// Control period [s].
    pub period: f64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        BaselineParams {
            pid: PidParams {
                gains: PerJoint::splat(PidGains {
                    kp: 16.0,
                    ki: 48.0,
                    kd: 1.6,
                }),
                integrator_limit: 0.5,
                output_limit: 1.0,
            },
            period: 0.01,
        }
    }
}

/// Inverse kinematics plus per-joint PID on joint angle: the blade
/// reference moves along the plane at the grading speed from wherever the
/// blade started, and the valve command is the PID output alone, with no
/// hydraulic model, load compensation or delay handling.
#[derive(Debug, Clone)]
pub struct BaselineController {
    chain: PlanarChain,
    machine: MachineModel,
    surface: DesignSurface,
    params: BaselineParams,
    state: PerJoint<PidState>,
    start: Option<(f64, f64)>,
    reference: Option<[f64; 3]>,
    saturation: [f64; 3],
}

impl BaselineController {
    pub fn new(machine: &MachineModel, surface: DesignSurface, params: BaselineParams) -> Result<Self> {
        params.pid.validate()?;
        Ok(BaselineController {
            chain: PlanarChain::from_model(machine),
            machine: machine.clone(),
            surface,
            params,
            state: PerJoint::default(),
            start: None,
            reference: None,
            saturation: [0.0; 3],
        })
    }

    /// Joint-angle reference at `now`. Unreachable blade targets keep the
    /// previous reference.
    fn reference(&mut self, frame: &SensorFrame, now: f64) -> [f64; 3] {
        let (t0, x0) = *self.start.get_or_insert_with(|| {
            let p = self.chain.position(frame.cabin_pitch, &frame.theta);
            (now, p[0])
        });
        let x = x0 + self.surface.v_x * (now - t0);
        let target = [x, self.surface.height_at(x)];
        match self.chain.inverse(frame.cabin_pitch, target, self.surface.phi) {
            Ok(mut theta) => {
                self.machine.clamp_to_limits(&mut theta);
                self.reference = Some(theta);
                theta
            }
            Err(_) => self.reference.unwrap_or(frame.theta),
        }
    }
}

impl PassController for BaselineController {
    fn step(&mut self, frame: &SensorFrame, now: f64, row: &mut LogRow) -> Result<[f64; 3]> {
        let previous = self.reference;
        let reference = self.reference(frame, now);
        let mut commands = [0.0; 3];
        let mut rates = [0.0; 3];
        for j in Joint::ALL {
            let i = j.index();
            let error = reference[i] - frame.theta[i];
            let u = self.state[j].update(
                &self.params.pid.gains[j],
                &self.params.pid,
                error,
                self.params.period,
                self.saturation[i],
            );
            commands[i] = u.clamp(-1.0, 1.0);
            self.saturation[i] = if u >= 1.0 {
                1.0
            } else if u <= -1.0 {
                -1.0
            } else {
                0.0
            };
            rates[i] = previous.map_or(0.0, |p| (reference[i] - p[i]) / self.params.period);
        }
        row.set_target_rate(PerJoint::from_array(rates));
        row.set_pid(PerJoint::from_array(commands));
        Ok(commands)
    }
}
