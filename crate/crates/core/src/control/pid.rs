use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{Joint, PerJoint};

/// Gains of one joint's parallel PID on the joint-rate error.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

/// PID settings of the joint velocity loop. Outputs are valve commands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidParams {
    pub gains: PerJoint<PidGains>,
    /// Bound on the integral contribution [command].
    pub integrator_limit: f64,
    /// Bound on the total PID contribution [command], at most 1.
    pub output_limit: f64,
}

impl PidParams {
    /// All gains zero: feed-forward only.
    pub fn disabled() -> Self {
        PidParams {
            gains: PerJoint::splat(PidGains::default()),
            integrator_limit: 0.0,
            output_limit: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let gains_ok = Joint::ALL.iter().all(|&j| {
            let g = self.gains[j];
            g.kp >= 0.0 && g.ki >= 0.0 && g.kd >= 0.0
        });
        if !gains_ok || !(0.0..=1.0).contains(&self.output_limit) || !(self.integrator_limit >= 0.0) {
            return Err(Error::InvalidModel(
                "PID gains and limits must be non-negative with output limit at most 1".into(),
            ));
        }
        Ok(())
    }
}

/// Running state of one joint's PID.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    pub integral: f64,
    pub last_error: Option<f64>,
}

impl PidState {
    /// PID output for `error` over `dt`. The integrator only advances when
    /// `saturated` does not report that the previous total command clamped
    /// in the direction this error would push it.
    pub fn update(&mut self, gains: &PidGains, params: &PidParams, error: f64, dt: f64, saturated: f64) -> f64 {
        let pushes_further = saturated != 0.0 && saturated.signum() == error.signum();
        if !pushes_further {
            self.integral =
                (self.integral + gains.ki * error * dt).clamp(-params.integrator_limit, params.integrator_limit);
        }
        let derivative = match self.last_error {
            Some(e) if dt > 0.0 => (error - e) / dt,
            _ => 0.0,
        };
        self.last_error = Some(error);
        (gains.kp * error + self.integral + gains.kd * derivative).clamp(-params.output_limit, params.output_limit)
    }

    pub fn reset(&mut self) {
        *self = PidState::default();
    }
}
