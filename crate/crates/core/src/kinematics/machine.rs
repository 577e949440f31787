use serde::{Deserialize, Serialize};

use super::{CylinderLinkage, Joint, PerJoint, PlungerAreas};
use crate::error::{Error, Result};
use crate::units::Pressure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Architecture {
    /// Load sensing: pressure-compensated, load-independent flow.
    #[serde(rename = "LS")]
    Ls,
    /// Negative flow control: flow depends on command and load.
    #[serde(rename = "NFC")]
    Nfc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkLengths {
    pub boom: f64,
    pub stick: f64,
    pub bucket: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLimits {
    pub min: f64,
    pub max: f64,
    /// Most negative admissible rate [rad/s].
    pub rate_min: f64,
    /// Most positive admissible rate [rad/s].
    pub rate_max: f64,
}

impl JointLimits {
    pub fn contains(&self, theta: f64) -> bool {
        (self.min..=self.max).contains(&theta)
    }
}

/// Mass distribution used for gravity loads in the plant simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassProperties {
    /// Link masses [kg], each lumped at a fraction of the link length.
    pub link_mass: PerJoint<f64>,
    /// Position of each link's centre of mass as a fraction of its length.
    pub com_fraction: PerJoint<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub limits: JointLimits,
    pub linkage: CylinderLinkage,
    pub areas: PlungerAreas,
    /// Lumped inertia about the joint axis [kg·m²].
    pub inertia: f64,
    /// Viscous joint friction [N·m·s/rad].
    #[serde(default)]
    pub friction: f64,
}

/// Static description of one excavator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineModel {
    pub name: String,
    pub architecture: Architecture,
    /// Operating weight [kg], informational.
    #[serde(default)]
    pub operating_weight: f64,
    pub link_lengths: LinkLengths,
    /// Boom foot pin (x, z) in the cabin frame [m].
    pub boom_pivot: [f64; 2],
    /// Nominal cabin pitch [rad]; runs may override it with a measurement.
    #[serde(default)]
    pub cabin_pitch: f64,
    /// Constant telescopic stick extension [m].
    #[serde(default)]
    pub tele_extension: f64,
    pub bucket_width: f64,
    pub max_function_pressure: Pressure,
    pub mass: MassProperties,
    pub joints: PerJoint<JointSpec>,
}

impl MachineModel {
    pub fn joint(&self, j: Joint) -> &JointSpec {
        &self.joints[j]
    }

    pub fn limits(&self) -> PerJoint<JointLimits> {
        self.joints.map(|_, s| s.limits)
    }

    /// Effective stick length including the telescopic extension.
    pub fn stick_length(&self) -> f64 {
        self.link_lengths.stick + self.tele_extension
    }

    /// Per-joint sensitivity γ = dθ/dℓ at `theta`.
    pub fn sensitivity(&self, theta: &[f64; 3]) -> Result<PerJoint<f64>> {
        let mut out = PerJoint::splat(0.0);
        for j in Joint::ALL {
            out[j] = self.joints[j].linkage.sensitivity(j, theta[j.index()])?;
        }
        Ok(out)
    }

    pub fn strokes(&self, theta: &[f64; 3]) -> PerJoint<f64> {
        PerJoint::from_fn(|j| self.joints[j].linkage.stroke(theta[j.index()]))
    }

    pub fn clamp_to_limits(&self, theta: &mut [f64; 3]) {
        for j in Joint::ALL {
            let l = self.joints[j].limits;
            theta[j.index()] = theta[j.index()].clamp(l.min, l.max);
        }
    }

    /// Checks the structural invariants: positive lengths and areas, ordered
    /// limits, A_a > A_b, and positive extension ⇔ positive joint rate over
    /// the whole joint range.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidModel(format!("{}: {m}", self.name)));
        let l = &self.link_lengths;
        if !(l.boom > 0.0 && l.stick > 0.0 && l.bucket > 0.0) {
            return bad("link lengths must be positive".into());
        }
        if self.tele_extension < 0.0 || !self.tele_extension.is_finite() {
            return bad("tele extension must be finite and non-negative".into());
        }
        if !(self.bucket_width > 0.0) || !(self.max_function_pressure.pa() > 0.0) {
            return bad("bucket width and max function pressure must be positive".into());
        }
        for (j, s) in self.joints.iter() {
            let lim = &s.limits;
            if !(lim.min < lim.max) || !lim.min.is_finite() || !lim.max.is_finite() {
                return bad(format!("{j}: joint limits must satisfy min < max"));
            }
            if !(lim.rate_min < 0.0 && lim.rate_max > 0.0) || !lim.rate_min.is_finite() || !lim.rate_max.is_finite() {
                return bad(format!("{j}: rate limits must be finite and bracket zero"));
            }
            if !(s.areas.a_a > 0.0 && s.areas.a_b > 0.0) {
                return bad(format!("{j}: plunger areas must be positive"));
            }
            if !(s.areas.a_a > s.areas.a_b) {
                return bad(format!("{j}: A_a must exceed A_b"));
            }
            if !(s.inertia > 0.0) || s.friction < 0.0 {
                return bad(format!("{j}: inertia must be positive, friction non-negative"));
            }
            let k = &s.linkage;
            if !(k.pivot_to_rod_eye > 0.0 && k.pivot_to_base_eye > 0.0 && k.retracted_length > 0.0) {
                return bad(format!("{j}: linkage lengths must be positive"));
            }
            if k.direction.abs() != 1.0 {
                return bad(format!("{j}: linkage direction must be +1 or -1"));
            }
            for i in 0..=32 {
                let th = lim.min + (lim.max - lim.min) * i as f64 / 32.0;
                let rate = k.length_rate(j, th)?;
                if rate <= 0.0 {
                    return bad(format!(
                        "{j}: cylinder must extend for positive joint rate (dl/dθ = {rate} at {th})"
                    ));
                }
                if k.stroke(th) < 0.0 {
                    return bad(format!("{j}: negative stroke at θ = {th}"));
                }
            }
        }
        for (j, m) in self.mass.link_mass.iter() {
            if *m < 0.0 || !(0.0..=1.0).contains(&self.mass.com_fraction[j]) {
                return bad(format!("{j}: invalid mass properties"));
            }
        }
        Ok(())
    }
}
