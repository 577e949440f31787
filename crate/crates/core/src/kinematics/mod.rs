//! Planar boom–stick–bucket kinematics and the cylinder↔joint layer.
//!
//! Frame: x forward, z up, origin on the ground below the cabin pitch axis.
//! Angles are measured counter-clockwise in the x–z plane. Joint angles are
//! relative and signed so that a positive rate is boom-up, stick-in and
//! bucket-curl, which is also the direction of cylinder extension:
//!
//! ```text
//! φ_boom   = θ_cab + θ_boom
//! φ_stick  = φ_boom  − θ_stick
//! φ_bucket = φ_stick − θ_bucket
//! ```
//!
//! The bucket pitch `φ` reported in [`EndEffectorState`] is `φ_bucket`, the
//! orientation of the pivot→blade line about the lateral axis, wrapped to
//! (−π, π]; the pitch rate `ω_y` is its time derivative.

mod chain;
mod linkage;
mod machine;

pub use chain::{
    forward_kinematics, forward_kinematics_with_derivatives, inverse_kinematics, EeDerivatives, PlanarChain,
};
pub use linkage::{cyl_vel_to_joint_rate, cylinder_force, joint_rate_to_cyl_vel, CylinderLinkage, PlungerAreas};
pub use machine::{Architecture, JointLimits, JointSpec, LinkLengths, MachineModel, MassProperties};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Index, IndexMut};

/// One of the three actuated joints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Joint {
    Boom,
    Stick,
    Bucket,
}

impl Joint {
    pub const ALL: [Joint; 3] = [Joint::Boom, Joint::Stick, Joint::Bucket];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Joint::Boom => "boom",
            Joint::Stick => "stick",
            Joint::Bucket => "bucket",
        }
    }

    pub fn parse(s: &str) -> Option<Joint> {
        Joint::ALL.into_iter().find(|j| j.name() == s)
    }
}

impl fmt::Display for Joint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A value per actuated joint.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PerJoint<T> {
    pub boom: T,
    pub stick: T,
    pub bucket: T,
}

impl<T> PerJoint<T> {
    pub fn new(boom: T, stick: T, bucket: T) -> Self {
        PerJoint { boom, stick, bucket }
    }

    pub fn from_fn(mut f: impl FnMut(Joint) -> T) -> Self {
        PerJoint {
            boom: f(Joint::Boom),
            stick: f(Joint::Stick),
            bucket: f(Joint::Bucket),
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(Joint, &T) -> U) -> PerJoint<U> {
        PerJoint {
            boom: f(Joint::Boom, &self.boom),
            stick: f(Joint::Stick, &self.stick),
            bucket: f(Joint::Bucket, &self.bucket),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Joint, &T)> {
        [
            (Joint::Boom, &self.boom),
            (Joint::Stick, &self.stick),
            (Joint::Bucket, &self.bucket),
        ]
        .into_iter()
    }
}

impl<T: Copy> PerJoint<T> {
    pub fn to_array(&self) -> [T; 3] {
        [self.boom, self.stick, self.bucket]
    }

    pub fn from_array(a: [T; 3]) -> Self {
        PerJoint::new(a[0], a[1], a[2])
    }

    pub fn splat(v: T) -> Self {
        PerJoint::new(v, v, v)
    }
}

impl<T> Index<Joint> for PerJoint<T> {
    type Output = T;
    fn index(&self, j: Joint) -> &T {
        match j {
            Joint::Boom => &self.boom,
            Joint::Stick => &self.stick,
            Joint::Bucket => &self.bucket,
        }
    }
}

impl<T> IndexMut<Joint> for PerJoint<T> {
    fn index_mut(&mut self, j: Joint) -> &mut T {
        match j {
            Joint::Boom => &mut self.boom,
            Joint::Stick => &mut self.stick,
            Joint::Bucket => &mut self.bucket,
        }
    }
}

/// Joint positions [rad], rates [rad/s] and accelerations [rad/s²].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointConfiguration {
    pub theta: [f64; 3],
    pub theta_dot: [f64; 3],
    pub theta_ddot: [f64; 3],
}

impl JointConfiguration {
    pub fn at_rest(theta: [f64; 3]) -> Self {
        JointConfiguration {
            theta,
            ..Default::default()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.theta
            .iter()
            .chain(&self.theta_dot)
            .chain(&self.theta_ddot)
            .all(|v| v.is_finite())
    }
}

/// Cabin pitch plus the three joint states.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FullConfiguration {
    pub cabin_pitch: f64,
    pub joints: JointConfiguration,
}

/// Blade-tip state in the gravity-aligned machine frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EndEffectorState {
    /// Position (x, z) [m].
    pub p: [f64; 2],
    /// Linear velocity (x, z) [m/s].
    pub v: [f64; 2],
    /// Pitch rate about the lateral axis [rad/s].
    pub omega_y: f64,
    /// Bucket pitch in (−π, π] [rad].
    pub phi: f64,
}

/// Per-cylinder measurement. The force is always derived from the chamber
/// pressures, never stored independently.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CylinderState {
    pub stroke: f64,
    pub velocity: f64,
    pub p_a: f64,
    pub p_b: f64,
}

impl CylinderState {
    pub fn force(&self, areas: &PlungerAreas) -> f64 {
        cylinder_force(self.p_a, self.p_b, areas)
    }
}

/// Wraps an angle to (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut w = a.rem_euclid(two_pi);
    if w > std::f64::consts::PI {
        w -= two_pi;
    }
    w
}
