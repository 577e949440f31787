//! Closed-loop cylinder linkage of a single joint.
//!
//! Each cylinder closes a triangle with the joint pivot: one side runs from
//! the pivot to the cylinder base eye, the other from the pivot to the rod
//! eye, and the cylinder's pin-to-pin length is the third side. The included
//! angle at the pivot is `offset + direction · θ`.
//!
//! The sensitivity `γ = dθ/dℓ` maps cylinder velocity to joint rate
//! (`θ̇ = γ·v`). By virtual work (`τ·θ̇ = f·v`) the same factor maps joint
//! torque to cylinder force as `f = γ·τ`, i.e. `τ = f/γ`.

use serde::{Deserialize, Serialize};

use super::Joint;
use crate::error::{Error, Result};

/// Plunger areas of one cylinder [m²]. `a_a` is the piston (head) side,
/// `a_b` the annular rod side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlungerAreas {
    pub a_a: f64,
    pub a_b: f64,
}

/// `f_m = p_a·A_a − p_b·A_b`.
pub fn cylinder_force(p_a: f64, p_b: f64, areas: &PlungerAreas) -> f64 {
    p_a * areas.a_a - p_b * areas.a_b
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderLinkage {
    /// Pivot to rod-eye distance [m].
    pub pivot_to_rod_eye: f64,
    /// Pivot to base-eye distance [m].
    pub pivot_to_base_eye: f64,
    /// Included angle at θ = 0 [rad].
    pub offset: f64,
    /// +1 or −1: how the joint angle enters the included angle.
    pub direction: f64,
    /// Pin-to-pin length at zero stroke [m].
    pub retracted_length: f64,
}

const DEGENERATE_SIN: f64 = 1e-9;

impl CylinderLinkage {
    pub fn included_angle(&self, theta: f64) -> f64 {
        self.offset + self.direction * theta
    }

    /// Pin-to-pin cylinder length [m].
    pub fn length(&self, theta: f64) -> f64 {
        let (a, b) = (self.pivot_to_rod_eye, self.pivot_to_base_eye);
        (a * a + b * b - 2.0 * a * b * self.included_angle(theta).cos()).sqrt()
    }

    /// Cylinder stroke [m] measured from fully retracted.
    pub fn stroke(&self, theta: f64) -> f64 {
        self.length(theta) - self.retracted_length
    }

    /// dℓ/dθ [m/rad].
    pub fn length_rate(&self, joint: Joint, theta: f64) -> Result<f64> {
        let beta = self.included_angle(theta);
        let s = beta.sin();
        if s.abs() < DEGENERATE_SIN {
            return Err(Error::DegenerateLinkage { joint, angle: beta });
        }
        let (a, b) = (self.pivot_to_rod_eye, self.pivot_to_base_eye);
        Ok(self.direction * a * b * s / self.length(theta))
    }

    /// γ = dθ/dℓ [rad/m].
    pub fn sensitivity(&self, joint: Joint, theta: f64) -> Result<f64> {
        Ok(1.0 / self.length_rate(joint, theta)?)
    }

    /// Inverse of [`CylinderLinkage::length`] on the branch where the
    /// included angle lies in (0, π).
    pub fn angle_from_length(&self, joint: Joint, length: f64) -> Result<f64> {
        let (a, b) = (self.pivot_to_rod_eye, self.pivot_to_base_eye);
        let c = (a * a + b * b - length * length) / (2.0 * a * b);
        if !(-1.0..=1.0).contains(&c) {
            return Err(Error::DegenerateLinkage { joint, angle: f64::NAN });
        }
        Ok((c.acos() - self.offset) / self.direction)
    }
}

/// θ̇ = γ·v.
pub fn cyl_vel_to_joint_rate(gamma: f64, v: f64) -> f64 {
    gamma * v
}

/// v = θ̇/γ.
pub fn joint_rate_to_cyl_vel(gamma: f64, theta_dot: f64) -> f64 {
    theta_dot / gamma
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn symmetric() -> CylinderLinkage {
        CylinderLinkage {
            pivot_to_rod_eye: 1.0,
            pivot_to_base_eye: 1.0,
            offset: std::f64::consts::FRAC_PI_2,
            direction: 1.0,
            retracted_length: 0.8,
        }
    }

    #[test]
    fn force_examples() {
        let areas = PlungerAreas { a_a: 0.01, a_b: 0.008 };
        assert!((cylinder_force(10.0e6, 5.0e6, &areas) - 60_000.0).abs() < 1e-6);
        assert_eq!(cylinder_force(0.0, 0.0, &areas), 0.0);
        assert_eq!(cylinder_force(8.0e6, 10.0e6, &areas), 0.0);
    }

    #[test]
    fn sensitivity_matches_finite_difference_of_stroke() {
        let l = symmetric();
        let h = 1e-5;
        let fd = (l.stroke(h) - l.stroke(-h)) / (2.0 * h);
        let gamma = l.sensitivity(Joint::Boom, 0.0).unwrap();
        assert!((1.0 / fd - gamma).abs() < 1e-8 * gamma.abs(), "{fd} vs {gamma}");
    }

    #[test]
    fn mirrored_angles_of_isosceles_linkage() {
        // Included angles β and −β give the same triangle mirrored about the
        // base line: same length, and |γ| = 1/(a·cos(β/2)) on both sides.
        let l = CylinderLinkage {
            offset: 0.0,
            ..symmetric()
        };
        for beta in [0.3, 0.9, 1.7, 2.6] {
            let g1 = l.sensitivity(Joint::Stick, beta).unwrap();
            let g2 = l.sensitivity(Joint::Stick, -beta).unwrap();
            assert!((l.length(beta) - l.length(-beta)).abs() < 1e-15);
            assert!((g1.abs() - g2.abs()).abs() < 1e-12);
            assert!((g1 - 1.0 / (beta / 2.0).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn collapsed_triangle_is_degenerate() {
        let l = CylinderLinkage {
            offset: 0.0,
            ..symmetric()
        };
        assert!(matches!(
            l.sensitivity(Joint::Bucket, 0.0),
            Err(Error::DegenerateLinkage {
                joint: Joint::Bucket,
                ..
            })
        ));
    }

    proptest! {
        #[test]
        fn rate_conversions_are_inverse(theta in -1.2f64..1.2, rate in -1.0f64..1.0) {
            let l = symmetric();
            let g = l.sensitivity(Joint::Boom, theta).unwrap();
            let back = cyl_vel_to_joint_rate(g, joint_rate_to_cyl_vel(g, rate));
            prop_assert!((back - rate).abs() < 1e-12);
        }

        #[test]
        fn angle_from_length_inverts_length(theta in -1.4f64..1.4) {
            let l = symmetric();
            let back = l.angle_from_length(Joint::Boom, l.length(theta)).unwrap();
            prop_assert!((back - theta).abs() < 1e-7);
        }
    }
}
