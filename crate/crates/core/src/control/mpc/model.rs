use nalgebra::{Matrix3, Matrix4, Vector3};

use crate::calibration::JointDynamicsFit;

/// Buffer index (1-based) of the delayed input for dead time `tau`:
/// `clip(⌊τ/Δt⌋, 1, n_delay)`. A tiny tolerance keeps exact multiples of
/// `dt` from flooring one step short.
pub fn delay_steps(tau: f64, dt: f64, n_delay: usize) -> usize {
    let steps = (tau / dt + 1e-9).floor();
    (steps.max(1.0) as usize).min(n_delay.max(1))
}

/// Exact zero-order-hold discretisation of one joint's `[θ, θ̇, θ̈]` model,
/// `x⁺ = Φ·x + Γ·u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointModel {
    pub phi: Matrix3<f64>,
    pub gamma: Vector3<f64>,
}

impl JointModel {
    pub fn new(fit: &JointDynamicsFit, dt: f64) -> Self {
        let (z, w, k) = (fit.zeta, fit.omega_n, fit.k);
        #[rustfmt::skip]
        let m = Matrix4::new(
            0.0, 1.0, 0.0, 0.0,
            0.0, 0.0, 1.0, 0.0,
            0.0, -w * w, -2.0 * z * w, k * w * w,
            0.0, 0.0, 0.0, 0.0,
        );
        let e = (m * dt).exp();
        JointModel {
            phi: e.fixed_view::<3, 3>(0, 0).into_owned(),
            gamma: e.fixed_view::<3, 1>(0, 3).into_owned(),
        }
    }

    pub fn step(&self, x: [f64; 3], u: f64) -> [f64; 3] {
        let next = self.phi * Vector3::from(x) + self.gamma * u;
        [next[0], next[1], next[2]]
    }

    /// `Φ^s·Γ` for `s = 0..n`: the state response `s + 1` steps after a
    /// unit input pulse.
    pub fn impulse_response(&self, n: usize) -> Vec<Vector3<f64>> {
        let mut out = Vec::with_capacity(n);
        let mut h = self.gamma;
        for _ in 0..n {
            out.push(h);
            h = self.phi * h;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(tau: f64) -> JointDynamicsFit {
        JointDynamicsFit {
            k: 1.2,
            zeta: 0.8,
            omega_n: 6.0,
            tau,
            fit_residual: 0.0,
        }
    }

    #[test]
    fn delay_rounding() {
        assert_eq!(delay_steps(0.3, 0.1, 5), 3);
        assert_eq!(delay_steps(0.0, 0.1, 5), 1);
        assert_eq!(delay_steps(0.19, 0.1, 5), 1);
        assert_eq!(delay_steps(2.0, 0.1, 5), 5);
    }

    #[test]
    fn position_integrates_velocity() {
        let m = JointModel::new(&fit(0.0), 0.1);
        // At constant velocity and no input drive: v decays, θ integrates.
        let x = m.step([0.0, 0.0, 0.0], 1.0);
        assert!(x[0] > 0.0 && x[1] > 0.0);
        let mut s = [0.0; 3];
        for _ in 0..200 {
            s = m.step(s, 0.5);
        }
        assert!((s[1] - 0.6).abs() < 1e-9);
        assert!(s[2].abs() < 1e-9);
    }
}
