use super::{wrap_angle, EndEffectorState, FullConfiguration, JointConfiguration, MachineModel};
use crate::error::{Error, Result};

/// Sign with which each relative joint angle enters the absolute link angles.
const SIGNS: [f64; 3] = [1.0, -1.0, -1.0];

fn e(phi: f64) -> [f64; 2] {
    [phi.cos(), phi.sin()]
}

fn e_prime(phi: f64) -> [f64; 2] {
    [-phi.sin(), phi.cos()]
}

fn rotate(v: [f64; 2], a: f64) -> [f64; 2] {
    let (s, c) = a.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

/// The three-link planar chain extracted from a [`MachineModel`]; cheap to
/// copy into optimisation inner loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarChain {
    pub pivot: [f64; 2],
    pub lengths: [f64; 3],
}

/// Analytic derivatives of the blade state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EeDerivatives {
    /// ∂p/∂θ (rows x, z). Also ∂v/∂θ̇.
    pub jacobian: [[f64; 3]; 2],
    /// ∂v/∂θ at the given θ̇.
    pub dv_dtheta: [[f64; 3]; 2],
    /// ∂φ/∂θ, equal to ∂ω_y/∂θ̇.
    pub dphi_dtheta: [f64; 3],
}

impl PlanarChain {
    pub fn from_model(model: &MachineModel) -> Self {
        PlanarChain {
            pivot: model.boom_pivot,
            lengths: [model.link_lengths.boom, model.stick_length(), model.link_lengths.bucket],
        }
    }

    pub fn link_angles(&self, cabin_pitch: f64, theta: &[f64; 3]) -> [f64; 3] {
        let mut phi = [0.0; 3];
        let mut acc = cabin_pitch;
        for k in 0..3 {
            acc += SIGNS[k] * theta[k];
            phi[k] = acc;
        }
        phi
    }

    /// Boom foot, boom tip, stick tip and blade tip.
    pub fn points(&self, cabin_pitch: f64, theta: &[f64; 3]) -> [[f64; 2]; 4] {
        let phi = self.link_angles(cabin_pitch, theta);
        let mut pts = [rotate(self.pivot, cabin_pitch); 4];
        for k in 0..3 {
            let d = e(phi[k]);
            pts[k + 1] = [pts[k][0] + self.lengths[k] * d[0], pts[k][1] + self.lengths[k] * d[1]];
        }
        pts
    }

    pub fn position(&self, cabin_pitch: f64, theta: &[f64; 3]) -> [f64; 2] {
        self.points(cabin_pitch, theta)[3]
    }

    pub fn jacobian(&self, cabin_pitch: f64, theta: &[f64; 3]) -> [[f64; 3]; 2] {
        let phi = self.link_angles(cabin_pitch, theta);
        let mut jac = [[0.0; 3]; 2];
        for j in 0..3 {
            for k in j..3 {
                let d = e_prime(phi[k]);
                jac[0][j] += SIGNS[j] * self.lengths[k] * d[0];
                jac[1][j] += SIGNS[j] * self.lengths[k] * d[1];
            }
        }
        jac
    }

    pub fn state(&self, cabin_pitch: f64, q: &JointConfiguration) -> EndEffectorState {
        self.state_with_derivatives(cabin_pitch, q).0
    }

    pub fn state_with_derivatives(
        &self,
        cabin_pitch: f64,
        q: &JointConfiguration,
    ) -> (EndEffectorState, EeDerivatives) {
        let phi = self.link_angles(cabin_pitch, &q.theta);
        let p = self.position(cabin_pitch, &q.theta);
        let jac = self.jacobian(cabin_pitch, &q.theta);
        let td = &q.theta_dot;

        let v = [
            jac[0][0] * td[0] + jac[0][1] * td[1] + jac[0][2] * td[2],
            jac[1][0] * td[0] + jac[1][1] * td[1] + jac[1][2] * td[2],
        ];
        let omega_y = SIGNS[0] * td[0] + SIGNS[1] * td[1] + SIGNS[2] * td[2];

        // ∂J[:, j]/∂θ_m = −s_j s_m Σ_{k ≥ max(j, m)} L_k e(φ_k)
        let mut dv = [[0.0; 3]; 2];
        for m in 0..3 {
            for j in 0..3 {
                let mut acc = [0.0; 2];
                for k in j.max(m)..3 {
                    let d = e(phi[k]);
                    acc[0] += self.lengths[k] * d[0];
                    acc[1] += self.lengths[k] * d[1];
                }
                let s = -SIGNS[j] * SIGNS[m] * td[j];
                dv[0][m] += s * acc[0];
                dv[1][m] += s * acc[1];
            }
        }

        (
            EndEffectorState {
                p,
                v,
                omega_y,
                phi: wrap_angle(phi[2]),
            },
            EeDerivatives {
                jacobian: jac,
                dv_dtheta: dv,
                dphi_dtheta: SIGNS,
            },
        )
    }

    /// Joint angles placing the blade at `p` with bucket pitch `phi`, taking
    /// the branch with the boom above the pivot–wrist line.
    pub fn inverse(&self, cabin_pitch: f64, p: [f64; 2], phi: f64) -> Result<[f64; 3]> {
        let [l1, l2, l3] = self.lengths;
        let d3 = e(phi);
        let wrist = [p[0] - l3 * d3[0], p[1] - l3 * d3[1]];
        let base = rotate(self.pivot, cabin_pitch);
        let d = [wrist[0] - base[0], wrist[1] - base[1]];
        let r = d[0].hypot(d[1]);
        let unreachable = Error::Unreachable { x: p[0], z: p[1], phi };
        if r > l1 + l2 || r < (l1 - l2).abs() || r == 0.0 {
            return Err(unreachable);
        }
        let psi = d[1].atan2(d[0]);
        let cos_alpha = ((l1 * l1 + r * r - l2 * l2) / (2.0 * l1 * r)).clamp(-1.0, 1.0);
        let phi1 = psi + cos_alpha.acos();
        let elbow = [base[0] + l1 * phi1.cos(), base[1] + l1 * phi1.sin()];
        let phi2 = (wrist[1] - elbow[1]).atan2(wrist[0] - elbow[0]);
        Ok([
            wrap_angle(phi1 - cabin_pitch),
            wrap_angle(phi1 - phi2),
            wrap_angle(phi2 - phi),
        ])
    }
}

pub fn forward_kinematics(model: &MachineModel, q: &FullConfiguration) -> EndEffectorState {
    PlanarChain::from_model(model).state(q.cabin_pitch, &q.joints)
}

pub fn forward_kinematics_with_derivatives(
    model: &MachineModel,
    q: &FullConfiguration,
) -> (EndEffectorState, EeDerivatives) {
    PlanarChain::from_model(model).state_with_derivatives(q.cabin_pitch, &q.joints)
}

pub fn inverse_kinematics(model: &MachineModel, cabin_pitch: f64, p: [f64; 2], phi: f64) -> Result<[f64; 3]> {
    PlanarChain::from_model(model).inverse(cabin_pitch, p, phi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> PlanarChain {
        PlanarChain {
            pivot: [0.5, 2.0],
            lengths: [5.8, 3.0, 1.6],
        }
    }

    #[test]
    fn straight_chain_at_rest() {
        let c = chain();
        let s = c.state(0.0, &JointConfiguration::default());
        assert!((s.p[0] - (0.5 + 5.8 + 3.0 + 1.6)).abs() < 1e-12);
        assert!((s.p[1] - 2.0).abs() < 1e-12);
        assert_eq!(s.v, [0.0, 0.0]);
        assert_eq!(s.omega_y, 0.0);
        assert_eq!(s.phi, 0.0);
    }

    #[test]
    fn inverse_round_trips() {
        let c = chain();
        for (x, z) in [(9.5, 0.0), (7.0, -0.3), (5.5, 0.2)] {
            let th = c.inverse(0.03, [x, z], -0.6).unwrap();
            let s = c.state(0.03, &JointConfiguration::at_rest(th));
            assert!((s.p[0] - x).abs() < 1e-9 && (s.p[1] - z).abs() < 1e-9);
            assert!((s.phi + 0.6).abs() < 1e-9);
        }
        assert!(c.inverse(0.0, [20.0, 0.0], 0.0).is_err());
    }
}
