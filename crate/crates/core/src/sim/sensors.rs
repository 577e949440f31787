use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::plant::PlantState;
use crate::kinematics::Joint;

/// Standard deviations of additive Gaussian sensor noise. All zero gives
/// the ground truth exactly.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SensorNoise {
    #[serde(default)]
    pub theta: f64,
    #[serde(default)]
    pub theta_dot: f64,
    #[serde(default)]
    pub pressure: f64,
    #[serde(default)]
    pub cabin_pitch: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SensorNoise {
    pub const NONE: SensorNoise = SensorNoise {
        theta: 0.0,
        theta_dot: 0.0,
        pressure: 0.0,
        cabin_pitch: 0.0,
        seed: 0,
    };

    pub fn is_none(&self) -> bool {
        self.theta == 0.0 && self.theta_dot == 0.0 && self.pressure == 0.0 && self.cabin_pitch == 0.0
    }
}

/// One sample of the machine's sensors.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SensorFrame {
    pub timestamp: f64,
    pub cabin_pitch: f64,
    pub theta: [f64; 3],
    pub theta_dot: [f64; 3],
    pub p_a: [f64; 3],
    pub p_b: [f64; 3],
}

/// Samples the sensors. The noise stream depends only on the seed and the
/// step count, so re-measuring a state gives the same frame.
pub fn measure(state: &PlantState, noise: &SensorNoise) -> SensorFrame {
    let mut frame = SensorFrame {
        timestamp: state.clock,
        cabin_pitch: state.cabin_pitch,
        theta: state.joints.theta,
        theta_dot: state.joints.theta_dot,
        p_a: [0.0; 3],
        p_b: [0.0; 3],
    };
    for j in Joint::ALL {
        frame.p_a[j.index()] = state.cylinders[j].p_a;
        frame.p_b[j.index()] = state.cylinders[j].p_b;
    }
    if noise.is_none() {
        return frame;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    rng.set_stream(state.steps);
    let mut add = |v: &mut f64, sigma: f64| {
        if sigma > 0.0 {
            if let Ok(n) = Normal::new(0.0, sigma) {
                *v += n.sample(&mut rng);
            }
        }
    };
    add(&mut frame.cabin_pitch, noise.cabin_pitch);
    for i in 0..3 {
        add(&mut frame.theta[i], noise.theta);
        add(&mut frame.theta_dot[i], noise.theta_dot);
        add(&mut frame.p_a[i], noise.pressure);
        add(&mut frame.p_b[i], noise.pressure);
    }
    frame
}
