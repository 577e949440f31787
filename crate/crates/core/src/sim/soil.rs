//! Soil surface and cutting resistance.
//!
//! The reaction on the blade is `gain · depth^exponent · width`, pushed
//! against the horizontal blade motion, with an upward component of
//! `vertical_ratio` times that magnitude. Cutting lowers the surface to the
//! blade edge wherever the edge sweeps below it; nothing is ever deposited.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the reaction magnitude; stands in for "infinitely hard".
pub const MAX_SOIL_FORCE: f64 = 1.0e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardPatch {
    pub x_min: f64,
    pub x_max: f64,
    pub multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoilModel {
    /// Piecewise-linear initial surface `(x, h)` [m], x increasing.
    pub surface: Vec<[f64; 2]>,
    /// Resistance per unit cut cross-section [N/m²] (for exponent 1).
    pub resistance_gain: f64,
    #[serde(default = "one")]
    pub depth_exponent: f64,
    /// Upward reaction as a fraction of the horizontal one.
    #[serde(default = "default_vertical_ratio")]
    pub vertical_ratio: f64,
    #[serde(default)]
    pub hard_patches: Vec<HardPatch>,
    /// Amplitude of random surface roughness [m].
    #[serde(default)]
    pub roughness: f64,
    #[serde(default)]
    pub noise_seed: u64,
    /// Surface grid spacing [m].
    #[serde(default = "default_resolution")]
    pub resolution: f64,
}

fn one() -> f64 {
    1.0
}
fn default_vertical_ratio() -> f64 {
    0.3
}
fn default_resolution() -> f64 {
    0.01
}

impl SoilModel {
    pub fn flat(height: f64, x_range: [f64; 2], resistance_gain: f64) -> Self {
        SoilModel {
            surface: vec![[x_range[0], height], [x_range[1], height]],
            resistance_gain,
            depth_exponent: 1.0,
            vertical_ratio: default_vertical_ratio(),
            hard_patches: Vec::new(),
            roughness: 0.0,
            noise_seed: 0,
            resolution: default_resolution(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("soil model: {m}")));
        if self.surface.len() < 2 || self.surface.windows(2).any(|w| !(w[0][0] < w[1][0])) {
            return bad("surface needs at least two points with increasing x");
        }
        if !(self.resistance_gain >= 0.0) || !(self.depth_exponent > 0.0) {
            return bad("resistance gain must be >= 0 and depth exponent > 0");
        }
        if !(self.resolution > 0.0) || self.roughness < 0.0 || self.vertical_ratio < 0.0 {
            return bad("resolution must be positive, roughness and vertical ratio non-negative");
        }
        if self
            .hard_patches
            .iter()
            .any(|p| !(p.x_min < p.x_max) || !(p.multiplier >= 0.0))
        {
            return bad("hard patches need x_min < x_max and a non-negative multiplier");
        }
        Ok(())
    }

    pub fn gain_at(&self, x: f64) -> f64 {
        let mult: f64 = self
            .hard_patches
            .iter()
            .filter(|p| (p.x_min..=p.x_max).contains(&x))
            .map(|p| p.multiplier)
            .product();
        self.resistance_gain * mult
    }

    /// Reaction magnitude for a cut of `depth` [m] with a blade `width` [m].
    pub fn reaction(&self, x: f64, depth: f64, width: f64) -> f64 {
        if depth <= 0.0 {
            return 0.0;
        }
        (self.gain_at(x) * depth.powf(self.depth_exponent) * width).min(MAX_SOIL_FORCE)
    }

    pub fn initial_height(&self, x: f64) -> f64 {
        let xs: Vec<f64> = self.surface.iter().map(|p| p[0]).collect();
        let hs: Vec<f64> = self.surface.iter().map(|p| p[1]).collect();
        crate::lut::interp_linear(&xs, &hs, x)
    }

    /// Rasterises the initial surface, adding seeded roughness.
    pub fn grid(&self) -> SoilGrid {
        let x0 = self.surface[0][0];
        let x1 = self.surface[self.surface.len() - 1][0];
        let n = ((x1 - x0) / self.resolution).round() as usize + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(self.noise_seed);
        let heights = (0..n)
            .map(|i| {
                let h = self.initial_height(x0 + i as f64 * self.resolution);
                if self.roughness > 0.0 {
                    h + rng.random_range(-self.roughness..=self.roughness)
                } else {
                    h
                }
            })
            .collect();
        SoilGrid {
            x0,
            resolution: self.resolution,
            heights,
        }
    }
}

/// Mutable surface heights on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SoilGrid {
    pub x0: f64,
    pub resolution: f64,
    pub heights: Vec<f64>,
}

impl SoilGrid {
    pub fn x_at(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.resolution
    }

    pub fn extent(&self) -> (f64, f64) {
        (self.x0, self.x_at(self.heights.len() - 1))
    }

    pub fn height(&self, x: f64) -> f64 {
        let n = self.heights.len();
        let s = (x - self.x0) / self.resolution;
        if s <= 0.0 {
            return self.heights[0];
        }
        if s >= (n - 1) as f64 {
            return self.heights[n - 1];
        }
        let i = s.floor() as usize;
        let t = s - i as f64;
        self.heights[i] * (1.0 - t) + self.heights[i + 1] * t
    }

    /// Lowers the surface to the blade edge along the segment it swept.
    pub fn cut(&mut self, from: [f64; 2], to: [f64; 2]) {
        let (a, b) = if from[0] <= to[0] { (from, to) } else { (to, from) };
        let lo = ((a[0] - self.x0) / self.resolution).ceil().max(0.0) as usize;
        let hi = ((b[0] - self.x0) / self.resolution).floor();
        if hi < 0.0 {
            return;
        }
        let hi = (hi as usize).min(self.heights.len() - 1);
        for i in lo..=hi {
            let x = self.x_at(i);
            let z = if b[0] > a[0] {
                a[1] + (b[1] - a[1]) * (x - a[0]) / (b[0] - a[0])
            } else {
                a[1].min(b[1])
            };
            if z < self.heights[i] {
                self.heights[i] = z;
            }
        }
    }
}
