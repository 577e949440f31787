use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Variable in-line orifice of the directional control valve,
/// `R(x) = a / (b·(x + c)²)`, valid for command magnitudes in
/// `[x_min, x_max]` with `x_min >= −c`. At or below `−c` the spool is closed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrificeModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub x_min: f64,
    pub x_max: f64,
}

impl OrificeModel {
    /// Resistance [Pa/(m³/s)²]; infinite when the spool is closed.
    pub fn resistance(&self, x: f64) -> f64 {
        let open = x + self.c;
        if open <= 0.0 || x < self.x_min {
            return f64::INFINITY;
        }
        self.a / (self.b * open * open)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.a > 0.0
            && self.b > 0.0
            && self.c.is_finite()
            && 0.0 <= self.x_min
            && self.x_min < self.x_max
            && self.x_max <= 1.0
            && self.x_min + self.c >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidModel(format!(
                "orifice model {self:?} violates a, b > 0 and 0 <= -c <= x_min < x_max <= 1"
            )))
        }
    }
}

/// Turbulent orifice drop `ΔP = R·Q²`, signed like `Q`.
pub fn orifice_drop(r: f64, q: f64) -> f64 {
    r * q * q.abs()
}

/// Flow through resistance `r` under drop `dp`; zero when `dp <= 0`.
pub fn orifice_flow(r: f64, dp: f64) -> f64 {
    if dp <= 0.0 || !r.is_finite() {
        0.0
    } else {
        (dp / r).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drop_examples() {
        assert!((orifice_drop(1e9, 1e-3) - 1e3).abs() < 1e-9);
        assert_eq!(orifice_drop(1e9, 0.0), 0.0);
        assert!((orifice_drop(1e9, 2e-3) - 4.0 * orifice_drop(1e9, 1e-3)).abs() < 1e-9);
        assert!(orifice_drop(1e9, -1e-3) < 0.0);
    }

    #[test]
    fn resistance_decreases_with_opening() {
        let o = OrificeModel {
            a: 2.0,
            b: 1.0,
            c: 0.1,
            x_min: 0.0,
            x_max: 1.0,
        };
        o.validate().unwrap();
        let r: Vec<f64> = (0..=10).map(|i| o.resistance(i as f64 / 10.0)).collect();
        assert!(r.windows(2).all(|w| w[1] < w[0]));
        assert!((o.resistance(0.5) - 2.0 / 0.36).abs() < 1e-12);
        let closed = OrificeModel {
            c: -0.05,
            x_min: 0.05,
            ..o
        };
        closed.validate().unwrap();
        assert!(closed.resistance(0.05).is_infinite());
        assert!(closed.resistance(0.02).is_infinite());
    }
}
