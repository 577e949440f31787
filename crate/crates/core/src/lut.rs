//! Piecewise-linear 1-D tables and bilinear 2-D grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear interpolation through nodes `(x[i], y[i])` with strictly
/// increasing `x`, holding the end values outside the node range.
pub fn interp_linear(x: &[f64], y: &[f64], q: f64) -> f64 {
    let n = x.len();
    if n == 1 || q <= x[0] {
        return y[0];
    }
    if q >= x[n - 1] {
        return y[n - 1];
    }
    let i = x.partition_point(|&v| v <= q) - 1;
    let t = (q - x[i]) / (x[i + 1] - x[i]);
    y[i] + t * (y[i + 1] - y[i])
}

/// Linear interpolation through `(x, y)` nodes with strictly increasing `x`.
/// Queries outside the node range return the end value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1d {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Table1d {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let t = Table1d { x, y };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.is_empty() || self.x.len() != self.y.len() {
            return Err(Error::InvalidModel(
                "table needs equally many x and y nodes, at least one".into(),
            ));
        }
        if self.x.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidModel("table x nodes must be strictly increasing".into()));
        }
        if self.x.iter().chain(&self.y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("table nodes must be finite".into()));
        }
        Ok(())
    }

    pub fn eval(&self, q: f64) -> f64 {
        interp_linear(&self.x, &self.y, q)
    }

    pub fn is_non_decreasing(&self) -> bool {
        self.y.windows(2).all(|w| w[0] <= w[1])
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }
}

/// Values on a rectilinear grid, `values[i][j]` at `(axis0[i], axis1[j])`,
/// evaluated bilinearly. Out-of-range queries clamp to the border.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid2d {
    pub axis0: Vec<f64>,
    pub axis1: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

/// Result of a grid lookup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridValue {
    pub value: f64,
    /// The query fell outside the grid and was clamped to its border.
    pub clamped: bool,
}

fn locate(axis: &[f64], q: f64) -> (usize, f64, bool) {
    let n = axis.len();
    if q <= axis[0] {
        return (0, 0.0, q < axis[0]);
    }
    if q >= axis[n - 1] {
        return (n - 2, 1.0, q > axis[n - 1]);
    }
    let i = axis.partition_point(|&v| v <= q) - 1;
    (i, (q - axis[i]) / (axis[i + 1] - axis[i]), false)
}

impl Grid2d {
    pub fn validate(&self) -> Result<()> {
        let inc = |a: &[f64]| a.len() >= 2 && a.windows(2).all(|w| w[0] < w[1]);
        if !inc(&self.axis0) || !inc(&self.axis1) {
            return Err(Error::InvalidModel(
                "grid axes need at least two strictly increasing nodes".into(),
            ));
        }
        if self.values.len() != self.axis0.len() || self.values.iter().any(|r| r.len() != self.axis1.len()) {
            return Err(Error::InvalidModel("grid value shape does not match axes".into()));
        }
        Ok(())
    }

    pub fn eval(&self, q0: f64, q1: f64) -> GridValue {
        let (i, t, c0) = locate(&self.axis0, q0);
        let (j, u, c1) = locate(&self.axis1, q1);
        let v = &self.values;
        let value = (1.0 - t) * (1.0 - u) * v[i][j]
            + t * (1.0 - u) * v[i + 1][j]
            + (1.0 - t) * u * v[i][j + 1]
            + t * u * v[i + 1][j + 1];
        GridValue {
            value,
            clamped: c0 || c1,
        }
    }
}
