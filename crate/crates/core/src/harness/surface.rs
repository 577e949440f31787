use serde::{Deserialize, Serialize};

use super::metrics::ON_PLANE_BAND;
use crate::control::DesignSurface;

/// Deviation of a scanned profile from the target plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceReport {
    /// Scan positions [m].
    pub x: Vec<f64>,
    /// Scanned height minus plane height at each position [m].
    pub deviation: Vec<f64>,
    pub rms: f64,
    pub peak_to_peak: f64,
    /// Half the peak-to-peak of the deviation after removing its
    /// least-squares line [m].
    pub oscillation_amplitude: f64,
    /// Fraction of samples within the on-plane band.
    pub coverage: f64,
}

impl SurfaceReport {
    /// Statistics of a deviation profile.
    pub fn from_deviation(x: Vec<f64>, deviation: Vec<f64>) -> Self {
        let n = deviation.len();
        if n == 0 {
            return SurfaceReport {
                x,
                deviation,
                rms: 0.0,
                peak_to_peak: 0.0,
                oscillation_amplitude: 0.0,
                coverage: 0.0,
            };
        }
        let nf = n as f64;
        let rms = (deviation.iter().map(|d| d * d).sum::<f64>() / nf).sqrt();
        let peak_to_peak = spread(deviation.iter().copied());

        let mx = x.iter().sum::<f64>() / nf;
        let md = deviation.iter().sum::<f64>() / nf;
        let sxx: f64 = x.iter().map(|xi| (xi - mx).powi(2)).sum();
        let sxd: f64 = x.iter().zip(&deviation).map(|(xi, d)| (xi - mx) * (d - md)).sum();
        let slope = if sxx > 0.0 { sxd / sxx } else { 0.0 };
        let detrended = x.iter().zip(&deviation).map(|(xi, d)| d - md - slope * (xi - mx));
        let oscillation_amplitude = 0.5 * spread(detrended);

        let coverage = deviation.iter().filter(|d| d.abs() <= ON_PLANE_BAND).count() as f64 / nf;
        SurfaceReport {
            x,
            deviation,
            rms,
            peak_to_peak,
            oscillation_amplitude,
            coverage,
        }
    }
}

fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo.is_finite() {
        hi - lo
    } else {
        0.0
    }
}

/// Compares a scan `(x, h)` against the plane, keeping samples with x in
/// `[x_lo, x_hi]`.
pub fn evaluate_surface(scan: &[[f64; 2]], target: &DesignSurface, x_lo: f64, x_hi: f64) -> SurfaceReport {
    let (x, deviation) = scan
        .iter()
        .filter(|p| p[0] >= x_lo && p[0] <= x_hi)
        .map(|p| (p[0], p[1] - target.height_at(p[0])))
        .unzip();
    SurfaceReport::from_deviation(x, deviation)
}
