//! Deterministic plant simulator.
//!
//! Each joint runs a command dead-time buffer, a first-order spool lag and
//! the ground-truth flow law of its circuit. Cylinder velocity follows the
//! flow law against the quasi-static load (gravity, payload, friction, soil
//! and scheduled events). A function whose load pressure reaches the
//! available supply stalls. Inertia shows up only in the measured chamber
//! pressures.

mod plant;
mod sensors;
mod soil;

pub use plant::{FlowDisturbance, JointDiagnostics, LoadEvent, Plant, PlantParams, PlantState, GRAVITY};
pub use sensors::{measure, SensorFrame, SensorNoise};
pub use soil::{HardPatch, SoilGrid, SoilModel, MAX_SOIL_FORCE};

/// Uniform samples `(x, h)` of the current surface, spaced `resolution`
/// apart from the start of the soil extent. Empty without soil.
pub fn scan_surface(state: &PlantState, resolution: f64) -> Vec<[f64; 2]> {
    let Some(grid) = &state.soil else {
        return Vec::new();
    };
    if !(resolution > 0.0) {
        return Vec::new();
    }
    let (x0, x1) = grid.extent();
    let n = ((x1 - x0) / resolution).round() as usize;
    (0..n)
        .map(|i| {
            let x = x0 + i as f64 * resolution;
            [x, grid.height(x)]
        })
        .collect()
}
