use super::NfcTable;
use crate::hydraulics::{orifice_flow, OrificeModel, PumpPressureMap};

pub const FLOW_NODES: usize = 25;
pub const PRESSURE_NODES: usize = 21;
/// Load-pressure span of the standard grid as fractions of relief.
const PRESSURE_SPAN: (f64, f64) = (-1.0, 1.0);

/// Breakpoints of an NFC table.
#[derive(Debug, Clone, PartialEq)]
pub struct LutGrid {
    pub flow: Vec<f64>,
    pub load_pressure: Vec<f64>,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

impl LutGrid {
    /// 25 flows from zero to the unloaded full-command flow, 21 load
    /// pressures over [−0.5, 1.0] × relief.
    pub fn standard(orifice: &OrificeModel, pump: &PumpPressureMap, relief: f64) -> Self {
        let q_max = forward_flow(orifice, pump, orifice.x_max, 0.0);
        LutGrid {
            flow: linspace(0.0, q_max, FLOW_NODES),
            load_pressure: linspace(PRESSURE_SPAN.0 * relief, PRESSURE_SPAN.1 * relief, PRESSURE_NODES),
        }
    }
}

fn forward_flow(orifice: &OrificeModel, pump: &PumpPressureMap, x: f64, p_f: f64) -> f64 {
    orifice_flow(orifice.resistance(x), pump.pressure(x) - p_f)
}

/// Smallest command that delivers flow against `p_f`: the orifice must be
/// open and the pump setpoint must exceed the load.
fn onset(orifice: &OrificeModel, pump: &PumpPressureMap, p_f: f64) -> Option<f64> {
    let open = orifice.x_min.max(-orifice.c).max(0.0);
    let pump_onset = if pump.pressure(0.0) > p_f {
        0.0
    } else {
        pump.onset_command(p_f)?
    };
    let x = open.max(pump_onset);
    (x < orifice.x_max).then_some(x)
}

/// Inverts the NFC flow law on a grid. Each cell holds the command that
/// delivers the desired flow against the cell's load pressure, found by
/// bisection on the monotone forward law. Zero flow stores the onset
/// command; unreachable flows hold `x_max` and are marked saturated.
pub fn build_nfc_lut(orifice: &OrificeModel, pump: &PumpPressureMap, grid: &LutGrid) -> NfcTable {
    let x_max = orifice.x_max;
    let mut command = vec![vec![0.0; grid.load_pressure.len()]; grid.flow.len()];
    let mut saturated = vec![vec![false; grid.load_pressure.len()]; grid.flow.len()];
    for (j, &p_f) in grid.load_pressure.iter().enumerate() {
        let start = onset(orifice, pump, p_f);
        for (i, &q) in grid.flow.iter().enumerate() {
            let Some(lo) = start else {
                command[i][j] = x_max;
                saturated[i][j] = true;
                continue;
            };
            if q <= 0.0 {
                command[i][j] = lo;
                continue;
            }
            if forward_flow(orifice, pump, x_max, p_f) < q {
                command[i][j] = x_max;
                saturated[i][j] = true;
                continue;
            }
            let (mut a, mut b) = (lo, x_max);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                if forward_flow(orifice, pump, m, p_f) < q {
                    a = m;
                } else {
                    b = m;
                }
            }
            command[i][j] = b;
        }
    }
    NfcTable {
        flow: grid.flow.clone(),
        load_pressure: grid.load_pressure.clone(),
        command,
        saturated,
    }
}
