//! Hydraulics-aware excavator grading control.
//!
//! The crate is organised bottom-up:
//!
//! * [`kinematics`]: planar boom–stick–bucket chain and cylinder linkages.
//! * [`hydraulics`]: orifice, pump pressure map, LS and NFC circuit models.
//! * [`sim`]: deterministic plant simulator with dead time, soil and sensors.
//! * [`calibration`]: feed-forward tables, pump/orifice identification,
//!   step-response fits.
//! * [`control`]: joint velocity loop (feed-forward + PID) and the
//!   delay-aware MPC path tracker.
//! * [`harness`]: pass metrics, surface analysis, baseline controller,
//!   campaigns and reports.
//! * [`config`]: fixtures, scenario files and versioned artifacts.

// Validation uses `!(x > 0.0)` so that NaN is rejected along with
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Numeric kernels index several per-joint arrays with one loop variable.
#![allow(clippy::needless_range_loop)]

pub mod calibration;
pub mod config;
pub mod control;
pub mod error;
pub mod harness;
pub mod hydraulics;
pub mod kinematics;
pub mod log;
pub mod lut;
pub mod par;
pub mod sim;
pub mod units;

pub use error::{Error, Result};
