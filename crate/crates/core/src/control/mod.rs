//! The two-stage grading controller.
//!
//! A delay-aware nonlinear MPC turns the design surface into target joint
//! rates at 10 Hz; a hydraulics-aware velocity loop (calibrated
//! feed-forward plus parallel PID) turns those rates into valve commands at
//! 100 Hz. [`grading_pass`] runs both against the plant simulator.

mod grading;
pub mod mpc;
mod pid;
mod velocity;

pub use grading::{
    grading_pass, median, ControllerParams, GradingController, PassController, PassOutcome, PassSetup, StallDetector,
    Termination, TerminationReason, LOAD_LIMIT_MARGIN,
};
pub use mpc::{
    delay_steps, mpc_predict, mpc_solve, solve_bounded, DesignSurface, JointModel, LeastSquares, MpcContext,
    MpcProblem, MpcSolution, MpcState, MpcWeights, SolveReport, SolverOptions,
};
pub use pid::{PidGains, PidParams, PidState};
pub use velocity::{JointVelocityController, LoadInput, VelocityCommand, VelocityLoopConfig};
