//! Experiment harness: pass and surface metrics, the IK + PID comparison
//! controller, scenario files, campaigns and reports.
//!
//! A pass is scored on the samples inside its evaluation window: blade at
//! or closer than `x_max` to the machine and past the first `approach`
//! metres of travel. Campaign RMSE pools the squared errors of all passes.

mod baseline;
mod campaign;
mod metrics;
mod report;
mod scenario;
mod surface;
pub mod svg;

pub use baseline::{BaselineController, BaselineParams};
pub use campaign::{
    graded_surface, run_campaign, run_scenario, CampaignConfig, CampaignResult, ControllerKind, RunRecord,
    SCAN_RESOLUTION,
};
pub use metrics::{aggregate, evaluate_pass, AggregateMetrics, EvaluationWindow, PassMetrics, ON_PLANE_BAND};
pub use report::{
    report, write_campaign, write_scan, AggregateRow, ManifestEntry, Report, RunManifest, SummaryRow, AGGREGATE,
    MANIFEST, SUMMARY,
};
pub use scenario::{ControllerArtifacts, ControllerFiles, ScenarioConfig, StartPose};
pub use surface::{evaluate_surface, SurfaceReport};
