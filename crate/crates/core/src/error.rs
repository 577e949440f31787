use std::path::PathBuf;

use crate::kinematics::Joint;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("degenerate linkage on {joint}: triangle angle {angle:.6} rad collapses")]
    DegenerateLinkage { joint: Joint, angle: f64 },

    #[error("pose ({x:.3}, {z:.3}) with pitch {phi:.3} is outside the reachable workspace")]
    Unreachable { x: f64, z: f64, phi: f64 },

    #[error("non-finite command {value} on {joint}")]
    NonFiniteCommand { joint: Joint, value: f64 },

    #[error("non-monotone calibration samples between commands {lo} and {hi}")]
    NonMonotone { lo: f64, hi: f64 },

    #[error("run at command {command} lasts {duration:.2} s, at least {required:.2} s required")]
    RunTooShort { command: f64, duration: f64, required: f64 },

    #[error("no stalled segment found for command {command}")]
    MissingProbe { command: f64 },

    #[error("orifice fit underdetermined: {found} distinct test commands, at least 3 required")]
    Underdetermined { found: usize },

    #[error("data quality: {0}")]
    DataQuality(String),

    #[error("fit diverged: {0}")]
    FitDivergence(String),

    #[error("evaluation window [{lo}, {hi}] contains no samples")]
    EmptyWindow { lo: f64, hi: f64 },

    #[error("stale sensor frame: age {age:.3} s exceeds {limit:.3} s")]
    StaleSensor { age: f64, limit: f64 },

    #[error("infeasible bounds: {0}")]
    InfeasibleBounds(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("{path}: schema version {found}, expected {expected}")]
    SchemaVersion { path: PathBuf, found: u32, expected: u32 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Configuration problems (bad files, missing references) as opposed to
    /// run-time failures of the control or calibration pipeline.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::SchemaVersion { .. }
                | Error::Io { .. }
                | Error::Parse { .. }
                | Error::InvalidModel(_)
                | Error::InfeasibleBounds(_)
        )
    }

    /// Short stable identifier used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidModel(_) => "invalid_model",
            Error::DegenerateLinkage { .. } => "degenerate_linkage",
            Error::Unreachable { .. } => "unreachable",
            Error::NonFiniteCommand { .. } => "non_finite_command",
            Error::NonMonotone { .. } => "non_monotone",
            Error::RunTooShort { .. } => "run_too_short",
            Error::MissingProbe { .. } => "missing_probe",
            Error::Underdetermined { .. } => "underdetermined",
            Error::DataQuality(_) => "data_quality",
            Error::FitDivergence(_) => "fit_divergence",
            Error::EmptyWindow { .. } => "empty_window",
            Error::StaleSensor { .. } => "stale_sensor",
            Error::InfeasibleBounds(_) => "infeasible_bounds",
            Error::Config(_) => "config",
            Error::SchemaVersion { .. } => "schema_version",
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::Csv(_) => "csv",
        }
    }
}
