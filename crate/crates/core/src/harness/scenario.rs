use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::EvaluationWindow;
use crate::calibration::procedures::{calibrate_ls_plant, calibrate_nfc, identify_dynamics};
use crate::calibration::{DynamicsFile, HydraulicFeedForward};
use crate::config::{load_plant, parse_versioned, SCHEMA_VERSION};
use crate::control::{ControllerParams, DesignSurface, PassSetup, Termination};
use crate::error::{Error, Result};
use crate::kinematics::Architecture;
use crate::par::Execution;
use crate::sim::{Plant, SensorNoise, SoilModel};

/// Where the blade starts: position (x, height) [m] with the design pitch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StartPose {
    pub x: f64,
    pub height: f64,
}

/// Optional controller artifacts for a scenario. Paths are relative to the
/// scenario file. Missing feed-forward or dynamics files are calibrated on
/// the scenario's plant (without soil or payload).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ControllerFiles {
    #[serde(default)]
    pub ff: Option<PathBuf>,
    #[serde(default)]
    pub dynamics: Option<PathBuf>,
    #[serde(default)]
    pub params: Option<PathBuf>,
}

/// One grading pass: machine, soil, target plane, start pose, sensor
/// noise, termination and scoring window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub name: String,
    /// Plant fixture name or path.
    pub plant: String,
    /// Point mass at the blade [kg].
    #[serde(default)]
    pub payload: f64,
    pub soil: SoilModel,
    pub surface: DesignSurface,
    pub start: StartPose,
    /// Seeds the sensor noise and the soil roughness.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise: SensorNoise,
    pub termination: Termination,
    pub window: EvaluationWindow,
    #[serde(default)]
    pub controller: ControllerFiles,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut s: ScenarioConfig = parse_versioned(&text, path)?;
        s.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        s.validate().map_err(|e| Error::Parse {
            path: path.into(),
            message: e.to_string(),
        })?;
        Ok(s)
    }

    /// Makes relative controller file paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [
            &mut self.controller.ff,
            &mut self.controller.dynamics,
            &mut self.controller.params,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.soil.validate()?;
        let t = &self.termination;
        let finite = [
            self.surface.h,
            self.surface.alpha,
            self.surface.phi,
            self.start.x,
            self.start.height,
            t.x_end,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite || self.surface.v_x == 0.0 || !self.surface.v_x.is_finite() {
            return Err(Error::Config(format!(
                "scenario `{}`: surface and start must be finite with v_x != 0",
                self.name
            )));
        }
        if !(t.max_duration > 0.0) || (t.x_end - self.start.x) * self.surface.v_x <= 0.0 {
            return Err(Error::Config(format!(
                "scenario `{}`: end of travel must lie ahead of the start in the grading direction",
                self.name
            )));
        }
        if !(self.payload >= 0.0) || !(self.window.approach >= 0.0) {
            return Err(Error::Config(format!(
                "scenario `{}`: payload and approach must be non-negative",
                self.name
            )));
        }
        Ok(())
    }

    /// The plant with this scenario's soil and payload.
    pub fn plant(&self) -> Result<Plant> {
        let mut soil = self.soil.clone();
        soil.noise_seed = self.seed;
        Ok(load_plant(&self.plant)?.with_soil(soil)?.with_payload(self.payload))
    }

    pub fn setup(&self) -> Result<PassSetup> {
        let plant = self.plant()?;
        let mut initial_theta =
            plant
                .chain()
                .inverse(plant.cabin_pitch, [self.start.x, self.start.height], self.surface.phi)?;
        let limits = plant.machine.limits();
        if crate::kinematics::Joint::ALL
            .iter()
            .any(|&j| !limits[j].contains(initial_theta[j.index()]))
        {
            return Err(Error::Config(format!(
                "scenario `{}`: start pose violates joint limits",
                self.name
            )));
        }
        plant.machine.clamp_to_limits(&mut initial_theta);
        Ok(PassSetup {
            plant,
            initial_theta,
            surface: self.surface,
            noise: SensorNoise {
                seed: self.seed,
                ..self.noise
            },
            termination: self.termination,
        })
    }
}

/// Everything the grading controller needs for one machine.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerArtifacts {
    pub ff: HydraulicFeedForward,
    pub dynamics: DynamicsFile,
    pub params: ControllerParams,
}

impl ControllerArtifacts {
    /// Calibrates the feed-forward and identifies the joint dynamics on the
    /// bare plant `plant_ref` with noiseless sensors.
    pub fn calibrate(plant_ref: &str, params: ControllerParams, exec: Execution) -> Result<Self> {
        let plant = load_plant(plant_ref)?;
        let noise = SensorNoise::NONE;
        let ff = match plant.machine.architecture {
            Architecture::Nfc => calibrate_nfc(&plant, &noise, exec)?.feedforward,
            Architecture::Ls => calibrate_ls_plant(&plant, &noise, exec)?,
        };
        let (dynamics, _) = identify_dynamics(&plant, &ff, &params.pid, &noise, exec)?;
        Ok(ControllerArtifacts { ff, dynamics, params })
    }

    /// Artifacts named by `files`, calibrating whatever is missing.
    pub fn for_files(plant_ref: &str, files: &ControllerFiles, exec: Execution) -> Result<Self> {
        let params = match &files.params {
            Some(p) => ControllerParams::load(p)?,
            None => ControllerParams::default(),
        };
        match (&files.ff, &files.dynamics) {
            (Some(ff), Some(dynamics)) => Ok(ControllerArtifacts {
                ff: HydraulicFeedForward::load(ff)?,
                dynamics: DynamicsFile::load(dynamics)?,
                params,
            }),
            (Some(ff), None) => {
                let ff = HydraulicFeedForward::load(ff)?;
                let plant = load_plant(plant_ref)?;
                let (dynamics, _) = identify_dynamics(&plant, &ff, &params.pid, &SensorNoise::NONE, exec)?;
                Ok(ControllerArtifacts { ff, dynamics, params })
            }
            (None, dynamics) => {
                let mut a = Self::calibrate(plant_ref, params, exec)?;
                if let Some(d) = dynamics {
                    a.dynamics = DynamicsFile::load(d)?;
                }
                Ok(a)
            }
        }
    }
}
