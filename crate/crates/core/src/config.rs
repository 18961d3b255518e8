//! Versioned JSON run configuration.
//!
//! Physics sections (`fluid`, `geometry`, `droplet`) may be omitted as a
//! whole, in which case the published defaults apply; once a section is
//! present every field in it is required. `grid` and `experiment` default
//! field by field, with `profile` choosing the grid preset and measurement
//! times.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibration::CalibrationConfig;
use crate::droplet::{DropletConfig, DropletParams};
use crate::error::{Error, Result};
use crate::geometry::{BellSettings, LayoutConfig};
use crate::montecarlo::{ConvergenceRule, SamplingMode};
use crate::wavefield::{FluidParams, GridConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    #[default]
    Paper,
    Desk,
}

impl Profile {
    pub fn grid(self) -> GridConfig {
        match self {
            Profile::Paper => GridConfig::paper(),
            Profile::Desk => GridConfig::desk(),
        }
    }

    /// Measurement times in Faraday periods.
    pub fn t_m(self) -> Vec<u32> {
        match self {
            Profile::Paper => vec![1000],
            Profile::Desk => vec![100],
        }
    }
}

/// Everything a single coupled run needs besides the settings and seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsConfig {
    pub fluid: FluidParams,
    pub geometry: LayoutConfig,
    pub droplet: DropletConfig,
    pub grid: GridConfig,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            fluid: FluidParams::default(),
            geometry: LayoutConfig::default(),
            droplet: DropletConfig::default(),
            grid: GridConfig::paper(),
        }
    }
}

impl PhysicsConfig {
    pub fn desk() -> Self {
        Self { grid: GridConfig::desk(), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        self.fluid.validate()?;
        self.geometry.validate()?;
        self.grid.validate()?;
        DropletParams::new(&self.droplet, &self.fluid)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub mode: SamplingMode,
    /// Δλ grid in units of the outer cavity length.
    pub delta_lambda_over_l: Vec<f64>,
    /// Measurement times in Faraday periods; `None` takes the profile's.
    pub t_m: Option<Vec<u32>>,
    /// Barrier depths swept with α = β.
    pub alpha_grid: Vec<f64>,
    pub settings: BellSettings,
    pub seed: u64,
    pub convergence: ConvergenceRule,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: SamplingMode::Independent,
            delta_lambda_over_l: vec![0.0, 0.5, 1.0],
            t_m: None,
            alpha_grid: vec![0.099],
            settings: BellSettings::default(),
            seed: 1,
            convergence: ConvergenceRule::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Trajectory CSV row stride for `run`, in steps.
    pub trajectory_every: u64,
    /// Field dump frame stride for `run`, in steps; 0 disables the dump.
    pub field_dump_every: u64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { trajectory_every: 16, field_dump_every: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub profile: Profile,
    #[serde(default)]
    pub fluid: FluidParams,
    #[serde(default)]
    pub geometry: LayoutConfig,
    #[serde(default)]
    pub droplet: DropletConfig,
    /// Overrides the profile's grid when present.
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub calibration: CalibrationConfig,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            profile: Profile::Paper,
            fluid: FluidParams::default(),
            geometry: LayoutConfig::default(),
            droplet: DropletConfig::default(),
            grid: None,
            experiment: ExperimentConfig::default(),
            output: OutputConfig::default(),
            calibration: CalibrationConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| Error::config(json_field(&e), e.to_string()))?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Fills profile-dependent defaults so the document describes itself.
    pub fn resolved(&self) -> Self {
        let mut out = self.clone();
        out.grid = Some(self.grid.unwrap_or_else(|| self.profile.grid()));
        if out.experiment.t_m.is_none() {
            out.experiment.t_m = Some(self.profile.t_m());
        }
        out
    }

    pub fn physics(&self) -> PhysicsConfig {
        PhysicsConfig {
            fluid: self.fluid,
            geometry: self.geometry,
            droplet: self.droplet,
            grid: self.grid.unwrap_or_else(|| self.profile.grid()),
        }
    }

    pub fn t_m(&self) -> Vec<u32> {
        self.experiment.t_m.clone().unwrap_or_else(|| self.profile.t_m())
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        self.physics().validate()?;
        let e = &self.experiment;
        e.settings.validate(&self.geometry)?;
        e.convergence.validate()?;
        if e.delta_lambda_over_l.is_empty() {
            return Err(Error::config("delta_lambda_over_l", "grid is empty"));
        }
        if let Some(bad) = e.delta_lambda_over_l.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::config("delta_lambda_over_l", format!("{bad} is outside [0, 1]")));
        }
        let t_m = self.t_m();
        if t_m.is_empty() || t_m.contains(&0) {
            return Err(Error::config("t_m", "need at least one measurement time of at least 1 period"));
        }
        if e.alpha_grid.is_empty() {
            return Err(Error::config("alpha_grid", "grid is empty"));
        }
        for &alpha in &e.alpha_grid {
            BellSettings { a: alpha, a_prime: alpha, b: alpha, b_prime: alpha }
                .validate(&self.geometry)
                .map_err(|_| Error::config("alpha_grid", format!("barrier depth {alpha} is out of range")))?;
        }
        Ok(())
    }

    /// SHA-256 over the resolved physics and experiment sections. Output
    /// and calibration options do not contribute.
    pub fn hash(&self) -> String {
        hex::encode(self.hash_bytes())
    }

    pub fn hash_bytes(&self) -> [u8; 32] {
        let r = self.resolved();
        let doc = serde_json::json!({
            "schema_version": r.schema_version,
            "fluid": r.fluid,
            "geometry": r.geometry,
            "droplet": r.droplet,
            "grid": r.grid,
            "experiment": r.experiment,
        });
        Sha256::digest(doc.to_string().as_bytes()).into()
    }
}

/// Best-effort name of the offending key in a serde error message.
fn json_field(err: &serde_json::Error) -> String {
    let msg = err.to_string();
    for marker in ["missing field `", "unknown field `", "duplicate field `"] {
        if let Some(start) = msg.find(marker) {
            let rest = &msg[start + marker.len()..];
            if let Some(end) = rest.find('`') {
                return rest[..end].to_string();
            }
        }
    }
    "config".into()
}
