//! Solver calibration against the dispersion relation, viscous decay, the
//! published Faraday wavelength and the published Faraday threshold.

use serde::{Deserialize, Serialize};

use crate::config::PhysicsConfig;
use crate::droplet::DropletParams;
use crate::error::{Error, Result};
use crate::geometry::{build_bath, BellSettings, Topography};
use crate::wavefield::modes::{driven_response_wavelength, measure_mode, subharmonic_wavelength};
use crate::wavefield::{faraday_threshold, ThresholdConfig, ThresholdEstimate, WaveModel};

/// cm
pub const REFERENCE_FARADAY_WAVELENGTH: f64 = 0.475;
/// Units of g0.
pub const REFERENCE_THRESHOLD: f64 = 4.69;

pub const DISPERSION_TOL: f64 = 0.02;
pub const DECAY_TOL: f64 = 0.05;
pub const WAVELENGTH_TOL: f64 = 0.05;
/// Outside this the threshold is reported as a warning, never a failure.
pub const THRESHOLD_WARN: f64 = 0.20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    /// Depth of the flat bath used for the single-mode checks, cm.
    pub flat_depth: f64,
    /// Dispersion check wavenumbers as multiples of the Faraday wavenumber.
    pub dispersion_multiples: Vec<f64>,
    /// Oscillation periods per mode measurement.
    pub mode_periods: u32,
    pub threshold: ThresholdConfig,
    /// Skip the bisection, which dominates the cost.
    pub skip_threshold: bool,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            flat_depth: 0.5,
            dispersion_multiples: vec![0.5, 1.0, 2.0],
            mode_periods: 5,
            threshold: ThresholdConfig::default(),
            skip_threshold: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Warn,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub measured: f64,
    pub expected: f64,
    pub rel_error: f64,
    pub status: Status,
}

impl Check {
    fn new(measured: f64, expected: f64, tol: f64, miss: Status) -> Self {
        let rel_error = (measured - expected) / expected;
        let status = if rel_error.abs() <= tol { Status::Pass } else { miss };
        Self { measured, expected, rel_error, status }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeCheck {
    pub j: usize,
    /// 1/cm
    pub k: f64,
    pub check: Check,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    /// Angular frequency against ω² = (g0 k + (σ/ρ) k³) tanh(kh).
    pub dispersion: Vec<ModeCheck>,
    /// Amplitude decay rate against 2νk².
    pub decay: ModeCheck,
    /// Wavelength whose free oscillation is subharmonic to the drive, cm.
    pub faraday_wavelength: Check,
    /// Wavelength of the damped response to a bouncing source, cm. Not
    /// checked.
    pub driven_wavelength: f64,
    pub threshold: Option<ThresholdEstimate>,
    /// Threshold against the reference value; `Warn` rather than `Fail`.
    pub threshold_check: Option<Check>,
}

impl CalibrationReport {
    /// No hard check failed.
    pub fn passed(&self) -> bool {
        self.dispersion.iter().all(|m| m.check.status == Status::Pass)
            && self.decay.check.status == Status::Pass
            && self.faraday_wavelength.status == Status::Pass
    }
}

fn mode_index(model: &WaveModel, k: f64) -> usize {
    let j = (k * model.grid().length() / std::f64::consts::PI).round() as usize;
    j.clamp(1, model.grid().nx / 2 - 1)
}

/// Runs every check. The threshold is measured on the Bell bath at the
/// settings (a, b); the other checks use a flat bath.
pub fn calibrate(physics: &PhysicsConfig, settings: &BellSettings, cfg: &CalibrationConfig) -> Result<CalibrationReport> {
    physics.validate()?;
    if !(cfg.flat_depth > 0.0) {
        return Err(Error::config("flat_depth", "must be positive"));
    }
    if cfg.dispersion_multiples.is_empty() || cfg.dispersion_multiples.iter().any(|m| !(*m > 0.0)) {
        return Err(Error::config("dispersion_multiples", "need at least one positive multiple"));
    }
    let fluid = &physics.fluid;
    let flat = Topography::flat(cfg.flat_depth, &physics.geometry)?;
    let model = WaveModel::new(&flat, fluid, &physics.grid)?;
    model.check_stability()?;
    let kf = fluid.faraday_wavenumber(cfg.flat_depth);

    let mut dispersion = Vec::new();
    for m in &cfg.dispersion_multiples {
        let j = mode_index(&model, m * kf);
        let r = measure_mode(&model, j, cfg.mode_periods)?;
        let expected = fluid.dispersion(r.k, cfg.flat_depth);
        dispersion.push(ModeCheck { j, k: r.k, check: Check::new(r.omega, expected, DISPERSION_TOL, Status::Fail) });
    }
    let j = mode_index(&model, kf);
    let r = measure_mode(&model, j, cfg.mode_periods)?;
    let decay = ModeCheck { j, k: r.k, check: Check::new(r.decay, 2.0 * fluid.nu * r.k * r.k, DECAY_TOL, Status::Fail) };

    let lambda = subharmonic_wavelength(&model)?;
    let faraday_wavelength = Check::new(lambda, REFERENCE_FARADAY_WAVELENGTH, WAVELENGTH_TOL, Status::Fail);
    let droplet = DropletParams::new(&physics.droplet, fluid)?;
    let driven_wavelength = driven_response_wavelength(&model, &droplet, 60)?;

    let (threshold, threshold_check) = if cfg.skip_threshold {
        (None, None)
    } else {
        let bath = build_bath(settings.a, settings.b, &physics.geometry)?;
        let est = faraday_threshold(&bath, fluid, &physics.grid, &cfg.threshold)?;
        (Some(est), Some(Check::new(est.gamma_f, REFERENCE_THRESHOLD, THRESHOLD_WARN, Status::Warn)))
    };
    Ok(CalibrationReport { dispersion, decay, faraday_wavelength, driven_wavelength, threshold, threshold_check })
}
