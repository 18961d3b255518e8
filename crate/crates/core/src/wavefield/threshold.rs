//! Faraday threshold by bisection on the forcing amplitude, and the
//! wavelength of the pattern that grows above it.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DtnOperator, FluidParams, Grid, GridConfig, Rk4Buffers, WaveModel, WaveState};
use crate::error::{Error, Result};
use crate::geometry::Topography;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdConfig {
    /// Initial bracket in units of g0.
    pub lo: f64,
    pub hi: f64,
    /// Faraday periods per growth-rate evaluation.
    pub horizon_periods: u32,
    /// Stop once the bracket is narrower than this.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self { lo: 3.5, hi: 6.0, horizon_periods: 30, tolerance: 0.1, seed: 7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    /// Bracket midpoint, units of g0.
    pub gamma_f: f64,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    pub bracket_width: f64,
    pub rate_lo: f64,
    pub rate_hi: f64,
    pub evaluations: u32,
}

/// Wall-mode indices j (wavenumber jπ/L) within `width` of the Faraday
/// wavenumber for the deepest point of the bath.
fn faraday_band(grid: &Grid, fluid: &FluidParams, width: f64) -> std::ops::RangeInclusive<usize> {
    let h = grid.depth.iter().cloned().fold(0.0, f64::max);
    let kf = fluid.faraday_wavenumber(h);
    let len = grid.length();
    let lo = (((1.0 - width) * kf * len / PI).floor() as usize).max(1);
    let hi = ((1.0 + width) * kf * len / PI).ceil() as usize;
    lo..=hi
}

/// Small random elevation made of wall modes within 30% of the Faraday
/// wavenumber.
pub fn seed_perturbation(grid: &Grid, fluid: &FluidParams, seed: u64, amplitude: f64) -> WaveState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = grid.length();
    let mut state = WaveState::rest(grid.nx);
    for j in faraday_band(grid, fluid, 0.3) {
        let a: f64 = rng.gen_range(-1.0..1.0);
        let k = j as f64 * PI / len;
        for i in 0..grid.nx {
            state.eta[i] += amplitude * a * (k * grid.x(i)).cos();
        }
    }
    state
}

/// Projects η onto the wall modes of the Faraday band. Slowly decaying
/// long-wave cavity modes fall outside the band and are ignored.
struct BandProjector {
    basis: Vec<Vec<f64>>,
}

impl BandProjector {
    fn new(grid: &Grid, fluid: &FluidParams) -> Self {
        let len = grid.length();
        let basis = faraday_band(grid, fluid, 0.3)
            .map(|j| {
                let k = j as f64 * PI / len;
                (0..grid.nx).map(|i| (k * grid.x(i)).cos()).collect()
            })
            .collect();
        Self { basis }
    }

    fn energy(&self, eta: &[f64]) -> f64 {
        self.basis.iter().map(|b| b.iter().zip(eta).map(|(c, e)| c * e).sum::<f64>().powi(2)).sum()
    }
}

/// Band energy averaged over one Faraday period, sampled every step,
/// starting at the state's current time. Advances the state.
fn period_energy(
    model: &WaveModel,
    state: &mut WaveState,
    buf: &mut Rk4Buffers,
    projector: &BandProjector,
) -> Result<f64> {
    let mut scratch = model.scratch();
    let steps = model.grid().steps_per_period;
    let mut acc = 0.0;
    for _ in 0..steps {
        buf.advance(model, state, None, &mut scratch);
        model.check(state)?;
        acc += projector.energy(&state.eta);
    }
    Ok(acc / steps as f64)
}

/// Amplitude growth rate (1/s) of a seeded perturbation, from the
/// period-averaged band energy at mid-horizon and at the end.
pub fn growth_rate(model: &WaveModel, horizon_periods: u32, seed: u64) -> Result<f64> {
    if horizon_periods < 4 {
        return Err(Error::config("horizon_periods", "need at least 4 Faraday periods"));
    }
    let grid = model.grid();
    let mut state = seed_perturbation(grid, model.fluid(), seed, 1e-6);
    let projector = BandProjector::new(grid, model.fluid());
    let mut buf = Rk4Buffers::new(grid.nx);
    let mut scratch = model.scratch();
    let per = grid.steps_per_period as u64;
    let mid = horizon_periods as u64 / 2;
    for _ in 0..(mid - 1) * per {
        buf.advance(model, &mut state, None, &mut scratch);
    }
    model.check(&state)?;
    let e_mid = period_energy(model, &mut state, &mut buf, &projector)?;
    for _ in 0..(horizon_periods as u64 - mid - 1) * per {
        buf.advance(model, &mut state, None, &mut scratch);
    }
    model.check(&state)?;
    let e_end = period_energy(model, &mut state, &mut buf, &projector)?;
    let elapsed = (horizon_periods as u64 - mid) as f64 * model.fluid().faraday_period();
    Ok(0.5 * (e_end / e_mid).ln() / elapsed)
}

/// Bisection on Γ between decay and growth of a seeded perturbation.
pub fn faraday_threshold(
    topo: &Topography,
    fluid: &FluidParams,
    grid_config: &GridConfig,
    config: &ThresholdConfig,
) -> Result<ThresholdEstimate> {
    if !(config.lo >= 0.0 && config.hi > config.lo) {
        return Err(Error::config("threshold", format!("bad bracket [{}, {}]", config.lo, config.hi)));
    }
    if !(config.tolerance > 0.0) {
        return Err(Error::config("tolerance", "must be positive"));
    }
    let grid = Grid::new(topo, fluid, grid_config)?;
    let dtn = Arc::new(DtnOperator::build(&grid)?);
    let rate = |gamma: f64| -> Result<f64> {
        let model = WaveModel::from_parts(grid.clone(), Arc::clone(&dtn), FluidParams { gamma, ..*fluid })?;
        model.check_stability()?;
        growth_rate(&model, config.horizon_periods, config.seed)
    };
    let (mut lo, mut hi) = (config.lo, config.hi);
    let (mut rate_lo, mut rate_hi) = (rate(lo)?, rate(hi)?);
    let mut evaluations = 2;
    if !(rate_lo < 0.0 && rate_hi > 0.0) {
        return Err(Error::Bracket { lo, hi, rate_lo, rate_hi });
    }
    while hi - lo > config.tolerance {
        let mid = 0.5 * (lo + hi);
        let r = rate(mid)?;
        evaluations += 1;
        if r > 0.0 {
            hi = mid;
            rate_hi = r;
        } else {
            lo = mid;
            rate_lo = r;
        }
    }
    Ok(ThresholdEstimate {
        gamma_f: 0.5 * (lo + hi),
        bracket_lo: lo,
        bracket_hi: hi,
        bracket_width: hi - lo,
        rate_lo,
        rate_hi,
        evaluations,
    })
}

/// Dominant wavelength (cm) of `eta` from its projection onto the wall
/// modes cos(jπx/L).
pub fn dominant_wavelength(grid: &Grid, eta: &[f64]) -> f64 {
    let len = grid.length();
    let mut best = (0.0, 1usize);
    for j in 1..grid.nx / 2 {
        let k = j as f64 * PI / len;
        let c: f64 = (0..grid.nx).map(|i| eta[i] * (k * grid.x(i)).cos()).sum();
        if c.abs() > best.0 {
            best = (c.abs(), j);
        }
    }
    2.0 * len / best.1 as f64
}

/// Drives a seeded bath for `periods` Faraday periods at the model's forcing
/// and returns the dominant wavelength of the resulting pattern.
pub fn pattern_wavelength(model: &WaveModel, periods: u32, seed: u64) -> Result<f64> {
    let grid = model.grid();
    let mut state = seed_perturbation(grid, model.fluid(), seed, 1e-6);
    model.run_free(&mut state, periods as u64 * grid.steps_per_period as u64)?;
    Ok(dominant_wavelength(grid, &state.eta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::LayoutConfig;

    #[test]
    fn dominant_wavelength_of_single_mode() {
        let topo = Topography::flat(0.5, &LayoutConfig::default()).unwrap();
        let grid = Grid::new(&topo, &FluidParams::default(), &GridConfig::desk()).unwrap();
        let k = 25.0 * PI / grid.length();
        let eta: Vec<f64> = (0..grid.nx).map(|i| (k * grid.x(i)).cos()).collect();
        assert!((dominant_wavelength(&grid, &eta) - 12.0 / 25.0).abs() < 1e-12);
    }

    #[test]
    fn unforced_bath_decays() {
        let topo = Topography::flat(0.5, &LayoutConfig::default()).unwrap();
        let fluid = FluidParams { gamma: 0.0, ..FluidParams::default() };
        let model = WaveModel::new(&topo, &fluid, &GridConfig::desk()).unwrap();
        assert!(growth_rate(&model, 8, 1).unwrap() < 0.0);
    }

    #[test]
    fn empty_bracket_is_reported() {
        let topo = Topography::flat(0.5, &LayoutConfig::default()).unwrap();
        let cfg = ThresholdConfig { lo: 0.0, hi: 1.0, horizon_periods: 6, ..ThresholdConfig::default() };
        let err = faraday_threshold(&topo, &FluidParams::default(), &GridConfig::desk(), &cfg).unwrap_err();
        match err {
            Error::Bracket { rate_lo, rate_hi, .. } => assert!(rate_lo < 0.0 && rate_hi < 0.0),
            other => panic!("{other}"),
        }
    }
}
