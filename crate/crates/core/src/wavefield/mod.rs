//! Linear quasi-potential free-surface model over a variable bottom:
//!
//! ```text
//! ∂η/∂t = ∂φ/∂z + 2ν ∂²η/∂x²
//! ∂φ/∂t = −g(t) η + (σ/ρ) ∂²η/∂x² + 2ν ∂²φ/∂x² − Σ_j P_d(x − x_j)/ρ
//! ```
//!
//! with `g(t) = g0 (1 − Γ sin ωt)` and `∂φ/∂z` supplied by [`DtnOperator`].
//! Time stepping is classical RK4.
//!
//! Every spatial operation is arranged so that a mirror-symmetric state on a
//! mirror-symmetric bath stays mirror-symmetric to the last bit.

mod banded;
pub mod dtn;
pub mod dump;
pub mod modes;
mod params;
pub mod threshold;

use std::sync::Arc;

pub use dtn::DtnOperator;
pub use params::{FluidParams, Grid, GridConfig};
pub use threshold::{faraday_threshold, ThresholdConfig, ThresholdEstimate};

use crate::droplet::PressureSource;
use crate::error::{Error, Result};
use crate::geometry::Topography;

/// Free-surface elevation and surface potential on the cell centres.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    /// cm
    pub eta: Vec<f64>,
    /// cm²/s
    pub phi: Vec<f64>,
    /// s
    pub t: f64,
    pub step: u64,
}

impl WaveState {
    pub fn rest(nx: usize) -> Self {
        Self { eta: vec![0.0; nx], phi: vec![0.0; nx], t: 0.0, step: 0 }
    }

    pub fn max_abs_eta(&self) -> f64 {
        self.eta.iter().fold(0.0, |m, v| if v.abs() > m || v.is_nan() { v.abs() } else { m })
    }

    pub fn is_finite(&self) -> bool {
        self.eta.iter().chain(&self.phi).all(|v| v.is_finite())
    }

    /// True when `eta` and `phi` are bitwise mirror images of themselves.
    pub fn is_mirror_symmetric(&self) -> bool {
        let n = self.eta.len();
        (0..n / 2).all(|i| {
            self.eta[i].to_bits() == self.eta[n - 1 - i].to_bits()
                && self.phi[i].to_bits() == self.phi[n - 1 - i].to_bits()
        })
    }
}

/// Grid, DtN operator and fluid parameters for one bath.
#[derive(Debug, Clone)]
pub struct WaveModel {
    grid: Grid,
    dtn: Arc<DtnOperator>,
    fluid: FluidParams,
    left: Vec<usize>,
    right: Vec<usize>,
}

/// Scratch space for one right-hand-side evaluation.
#[derive(Debug, Clone)]
pub struct RhsScratch {
    lap_eta: Vec<f64>,
    lap_phi: Vec<f64>,
    dn: Vec<f64>,
    even: Vec<f64>,
    odd: Vec<f64>,
}

impl RhsScratch {
    pub fn new(nx: usize) -> Self {
        Self {
            lap_eta: vec![0.0; nx],
            lap_phi: vec![0.0; nx],
            dn: vec![0.0; nx],
            even: vec![0.0; nx / 2],
            odd: vec![0.0; nx / 2],
        }
    }
}

impl WaveModel {
    pub fn new(topo: &Topography, fluid: &FluidParams, config: &GridConfig) -> Result<Self> {
        let grid = Grid::new(topo, fluid, config)?;
        let dtn = Arc::new(DtnOperator::build(&grid)?);
        Self::from_parts(grid, dtn, *fluid)
    }

    /// Reuses an already factorised operator for `grid`.
    pub fn from_parts(grid: Grid, dtn: Arc<DtnOperator>, fluid: FluidParams) -> Result<Self> {
        fluid.validate()?;
        if dtn.len() != grid.nx {
            return Err(Error::config("grid", "operator size does not match the grid"));
        }
        let (left, right) = grid.neighbours();
        Ok(Self { grid, dtn, fluid, left, right })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dtn(&self) -> &Arc<DtnOperator> {
        &self.dtn
    }

    pub fn fluid(&self) -> &FluidParams {
        &self.fluid
    }

    pub fn with_fluid(&self, fluid: FluidParams) -> Result<Self> {
        Self::from_parts(self.grid.clone(), Arc::clone(&self.dtn), fluid)
    }

    pub fn dt(&self) -> f64 {
        self.grid.dt
    }

    pub(crate) fn scratch(&self) -> RhsScratch {
        RhsScratch::new(self.grid.nx)
    }

    /// Discrete `∂²/∂x²` with reflecting walls.
    #[inline]
    pub(crate) fn laplacian(&self, f: &[f64], out: &mut [f64]) {
        let inv = 1.0 / (self.grid.dx * self.grid.dx);
        for i in 0..f.len() {
            out[i] = ((f[self.left[i]] + f[self.right[i]]) - 2.0 * f[i]) * inv;
        }
    }

    /// Centred `∂/∂x` at cell `i`.
    #[inline]
    pub(crate) fn gradient_at(&self, f: &[f64], i: usize) -> f64 {
        (f[self.right[i]] - f[self.left[i]]) / (2.0 * self.grid.dx)
    }

    /// Time derivatives of `(eta, phi)` at time `t` with `pressure` already
    /// deposited on the grid (dyn/cm²).
    pub(crate) fn rhs(
        &self,
        eta: &[f64],
        phi: &[f64],
        t: f64,
        pressure: Option<&[f64]>,
        d_eta: &mut [f64],
        d_phi: &mut [f64],
        scratch: &mut RhsScratch,
    ) {
        let f = &self.fluid;
        let two_nu = 2.0 * f.nu;
        let cap = f.capillary_coeff();
        let g = f.gravity(t);
        let inv_rho = 1.0 / f.rho;
        self.laplacian(eta, &mut scratch.lap_eta);
        self.laplacian(phi, &mut scratch.lap_phi);
        self.apply_dtn(phi, scratch);
        for i in 0..eta.len() {
            d_eta[i] = scratch.dn[i] + two_nu * scratch.lap_eta[i];
            d_phi[i] = (-g * eta[i] + cap * scratch.lap_eta[i]) + two_nu * scratch.lap_phi[i];
        }
        if let Some(p) = pressure {
            for i in 0..eta.len() {
                d_phi[i] -= p[i] * inv_rho;
            }
        }
    }

    fn apply_dtn(&self, phi: &[f64], scratch: &mut RhsScratch) {
        self.dtn.apply_with(phi, &mut scratch.dn, &mut scratch.even, &mut scratch.odd);
    }

    /// Advances `state` by one `dt` with sources frozen at `state.t`.
    pub fn step(&self, state: &mut WaveState, sources: &[PressureSource]) -> Result<()> {
        let n = self.grid.nx;
        let mut pressure = vec![0.0; n];
        for s in sources {
            s.deposit(&self.grid, &mut pressure);
        }
        let p = (!sources.is_empty()).then_some(pressure.as_slice());
        let mut stepper = Rk4Buffers::new(n);
        let mut scratch = self.scratch();
        stepper.advance(self, state, p, &mut scratch);
        self.check(state)
    }

    /// Steps `count` times without sources.
    pub fn run_free(&self, state: &mut WaveState, count: u64) -> Result<()> {
        let n = self.grid.nx;
        let mut stepper = Rk4Buffers::new(n);
        let mut scratch = self.scratch();
        for _ in 0..count {
            stepper.advance(self, state, None, &mut scratch);
            self.check(state)?;
        }
        Ok(())
    }

    pub(crate) fn check(&self, state: &WaveState) -> Result<()> {
        if state.is_finite() {
            Ok(())
        } else {
            Err(Error::Divergence { step: state.step, max_eta: state.max_abs_eta() })
        }
    }

    /// Slope `∂η/∂x` at absolute position `x`, linearly interpolated between
    /// cell-centre slopes.
    pub fn slope_at(&self, state: &WaveState, x: f64) -> Result<f64> {
        let len = self.grid.length();
        if !(x.is_finite() && (0.0..=len).contains(&x)) {
            return Err(Error::Domain { x, lo: 0.0, hi: len });
        }
        Ok(self.slope_at_offset(&state.eta, x - self.grid.half_length()))
    }

    /// Slope at offset `xi` from the midpoint. Odd in `xi` for mirror-symmetric
    /// `eta`, bit-for-bit. Falls linearly to zero between the outermost
    /// cell centre and the wall.
    pub(crate) fn slope_at_offset(&self, eta: &[f64], xi: f64) -> f64 {
        let n = self.grid.nx;
        let (i0, frac) = self.locate(xi.abs());
        // mirrored cells for xi < 0, same weights
        let cell = |i: usize| if xi >= 0.0 { i } else { n - 1 - i };
        let a = self.gradient_at(eta, cell(i0));
        let b = if i0 + 1 < n { self.gradient_at(eta, cell(i0 + 1)) } else { 0.0 };
        a * (1.0 - frac) + b * frac
    }

    /// Lower interpolation cell and weight for a non-negative offset. Past
    /// the last centre the weight runs to 1 at the wall.
    #[inline]
    fn locate(&self, xi: f64) -> (usize, f64) {
        let n = self.grid.nx;
        let s = xi / self.grid.dx + 0.5 * (n - 1) as f64;
        let last = (n - 1) as f64;
        if s >= last {
            return (n - 1, ((s - last) * 2.0).min(1.0));
        }
        let i0 = s.floor().max(0.0) as usize;
        (i0, s - i0 as f64)
    }

    /// Slope at every cell centre.
    pub fn slopes(&self, eta: &[f64]) -> Vec<f64> {
        (0..eta.len()).map(|i| self.gradient_at(eta, i)).collect()
    }

    /// Quadratic wave energy per unit width, ½Σ(g0 η² − (σ/ρ) η ∂²η/∂x² + φ ∂φ/∂z)·dx.
    /// A single unforced wall mode decays as exp(−4νk²t) in this norm.
    pub fn energy(&self, state: &WaveState) -> f64 {
        let n = self.grid.nx;
        let mut dn = vec![0.0; n];
        let mut lap = vec![0.0; n];
        self.dtn.apply(&state.phi, &mut dn);
        self.laplacian(&state.eta, &mut lap);
        let cap = self.fluid.capillary_coeff();
        let mut e = 0.0;
        for i in 0..n {
            e += self.fluid.g0 * state.eta[i] * state.eta[i] - cap * state.eta[i] * lap[i] + state.phi[i] * dn[i];
        }
        0.5 * e * self.grid.dx
    }

    /// Checks that RK4 is stable for every discrete mode at the current
    /// resolution, using the flat-bottom mode symbols capped by the
    /// operator's spectral radius.
    pub fn check_stability(&self) -> Result<()> {
        let f = &self.fluid;
        let g = &self.grid;
        let h_max = g.depth.iter().cloned().fold(0.0, f64::max);
        let rho_dtn = self.dtn.spectral_radius();
        let gmax = f.g0 * (1.0 + f.gamma);
        let mut worst = (0.0, 0usize);
        for j in 0..=g.nx {
            let k = j as f64 * std::f64::consts::PI / g.length();
            let kd2 = (2.0 / g.dx * (0.5 * k * g.dx).sin()).powi(2);
            for dtn_sym in [(k * (k * h_max).tanh()).min(rho_dtn), rho_dtn] {
                let re = -2.0 * f.nu * kd2 * g.dt;
                let im = (dtn_sym * (gmax + f.capillary_coeff() * kd2)).sqrt() * g.dt;
                let amp = rk4_amplification(re, im);
                if amp > worst.0 {
                    worst = (amp, j);
                }
            }
        }
        if worst.0 > 1.0 + 1e-12 {
            return Err(Error::config(
                "steps_per_period",
                format!(
                    "RK4 unstable at dt = {:.3e} s: amplification {:.4} for mode {} (dx = {:.4e} cm)",
                    g.dt, worst.0, worst.1, g.dx
                ),
            ));
        }
        Ok(())
    }
}

/// |1 + z + z²/2 + z³/6 + z⁴/24| for z = re + i·im.
fn rk4_amplification(re: f64, im: f64) -> f64 {
    let (mut pr, mut pi) = (1.0, 0.0); // z^k / k!
    let (mut sr, mut si) = (1.0, 0.0);
    for k in 1..=4 {
        let nr = (pr * re - pi * im) / k as f64;
        let ni = (pr * im + pi * re) / k as f64;
        pr = nr;
        pi = ni;
        sr += pr;
        si += pi;
    }
    (sr * sr + si * si).sqrt()
}

/// Stage storage for the wave-only RK4 integrator.
#[derive(Debug, Clone)]
pub struct Rk4Buffers {
    k_eta: [Vec<f64>; 4],
    k_phi: [Vec<f64>; 4],
    tmp_eta: Vec<f64>,
    tmp_phi: Vec<f64>,
}

impl Rk4Buffers {
    pub fn new(n: usize) -> Self {
        let v = || vec![0.0; n];
        Self { k_eta: [v(), v(), v(), v()], k_phi: [v(), v(), v(), v()], tmp_eta: v(), tmp_phi: v() }
    }

    pub fn advance(&mut self, model: &WaveModel, state: &mut WaveState, pressure: Option<&[f64]>, scratch: &mut RhsScratch) {
        let dt = model.dt();
        let t0 = state.step as f64 * dt;
        let n = state.eta.len();
        let offsets = [0.0, 0.5, 0.5, 1.0];
        for stage in 0..4 {
            if stage == 0 {
                self.tmp_eta.copy_from_slice(&state.eta);
                self.tmp_phi.copy_from_slice(&state.phi);
            } else {
                let h = offsets[stage] * dt;
                let (ke, kp) = (&self.k_eta[stage - 1], &self.k_phi[stage - 1]);
                for i in 0..n {
                    self.tmp_eta[i] = state.eta[i] + h * ke[i];
                    self.tmp_phi[i] = state.phi[i] + h * kp[i];
                }
            }
            let (ke, kp) = (&mut self.k_eta[stage], &mut self.k_phi[stage]);
            model.rhs(&self.tmp_eta, &self.tmp_phi, t0 + offsets[stage] * dt, pressure, ke, kp, scratch);
        }
        let w = dt / 6.0;
        for i in 0..n {
            state.eta[i] += w * ((self.k_eta[0][i] + 2.0 * self.k_eta[1][i]) + (2.0 * self.k_eta[2][i] + self.k_eta[3][i]));
            state.phi[i] += w * ((self.k_phi[0][i] + 2.0 * self.k_phi[1][i]) + (2.0 * self.k_phi[2][i] + self.k_phi[3][i]));
        }
        state.step += 1;
        state.t = state.step as f64 * dt;
    }
}
