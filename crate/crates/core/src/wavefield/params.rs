use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Topography;

/// Bath fluid and forcing parameters, CGS units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluidParams {
    /// g/cm³
    pub rho: f64,
    /// Surface tension, dyn/cm.
    pub sigma: f64,
    /// Kinematic viscosity, cm²/s.
    pub nu: f64,
    /// Gravity, cm/s².
    pub g0: f64,
    /// Forcing acceleration amplitude A₀ω² in units of `g0`.
    pub gamma: f64,
    /// Drive angular frequency, rad/s.
    pub omega: f64,
}

impl Default for FluidParams {
    fn default() -> Self {
        Self {
            rho: 0.95,
            sigma: 20.9,
            nu: 0.16,
            g0: 981.0,
            gamma: 4.23,
            omega: 2.0 * PI * 80.0,
        }
    }
}

impl FluidParams {
    pub fn validate(&self) -> Result<()> {
        for (field, value) in [
            ("rho", self.rho),
            ("sigma", self.sigma),
            ("nu", self.nu),
            ("g0", self.g0),
            ("omega", self.omega),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::config(field, format!("must be positive, got {value}")));
            }
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::config("gamma", format!("must be non-negative, got {}", self.gamma)));
        }
        Ok(())
    }

    /// Effective gravity in the bath frame, g0·(1 − Γ·sin ωt).
    #[inline]
    pub fn gravity(&self, t: f64) -> f64 {
        self.g0 * (1.0 - self.gamma * (self.omega * t).sin())
    }

    /// A₀ω², cm/s².
    pub fn forcing_acceleration(&self) -> f64 {
        self.gamma * self.g0
    }

    /// Faraday (subharmonic) period, twice the drive period.
    pub fn faraday_period(&self) -> f64 {
        4.0 * PI / self.omega
    }

    pub fn capillary_coeff(&self) -> f64 {
        self.sigma / self.rho
    }

    /// Linear gravity-capillary angular frequency at wavenumber `k` over depth `h`.
    pub fn dispersion(&self, k: f64, h: f64) -> f64 {
        ((self.g0 * k + self.capillary_coeff() * k.powi(3)) * (k * h).tanh()).sqrt()
    }

    /// Wavenumber whose unforced frequency equals half the drive frequency,
    /// found by bisection on the dispersion relation.
    pub fn faraday_wavenumber(&self, h: f64) -> f64 {
        let target = 0.5 * self.omega;
        let (mut lo, mut hi) = (1e-6, 1e4);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.dispersion(mid, h) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Discretization controls. The grid itself is derived per topography.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Cells per reference Faraday wavelength; at least 32.
    pub points_per_wavelength: f64,
    /// Reference Faraday wavelength used to size cells, cm.
    pub faraday_wavelength: f64,
    /// Sigma levels below the surface.
    pub nz: usize,
    /// Ratio between successive sigma-layer thicknesses (surface to bottom).
    pub stretch: f64,
    /// Time steps per Faraday period.
    pub steps_per_period: u32,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self::paper()
    }
}

impl GridConfig {
    pub fn paper() -> Self {
        Self {
            points_per_wavelength: 48.0,
            faraday_wavelength: 0.475,
            nz: 24,
            stretch: 1.15,
            steps_per_period: 512,
        }
    }

    /// Reduced resolution that still resolves the Faraday mode.
    pub fn desk() -> Self {
        Self {
            points_per_wavelength: 32.0,
            faraday_wavelength: 0.475,
            nz: 12,
            stretch: 1.3,
            steps_per_period: 128,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.points_per_wavelength >= 32.0) {
            return Err(Error::config(
                "points_per_wavelength",
                format!("need at least 32 cells per Faraday wavelength, got {}", self.points_per_wavelength),
            ));
        }
        if !(self.faraday_wavelength > 0.0) {
            return Err(Error::config("faraday_wavelength", "must be positive"));
        }
        if self.nz < 4 {
            return Err(Error::config("nz", format!("need at least 4 sigma levels, got {}", self.nz)));
        }
        if !(self.stretch >= 1.0 && self.stretch <= 2.0) {
            return Err(Error::config("stretch", format!("must lie in [1, 2], got {}", self.stretch)));
        }
        if self.steps_per_period < 8 {
            return Err(Error::config("steps_per_period", "need at least 8 steps per Faraday period"));
        }
        Ok(())
    }
}

/// Cell-centred horizontal grid with `nx` cells spanning the bath, plus the
/// sigma levels used by the Laplace solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub dx: f64,
    pub nz: usize,
    pub dt: f64,
    pub steps_per_period: u32,
    /// Sigma node positions s₀ = 0 (surface) … s_nz = 1 (bottom).
    pub sigma: Vec<f64>,
    /// Fluid depth at each cell centre.
    pub depth: Vec<f64>,
    /// A wall sits on the face between cells nx/2 − 1 and nx/2.
    pub center_wall: bool,
}

impl Grid {
    pub fn new(topo: &Topography, fluid: &FluidParams, config: &GridConfig) -> Result<Self> {
        config.validate()?;
        fluid.validate()?;
        let length = topo.total_length();
        let dx_max = config.faraday_wavelength / config.points_per_wavelength;
        let nx = aligned_cell_count(topo, dx_max);
        let dx = length / nx as f64;

        let r = config.stretch;
        let nz = config.nz;
        let sigma: Vec<f64> = if (r - 1.0).abs() < 1e-12 {
            (0..=nz).map(|k| k as f64 / nz as f64).collect()
        } else {
            let total = r.powi(nz as i32) - 1.0;
            (0..=nz).map(|k| (r.powi(k as i32) - 1.0) / total).collect()
        };

        let depth = (0..nx)
            .map(|i| topo.depth_at((i as f64 + 0.5) * dx))
            .collect::<Result<Vec<_>>>()?;

        Ok(Self {
            nx,
            dx,
            nz,
            dt: fluid.faraday_period() / config.steps_per_period as f64,
            steps_per_period: config.steps_per_period,
            sigma,
            depth,
            center_wall: topo.is_decoupled(),
        })
    }

    /// Offset of cell `i`'s centre from the bath midpoint. Exactly odd under
    /// `i -> nx - 1 - i`.
    #[inline]
    pub fn offset(&self, i: usize) -> f64 {
        (i as f64 - 0.5 * (self.nx - 1) as f64) * self.dx
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx
    }

    pub fn length(&self) -> f64 {
        self.nx as f64 * self.dx
    }

    pub fn half_length(&self) -> f64 {
        0.5 * self.length()
    }

    /// Left and right neighbour indices with reflecting walls.
    pub(crate) fn neighbours(&self) -> (Vec<usize>, Vec<usize>) {
        let n = self.nx;
        let half = n / 2;
        let left = (0..n)
            .map(|i| if i == 0 || (self.center_wall && i == half) { i } else { i - 1 })
            .collect();
        let right = (0..n)
            .map(|i| if i + 1 == n || (self.center_wall && i + 1 == half) { i } else { i + 1 })
            .collect();
        (left, right)
    }
}

/// Smallest even cell count with `dx <= dx_max`, preferring one whose faces
/// land on every segment boundary.
fn aligned_cell_count(topo: &Topography, dx_max: f64) -> usize {
    let length = topo.total_length();
    let mut base = (length / dx_max).ceil() as usize;
    base += base % 2;
    let aligned = |n: usize| {
        let dx = length / n as f64;
        topo.segments().iter().all(|s| {
            let f = s.start / dx;
            (f - f.round()).abs() < 1e-6
        })
    };
    (base..base * 4).step_by(2).find(|&n| aligned(n)).unwrap_or(base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_bath, LayoutConfig};

    #[test]
    fn faraday_wavenumber_matches_reference_wavelength() {
        let fluid = FluidParams::default();
        let k = fluid.faraday_wavenumber(0.5);
        let lambda = 2.0 * PI / k;
        assert!((lambda - 0.475).abs() / 0.475 < 0.02, "lambda_F = {lambda}");
        assert!((fluid.faraday_period() - 0.025).abs() < 1e-15);
    }

    #[test]
    fn grid_aligns_with_segments() {
        let fluid = FluidParams::default();
        let topo = build_bath(0.099, 0.099, &LayoutConfig::default()).unwrap();
        let desk = Grid::new(&topo, &fluid, &GridConfig::desk()).unwrap();
        assert_eq!(desk.nx, 420);
        assert!(desk.dx <= 0.475 / 32.0);
        assert!((desk.length() - 6.0).abs() < 1e-12);
        let paper = Grid::new(&topo, &fluid, &GridConfig::paper()).unwrap();
        assert_eq!(paper.nx, 630);
        assert_eq!(paper.sigma.len(), 25);
        assert_eq!(paper.sigma[0], 0.0);
        assert!((paper.sigma[24] - 1.0).abs() < 1e-15);
        assert!((desk.dt * desk.steps_per_period as f64 - 0.025).abs() < 1e-15);
    }

    #[test]
    fn offsets_are_odd() {
        let fluid = FluidParams::default();
        let topo = build_bath(0.099, 0.099, &LayoutConfig::default()).unwrap();
        let grid = Grid::new(&topo, &fluid, &GridConfig::desk()).unwrap();
        for i in 0..grid.nx {
            assert_eq!(grid.offset(i), -grid.offset(grid.nx - 1 - i));
            assert_eq!(grid.depth[i], grid.depth[grid.nx - 1 - i]);
        }
    }

    #[test]
    fn rejects_coarse_grid() {
        let cfg = GridConfig { points_per_wavelength: 20.0, ..GridConfig::desk() };
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("points_per_wavelength"));
    }
}
