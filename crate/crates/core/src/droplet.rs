//! Horizontal droplet dynamics
//!
//! ```text
//! m ẍ + c F(t) ẋ = −F(t) ∂η/∂x (x, t)
//! ```
//!
//! driven by a prescribed resonant bouncing: the droplet touches the bath
//! once per Faraday period and pushes on it with a half-sine force pulse.
//! Positions are stored as offsets from the bath midpoint so that a droplet
//! pair placed at `xi` and `-xi` evolves as an exact mirror image.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Region, Side, Topography};
use crate::wavefield::{FluidParams, Grid};

/// User-facing droplet settings; mass defaults to a sphere of bath fluid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DropletConfig {
    /// cm
    pub radius: f64,
    /// g; `None` means ρ·(4/3)πR³.
    #[serde(default)]
    pub mass: Option<f64>,
    /// Drag coefficient multiplying F(t)·ẋ, s/cm.
    pub drag_coeff: f64,
    /// Fraction of each Faraday period spent in contact.
    pub contact_fraction: f64,
    /// Phase of contact onset within the Faraday period, radians.
    pub impact_phase: f64,
    /// Half-width of the pressure footprint, cm.
    pub pressure_halfwidth: f64,
}

impl Default for DropletConfig {
    fn default() -> Self {
        Self {
            radius: 0.035,
            mass: None,
            drag_coeff: 0.0068,
            contact_fraction: 0.25,
            impact_phase: FRAC_PI_2,
            pressure_halfwidth: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropletParams {
    /// g
    pub mass: f64,
    /// s/cm
    pub drag_coeff: f64,
    /// cm
    pub radius: f64,
    pub contact_fraction: f64,
    /// radians
    pub impact_phase: f64,
    /// cm
    pub pressure_halfwidth: f64,
    /// Weight of the droplet, m·g0 (dyn).
    pub weight: f64,
    /// Bouncing period, equal to the Faraday period (s).
    pub period: f64,
}

impl DropletParams {
    pub fn new(config: &DropletConfig, fluid: &FluidParams) -> Result<Self> {
        let mass = config.mass.unwrap_or(fluid.rho * 4.0 / 3.0 * PI * config.radius.powi(3));
        let params = Self {
            mass,
            drag_coeff: config.drag_coeff,
            radius: config.radius,
            contact_fraction: config.contact_fraction,
            impact_phase: config.impact_phase,
            pressure_halfwidth: config.pressure_halfwidth,
            weight: mass * fluid.g0,
            period: fluid.faraday_period(),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        for (field, value) in [
            ("mass", self.mass),
            ("drag_coeff", self.drag_coeff),
            ("radius", self.radius),
            ("pressure_halfwidth", self.pressure_halfwidth),
            ("period", self.period),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::config(field, format!("must be positive, got {value}")));
            }
        }
        if !(self.contact_fraction > 0.0 && self.contact_fraction < 1.0) {
            return Err(Error::config("contact_fraction", format!("must lie in (0, 1), got {}", self.contact_fraction)));
        }
        if !self.impact_phase.is_finite() {
            return Err(Error::config("impact_phase", "must be finite"));
        }
        Ok(())
    }
}

/// Contact force F(t) in dyn: a half-sine pulse of duration
/// `contact_fraction·period` starting at the impact phase, zero otherwise.
/// Its mean over a period is exactly the droplet weight.
pub fn contact_force(params: &DropletParams, t: f64) -> f64 {
    let shift = params.impact_phase / (2.0 * PI);
    let tau = (t / params.period - shift).rem_euclid(1.0);
    if tau < params.contact_fraction {
        params.weight / params.contact_fraction * (PI / 2.0) * (PI * tau / params.contact_fraction).sin()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropletState {
    /// Offset from the bath midpoint, cm.
    pub xi: f64,
    /// cm/s
    pub v: f64,
    pub side: Side,
    /// Last cavity the droplet was inside.
    pub last_cavity: Region,
}

impl DropletState {
    /// Droplet at rest at absolute position `x`.
    pub fn at(x: f64, topo: &Topography) -> Result<Self> {
        Self::at_offset(x - topo.midpoint(), topo)
    }

    pub fn at_offset(xi: f64, topo: &Topography) -> Result<Self> {
        let side = if xi < 0.0 { Side::A } else { Side::B };
        let region = topo.classify_offset(xi)?;
        if !region.is_cavity() {
            return Err(Error::ModelViolation {
                side: side.label(),
                x: topo.midpoint() + xi,
                t: 0.0,
                reason: format!("initial position must lie in a cavity, found {region:?}"),
            });
        }
        Ok(Self { xi, v: 0.0, side, last_cavity: region })
    }

    /// Absolute position, cm.
    pub fn x(&self, topo: &Topography) -> f64 {
        topo.midpoint() + self.xi
    }

    /// Mirror image: same distance from the midpoint on the other side.
    pub fn mirrored(&self) -> Self {
        Self { xi: -self.xi, v: -self.v, side: self.side.opposite(), last_cavity: self.last_cavity.mirrored() }
    }

    /// Reclassifies the position after a move, updating `last_cavity` and
    /// rejecting forbidden regions.
    pub(crate) fn update_region(&mut self, topo: &Topography, t: f64) -> Result<()> {
        let x = self.x(topo);
        let region = topo.classify_offset(self.xi).map_err(|_| Error::ModelViolation {
            side: self.side.label(),
            x,
            t,
            reason: "left the bath".into(),
        })?;
        let own_side = if self.xi < 0.0 { Side::A } else { Side::B };
        if region == Region::Central || own_side != self.side {
            return Err(Error::ModelViolation {
                side: self.side.label(),
                x,
                t,
                reason: "entered the central cavity".into(),
            });
        }
        if region.is_cavity() {
            self.last_cavity = region;
        }
        Ok(())
    }
}

/// Horizontal acceleration for slope `slope` and contact force `force`.
#[inline]
pub(crate) fn acceleration(params: &DropletParams, v: f64, slope: f64, force: f64) -> f64 {
    (-force * slope - params.drag_coeff * force * v) / params.mass
}

/// One RK4 step of the trajectory with `slope` and `force` held fixed.
pub fn trajectory_step(
    state: &DropletState,
    slope: f64,
    force: f64,
    params: &DropletParams,
    dt: f64,
    topo: &Topography,
    t: f64,
) -> Result<DropletState> {
    if !(slope.is_finite() && force.is_finite() && state.xi.is_finite() && state.v.is_finite()) {
        return Err(Error::Numerical("non-finite droplet input".into()));
    }
    let (x0, v0) = (state.xi, state.v);
    let a1 = acceleration(params, v0, slope, force);
    let v1 = v0 + 0.5 * dt * a1;
    let a2 = acceleration(params, v1, slope, force);
    let v2 = v0 + 0.5 * dt * a2;
    let a3 = acceleration(params, v2, slope, force);
    let v3 = v0 + dt * a3;
    let a4 = acceleration(params, v3, slope, force);
    let w = dt / 6.0;
    let mut next = *state;
    next.xi = x0 + w * ((v0 + 2.0 * v1) + (2.0 * v2 + v3));
    next.v = v0 + w * ((a1 + 2.0 * a2) + (2.0 * a3 + a4));
    // specular bounce off the end walls
    let wall = 0.5 * topo.total_length();
    if next.xi.abs() > wall {
        next.xi = next.xi.signum() * (2.0 * wall - next.xi.abs());
        next.v = -next.v;
    }
    next.update_region(topo, t + dt)?;
    Ok(next)
}

/// Pressure footprint of one droplet: a raised cosine of half-width `halfwidth`
/// whose integral is `force`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressureSource {
    /// Offset of the centre from the bath midpoint, cm.
    pub xi: f64,
    /// dyn
    pub force: f64,
    /// cm
    pub halfwidth: f64,
}

impl PressureSource {
    /// Pressure at offset `xi`.
    #[inline]
    pub fn value_at(&self, xi: f64) -> f64 {
        let d = (xi - self.xi).abs();
        if d < self.halfwidth {
            self.force / self.halfwidth * 0.5 * (1.0 + (PI * d / self.halfwidth).cos())
        } else {
            0.0
        }
    }

    /// Adds this source's pressure at each cell centre of `grid` to `out`.
    pub fn deposit(&self, grid: &Grid, out: &mut [f64]) {
        if self.force == 0.0 {
            return;
        }
        let n = grid.nx;
        let centre = self.xi / grid.dx + 0.5 * (n - 1) as f64;
        let reach = self.halfwidth / grid.dx + 1.0;
        let lo = (centre - reach).floor().max(0.0) as usize;
        let hi = ((centre + reach).ceil().max(0.0) as usize).min(n - 1);
        for (i, slot) in out.iter_mut().enumerate().take(hi + 1).skip(lo) {
            *slot += self.value_at(grid.offset(i));
        }
    }
}

pub fn emit_pressure(state: &DropletState, force: f64, params: &DropletParams) -> PressureSource {
    PressureSource { xi: state.xi, force, halfwidth: params.pressure_halfwidth }
}

/// Binary outcome: −1 in the inner cavity, +1 in the outer one. Over a
/// barrier the last cavity visited decides.
pub fn measure(state: &DropletState, topo: &Topography) -> Result<i8> {
    let region = topo.classify_offset(state.xi)?;
    let decided = match region {
        Region::Central => {
            return Err(Error::ModelViolation {
                side: state.side.label(),
                x: state.x(topo),
                t: f64::NAN,
                reason: "in the central cavity at measurement".into(),
            })
        }
        Region::Barrier => state.last_cavity,
        cavity => cavity,
    };
    Ok(match decided {
        Region::InnerA | Region::InnerB => -1,
        _ => 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TunnelDirection {
    InnerToOuter,
    OuterToInner,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TunnelEvent {
    /// Time the droplet arrived in the new cavity, s.
    pub t: f64,
    pub direction: TunnelDirection,
}

/// Streaming inner/outer transition detector.
#[derive(Debug, Clone, Default)]
pub struct TunnelDetector {
    cavity: Option<Region>,
    events: Vec<TunnelEvent>,
}

impl TunnelDetector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, t: f64, region: Region) {
        if !region.is_cavity() {
            return;
        }
        match self.cavity {
            Some(prev) if prev != region => {
                let direction = match region {
                    Region::OuterA | Region::OuterB => TunnelDirection::InnerToOuter,
                    _ => TunnelDirection::OuterToInner,
                };
                self.events.push(TunnelEvent { t, direction });
                self.cavity = Some(region);
            }
            Some(_) => {}
            None => self.cavity = Some(region),
        }
    }

    pub fn events(&self) -> &[TunnelEvent] {
        &self.events
    }

    pub fn into_events(self) -> Vec<TunnelEvent> {
        self.events
    }
}

/// Inner/outer transitions along a sampled trajectory. Excursions onto a
/// barrier that return to the same cavity are not events.
pub fn detect_tunneling(trajectory: &[(f64, DropletState)], topo: &Topography) -> Result<Vec<TunnelEvent>> {
    let mut detector = TunnelDetector::new();
    for (t, state) in trajectory {
        detector.observe(*t, topo.classify_offset(state.xi)?);
    }
    Ok(detector.into_events())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_bath, LayoutConfig};
    use crate::wavefield::GridConfig;

    fn setup() -> (Topography, DropletParams) {
        let topo = build_bath(0.099, 0.099, &LayoutConfig::default()).unwrap();
        let params = DropletParams::new(&DropletConfig::default(), &FluidParams::default()).unwrap();
        (topo, params)
    }

    #[test]
    fn default_mass() {
        let (_, p) = setup();
        assert!((p.mass - 1.706e-4).abs() < 0.01e-4, "{}", p.mass);
    }

    #[test]
    fn contact_force_is_zero_between_contacts() {
        let (_, p) = setup();
        let p = DropletParams { impact_phase: 0.0, ..p };
        for frac in [0.26, 0.5, 0.9, 0.999] {
            assert_eq!(contact_force(&p, frac * p.period), 0.0);
            assert_eq!(contact_force(&p, (3.0 + frac) * p.period), 0.0);
        }
        assert!(contact_force(&p, 0.125 * p.period) > 0.0);
    }

    #[test]
    fn contact_force_mean_is_weight() {
        // midpoint quadrature over one period
        let (_, p) = setup();
        let n = 100_000;
        let mean: f64 = (0..n).map(|i| contact_force(&p, (i as f64 + 0.5) / n as f64 * p.period)).sum::<f64>() / n as f64;
        assert!((mean - p.weight).abs() / p.weight < 1e-3, "{mean} vs {}", p.weight);
        let shifted = DropletParams { impact_phase: 2.0, ..p };
        let mean: f64 =
            (0..n).map(|i| contact_force(&shifted, (i as f64 + 0.5) / n as f64 * p.period)).sum::<f64>() / n as f64;
        assert!((mean - p.weight).abs() / p.weight < 1e-3);
    }

    #[test]
    fn contact_force_nonnegative() {
        let (_, p) = setup();
        for i in 0..10_000 {
            assert!(contact_force(&p, i as f64 * 1.37e-5) >= 0.0);
        }
    }

    #[test]
    fn equilibrium_without_slope() {
        let (topo, p) = setup();
        let s = DropletState::at(0.5, &topo).unwrap();
        let next = trajectory_step(&s, 0.0, p.weight, &p, 1e-4, &topo, 0.0).unwrap();
        assert_eq!(next.xi, s.xi);
        assert_eq!(next.v, 0.0);
    }

    #[test]
    fn constant_forcing_matches_closed_form() {
        let (topo, p) = setup();
        let slope = 0.02;
        let force = 3.0 * p.weight;
        let dt = 0.025 / 128.0;
        let mut s = DropletState::at(0.5, &topo).unwrap();
        let steps = 200;
        for k in 0..steps {
            s = trajectory_step(&s, slope, force, &p, dt, &topo, k as f64 * dt).unwrap();
        }
        let t = steps as f64 * dt;
        let rate = p.drag_coeff * force / p.mass;
        let exact = -(slope / p.drag_coeff) * (1.0 - (-rate * t).exp());
        assert!((s.v - exact).abs() / exact.abs() < 5e-3, "{} vs {exact}", s.v);
    }

    #[test]
    fn mirrored_pair_stays_mirrored() {
        let (topo, p) = setup();
        let a = DropletState { v: 0.37, ..DropletState::at(0.61, &topo).unwrap() };
        let b = a.mirrored();
        let na = trajectory_step(&a, 0.013, 2.0 * p.weight, &p, 2e-4, &topo, 0.0).unwrap();
        let nb = trajectory_step(&b, -0.013, 2.0 * p.weight, &p, 2e-4, &topo, 0.0).unwrap();
        assert_eq!(na.xi.to_bits(), (-nb.xi).to_bits());
        assert_eq!(na.v.to_bits(), (-nb.v).to_bits());
        assert_eq!(nb, na.mirrored());
    }

    #[test]
    fn end_walls_reflect() {
        let (topo, p) = setup();
        let s = DropletState { xi: -2.999, v: -10.0, side: Side::A, last_cavity: Region::OuterA };
        let next = trajectory_step(&s, 0.0, 0.0, &p, 1e-3, &topo, 0.0).unwrap();
        assert!((next.xi - (-2.991)).abs() < 1e-12, "{}", next.xi);
        assert_eq!(next.v, 10.0);
        let mirrored = trajectory_step(&s.mirrored(), 0.0, 0.0, &p, 1e-3, &topo, 0.0).unwrap();
        assert_eq!(mirrored, next.mirrored());
    }

    #[test]
    fn entering_central_cavity_is_a_violation() {
        let (topo, p) = setup();
        let s = DropletState { xi: -0.21, v: 100.0, side: Side::A, last_cavity: Region::InnerA };
        let err = trajectory_step(&s, 0.0, 0.0, &p, 1e-3, &topo, 0.0).unwrap_err();
        assert!(matches!(err, Error::ModelViolation { side: 'A', .. }), "{err}");
    }

    #[test]
    fn pressure_integrates_to_force() {
        let (topo, p) = setup();
        let fluid = FluidParams::default();
        let grid = Grid::new(&topo, &fluid, &GridConfig::desk()).unwrap();
        let state = DropletState::at(0.537, &topo).unwrap();
        let src = emit_pressure(&state, 1.5 * p.weight, &p);
        let mut field = vec![0.0; grid.nx];
        src.deposit(&grid, &mut field);
        let integral: f64 = field.iter().sum::<f64>() * grid.dx;
        assert!((integral - src.force).abs() / src.force < 5e-3, "{integral} vs {}", src.force);
        for i in 0..grid.nx {
            if (grid.offset(i) - src.xi).abs() > p.pressure_halfwidth {
                assert_eq!(field[i], 0.0);
            }
        }
        let zero = emit_pressure(&state, 0.0, &p);
        let mut field = vec![0.0; grid.nx];
        zero.deposit(&grid, &mut field);
        assert!(field.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn measurement_outcomes() {
        let (topo, _) = setup();
        assert_eq!(measure(&DropletState::at(1.9, &topo).unwrap(), &topo).unwrap(), -1);
        assert_eq!(measure(&DropletState::at(5.4, &topo).unwrap(), &topo).unwrap(), 1);
        let over_barrier = DropletState { xi: 1.2 - 3.0, v: 0.0, side: Side::A, last_cavity: Region::OuterA };
        assert_eq!(measure(&over_barrier, &topo).unwrap(), 1);
        let over_barrier = DropletState { last_cavity: Region::InnerA, ..over_barrier };
        assert_eq!(measure(&over_barrier, &topo).unwrap(), -1);
        let central = DropletState { xi: -0.1, v: 0.0, side: Side::A, last_cavity: Region::InnerA };
        assert!(matches!(measure(&central, &topo), Err(Error::ModelViolation { .. })));
        // mirrored states give the same outcome
        let s = DropletState::at(2.2, &topo).unwrap();
        assert_eq!(measure(&s, &topo).unwrap(), measure(&s.mirrored(), &topo).unwrap());
    }

    fn synthetic(xs: &[f64], topo: &Topography) -> Vec<(f64, DropletState)> {
        xs.iter()
            .enumerate()
            .map(|(k, &x)| {
                let xi = x - topo.midpoint();
                let s = DropletState { xi, v: 0.0, side: Side::A, last_cavity: Region::OuterA };
                (k as f64, s)
            })
            .collect()
    }

    #[test]
    fn tunneling_detection() {
        let (topo, _) = setup();
        let confined = synthetic(&[0.2, 0.4, 0.6, 0.8, 0.5], &topo);
        assert!(detect_tunneling(&confined, &topo).unwrap().is_empty());

        let crossing = synthetic(&[1.8, 1.5, 1.2, 1.05, 0.9, 0.7], &topo);
        let events = detect_tunneling(&crossing, &topo).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].direction, TunnelDirection::InnerToOuter);
        assert_eq!(events[0].t, 4.0);

        let aborted = synthetic(&[1.8, 1.5, 1.2, 1.3, 1.5, 1.8], &topo);
        assert!(detect_tunneling(&aborted, &topo).unwrap().is_empty());
    }
}
