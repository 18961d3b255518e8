//! Two droplets on one bath. Each step both droplets read the slope of the
//! pre-step field, advance A then B, and the field advances with both
//! pressure sources frozen at their pre-step positions. Contact forces are
//! sampled at the step midpoint.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::droplet::{
    contact_force, emit_pressure, measure, trajectory_step, DropletParams, DropletState, TunnelDetector, TunnelEvent,
};
use crate::error::Result;
use crate::geometry::Topography;
use crate::wavefield::{Rk4Buffers, WaveModel, WaveState};

/// Bath, droplet physics and time base for coupled runs.
#[derive(Debug, Clone)]
pub struct CoupledSystem {
    pub topo: Topography,
    pub model: WaveModel,
    pub droplet: DropletParams,
}

/// Read-only view passed to observers after every step.
pub struct StepView<'a> {
    pub step: u64,
    pub t: f64,
    pub wave: &'a WaveState,
    pub a: &'a DropletState,
    pub b: &'a DropletState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub x_a: i8,
    pub x_b: i8,
    pub final_a: DropletState,
    pub final_b: DropletState,
    pub tunnels_a: Vec<TunnelEvent>,
    pub tunnels_b: Vec<TunnelEvent>,
    pub steps: u64,
    /// s
    pub t_final: f64,
}

/// Live state of one coupled run.
#[derive(Debug, Clone)]
pub struct CoupledState {
    pub wave: WaveState,
    pub a: DropletState,
    pub b: DropletState,
}

/// Reusable per-run buffers.
pub struct Stepper {
    rk: Rk4Buffers,
    scratch: crate::wavefield::RhsScratch,
    pressure: Vec<f64>,
}

impl CoupledSystem {
    pub fn new(topo: Topography, model: WaveModel, droplet: DropletParams) -> Self {
        Self { topo, model, droplet }
    }

    pub fn stepper(&self) -> Stepper {
        let n = self.model.grid().nx;
        Stepper { rk: Rk4Buffers::new(n), scratch: self.model.scratch(), pressure: vec![0.0; n] }
    }

    pub fn start(&self, a: DropletState, b: DropletState) -> CoupledState {
        CoupledState { wave: WaveState::rest(self.model.grid().nx), a, b }
    }

    /// Steps needed to cover `periods` Faraday periods.
    pub fn steps_for(&self, periods: f64) -> u64 {
        (periods * self.model.grid().steps_per_period as f64).round() as u64
    }

    /// Advances the coupled state by one time step.
    pub fn step(&self, state: &mut CoupledState, stepper: &mut Stepper) -> Result<()> {
        let dt = self.model.dt();
        let t = state.wave.step as f64 * dt;
        let force = contact_force(&self.droplet, t + 0.5 * dt);
        let eta = &state.wave.eta;
        let slope_a = self.model.slope_at_offset(eta, state.a.xi);
        let slope_b = self.model.slope_at_offset(eta, state.b.xi);

        let pressure = if force > 0.0 {
            stepper.pressure.fill(0.0);
            emit_pressure(&state.a, force, &self.droplet).deposit(self.model.grid(), &mut stepper.pressure);
            emit_pressure(&state.b, force, &self.droplet).deposit(self.model.grid(), &mut stepper.pressure);
            Some(stepper.pressure.as_slice())
        } else {
            None
        };

        state.a = trajectory_step(&state.a, slope_a, force, &self.droplet, dt, &self.topo, t)?;
        state.b = trajectory_step(&state.b, slope_b, force, &self.droplet, dt, &self.topo, t)?;
        stepper.rk.advance(&self.model, &mut state.wave, pressure, &mut stepper.scratch);
        self.model.check(&state.wave)
    }

    /// Runs `steps` steps from rest, then measures both droplets.
    pub fn run(
        &self,
        a: DropletState,
        b: DropletState,
        steps: u64,
        mut observer: impl FnMut(&StepView) -> Result<()>,
    ) -> Result<RunResult> {
        let mut state = self.start(a, b);
        let mut stepper = self.stepper();
        let mut det_a = TunnelDetector::new();
        let mut det_b = TunnelDetector::new();
        det_a.observe(0.0, state.a.last_cavity);
        det_b.observe(0.0, state.b.last_cavity);
        for _ in 0..steps {
            self.step(&mut state, &mut stepper)?;
            let t = state.wave.t;
            det_a.observe(t, self.topo.classify_offset(state.a.xi)?);
            det_b.observe(t, self.topo.classify_offset(state.b.xi)?);
            observer(&StepView { step: state.wave.step, t, wave: &state.wave, a: &state.a, b: &state.b })?;
        }
        Ok(RunResult {
            x_a: measure(&state.a, &self.topo)?,
            x_b: measure(&state.b, &self.topo)?,
            final_a: state.a,
            final_b: state.b,
            tunnels_a: det_a.into_events(),
            tunnels_b: det_b.into_events(),
            steps,
            t_final: state.wave.t,
        })
    }
}

/// Observer that writes `t,x_a,v_a,x_b,v_b` every `every` steps.
pub fn trajectory_csv<'w, W: Write>(
    out: &'w mut W,
    topo: &'w Topography,
    every: u64,
) -> Result<impl FnMut(&StepView) -> Result<()> + 'w> {
    writeln!(out, "t,x_a,v_a,x_b,v_b")?;
    let every = every.max(1);
    Ok(move |view: &StepView| {
        if view.step % every == 0 {
            writeln!(
                out,
                "{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
                view.t,
                view.a.x(topo),
                view.a.v,
                view.b.x(topo),
                view.b.v
            )?;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::droplet::DropletConfig;
    use crate::geometry::{build_bath, LayoutConfig, Side};
    use crate::wavefield::{FluidParams, GridConfig};

    fn system(alpha: f64, beta: f64) -> CoupledSystem {
        let topo = build_bath(alpha, beta, &LayoutConfig::default()).unwrap();
        let fluid = FluidParams::default();
        let model = WaveModel::new(&topo, &fluid, &GridConfig::desk()).unwrap();
        let droplet = DropletParams::new(&DropletConfig::default(), &fluid).unwrap();
        CoupledSystem::new(topo, model, droplet)
    }

    #[test]
    fn mirrored_run_stays_mirrored() {
        let sys = system(0.099, 0.099);
        let a = DropletState { v: 0.3, ..DropletState::at(0.55, &sys.topo).unwrap() };
        let b = a.mirrored();
        assert_eq!(b.side, Side::B);
        let mut state = sys.start(a, b);
        let mut stepper = sys.stepper();
        for _ in 0..3 * 128 {
            sys.step(&mut state, &mut stepper).unwrap();
            assert_eq!(state.b, state.a.mirrored());
        }
        assert!(state.wave.is_mirror_symmetric());
        assert!(state.wave.max_abs_eta() > 0.0);
    }

    #[test]
    fn trajectory_csv_rows() {
        let sys = system(0.099, 0.08);
        let a = DropletState::at(0.5, &sys.topo).unwrap();
        let b = DropletState::at(5.5, &sys.topo).unwrap();
        let mut buf = Vec::new();
        {
            let obs = trajectory_csv(&mut buf, &sys.topo, 16).unwrap();
            sys.run(a, b, 64, obs).unwrap();
        }
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("t,x_a,v_a,x_b,v_b\n"));
    }
}
