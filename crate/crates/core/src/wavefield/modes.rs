//! Single-mode measurements on a flat bath: free-oscillation frequency,
//! viscous decay, the wavelength whose free oscillation is subharmonic to
//! the drive, and the wavelength of the damped response to a bouncing source.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{FluidParams, Rk4Buffers, WaveModel, WaveState};
use crate::droplet::{contact_force, DropletParams, PressureSource};
use crate::error::{Error, Result};

/// Wavenumber of wall mode `j`, jπ/L.
pub fn mode_wavenumber(model: &WaveModel, j: usize) -> f64 {
    j as f64 * PI / model.grid().length()
}

fn unforced(model: &WaveModel) -> Result<WaveModel> {
    model.with_fluid(FluidParams { gamma: 0.0, ..*model.fluid() })
}

fn mode_state(model: &WaveModel, j: usize, amplitude: f64) -> (WaveState, Vec<f64>) {
    let g = model.grid();
    let k = mode_wavenumber(model, j);
    let basis: Vec<f64> = (0..g.nx).map(|i| (k * g.x(i)).cos()).collect();
    let mut state = WaveState::rest(g.nx);
    for (e, b) in state.eta.iter_mut().zip(&basis) {
        *e = amplitude * b;
    }
    (state, basis)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeMeasurement {
    pub j: usize,
    /// 1/cm
    pub k: f64,
    /// Measured angular frequency, rad/s.
    pub omega: f64,
    /// Measured amplitude decay rate, 1/s.
    pub decay: f64,
}

/// Releases wall mode `j` from rest with Γ = 0 and measures its angular
/// frequency from `periods` oscillation periods of zero crossings, and its
/// amplitude decay rate from the energy over the same span.
pub fn measure_mode(model: &WaveModel, j: usize, periods: u32) -> Result<ModeMeasurement> {
    if j == 0 || j >= model.grid().nx / 2 {
        return Err(Error::config("mode", format!("mode index {j} outside 1..{}", model.grid().nx / 2)));
    }
    let model = unforced(model)?;
    let (mut state, basis) = mode_state(&model, j, 1e-4);
    let e0 = model.energy(&state);
    let dt = model.dt();
    let project = |s: &WaveState| s.eta.iter().zip(&basis).map(|(e, b)| e * b).sum::<f64>();

    // η̂(t) ∝ e^{−δt} cos ωt, so zero crossings sit at ωt = π/2 + nπ
    let wanted = 2 * periods as usize + 1;
    let mut crossings = Vec::with_capacity(wanted);
    let mut buf = Rk4Buffers::new(model.grid().nx);
    let mut scratch = model.scratch();
    let mut prev = project(&state);
    let k = mode_wavenumber(&model, j);
    let guess = model.fluid().dispersion(k, model.grid().depth[0]);
    let max_steps = ((4.0 * PI * (periods as f64 + 1.0) / guess) / dt).ceil() as u64 + 10;
    while crossings.len() < wanted {
        if state.step > max_steps {
            return Err(Error::Numerical(format!("mode {j} did not oscillate within {max_steps} steps")));
        }
        buf.advance(&model, &mut state, None, &mut scratch);
        let a = project(&state);
        if a == 0.0 || a.signum() != prev.signum() {
            let t1 = state.t;
            crossings.push(t1 - dt * a / (a - prev));
        }
        prev = a;
    }
    model.check(&state)?;
    let span = crossings[wanted - 1] - crossings[0];
    let omega = PI * (wanted - 1) as f64 / span;
    let e1 = model.energy(&state);
    let decay = -0.5 * (e1 / e0).ln() / state.t;
    Ok(ModeMeasurement { j, k, omega, decay })
}

/// Wavelength (cm) whose free oscillation frequency is half the drive
/// frequency, interpolated between measured neighbouring wall modes.
pub fn subharmonic_wavelength(model: &WaveModel) -> Result<f64> {
    let target = 0.5 * model.fluid().omega;
    let h = model.grid().depth.iter().cloned().fold(0.0, f64::max);
    let kf = model.fluid().faraday_wavenumber(h);
    let len = model.grid().length();
    let j0 = ((kf * len / PI).floor() as usize).max(1);
    let mut lower = measure_mode(model, j0, 10)?;
    // walk until the target frequency is bracketed
    let mut upper = measure_mode(model, j0 + 1, 10)?;
    for _ in 0..8 {
        if lower.omega > target {
            if lower.j == 1 {
                break;
            }
            upper = lower;
            lower = measure_mode(model, lower.j - 1, 10)?;
        } else if upper.omega < target {
            lower = upper;
            upper = measure_mode(model, upper.j + 1, 10)?;
        } else {
            break;
        }
    }
    if !(lower.omega <= target && target <= upper.omega) {
        return Err(Error::Numerical("could not bracket the subharmonic frequency".into()));
    }
    let f = (target - lower.omega) / (upper.omega - lower.omega);
    let k = lower.k + f * (upper.k - lower.k);
    Ok(2.0 * PI / k)
}

/// Wavelength (cm) of the steady damped wave radiated by a stationary
/// source bouncing at the Faraday period, from the phase gradient of the
/// response demodulated at half the drive frequency.
pub fn driven_response_wavelength(model: &WaveModel, droplet: &DropletParams, periods: u32) -> Result<f64> {
    if periods < 8 {
        return Err(Error::config("periods", "need at least 8 Faraday periods"));
    }
    let grid = model.grid();
    let n = grid.nx;
    let spp = grid.steps_per_period as u64;
    let settle = periods as u64 * 2 / 3;
    let half_omega = 0.5 * model.fluid().omega;
    let mut state = WaveState::rest(n);
    let (mut re, mut im) = (vec![0.0; n], vec![0.0; n]);
    for s in 0..periods as u64 * spp {
        let t = s as f64 * grid.dt;
        let force = contact_force(droplet, t + 0.5 * grid.dt);
        let src = PressureSource { xi: 0.0, force, halfwidth: droplet.pressure_halfwidth };
        model.step(&mut state, &[src])?;
        if s >= settle * spp {
            let (sn, cs) = (half_omega * state.t).sin_cos();
            for i in 0..n {
                re[i] += state.eta[i] * cs;
                im[i] += state.eta[i] * sn;
            }
        }
    }
    // least-squares slope of the unwrapped phase over 0.3..2 cm right of the source
    let mut pts = Vec::new();
    let mut prev: Option<f64> = None;
    for i in n / 2..n {
        let xi = grid.offset(i);
        let mut a = im[i].atan2(re[i]);
        if let Some(p) = prev {
            while a - p > PI {
                a -= 2.0 * PI;
            }
            while a - p < -PI {
                a += 2.0 * PI;
            }
        }
        prev = Some(a);
        if (0.3..=2.0).contains(&xi) {
            pts.push((xi, a));
        }
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(x, y), p| (x + p.0, y + p.1));
    let (sxx, sxy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0 * p.0, b + p.0 * p.1));
    let k = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    Ok(2.0 * PI / k.abs())
}
