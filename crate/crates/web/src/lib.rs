//! Browser bindings: an animated coupled bath, exact CHSH of the contextual
//! singlet model, and sampled CHSH statistics.

use wasm_bindgen::prelude::*;
use walkerbell::bellstats::{bound_check, ChshResult};
use walkerbell::config::PhysicsConfig;
use walkerbell::droplet::measure;
use walkerbell::geometry::BellSettings;
use walkerbell::hvt::{chsh_of_model, independence_violation, ToyModel};
use walkerbell::montecarlo::{
    chsh_experiment, ConvergenceRule, Executor, Ledger, PhysicsCell, RunSpec, SamplingMode, StubDynamics,
};
use walkerbell::simulation::{CoupledState, Stepper};

fn js(e: walkerbell::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// One coupled run that the page advances frame by frame.
#[wasm_bindgen]
pub struct BathDemo {
    cell: PhysicsCell,
    state: CoupledState,
    stepper: Stepper,
}

impl BathDemo {
    pub fn create(alpha: f64, beta: f64, dl_over_l: f64, seed: u32, decoupled: bool) -> walkerbell::Result<Self> {
        let mut physics = PhysicsConfig::desk();
        physics.geometry.decoupled = decoupled;
        let spec = RunSpec {
            physics,
            master_seed: seed as u64,
            delta_lambda: dl_over_l * physics.geometry.cavity_length,
            t_m: 1,
            alpha,
            beta,
            mode: SamplingMode::Independent,
            convergence: ConvergenceRule::default(),
        };
        let cell = PhysicsCell::new(&spec)?;
        let init = cell.initials(seed as u64)?;
        let (a, b) = cell.droplets(&init)?;
        let state = cell.system.start(a, b);
        let stepper = cell.system.stepper();
        Ok(Self { cell, state, stepper })
    }

    pub fn step_n(&mut self, steps: u32) -> walkerbell::Result<()> {
        for _ in 0..steps {
            self.cell.system.step(&mut self.state, &mut self.stepper)?;
        }
        Ok(())
    }
}

#[wasm_bindgen]
impl BathDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(alpha: f64, beta: f64, dl_over_l: f64, seed: u32, decoupled: bool) -> Result<BathDemo, JsError> {
        Self::create(alpha, beta, dl_over_l, seed, decoupled).map_err(js)
    }

    /// Fails once a droplet leaves its side of the bath.
    pub fn advance(&mut self, steps: u32) -> Result<(), JsError> {
        self.step_n(steps).map_err(js)
    }

    /// Surface elevation at cell centres, cm.
    pub fn eta(&self) -> Vec<f64> {
        self.state.wave.eta.clone()
    }

    /// Fluid depth at cell centres, cm.
    pub fn depth(&self) -> Vec<f64> {
        self.cell.system.model.grid().depth.clone()
    }

    pub fn length(&self) -> f64 {
        self.cell.system.topo.total_length()
    }

    pub fn x_a(&self) -> f64 {
        self.state.a.x(&self.cell.system.topo)
    }

    pub fn x_b(&self) -> f64 {
        self.state.b.x(&self.cell.system.topo)
    }

    /// Elapsed time in Faraday periods.
    pub fn periods(&self) -> f64 {
        self.state.wave.t / self.cell.system.model.fluid().faraday_period()
    }

    /// Current (X_A, X_B), each ±1.
    pub fn outcome(&self) -> Result<Vec<i8>, JsError> {
        let topo = &self.cell.system.topo;
        Ok(vec![measure(&self.state.a, topo).map_err(js)?, measure(&self.state.b, topo).map_err(js)?])
    }
}

fn chsh_json(r: &ChshResult) -> serde_json::Value {
    let check = bound_check(r);
    serde_json::json!({
        "s_value": r.s_value,
        "s_error": r.s_error,
        "correlations": r.components.map(|c| c.m_hat),
        "verdict": check.verdict.as_str(),
        "margin": check.margin,
    })
}

/// Exact CHSH value of the contextual singlet model at four analyser angles.
pub fn singlet_chsh_value(a: f64, a_prime: f64, b: f64, b_prime: f64) -> walkerbell::Result<serde_json::Value> {
    let model = ToyModel::singlet(&[("a", a), ("a'", a_prime)], &[("b", b), ("b'", b_prime)])?;
    let r = chsh_of_model(&model, "a", "a'", "b", "b'")?;
    let mut doc = chsh_json(&r);
    doc["independence_violation"] = independence_violation(&model.lambda, None)?.into();
    Ok(doc)
}

/// CHSH estimated from `runs` sampled singlet outcomes per settings pair.
pub fn sampled_chsh_value(a: f64, a_prime: f64, b: f64, b_prime: f64, runs: u32, seed: u32) -> walkerbell::Result<serde_json::Value> {
    let runs = runs.max(1) as u64;
    let base = RunSpec {
        physics: PhysicsConfig::desk(),
        master_seed: seed as u64,
        delta_lambda: 0.0,
        t_m: 1,
        alpha: a,
        beta: b,
        mode: SamplingMode::Independent,
        convergence: ConvergenceRule { rel_tol: 1e-9, abs_tol: 1e-9, n_min: runs, n_max: runs, batch: 1, ..ConvergenceRule::default() },
    };
    let settings = BellSettings { a, a_prime, b, b_prime };
    let outcome =
        chsh_experiment(&settings, &base, &StubDynamics::singlet(), &Executor::sequential(), &mut Ledger::disabled())?;
    let mut doc = chsh_json(&outcome.result);
    doc["std_errors"] = outcome.result.components.map(|c| c.std_error).to_vec().into();
    doc["runs_per_pair"] = runs.into();
    Ok(doc)
}

#[wasm_bindgen]
pub fn singlet_chsh(a: f64, a_prime: f64, b: f64, b_prime: f64) -> Result<String, JsError> {
    singlet_chsh_value(a, a_prime, b, b_prime).map(|v| v.to_string()).map_err(js)
}

#[wasm_bindgen]
pub fn sampled_chsh(a: f64, a_prime: f64, b: f64, b_prime: f64, runs: u32, seed: u32) -> Result<String, JsError> {
    sampled_chsh_value(a, a_prime, b, b_prime, runs, seed).map(|v| v.to_string()).map_err(js)
}
