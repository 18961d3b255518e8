//! Repeated coupled runs with randomised initial positions, the stopping
//! rule, and the Δλ / α / CHSH sweeps.
//!
//! Runs are numbered from 0 and seeded from `(master_seed, run_index)`.
//! Convergence is checked after a first block of `n_min` runs and then after
//! every `batch` runs, so where a cell stops depends only on the outcomes,
//! never on the worker count.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bellstats::{bound_check, chsh, correlation, BoundCheck, ChshResult, CorrelationEstimate, OutcomeCounts};
use crate::config::PhysicsConfig;
use crate::droplet::{DropletParams, DropletState};
use crate::error::{Error, Result};
use crate::geometry::{build_bath, BellSettings, Side, Topography};
use crate::simulation::{CoupledSystem, RunResult};
use crate::wavefield::WaveModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// A and B drawn independently from their own intervals.
    #[default]
    Independent,
    /// One draw for A; B is its exact mirror image.
    Mirrored,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceRule {
    /// Stop once std_error/|m̂| falls below this.
    pub rel_tol: f64,
    /// Or once std_error falls below this.
    pub abs_tol: f64,
    pub n_min: u64,
    /// Hard cap on attempted runs.
    pub n_max: u64,
    /// Runs between convergence checks after the first `n_min`.
    pub batch: u64,
    /// How the standard error behind both stopping branches is computed.
    pub estimator: ErrorEstimator,
}

impl Default for ConvergenceRule {
    fn default() -> Self {
        Self { rel_tol: 0.03, abs_tol: 0.03, n_min: 40, n_max: 2000, batch: 8, estimator: ErrorEstimator::Binomial }
    }
}

/// Groups used by the batch-means estimator.
pub const BATCH_MEANS_GROUPS: usize = 10;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorEstimator {
    /// √((1 − M̂²)/N) from the outcome counts.
    #[default]
    Binomial,
    /// Spread of the mean of X_A·X_B over contiguous groups of runs, in
    /// run-index order. Falls back to the binomial value below
    /// `2 * BATCH_MEANS_GROUPS` samples.
    BatchMeans,
}

impl ErrorEstimator {
    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorEstimator::Binomial => "binomial",
            ErrorEstimator::BatchMeans => "batch_means",
        }
    }

    /// Standard error of the mean of `products` (each ±1) under this estimator.
    pub fn std_error(&self, products: &[i8], binomial: &CorrelationEstimate) -> f64 {
        let g = BATCH_MEANS_GROUPS;
        if *self == ErrorEstimator::Binomial || products.len() < 2 * g {
            return binomial.std_error;
        }
        // the remainder runs join no group
        let size = products.len() / g;
        let means: Vec<f64> =
            products.chunks_exact(size).take(g).map(|c| c.iter().map(|&p| p as f64).sum::<f64>() / size as f64).collect();
        let mean = means.iter().sum::<f64>() / g as f64;
        let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (g - 1) as f64;
        (var / g as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    RelativeError,
    AbsoluteError,
    Unconverged,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::RelativeError => "relative_error",
            StopReason::AbsoluteError => "absolute_error",
            StopReason::Unconverged => "unconverged",
        }
    }
}

impl ConvergenceRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::config("rel_tol", format!("must lie in (0, 1), got {}", self.rel_tol)));
        }
        if !(self.abs_tol > 0.0) {
            return Err(Error::config("abs_tol", format!("must be positive, got {}", self.abs_tol)));
        }
        if self.n_min == 0 || self.n_min > self.n_max {
            return Err(Error::config("n_min", format!("need 1 <= n_min <= n_max, got {} and {}", self.n_min, self.n_max)));
        }
        if self.batch == 0 {
            return Err(Error::config("batch", "must be at least 1"));
        }
        Ok(())
    }

    /// Stopping branch satisfied by `est`, if any. The relative branch is
    /// checked first.
    pub fn check(&self, est: &CorrelationEstimate) -> Option<StopReason> {
        if est.n_samples < self.n_min {
            return None;
        }
        if est.std_error < self.rel_tol * est.m_hat.abs() {
            Some(StopReason::RelativeError)
        } else if est.std_error < self.abs_tol {
            Some(StopReason::AbsoluteError)
        } else {
            None
        }
    }
}

/// One Monte Carlo cell: fixed settings, Δλ and measurement time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub physics: PhysicsConfig,
    pub master_seed: u64,
    /// Width of the initial-position interval, cm.
    pub delta_lambda: f64,
    /// Measurement time in Faraday periods.
    pub t_m: u32,
    pub alpha: f64,
    pub beta: f64,
    pub mode: SamplingMode,
    pub convergence: ConvergenceRule,
}

impl RunSpec {
    pub fn validate(&self) -> Result<()> {
        let l = self.physics.geometry.cavity_length;
        if !(self.delta_lambda >= 0.0 && self.delta_lambda <= l) {
            return Err(Error::config("delta_lambda", format!("{} cm is outside [0, {l}]", self.delta_lambda)));
        }
        if self.t_m == 0 {
            return Err(Error::config("t_m", "must be at least 1 Faraday period"));
        }
        self.convergence.validate()
    }

    /// SHA-256 of the serialised cell, used to key ledger records.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("spec serialises");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    fn with_cell(&self, alpha: f64, beta: f64, delta_lambda: f64, t_m: u32) -> Self {
        Self { alpha, beta, delta_lambda, t_m, ..*self }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-run seed from the master seed and run index.
pub fn derive_seed(master: u64, run_index: u64) -> u64 {
    splitmix64(master ^ splitmix64(run_index))
}

/// Fails if two run indices below `n` share a seed.
pub fn check_seed_collisions(master: u64, n: u64) -> Result<()> {
    let mut seen = HashSet::with_capacity(n as usize);
    for i in 0..n {
        if !seen.insert(derive_seed(master, i)) {
            return Err(Error::Numerical(format!("seed collision at run {i} for master seed {master}")));
        }
    }
    Ok(())
}

/// Initial droplet offsets from the bath midpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Initials {
    pub xi_a: f64,
    pub xi_b: f64,
}

impl Initials {
    pub fn x_a(&self, topo: &Topography) -> f64 {
        topo.midpoint() + self.xi_a
    }

    pub fn x_b(&self, topo: &Topography) -> f64 {
        topo.midpoint() + self.xi_b
    }
}

/// Draws starting positions from intervals of width `delta_lambda` centred
/// on the two outer cavities.
pub fn sample_initials(mode: SamplingMode, delta_lambda: f64, topo: &Topography, rng: &mut impl Rng) -> Result<Initials> {
    let cavity = topo.outer_cavity(Side::A);
    if !(delta_lambda >= 0.0 && delta_lambda <= cavity.length) {
        return Err(Error::config(
            "delta_lambda",
            format!("interval of {delta_lambda} cm does not fit the {} cm outer cavity", cavity.length),
        ));
    }
    let centre = cavity.center() - topo.midpoint();
    let xi_a = centre + (rng.gen::<f64>() - 0.5) * delta_lambda;
    let xi_b = match mode {
        SamplingMode::Independent => -(centre + (rng.gen::<f64>() - 0.5) * delta_lambda),
        SamplingMode::Mirrored => -xi_a,
    };
    Ok(Initials { xi_a, xi_b })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub x_a: i8,
    pub x_b: i8,
    pub tunnels_a: u32,
    pub tunnels_b: u32,
}

/// Source of outcomes for one cell.
pub trait CellRunner: Sync {
    /// `Err` carries the reason a run failed.
    fn run(&self, run_index: u64, seed: u64) -> std::result::Result<RunOutcome, String>;
}

/// Produces a runner per cell; lets the statistics machinery run on either
/// the coupled solver or a prescribed distribution.
pub trait Dynamics: Sync {
    fn prepare<'a>(&'a self, spec: &RunSpec) -> Result<Box<dyn CellRunner + 'a>>;
}

/// Full wave + droplet simulation.
#[derive(Debug, Clone, Copy, Default)]
pub struct PhysicsDynamics;

/// A prepared bath for one cell.
pub struct PhysicsCell {
    pub system: CoupledSystem,
    pub spec: RunSpec,
    pub steps: u64,
}

impl PhysicsCell {
    pub fn new(spec: &RunSpec) -> Result<Self> {
        spec.validate()?;
        let p = &spec.physics;
        p.validate()?;
        let topo = build_bath(spec.alpha, spec.beta, &p.geometry)?;
        let model = WaveModel::new(&topo, &p.fluid, &p.grid)?;
        model.check_stability()?;
        let droplet = DropletParams::new(&p.droplet, &p.fluid)?;
        let system = CoupledSystem::new(topo, model, droplet);
        let steps = system.steps_for(spec.t_m as f64);
        Ok(Self { system, spec: *spec, steps })
    }

    pub fn initials(&self, seed: u64) -> Result<Initials> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sample_initials(self.spec.mode, self.spec.delta_lambda, &self.system.topo, &mut rng)
    }

    pub fn droplets(&self, init: &Initials) -> Result<(DropletState, DropletState)> {
        let topo = &self.system.topo;
        Ok((DropletState::at_offset(init.xi_a, topo)?, DropletState::at_offset(init.xi_b, topo)?))
    }

    /// Runs from the seeded initials to the measurement time.
    pub fn simulate(
        &self,
        seed: u64,
        observer: impl FnMut(&crate::simulation::StepView) -> Result<()>,
    ) -> Result<(Initials, RunResult)> {
        let init = self.initials(seed)?;
        let (a, b) = self.droplets(&init)?;
        let result = self.system.run(a, b, self.steps, observer)?;
        Ok((init, result))
    }
}

impl CellRunner for PhysicsCell {
    fn run(&self, _run_index: u64, seed: u64) -> std::result::Result<RunOutcome, String> {
        let (_, r) = self.simulate(seed, |_| Ok(())).map_err(|e| e.to_string())?;
        Ok(RunOutcome {
            x_a: r.x_a,
            x_b: r.x_b,
            tunnels_a: r.tunnels_a.len() as u32,
            tunnels_b: r.tunnels_b.len() as u32,
        })
    }
}

impl Dynamics for PhysicsDynamics {
    fn prepare<'a>(&'a self, spec: &RunSpec) -> Result<Box<dyn CellRunner + 'a>> {
        Ok(Box::new(PhysicsCell::new(spec)?))
    }
}

/// Outcomes drawn from prescribed joint probabilities
/// `[p(+,+), p(+,−), p(−,+), p(−,−)]` as a function of the settings (α, β).
pub struct StubDynamics<F> {
    probs: F,
}

impl<F: Fn(f64, f64) -> [f64; 4] + Sync> StubDynamics<F> {
    pub fn new(probs: F) -> Self {
        Self { probs }
    }
}

impl StubDynamics<fn(f64, f64) -> [f64; 4]> {
    /// Singlet statistics with α and β read as analyser angles.
    pub fn singlet() -> Self {
        fn probs(a: f64, b: f64) -> [f64; 4] {
            correlated(-(a - b).cos())
        }
        Self { probs }
    }
}

/// Symmetric joint distribution with correlation `m`.
pub fn correlated(m: f64) -> [f64; 4] {
    let same = 0.25 * (1.0 + m);
    let diff = 0.25 * (1.0 - m);
    [same, diff, diff, same]
}

struct StubCell {
    cumulative: [f64; 4],
}

impl CellRunner for StubCell {
    fn run(&self, _run_index: u64, seed: u64) -> std::result::Result<RunOutcome, String> {
        let u: f64 = ChaCha8Rng::seed_from_u64(seed).gen();
        let k = self.cumulative.iter().position(|&c| u < c).unwrap_or(3);
        let (x_a, x_b) = [(1, 1), (1, -1), (-1, 1), (-1, -1)][k];
        Ok(RunOutcome { x_a, x_b, tunnels_a: 0, tunnels_b: 0 })
    }
}

impl<F: Fn(f64, f64) -> [f64; 4] + Sync> Dynamics for StubDynamics<F> {
    fn prepare<'a>(&'a self, spec: &RunSpec) -> Result<Box<dyn CellRunner + 'a>> {
        let p = (self.probs)(spec.alpha, spec.beta);
        let total: f64 = p.iter().sum();
        if p.iter().any(|v| !(*v >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::config("stub", format!("outcome probabilities {p:?} are not a distribution")));
        }
        let mut cumulative = [0.0; 4];
        let mut acc = 0.0;
        for (c, v) in cumulative.iter_mut().zip(p) {
            acc += v;
            *c = acc;
        }
        Ok(Box::new(StubCell { cumulative }))
    }
}

/// Runs work items on a fixed-size pool and returns results in index order.
pub struct Executor {
    workers: usize,
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl Executor {
    pub fn sequential() -> Self {
        Self {
            workers: 1,
            #[cfg(feature = "parallel")]
            pool: None,
        }
    }

    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::config("workers", "must be at least 1"));
        }
        if workers == 1 {
            return Ok(Self::sequential());
        }
        #[cfg(feature = "parallel")]
        {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::Numerical(format!("cannot start worker pool: {e}")))?;
            Ok(Self { workers, pool: Some(pool) })
        }
        #[cfg(not(feature = "parallel"))]
        Ok(Self::sequential())
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    fn map<T: Send>(&self, range: Range<u64>, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| range.into_par_iter().map(&f).collect());
        }
        range.map(f).collect()
    }
}

/// One completed (or failed) run as stored in the ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_index: u64,
    pub seed: u64,
    pub x_a: Option<i8>,
    pub x_b: Option<i8>,
    pub tunnels_a: u32,
    pub tunnels_b: u32,
    pub wall_time_s: f64,
    pub failure: Option<String>,
}

impl RunRecord {
    fn outcome(&self) -> Option<(i8, i8)> {
        Some((self.x_a?, self.x_b?))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LedgerLine {
    Config { config_hash: String, config: serde_json::Value },
    Run {
        spec_hash: String,
        #[serde(flatten)]
        record: RunRecord,
    },
}

/// Append-only JSONL run ledger. Completed runs found on disk are reused
/// instead of being recomputed.
#[derive(Default)]
pub struct Ledger {
    writer: Option<BufWriter<File>>,
    done: HashMap<String, HashMap<u64, RunRecord>>,
}

impl Ledger {
    /// A ledger that records nothing.
    pub fn disabled() -> Self {
        Self::default()
    }

    /// Opens `path`. With `resume` existing records are loaded and new ones
    /// appended; otherwise the file is truncated.
    pub fn open(path: &Path, resume: bool) -> Result<Self> {
        let mut done: HashMap<String, HashMap<u64, RunRecord>> = HashMap::new();
        if resume && path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (n, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<LedgerLine>(&line) {
                    Ok(LedgerLine::Run { spec_hash, record }) => {
                        done.entry(spec_hash).or_default().insert(record.run_index, record);
                    }
                    Ok(LedgerLine::Config { .. }) => {}
                    // a torn final line from an interrupted write is dropped
                    Err(e) if e.is_eof() => {}
                    Err(e) => return Err(Error::config("ledger", format!("line {}: {e}", n + 1))),
                }
            }
        }
        let file = std::fs::OpenOptions::new().create(true).append(resume).write(true).truncate(!resume).open(path)?;
        Ok(Self { writer: Some(BufWriter::new(file)), done })
    }

    pub fn write_config(&mut self, config_hash: &str, config: serde_json::Value) -> Result<()> {
        self.write(&LedgerLine::Config { config_hash: config_hash.to_string(), config })
    }

    fn lookup(&self, spec_hash: &str, run_index: u64) -> Option<&RunRecord> {
        self.done.get(spec_hash)?.get(&run_index)
    }

    /// Number of runs already on record.
    pub fn resumed_runs(&self) -> usize {
        self.done.values().map(|m| m.len()).sum()
    }

    fn append(&mut self, spec_hash: &str, record: &RunRecord) -> Result<()> {
        self.write(&LedgerLine::Run { spec_hash: spec_hash.to_string(), record: record.clone() })
    }

    fn write(&mut self, line: &LedgerLine) -> Result<()> {
        if let Some(w) = &mut self.writer {
            serde_json::to_writer(&mut *w, line)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        Ok(())
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    #[cfg(not(target_arch = "wasm32"))]
    {
        let start = std::time::Instant::now();
        let out = f();
        (out, start.elapsed().as_secs_f64())
    }
    #[cfg(target_arch = "wasm32")]
    (f(), 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEstimate {
    /// `None` when every run failed.
    pub correlation: Option<CorrelationEstimate>,
    pub counts: OutcomeCounts,
    pub stop: StopReason,
    pub runs: u64,
    pub failed: u64,
    /// Run index and reason of each failed run.
    pub failures: Vec<(u64, String)>,
    pub tunnel_events: u64,
    pub wall_time_s: f64,
    /// Estimator behind `correlation.std_error`.
    pub estimator: ErrorEstimator,
}

impl CellEstimate {
    pub fn converged(&self) -> bool {
        self.stop != StopReason::Unconverged
    }
}

/// Runs the cell until the convergence rule is met or `n_max` runs have
/// been attempted. Failed runs are counted, logged and excluded.
pub fn estimate_m(spec: &RunSpec, dynamics: &dyn Dynamics, exec: &Executor, ledger: &mut Ledger) -> Result<CellEstimate> {
    spec.validate()?;
    let rule = spec.convergence;
    check_seed_collisions(spec.master_seed, rule.n_max)?;
    let runner = dynamics.prepare(spec)?;
    let hash = spec.hash();
    let mut est = CellEstimate {
        correlation: None,
        counts: OutcomeCounts::default(),
        stop: StopReason::Unconverged,
        runs: 0,
        failed: 0,
        failures: Vec::new(),
        tunnel_events: 0,
        wall_time_s: 0.0,
        estimator: rule.estimator,
    };
    let mut products: Vec<i8> = Vec::new();
    let mut next = 0;
    while next < rule.n_max {
        let size = if next == 0 { rule.n_min } else { rule.batch };
        let end = (next + size).min(rule.n_max);
        let shared: &Ledger = ledger;
        let records = exec.map(next..end, |i| {
            if let Some(r) = shared.lookup(&hash, i) {
                return (r.clone(), false);
            }
            let seed = derive_seed(spec.master_seed, i);
            let (outcome, wall) = timed(|| runner.run(i, seed));
            let record = match outcome {
                Ok(o) => RunRecord {
                    run_index: i,
                    seed,
                    x_a: Some(o.x_a),
                    x_b: Some(o.x_b),
                    tunnels_a: o.tunnels_a,
                    tunnels_b: o.tunnels_b,
                    wall_time_s: wall,
                    failure: None,
                },
                Err(reason) => RunRecord {
                    run_index: i,
                    seed,
                    x_a: None,
                    x_b: None,
                    tunnels_a: 0,
                    tunnels_b: 0,
                    wall_time_s: wall,
                    failure: Some(reason),
                },
            };
            (record, true)
        });
        for (record, fresh) in records {
            if fresh {
                ledger.append(&hash, &record)?;
            }
            est.runs += 1;
            est.wall_time_s += record.wall_time_s;
            match record.outcome() {
                Some((a, b)) => {
                    est.counts.record(a, b);
                    products.push(a * b);
                    est.tunnel_events += (record.tunnels_a + record.tunnels_b) as u64;
                }
                None => {
                    est.failed += 1;
                    est.failures.push((record.run_index, record.failure.unwrap_or_default()));
                }
            }
        }
        next = end;
        if est.counts.total() > 0 {
            let mut c = correlation(&est.counts)?;
            c.std_error = rule.estimator.std_error(&products, &c);
            est.correlation = Some(c);
            if let Some(reason) = rule.check(&c) {
                est.stop = reason;
                break;
            }
        }
    }
    Ok(est)
}

/// Single run at `run_index` with the full solver.
pub fn run_once(spec: &RunSpec, run_index: u64) -> Result<RunRecord> {
    let cell = PhysicsCell::new(spec)?;
    let seed = derive_seed(spec.master_seed, run_index);
    let (outcome, wall) = timed(|| cell.simulate(seed, |_| Ok(())));
    match outcome {
        Ok((_, r)) => Ok(RunRecord {
            run_index,
            seed,
            x_a: Some(r.x_a),
            x_b: Some(r.x_b),
            tunnels_a: r.tunnels_a.len() as u32,
            tunnels_b: r.tunnels_b.len() as u32,
            wall_time_s: wall,
            failure: None,
        }),
        Err(e @ (Error::Divergence { .. } | Error::ModelViolation { .. })) => Ok(RunRecord {
            run_index,
            seed,
            x_a: None,
            x_b: None,
            tunnels_a: 0,
            tunnels_b: 0,
            wall_time_s: wall,
            failure: Some(e.to_string()),
        }),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Value of the swept variable, or a settings-pair label.
    pub key: String,
    pub t_m: u32,
    pub alpha: f64,
    pub beta: f64,
    /// cm
    pub delta_lambda: f64,
    pub estimate: CellEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    /// Header of the first column.
    pub variable: String,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// CSV with a header row. Wall times are left to the ledger so that
    /// reruns produce identical bytes.
    pub fn to_csv(&self, config_hash: &str, version: &str) -> String {
        let mut out = format!(
            "{},t_m,alpha,beta,delta_lambda,m_hat,std_error,estimator,n_samples,n_failed,tunnel_events,stop_reason,converged,config_hash,version\n",
            self.variable
        );
        for r in &self.rows {
            let e = &r.estimate;
            let (m, s, n) = match e.correlation {
                Some(c) => (c.m_hat.to_string(), c.std_error.to_string(), c.n_samples),
                None => ("NaN".into(), "NaN".into(), 0),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.key,
                r.t_m,
                r.alpha,
                r.beta,
                r.delta_lambda,
                m,
                s,
                e.estimator.as_str(),
                n,
                e.failed,
                e.tunnel_events,
                e.stop.as_str(),
                e.converged(),
                config_hash,
                version
            ));
        }
        out
    }

    pub fn unconverged(&self) -> usize {
        self.rows.iter().filter(|r| !r.estimate.converged()).count()
    }
}

/// M(α, β) over a grid of Δλ/L values for each measurement time.
pub fn sweep_dlambda(
    base: &RunSpec,
    dl_over_l: &[f64],
    t_m_list: &[u32],
    dynamics: &dyn Dynamics,
    exec: &Executor,
    ledger: &mut Ledger,
) -> Result<SweepTable> {
    if dl_over_l.is_empty() || t_m_list.is_empty() {
        return Err(Error::config("delta_lambda_over_l", "sweep grids must be non-empty"));
    }
    let l = base.physics.geometry.cavity_length;
    let mut rows = Vec::new();
    for &t_m in t_m_list {
        for &ratio in dl_over_l {
            let spec = base.with_cell(base.alpha, base.beta, ratio * l, t_m);
            let estimate = estimate_m(&spec, dynamics, exec, ledger)?;
            rows.push(SweepRow { key: ratio.to_string(), t_m, alpha: spec.alpha, beta: spec.beta, delta_lambda: spec.delta_lambda, estimate });
        }
    }
    Ok(SweepTable { variable: "delta_lambda_over_l".into(), rows })
}

/// M(α, α) over a grid of barrier depths.
pub fn sweep_alpha(
    base: &RunSpec,
    alpha_grid: &[f64],
    dynamics: &dyn Dynamics,
    exec: &Executor,
    ledger: &mut Ledger,
) -> Result<SweepTable> {
    if alpha_grid.is_empty() {
        return Err(Error::config("alpha_grid", "sweep grid must be non-empty"));
    }
    let mut rows = Vec::new();
    for &alpha in alpha_grid {
        let spec = base.with_cell(alpha, alpha, base.delta_lambda, base.t_m);
        let estimate = estimate_m(&spec, dynamics, exec, ledger)?;
        rows.push(SweepRow { key: alpha.to_string(), t_m: spec.t_m, alpha, beta: alpha, delta_lambda: spec.delta_lambda, estimate });
    }
    Ok(SweepTable { variable: "alpha".into(), rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshOutcome {
    pub result: ChshResult,
    pub check: BoundCheck,
    /// Rows in the order (a,b), (a′,b), (a,b′), (a′,b′).
    pub table: SweepTable,
    /// Set when a component did not converge, so s_error understates the
    /// uncertainty.
    pub note: Option<String>,
}

/// Estimates the four correlations of a CHSH experiment and combines them.
pub fn chsh_experiment(
    settings: &BellSettings,
    base: &RunSpec,
    dynamics: &dyn Dynamics,
    exec: &Executor,
    ledger: &mut Ledger,
) -> Result<ChshOutcome> {
    let labels = ["a_b", "a'_b", "a_b'", "a'_b'"];
    let mut rows = Vec::new();
    let mut comps = Vec::new();
    for (label, (alpha, beta)) in labels.iter().zip(settings.pairs()) {
        let spec = base.with_cell(alpha, beta, base.delta_lambda, base.t_m);
        let estimate = estimate_m(&spec, dynamics, exec, ledger)?;
        comps.push(estimate.correlation.ok_or(Error::EmptySample)?);
        rows.push(SweepRow { key: label.to_string(), t_m: spec.t_m, alpha, beta, delta_lambda: spec.delta_lambda, estimate });
    }
    let result = chsh(comps[0], comps[1], comps[2], comps[3]);
    let table = SweepTable { variable: "pair".into(), rows };
    let unconverged = table.unconverged();
    let note = (unconverged > 0).then(|| format!("{unconverged} of 4 correlations unconverged; s_error is a lower bound"));
    Ok(ChshOutcome { check: bound_check(&result), result, table, note })
}
