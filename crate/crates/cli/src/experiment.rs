use std::fs::File;
use std::io::{BufWriter, Write};

use serde_json::json;
use walkerbell::calibration::{calibrate as run_calibration, Check, Status};
use walkerbell::config::RunConfig;
use walkerbell::montecarlo::{
    chsh_experiment, derive_seed, sweep_alpha as run_sweep_alpha, sweep_dlambda as run_sweep_dlambda, Executor,
    Ledger, PhysicsCell, PhysicsDynamics, RunSpec, SweepTable,
};
use walkerbell::simulation::trajectory_csv;
use walkerbell::wavefield::dump::{DumpHeader, DumpWriter};
use walkerbell::{Error, Result, VERSION};

use crate::Context;

/// Settings pair (a, b), the first Δλ and the first measurement time.
fn base_spec(cfg: &RunConfig) -> RunSpec {
    let e = &cfg.experiment;
    let physics = cfg.physics();
    RunSpec {
        physics,
        master_seed: e.seed,
        delta_lambda: e.delta_lambda_over_l[0] * physics.geometry.cavity_length,
        t_m: cfg.t_m()[0],
        alpha: e.settings.a,
        beta: e.settings.b,
        mode: e.mode,
        convergence: e.convergence,
    }
}

fn open_ledger(ctx: &Context, name: &str) -> Result<Ledger> {
    let path = ctx.out_file(&format!("ledger_{name}.jsonl"));
    let mut ledger = Ledger::open(&path, ctx.resume)?;
    if ledger.resumed_runs() > 0 {
        eprintln!("resuming: {} runs on record in {}", ledger.resumed_runs(), path.display());
    }
    ledger.write_config(&ctx.config.hash(), serde_json::to_value(ctx.config.resolved())?)?;
    Ok(ledger)
}

fn report_table(table: &SweepTable) {
    println!("{:>22} {:>6} {:>10} {:>10} {:>6} {:>6}  stop", table.variable, "t_m", "m_hat", "std_err", "n", "failed");
    for r in &table.rows {
        let e = &r.estimate;
        let (m, s, n) = e.correlation.map_or((f64::NAN, f64::NAN, 0), |c| (c.m_hat, c.std_error, c.n_samples));
        println!("{:>22} {:>6} {:>10.4} {:>10.4} {:>6} {:>6}  {}", r.key, r.t_m, m, s, n, e.failed, e.stop.as_str());
        for (i, reason) in e.failures.iter().take(3) {
            eprintln!("  run {i} failed: {reason}");
        }
    }
}

fn finish_table(ctx: &Context, table: &SweepTable, file: &str) -> Result<u8> {
    let path = ctx.out_file(file);
    std::fs::write(&path, table.to_csv(&ctx.config.hash(), VERSION))?;
    report_table(table);
    let unconverged = table.unconverged();
    if unconverged > 0 {
        eprintln!("warning: {unconverged} of {} cells did not converge", table.rows.len());
    }
    println!("wrote {}", path.display());
    Ok(0)
}

pub fn sweep_dlambda(ctx: &Context) -> Result<u8> {
    let cfg = &ctx.config;
    let exec = Executor::new(ctx.workers)?;
    let mut ledger = open_ledger(ctx, "sweep_dlambda")?;
    let table = run_sweep_dlambda(
        &base_spec(cfg),
        &cfg.experiment.delta_lambda_over_l,
        &cfg.t_m(),
        &PhysicsDynamics,
        &exec,
        &mut ledger,
    )?;
    finish_table(ctx, &table, "sweep_dlambda.csv")
}

pub fn sweep_alpha(ctx: &Context) -> Result<u8> {
    let cfg = &ctx.config;
    let exec = Executor::new(ctx.workers)?;
    let mut ledger = open_ledger(ctx, "sweep_alpha")?;
    let table = run_sweep_alpha(&base_spec(cfg), &cfg.experiment.alpha_grid, &PhysicsDynamics, &exec, &mut ledger)?;
    finish_table(ctx, &table, "sweep_alpha.csv")
}

pub fn chsh(ctx: &Context) -> Result<u8> {
    let cfg = &ctx.config;
    let exec = Executor::new(ctx.workers)?;
    let mut ledger = open_ledger(ctx, "chsh")?;
    let outcome = chsh_experiment(&cfg.experiment.settings, &base_spec(cfg), &PhysicsDynamics, &exec, &mut ledger)?;
    finish_table(ctx, &outcome.table, "chsh.csv")?;
    let hash = cfg.hash();
    let note = outcome.note.clone().unwrap_or_default();
    let summary = format!(
        "s_value,s_error,verdict,margin,unconverged,note,config_hash,version\n{},{},{},{},{},{},{},{}\n",
        outcome.result.s_value,
        outcome.result.s_error,
        outcome.check.verdict.as_str(),
        outcome.check.margin,
        outcome.table.unconverged(),
        note,
        hash,
        VERSION
    );
    let path = ctx.out_file("chsh_summary.csv");
    std::fs::write(&path, summary)?;
    println!(
        "S = {:.4} ± {:.4}  |S| - 2 = {:.4}  verdict: {}",
        outcome.result.s_value,
        outcome.result.s_error,
        outcome.check.margin,
        outcome.check.verdict.as_str()
    );
    if !note.is_empty() {
        eprintln!("warning: {note}");
    }
    println!("wrote {}", path.display());
    Ok(0)
}

pub fn run(ctx: &Context, index: u64) -> Result<u8> {
    let cfg = &ctx.config;
    let spec = base_spec(cfg);
    let cell = PhysicsCell::new(&spec)?;
    let seed = derive_seed(spec.master_seed, index);
    let hash = cfg.hash();
    let topo = &cell.system.topo;

    let mut traj = BufWriter::new(File::create(ctx.out_file("trajectory.csv"))?);
    writeln!(traj, "# config_hash={hash} version={VERSION} run_index={index} seed={seed}")?;
    let mut write_row = trajectory_csv(&mut traj, topo, cfg.output.trajectory_every)?;

    let dump_every = cfg.output.field_dump_every;
    let mut dump = if dump_every > 0 {
        let grid = cell.system.model.grid();
        let header = DumpHeader { nx: grid.nx as u64, dx: grid.dx, dt: grid.dt, config_hash: cfg.hash_bytes() };
        Some(DumpWriter::new(BufWriter::new(File::create(ctx.out_file("field.bin"))?), header)?)
    } else {
        None
    };

    let result = cell.simulate(seed, |view| {
        write_row(view)?;
        if let Some(d) = &mut dump {
            if view.step % dump_every == 0 {
                d.write_frame(view.step, &view.wave.eta)?;
            }
        }
        Ok(())
    });
    drop(write_row);
    traj.flush()?;
    if let Some(d) = dump {
        d.finish()?;
    }

    let init = cell.initials(seed)?;
    let mut record = json!({
        "config_hash": hash,
        "version": VERSION,
        "run_index": index,
        "seed": seed,
        "alpha": spec.alpha,
        "beta": spec.beta,
        "t_m": spec.t_m,
        "x_a0": init.x_a(topo),
        "x_b0": init.x_b(topo),
    });
    let code = match &result {
        Ok((_, r)) => {
            record["x_a"] = json!(r.x_a);
            record["x_b"] = json!(r.x_b);
            record["tunnels_a"] = json!(r.tunnels_a);
            record["tunnels_b"] = json!(r.tunnels_b);
            record["t_final"] = json!(r.t_final);
            println!("X_A = {:+}, X_B = {:+}, tunnelling events {} / {}", r.x_a, r.x_b, r.tunnels_a.len(), r.tunnels_b.len());
            0
        }
        Err(e) => {
            record["failure"] = json!(e.to_string());
            1
        }
    };
    let path = ctx.out_file("run.json");
    std::fs::write(&path, serde_json::to_string_pretty(&record)? + "\n")?;
    println!("wrote {}", path.display());
    match result {
        Err(e @ (Error::Divergence { .. } | Error::ModelViolation { .. })) => {
            eprintln!("error: {e}");
            Ok(code)
        }
        Err(e) => Err(e),
        Ok(_) => Ok(code),
    }
}

fn status(s: Status) -> &'static str {
    match s {
        Status::Pass => "pass",
        Status::Warn => "WARN",
        Status::Fail => "FAIL",
    }
}

fn line(name: &str, c: &Check) {
    println!(
        "{name:<34} measured {:>10.5}  expected {:>10.5}  {:+7.2}%  {}",
        c.measured,
        c.expected,
        100.0 * c.rel_error,
        status(c.status)
    );
}

pub fn calibrate(ctx: &Context) -> Result<u8> {
    let cfg = &ctx.config;
    let report = run_calibration(&cfg.physics(), &cfg.experiment.settings, &cfg.calibration)?;
    for m in &report.dispersion {
        line(&format!("dispersion omega, k = {:.3} 1/cm", m.k), &m.check);
    }
    line(&format!("viscous decay, k = {:.3} 1/cm", report.decay.k), &report.decay.check);
    line("Faraday wavelength (cm)", &report.faraday_wavelength);
    println!("{:<34} {:>19.5}  (diagnostic)", "driven response wavelength (cm)", report.driven_wavelength);
    match (&report.threshold, &report.threshold_check) {
        (Some(t), Some(c)) => {
            line("Faraday threshold (g0)", c);
            println!("{:<34} [{:.4}, {:.4}] after {} evaluations", "  bracket", t.bracket_lo, t.bracket_hi, t.evaluations);
        }
        _ => println!("Faraday threshold skipped"),
    }
    let path = ctx.out_file("calibration.json");
    let doc = json!({ "config_hash": cfg.hash(), "version": VERSION, "passed": report.passed(), "report": report });
    std::fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n")?;
    println!("wrote {}", path.display());
    Ok(if report.passed() { 0 } else { 1 })
}
