use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use serde_json::json;
use walkerbell::hvt::{
    chsh_of_model, compose_lambda, independence_violation, predict_outcomes, ProbabilityTable, ToyModel,
};
use walkerbell::Result;

use crate::{config_error, ensure_dir};

#[derive(Subcommand)]
pub enum HvtOp {
    /// P(λ|a,b) = Σ P(λ|a,b,λ*) P(λ*|a,b); writes composed.json.
    Compose {
        /// Kernel P(λ|a,b,λ*) with conditions "a,b,λ*".
        #[arg(long)]
        kernel: PathBuf,
        /// P(λ*|a,b).
        #[arg(long)]
        star: PathBuf,
    },
    /// P(x,y|a,b) of a model; writes predicted.json.
    Predict {
        #[command(flatten)]
        model: ModelArg,
    },
    /// Largest total-variation distance of P(λ|a,b) from its settings average.
    Independence {
        #[arg(long)]
        table: PathBuf,
        /// Reference weights over the table's conditions; uniform by default.
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
    },
    /// Exact CHSH value of a model; writes hvt_chsh.json.
    Chsh {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, default_value = "0")]
        a: String,
        #[arg(long, default_value = "pi/2")]
        a_prime: String,
        #[arg(long, default_value = "pi/4")]
        b: String,
        #[arg(long, default_value = "-pi/4", allow_hyphen_values = true)]
        b_prime: String,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
pub struct ModelArg {
    /// Model JSON {a_settings, b_settings, lambda, response}.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Contextual singlet model on the angles 0, pi/2 (A) and pi/4, -pi/4 (B).
    #[arg(long)]
    builtin_singlet: bool,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| config_error(&path.display().to_string(), format!("cannot read: {e}")))
}

fn load_model(arg: &ModelArg) -> Result<ToyModel> {
    match &arg.model {
        Some(path) => ToyModel::from_json(&read(path)?),
        None => Ok(ToyModel::standard_singlet()),
    }
}

fn write_json(out: &Path, name: &str, value: serde_json::Value) -> Result<()> {
    ensure_dir(out)?;
    let path = out.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(&value)? + "\n")?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn run(op: &HvtOp, out: &Path) -> Result<u8> {
    match op {
        HvtOp::Compose { kernel, star } => {
            let kernel = ProbabilityTable::from_json(&read(kernel)?)?;
            let star = ProbabilityTable::from_json(&read(star)?)?;
            let composed = compose_lambda(&kernel, &star)?;
            println!("{}", composed.to_json());
            write_json(out, "composed.json", serde_json::to_value(&composed)?)?;
        }
        HvtOp::Predict { model } => {
            let predicted = predict_outcomes(&load_model(model)?)?;
            println!("{}", predicted.to_json());
            write_json(out, "predicted.json", serde_json::to_value(&predicted)?)?;
        }
        HvtOp::Independence { table, weights } => {
            let table = ProbabilityTable::from_json(&read(table)?)?;
            let v = independence_violation(&table, weights.as_deref())?;
            println!("independence violation: {v:?}");
            write_json(out, "independence.json", json!({ "independence_violation": v }))?;
        }
        HvtOp::Chsh { model, a, a_prime, b, b_prime } => {
            let model = load_model(model)?;
            let r = chsh_of_model(&model, a, a_prime, b, b_prime)?;
            let violation = independence_violation(&model.lambda, None)?;
            println!("S = {:.12}  |S| = {:.12}", r.s_value, r.s_value.abs());
            println!("independence violation: {violation:?}");
            let doc = json!({
                "settings": { "a": a, "a_prime": a_prime, "b": b, "b_prime": b_prime },
                "s_value": r.s_value,
                "abs_s": r.s_value.abs(),
                "correlations": r.components.map(|c| c.m_hat),
                "independence_violation": violation,
            });
            write_json(out, "hvt_chsh.json", doc)?;
        }
    }
    Ok(0)
}
