//! Finite probability tables for hidden-variable models: composition by
//! total probability, outcome prediction, measurement-dependence distance
//! and exact CHSH values.
//!
//! Conditions that combine several variables are labelled by joining the
//! parts with commas, e.g. `"a,b"` for a settings pair and `"a,b,l"` for a
//! pair plus a hidden-variable value.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use serde::{Deserialize, Serialize};

use crate::bellstats::{chsh, ChshResult, CorrelationEstimate};
use crate::error::{Error, Result};

/// Each conditional slice must sum to 1 within this.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Joint outcome labels in the order used by every response table.
pub const XY_OUTCOMES: [&str; 4] = ["++", "+-", "-+", "--"];
const XY_PRODUCT: [f64; 4] = [1.0, -1.0, -1.0, 1.0];

pub fn join(parts: &[&str]) -> String {
    parts.join(",")
}

/// P(outcome | condition) on finite alphabets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbabilityTable {
    pub conditions: Vec<String>,
    pub outcomes: Vec<String>,
    /// One row per condition, one column per outcome.
    pub probs: Vec<Vec<f64>>,
}

fn index_of(labels: &[String]) -> Result<HashMap<&str, usize>> {
    let mut map = HashMap::with_capacity(labels.len());
    for (i, l) in labels.iter().enumerate() {
        if map.insert(l.as_str(), i).is_some() {
            return Err(Error::Table(format!("duplicate label `{l}`")));
        }
    }
    Ok(map)
}

impl ProbabilityTable {
    pub fn new(conditions: Vec<String>, outcomes: Vec<String>, probs: Vec<Vec<f64>>) -> Result<Self> {
        let t = Self { conditions, outcomes, probs };
        t.validate()?;
        Ok(t)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(text)?;
        t.validate()?;
        Ok(t)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serialises")
    }

    pub fn validate(&self) -> Result<()> {
        if self.conditions.is_empty() || self.outcomes.is_empty() {
            return Err(Error::Table("empty alphabet".into()));
        }
        index_of(&self.conditions)?;
        index_of(&self.outcomes)?;
        if self.probs.len() != self.conditions.len() {
            return Err(Error::Table(format!(
                "{} rows for {} conditions",
                self.probs.len(),
                self.conditions.len()
            )));
        }
        for (c, row) in self.conditions.iter().zip(&self.probs) {
            if row.len() != self.outcomes.len() {
                return Err(Error::Table(format!("row `{c}` has {} entries for {} outcomes", row.len(), self.outcomes.len())));
            }
            if let Some(p) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::Table(format!("row `{c}` has probability {p} outside [0, 1]")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::Table(format!("row `{c}` sums to {total}")));
            }
        }
        Ok(())
    }

    pub fn row(&self, condition: &str) -> Result<&[f64]> {
        self.conditions
            .iter()
            .position(|c| c == condition)
            .map(|i| self.probs[i].as_slice())
            .ok_or_else(|| Error::Lookup(condition.to_string()))
    }

    pub fn prob(&self, condition: &str, outcome: &str) -> Result<f64> {
        let j = self.outcomes.iter().position(|o| o == outcome).ok_or_else(|| Error::Lookup(outcome.to_string()))?;
        Ok(self.row(condition)?[j])
    }
}

/// P(λ|c) = Σ_{λ*} P(λ|c,λ*) P(λ*|c), where the kernel's conditions are
/// `"c,λ*"` for every condition `c` of `p_star` and every `λ*`.
pub fn compose_lambda(kernel: &ProbabilityTable, p_star: &ProbabilityTable) -> Result<ProbabilityTable> {
    kernel.validate()?;
    p_star.validate()?;
    let rows = index_of(&kernel.conditions)?;
    let mut probs = Vec::with_capacity(p_star.conditions.len());
    for (c, weights) in p_star.conditions.iter().zip(&p_star.probs) {
        let mut out = vec![0.0; kernel.outcomes.len()];
        for (star, w) in p_star.outcomes.iter().zip(weights) {
            let label = join(&[c, star]);
            let i = *rows
                .get(label.as_str())
                .ok_or_else(|| Error::Composition(format!("kernel has no condition `{label}`")))?;
            for (o, k) in out.iter_mut().zip(&kernel.probs[i]) {
                *o += w * k;
            }
        }
        probs.push(out);
    }
    if kernel.conditions.len() != p_star.conditions.len() * p_star.outcomes.len() {
        return Err(Error::Composition(format!(
            "kernel has {} conditions, expected {}",
            kernel.conditions.len(),
            p_star.conditions.len() * p_star.outcomes.len()
        )));
    }
    let t = ProbabilityTable { conditions: p_star.conditions.clone(), outcomes: kernel.outcomes.clone(), probs };
    t.validate()?;
    Ok(t)
}

/// Largest total-variation distance between P(λ|c) and the reference
/// P(λ) = Σ_c w_c P(λ|c). `weights` defaults to uniform over conditions.
pub fn independence_violation(table: &ProbabilityTable, weights: Option<&[f64]>) -> Result<f64> {
    table.validate()?;
    let n = table.conditions.len();
    let uniform = vec![1.0 / n as f64; n];
    let w = weights.unwrap_or(&uniform);
    if w.len() != n || w.iter().any(|v| !(*v >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::Table(format!("reference weights must be a distribution over {n} conditions")));
    }
    let mut reference = vec![0.0; table.outcomes.len()];
    for (row, wc) in table.probs.iter().zip(w) {
        for (r, p) in reference.iter_mut().zip(row) {
            *r += wc * p;
        }
    }
    let tv = table
        .probs
        .iter()
        .map(|row| 0.5 * row.iter().zip(&reference).map(|(p, r)| (p - r).abs()).sum::<f64>())
        .fold(0.0, f64::max);
    Ok(tv.min(1.0))
}

/// Hidden-variable model with finite settings and λ alphabets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyModel {
    pub a_settings: Vec<String>,
    pub b_settings: Vec<String>,
    /// P(λ|a,b), conditions `"a,b"`.
    pub lambda: ProbabilityTable,
    /// P(x,y|a,b,λ), conditions `"a,b,λ"`, outcomes [`XY_OUTCOMES`].
    pub response: ProbabilityTable,
}

/// Angle labels of the standard CHSH configuration and their values.
pub fn standard_angles() -> ([(&'static str, f64); 2], [(&'static str, f64); 2]) {
    ([("0", 0.0), ("pi/2", FRAC_PI_2)], [("pi/4", FRAC_PI_4), ("-pi/4", -FRAC_PI_4)])
}

/// Singlet joint distribution (1 − xy cos θ)/4 in [`XY_OUTCOMES`] order.
pub fn singlet_probs(theta: f64) -> [f64; 4] {
    let c = theta.cos();
    XY_PRODUCT.map(|xy| 0.25 * (1.0 - xy * c))
}

impl ToyModel {
    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn pairs(&self) -> Vec<String> {
        self.a_settings.iter().flat_map(|a| self.b_settings.iter().map(move |b| join(&[a, b]))).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.lambda.validate()?;
        self.response.validate()?;
        if self.a_settings.is_empty() || self.b_settings.is_empty() {
            return Err(Error::Table("empty settings alphabet".into()));
        }
        let pairs = self.pairs();
        if self.lambda.conditions != pairs {
            return Err(Error::Table("lambda conditions must list every settings pair `a,b`, A-major".into()));
        }
        if self.response.outcomes != XY_OUTCOMES {
            return Err(Error::Table(format!("response outcomes must be {XY_OUTCOMES:?}")));
        }
        let expected: Vec<String> =
            pairs.iter().flat_map(|p| self.lambda.outcomes.iter().map(move |l| join(&[p, l]))).collect();
        if self.response.conditions != expected {
            return Err(Error::Table("response conditions must list every `a,b,λ`".into()));
        }
        Ok(())
    }

    /// Deterministic contextual model: λ is the outcome pair itself and is
    /// drawn from the singlet distribution of the chosen settings.
    pub fn singlet(a: &[(&str, f64)], b: &[(&str, f64)]) -> Result<Self> {
        let a_settings: Vec<String> = a.iter().map(|s| s.0.to_string()).collect();
        let b_settings: Vec<String> = b.iter().map(|s| s.0.to_string()).collect();
        let lambdas: Vec<String> = XY_OUTCOMES.iter().map(|s| s.to_string()).collect();
        let mut lambda = ProbabilityTable { conditions: Vec::new(), outcomes: lambdas.clone(), probs: Vec::new() };
        let mut response = ProbabilityTable { conditions: Vec::new(), outcomes: lambdas.clone(), probs: Vec::new() };
        for (la, ta) in a {
            for (lb, tb) in b {
                lambda.conditions.push(join(&[la, lb]));
                lambda.probs.push(singlet_probs(ta - tb).to_vec());
                for (i, l) in lambdas.iter().enumerate() {
                    response.conditions.push(join(&[la, lb, l]));
                    let mut row = vec![0.0; 4];
                    row[i] = 1.0;
                    response.probs.push(row);
                }
            }
        }
        let model = Self { a_settings, b_settings, lambda, response };
        model.validate()?;
        Ok(model)
    }

    pub fn standard_singlet() -> Self {
        let (a, b) = standard_angles();
        Self::singlet(&a, &b).expect("standard singlet model is valid")
    }

    /// Settings-independent model with local deterministic responses
    /// x = `x_of[a][λ]`, y = `y_of[b][λ]`.
    pub fn local_deterministic(
        a_settings: &[&str],
        b_settings: &[&str],
        p_lambda: &[f64],
        x_of: &[Vec<i8>],
        y_of: &[Vec<i8>],
    ) -> Result<Self> {
        let lambdas: Vec<String> = (0..p_lambda.len()).map(|i| format!("l{i}")).collect();
        let mut lambda = ProbabilityTable { conditions: Vec::new(), outcomes: lambdas.clone(), probs: Vec::new() };
        let mut response = ProbabilityTable {
            conditions: Vec::new(),
            outcomes: XY_OUTCOMES.iter().map(|s| s.to_string()).collect(),
            probs: Vec::new(),
        };
        for (ia, a) in a_settings.iter().enumerate() {
            for (ib, b) in b_settings.iter().enumerate() {
                lambda.conditions.push(join(&[a, b]));
                lambda.probs.push(p_lambda.to_vec());
                for (il, l) in lambdas.iter().enumerate() {
                    let (x, y) = (x_of[ia][il], y_of[ib][il]);
                    let k = match (x > 0, y > 0) {
                        (true, true) => 0,
                        (true, false) => 1,
                        (false, true) => 2,
                        (false, false) => 3,
                    };
                    let mut row = vec![0.0; 4];
                    row[k] = 1.0;
                    response.conditions.push(join(&[a, b, l]));
                    response.probs.push(row);
                }
            }
        }
        let model = Self {
            a_settings: a_settings.iter().map(|s| s.to_string()).collect(),
            b_settings: b_settings.iter().map(|s| s.to_string()).collect(),
            lambda,
            response,
        };
        model.validate()?;
        Ok(model)
    }
}

/// P(x,y|a,b) = Σ_λ P(x,y|a,b,λ) P(λ|a,b).
pub fn predict_outcomes(model: &ToyModel) -> Result<ProbabilityTable> {
    model.validate()?;
    compose_lambda(&model.response, &model.lambda)
}

/// Exact M(a,b) = Σ xy P(x,y|a,b).
pub fn model_correlation(predicted: &ProbabilityTable, a: &str, b: &str) -> Result<f64> {
    let row = predicted.row(&join(&[a, b]))?;
    Ok(row.iter().zip(XY_PRODUCT).map(|(p, s)| p * s).sum())
}

/// Exact CHSH value of a model at the given settings labels.
pub fn chsh_of_model(model: &ToyModel, a: &str, a_prime: &str, b: &str, b_prime: &str) -> Result<ChshResult> {
    for (label, alphabet) in [(a, &model.a_settings), (a_prime, &model.a_settings), (b, &model.b_settings), (b_prime, &model.b_settings)] {
        if !alphabet.iter().any(|s| s == label) {
            return Err(Error::Lookup(label.to_string()));
        }
    }
    let predicted = predict_outcomes(model)?;
    let m = |x: &str, y: &str| -> Result<CorrelationEstimate> {
        Ok(CorrelationEstimate { m_hat: model_correlation(&predicted, x, y)?, std_error: 0.0, n_samples: 0 })
    };
    Ok(chsh(m(a, b)?, m(a_prime, b)?, m(a, b_prime)?, m(a_prime, b_prime)?))
}

/// Largest |S| over every local deterministic strategy with `lambda_size`
/// hidden values and every P(λ) on a grid of step 1/`grid`, with two
/// settings per side.
pub fn max_local_chsh(lambda_size: usize, grid: usize) -> Result<f64> {
    if lambda_size == 0 || grid == 0 {
        return Err(Error::config("lambda_size", "need at least one hidden value and one grid step"));
    }
    let mut distributions = Vec::new();
    compositions(grid, lambda_size, &mut Vec::new(), &mut distributions);
    let sign = |bits: usize, i: usize| if bits >> i & 1 == 1 { 1i8 } else { -1 };
    let mut worst: f64 = 0.0;
    // each λ carries 4 response bits: x(a), x(a′), y(b), y(b′)
    for strategy in 0..1usize << (4 * lambda_size) {
        let bits = |l: usize| strategy >> (4 * l) & 0xf;
        let x_of: Vec<Vec<i8>> = (0..2).map(|s| (0..lambda_size).map(|l| sign(bits(l), s)).collect()).collect();
        let y_of: Vec<Vec<i8>> = (0..2).map(|s| (0..lambda_size).map(|l| sign(bits(l), 2 + s)).collect()).collect();
        for p in &distributions {
            let model = ToyModel::local_deterministic(&["a", "a'"], &["b", "b'"], p, &x_of, &y_of)?;
            let s = chsh_of_model(&model, "a", "a'", "b", "b'")?.s_value;
            worst = worst.max(s.abs());
        }
    }
    Ok(worst)
}

fn compositions(remaining: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
    if parts == 1 {
        let total = (prefix.iter().sum::<usize>() + remaining) as f64;
        out.push(prefix.iter().chain(std::iter::once(&remaining)).map(|&k| k as f64 / total).collect());
        return;
    }
    for k in 0..=remaining {
        prefix.push(k);
        compositions(remaining - k, parts - 1, prefix, out);
        prefix.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::SQRT_2;

    fn labels(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn singlet_model_reproduces_quantum_probabilities() {
        let model = ToyModel::standard_singlet();
        let predicted = predict_outcomes(&model).unwrap();
        let (a, b) = standard_angles();
        for (la, ta) in a {
            for (lb, tb) in b {
                let row = predicted.row(&join(&[la, lb])).unwrap();
                for (k, xy) in XY_PRODUCT.iter().enumerate() {
                    let oracle = (1.0 - xy * (ta - tb).cos()) / 4.0;
                    assert!((row[k] - oracle).abs() < 1e-10);
                }
            }
        }
        let s = chsh_of_model(&model, "0", "pi/2", "pi/4", "-pi/4").unwrap().s_value;
        assert!((s.abs() - 2.0 * SQRT_2).abs() < 1e-10, "{s}");
        assert!(independence_violation(&model.lambda, None).unwrap() > 0.1);
    }

    #[test]
    fn single_star_value_returns_kernel() {
        let kernel = ProbabilityTable::new(labels(&["c1,s", "c2,s"]), labels(&["x", "y"]), vec![vec![0.3, 0.7], vec![1.0, 0.0]]).unwrap();
        let star = ProbabilityTable::new(labels(&["c1", "c2"]), labels(&["s"]), vec![vec![1.0], vec![1.0]]).unwrap();
        let out = compose_lambda(&kernel, &star).unwrap();
        assert_eq!(out.probs, kernel.probs);
    }

    #[test]
    fn two_star_mixture_matches_hand_sum() {
        let kernel = ProbabilityTable::new(
            labels(&["c,s1", "c,s2"]),
            labels(&["x", "y", "z"]),
            vec![vec![0.5, 0.5, 0.0], vec![0.1, 0.2, 0.7]],
        )
        .unwrap();
        let star = ProbabilityTable::new(labels(&["c"]), labels(&["s1", "s2"]), vec![vec![0.25, 0.75]]).unwrap();
        let out = compose_lambda(&kernel, &star).unwrap();
        let hand = [0.25 * 0.5 + 0.75 * 0.1, 0.25 * 0.5 + 0.75 * 0.2, 0.75 * 0.7];
        for (o, h) in out.probs[0].iter().zip(hand) {
            assert!((o - h).abs() < 1e-15);
        }
    }

    #[test]
    fn composition_rejects_mismatched_alphabets() {
        let kernel = ProbabilityTable::new(labels(&["c,s1"]), labels(&["x"]), vec![vec![1.0]]).unwrap();
        let star = ProbabilityTable::new(labels(&["c"]), labels(&["s1", "s2"]), vec![vec![0.5, 0.5]]).unwrap();
        assert!(matches!(compose_lambda(&kernel, &star), Err(Error::Composition(_))));
    }

    #[test]
    fn table_validation() {
        assert!(ProbabilityTable::new(labels(&["c"]), labels(&["x", "y"]), vec![vec![0.5, 0.6]]).is_err());
        assert!(ProbabilityTable::new(labels(&["c", "c"]), labels(&["x"]), vec![vec![1.0], vec![1.0]]).is_err());
        assert!(ProbabilityTable::from_json(r#"{"conditions": ["c"], "outcome": ["x"], "probs": [[1]]}"#).is_err());
    }

    #[test]
    fn independent_table_has_zero_violation() {
        let t = ProbabilityTable::new(labels(&["a,b", "a,b'"]), labels(&["l0", "l1"]), vec![vec![0.3, 0.7]; 2]).unwrap();
        assert_eq!(independence_violation(&t, None).unwrap(), 0.0);
        assert!(independence_violation(&t, Some(&[0.5])).is_err());
    }

    #[test]
    fn null_model_has_zero_s() {
        let model = ToyModel::singlet(&[("x", 0.0), ("x'", 0.0)], &[("y", FRAC_PI_2), ("y'", FRAC_PI_2)]).unwrap();
        assert!(chsh_of_model(&model, "x", "x'", "y", "y'").unwrap().s_value.abs() < 1e-15);
        assert!(matches!(chsh_of_model(&model, "x", "x'", "y", "nope"), Err(Error::Lookup(_))));
    }

    #[test]
    fn local_deterministic_models_obey_the_bound() {
        let s = max_local_chsh(2, 4).unwrap();
        assert!(s <= 2.0 + 1e-12 && s > 1.999, "{s}");
    }

    proptest! {
        #[test]
        fn composition_is_linear_and_stays_normalized(
            k in proptest::collection::vec(proptest::array::uniform3(0.01f64..1.0), 4),
            w1 in 0.0f64..1.0, w2 in 0.0f64..1.0, t in 0.0f64..1.0,
        ) {
            let norm = |r: [f64; 3]| { let s: f64 = r.iter().sum(); r.map(|v| v / s).to_vec() };
            let kernel = ProbabilityTable::new(
                labels(&["c1,s1", "c1,s2", "c2,s1", "c2,s2"]),
                labels(&["x", "y", "z"]),
                k.iter().map(|r| norm(*r)).collect(),
            ).unwrap();
            let star = |w: f64| ProbabilityTable::new(labels(&["c1", "c2"]), labels(&["s1", "s2"]), vec![vec![w, 1.0 - w], vec![1.0 - w, w]]).unwrap();
            let (o1, o2) = (compose_lambda(&kernel, &star(w1)).unwrap(), compose_lambda(&kernel, &star(w2)).unwrap());
            let mixed = compose_lambda(&kernel, &star(t * w1 + (1.0 - t) * w2)).unwrap();
            for c in 0..2 {
                prop_assert!((mixed.probs[c].iter().sum::<f64>() - 1.0).abs() < NORMALIZATION_TOL);
                for j in 0..3 {
                    let lin = t * o1.probs[c][j] + (1.0 - t) * o2.probs[c][j];
                    prop_assert!((mixed.probs[c][j] - lin).abs() < 1e-12);
                }
            }
            let v = independence_violation(&mixed, None).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
