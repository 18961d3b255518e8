//! Bell correlation, CHSH combination and the 2σ bound verdict.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Joint outcome tallies for one settings pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub pp: u64,
    pub pm: u64,
    pub mp: u64,
    pub mm: u64,
}

impl OutcomeCounts {
    pub fn new(pp: u64, pm: u64, mp: u64, mm: u64) -> Self {
        Self { pp, pm, mp, mm }
    }

    pub fn total(&self) -> u64 {
        self.pp + self.pm + self.mp + self.mm
    }

    /// Records one pair of ±1 outcomes.
    pub fn record(&mut self, x_a: i8, x_b: i8) {
        match (x_a > 0, x_b > 0) {
            (true, true) => self.pp += 1,
            (true, false) => self.pm += 1,
            (false, true) => self.mp += 1,
            (false, false) => self.mm += 1,
        }
    }

    pub fn merge(&mut self, other: &OutcomeCounts) {
        self.pp += other.pp;
        self.pm += other.pm;
        self.mp += other.mp;
        self.mm += other.mm;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    pub m_hat: f64,
    pub std_error: f64,
    pub n_samples: u64,
}

/// M̂ = (n₊₊ + n₋₋ − n₊₋ − n₋₊)/N with standard error √((1 − M̂²)/N).
pub fn correlation(counts: &OutcomeCounts) -> Result<CorrelationEstimate> {
    let n = counts.total();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let same = (counts.pp + counts.mm) as i128;
    let diff = (counts.pm + counts.mp) as i128;
    let m_hat = (same - diff) as f64 / n as f64;
    let std_error = ((1.0 - m_hat * m_hat).max(0.0) / n as f64).sqrt();
    Ok(CorrelationEstimate { m_hat, std_error, n_samples: n })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshResult {
    pub s_value: f64,
    pub s_error: f64,
    /// Estimates in the order (a,b), (a′,b), (a,b′), (a′,b′).
    pub components: [CorrelationEstimate; 4],
}

/// S = M(a,b) + M(a′,b) + M(a,b′) − M(a′,b′); errors added in quadrature.
pub fn chsh(
    m_ab: CorrelationEstimate,
    m_apb: CorrelationEstimate,
    m_abp: CorrelationEstimate,
    m_apbp: CorrelationEstimate,
) -> ChshResult {
    let components = [m_ab, m_apb, m_abp, m_apbp];
    let s_value = m_ab.m_hat + m_apb.m_hat + m_abp.m_hat - m_apbp.m_hat;
    let s_error = components.iter().map(|c| c.std_error * c.std_error).sum::<f64>().sqrt();
    ChshResult { s_value, s_error, components }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Satisfied,
    Violated,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Satisfied => "satisfied",
            Verdict::Violated => "violated",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub verdict: Verdict,
    /// |S| − 2
    pub margin: f64,
}

/// Compares |S| with the local bound 2 at two standard errors.
pub fn bound_check(result: &ChshResult) -> BoundCheck {
    let margin = result.s_value.abs() - 2.0;
    let verdict = if margin > 2.0 * result.s_error {
        Verdict::Violated
    } else if -margin > 2.0 * result.s_error {
        Verdict::Satisfied
    } else {
        Verdict::Inconclusive
    };
    BoundCheck { verdict, margin }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

    fn exact(m: f64) -> CorrelationEstimate {
        CorrelationEstimate { m_hat: m, std_error: 0.0, n_samples: 1 }
    }

    #[test]
    fn perfect_and_null_correlation() {
        let c = correlation(&OutcomeCounts::new(50, 0, 0, 0)).unwrap();
        assert_eq!((c.m_hat, c.std_error, c.n_samples), (1.0, 0.0, 50));
        assert_eq!(correlation(&OutcomeCounts::new(25, 25, 25, 25)).unwrap().m_hat, 0.0);
        assert!(matches!(correlation(&OutcomeCounts::default()), Err(Error::EmptySample)));
    }

    #[test]
    fn chsh_reference_values() {
        assert_eq!(chsh(exact(1.0), exact(1.0), exact(1.0), exact(-1.0)).s_value, 4.0);
        assert_eq!(chsh(exact(0.0), exact(0.0), exact(0.0), exact(0.0)).s_value, 0.0);
        let m = |x: f64, y: f64| exact(-(x - y).cos());
        let (a, ap, b, bp) = (0.0, FRAC_PI_2, FRAC_PI_4, -FRAC_PI_4);
        let s = chsh(m(a, b), m(ap, b), m(a, bp), m(ap, bp)).s_value;
        assert!((s + 2.0 * SQRT_2).abs() < 1e-12, "{s}");
    }

    #[test]
    fn verdicts() {
        let with = |s: f64, e: f64| ChshResult { s_value: s, s_error: e, components: [exact(0.0); 4] };
        let v = bound_check(&with(2.49, 0.04));
        assert_eq!(v.verdict, Verdict::Violated);
        assert!((v.margin - 0.49).abs() < 1e-12);
        assert_eq!(bound_check(&with(1.0, 0.01)).verdict, Verdict::Satisfied);
        assert_eq!(bound_check(&with(2.02, 0.05)).verdict, Verdict::Inconclusive);
        assert_eq!(bound_check(&with(-2.49, 0.04)).verdict, Verdict::Violated);
    }

    proptest! {
        #[test]
        fn correlation_is_bounded_and_flip_symmetric(pp in 0u64..500, pm in 0u64..500, mp in 0u64..500, mm in 0u64..500) {
            prop_assume!(pp + pm + mp + mm > 0);
            let c = correlation(&OutcomeCounts::new(pp, pm, mp, mm)).unwrap();
            prop_assert!(c.m_hat.abs() <= 1.0 && c.std_error >= 0.0);
            // flipping both outcomes swaps ++ with -- and +- with -+
            let both = correlation(&OutcomeCounts::new(mm, mp, pm, pp)).unwrap();
            prop_assert_eq!(both.m_hat, c.m_hat);
            // flipping A alone swaps ++ with -+ and +- with --
            let one = correlation(&OutcomeCounts::new(mp, mm, pp, pm)).unwrap();
            prop_assert_eq!(one.m_hat, -c.m_hat);
        }

        #[test]
        fn chsh_is_linear_and_bounded(m in proptest::array::uniform4(-1.0f64..1.0), n in proptest::array::uniform4(-1.0f64..1.0), k in -3.0f64..3.0) {
            let s = |v: [f64; 4]| chsh(exact(v[0]), exact(v[1]), exact(v[2]), exact(v[3])).s_value;
            prop_assert!(s(m).abs() <= 4.0);
            let combo = [0, 1, 2, 3].map(|i| m[i] + k * n[i]);
            prop_assert!((s(combo) - (s(m) + k * s(n))).abs() < 1e-12);
        }
    }
}
