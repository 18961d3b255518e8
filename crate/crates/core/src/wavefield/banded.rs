//! Banded Cholesky factorization for the symmetric positive definite
//! sigma-grid Laplacian.

use crate::error::{Error, Result};

/// Lower band of a symmetric matrix, row-major, `bandwidth + 1` entries per
/// row. Entry `(i, j)` with `i - bandwidth <= j <= i` lives at
/// `i * (bandwidth + 1) + (i - j)`.
#[derive(Debug, Clone)]
pub(crate) struct BandMatrix {
    n: usize,
    bandwidth: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        Self { n, bandwidth, data: vec![0.0; n * (bandwidth + 1)] }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bandwidth, "({i}, {j}) outside band {}", self.bandwidth);
        i * (self.bandwidth + 1) + (i - j)
    }

    /// Adds `value` to entry `(i, j)` of the symmetric matrix.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let k = self.idx(r, c);
        self.data[k] += value;
    }

    /// In-place Cholesky: on success the band holds L with A = L Lᵀ.
    pub fn factorize(mut self) -> Result<CholeskyBand> {
        let b = self.bandwidth;
        for i in 0..self.n {
            let lo = i.saturating_sub(b);
            for j in lo..=i {
                let kmin = lo.max(j.saturating_sub(b));
                let mut sum = self.data[self.idx(i, j)];
                for k in kmin..j {
                    sum -= self.data[self.idx(i, k)] * self.data[self.idx(j, k)];
                }
                if i == j {
                    if !(sum > 0.0) || !sum.is_finite() {
                        return Err(Error::Numerical(format!(
                            "Laplace matrix not positive definite at row {i} of {} (pivot {sum:e})",
                            self.n
                        )));
                    }
                    let k = self.idx(i, i);
                    self.data[k] = sum.sqrt();
                } else {
                    let k = self.idx(i, j);
                    self.data[k] = sum / self.data[self.idx(j, j)];
                }
            }
        }
        Ok(CholeskyBand { l: self })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct CholeskyBand {
    l: BandMatrix,
}

impl CholeskyBand {
    pub fn len(&self) -> usize {
        self.l.len()
    }

    /// Solves A x = rhs in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let l = &self.l;
        let b = l.bandwidth;
        let n = l.n;
        debug_assert_eq!(x.len(), n);
        for i in 0..n {
            let mut sum = x[i];
            for k in i.saturating_sub(b)..i {
                sum -= l.data[l.idx(i, k)] * x[k];
            }
            x[i] = sum / l.data[l.idx(i, i)];
        }
        for i in (0..n).rev() {
            let mut sum = x[i];
            for k in (i + 1)..n.min(i + b + 1) {
                sum -= l.data[l.idx(k, i)] * x[k];
            }
            x[i] = sum / l.data[l.idx(i, i)];
        }
    }
}
