//! Dirichlet-to-Neumann map over a piecewise-constant bottom.
//!
//! The potential is discretised on a terrain-following grid: every surface
//! cell owns a column of `nz + 1` sigma nodes at depths `z = -h·s_k`, node 0
//! carrying the prescribed surface value. Each node has a control volume
//! bounded by the midpoints to its vertical neighbours; fluxes between
//! adjacent columns are weighted by the vertical overlap of the two control
//! volumes, so a depth step exposes a solid wall wherever the deeper column
//! has no neighbour. Bottom and end walls are no-flux.
//!
//! Eliminating the interior unknowns leaves the Schur complement
//! `S = K_ss - K_su K_uu⁻¹ K_us`, symmetric positive semi-definite with the
//! constants as null space. The flux balance of each surface half-cell gives
//! `∂φ/∂z|₀ = S φ_s / dx`, second-order accurate. The interior system is
//! factorised once and `S` is stored densely.

use super::banded::BandMatrix;
use super::params::Grid;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
enum Storage {
    /// Mirror-symmetric bath: even/odd blocks, each `half × half`.
    Symmetric { even: Vec<f64>, odd: Vec<f64>, half: usize },
    General { dense: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct DtnOperator {
    n: usize,
    storage: Storage,
    spectral_radius: f64,
}

impl DtnOperator {
    pub fn build(grid: &Grid) -> Result<Self> {
        let schur = schur_complement(grid)?;
        let n = grid.nx;
        let mut d: Vec<f64> = schur.iter().map(|v| v / grid.dx).collect();

        // exact transpose symmetry
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (d[i * n + j] + d[j * n + i]);
                d[i * n + j] = avg;
                d[j * n + i] = avg;
            }
        }

        let mirror_symmetric = n % 2 == 0 && (0..n).all(|i| grid.depth[i] == grid.depth[n - 1 - i]);
        let spectral_radius = power_iteration(&d, n);
        let storage = if mirror_symmetric {
            let half = n / 2;
            let mut even = vec![0.0; half * half];
            let mut odd = vec![0.0; half * half];
            for i in 0..half {
                let mi = n - 1 - i;
                for j in 0..half {
                    let mj = n - 1 - j;
                    // average over the two mirror images of each entry
                    let dij = 0.5 * (d[i * n + j] + d[mi * n + mj]);
                    let dimj = 0.5 * (d[i * n + mj] + d[mi * n + j]);
                    even[i * half + j] = 0.5 * (dij + dimj);
                    odd[i * half + j] = 0.5 * (dij - dimj);
                }
            }
            Storage::Symmetric { even, odd, half }
        } else {
            Storage::General { dense: d }
        };
        Ok(Self { n, storage, spectral_radius })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Largest eigenvalue of the operator, 1/cm.
    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }

    pub fn is_mirror_symmetric(&self) -> bool {
        matches!(self.storage, Storage::Symmetric { .. })
    }

    /// Surface vertical velocity `∂φ/∂z` for surface potential `phi`.
    pub fn apply(&self, phi: &[f64], out: &mut [f64]) {
        let half = self.n / 2;
        self.apply_with(phi, out, &mut vec![0.0; half], &mut vec![0.0; half]);
    }

    /// [`apply`](Self::apply) with caller-provided even/odd buffers of length `n / 2`.
    pub(crate) fn apply_with(&self, phi: &[f64], out: &mut [f64], e: &mut [f64], o: &mut [f64]) {
        assert_eq!(phi.len(), self.n);
        assert_eq!(out.len(), self.n);
        match &self.storage {
            Storage::General { dense } => {
                for (row, o) in dense.chunks_exact(self.n).zip(out.iter_mut()) {
                    *o = dot(row, phi);
                }
            }
            Storage::Symmetric { even, odd, half } => {
                let half = *half;
                let n = self.n;
                for j in 0..half {
                    e[j] = phi[j] + phi[n - 1 - j];
                    o[j] = phi[j] - phi[n - 1 - j];
                }
                for i in 0..half {
                    let p = dot(&even[i * half..(i + 1) * half], e);
                    let r = dot(&odd[i * half..(i + 1) * half], o);
                    out[i] = p + r;
                    out[n - 1 - i] = p - r;
                }
            }
        }
    }

    /// Dense copy of the operator, row-major.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.n * self.n];
        let mut unit = vec![0.0; self.n];
        let mut col = vec![0.0; self.n];
        for j in 0..self.n {
            unit[j] = 1.0;
            self.apply(&unit, &mut col);
            unit[j] = 0.0;
            for i in 0..self.n {
                dense[i * self.n + j] = col[i];
            }
        }
        dense
    }
}

/// Fixed-order dot product with eight independent accumulators.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// Vertical extent `[bottom, top]` (z ≤ 0) of the control volume of node `k`.
fn control_volume(sigma: &[f64], h: f64, k: usize) -> (f64, f64) {
    let nz = sigma.len() - 1;
    let top = if k == 0 { 0.0 } else { -0.5 * h * (sigma[k - 1] + sigma[k]) };
    let bottom = if k == nz { -h } else { -0.5 * h * (sigma[k] + sigma[k + 1]) };
    (bottom, top)
}

fn schur_complement(grid: &Grid) -> Result<Vec<f64>> {
    let n = grid.nx;
    let nz = grid.nz;
    let dx = grid.dx;
    let s = &grid.sigma;
    let unknowns = n * nz;
    let node = |i: usize, k: usize| -> Option<usize> { (k > 0).then(|| i * nz + (k - 1)) };

    let mut kuu = BandMatrix::zeros(unknowns, 2 * nz);
    let mut kss = vec![0.0; n * n];
    // K_us column per surface cell: (interior index, entry)
    let mut kus: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];

    let mut add_edge = |a: (usize, usize), b: (usize, usize), w: f64| match (node(a.0, a.1), node(b.0, b.1)) {
        (Some(p), Some(q)) => {
            kuu.add(p, p, w);
            kuu.add(q, q, w);
            kuu.add(p, q, -w);
        }
        (None, Some(q)) => {
            kss[a.0 * n + a.0] += w;
            kuu.add(q, q, w);
            kus[a.0].push((q, -w));
        }
        (Some(p), None) => {
            kss[b.0 * n + b.0] += w;
            kuu.add(p, p, w);
            kus[b.0].push((p, -w));
        }
        (None, None) => {
            kss[a.0 * n + a.0] += w;
            kss[b.0 * n + b.0] += w;
            kss[a.0 * n + b.0] -= w;
            kss[b.0 * n + a.0] -= w;
        }
    };

    for i in 0..n {
        let h = grid.depth[i];
        for k in 0..nz {
            add_edge((i, k), (i, k + 1), dx / (h * (s[k + 1] - s[k])));
        }
    }

    let half = n / 2;
    for i in 0..n.saturating_sub(1) {
        if grid.center_wall && i + 1 == half {
            continue;
        }
        let (ha, hb) = (grid.depth[i], grid.depth[i + 1]);
        let (mut k, mut l) = (0, 0);
        while k <= nz && l <= nz {
            let (bot_a, top_a) = control_volume(s, ha, k);
            let (bot_b, top_b) = control_volume(s, hb, l);
            let overlap = top_a.min(top_b) - bot_a.max(bot_b);
            if overlap > 0.0 {
                add_edge((i, k), (i + 1, l), overlap / dx);
            }
            // advance whichever volume ends higher up
            if bot_a > bot_b {
                k += 1;
            } else if bot_b > bot_a {
                l += 1;
            } else {
                k += 1;
                l += 1;
            }
        }
    }

    let chol = kuu.factorize()?;
    debug_assert_eq!(chol.len(), unknowns);

    let mut schur = kss;
    let mut y = vec![0.0; unknowns];
    for j in 0..n {
        y.iter_mut().for_each(|v| *v = 0.0);
        for &(q, v) in &kus[j] {
            y[q] += v;
        }
        chol.solve_in_place(&mut y);
        for i in 0..n {
            let corr: f64 = kus[i].iter().map(|&(q, v)| v * y[q]).sum();
            schur[i * n + j] -= corr;
        }
    }
    if schur.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite entry in the Dirichlet-to-Neumann matrix".into()));
    }
    Ok(schur)
}

fn power_iteration(d: &[f64], n: usize) -> f64 {
    // start from the highest-wavenumber pattern, which dominates
    let mut v: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let mut w = vec![0.0; n];
    let mut lambda = 0.0;
    for _ in 0..200 {
        for (row, o) in d.chunks_exact(n).zip(w.iter_mut()) {
            *o = dot(row, &v);
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm / v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().zip(&w).for_each(|(a, b)| *a = b / norm);
        if (next - lambda).abs() <= 1e-10 * next {
            return next;
        }
        lambda = next;
    }
    lambda
}
