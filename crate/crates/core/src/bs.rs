//! Birman–Schwinger matrices, smoothed multipliers and spectral radii.

use faer::Mat;
use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{FrequencySymbol, Grid, GridSpec};
use crate::linalg::{frobenius, matvec, ComplexMatrix};
use crate::potential::PotentialField;

/// `|V|^{1/2} (-Delta - z)^{-1} V^{1/2}` restricted to the support of `V`.
#[derive(Clone, Debug)]
pub struct BsOperator {
    pub grid: GridSpec,
    pub z: Complex64,
    /// Support nodes, in increasing order; row/column `k` is node `support[k]`.
    pub support: Vec<usize>,
    pub matrix: ComplexMatrix,
}

/// `V / |V|^{1/2}`, zero where `V = 0`.
#[inline]
pub fn half_power(v: Complex64) -> Complex64 {
    let m = v.norm();
    if m == 0.0 {
        Complex64::default()
    } else {
        v / m.sqrt()
    }
}

/// Assembles BS(z) column by column, one multiplier application per support node.
pub fn assemble_bs(grid: &Grid, potential: &PotentialField, z: Complex64) -> Result<BsOperator> {
    if potential.grid != *grid.spec() {
        return Err(invalid("potential", "sampled on a different grid"));
    }
    let support = potential.support();
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    let symbol = grid.resolvent_symbol(z)?;
    let v = &potential.values;
    let outer: Vec<f64> = support.iter().map(|&s| v[s].norm().sqrt()).collect();
    let columns: Vec<Vec<Complex64>> = support
        .par_iter()
        .map(|&s| {
            let mut buf = vec![Complex64::default(); grid.len()];
            buf[s] = half_power(v[s]);
            grid.apply_multiplier_in_place(&symbol, &mut buf);
            support
                .iter()
                .zip(&outer)
                .map(|(&t, &w)| buf[t] * w)
                .collect()
        })
        .collect();
    let n = support.len();
    let matrix = Mat::from_fn(n, n, |i, j| columns[j][i]);
    Ok(BsOperator {
        grid: *grid.spec(),
        z,
        support,
        matrix,
    })
}

/// Canonical representative of `C^{(delta)}(D)` at `z`.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothedSymbol {
    pub z: Complex64,
    pub delta: f64,
    pub values: FrequencySymbol,
}

/// `(||2 pi xi|^2 - |z|| + delta)^{-1/2}`.
pub fn smoothed_symbol(grid: &Grid, z: Complex64, delta: f64) -> Result<SmoothedSymbol> {
    if !(delta > 0.0) {
        return Err(invalid("delta", "must be positive"));
    }
    let az = z.norm();
    let values = (0..grid.len())
        .map(|i| ((grid.laplacian_value(i) - az).abs() + delta).powf(-0.5))
        .collect();
    Ok(SmoothedSymbol {
        z,
        delta,
        values: FrequencySymbol::from_real(values),
    })
}

/// Indicator of `lo <= |2 pi xi| <= hi`.
pub fn band_cutoff(grid: &Grid, lo: f64, hi: f64) -> Result<FrequencySymbol> {
    if !(lo >= 0.0 && lo < hi) {
        return Err(invalid("band", format!("need 0 <= lo < hi, got [{lo}, {hi}]")));
    }
    Ok(FrequencySymbol::from_real(
        (0..grid.len())
            .map(|i| {
                let k = grid.laplacian_value(i).sqrt();
                if lo <= k && k <= hi {
                    1.0
                } else {
                    0.0
                }
            })
            .collect(),
    ))
}

/// Something that can be applied to a vector.
pub trait LinearOp: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]);
    /// Dense form, if cheap to provide.
    fn dense(&self) -> Option<ComplexMatrix> {
        None
    }
}

impl LinearOp for ComplexMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        matvec(self, x, y)
    }
    fn dense(&self) -> Option<ComplexMatrix> {
        Some(self.clone())
    }
}

impl LinearOp for BsOperator {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        matvec(&self.matrix, x, y)
    }
    fn dense(&self) -> Option<ComplexMatrix> {
        Some(self.matrix.clone())
    }
}

/// Output of [`gelfand_spr`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GelfandEstimate {
    /// Best available estimate (dense when computed).
    pub radius: f64,
    /// Random-vector norm-growth estimate.
    pub iterative: f64,
    /// Repeated-squaring estimate, for dimensions up to 512.
    pub dense: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub const GELFAND_DENSE_LIMIT: usize = 512;

/// Spectral radius via `lim ||A^n||^{1/n}`.
pub fn gelfand_spr(op: &dyn LinearOp, n_max: usize, tol: f64) -> Result<GelfandEstimate> {
    if n_max < 8 {
        return Err(invalid("n_max", "must be at least 8"));
    }
    let n = op.dim();
    if n == 0 {
        return Ok(GelfandEstimate {
            radius: 0.0,
            iterative: 0.0,
            dense: Some(0.0),
            iterations: 0,
            converged: true,
        });
    }
    let (iterative, it_conv, iters) = power_growth(op, n_max, tol);
    let dense = if n <= GELFAND_DENSE_LIMIT {
        op.dense().map(|m| repeated_squaring(&m, tol))
    } else {
        None
    };
    Ok(match dense {
        Some((r, conv)) => GelfandEstimate {
            radius: r,
            iterative,
            dense: Some(r),
            iterations: iters,
            converged: conv,
        },
        None => GelfandEstimate {
            radius: iterative,
            iterative,
            dense: None,
            iterations: iters,
            converged: it_conv,
        },
    })
}

fn power_growth(op: &dyn LinearOp, n_max: usize, tol: f64) -> (f64, bool, usize) {
    let n = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let unit = |r: u64| (r >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
    let mut x: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(unit(rng.next_u64()), unit(rng.next_u64())))
        .collect();
    let nrm = |v: &[Complex64]| v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let x0 = nrm(&x);
    for v in x.iter_mut() {
        *v /= x0;
    }
    let mut y = vec![Complex64::default(); n];
    let mut logs = Vec::with_capacity(n_max);
    let mut prev = f64::NAN;
    for k in 1..=n_max {
        op.apply(&x, &mut y);
        let c = nrm(&y);
        if c == 0.0 {
            return (0.0, true, k);
        }
        logs.push(c.ln());
        for (a, b) in x.iter_mut().zip(&y) {
            *a = b / c;
        }
        if k >= 8 {
            let w = &logs[k / 2..];
            let est = (w.iter().sum::<f64>() / w.len() as f64).exp();
            if (est - prev).abs() <= tol * est {
                return (est, true, k);
            }
            prev = est;
        }
    }
    (prev, false, n_max)
}

/// `log rho ~ log a_0 + sum_j 2^{-j} log c_j` with Frobenius-normalized squares.
fn repeated_squaring(m: &ComplexMatrix, tol: f64) -> (f64, bool) {
    let a0 = frobenius(m);
    if a0 == 0.0 {
        return (0.0, true);
    }
    let mut b = m * faer::Scale(Complex64::new(1.0 / a0, 0.0));
    let mut log_rho = a0.ln();
    let mut best = a0;
    for j in 1..=60 {
        let sq = &b * &b;
        let c = frobenius(&sq);
        if c == 0.0 {
            return (0.0, true);
        }
        let next = log_rho + c.ln() / 2f64.powi(j);
        b = &sq * faer::Scale(Complex64::new(1.0 / c, 0.0));
        let delta = (next - log_rho).abs();
        log_rho = next;
        best = best.min(log_rho.exp());
        if delta < tol.min(1e-12) {
            return (best, true);
        }
    }
    (best, false)
}
