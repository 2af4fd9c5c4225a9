//! Dense spectra of `-Delta - V` on the grid, filtering and eigenvalue sums.

use std::io::Write;

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, GridSpec};
use crate::linalg::ComplexMatrix;
use crate::potential::PotentialField;

/// Largest matrix dimension accepted by the dense eigensolver.
pub const DENSE_BUDGET: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub z: Complex64,
    /// `Re sqrt(z)`, principal branch.
    pub lambda: f64,
    /// `Im sqrt(z)`, principal branch.
    pub eps: f64,
    pub multiplicity: usize,
    /// `max ||(H - z) v|| / ||v||` over the cluster.
    pub residual: f64,
}

impl SpectralPoint {
    pub fn new(z: Complex64, multiplicity: usize, residual: f64) -> Self {
        let s = z.sqrt();
        SpectralPoint {
            z,
            lambda: s.re,
            eps: s.im,
            multiplicity,
            residual,
        }
    }
}

/// Dense `-Delta - V`: the Laplacian is the translation-invariant kernel of its symbol.
pub fn hamiltonian_matrix(grid: &Grid, potential: &PotentialField) -> Result<ComplexMatrix> {
    let n = grid.len();
    if n > DENSE_BUDGET {
        return Err(Error::OverBudget {
            dim: n,
            budget: DENSE_BUDGET,
        });
    }
    if potential.grid != *grid.spec() {
        return Err(invalid("potential", "sampled on a different grid"));
    }
    let mut kernel = grid.laplacian_symbol().values;
    grid.inverse(&mut kernel);
    let spec = *grid.spec();
    let multi: Vec<[i64; 3]> = (0..n).map(|i| spec.signed_multi(i)).collect();
    Ok(Mat::from_fn(n, n, |i, j| {
        let (a, b) = (multi[i], multi[j]);
        let k = spec.flatten_wrapped([a[0] - b[0], a[1] - b[1], a[2] - b[2]]);
        let mut v = kernel[k];
        if i == j {
            v -= potential.values[i];
        }
        v
    }))
}

/// Maximum absolute row sum.
pub fn inf_norm(m: &ComplexMatrix) -> f64 {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// All eigenvalues with residuals; eigenvalues within `1e-7 ||H||` are merged.
pub fn eigenvalues_dense(matrix: &ComplexMatrix) -> Result<Vec<SpectralPoint>> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(invalid("matrix", "must be square"));
    }
    if n > DENSE_BUDGET {
        return Err(Error::OverBudget {
            dim: n,
            budget: DENSE_BUDGET,
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let evd = matrix
        .eigen()
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let vals: Vec<Complex64> = evd.S().column_vector().iter().copied().collect();
    if let Some(k) = vals.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::Eigensolver(format!("non-finite eigenvalue at index {k}")));
    }
    let u = evd.U();
    let hu = matrix * u;
    let residuals: Vec<f64> = (0..n)
        .map(|k| {
            let (mut num, mut den) = (0.0, 0.0);
            for i in 0..n {
                num += (hu[(i, k)] - vals[k] * u[(i, k)]).norm_sqr();
                den += u[(i, k)].norm_sqr();
            }
            (num / den).sqrt()
        })
        .collect();
    let tol = 1e-7 * inf_norm(matrix);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[a].re.partial_cmp(&vals[b].re).unwrap().then(a.cmp(&b)));
    let mut parent: Vec<usize> = (0..n).collect();
    for (p, &a) in order.iter().enumerate() {
        for &b in &order[p + 1..] {
            if vals[b].re - vals[a].re > tol {
                break;
            }
            if (vals[a] - vals[b]).norm() <= tol {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for k in 0..n {
        let r = find(&mut parent, k);
        groups.entry(r).or_default().push(k);
    }
    let mut out: Vec<SpectralPoint> = groups
        .values()
        .map(|g| {
            let z = g.iter().map(|&k| vals[k]).sum::<Complex64>() / g.len() as f64;
            let res = g.iter().map(|&k| residuals[k]).fold(0.0, f64::max);
            SpectralPoint::new(z, g.len(), res)
        })
        .collect();
    out.sort_by(|a, b| {
        a.z.re
            .partial_cmp(&b.z.re)
            .unwrap()
            .then(a.z.im.partial_cmp(&b.z.im).unwrap())
    });
    Ok(out)
}

/// Eigenvalues of `-Delta - V` on the grid.
pub fn spectrum(grid: &Grid, potential: &PotentialField) -> Result<Vec<SpectralPoint>> {
    eigenvalues_dense(&hamiltonian_matrix(grid, potential)?)
}

/// Distance from `z` to `[0, infinity)`.
pub fn delta_dist(z: Complex64) -> f64 {
    if z.re >= 0.0 {
        z.im.abs()
    } else {
        z.norm()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumFilter {
    /// Window on `|z|^{1/2}`.
    pub band: (f64, f64),
    pub essential_margin: f64,
    /// Keep only `|Im z| >= kappa Re z` when set.
    pub kappa: Option<f64>,
}

impl SpectrumFilter {
    /// One free level spacing at the bottom of the box spectrum, `10 (2 pi / L)^2`.
    pub fn default_margin(grid: &GridSpec) -> f64 {
        10.0 * (2.0 * std::f64::consts::PI / grid.l).powi(2)
    }

    pub fn for_grid(grid: &GridSpec) -> Self {
        SpectrumFilter {
            band: (0.0, f64::INFINITY),
            essential_margin: Self::default_margin(grid),
            kappa: None,
        }
    }

    /// Raises the margin to `4 ||V||_1 / L^d`, the size of box-mode shifts.
    pub fn with_box_artifact_margin(mut self, potential: &PotentialField) -> Self {
        let l1 = potential.lq_norm(1.0).unwrap_or(0.0);
        let g = potential.grid;
        self.essential_margin = self.essential_margin.max(4.0 * l1 / g.l.powi(g.d as i32));
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.band.0 >= 0.0 && self.band.0 <= self.band.1) {
            return Err(invalid("band", "need 0 <= lower <= upper"));
        }
        if !(self.essential_margin > 0.0) {
            return Err(invalid("essential_margin", "must be positive"));
        }
        if let Some(k) = self.kappa {
            if !(k > 0.0) {
                return Err(invalid("kappa", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn keeps(&self, z: Complex64) -> bool {
        let r = z.norm().sqrt();
        delta_dist(z) >= self.essential_margin
            && r >= self.band.0
            && r <= self.band.1
            && self.kappa.map_or(true, |k| z.im.abs() >= k * z.re)
    }
}

pub fn filter_discrete(points: &[SpectralPoint], filter: &SpectrumFilter) -> Vec<SpectralPoint> {
    points.iter().copied().filter(|p| filter.keeps(p.z)).collect()
}

/// `sum_j m_j delta(z_j) |z_j|^e`.
pub fn delta_power_sum(points: &[SpectralPoint], exponent: f64) -> f64 {
    points
        .iter()
        .map(|p| {
            let w = if exponent == 0.0 { 1.0 } else { p.z.norm().powf(exponent) };
            p.multiplicity as f64 * delta_dist(p.z) * w
        })
        .sum()
}

/// Exponent `-1/2 + (2 p sigma - 1 + eps)_+ / 2`.
pub fn eigenvalue_sum_exponent(p: f64, sigma: f64, eps: f64) -> f64 {
    -0.5 + 0.5 * (2.0 * p * sigma - 1.0 + eps).max(0.0)
}

pub fn eigenvalue_sum(points: &[SpectralPoint], p: f64, sigma: f64, eps: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(invalid("sigma", "must be positive"));
    }
    if !(p >= 1.0) {
        return Err(invalid("p", "must be at least 1"));
    }
    if !(eps > 0.0) {
        return Err(invalid("eps", "must be positive"));
    }
    Ok(delta_power_sum(points, eigenvalue_sum_exponent(p, sigma, eps)))
}

/// CSV with columns `re_z, im_z, multiplicity, residual, seed, realization_index`.
pub fn write_spectrum_csv<W: Write>(
    out: W,
    points: &[SpectralPoint],
    seed: Option<u64>,
    realization: Option<u64>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["re_z", "im_z", "multiplicity", "residual", "seed", "realization_index"])?;
    let opt = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
    for p in points {
        w.write_record([
            format!("{:.17e}", p.z.re),
            format!("{:.17e}", p.z.im),
            p.multiplicity.to_string(),
            format!("{:.6e}", p.residual),
            opt(seed),
            opt(realization),
        ])?;
    }
    w.flush()?;
    Ok(())
}
