//! Sphere nets, discrete Fourier extension, and the sandwich `E* V E`.
//!
//! A net on `M_lambda = {|xi| = lambda}` carries quadrature weights for the
//! surface measure. The sandwich matrix is
//! `S[mu, nu] = sum_x conj(e(x.mu)) V(x) e(x.nu) cellvol sqrt(w_mu w_nu)`
//! with `e(t) = exp(2 pi i t)`, so its norm approximates the
//! `L^2(M) -> L^2(M)` norm of the continuum operator.

pub mod nufft;

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{hermitian_eigenvalues, singular_values as svd_values, ComplexMatrix};
use crate::potential::PotentialField;
use nufft::{Nufft2, SPREAD};

pub use crate::linalg::singular_values;

/// Nodes and weights on the sphere of radius `lambda`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereNet {
    pub d: usize,
    pub lambda: f64,
    /// Target spacing between neighbouring nodes.
    pub spacing: f64,
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl SphereNet {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn surface_measure(&self) -> f64 {
        match self.d {
            2 => 2.0 * PI * self.lambda,
            _ => 4.0 * PI * self.lambda * self.lambda,
        }
    }

    /// Nearest-neighbour distance of every node (brute force).
    pub fn nearest_neighbour_distances(&self) -> Vec<f64> {
        (0..self.len())
            .into_par_iter()
            .map(|i| {
                let a = self.nodes[i];
                (0..self.len())
                    .filter(|&j| j != i)
                    .map(|j| {
                        let b = self.nodes[j];
                        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2))
                            .sqrt()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }
}

/// A `1/R`-net on `M_lambda`.
pub fn build_net(lambda: f64, r: f64, d: usize) -> Result<SphereNet> {
    build_net_oversampled(lambda, r, d, 1.0)
}

/// A net with spacing `1/(R kappa)`.
pub fn build_net_oversampled(lambda: f64, r: f64, d: usize, kappa: f64) -> Result<SphereNet> {
    if !(lambda > 0.0 && r > 0.0 && kappa > 0.0) {
        return Err(invalid("net", "lambda, R and oversampling must be positive"));
    }
    let spacing = 1.0 / (r * kappa);
    let (nodes, weights) = match d {
        2 => {
            let n = (2.0 * PI * lambda / spacing - 1e-9).ceil() as usize;
            if n < 8 {
                return Err(invalid("net", format!("only {n} nodes; lambda R too small")));
            }
            let w = 2.0 * PI * lambda / n as f64;
            let nodes = (0..n)
                .map(|k| {
                    let th = 2.0 * PI * k as f64 / n as f64;
                    [lambda * th.cos(), lambda * th.sin(), 0.0]
                })
                .collect();
            (nodes, vec![w; n])
        }
        3 => {
            let n = (8.0 * PI * lambda * lambda / (3f64.sqrt() * spacing * spacing)).round() as usize;
            if n < 8 {
                return Err(invalid("net", format!("only {n} nodes; lambda R too small")));
            }
            let golden = PI * (3.0 - 5f64.sqrt());
            let nodes = (0..n)
                .map(|i| {
                    let z = 1.0 - (2 * i + 1) as f64 / n as f64;
                    let rho = (1.0 - z * z).sqrt();
                    let phi = golden * i as f64;
                    [lambda * rho * phi.cos(), lambda * rho * phi.sin(), lambda * z]
                })
                .collect();
            (nodes, vec![4.0 * PI * lambda * lambda / n as f64; n])
        }
        _ => return Err(invalid("d", format!("sphere nets need d in {{2,3}}, got {d}"))),
    };
    Ok(SphereNet {
        d,
        lambda,
        spacing,
        nodes,
        weights,
    })
}

#[inline]
fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Rows indexed by points, columns by net nodes: `e(x.xi) w_xi`.
pub fn extension_matrix(net: &SphereNet, points: &[[f64; 3]]) -> ComplexMatrix {
    Mat::from_fn(points.len(), net.len(), |i, j| {
        Complex64::from_polar(net.weights[j], 2.0 * PI * dot(points[i], net.nodes[j]))
    })
}

/// How the sandwich matrix is assembled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SandwichMethod {
    /// `E* diag(V cellvol) E` over support nodes.
    Direct,
    /// Nonuniform FFT of `V` evaluated at node differences.
    Spectral,
    /// Cheaper of the two by operation count.
    #[default]
    Auto,
}

#[derive(Clone, Debug)]
pub struct SandwichOperator {
    pub net_out: SphereNet,
    pub net_in: SphereNet,
    pub matrix: ComplexMatrix,
    /// Same net on both sides and real `V`.
    pub hermitian: bool,
    pub method: SandwichMethod,
}

impl SandwichOperator {
    /// Singular values, nonincreasing; uses the Hermitian solver when possible.
    pub fn singular_values(&self) -> Result<Vec<f64>> {
        if self.hermitian {
            let mut s: Vec<f64> = hermitian_eigenvalues(&self.matrix)?
                .into_iter()
                .map(f64::abs)
                .collect();
            s.sort_by(|a, b| b.partial_cmp(a).unwrap());
            Ok(s)
        } else {
            svd_values(&self.matrix)
        }
    }

    pub fn norm(&self) -> Result<f64> {
        Ok(self.singular_values()?.first().copied().unwrap_or(0.0))
    }
}

fn is_real(field: &PotentialField) -> bool {
    field.values.iter().all(|v| v.im == 0.0)
}

/// `E*_lambda V E_lambda` with automatic method choice.
pub fn sandwich(
    net_out: &SphereNet,
    net_in: &SphereNet,
    potential: &PotentialField,
) -> Result<SandwichOperator> {
    sandwich_with(net_out, net_in, potential, SandwichMethod::Auto)
}

struct SupportInfo {
    nodes: Vec<usize>,
    kmax: i64,
}

fn support_info(potential: &PotentialField) -> SupportInfo {
    let nodes = potential.support();
    let kmax = nodes
        .iter()
        .map(|&i| {
            let k = potential.grid.signed_multi(i);
            k.iter().map(|v| v.abs()).max().unwrap()
        })
        .max()
        .unwrap_or(0);
    SupportInfo { nodes, kmax }
}

fn spectral_modes(potential: &PotentialField, kmax: i64) -> usize {
    ((2 * kmax + 2) as usize).min(potential.grid.n)
}

/// Operation-count estimates `(direct, spectral)`.
pub fn sandwich_costs(n_out: usize, n_in: usize, potential: &PotentialField) -> (f64, f64) {
    let info = support_info(potential);
    let d = potential.grid.d as i32;
    let direct = info.nodes.len() as f64 * (n_out * n_in + n_out + n_in) as f64;
    let fine = nufft::smooth_size(2 * spectral_modes(potential, info.kmax)) as f64;
    let grid = fine.powi(d);
    let spectral = 5.0 * grid * grid.log2().max(1.0)
        + (n_out * n_in) as f64 * ((2 * SPREAD + 1) as f64).powi(d) / 4.0;
    (direct, spectral)
}

pub fn sandwich_with(
    net_out: &SphereNet,
    net_in: &SphereNet,
    potential: &PotentialField,
    method: SandwichMethod,
) -> Result<SandwichOperator> {
    let grid = potential.grid;
    if net_out.d != grid.d || net_in.d != grid.d {
        return Err(invalid("net", "net dimension differs from grid dimension"));
    }
    if let Some(r) = potential.support_radius {
        if 2.0 * r > grid.l {
            return Err(Error::BoxTooSmall { l: grid.l, r });
        }
    }
    let hermitian = net_out == net_in && is_real(potential);
    let method = match method {
        SandwichMethod::Auto => {
            let (a, b) = sandwich_costs(net_out.len(), net_in.len(), potential);
            if a <= b {
                SandwichMethod::Direct
            } else {
                SandwichMethod::Spectral
            }
        }
        m => m,
    };
    let info = support_info(potential);
    let cv = grid.cell_volume();
    let (no, ni) = (net_out.len(), net_in.len());
    let mut matrix = if info.nodes.is_empty() {
        Mat::zeros(no, ni)
    } else {
        match method {
            SandwichMethod::Direct => {
                let pts: Vec<[f64; 3]> = info.nodes.iter().map(|&i| grid.node(i)).collect();
                let e_out = Mat::from_fn(pts.len(), no, |i, j| {
                    Complex64::from_polar(1.0, 2.0 * PI * dot(pts[i], net_out.nodes[j]))
                });
                let dv: Vec<Complex64> = info.nodes.iter().map(|&i| potential.values[i] * cv).collect();
                let e_in = Mat::from_fn(pts.len(), ni, |i, j| {
                    dv[i] * Complex64::from_polar(1.0, 2.0 * PI * dot(pts[i], net_in.nodes[j]))
                });
                e_out.adjoint() * &e_in
            }
            _ => {
                let coeffs: Vec<([i64; 3], Complex64)> = info
                    .nodes
                    .iter()
                    .map(|&i| (grid.signed_multi(i), potential.values[i] * cv))
                    .collect();
                let plan = Nufft2::new(grid.d, spectral_modes(potential, info.kmax), &coeffs);
                let s = grid.spacing();
                let cols: Vec<Vec<Complex64>> = (0..ni)
                    .into_par_iter()
                    .map(|j| {
                        let nu = net_in.nodes[j];
                        (0..no)
                            .map(|i| {
                                let mu = net_out.nodes[i];
                                let t = [
                                    2.0 * PI * s * (nu[0] - mu[0]),
                                    2.0 * PI * s * (nu[1] - mu[1]),
                                    2.0 * PI * s * (nu[2] - mu[2]),
                                ];
                                plan.eval(t)
                            })
                            .collect()
                    })
                    .collect();
                Mat::from_fn(no, ni, |i, j| cols[j][i])
            }
        }
    };
    for j in 0..ni {
        for i in 0..no {
            matrix[(i, j)] *= (net_out.weights[i] * net_in.weights[j]).sqrt();
        }
    }
    Ok(SandwichOperator {
        net_out: net_out.clone(),
        net_in: net_in.clone(),
        matrix,
        hermitian,
        method,
    })
}

/// `sum_n s_n^p)^{1/p}`.
pub fn schatten_norm(svals: &[f64], p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(invalid("p", format!("{p} < 1")));
    }
    Ok(svals.iter().map(|s| s.powf(p)).sum::<f64>().powf(1.0 / p))
}

/// `sup_m s_m m^{1/p}` with 1-based `m`.
pub fn weak_schatten(svals: &[f64], p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(invalid("p", format!("{p} < 1")));
    }
    Ok(svals
        .iter()
        .enumerate()
        .map(|(m, s)| s * ((m + 1) as f64).powf(1.0 / p))
        .fold(0.0, f64::max))
}

/// Exponents of the weak Schatten class `S^{(d-1)/nu, infinity}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchattenParams {
    pub p: f64,
    pub weak: bool,
    pub nu: f64,
    pub eps: f64,
}

impl SchattenParams {
    pub fn from_nu(d: usize, nu: f64, eps: f64) -> Result<Self> {
        if !(nu > 0.0 && nu <= (d - 1) as f64) {
            return Err(invalid("nu", format!("{nu} outside (0, {}]", d - 1)));
        }
        if !(eps > 0.0) {
            return Err(invalid("eps", "must be positive"));
        }
        Ok(SchattenParams {
            p: (d - 1) as f64 / nu,
            weak: true,
            nu,
            eps,
        })
    }
}

/// `<-Delta_M>^{nu/4}` at angular mode `k` on the circle of radius `lambda`.
pub fn beltrami_weight(k: i64, lambda: f64, nu: f64) -> f64 {
    (2.0 + (k as f64 / lambda).powi(2)).powf(nu / 4.0)
}

/// Circulant `U W U*` in the node basis of an equispaced circle net.
fn beltrami_circulant(net: &SphereNet, nu: f64) -> ComplexMatrix {
    let n = net.len();
    let kernel: Vec<Complex64> = (0..n)
        .map(|m| {
            let mut acc = Complex64::default();
            for k in 0..n {
                let ks = if k < n / 2 { k as i64 } else { k as i64 - n as i64 };
                acc += Complex64::from_polar(
                    beltrami_weight(ks, net.lambda, nu),
                    2.0 * PI * (ks * m as i64) as f64 / n as f64,
                );
            }
            acc / n as f64
        })
        .collect();
    Mat::from_fn(n, n, |i, j| kernel[(i + n - j) % n])
}

/// Conjugates the sandwich by `<-Delta_M>^{nu/4}` (circle nets only).
pub fn beltrami_weighted_sandwich(
    net: &SphereNet,
    potential: &PotentialField,
    nu: f64,
) -> Result<SandwichOperator> {
    if net.d != 2 {
        return Err(invalid("d", "Laplace-Beltrami weighting is implemented for d = 2 only"));
    }
    beltrami_conjugate(net, sandwich(net, net, potential)?, nu)
}

/// Applies the weighting to an already assembled circle-net sandwich.
pub fn beltrami_conjugate(
    net: &SphereNet,
    plain: SandwichOperator,
    nu: f64,
) -> Result<SandwichOperator> {
    if net.d != 2 {
        return Err(invalid("d", "Laplace-Beltrami weighting is implemented for d = 2 only"));
    }
    if nu == 0.0 {
        return Ok(plain);
    }
    let b = beltrami_circulant(net, nu);
    let matrix = &b * &plain.matrix * &b;
    Ok(SandwichOperator { matrix, ..plain })
}

/// Norms of the extension from a net into `L^2` of the support of an indicator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtensionNorm {
    /// Coefficients in plain `l^2(net)`: `c -> sum_xi c_xi e(x.xi)`.
    pub unweighted: f64,
    /// Coefficients in `l^2(net, w)`: `g -> sum_xi g_xi w_xi e(x.xi)`.
    pub weighted: f64,
}

/// `||E||` into `L^2(supp)` for an indicator potential, via the Gram matrix.
pub fn extension_norm(net: &SphereNet, indicator: &PotentialField) -> Result<ExtensionNorm> {
    let s = sandwich(net, net, indicator)?;
    let weighted = hermitian_eigenvalues(&s.matrix)?
        .last()
        .copied()
        .unwrap_or(0.0)
        .max(0.0)
        .sqrt();
    let n = net.len();
    let g = Mat::from_fn(n, n, |i, j| {
        s.matrix[(i, j)] / (net.weights[i] * net.weights[j]).sqrt()
    });
    let unweighted = hermitian_eigenvalues(&g)?
        .last()
        .copied()
        .unwrap_or(0.0)
        .max(0.0)
        .sqrt();
    Ok(ExtensionNorm {
        unweighted,
        weighted,
    })
}
