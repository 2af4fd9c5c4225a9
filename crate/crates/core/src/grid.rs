//! Periodic spectral grids on the box `[-L/2, L/2)^d`.
//!
//! Nodes sit at `x = L k / N` (identified with their minimal periodic image),
//! dual frequencies at `xi = m / L` with `m` in `[-N/2, N/2)`. Arrays are
//! stored row-major with the last axis fastest. The forward transform is the
//! unnormalized `sum_x f(x) e^{-2 pi i x.xi}`; the inverse carries `1/N^d`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of a periodic grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Dimension, 1 to 3.
    pub d: usize,
    /// Box side length.
    pub l: f64,
    /// Points per axis, a power of two, at least 4.
    pub n: usize,
}

impl GridSpec {
    pub fn new(d: usize, l: f64, n: usize) -> Self {
        GridSpec { d, l, n }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.d) {
            return Err(Error::InvalidGrid(format!("d = {} not in {{1,2,3}}", self.d)));
        }
        if self.n < 4 || !self.n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "N = {} must be a power of two >= 4",
                self.n
            )));
        }
        if !(self.l > 0.0 && self.l.is_finite()) {
            return Err(Error::InvalidGrid(format!("L = {} must be positive", self.l)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn spacing(&self) -> f64 {
        self.l / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.d as i32)
    }

    /// Signed index in `[-N/2, N/2)` for an FFT-ordered index.
    #[inline]
    pub fn signed(&self, k: usize) -> i64 {
        if k < self.n / 2 {
            k as i64
        } else {
            k as i64 - self.n as i64
        }
    }

    /// Multi-index of a flat index (unused axes are zero).
    #[inline]
    pub fn unflatten(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        for a in (0..self.d).rev() {
            out[a] = idx % self.n;
            idx /= self.n;
        }
        out
    }

    /// Flat index of a (possibly negative, wrapped) multi-index.
    #[inline]
    pub fn flatten_wrapped(&self, k: [i64; 3]) -> usize {
        let n = self.n as i64;
        let mut idx = 0usize;
        for a in 0..self.d {
            idx = idx * self.n + k[a].rem_euclid(n) as usize;
        }
        idx
    }

    /// Signed integer coordinates of a node.
    #[inline]
    pub fn signed_multi(&self, idx: usize) -> [i64; 3] {
        let k = self.unflatten(idx);
        let mut out = [0i64; 3];
        for a in 0..self.d {
            out[a] = self.signed(k[a]);
        }
        out
    }

    /// Node position (minimal image).
    #[inline]
    pub fn node(&self, idx: usize) -> [f64; 3] {
        let s = self.spacing();
        let k = self.signed_multi(idx);
        [k[0] as f64 * s, k[1] as f64 * s, k[2] as f64 * s]
    }

    /// Dual frequency `m / L` at a flat index.
    #[inline]
    pub fn frequency(&self, idx: usize) -> [f64; 3] {
        let k = self.signed_multi(idx);
        [
            k[0] as f64 / self.l,
            k[1] as f64 / self.l,
            k[2] as f64 / self.l,
        ]
    }

    /// `|2 pi xi|^2` at a flat index.
    #[inline]
    pub fn laplacian_value(&self, idx: usize) -> f64 {
        let xi = self.frequency(idx);
        let tp = 2.0 * std::f64::consts::PI;
        (0..self.d).map(|a| (tp * xi[a]).powi(2)).sum()
    }
}

/// Values of a Fourier multiplier on the dual lattice, FFT-ordered.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencySymbol {
    pub values: Vec<Complex64>,
}

impl FrequencySymbol {
    pub fn constant(grid: &Grid, c: Complex64) -> Self {
        FrequencySymbol {
            values: vec![c; grid.len()],
        }
    }

    pub fn from_real(values: Vec<f64>) -> Self {
        FrequencySymbol {
            values: values.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
        }
    }

    /// Pointwise product.
    pub fn compose(&self, other: &FrequencySymbol) -> FrequencySymbol {
        FrequencySymbol {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }
}

/// A grid together with its transform plans. Cheap to clone.
#[derive(Clone)]
pub struct Grid {
    spec: GridSpec,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid").field("spec", &self.spec).finish()
    }
}

impl std::ops::Deref for Grid {
    type Target = GridSpec;
    fn deref(&self) -> &GridSpec {
        &self.spec
    }
}

/// Validates the grid parameters and plans the transforms.
pub fn build_grid(spec: GridSpec) -> Result<Grid> {
    spec.validate()?;
    let mut planner = FftPlanner::new();
    Ok(Grid {
        spec,
        fwd: planner.plan_fft_forward(spec.n),
        inv: planner.plan_fft_inverse(spec.n),
    })
}

impl Grid {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.spec.n;
        let d = self.spec.d;
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        // last axis: contiguous lines
        fft.process_with_scratch(data, &mut scratch);
        let mut line = vec![Complex64::default(); n];
        for axis in 0..d.saturating_sub(1) {
            let stride = n.pow((d - 1 - axis) as u32);
            let block = stride * n;
            for base in (0..data.len()).step_by(block) {
                for inner in 0..stride {
                    let start = base + inner;
                    for (j, v) in line.iter_mut().enumerate() {
                        *v = data[start + j * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (j, v) in line.iter().enumerate() {
                        data[start + j * stride] = *v;
                    }
                }
            }
        }
    }

    /// Unnormalized forward DFT in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.fwd);
    }

    /// Inverse DFT in place, scaled by `1/N^d`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inv);
        let s = 1.0 / data.len() as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    pub fn laplacian_symbol(&self) -> FrequencySymbol {
        FrequencySymbol::from_real((0..self.len()).map(|i| self.laplacian_value(i)).collect())
    }

    fn check_shape(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::ShapeMismatch {
                expected: self.len(),
                got: len,
            });
        }
        Ok(())
    }

    /// `IDFT(symbol * DFT(field))`.
    pub fn apply_multiplier(
        &self,
        symbol: &FrequencySymbol,
        field: &[Complex64],
    ) -> Result<Vec<Complex64>> {
        self.check_shape(field.len())?;
        self.check_shape(symbol.values.len())?;
        let mut out = field.to_vec();
        self.apply_multiplier_in_place(symbol, &mut out);
        Ok(out)
    }

    /// In-place variant; shapes are the caller's responsibility.
    pub fn apply_multiplier_in_place(&self, symbol: &FrequencySymbol, data: &mut [Complex64]) {
        self.forward(data);
        for (v, s) in data.iter_mut().zip(&symbol.values) {
            *v *= s;
        }
        self.inverse(data);
    }

    /// `1/(|2 pi xi|^2 - z)` on the dual lattice.
    pub fn resolvent_symbol(&self, z: Complex64) -> Result<FrequencySymbol> {
        let tol = 1e-12 * z.norm().max(1.0);
        let mut values = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let den = Complex64::new(self.laplacian_value(i), 0.0) - z;
            if den.norm() <= tol {
                return Err(Error::SingularSymbol { re: z.re, im: z.im });
            }
            values.push(den.inv());
        }
        Ok(FrequencySymbol { values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pseudo_field(len: usize, seed: u64) -> Vec<Complex64> {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        (0..len)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let a = (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let b = (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
                c(a, b)
            })
            .collect()
    }

    #[test]
    fn dual_lattice_1d() {
        let g = build_grid(GridSpec::new(1, 2.0 * PI, 8)).unwrap();
        let mut f: Vec<f64> = (0..8).map(|i| g.frequency(i)[0]).collect();
        f.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (k, v) in f.iter().enumerate() {
            assert_eq!(*v, (k as i64 - 4) as f64 / (2.0 * PI));
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(build_grid(GridSpec::new(1, 1.0, 12)).is_err());
        assert!(build_grid(GridSpec::new(1, 1.0, 2)).is_err());
        assert!(build_grid(GridSpec::new(4, 1.0, 8)).is_err());
        assert!(build_grid(GridSpec::new(0, 1.0, 8)).is_err());
        assert!(build_grid(GridSpec::new(2, -1.0, 8)).is_err());
    }

    #[test]
    fn roundtrip_and_parseval() {
        for d in 1..=3 {
            let g = build_grid(GridSpec::new(d, 3.0, 16)).unwrap();
            let f = pseudo_field(g.len(), d as u64);
            let mut h = f.clone();
            g.forward(&mut h);
            let e_f: f64 = f.iter().map(|v| v.norm_sqr()).sum();
            let e_h: f64 = h.iter().map(|v| v.norm_sqr()).sum::<f64>() / g.len() as f64;
            assert!((e_f - e_h).abs() <= 1e-12 * e_f);
            g.inverse(&mut h);
            let err = f.iter().zip(&h).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err < 1e-12, "d={d} err={err}");
        }
    }

    #[test]
    fn laplacian_zero_frequency() {
        let g = build_grid(GridSpec::new(2, 5.0, 8)).unwrap();
        assert_eq!(g.laplacian_symbol().values[0], c(0.0, 0.0));
    }

    #[test]
    fn identity_multiplier() {
        let g = build_grid(GridSpec::new(2, 5.0, 8)).unwrap();
        let f = pseudo_field(g.len(), 3);
        let out = g
            .apply_multiplier(&FrequencySymbol::constant(&g, c(1.0, 0.0)), &f)
            .unwrap();
        let err = f.iter().zip(&out).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-14);
    }

    #[test]
    fn plane_wave_is_eigenfunction() {
        let g = build_grid(GridSpec::new(2, 4.0, 16)).unwrap();
        let m = [3i64, -2];
        let wave: Vec<Complex64> = (0..g.len())
            .map(|i| {
                let x = g.node(i);
                let ph = 2.0 * PI * (m[0] as f64 * x[0] + m[1] as f64 * x[1]) / g.l;
                Complex64::from_polar(1.0, ph)
            })
            .collect();
        let out = g.apply_multiplier(&g.laplacian_symbol(), &wave).unwrap();
        let ev = (2.0 * PI / g.l).powi(2) * (9.0 + 4.0);
        let err = wave
            .iter()
            .zip(&out)
            .map(|(w, o)| (w * ev - o).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-10 * ev);
    }

    #[test]
    fn shape_mismatch() {
        let g = build_grid(GridSpec::new(1, 4.0, 8)).unwrap();
        let s = g.laplacian_symbol();
        assert!(matches!(
            g.apply_multiplier(&s, &[c(0.0, 0.0); 4]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn resolvent_negative_real() {
        let g = build_grid(GridSpec::new(2, 6.0, 16)).unwrap();
        let s = g.resolvent_symbol(c(-1.0, 0.0)).unwrap();
        assert_eq!(s.values[0], c(1.0, 0.0));
        for v in &s.values {
            assert!(v.im == 0.0 && v.re > 0.0 && v.re <= 1.0);
        }
    }

    #[test]
    fn resolvent_peak_near_shell() {
        let g = build_grid(GridSpec::new(1, 10.0, 64)).unwrap();
        let z = c(1.0, 0.1) * c(1.0, 0.1);
        let s = g.resolvent_symbol(z).unwrap();
        let (imax, _) = s
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
            .unwrap();
        // frequency nearest to the shell |2 pi xi| = |z|^{1/2}
        let target = z.norm().sqrt();
        let best = (0..g.len())
            .min_by(|&a, &b| {
                let da = (g.laplacian_value(a).sqrt() - target).abs();
                let db = (g.laplacian_value(b).sqrt() - target).abs();
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        assert!((g.laplacian_value(imax) - g.laplacian_value(best)).abs() < 1e-12);
    }

    #[test]
    fn resolvent_singular() {
        let g = build_grid(GridSpec::new(1, 1.0, 8)).unwrap();
        assert!(matches!(
            g.resolvent_symbol(c(4.0 * PI * PI, 0.0)),
            Err(Error::SingularSymbol { .. })
        ));
    }

    #[test]
    fn resolvent_inverts_shifted_laplacian() {
        let g = build_grid(GridSpec::new(2, 6.0, 16)).unwrap();
        let z = c(0.7, 0.3);
        let f = pseudo_field(g.len(), 9);
        let lap = g.apply_multiplier(&g.laplacian_symbol(), &f).unwrap();
        let shifted: Vec<Complex64> = lap.iter().zip(&f).map(|(a, b)| a - z * b).collect();
        let back = g.apply_multiplier(&g.resolvent_symbol(z).unwrap(), &shifted).unwrap();
        let num: f64 = back.iter().zip(&f).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let den: f64 = f.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(num / den < 1e-10);
    }
}
