//! Type-2 nonuniform FFT by Gaussian gridding.
//!
//! Evaluates `F(t) = sum_k f_k e^{i k.t}` for modes `k` in `[-M/2, M/2)^d` at
//! arbitrary `t`. Coefficients are deconvolved by the Gaussian's Fourier
//! transform, transformed on an oversampled grid, and interpolated back with
//! a truncated periodic Gaussian using the fast exponential recurrence.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Half-width of the interpolation stencil.
pub const SPREAD: usize = 12;

/// Smallest `2^a 3^b 5^c` not below `n`.
pub fn smooth_size(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Oversampled, deconvolved coefficient grid ready for interpolation.
pub struct Nufft2 {
    d: usize,
    fine: usize,
    tau: f64,
    data: Vec<Complex64>,
    /// `exp(-(2 pi l / fine)^2 / (4 tau))` for `l = 0..=SPREAD`.
    tail: Vec<f64>,
}

impl Nufft2 {
    /// `coeffs` holds `(k, f_k)` with every `|k_a| < modes / 2`.
    pub fn new(d: usize, modes: usize, coeffs: &[([i64; 3], Complex64)]) -> Self {
        let modes = modes.max(2);
        let fine = smooth_size(2 * modes);
        let sigma = fine as f64 / modes as f64;
        let tau = PI * SPREAD as f64 / ((modes * modes) as f64 * sigma * (sigma - 0.5));
        let mut data = vec![Complex64::default(); fine.pow(d as u32)];
        let deconv = |k: i64| (PI / tau).sqrt() * ((k * k) as f64 * tau).exp();
        for &(k, f) in coeffs {
            let mut idx = 0usize;
            let mut scale = 1.0;
            for a in 0..d {
                idx = idx * fine + k[a].rem_euclid(fine as i64) as usize;
                scale *= deconv(k[a]);
            }
            data[idx] += f * scale;
        }
        let fft = FftPlanner::new().plan_fft_inverse(fine);
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(&mut data, &mut scratch);
        let mut line = vec![Complex64::default(); fine];
        for axis in 0..d.saturating_sub(1) {
            let stride = fine.pow((d - 1 - axis) as u32);
            let block = stride * fine;
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
        let h = 2.0 * PI / fine as f64;
        let tail = (0..=SPREAD)
            .map(|l| (-(h * l as f64).powi(2) / (4.0 * tau)).exp())
            .collect();
        Nufft2 {
            d,
            fine,
            tau,
            data,
            tail,
        }
    }

    pub fn fine_size(&self) -> usize {
        self.fine
    }

    /// Stencil start index and the `2 SPREAD + 1` Gaussian weights along one axis.
    fn axis_weights(&self, t: f64, w: &mut [f64; 2 * SPREAD + 1]) -> i64 {
        let h = 2.0 * PI / self.fine as f64;
        let j0 = (t / h).round();
        let delta = t - j0 * h;
        let base = (-delta * delta / (4.0 * self.tau)).exp();
        let q = (delta * h / (2.0 * self.tau)).exp();
        let s = SPREAD;
        w[s] = base;
        let (mut up, mut down) = (base, base);
        for l in 1..=s {
            up *= q;
            down /= q;
            // offset j = j0 + l has distance delta - l h
            w[s + l] = up * self.tail[l];
            w[s - l] = down * self.tail[l];
        }
        j0 as i64 - s as i64
    }

    /// `F(t)`.
    pub fn eval(&self, t: [f64; 3]) -> Complex64 {
        let m = self.fine as i64;
        let width = 2 * SPREAD + 1;
        let mut w = [[0.0f64; 2 * SPREAD + 1]; 3];
        let mut start = [0i64; 3];
        for a in 0..self.d {
            start[a] = self.axis_weights(t[a], &mut w[a]);
        }
        let wrap = |j: i64| j.rem_euclid(m) as usize;
        let fine = self.fine;
        let total = match self.d {
            1 => {
                let mut acc = Complex64::default();
                for l in 0..width {
                    acc += self.data[wrap(start[0] + l as i64)] * w[0][l];
                }
                acc
            }
            2 => {
                let mut acc = Complex64::default();
                let cols: Vec<usize> = (0..width).map(|l| wrap(start[1] + l as i64)).collect();
                for lx in 0..width {
                    let row = wrap(start[0] + lx as i64) * fine;
                    let mut inner = Complex64::default();
                    for ly in 0..width {
                        inner += self.data[row + cols[ly]] * w[1][ly];
                    }
                    acc += inner * w[0][lx];
                }
                acc
            }
            _ => {
                let mut acc = Complex64::default();
                let zs: Vec<usize> = (0..width).map(|l| wrap(start[2] + l as i64)).collect();
                for lx in 0..width {
                    let px = wrap(start[0] + lx as i64) * fine;
                    let mut ax = Complex64::default();
                    for ly in 0..width {
                        let py = (px + wrap(start[1] + ly as i64)) * fine;
                        let mut ay = Complex64::default();
                        for lz in 0..width {
                            ay += self.data[py + zs[lz]] * w[2][lz];
                        }
                        ax += ay * w[1][ly];
                    }
                    acc += ax * w[0][lx];
                }
                acc
            }
        };
        total / (fine as f64).powi(self.d as i32)
    }
}
