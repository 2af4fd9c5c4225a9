//! Reference computations shared by the oracle tests and the acceptance run.
#![allow(dead_code)]

use std::f64::consts::PI;

use faer::Mat;
use ltlab_core::*;
use rand_chacha::rand_core::RngCore;
use rand_chacha::ChaCha8Rng;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = uniform(rng).max(1e-300);
    let u2 = uniform(rng);
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

pub fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    Mat::from_fn(n, n, |_, _| c(gaussian(rng), gaussian(rng)))
}

/// Even ground state of `-u'' - v0 1_{[-a,a]} u = -kappa^2 u`: `k tan(k a) = kappa`.
pub fn square_well_kappa(v0: f64, a: f64) -> f64 {
    let f = |kappa: f64| {
        let k = (v0 - kappa * kappa).sqrt();
        k * (k * a).tan() - kappa
    };
    // ground state has k a in (0, pi/2)
    let kmax = v0.sqrt().min(PI / (2.0 * a) - 1e-12);
    let (mut lo, mut hi) = ((v0 - kmax * kmax).max(0.0).sqrt() + 1e-14, v0.sqrt() - 1e-14);
    if f(lo) > 0.0 {
        std::mem::swap(&mut lo, &mut hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Dense `A_{jk} = N^{-d} sum_m s(m) e(m.(j-k)/N)` for a radial real symbol on a small grid.
pub fn dense_from_symbol(g: &GridSpec, s: impl Fn(f64) -> f64) -> ComplexMatrix {
    let len = g.len();
    let n = g.n as i64;
    let modes: Vec<([i64; 3], f64)> = (0..len)
        .map(|i| {
            let mut k = [0i64; 3];
            let mut rem = i as i64;
            for a in (0..g.d).rev() {
                let m = rem % n;
                rem /= n;
                k[a] = if m >= n / 2 { m - n } else { m };
            }
            let lap: f64 = (0..g.d).map(|a| (2.0 * PI * k[a] as f64 / g.l).powi(2)).sum();
            (k, s(lap))
        })
        .collect();
    let pos = |i: usize| {
        let mut k = [0i64; 3];
        let mut rem = i as i64;
        for a in (0..g.d).rev() {
            k[a] = rem % n;
            rem /= n;
        }
        k
    };
    Mat::from_fn(len, len, |r, q| {
        let (a, b) = (pos(r), pos(q));
        let mut acc = c(0.0, 0.0);
        for (m, sv) in &modes {
            let ph: i64 = (0..g.d).map(|ax| m[ax] * (a[ax] - b[ax])).sum();
            acc += Complex64::from_polar(*sv, 2.0 * PI * ph as f64 / n as f64);
        }
        acc / len as f64
    })
}

/// Cyclic Jacobi on a real symmetric matrix stored row-major.
pub fn jacobi_eigenvalues(mut a: Vec<f64>, n: usize) -> Vec<f64> {
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j].powi(2))
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = cs * akp - sn * akq;
                    a[k * n + q] = sn * akp + cs * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = cs * apk - sn * aqk;
                    a[q * n + k] = sn * apk + cs * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}

/// `J_0` by its power series, accurate for the moderate arguments used here.
pub fn j0_series(x: f64) -> f64 {
    let q = -(x * x) / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-3) {
            break;
        }
    }
    sum
}

/// `H_i = inf {t > 0 : |{|V| > t}| <= 2^{i-1}}` by scanning candidate thresholds.
pub fn brute_threshold(mags: &[f64], cellvol: f64, i: i32) -> f64 {
    let mut cands: Vec<f64> = mags.iter().copied().filter(|&m| m > 0.0).collect();
    cands.push(0.0);
    cands.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cands.dedup();
    for t in cands {
        let measure = mags.iter().filter(|&&m| m > t).count() as f64 * cellvol;
        if measure <= 2f64.powi(i - 1) {
            return t;
        }
    }
    unreachable!()
}

/// `erfc` by its continued fraction (x >= 0).
pub fn erfc(x: f64) -> f64 {
    let mut f = 0.0;
    for k in (1..200).rev() {
        f = (k as f64 / 2.0) / (x + f);
    }
    (-x * x).exp() / PI.sqrt() / (x + f)
}

/// Adaptive Simpson quadrature.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rule(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
    }
    fn go(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (l, r) = (rule(f, a, m), rule(f, m, b));
        if depth == 0 || (l + r - whole).abs() < 15.0 * tol {
            return l + r + (l + r - whole) / 15.0;
        }
        go(f, a, m, l, tol / 2.0, depth - 1) + go(f, m, b, r, tol / 2.0, depth - 1)
    }
    go(f, a, b, rule(f, a, b), tol, 40)
}

