use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{frozen, BoundId, BoundReport, SeedInfo};
use crate::error::{invalid, Error, Result};
use crate::extension::weak_schatten;
use crate::potential::PotentialField;
use crate::randomize::OmegaSpec;
use crate::special::{bracket, log_bracket};
use crate::spectra::{delta_power_sum, SpectralPoint};

fn max_power(points: &[SpectralPoint], e: f64) -> f64 {
    points.iter().map(|p| p.z.norm().powf(e)).fold(0.0, f64::max)
}

/// `max |z|^{1/2} <= (1/2) ||V||_1` in one dimension.
pub fn check_aad_1d(points: &[SpectralPoint], potential: &PotentialField) -> Result<BoundReport> {
    if potential.grid.d != 1 {
        return Err(invalid("d", "the one-dimensional bound needs d = 1"));
    }
    let lhs = max_power(points, 0.5);
    let rhs = 0.5 * potential.lq_norm(1.0)?;
    Ok(BoundReport::new(
        BoundId::Aad1d,
        lhs,
        rhs,
        1.0,
        1.0,
        points.is_empty(),
        json!({ "eigenvalues": points.len(), "l1_norm": 2.0 * rhs }),
    ))
}

/// Raw ratio `max |z|^{q-d/2} / ||V||_q^q` used for calibration.
pub fn klt_ratio(points: &[SpectralPoint], potential: &PotentialField, q: f64) -> Result<f64> {
    let d = potential.grid.d as f64;
    let rhs = potential.lq_norm(q)?.powf(q);
    Ok(if rhs == 0.0 { 0.0 } else { max_power(points, q - d / 2.0) / rhs })
}

fn klt_window(d: usize, q: f64) -> Result<()> {
    let d = d as f64;
    if q < d / 2.0 - 1e-12 || q > (d + 1.0) / 2.0 + 1e-12 {
        return Err(invalid("q", format!("{q} outside [{}, {}]", d / 2.0, (d + 1.0) / 2.0)));
    }
    Ok(())
}

/// `max |z|^{q-d/2} <= C ||V||_q^q` under the frozen constant for `(d, q)`.
pub fn check_klt_det(
    points: &[SpectralPoint],
    potential: &PotentialField,
    q: f64,
) -> Result<BoundReport> {
    klt_window(potential.grid.d, q)?;
    let c = frozen(BoundId::KltDet, potential.grid.d, Some(q), None, None)?;
    check_klt_det_with(points, potential, q, c)
}

pub fn check_klt_det_with(
    points: &[SpectralPoint],
    potential: &PotentialField,
    q: f64,
    constant: f64,
) -> Result<BoundReport> {
    let d = potential.grid.d;
    klt_window(d, q)?;
    let lhs = max_power(points, q - d as f64 / 2.0);
    let rhs = potential.lq_norm(q)?.powf(q);
    Ok(BoundReport::new(
        BoundId::KltDet,
        lhs,
        rhs,
        constant,
        1.0,
        points.is_empty(),
        json!({ "q": q, "d": d, "eigenvalues": points.len() }),
    ))
}

/// Sector-filtered sum `sum_{|Im z| >= kappa Re z} m |z|^{q-d/2}`.
pub fn sector_sum(points: &[SpectralPoint], d: usize, q: f64, kappa: f64) -> f64 {
    points
        .iter()
        .filter(|p| p.z.im.abs() >= kappa * p.z.re)
        .map(|p| p.multiplicity as f64 * p.z.norm().powf(q - d as f64 / 2.0))
        .sum()
}

pub fn sector_rhs(potential: &PotentialField, q: f64, kappa: f64) -> Result<f64> {
    Ok((1.0 + 1.0 / kappa).powf(q) * potential.lq_norm(q)?.powf(q))
}

fn sector_pre(d: usize, q: f64, kappa: f64) -> Result<()> {
    if !(kappa > 0.0) {
        return Err(invalid("kappa", "must be positive"));
    }
    if q < d as f64 / 2.0 {
        return Err(invalid("q", "must be at least d/2"));
    }
    Ok(())
}

pub fn check_sector(
    points: &[SpectralPoint],
    potential: &PotentialField,
    q: f64,
    kappa: f64,
) -> Result<BoundReport> {
    let d = potential.grid.d;
    sector_pre(d, q, kappa)?;
    let c = frozen(BoundId::Sector, d, Some(q), Some(kappa), None)?;
    check_sector_with(points, potential, q, kappa, c)
}

pub fn check_sector_with(
    points: &[SpectralPoint],
    potential: &PotentialField,
    q: f64,
    kappa: f64,
    constant: f64,
) -> Result<BoundReport> {
    let d = potential.grid.d;
    sector_pre(d, q, kappa)?;
    let lhs = sector_sum(points, d, q, kappa);
    let in_sector = points.iter().filter(|p| p.z.im.abs() >= kappa * p.z.re).count();
    Ok(BoundReport::new(
        BoundId::Sector,
        lhs,
        sector_rhs(potential, q, kappa)?,
        constant,
        1.0,
        in_sector == 0,
        json!({ "q": q, "kappa": kappa, "d": d, "in_sector": in_sector }),
    ))
}

/// Which of the two randomized single-eigenvalue bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThmKind {
    /// Log factor `(ln <lambda R>)^{7/2}`.
    Support,
    /// Log factor `(ln <lambda h>)^2`.
    Cell,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThmParams {
    pub q: f64,
    /// Support radius (used by the support form).
    pub r: f64,
    /// Cell side.
    pub h: f64,
    /// Confidence parameter.
    pub m: f64,
    /// Admissible `|eps| / lambda`.
    pub eps_ratio: f64,
}

impl ThmParams {
    pub fn new(q: f64, r: f64, h: f64, m: f64) -> Self {
        ThmParams {
            q,
            r,
            h,
            m,
            eps_ratio: 0.05,
        }
    }
}

/// Points with `z = (lambda + i eps)^2`, `lambda > 0`, `|eps| <= ratio lambda`.
pub fn near_axis(points: &[SpectralPoint], eps_ratio: f64) -> Vec<SpectralPoint> {
    points
        .iter()
        .copied()
        .filter(|p| p.lambda > 0.0 && p.eps.abs() <= eps_ratio * p.lambda)
        .collect()
}

/// Per-eigenvalue left side `lambda^{2-d/q} / (<lambda h>^{d/2} L)`.
pub fn thm_lhs(kind: ThmKind, d: usize, p: &ThmParams, lambda: f64) -> f64 {
    let d = d as f64;
    let log = match kind {
        ThmKind::Support => log_bracket(lambda * p.r).powf(3.5),
        ThmKind::Cell => log_bracket(lambda * p.h).powi(2),
    };
    lambda.powf(2.0 - d / p.q) / (bracket(lambda * p.h).powf(d / 2.0) * log)
}

fn check_thm(
    kind: ThmKind,
    points: &[SpectralPoint],
    potential: &PotentialField,
    omega: Option<&OmegaSpec>,
    p: &ThmParams,
) -> Result<BoundReport> {
    let d = potential.grid.d;
    let df = d as f64;
    match kind {
        ThmKind::Support => {
            if potential.measured_radius() > p.r * (1.0 + 1e-9) {
                return Err(Error::SupportViolation(p.r));
            }
            if !(p.h < p.r) {
                return Err(invalid("h", "must be smaller than R"));
            }
            if !(p.q <= df + 1.0) {
                return Err(invalid("q", "must be at most d + 1"));
            }
        }
        ThmKind::Cell => {
            if !(p.q < df + 1.0) {
                return Err(invalid("q", "must be below d + 1"));
            }
        }
    }
    if !(p.q >= 1.0 && p.m > 0.0 && p.eps_ratio > 0.0) {
        return Err(invalid("thm", "need q >= 1, M > 0, eps/lambda > 0"));
    }
    let eligible = near_axis(points, p.eps_ratio);
    let lhs = eligible
        .iter()
        .map(|pt| thm_lhs(kind, d, p, pt.lambda))
        .fold(0.0, f64::max);
    let vq = potential.lq_norm(p.q)?;
    let id = match kind {
        ThmKind::Support => BoundId::Thm1,
        ThmKind::Cell => BoundId::Thm3,
    };
    Ok(BoundReport::new(
        id,
        lhs,
        p.m * vq,
        1.0,
        1.0,
        eligible.is_empty(),
        json!({
            "q": p.q, "R": p.r, "h": p.h, "M": p.m, "eps_ratio": p.eps_ratio,
            "eligible": eligible.len(), "lq_norm": vq,
        }),
    )
    .with_seed(omega.map(SeedInfo::from)))
}

/// `lambda^{2-d/q} / (<lambda h>^{d/2} (ln <lambda R>)^{7/2}) <= M ||V||_q`.
pub fn check_thm1(
    points: &[SpectralPoint],
    potential_det: &PotentialField,
    omega: Option<&OmegaSpec>,
    p: &ThmParams,
) -> Result<BoundReport> {
    check_thm(ThmKind::Support, points, potential_det, omega, p)
}

/// `lambda^{2-d/q} / (<lambda h>^{d/2} (ln <lambda h>)^2) <= M ||V||_q`.
pub fn check_thm3(
    points: &[SpectralPoint],
    potential: &PotentialField,
    omega: Option<&OmegaSpec>,
    p: &ThmParams,
) -> Result<BoundReport> {
    check_thm(ThmKind::Cell, points, potential, omega, p)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchattenCheckParams {
    pub lambda: f64,
    pub r: f64,
    pub h: f64,
    pub v_inf: f64,
}

/// `(lambda R)^{1/2+nu} sqrt(ln<lambda R>) <lambda h>^{d/2} (ln<lambda R> + ln<lambda h>)^2 lambda^{-d} ||V||_inf`.
pub fn schatten_rhs(d: usize, nu: f64, p: &SchattenCheckParams) -> f64 {
    let lr = p.lambda * p.r;
    let lh = p.lambda * p.h;
    lr.powf(0.5 + nu)
        * log_bracket(lr).sqrt()
        * bracket(lh).powf(d as f64 / 2.0)
        * (log_bracket(lr) + log_bracket(lh)).powi(2)
        * p.lambda.powf(-(d as f64))
        * p.v_inf
}

fn schatten_pre(d: usize, nu: f64) -> Result<()> {
    if d != 2 {
        return Err(invalid("d", "singular-value decay checks are implemented for d = 2"));
    }
    if !(nu > 0.0 && nu <= (d - 1) as f64) {
        return Err(invalid("nu", format!("{nu} outside (0, {}]", d - 1)));
    }
    Ok(())
}

pub fn check_schatten_decay(
    svals: &[f64],
    nu: f64,
    d: usize,
    params: &SchattenCheckParams,
) -> Result<BoundReport> {
    schatten_pre(d, nu)?;
    let c = frozen(BoundId::SchattenDecay, d, None, None, Some(nu))?;
    check_schatten_decay_with(svals, nu, d, params, c)
}

pub fn check_schatten_decay_with(
    svals: &[f64],
    nu: f64,
    d: usize,
    params: &SchattenCheckParams,
    constant: f64,
) -> Result<BoundReport> {
    schatten_pre(d, nu)?;
    let lhs = weak_schatten(svals, (d - 1) as f64 / nu)?;
    Ok(BoundReport::new(
        BoundId::SchattenDecay,
        lhs,
        schatten_rhs(d, nu, params),
        constant,
        1.0,
        false,
        json!({ "nu": nu, "d": d, "lambda": params.lambda, "R": params.r, "h": params.h,
                "v_inf": params.v_inf, "count": svals.len() }),
    ))
}

/// Window `R0^{-1/2} <= |z| <= h^{-1/2}`.
pub fn evsum_window(points: &[SpectralPoint], r0: f64, h: f64) -> Vec<SpectralPoint> {
    let (lo, hi) = (r0.powf(-0.5), h.powf(-0.5));
    points
        .iter()
        .copied()
        .filter(|p| {
            let a = p.z.norm();
            a >= lo && a <= hi
        })
        .collect()
}

/// `sum delta(z_j)` over the window against `c1 ||<x>^{1/2+3 eps} V||_inf^{c2}`.
pub fn check_evsum(
    points: &[SpectralPoint],
    potential: &PotentialField,
    eps: f64,
    r0: f64,
    h: f64,
) -> Result<BoundReport> {
    check_evsum_with(points, potential, eps, r0, h, (1.0, 1.0))
}

pub fn check_evsum_with(
    points: &[SpectralPoint],
    potential: &PotentialField,
    eps: f64,
    r0: f64,
    h: f64,
    (c1, c2): (f64, f64),
) -> Result<BoundReport> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(invalid("eps", "must lie in (0, 1/2)"));
    }
    if !(r0 > 0.0 && h > 0.0) {
        return Err(invalid("window", "R0 and h must be positive"));
    }
    let inside = evsum_window(points, r0, h);
    let lhs = delta_power_sum(&inside, 0.0);
    let rhs = potential.weighted_sup_norm(0.5 + 3.0 * eps);
    Ok(BoundReport::new(
        BoundId::Evsum,
        lhs,
        rhs,
        c1,
        c2,
        inside.is_empty(),
        json!({ "eps": eps, "R0": r0, "h": h, "in_window": inside.len() }),
    ))
}
