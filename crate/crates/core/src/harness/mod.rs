//! Bound checkers, Monte Carlo drivers and scaling fits.
//!
//! Every check produces a [`BoundReport`]: the left side, the right side with
//! constant one, the constant it is compared under, and the resulting margin
//! `lhs / (C rhs^e)`. Constants that are not explicit are fitted on a named
//! family and frozen in `data/constants.json`.

mod campaign;
mod checks;

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::randomize::{Distribution, OmegaSpec};

pub use campaign::*;
pub use checks::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BoundId {
    Aad1d,
    KltDet,
    Sector,
    Thm1,
    Thm3,
    PropExtnorm,
    SchattenDecay,
    Tail,
    Evsum,
}

impl std::str::FromStr for BoundId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| invalid("bound_id", format!("unknown bound `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedInfo {
    pub master_seed: u64,
    pub realization_index: u64,
    pub distribution: Distribution,
    pub h: f64,
}

impl From<&OmegaSpec> for SeedInfo {
    fn from(o: &OmegaSpec) -> Self {
        SeedInfo {
            master_seed: o.master_seed,
            realization_index: o.realization_index,
            distribution: o.distribution,
            h: o.h,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound_id: BoundId,
    pub lhs: f64,
    /// Right side with constant one.
    pub rhs_raw: f64,
    pub fitted_constant: f64,
    /// Power applied to `rhs_raw` before the constant (one unless fitted).
    pub fitted_exponent: f64,
    pub margin: f64,
    pub pass: bool,
    /// Nothing to check (no eligible eigenvalues).
    pub vacuous: bool,
    pub params: serde_json::Value,
    pub seed: Option<SeedInfo>,
}

impl BoundReport {
    pub fn new(
        bound_id: BoundId,
        lhs: f64,
        rhs_raw: f64,
        fitted_constant: f64,
        fitted_exponent: f64,
        vacuous: bool,
        params: serde_json::Value,
    ) -> Self {
        let denom = fitted_constant * rhs_raw.powf(fitted_exponent);
        let margin = if lhs == 0.0 {
            0.0
        } else if denom == 0.0 {
            f64::INFINITY
        } else {
            lhs / denom
        };
        BoundReport {
            bound_id,
            lhs,
            rhs_raw,
            fitted_constant,
            fitted_exponent,
            margin,
            pass: vacuous || margin <= 1.0,
            vacuous,
            params,
            seed: None,
        }
    }

    pub fn with_seed(mut self, seed: Option<SeedInfo>) -> Self {
        self.seed = seed;
        self
    }
}

/// Least-squares fit of `log y = exponent log x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn fit_scaling(x: &[f64], y: &[f64]) -> Result<ScalingFit> {
    if x.len() != y.len() {
        return Err(invalid("y", "length differs from x"));
    }
    if x.len() < 3 {
        return Err(invalid("x", "need at least 3 points"));
    }
    for (i, (a, b)) in x.iter().zip(y).enumerate() {
        if !(*a > 0.0 && *b > 0.0) {
            return Err(Error::NonPositive(i));
        }
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (exponent, intercept, r2) = linear_fit(&lx, &ly);
    Ok(ScalingFit {
        exponent,
        intercept,
        r2,
    })
}

/// Ordinary least squares `y = a x + b`; returns `(a, b, r^2)`.
pub(crate) fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let a = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    let b = my - a * mx;
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(y).map(|(u, v)| (v - a * u - b).powi(2)).sum();
    let r2 = if ss_tot <= 1e-300 {
        if ss_res <= 1e-300 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    };
    (a, b, r2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantEntry {
    pub bound: BoundId,
    pub d: usize,
    #[serde(default)]
    pub q: Option<f64>,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub nu: Option<f64>,
    pub value: f64,
    /// Name of the calibration family.
    pub family: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub version: u32,
    pub entries: Vec<ConstantEntry>,
}

impl Constants {
    pub fn lookup(
        &self,
        bound: BoundId,
        d: usize,
        q: Option<f64>,
        kappa: Option<f64>,
        nu: Option<f64>,
    ) -> Option<&ConstantEntry> {
        let same = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (None, None) => true,
            (Some(x), Some(y)) => (x - y).abs() < 1e-12,
            _ => false,
        };
        self.entries.iter().find(|e| {
            e.bound == bound && e.d == d && same(e.q, q) && same(e.kappa, kappa) && same(e.nu, nu)
        })
    }
}

/// The constants shipped with the crate.
pub fn frozen_constants() -> &'static Constants {
    static C: OnceLock<Constants> = OnceLock::new();
    C.get_or_init(|| {
        serde_json::from_str(include_str!("../../data/constants.json"))
            .expect("constants file is valid JSON")
    })
}

pub(crate) fn frozen(
    bound: BoundId,
    d: usize,
    q: Option<f64>,
    kappa: Option<f64>,
    nu: Option<f64>,
) -> Result<f64> {
    frozen_constants()
        .lookup(bound, d, q, kappa, nu)
        .map(|e| e.value)
        .ok_or_else(|| {
            invalid(
                "constants",
                format!("no frozen constant for {bound:?} d={d} q={q:?} kappa={kappa:?} nu={nu:?}"),
            )
        })
}
