use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::checks::{sector_rhs, sector_sum, thm_lhs, near_axis, evsum_window, check_evsum_with, ThmKind, ThmParams};
use super::{fit_scaling, linear_fit, BoundId, BoundReport, ScalingFit};
use crate::error::{invalid, Error, Result};
use crate::extension::{
    beltrami_conjugate, build_net_oversampled, sandwich_with, SandwichMethod, SphereNet,
};
use crate::grid::{build_grid, GridSpec};
use crate::potential::{sample_potential, PotentialField, PotentialSpec, Sampling};
use crate::randomize::{anderson_randomize, draw_omega, tail_table, Distribution, OmegaField, OmegaSpec, TailRow};
use crate::special::{bracket, log_bracket};
use crate::spectra::{delta_power_sum, filter_discrete, spectrum, SpectralPoint, SpectrumFilter};

/// Sample mean, standard error and tail fractions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McStats {
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
    pub tail: Vec<TailRow>,
}

/// Multiples of the mean at which tails are tabulated.
pub const TAIL_MULTIPLES: [f64; 3] = [1.25, 1.5, 2.0];

impl McStats {
    pub fn from_samples(samples: &[f64]) -> McStats {
        let n = samples.len();
        if n == 0 {
            return McStats {
                n,
                mean: 0.0,
                stderr: 0.0,
                tail: Vec::new(),
            };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        let thresholds: Vec<f64> = TAIL_MULTIPLES.iter().map(|m| m * mean).collect();
        let tail = tail_table(samples, &thresholds).unwrap_or_default();
        McStats {
            n,
            mean,
            stderr,
            tail,
        }
    }

    /// Means from fewer than 30 samples are not reported as estimates.
    pub fn reliable(&self) -> bool {
        self.n >= 30
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    /// Dimension of the grid and sphere (2 or 3).
    pub d: usize,
    /// Grid points per unit length (rounded up to a power of two per axis).
    pub points_per_unit: f64,
    /// Box side as a multiple of `R`.
    pub box_factor: f64,
    /// Net spacing is `1 / (R * net_oversampling)`.
    pub net_oversampling: f64,
    pub method: SandwichMethod,
    /// Use `omega = +1` for every realization.
    pub identity_omega: bool,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions {
            d: 2,
            points_per_unit: 4.0,
            box_factor: 4.0,
            net_oversampling: 1.0,
            method: SandwichMethod::Auto,
            identity_omega: false,
        }
    }
}

/// Box of side `box_factor R` with at least `points_per_unit` nodes per unit length.
pub fn campaign_grid(d: usize, r: f64, opts: &McOptions) -> GridSpec {
    let l = opts.box_factor * r;
    let n = ((l * opts.points_per_unit).ceil() as usize).next_power_of_two().max(4);
    GridSpec::new(d, l, n)
}

fn realize(
    field: &PotentialField,
    template: &OmegaSpec,
    index: u64,
    identity: bool,
) -> Result<PotentialField> {
    let spec = template.realization(index);
    let omega = if identity {
        OmegaField::constant(spec, &field.grid, 1.0)?
    } else {
        draw_omega(&spec, &field.grid)?
    };
    anderson_randomize(field, &omega)
}

/// `||E* V_omega E||` for the given realization indices, in index order.
pub fn extension_norm_samples(
    field: &PotentialField,
    net: &SphereNet,
    template: &OmegaSpec,
    indices: &[u64],
    opts: &McOptions,
) -> Result<Vec<f64>> {
    indices
        .par_iter()
        .map(|&r| {
            let v = realize(field, template, r, opts.identity_omega)?;
            sandwich_with(net, net, &v, opts.method)?.norm()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McRun {
    pub r: f64,
    pub grid: GridSpec,
    pub net_size: usize,
    pub stats: McStats,
    /// `||E* |V| E||`.
    pub deterministic_norm: f64,
    pub samples: Vec<f64>,
}

/// Potential with support/scale radius `r`.
pub fn with_radius(spec: &PotentialSpec, r: f64) -> PotentialSpec {
    PotentialSpec {
        radius: r,
        ..spec.clone()
    }
}

/// One row of the random-versus-deterministic scaling study.
pub fn extension_norm_run(
    spec: &PotentialSpec,
    template: &OmegaSpec,
    lambda: f64,
    r: f64,
    n_samples: usize,
    opts: &McOptions,
) -> Result<McRun> {
    let d = opts.d;
    let grid = campaign_grid(d, r, opts);
    let field = sample_potential(&with_radius(spec, r), &grid)?;
    let net = build_net_oversampled(lambda, r, d, opts.net_oversampling)?;
    let deterministic_norm = sandwich_with(&net, &net, &field.abs(), opts.method)?.norm()?;
    let start = template.realization_index;
    let indices: Vec<u64> = (start..start + n_samples as u64).collect();
    let samples = extension_norm_samples(&field, &net, template, &indices, opts)?;
    Ok(McRun {
        r,
        grid,
        net_size: net.len(),
        stats: McStats::from_samples(&samples),
        deterministic_norm,
        samples,
    })
}

/// Monte Carlo mean of the sandwich norm for every `R`; needs at least 100 samples.
pub fn mc_extension_norm(
    spec: &PotentialSpec,
    template: &OmegaSpec,
    lambda: f64,
    r_list: &[f64],
    n_samples: usize,
    opts: &McOptions,
) -> Result<Vec<McRun>> {
    if n_samples < 100 {
        return Err(Error::InsufficientSamples {
            needed: 100,
            got: n_samples,
        });
    }
    r_list
        .iter()
        .map(|&r| extension_norm_run(spec, template, lambda, r, n_samples, opts))
        .collect()
}

/// `R^{1/2} <h>^{d/2} (ln <R>)^{5/2} ||V||_inf`.
pub fn prop_extnorm_rhs(d: usize, r: f64, h: f64, v_inf: f64) -> f64 {
    r.sqrt() * bracket(h).powf(d as f64 / 2.0) * log_bracket(r).powf(2.5) * v_inf
}

pub fn check_prop_extnorm(run: &McRun, h: f64, v_inf: f64, constant: f64) -> BoundReport {
    let d = run.grid.d;
    BoundReport::new(
        BoundId::PropExtnorm,
        run.stats.mean,
        prop_extnorm_rhs(d, run.r, h, v_inf),
        constant,
        1.0,
        run.stats.n == 0,
        json!({ "R": run.r, "h": h, "n": run.stats.n, "stderr": run.stats.stderr,
                "deterministic_norm": run.deterministic_norm }),
    )
}

/// Empirical exceedance of `M * mean` and the exponential fit in `M^2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailStudy {
    pub mean: f64,
    pub rows: Vec<TailRow>,
    pub multiples: Vec<f64>,
    /// Fractions nonincreasing in `M`.
    pub monotone: bool,
    /// Slope of `ln(fraction)` against `M^2`, when every fraction is positive.
    pub slope: Option<f64>,
    /// `-slope`.
    pub c: Option<f64>,
}

pub fn tail_study(samples: &[f64], multiples: &[f64]) -> Result<TailStudy> {
    let mean = samples.iter().sum::<f64>() / samples.len().max(1) as f64;
    let thresholds: Vec<f64> = multiples.iter().map(|m| m * mean).collect();
    let rows = tail_table(samples, &thresholds)?;
    let monotone = rows.windows(2).all(|w| w[1].fraction <= w[0].fraction);
    let (slope, c) = if rows.iter().all(|r| r.fraction > 0.0) && rows.len() >= 2 {
        let x: Vec<f64> = multiples.iter().map(|m| m * m).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.fraction.ln()).collect();
        let (a, _, _) = linear_fit(&x, &y);
        (Some(a), Some(-a))
    } else {
        (None, None)
    };
    Ok(TailStudy {
        mean,
        rows,
        multiples: multiples.to_vec(),
        monotone,
        slope,
        c,
    })
}

/// Tail report at one multiple: `P(X > M E X)` against `exp(-c M^2)`.
pub fn check_tail(study: &TailStudy, index: usize) -> BoundReport {
    let m = study.multiples[index];
    let row = study.rows[index];
    let c = study.c.unwrap_or(0.0);
    BoundReport::new(
        BoundId::Tail,
        row.fraction,
        (-c * m * m).exp(),
        1.0,
        1.0,
        false,
        json!({ "M": m, "mean": study.mean, "count": row.count, "wilson": [row.wilson_lo, row.wilson_hi],
                "c": study.c, "monotone": study.monotone }),
    )
}

/// Failure fractions of a randomized single-eigenvalue bound over realizations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThmCampaign {
    pub kind: ThmKind,
    /// Per realization: `max lhs / ||V||_q` (the smallest passing `M`), zero if vacuous.
    pub critical: Vec<f64>,
    pub m_values: Vec<f64>,
    pub fractions: Vec<f64>,
    pub monotone: bool,
    pub fitted_c: Option<f64>,
}

pub fn thm_campaign(
    grid: &GridSpec,
    potential: &PotentialField,
    template: &OmegaSpec,
    kind: ThmKind,
    params: &ThmParams,
    m_values: &[f64],
    n_realizations: usize,
    filter: &SpectrumFilter,
    identity: bool,
) -> Result<ThmCampaign> {
    let g = build_grid(*grid)?;
    let vq = potential.lq_norm(params.q)?;
    let start = template.realization_index;
    let critical: Vec<f64> = (start..start + n_realizations as u64)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let v = realize(potential, template, r, identity)?;
            let pts = filter_discrete(&spectrum(&g, &v)?, filter);
            let lhs = near_axis(&pts, params.eps_ratio)
                .iter()
                .map(|p| thm_lhs(kind, grid.d, params, p.lambda))
                .fold(0.0, f64::max);
            Ok(if vq == 0.0 { 0.0 } else { lhs / vq })
        })
        .collect::<Result<_>>()?;
    let n = critical.len().max(1) as f64;
    let fractions: Vec<f64> = m_values
        .iter()
        .map(|&m| critical.iter().filter(|&&c| c > m).count() as f64 / n)
        .collect();
    let monotone = fractions.windows(2).all(|w| w[1] <= w[0]);
    let pos: Vec<(f64, f64)> = m_values
        .iter()
        .zip(&fractions)
        .filter(|(_, f)| **f > 0.0)
        .map(|(m, f)| (m * m, f.ln()))
        .collect();
    let fitted_c = if pos.len() >= 2 {
        let (x, y): (Vec<f64>, Vec<f64>) = pos.into_iter().unzip();
        Some(-linear_fit(&x, &y).0)
    } else {
        None
    };
    Ok(ThmCampaign {
        kind,
        critical,
        m_values: m_values.to_vec(),
        fractions,
        monotone,
        fitted_c,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchattenOptions {
    pub lambda: f64,
    pub r: f64,
    pub h: f64,
    pub nu: f64,
    pub n_realizations: usize,
    pub distribution: Distribution,
    pub master_seed: u64,
    pub mc: McOptions,
}

/// Singular-value decay of the weighted sandwich for `V = 1_{B(R)}` over realizations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchattenRun {
    pub r: f64,
    pub net_size: usize,
    /// `sup_k s_k k^{nu/(d-1)}` of the weighted operator, per realization.
    pub lhs: Vec<f64>,
    pub median_lhs: f64,
    pub rhs_raw: f64,
    pub ratio: f64,
    /// Cut index `ceil(1.1 * 4 pi lambda R)` for the bandwidth test.
    pub band_index: usize,
    /// `ceil(2 pi lambda R)`.
    pub literal_index: usize,
    /// Worst `max_{m > band_index} s_m / s_1` of the plain sandwich over realizations.
    pub tail_ratio: f64,
    /// Same past `literal_index`.
    pub literal_tail_ratio: f64,
    /// Median first index (1-based) with `s_m < 1e-2 s_1`.
    pub drop_index: usize,
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn tail_max(s: &[f64], from: usize) -> f64 {
    if s.is_empty() || s[0] == 0.0 {
        return 0.0;
    }
    s.iter().skip(from).fold(0.0f64, |a, &b| a.max(b)) / s[0]
}

pub fn schatten_campaign(opts: &SchattenOptions) -> Result<SchattenRun> {
    let d = 2;
    let grid = campaign_grid(d, opts.r, &opts.mc);
    let field = sample_potential(
        &PotentialSpec::indicator_ball(Complex64::new(1.0, 0.0), opts.r),
        &grid,
    )?;
    let net = build_net_oversampled(opts.lambda, opts.r, d, opts.mc.net_oversampling)?;
    let template = OmegaSpec::new(opts.h, opts.distribution, opts.master_seed);
    let p = (d - 1) as f64 / opts.nu;
    let per: Vec<(f64, Vec<f64>)> = (0..opts.n_realizations as u64)
        .into_par_iter()
        .map(|r| -> Result<(f64, Vec<f64>)> {
            let v = realize(&field, &template, r, opts.mc.identity_omega)?;
            let plain = sandwich_with(&net, &net, &v, opts.mc.method)?;
            let s_plain = plain.singular_values()?;
            let weighted = beltrami_conjugate(&net, plain, opts.nu)?;
            let s_w = weighted.singular_values()?;
            Ok((crate::extension::weak_schatten(&s_w, p)?, s_plain))
        })
        .collect::<Result<_>>()?;
    let four = 4.0 * std::f64::consts::PI * opts.lambda * opts.r;
    let band_index = (1.1 * four).ceil() as usize;
    let literal_index = (2.0 * std::f64::consts::PI * opts.lambda * opts.r).ceil() as usize;
    let lhs: Vec<f64> = per.iter().map(|(a, _)| *a).collect();
    let tail_ratio = per.iter().map(|(_, s)| tail_max(s, band_index)).fold(0.0, f64::max);
    let literal_tail_ratio = per
        .iter()
        .map(|(_, s)| tail_max(s, literal_index))
        .fold(0.0, f64::max);
    let drops: Vec<f64> = per
        .iter()
        .map(|(_, s)| {
            s.iter()
                .position(|&x| x < 1e-2 * s[0])
                .map_or(s.len() + 1, |k| k + 1) as f64
        })
        .collect();
    let median_lhs = median(&lhs);
    let rhs_raw = super::checks::schatten_rhs(
        d,
        opts.nu,
        &super::checks::SchattenCheckParams {
            lambda: opts.lambda,
            r: opts.r,
            h: opts.h,
            v_inf: 1.0,
        },
    );
    Ok(SchattenRun {
        r: opts.r,
        net_size: net.len(),
        median_lhs,
        rhs_raw,
        ratio: median_lhs / rhs_raw,
        lhs,
        band_index,
        literal_index,
        tail_ratio,
        literal_tail_ratio,
        drop_index: median(&drops) as usize,
    })
}

/// Amplitude sweep for the eigenvalue-sum functional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvsumSweep {
    pub amplitudes: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub fit: ScalingFit,
    /// `c1` from the least-squares intercept.
    pub c1_fit: f64,
    /// Smallest `c1` with every sweep point under `c1 rhs^{c2}`.
    pub c1_envelope: f64,
    pub reports: Vec<BoundReport>,
    pub spectra: Vec<Vec<SpectralPoint>>,
}

#[allow(clippy::too_many_arguments)]
pub fn evsum_sweep(
    grid: &GridSpec,
    base: &PotentialSpec,
    amplitudes: &[f64],
    eps: f64,
    r0: f64,
    h: f64,
    filter: &SpectrumFilter,
) -> Result<EvsumSweep> {
    let g = build_grid(*grid)?;
    let mut fields = Vec::new();
    let mut spectra = Vec::new();
    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    for &a in amplitudes {
        let spec = PotentialSpec {
            amplitude: base.amplitude * a,
            ..base.clone()
        };
        let v = sample_potential(&spec, grid)?;
        let pts = filter_discrete(&spectrum(&g, &v)?, filter);
        lhs.push(delta_power_sum(&evsum_window(&pts, r0, h), 0.0));
        rhs.push(v.weighted_sup_norm(0.5 + 3.0 * eps));
        spectra.push(pts);
        fields.push(v);
    }
    let fit = fit_scaling(&rhs, &lhs)?;
    let c1_fit = fit.intercept.exp();
    let c1_envelope = lhs
        .iter()
        .zip(&rhs)
        .map(|(l, r)| l / r.powf(fit.exponent))
        .fold(0.0, f64::max);
    let reports = spectra
        .iter()
        .zip(&fields)
        .map(|(pts, v)| check_evsum_with(pts, v, eps, r0, h, (c1_envelope, fit.exponent)))
        .collect::<Result<_>>()?;
    Ok(EvsumSweep {
        amplitudes: amplitudes.to_vec(),
        lhs,
        rhs,
        fit,
        c1_fit,
        c1_envelope,
        reports,
        spectra,
    })
}

/// Named reference family used to freeze the eigenvalue-bound constants.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationFamily {
    pub name: &'static str,
    pub grid: GridSpec,
    pub specs: Vec<PotentialSpec>,
}

pub const CALIBRATION_AMPLITUDES: [f64; 4] = [1.0, 2.0, 4.0, 8.0];
pub const CALIBRATION_PHASES: [f64; 3] = [0.0, std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2];

/// `a e^{i theta} 1_{B(1)}` with `a` in {1,2,4,8}, `theta` in {0, pi/4, pi/2}.
pub fn calibration_family(d: usize) -> Result<CalibrationFamily> {
    let (name, grid, sampling) = match d {
        1 => ("complex_wells_d1_L32_N256", GridSpec::new(1, 32.0, 256), Sampling::CellAverage),
        2 => ("complex_disks_d2_L16_N32", GridSpec::new(2, 16.0, 32), Sampling::Point),
        _ => return Err(invalid("d", "calibration families exist for d = 1, 2")),
    };
    let mut specs = Vec::new();
    for &a in &CALIBRATION_AMPLITUDES {
        for &th in &CALIBRATION_PHASES {
            specs.push(
                PotentialSpec::indicator_ball(Complex64::from_polar(a, th), 1.0).with_sampling(sampling),
            );
        }
    }
    Ok(CalibrationFamily { name, grid, specs })
}

/// Filtered spectra of every family member.
pub fn family_spectra(family: &CalibrationFamily) -> Result<Vec<(PotentialField, Vec<SpectralPoint>)>> {
    let g = build_grid(family.grid)?;
    family
        .specs
        .iter()
        .map(|s| {
            let v = sample_potential(s, &family.grid)?;
            let filter = SpectrumFilter::for_grid(&family.grid).with_box_artifact_margin(&v);
            let pts = filter_discrete(&spectrum(&g, &v)?, &filter);
            Ok((v, pts))
        })
        .collect()
}

/// Rounds up to three significant digits.
pub fn round_up_3(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let e = x.log10().floor() as i32 - 2;
    let at = |k: f64| -> f64 { format!("{k}e{e}").parse().unwrap() };
    let k = (x / 10f64.powi(e)).ceil();
    // the quotient can overshoot an exact decimal by one ulp
    if at(k - 1.0) >= x {
        at(k - 1.0)
    } else {
        at(k)
    }
}

/// Largest `max|z|^{q-d/2} / ||V||_q^q` over the family, rounded up.
pub fn calibrate_klt(d: usize, q: f64) -> Result<f64> {
    let fam = calibration_family(d)?;
    let mut worst: f64 = 0.0;
    for (v, pts) in family_spectra(&fam)? {
        worst = worst.max(super::checks::klt_ratio(&pts, &v, q)?);
    }
    Ok(round_up_3(worst))
}

/// Largest `lhs / rhs_raw` over the realizations of a small weighted-sandwich run, rounded up.
pub fn calibrate_schatten(opts: &SchattenOptions) -> Result<f64> {
    let run = schatten_campaign(opts)?;
    Ok(round_up_3(
        run.lhs.iter().fold(0.0f64, |a, &b| a.max(b)) / run.rhs_raw,
    ))
}

/// Largest `mean / rhs_raw` over the given radii, rounded up.
pub fn calibrate_prop_extnorm(
    template: &OmegaSpec,
    r_list: &[f64],
    n_samples: usize,
    opts: &McOptions,
) -> Result<f64> {
    let spec = PotentialSpec::indicator_ball(Complex64::new(1.0, 0.0), 1.0);
    let runs = mc_extension_norm(&spec, template, 1.0, r_list, n_samples, opts)?;
    let worst = runs
        .iter()
        .map(|r| r.stats.mean / prop_extnorm_rhs(opts.d, r.r, template.h, 1.0))
        .fold(0.0, f64::max);
    Ok(round_up_3(worst))
}

/// Largest sector-sum ratio over the family, rounded up.
pub fn calibrate_sector(d: usize, q: f64, kappa: f64) -> Result<f64> {
    let fam = calibration_family(d)?;
    let mut worst: f64 = 0.0;
    for (v, pts) in family_spectra(&fam)? {
        let rhs = sector_rhs(&v, q, kappa)?;
        if rhs > 0.0 {
            worst = worst.max(sector_sum(&pts, d, q, kappa) / rhs);
        }
    }
    Ok(round_up_3(worst))
}
