use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use ltlab_core::extension::{build_net_oversampled, sandwich};
use ltlab_core::harness::*;
use ltlab_core::potential::sample_potential;
use ltlab_core::randomize::{anderson_randomize, draw_omega};
use ltlab_core::spectra::{filter_discrete, spectrum, write_spectrum_csv, SpectralPoint};
use ltlab_core::{build_grid, Distribution, OmegaSpec, PotentialField, SpectrumFilter};
use serde_json::json;

use crate::config::RunConfig;
use crate::output::{write_atomic, write_json};

/// What a command produced and whether every check passed.
pub struct Outcome {
    pub pass: bool,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    fn ok(files: Vec<PathBuf>) -> Self {
        Outcome { pass: true, files }
    }
}

fn out_path(cfg: &RunConfig, hash: &str, stem: &str, ext: &str) -> PathBuf {
    cfg.output_dir.join(format!("{stem}_{hash}.{ext}"))
}

fn omega_template(cfg: &RunConfig) -> OmegaSpec {
    cfg.omega
        .unwrap_or_else(|| OmegaSpec::new(cfg.experiment.h, Distribution::Bernoulli, 0))
}

/// The deterministic field and the realization named by the omega template (if any).
fn fields(cfg: &RunConfig) -> anyhow::Result<(PotentialField, PotentialField)> {
    let det = sample_potential(&cfg.potential, &cfg.grid)?;
    let v = match &cfg.omega {
        Some(o) if !cfg.experiment.identity_omega => anderson_randomize(&det, &draw_omega(o, &cfg.grid)?)?,
        _ => PotentialField::new(det.grid, det.values.clone(), det.support_radius),
    };
    Ok((det, v))
}

fn filter_for(cfg: &RunConfig, v: &PotentialField) -> SpectrumFilter {
    match cfg.experiment.essential_margin {
        Some(m) => SpectrumFilter {
            essential_margin: m,
            ..SpectrumFilter::for_grid(&cfg.grid)
        },
        None => SpectrumFilter::for_grid(&cfg.grid).with_box_artifact_margin(v),
    }
}

fn discrete_spectrum(cfg: &RunConfig, v: &PotentialField) -> anyhow::Result<Vec<SpectralPoint>> {
    let grid = build_grid(cfg.grid)?;
    Ok(filter_discrete(&spectrum(&grid, v)?, &filter_for(cfg, v)))
}

fn manifest(cfg: &RunConfig, hash: &str, command: &str, files: &[PathBuf], extra: serde_json::Value) -> serde_json::Value {
    json!({
        "command": command,
        "config_hash": hash,
        "config": cfg,
        "files": files.iter().map(|f| f.file_name().unwrap().to_string_lossy().to_string()).collect::<Vec<_>>(),
        "summary": extra,
        "version": env!("CARGO_PKG_VERSION"),
    })
}

pub fn spectrum_cmd(cfg: &RunConfig, hash: &str) -> anyhow::Result<Outcome> {
    let (_, v) = fields(cfg)?;
    let pts = discrete_spectrum(cfg, &v)?;
    let (seed, realization) = match (&cfg.omega, cfg.experiment.identity_omega) {
        (Some(o), false) => (Some(o.master_seed), Some(o.realization_index)),
        _ => (None, None),
    };
    let mut buf = Vec::new();
    write_spectrum_csv(&mut buf, &pts, seed, realization)?;
    let csv_path = out_path(cfg, hash, "spectrum", "csv");
    write_atomic(&csv_path, &buf)?;
    let man = out_path(cfg, hash, "manifest", "json");
    let files = vec![csv_path];
    write_json(&man, &manifest(cfg, hash, "spectrum", &files, json!({ "eigenvalues": pts.len() })))?;
    println!("{} eigenvalues -> {}", pts.len(), files[0].display());
    Ok(Outcome::ok(vec![files[0].clone(), man]))
}

fn frozen_value(bound: BoundId, d: usize, q: Option<f64>, kappa: Option<f64>, nu: Option<f64>) -> anyhow::Result<f64> {
    frozen_constants()
        .lookup(bound, d, q, kappa, nu)
        .map(|e| e.value)
        .with_context(|| format!("no frozen constant for {bound:?} d={d} q={q:?} kappa={kappa:?} nu={nu:?}"))
}

fn thm_reports(cfg: &RunConfig, det: &PotentialField) -> anyhow::Result<Vec<BoundReport>> {
    let e = &cfg.experiment;
    let params = ThmParams {
        eps_ratio: e.eps_ratio,
        ..ThmParams::new(e.q, e.r, e.h, e.m)
    };
    let template = omega_template(cfg);
    let identity = e.identity_omega || cfg.omega.is_none();
    let grid = build_grid(cfg.grid)?;
    let start = template.realization_index;
    (start..start + e.n_samples as u64)
        .map(|r| {
            let spec = template.realization(r);
            let v = if identity {
                PotentialField::new(det.grid, det.values.clone(), det.support_radius)
            } else {
                anderson_randomize(det, &draw_omega(&spec, &cfg.grid)?)?
            };
            let pts = filter_discrete(&spectrum(&grid, &v)?, &filter_for(cfg, &v));
            let omega = (!identity).then_some(&spec);
            Ok(if e.bound == BoundId::Thm1 {
                check_thm1(&pts, det, omega, &params)?
            } else {
                check_thm3(&pts, det, omega, &params)?
            })
        })
        .collect()
}

fn mc_options(cfg: &RunConfig) -> McOptions {
    McOptions {
        d: cfg.grid.d,
        net_oversampling: cfg.experiment.net_oversampling,
        identity_omega: cfg.experiment.identity_omega || cfg.omega.is_none(),
        ..McOptions::default()
    }
}

pub fn verify_cmd(cfg: &RunConfig, hash: &str) -> anyhow::Result<Outcome> {
    let e = &cfg.experiment;
    let d = cfg.grid.d;
    let reports: Vec<BoundReport> = match e.bound {
        BoundId::Aad1d => {
            let (_, v) = fields(cfg)?;
            vec![check_aad_1d(&discrete_spectrum(cfg, &v)?, &v)?]
        }
        BoundId::KltDet => {
            let (_, v) = fields(cfg)?;
            vec![check_klt_det(&discrete_spectrum(cfg, &v)?, &v, e.q)?]
        }
        BoundId::Sector => {
            let (_, v) = fields(cfg)?;
            vec![check_sector(&discrete_spectrum(cfg, &v)?, &v, e.q, e.kappa)?]
        }
        BoundId::Thm1 | BoundId::Thm3 => {
            let (det, _) = fields(cfg)?;
            thm_reports(cfg, &det)?
        }
        BoundId::PropExtnorm => {
            let c = frozen_value(BoundId::PropExtnorm, d, None, None, None)?;
            let template = omega_template(cfg);
            let runs = mc_extension_norm(&cfg.potential, &template, e.lambda, &e.r_list, e.n_samples, &mc_options(cfg))?;
            let v_inf = cfg.potential.amplitude.norm();
            runs.iter().map(|r| check_prop_extnorm(r, template.h, v_inf, c)).collect()
        }
        BoundId::SchattenDecay => {
            let c = frozen_value(BoundId::SchattenDecay, d, None, None, Some(e.nu))?;
            let template = omega_template(cfg);
            let run = schatten_campaign(&SchattenOptions {
                lambda: e.lambda,
                r: e.r,
                h: template.h,
                nu: e.nu,
                n_realizations: e.n_samples,
                distribution: template.distribution,
                master_seed: template.master_seed,
                mc: mc_options(cfg),
            })?;
            vec![BoundReport::new(
                BoundId::SchattenDecay,
                run.median_lhs,
                run.rhs_raw,
                c,
                1.0,
                false,
                json!({ "R": run.r, "nu": e.nu, "lambda": e.lambda, "net_size": run.net_size,
                        "n": run.lhs.len(), "tail_ratio": run.tail_ratio, "band_index": run.band_index }),
            )]
        }
        BoundId::Tail => {
            let template = omega_template(cfg);
            let run = extension_norm_run(&cfg.potential, &template, e.lambda, e.r, e.n_samples, &mc_options(cfg))?;
            let study = tail_study(&run.samples, &TAIL_MULTIPLES)?;
            (0..study.multiples.len()).map(|i| check_tail(&study, i)).collect()
        }
        BoundId::Evsum => {
            let (_, v) = fields(cfg)?;
            let sweep = evsum_sweep(&cfg.grid, &cfg.potential, &e.amplitudes, e.eps, e.r0, e.h, &filter_for(cfg, &v))?;
            sweep.reports
        }
    };
    let pass = reports.iter().all(|r| r.pass);
    let path = out_path(cfg, hash, "report", "json");
    write_json(&path, &json!({ "config_hash": hash, "config": cfg, "reports": reports }))?;
    for r in &reports {
        println!(
            "{:?}: lhs={:.6e} rhs_raw={:.6e} C={} margin={:.4} {}{}",
            r.bound_id,
            r.lhs,
            r.rhs_raw,
            r.fitted_constant,
            r.margin,
            if r.pass { "pass" } else { "FAIL" },
            if r.vacuous { " (vacuous)" } else { "" }
        );
    }
    Ok(Outcome {
        pass,
        files: vec![path],
    })
}

fn read_partial(path: &Path) -> anyhow::Result<BTreeMap<u64, f64>> {
    let mut done = BTreeMap::new();
    if !path.exists() {
        return Ok(done);
    }
    let mut rdr = csv::Reader::from_path(path)?;
    for rec in rdr.records() {
        // a torn final line from an interrupted run is dropped and recomputed
        let Ok(rec) = rec else { break };
        let (Some(i), Some(v)) = (rec.get(0), rec.get(1)) else { break };
        let (Ok(i), Ok(v)) = (i.parse::<u64>(), v.parse::<f64>()) else { break };
        done.insert(i, v);
    }
    Ok(done)
}

fn write_samples(path: &Path, samples: &BTreeMap<u64, f64>) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["realization_index", "norm"])?;
    for (i, v) in samples {
        w.write_record([i.to_string(), format!("{v:.17e}")])?;
    }
    write_atomic(path, &w.into_inner()?)
}

/// Chunk size between checkpoints of a per-radius sample file.
const CHECKPOINT: usize = 50;

pub fn campaign_cmd(cfg: &RunConfig, hash: &str) -> anyhow::Result<Outcome> {
    let e = &cfg.experiment;
    let d = cfg.grid.d;
    if !(2..=3).contains(&d) {
        bail!("grid.d: extension campaigns need d = 2 or 3");
    }
    let opts = mc_options(cfg);
    let template = omega_template(cfg);
    let start = template.realization_index;
    let wanted: Vec<u64> = (start..start + e.n_samples as u64).collect();
    let mut files = Vec::new();
    let mut rows = Vec::new();
    for &r in &e.r_list {
        let grid = campaign_grid(d, r, &opts);
        let field = sample_potential(&with_radius(&cfg.potential, r), &grid)?;
        let net = build_net_oversampled(e.lambda, r, d, opts.net_oversampling)?;
        let path = out_path(cfg, hash, &format!("campaign_R{r}"), "csv");
        let mut done = read_partial(&path)?;
        let missing: Vec<u64> = wanted.iter().copied().filter(|i| !done.contains_key(i)).collect();
        if !missing.is_empty() && !done.is_empty() {
            eprintln!("R={r}: resuming, {} of {} realizations on disk", done.len(), wanted.len());
        }
        for chunk in missing.chunks(CHECKPOINT) {
            let vals = extension_norm_samples(&field, &net, &template, chunk, &opts)?;
            done.extend(chunk.iter().copied().zip(vals));
            write_samples(&path, &done)?;
        }
        if missing.is_empty() {
            write_samples(&path, &done)?;
        }
        let samples: Vec<f64> = wanted.iter().map(|i| done[i]).collect();
        let det = ltlab_core::extension::sandwich_with(&net, &net, &field.abs(), opts.method)?.norm()?;
        let stats = McStats::from_samples(&samples);
        eprintln!("R={r}: mean={:.6} stderr={:.2e} deterministic={det:.6}", stats.mean, stats.stderr);
        rows.push((r, stats, det));
        files.push(path);
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["row", "r", "mean", "stderr", "n", "deterministic_norm", "exponent", "r2"])?;
    for (r, s, det) in &rows {
        w.write_record([
            "stats".to_string(),
            r.to_string(),
            format!("{:.17e}", s.mean),
            format!("{:.17e}", s.stderr),
            s.n.to_string(),
            format!("{det:.17e}"),
            String::new(),
            String::new(),
        ])?;
    }
    let mut slope = None;
    if rows.len() >= 3 {
        let x: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let m: Vec<f64> = rows.iter().map(|r| r.1.mean).collect();
        let dn: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let fr = fit_scaling(&x, &m)?;
        let fd = fit_scaling(&x, &dn)?;
        for (name, f) in [("slope_random", fr), ("slope_deterministic", fd)] {
            let mut rec = vec![name.to_string()];
            rec.extend(std::iter::repeat(String::new()).take(5));
            rec.push(format!("{:.6}", f.exponent));
            rec.push(format!("{:.6}", f.r2));
            w.write_record(rec)?;
        }
        slope = Some((fr, fd));
    }
    let summary = out_path(cfg, hash, "campaign_summary", "csv");
    write_atomic(&summary, &w.into_inner()?)?;

    let mut p = csv::Writer::from_writer(Vec::new());
    p.write_record(["x", "y", "stderr"])?;
    for (r, s, _) in &rows {
        p.write_record([r.to_string(), format!("{:.17e}", s.mean), format!("{:.17e}", s.stderr)])?;
    }
    let plot = out_path(cfg, hash, "campaign_plot", "csv");
    write_atomic(&plot, &p.into_inner()?)?;

    if let Some((fr, fd)) = slope {
        println!(
            "random exponent {:.4} (r2 {:.4}); deterministic exponent {:.4} (r2 {:.4})",
            fr.exponent, fr.r2, fd.exponent, fd.r2
        );
    }
    files.push(summary.clone());
    files.push(plot);
    let man = out_path(cfg, hash, "manifest", "json");
    write_json(&man, &manifest(cfg, hash, "campaign", &files, json!({ "radii": e.r_list, "n_samples": e.n_samples })))?;
    files.push(man);
    println!("summary -> {}", summary.display());
    Ok(Outcome::ok(files))
}

pub fn svd_cmd(cfg: &RunConfig, hash: &str) -> anyhow::Result<Outcome> {
    let e = &cfg.experiment;
    let (_, v) = fields(cfg)?;
    let net = build_net_oversampled(e.lambda, e.r, cfg.grid.d, e.net_oversampling)?;
    let s = sandwich(&net, &net, &v)?.singular_values()?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "singular_value", "relative"])?;
    let s1 = s.first().copied().unwrap_or(0.0);
    for (k, x) in s.iter().enumerate() {
        let rel = if s1 > 0.0 { x / s1 } else { 0.0 };
        w.write_record([(k + 1).to_string(), format!("{x:.17e}"), format!("{rel:.6e}")])?;
    }
    let path = out_path(cfg, hash, "svd", "csv");
    write_atomic(&path, &w.into_inner()?)?;
    println!("{} singular values, s_1 = {s1:.6e} -> {}", s.len(), path.display());
    Ok(Outcome::ok(vec![path]))
}

pub fn net_info_cmd(cfg: &RunConfig, hash: &str) -> anyhow::Result<Outcome> {
    let e = &cfg.experiment;
    let net = build_net_oversampled(e.lambda, e.r, cfg.grid.d, e.net_oversampling)?;
    let nn = net.nearest_neighbour_distances();
    let info = json!({
        "config_hash": hash,
        "d": net.d,
        "lambda": net.lambda,
        "r": e.r,
        "spacing": net.spacing,
        "nodes": net.len(),
        "weight_sum": net.weights.iter().sum::<f64>(),
        "surface_measure": net.surface_measure(),
        "nn_min": nn.iter().cloned().fold(f64::INFINITY, f64::min),
        "nn_max": nn.iter().cloned().fold(0.0, f64::max),
    });
    let path = out_path(cfg, hash, "net", "json");
    write_json(&path, &info)?;
    println!("{}", serde_json::to_string_pretty(&info)?);
    Ok(Outcome::ok(vec![path]))
}
