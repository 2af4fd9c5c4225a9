use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn ltlab(cmd: &str, cfg: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ltlab"))
        .arg(cmd)
        .arg("--config")
        .arg(cfg)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, cfg: Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    p
}

fn well(out: &Path, amplitude: f64) -> Value {
    json!({
        "grid": {"d": 1, "l": 16.0, "n": 256},
        "potential": {"kind": "indicator_ball", "amplitude": [amplitude, 0.0], "radius": 1.0,
                      "sampling": "band_limited"},
        "output_dir": out,
    })
}

fn files_with(dir: &Path, prefix: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with(prefix))
        .collect();
    v.sort();
    v
}

fn csv_rows(p: &Path) -> Vec<Vec<String>> {
    csv::Reader::from_path(p)
        .unwrap()
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect()
}

/// Ground state `-kappa^2` of a 1D well of depth `v0` and half-width `a`, from `k tan(k a) = kappa`.
fn well_ground_state(v0: f64, a: f64) -> f64 {
    let f = |k: f64| k * (k * a).tan() - (v0 - k * k).sqrt();
    let (mut lo, mut hi) = (1e-9, (v0.sqrt()).min(std::f64::consts::FRAC_PI_2 / a - 1e-12));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let k = 0.5 * (lo + hi);
    k * k - v0
}

#[test]
fn zero_potential_has_empty_spectrum_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), "c.json", well(&out, 0.0));
    let o = ltlab("spectrum", &cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let spec = files_with(&out, "spectrum_");
    assert_eq!(spec.len(), 1);
    assert!(csv_rows(&spec[0]).is_empty());
    let man = files_with(&out, "manifest_");
    assert_eq!(man.len(), 1);
    let m: Value = serde_json::from_str(&std::fs::read_to_string(&man[0]).unwrap()).unwrap();
    assert_eq!(m["summary"]["eigenvalues"], 0);
    let hash = m["config_hash"].as_str().unwrap();
    assert!(spec[0].to_string_lossy().contains(hash));
}

#[test]
fn well_ground_state_matches_transcendental_root() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), "c.json", well(&out, 4.0));
    let o = ltlab("spectrum", &cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&files_with(&out, "spectrum_")[0]);
    let lowest = rows
        .iter()
        .map(|r| r[0].parse::<f64>().unwrap())
        .fold(f64::INFINITY, f64::min);
    let e0 = well_ground_state(4.0, 1.0);
    assert!((lowest - e0).abs() < 1e-4, "{lowest} vs {e0}");
    for r in &rows {
        assert!(r[1].parse::<f64>().unwrap().abs() < 1e-8);
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut c = well(&out, 3.0);
    c["omega"] = json!({"h": 1.0, "distribution": "bernoulli", "master_seed": 11, "realization_index": 2});
    let cfg = write_config(dir.path(), "c.json", c);
    assert!(ltlab("spectrum", &cfg, &[]).status.success());
    let read = |prefix| std::fs::read(&files_with(&out, prefix)[0]).unwrap();
    let (a, ma) = (read("spectrum_"), read("manifest_"));
    assert!(ltlab("spectrum", &cfg, &[]).status.success());
    assert_eq!(a, read("spectrum_"));
    assert_eq!(ma, read("manifest_"));
    assert!(ltlab("spectrum", &cfg, &["--seed", "12"]).status.success());
    assert_eq!(files_with(&out, "spectrum_").len(), 2);
}

#[test]
fn one_dimensional_bound_passes_below_unit_margin() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut c = well(&out, 4.0);
    c["potential"]["amplitude"] = json!([2.0, 3.0]);
    c["experiment"] = json!({"bound": "AAD1D"});
    let cfg = write_config(dir.path(), "c.json", c);
    let o = ltlab("verify", &cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rep: Value = serde_json::from_str(&std::fs::read_to_string(&files_with(&out, "report_")[0]).unwrap()).unwrap();
    let r = &rep["reports"][0];
    assert_eq!(r["pass"], true);
    assert!(r["margin"].as_f64().unwrap() < 1.0);
}

#[test]
fn single_sample_with_identity_omega_reports_one_realization() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut c = well(&out, 4.0);
    c["potential"]["sampling"] = json!("point");
    c["potential"]["radius"] = json!(2.0);
    c["omega"] = json!({"h": 1.0, "distribution": "bernoulli", "master_seed": 0});
    c["experiment"] = json!({"bound": "THM1", "n_samples": 1, "identity_omega": true, "r": 2.0});
    let cfg = write_config(dir.path(), "c.json", c);
    let o = ltlab("verify", &cfg, &[]);
    assert!(matches!(o.status.code(), Some(0) | Some(1)), "{}", String::from_utf8_lossy(&o.stderr));
    let rep: Value = serde_json::from_str(&std::fs::read_to_string(&files_with(&out, "report_")[0]).unwrap()).unwrap();
    let reports = rep["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 1);
    assert_eq!(reports[0]["bound_id"], "THM1");
    assert!(reports[0]["lhs"].as_f64().unwrap().is_finite());
}

#[test]
fn malformed_config_exits_nonzero_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut c = well(&out, 1.0);
    c["grid"]["n"] = json!(100);
    let cfg = write_config(dir.path(), "bad.json", c);
    let o = ltlab("spectrum", &cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid"));
    assert!(!out.exists());

    let cfg = write_config(dir.path(), "typo.json", json!({"grid": {"d": 1, "l": 16.0, "n": 256}, "potentail": {}}));
    assert_eq!(ltlab("verify", &cfg, &[]).status.code(), Some(2));
    assert!(!out.exists());
}

fn disk_campaign(out: &Path, r_list: &[f64], n: usize) -> Value {
    json!({
        "grid": {"d": 2, "l": 16.0, "n": 64},
        "potential": {"kind": "indicator_ball", "amplitude": [1.0, 0.0], "radius": 4.0,
                      "sampling": "cell_average"},
        "omega": {"h": 1.0, "distribution": "bernoulli", "master_seed": 5},
        "experiment": {"r_list": r_list, "n_samples": n},
        "output_dir": out,
    })
}

#[test]
fn campaign_with_one_radius_and_one_sample_has_one_summary_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), "c.json", disk_campaign(&out, &[4.0], 1));
    let o = ltlab("campaign", &cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&files_with(&out, "campaign_summary_")[0]);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "stats");
    assert_eq!(rows[0][4], "1");
    let mean: f64 = rows[0][2].parse().unwrap();
    let det: f64 = rows[0][5].parse().unwrap();
    assert!(mean > 0.0 && det > 0.0);
}

#[test]
fn campaign_resumes_from_a_partial_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), "c.json", disk_campaign(&out, &[4.0], 3));
    assert!(ltlab("campaign", &cfg, &[]).status.success());
    let samples = files_with(&out, "campaign_R4_")[0].clone();
    let full = std::fs::read_to_string(&samples).unwrap();
    let summary = std::fs::read(&files_with(&out, "campaign_summary_")[0]).unwrap();
    assert_eq!(full.lines().count(), 4);

    let mut partial: String = full.lines().take(2).map(|l| format!("{l}\n")).collect();
    partial.push_str("1,not-a-number\n");
    std::fs::write(&samples, partial).unwrap();
    let o = ltlab("campaign", &cfg, &[]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("resuming"));
    assert_eq!(std::fs::read_to_string(&samples).unwrap(), full);
    assert_eq!(std::fs::read(&files_with(&out, "campaign_summary_")[0]).unwrap(), summary);
}

#[test]
fn net_info_counts_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut c = disk_campaign(&out, &[4.0], 1);
    c["experiment"]["r"] = json!(4.0);
    let cfg = write_config(dir.path(), "c.json", c);
    let o = ltlab("net-info", &cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let info: Value = serde_json::from_slice(&o.stdout).unwrap();
    let expected = (2.0 * std::f64::consts::PI * 4.0).ceil() as u64;
    assert_eq!(info["nodes"].as_u64().unwrap(), expected);
    assert!((info["weight_sum"].as_f64().unwrap() - info["surface_measure"].as_f64().unwrap()).abs() < 1e-9);

    assert!(ltlab("svd", &cfg, &[]).status.success());
    let rows = csv_rows(&files_with(&out, "svd_")[0]);
    assert_eq!(rows.len() as u64, expected);
    let s: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(s.windows(2).all(|w| w[0] >= w[1]));
}
