use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use ltlab_core::harness::BoundId;
use ltlab_core::{GridSpec, OmegaSpec, PotentialSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Everything a run needs. Lengths are in the units of the grid box side `l`;
/// frequencies (`lambda`) are in cycles per unit length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub potential: PotentialSpec,
    /// Anderson randomization template; absent means the deterministic potential.
    #[serde(default)]
    pub omega: Option<OmegaSpec>,
    #[serde(default)]
    pub experiment: Experiment,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// Experiment selector and parameters; unused fields are ignored by a given bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Experiment {
    pub bound: BoundId,
    /// Lebesgue exponent.
    pub q: f64,
    /// Sector slope.
    pub kappa: f64,
    /// Confidence parameter of the randomized single-eigenvalue bounds.
    pub m: f64,
    /// Laplace-Beltrami weight exponent.
    pub nu: f64,
    /// Small exponent of the eigenvalue-sum functional.
    pub eps: f64,
    /// Sphere radius in frequency space.
    pub lambda: f64,
    /// Support radius used by support-form bounds and nets.
    pub r: f64,
    /// Randomization cell side used in right-hand sides.
    pub h: f64,
    pub r_list: Vec<f64>,
    pub n_samples: usize,
    /// Admissible `|eps| / lambda` near the positive axis.
    pub eps_ratio: f64,
    /// Lower window radius of the eigenvalue-sum functional.
    pub r0: f64,
    pub amplitudes: Vec<f64>,
    /// Distance kept from `[0, infinity)`; defaults to one box level spacing.
    pub essential_margin: Option<f64>,
    /// Net spacing is `1 / (R * net_oversampling)`.
    pub net_oversampling: f64,
    /// Force `omega = +1` in every realization.
    pub identity_omega: bool,
}

impl Default for Experiment {
    fn default() -> Self {
        Experiment {
            bound: BoundId::Aad1d,
            q: 1.0,
            kappa: 1.0,
            m: 1.0,
            nu: 1.0,
            eps: 0.1,
            lambda: 1.0,
            r: 8.0,
            h: 1.0,
            r_list: vec![8.0, 16.0, 32.0, 64.0],
            n_samples: 200,
            eps_ratio: 0.05,
            r0: 100.0,
            amplitudes: vec![1.0, 2.0, 4.0, 8.0],
            essential_margin: None,
            net_oversampling: 1.0,
            identity_omega: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Checks every field that a command may touch, before anything is written.
    pub fn validate(&self) -> anyhow::Result<()> {
        self.grid.validate().context("grid")?;
        self.potential.validate().context("potential")?;
        if let Some(o) = &self.omega {
            if !(o.h > 0.0 && o.h.is_finite()) {
                bail!("omega.h: must be positive");
            }
            if o.h > self.grid.l {
                bail!("omega.h: cell side {} exceeds box side {}", o.h, self.grid.l);
            }
        }
        let e = &self.experiment;
        let positive = [
            ("experiment.lambda", e.lambda),
            ("experiment.r", e.r),
            ("experiment.h", e.h),
            ("experiment.kappa", e.kappa),
            ("experiment.m", e.m),
            ("experiment.r0", e.r0),
            ("experiment.eps_ratio", e.eps_ratio),
            ("experiment.net_oversampling", e.net_oversampling),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                bail!("{name}: must be positive, got {v}");
            }
        }
        if !(e.q >= 1.0) {
            bail!("experiment.q: must be at least 1, got {}", e.q);
        }
        if !(e.eps > 0.0 && e.eps < 0.5) {
            bail!("experiment.eps: must lie in (0, 1/2), got {}", e.eps);
        }
        if e.r_list.is_empty() || e.r_list.iter().any(|r| !(*r > 0.0)) {
            bail!("experiment.r_list: need at least one positive radius");
        }
        if e.n_samples == 0 {
            bail!("experiment.n_samples: must be at least 1");
        }
        if e.amplitudes.iter().any(|a| !(*a > 0.0)) {
            bail!("experiment.amplitudes: must be positive");
        }
        if let Some(m) = e.essential_margin {
            if !(m > 0.0) {
                bail!("experiment.essential_margin: must be positive");
            }
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON, output directory excluded.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("output_dir");
        }
        let digest = Sha256::digest(serde_json::to_string(&v).expect("value serializes").as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
