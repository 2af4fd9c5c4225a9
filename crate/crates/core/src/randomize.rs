//! Seeded i.i.d. fields on the `h`-lattice and Anderson randomization.
//!
//! Cell `j` covers `[j h, (j+1) h)^d` in centred box coordinates. The value
//! of cell `j` in realization `r` is read from a ChaCha8 keystream seeded by
//! the master seed, on stream `r`, at a word position derived from `j`, so
//! it does not depend on iteration order.

use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::GridSpec;
use crate::potential::PotentialField;
use crate::special::wilson;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    /// Symmetric signs.
    Bernoulli,
    /// Standard normal.
    Gaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaSpec {
    /// Cell side.
    pub h: f64,
    pub distribution: Distribution,
    pub master_seed: u64,
    #[serde(default)]
    pub realization_index: u64,
}

impl OmegaSpec {
    pub fn new(h: f64, distribution: Distribution, master_seed: u64) -> Self {
        OmegaSpec {
            h,
            distribution,
            master_seed,
            realization_index: 0,
        }
    }

    pub fn realization(mut self, r: u64) -> Self {
        self.realization_index = r;
        self
    }
}

/// One realization of the lattice field restricted to the box.
#[derive(Clone, Debug, PartialEq)]
pub struct OmegaField {
    pub spec: OmegaSpec,
    pub grid: GridSpec,
    jmin: i64,
    extent: usize,
    values: Vec<f64>,
}

const EPS_CELL: f64 = 1e-9;

fn cell_range(grid: &GridSpec, h: f64) -> (i64, usize) {
    let jmin = (-grid.l / 2.0 / h + EPS_CELL).floor() as i64;
    let jmax = ((grid.l / 2.0 - grid.spacing()) / h + EPS_CELL).floor() as i64;
    (jmin, (jmax - jmin + 1) as usize)
}

#[inline]
fn zigzag(j: i64) -> u64 {
    ((j << 1) ^ (j >> 63)) as u64
}

/// Flat counter for a lattice index; each axis gets 21 bits.
#[inline]
pub fn cell_counter(j: [i64; 3]) -> u64 {
    zigzag(j[0]) | (zigzag(j[1]) << 21) | (zigzag(j[2]) << 42)
}

fn sample(rng: &mut ChaCha8Rng, dist: Distribution, j: [i64; 3]) -> f64 {
    rng.set_word_pos(cell_counter(j) as u128 * 4);
    let a = rng.next_u64();
    match dist {
        Distribution::Bernoulli => {
            if a >> 63 == 0 {
                1.0
            } else {
                -1.0
            }
        }
        Distribution::Gaussian => {
            let b = rng.next_u64();
            let u1 = ((a >> 11) + 1) as f64 / (1u64 << 53) as f64;
            let u2 = (b >> 11) as f64 / (1u64 << 53) as f64;
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        }
    }
}

impl OmegaField {
    /// Lattice index of the cell containing node `idx`.
    pub fn cell_of(&self, idx: usize) -> [i64; 3] {
        cell_index(&self.grid, self.spec.h, idx)
    }

    fn slot(&self, j: [i64; 3]) -> Option<usize> {
        let mut s = 0usize;
        for a in 0..self.grid.d {
            let o = j[a] - self.jmin;
            if o < 0 || o as usize >= self.extent {
                return None;
            }
            s = s * self.extent + o as usize;
        }
        Some(s)
    }

    pub fn value(&self, j: [i64; 3]) -> Option<f64> {
        self.slot(j).map(|s| self.values[s])
    }

    pub fn value_at_node(&self, idx: usize) -> Option<f64> {
        self.value(self.cell_of(idx))
    }

    /// Number of cells intersecting the box.
    pub fn cell_count(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Cell side length ranges as (first index, cells per axis).
    pub fn extent(&self) -> (i64, usize) {
        (self.jmin, self.extent)
    }

    /// A field with the same value on every cell (e.g. the identity realization).
    pub fn constant(spec: OmegaSpec, grid: &GridSpec, value: f64) -> Result<Self> {
        check(&spec, grid)?;
        let (jmin, extent) = cell_range(grid, spec.h);
        Ok(OmegaField {
            spec,
            grid: *grid,
            jmin,
            extent,
            values: vec![value; extent.pow(grid.d as u32)],
        })
    }
}

/// Lattice index of the cell containing node `idx` for cell side `h`.
pub fn cell_index(grid: &GridSpec, h: f64, idx: usize) -> [i64; 3] {
    let x = grid.node(idx);
    let mut j = [0i64; 3];
    for a in 0..grid.d {
        j[a] = (x[a] / h + EPS_CELL).floor() as i64;
    }
    j
}

fn check(spec: &OmegaSpec, grid: &GridSpec) -> Result<()> {
    if !(spec.h > 0.0) {
        return Err(invalid("h", "must be positive"));
    }
    if spec.h > grid.l {
        return Err(invalid("h", format!("cell side {} exceeds box side {}", spec.h, grid.l)));
    }
    Ok(())
}

/// Draws one value per `h`-cell intersecting the box.
pub fn draw_omega(spec: &OmegaSpec, grid: &GridSpec) -> Result<OmegaField> {
    check(spec, grid)?;
    let (jmin, extent) = cell_range(grid, spec.h);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.master_seed);
    rng.set_stream(spec.realization_index);
    let total = extent.pow(grid.d as u32);
    let mut values = Vec::with_capacity(total);
    for s in 0..total {
        let mut j = [0i64; 3];
        let mut rem = s;
        for a in (0..grid.d).rev() {
            j[a] = jmin + (rem % extent) as i64;
            rem /= extent;
        }
        values.push(sample(&mut rng, spec.distribution, j));
    }
    Ok(OmegaField {
        spec: *spec,
        grid: *grid,
        jmin,
        extent,
        values,
    })
}

/// `V_omega(x) = omega_{j(x)} V(x)`.
pub fn anderson_randomize(field: &PotentialField, omega: &OmegaField) -> Result<PotentialField> {
    if field.grid != omega.grid {
        return Err(invalid("omega", "drawn on a different grid"));
    }
    let mut values = field.values.clone();
    for (idx, v) in values.iter_mut().enumerate() {
        if *v == Complex64::default() {
            continue;
        }
        let w = omega
            .value_at_node(idx)
            .ok_or(Error::CoverageGap { node: idx })?;
        *v *= w;
    }
    Ok(PotentialField::new(field.grid, values, field.support_radius))
}

/// Empirical exceedance probability at one threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub threshold: f64,
    pub count: usize,
    pub fraction: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

/// Fraction of samples strictly above each threshold, with Wilson 95% intervals.
pub fn tail_table(samples: &[f64], thresholds: &[f64]) -> Result<Vec<TailRow>> {
    if samples.len() < 100 {
        return Err(Error::InsufficientSamples {
            needed: 100,
            got: samples.len(),
        });
    }
    let n = samples.len();
    Ok(thresholds
        .iter()
        .map(|&t| {
            let count = samples.iter().filter(|&&s| s > t).count();
            let (lo, hi) = wilson(count, n);
            TailRow {
                threshold: t,
                count,
                fraction: count as f64 / n as f64,
                wilson_lo: lo,
                wilson_hi: hi,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{sample_potential, PotentialSpec};

    #[test]
    fn bernoulli_signs_and_determinism() {
        let g = GridSpec::new(2, 32.0, 64);
        let spec = OmegaSpec::new(1.0, Distribution::Bernoulli, 42).realization(3);
        let a = draw_omega(&spec, &g).unwrap();
        let b = draw_omega(&spec, &g).unwrap();
        assert_eq!(a, b);
        assert!(a.values().iter().all(|&v| v == 1.0 || v == -1.0));
        assert_eq!(a.cell_count(), 32 * 32);
        let c = draw_omega(&spec.realization(4), &g).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn h_larger_than_box() {
        let g = GridSpec::new(1, 4.0, 8);
        assert!(draw_omega(&OmegaSpec::new(5.0, Distribution::Bernoulli, 1), &g).is_err());
    }

    #[test]
    fn cell_partition_and_occupancy() {
        let g = GridSpec::new(2, 8.0, 32);
        let h = 0.75;
        let om = draw_omega(&OmegaSpec::new(h, Distribution::Gaussian, 1), &g).unwrap();
        let mut counts = std::collections::HashMap::new();
        for idx in 0..g.len() {
            let j = om.cell_of(idx);
            let x = g.node(idx);
            for a in 0..2 {
                assert!(j[a] as f64 * h <= x[a] + 1e-9 && x[a] < (j[a] + 1) as f64 * h + 1e-9);
            }
            assert!(om.value(j).is_some());
            *counts.entry(j).or_insert(0usize) += 1;
        }
        let bound = (h * g.n as f64 / g.l).ceil().powi(2) as usize;
        assert!(counts.values().all(|&c| c <= bound));
    }

    #[test]
    fn identity_and_sign_flip() {
        let g = GridSpec::new(1, 8.0, 64);
        let v = sample_potential(&PotentialSpec::indicator_ball(Complex64::new(1.0, 2.0), 1.0), &g)
            .unwrap();
        let spec = OmegaSpec::new(1.0, Distribution::Bernoulli, 0);
        let plus = OmegaField::constant(spec, &g, 1.0).unwrap();
        assert_eq!(anderson_randomize(&v, &plus).unwrap(), v);
        let minus = OmegaField::constant(spec, &g, -1.0).unwrap();
        assert_eq!(anderson_randomize(&v, &minus).unwrap(), v.scaled(Complex64::new(-1.0, 0.0)));
        let om = draw_omega(&spec, &g).unwrap();
        let vw = anderson_randomize(&v, &om).unwrap();
        for (a, b) in vw.values.iter().zip(&v.values) {
            assert_eq!(a.norm(), b.norm());
        }
        assert_eq!(vw.support_radius, v.support_radius);
    }

    #[test]
    fn tail_table_trivial() {
        let ones = vec![1.0; 100];
        let t = tail_table(&ones, &[2.0, 0.5]).unwrap();
        assert_eq!(t[0].fraction, 0.0);
        assert_eq!(t[1].fraction, 1.0);
        assert!(tail_table(&ones[..99], &[1.0]).is_err());
    }
}
