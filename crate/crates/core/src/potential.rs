//! Potential families, grid sampling, `L^q` norms and level-set decompositions.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{build_grid, GridSpec};
use crate::special::{bessel_j, bracket};

/// Shape of a potential family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    /// `amplitude * 1_{|x| <= R}`.
    IndicatorBall,
    /// `amplitude * <|x|>^{-s}`, not compactly supported.
    PowerDecay { s: f64 },
    /// Oscillating `|x|^{-1}` profile at length scale `R`.
    WignerVonNeumann,
    /// `amplitude * e^{2 pi i x_1}` on a slab `eps^-2` long in `x_1`, `eps^-1` across.
    KnappOscillatory { eps: f64 },
    /// Node values read from a CSV of `(coords..., re, im)` rows.
    Tabulated { path: PathBuf },
}

/// How a profile with a sharp edge is put on the grid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Pointwise evaluation at the node.
    #[default]
    Point,
    /// Nodes inside the closed support carry the fraction of their cell inside it.
    CellAverage,
    /// Truncated Fourier series of the exact transform (indicator balls only).
    BandLimited,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    #[serde(flatten)]
    pub kind: PotentialKind,
    /// Complex amplitude, serialized as `[re, im]`.
    pub amplitude: Complex64,
    /// Support or scale radius.
    pub radius: f64,
    #[serde(default)]
    pub sampling: Sampling,
}

impl PotentialSpec {
    pub fn indicator_ball(amplitude: Complex64, radius: f64) -> Self {
        PotentialSpec {
            kind: PotentialKind::IndicatorBall,
            amplitude,
            radius,
            sampling: Sampling::Point,
        }
    }

    pub fn with_sampling(mut self, sampling: Sampling) -> Self {
        self.sampling = sampling;
        self
    }

    /// Whether the family vanishes outside `B(radius)` by construction.
    pub fn is_compact(&self) -> bool {
        match self.kind {
            PotentialKind::IndicatorBall => self.sampling != Sampling::BandLimited,
            PotentialKind::KnappOscillatory { .. } | PotentialKind::Tabulated { .. } => true,
            _ => false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(invalid("radius", "must be positive"));
        }
        if !(self.amplitude.re.is_finite() && self.amplitude.im.is_finite()) {
            return Err(invalid("amplitude", "must be finite"));
        }
        match &self.kind {
            PotentialKind::PowerDecay { s } if !(*s >= 0.0) => {
                Err(invalid("s", "decay exponent must be nonnegative"))
            }
            PotentialKind::KnappOscillatory { eps } => {
                if !(*eps > 0.0 && *eps <= 1.0) {
                    return Err(invalid("eps", "must lie in (0, 1]"));
                }
                Ok(())
            }
            _ if self.sampling == Sampling::BandLimited
                && self.kind != PotentialKind::IndicatorBall =>
            {
                Err(invalid("sampling", "band_limited applies to indicator_ball only"))
            }
            _ => Ok(()),
        }
    }
}

/// A potential sampled on grid nodes.
#[derive(Debug)]
pub struct PotentialField {
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
    /// `None` for families without compact support.
    pub support_radius: Option<f64>,
    norms: Mutex<HashMap<u64, f64>>,
}

impl Clone for PotentialField {
    fn clone(&self) -> Self {
        PotentialField::new(self.grid, self.values.clone(), self.support_radius)
    }
}

impl PartialEq for PotentialField {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid
            && self.values == other.values
            && self.support_radius == other.support_radius
    }
}

impl PotentialField {
    pub fn new(grid: GridSpec, values: Vec<Complex64>, support_radius: Option<f64>) -> Self {
        PotentialField {
            grid,
            values,
            support_radius,
            norms: Mutex::new(HashMap::new()),
        }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        PotentialField::new(grid, vec![Complex64::default(); grid.len()], Some(0.0))
    }

    /// Node indices where `V != 0`.
    pub fn support(&self) -> Vec<usize> {
        (0..self.values.len())
            .filter(|&i| self.values[i] != Complex64::default())
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == Complex64::default())
    }

    /// `(sum |V|^q cellvol)^{1/q}`.
    pub fn lq_norm(&self, q: f64) -> Result<f64> {
        lq_norm(self, q)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max_x <|x|>^s |V(x)|`.
    pub fn weighted_sup_norm(&self, s: f64) -> f64 {
        (0..self.values.len())
            .map(|i| bracket(norm3(self.grid.node(i))).powf(s) * self.values[i].norm())
            .fold(0.0, f64::max)
    }

    /// Largest `|x|` over the support.
    pub fn measured_radius(&self) -> f64 {
        self.support()
            .into_iter()
            .map(|i| norm3(self.grid.node(i)))
            .fold(0.0, f64::max)
    }

    pub fn map_values(&self, f: impl Fn(usize, Complex64) -> Complex64) -> PotentialField {
        let values = self.values.iter().enumerate().map(|(i, v)| f(i, *v)).collect();
        PotentialField::new(self.grid, values, self.support_radius)
    }

    pub fn scaled(&self, c: Complex64) -> PotentialField {
        self.map_values(|_, v| v * c)
    }

    pub fn abs(&self) -> PotentialField {
        self.map_values(|_, v| Complex64::new(v.norm(), 0.0))
    }

    pub fn conj(&self) -> PotentialField {
        self.map_values(|_, v| v.conj())
    }
}

pub(crate) fn norm3(x: [f64; 3]) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

/// Oscillating profile decaying like `8 sin(2r)/r`.
pub fn wigner_von_neumann_profile(r: f64) -> f64 {
    let (s, c) = r.sin_cos();
    let g = 2.0 * r - (2.0 * r).sin();
    let s3 = s * s * s;
    -32.0 * s * (g.powi(3) * c - 3.0 * g * g * s3 + g * c + s3) / (1.0 + g * g).powi(2)
}

/// Fourier transform of `1_{B(R)}` at `|xi| = k` in dimension `d`.
fn ball_transform(d: usize, r: f64, k: f64) -> f64 {
    match d {
        1 => {
            if k == 0.0 {
                2.0 * r
            } else {
                (2.0 * PI * r * k).sin() / (PI * k)
            }
        }
        2 => {
            if k == 0.0 {
                PI * r * r
            } else {
                r * bessel_j(1, 2.0 * PI * r * k) / k
            }
        }
        _ => {
            if k == 0.0 {
                4.0 / 3.0 * PI * r.powi(3)
            } else {
                let u = 2.0 * PI * r * k;
                (u.sin() - u * u.cos()) / (2.0 * PI * PI * k.powi(3))
            }
        }
    }
}

/// Fraction of the cell centred at `x` that lies in the closed ball.
fn cell_fraction(x: [f64; 3], d: usize, s: f64, r: f64) -> f64 {
    const SUB: usize = 16;
    if d == 1 {
        let (a, b) = (x[0] - s / 2.0, x[0] + s / 2.0);
        return ((b.min(r) - a.max(-r)).max(0.0)) / s;
    }
    let offs: Vec<f64> = (0..SUB)
        .map(|k| (k as f64 + 0.5) / SUB as f64 * s - s / 2.0)
        .collect();
    let mut inside = 0usize;
    let mut total = 0usize;
    let zs: &[f64] = if d == 3 { &offs } else { &[0.0] };
    for &ox in &offs {
        for &oy in &offs {
            for &oz in zs {
                total += 1;
                let p = [x[0] + ox, x[1] + oy, x[2] + oz];
                if norm3(p) <= r {
                    inside += 1;
                }
            }
        }
    }
    inside as f64 / total as f64
}

/// Evaluates a potential family at the grid nodes.
pub fn sample_potential(spec: &PotentialSpec, grid: &GridSpec) -> Result<PotentialField> {
    spec.validate()?;
    grid.validate()?;
    let compact = spec.is_compact();
    if compact && grid.l < 4.0 * spec.radius {
        return Err(Error::BoxTooSmall {
            l: grid.l,
            r: spec.radius,
        });
    }
    let a = spec.amplitude;
    let r = spec.radius;
    let n = grid.len();
    let values: Vec<Complex64> = match &spec.kind {
        PotentialKind::IndicatorBall => match spec.sampling {
            Sampling::Point => (0..n)
                .map(|i| if norm3(grid.node(i)) <= r { a } else { Complex64::default() })
                .collect(),
            Sampling::CellAverage => {
                let s = grid.spacing();
                (0..n)
                    .map(|i| {
                        let x = grid.node(i);
                        if norm3(x) <= r {
                            a * cell_fraction(x, grid.d, s, r)
                        } else {
                            Complex64::default()
                        }
                    })
                    .collect()
            }
            Sampling::BandLimited => {
                let g = build_grid(*grid)?;
                let mut data: Vec<Complex64> = (0..n)
                    .map(|i| {
                        let xi = grid.frequency(i);
                        Complex64::new(ball_transform(grid.d, r, norm3(xi)), 0.0)
                    })
                    .collect();
                g.inverse(&mut data);
                let cv = grid.cell_volume();
                data.into_iter().map(|v| a * (v.re / cv)).collect()
            }
        },
        PotentialKind::PowerDecay { s } => (0..n)
            .map(|i| a * bracket(norm3(grid.node(i))).powf(-s))
            .collect(),
        PotentialKind::WignerVonNeumann => (0..n)
            .map(|i| a * wigner_von_neumann_profile(norm3(grid.node(i)) / r))
            .collect(),
        PotentialKind::KnappOscillatory { eps } => {
            let long = eps.powi(-2) / 2.0;
            let short = eps.recip() / 2.0;
            let circ = (long * long + (grid.d - 1) as f64 * short * short).sqrt();
            if circ > r * (1.0 + 1e-12) {
                return Err(invalid(
                    "radius",
                    format!("slab circumradius {circ} exceeds declared radius {r}"),
                ));
            }
            (0..n)
                .map(|i| {
                    let x = grid.node(i);
                    let inside =
                        x[0].abs() <= long && (1..grid.d).all(|k| x[k].abs() <= short);
                    if inside {
                        a * Complex64::from_polar(1.0, 2.0 * PI * x[0])
                    } else {
                        Complex64::default()
                    }
                })
                .collect()
        }
        PotentialKind::Tabulated { path } => {
            let rows = read_table(path, grid.d)?;
            let mut values = vec![Complex64::default(); n];
            let s = grid.spacing();
            for (coords, v) in rows {
                let mut k = [0i64; 3];
                for ax in 0..grid.d {
                    let t = coords[ax] / s;
                    let kr = t.round();
                    if (t - kr).abs() > 1e-6 {
                        return Err(Error::Table(format!("row {coords:?} is not on a grid node")));
                    }
                    k[ax] = kr as i64;
                }
                if v != Complex64::default() && norm3(coords) > r * (1.0 + 1e-9) {
                    return Err(Error::SupportViolation(r));
                }
                values[grid.flatten_wrapped(k)] = v * a;
            }
            values
        }
    };
    Ok(PotentialField::new(*grid, values, compact.then_some(r)))
}

/// `(sum |V|^q cellvol)^{1/q}`, cached per `q`.
pub fn lq_norm(field: &PotentialField, q: f64) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(invalid("q", format!("{q} < 1")));
    }
    if let Some(v) = field.norms.lock().unwrap().get(&q.to_bits()) {
        return Ok(*v);
    }
    let cv = field.grid.cell_volume();
    let sum: f64 = field.values.iter().map(|v| v.norm().powf(q)).sum::<f64>() * cv;
    let out = sum.powf(1.0 / q);
    field.norms.lock().unwrap().insert(q.to_bits(), out);
    Ok(out)
}

fn read_table(path: &Path, d: usize) -> Result<Vec<([f64; 3], Complex64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != d + 2 {
            return Err(Error::Table(format!(
                "row {} has {} columns, expected {}",
                line + 1,
                rec.len(),
                d + 2
            )));
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) => {
                let mut x = [0.0; 3];
                x[..d].copy_from_slice(&v[..d]);
                out.push((x, Complex64::new(v[d], v[d + 1])));
            }
            Err(_) if line == 0 => continue,
            Err(e) => return Err(Error::Table(format!("row {}: {e}", line + 1))),
        }
    }
    Ok(out)
}

/// Writes the nonzero nodes as `(coords..., re, im)` rows with a header.
pub fn write_table(field: &PotentialField, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let d = field.grid.d;
    let mut header: Vec<String> = (0..d).map(|a| format!("x{a}")).collect();
    header.push("re".into());
    header.push("im".into());
    w.write_record(&header)?;
    for i in field.support() {
        let x = field.grid.node(i);
        let mut row: Vec<String> = x[..d].iter().map(|c| format!("{c:e}")).collect();
        row.push(format!("{:e}", field.values[i].re));
        row.push(format!("{:e}", field.values[i].im));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One level set of a horizontal dyadic decomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct DyadicLayer {
    pub grid: GridSpec,
    /// Layer index; negative when the cell volume is below 1/2.
    pub i: i32,
    pub h_i: f64,
    pub h_next: f64,
    pub mask: Vec<bool>,
    pub layer_values: Vec<Complex64>,
}

impl DyadicLayer {
    pub fn nodes(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&k| self.mask[k]).collect()
    }
}

/// `H_i = inf{t > 0 : |{|V| > t}| <= 2^{i-1}}` for every index, from sorted magnitudes.
fn threshold(sorted_desc: &[f64], cellvol: f64, i: i32) -> f64 {
    let allowed = (2f64.powi(i - 1) / cellvol).floor();
    if allowed >= sorted_desc.len() as f64 {
        0.0
    } else {
        sorted_desc[allowed as usize]
    }
}

/// Splits `V` into layers `H_{i+1} < |V| <= H_i`; only nonempty layers are returned.
pub fn dyadic_decompose(field: &PotentialField) -> Vec<DyadicLayer> {
    let mut mags: Vec<f64> = field
        .values
        .iter()
        .map(|v| v.norm())
        .filter(|&m| m > 0.0)
        .collect();
    if mags.is_empty() {
        return Vec::new();
    }
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let cv = field.grid.cell_volume();
    // largest i with 2^{i-1} < cellvol, so that H_i = max |V|
    let mut i = cv.log2().floor() as i32 + 1;
    while 2f64.powi(i - 1) >= cv {
        i -= 1;
    }
    while 2f64.powi(i) < cv {
        i += 1;
    }
    let mut layers = Vec::new();
    let mut h_i = threshold(&mags, cv, i);
    while h_i > 0.0 {
        let h_next = threshold(&mags, cv, i + 1);
        let mask: Vec<bool> = field
            .values
            .iter()
            .map(|v| {
                let m = v.norm();
                m > h_next && m <= h_i
            })
            .collect();
        if mask.iter().any(|&b| b) {
            let layer_values = field
                .values
                .iter()
                .zip(&mask)
                .map(|(v, &b)| if b { *v } else { Complex64::default() })
                .collect();
            layers.push(DyadicLayer {
                grid: field.grid,
                i,
                h_i,
                h_next,
                mask,
                layer_values,
            });
        }
        h_i = h_next;
        i += 1;
    }
    layers
}

/// A family of balls of common radius with pairwise `(radius * count)^gamma` separation.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseFamily {
    pub gamma: f64,
    pub radius: f64,
    pub centers: Vec<[f64; 3]>,
    pub nodes: Vec<usize>,
}

impl SparseFamily {
    pub fn min_separation(&self) -> f64 {
        let mut m = f64::INFINITY;
        for a in 0..self.centers.len() {
            for b in a + 1..self.centers.len() {
                m = m.min(dist(self.centers[a], self.centers[b]));
            }
        }
        m
    }

    pub fn required_separation(&self) -> f64 {
        (self.radius * self.centers.len() as f64).powf(self.gamma)
    }
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    norm3([a[0] - b[0], a[1] - b[1], a[2] - b[2]])
}

/// Greedy first-fit with the default family cap `4 K 2^{max(i,0)/K}`.
pub fn sparse_decompose(layer: &DyadicLayer, gamma: f64, k: usize) -> Result<Vec<SparseFamily>> {
    sparse_decompose_with_cap(layer, gamma, k, 4.0)
}

/// Greedy first-fit in decreasing `|V|` order; balls have radius one cell side.
pub fn sparse_decompose_with_cap(
    layer: &DyadicLayer,
    gamma: f64,
    k: usize,
    cap_constant: f64,
) -> Result<Vec<SparseFamily>> {
    if !(gamma > 0.0) {
        return Err(invalid("gamma", "must be positive"));
    }
    if k == 0 {
        return Err(invalid("K", "must be at least 1"));
    }
    let mut nodes = layer.nodes();
    if nodes.is_empty() {
        return Ok(Vec::new());
    }
    nodes.sort_by(|&a, &b| {
        layer.layer_values[b]
            .norm()
            .partial_cmp(&layer.layer_values[a].norm())
            .unwrap()
            .then(a.cmp(&b))
    });
    let radius = layer.grid.spacing();
    let cap = (cap_constant * k as f64 * 2f64.powf(layer.i.max(0) as f64 / k as f64)).ceil() as usize;
    let mut families: Vec<(SparseFamily, f64)> = Vec::new();
    for node in nodes {
        let x = layer.grid.node(node);
        let mut placed = false;
        for (fam, min_d) in families.iter_mut() {
            let d_new = fam.centers.iter().map(|&c| dist(c, x)).fold(*min_d, f64::min);
            let need = (radius * (fam.centers.len() + 1) as f64).powf(gamma);
            if d_new >= need {
                fam.centers.push(x);
                fam.nodes.push(node);
                *min_d = d_new;
                placed = true;
                break;
            }
        }
        if !placed {
            if families.len() == cap {
                return Err(Error::SparseOverflow {
                    cap,
                    layer: layer.i,
                    centers: layer.mask.iter().filter(|&&b| b).count(),
                    gamma,
                });
            }
            families.push((
                SparseFamily {
                    gamma,
                    radius,
                    centers: vec![x],
                    nodes: vec![node],
                },
                f64::INFINITY,
            ));
        }
    }
    Ok(families.into_iter().map(|(f, _)| f).collect())
}
