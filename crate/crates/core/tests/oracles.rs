//! Independent reference computations checked against the library.

use std::f64::consts::PI;

use faer::linalg::solvers::Solve;
use faer::Mat;
use ltlab_core::bs::{assemble_bs, gelfand_spr};
use ltlab_core::extension::{build_net, extension_matrix};
use ltlab_core::linalg::singular_values;
use ltlab_core::potential::{
    dyadic_decompose, sample_potential, sparse_decompose, DyadicLayer, PotentialKind,
};
use ltlab_core::randomize::{draw_omega, tail_table};
use ltlab_core::spectra::spectrum;
use ltlab_core::*;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::*;

#[test]
fn square_well_root() {
    let kappa = square_well_kappa(2.0, 1.0);
    assert!((kappa - 1.0989975740313485).abs() < 1e-12);
}

#[test]
fn square_well_ground_state() {
    let g = GridSpec::new(1, 16.0, 256);
    let grid = build_grid(g).unwrap();
    let spec = PotentialSpec::indicator_ball(c(2.0, 0.0), 1.0).with_sampling(Sampling::BandLimited);
    let v = sample_potential(&spec, &g).unwrap();
    let pts = spectrum(&grid, &v).unwrap();
    let e0 = -square_well_kappa(2.0, 1.0).powi(2);
    let lowest = pts[0].z;
    assert!(lowest.im.abs() < 1e-8);
    assert!(((lowest.re - e0) / e0).abs() < 1e-4, "{lowest} vs {e0}");
}

#[test]
fn bs_has_unit_eigenvalue_at_ground_state() {
    let g = GridSpec::new(1, 16.0, 256);
    let grid = build_grid(g).unwrap();
    let v = sample_potential(&PotentialSpec::indicator_ball(c(2.0, 0.0), 1.0), &g).unwrap();
    let z = spectrum(&grid, &v).unwrap()[0].z;
    assert!((z.re - -square_well_kappa(2.0, 1.0).powi(2)).abs() < 0.05);
    let bs = assemble_bs(&grid, &v, z).unwrap();
    let n = bs.matrix.nrows();
    let shifted = Mat::from_fn(n, n, |i, j| {
        let id = if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) };
        id - bs.matrix[(i, j)]
    });
    let s = singular_values(&shifted).unwrap();
    assert!(*s.last().unwrap() < 1e-6, "{}", s.last().unwrap());
}

#[test]
fn resolvent_matches_dense_inverse() {
    for g in [GridSpec::new(1, 8.0, 32), GridSpec::new(2, 6.0, 16)] {
        let grid = build_grid(g).unwrap();
        let a = dense_from_symbol(&g, |lap| lap + 1.0);
        let spike = g.len() / 3;
        let mut rhs = Mat::<Complex64>::zeros(g.len(), 1);
        rhs[(spike, 0)] = c(1.0, 0.0);
        let want = a.partial_piv_lu().solve(&rhs);
        let mut field = vec![c(0.0, 0.0); g.len()];
        field[spike] = c(1.0, 0.0);
        let got = grid
            .apply_multiplier(&grid.resolvent_symbol(c(-1.0, 0.0)).unwrap(), &field)
            .unwrap();
        let num: f64 = (0..g.len()).map(|i| (got[i] - want[(i, 0)]).norm_sqr()).sum();
        let den: f64 = (0..g.len()).map(|i| want[(i, 0)].norm_sqr()).sum();
        assert!((num / den).sqrt() < 1e-8, "d={} rel {}", g.d, (num / den).sqrt());
    }
}

#[test]
fn singular_values_match_gram_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let n = 50;
    let m = random_matrix(n, &mut rng);
    // G = M* M as the real symmetric embedding [[Re, -Im], [Im, Re]]
    let mut gram = vec![c(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            gram[i * n + j] = (0..n).map(|k| m[(k, i)].conj() * m[(k, j)]).sum();
        }
    }
    let big = 2 * n;
    let mut emb = vec![0.0; big * big];
    for i in 0..n {
        for j in 0..n {
            let g = gram[i * n + j];
            emb[i * big + j] = g.re;
            emb[i * big + j + n] = -g.im;
            emb[(i + n) * big + j] = g.im;
            emb[(i + n) * big + j + n] = g.re;
        }
    }
    let mut ev = jacobi_eigenvalues(emb, big);
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let want: Vec<f64> = ev.iter().step_by(2).map(|e| e.max(0.0).sqrt()).collect();
    let got = singular_values(&m).unwrap();
    for (g, w) in got.iter().zip(&want) {
        assert!(((g - w) / w).abs() < 1e-10, "{g} vs {w}");
    }
}

#[test]
fn gelfand_matches_dense_eigensolve() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let m = random_matrix(100, &mut rng);
    let want = m
        .eigenvalues()
        .unwrap()
        .iter()
        .map(|z: &Complex64| z.norm())
        .fold(0.0, f64::max);
    let got = gelfand_spr(&m, 200, 1e-12).unwrap().radius;
    assert!(((got - want) / want).abs() < 1e-6, "{got} vs {want}");
}

#[test]
fn extension_of_constant_is_bessel() {
    let (lambda, r) = (1.0, 8.0);
    let net = build_net(lambda, r, 2).unwrap();
    let xs: Vec<[f64; 3]> = (0..41)
        .map(|k| {
            let t = r / 2.0 * k as f64 / 40.0;
            [t * 0.6, t * 0.8, 0.0]
        })
        .collect();
    let e = extension_matrix(&net, &xs);
    for (i, x) in xs.iter().enumerate() {
        let eg: Complex64 = (0..net.len()).map(|j| e[(i, j)]).sum();
        let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let want = 2.0 * PI * lambda * j0_series(2.0 * PI * lambda * rho);
        let err = (eg - c(want, 0.0)).norm();
        assert!(err <= 0.01 * want.abs().max(1e-6), "|x|={rho}: {eg} vs {want}");
    }
}

fn check_layers(field: &PotentialField, layers: &[DyadicLayer]) {
    let mags: Vec<f64> = field.values.iter().map(|v| v.norm()).collect();
    let cv = field.grid.cell_volume();
    for layer in layers {
        assert_eq!(layer.h_i, brute_threshold(&mags, cv, layer.i));
        assert_eq!(layer.h_next, brute_threshold(&mags, cv, layer.i + 1));
        for (k, &m) in mags.iter().enumerate() {
            assert_eq!(layer.mask[k], m > layer.h_next && m <= layer.h_i);
        }
    }
    // every nonzero node lands in exactly one layer
    for (k, &m) in mags.iter().enumerate() {
        let hits = layers.iter().filter(|l| l.mask[k]).count();
        assert_eq!(hits, usize::from(m > 0.0));
    }
}

#[test]
fn dyadic_thresholds_match_scan() {
    let g = GridSpec::new(1, 4.0, 4);
    let values = vec![c(4.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(1.0, 0.0)];
    let f = PotentialField::new(g, values, None);
    let layers = dyadic_decompose(&f);
    check_layers(&f, &layers);
    assert_eq!(layers.len(), 2);
    assert_eq!(layers[0].nodes(), vec![0]);
    assert_eq!(layers[1].nodes(), vec![1, 2, 3]);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (d, l, n) in [(1, 16.0, 64), (2, 8.0, 16), (2, 40.0, 16)] {
        let g = GridSpec::new(d, l, n);
        let values = (0..g.len())
            .map(|_| {
                if uniform(&mut rng) < 0.3 {
                    c(0.0, 0.0)
                } else {
                    c(gaussian(&mut rng), gaussian(&mut rng)) * 4.0
                }
            })
            .collect();
        let f = PotentialField::new(g, values, None);
        check_layers(&f, &dyadic_decompose(&f));
    }
}

fn valid_family(centers: &[[f64; 3]], radius: f64, gamma: f64) -> bool {
    let need = (radius * centers.len() as f64).powf(gamma);
    for a in 0..centers.len() {
        for b in a + 1..centers.len() {
            let d: f64 = (0..3).map(|k| (centers[a][k] - centers[b][k]).powi(2)).sum::<f64>().sqrt();
            if d < need {
                return false;
            }
        }
    }
    true
}

/// Fewest valid families over all assignments of the centers.
fn min_families(centers: &[[f64; 3]], radius: f64, gamma: f64) -> usize {
    let n = centers.len();
    let mut best = n;
    let mut labels = vec![0usize; n];
    fn rec(
        i: usize,
        used: usize,
        labels: &mut Vec<usize>,
        centers: &[[f64; 3]],
        radius: f64,
        gamma: f64,
        best: &mut usize,
    ) {
        if used >= *best {
            return;
        }
        if i == centers.len() {
            let ok = (0..used).all(|f| {
                let fam: Vec<[f64; 3]> =
                    (0..centers.len()).filter(|&k| labels[k] == f).map(|k| centers[k]).collect();
                valid_family(&fam, radius, gamma)
            });
            if ok {
                *best = used;
            }
            return;
        }
        for f in 0..=used {
            labels[i] = f;
            rec(i + 1, used.max(f + 1), labels, centers, radius, gamma, best);
        }
    }
    rec(0, 0, &mut labels, centers, radius, gamma, &mut best);
    best
}

fn layer_on(g: GridSpec, nodes: &[usize]) -> DyadicLayer {
    let mut values = vec![c(0.0, 0.0); g.len()];
    for (k, &i) in nodes.iter().enumerate() {
        values[i] = c(1.0 + 0.01 * k as f64, 0.0);
    }
    let f = PotentialField::new(g, values, None);
    let mut layers = dyadic_decompose(&f);
    assert!(!layers.is_empty());
    let mut layer = layers.remove(0);
    // merge everything into one layer so the family split is the only variable
    layer.mask = f.values.iter().map(|v| v.norm() > 0.0).collect();
    layer.layer_values = f.values.clone();
    layer
}

#[test]
fn sparse_families_against_exhaustive_search() {
    let g = GridSpec::new(1, 32.0, 32);
    // four adjacent unit cells
    let layer = layer_on(g, &[0, 1, 2, 3]);
    let fams = sparse_decompose(&layer, 1.0, 1).unwrap();
    let centers: Vec<[f64; 3]> = [0usize, 1, 2, 3].iter().map(|&i| g.node(i)).collect();
    let best = min_families(&centers, g.spacing(), 1.0);
    assert!(best >= 2);
    assert!(fams.len() >= best);
    for f in &fams {
        assert!(valid_family(&f.centers, f.radius, f.gamma));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let mut nodes: Vec<usize> = (0..g.len()).collect();
        for i in (1..nodes.len()).rev() {
            nodes.swap(i, (rng.next_u64() % (i as u64 + 1)) as usize);
        }
        nodes.truncate(2 + (rng.next_u64() % 7) as usize);
        let layer = layer_on(g, &nodes);
        let gamma = 0.5 + uniform(&mut rng);
        let fams = sparse_decompose(&layer, gamma, 2).unwrap();
        let centers: Vec<[f64; 3]> = nodes.iter().map(|&i| g.node(i)).collect();
        assert!(fams.len() >= min_families(&centers, g.spacing(), gamma));
        let covered: usize = fams.iter().map(|f| f.nodes.len()).sum();
        assert_eq!(covered, nodes.len());
        for f in &fams {
            assert!(valid_family(&f.centers, f.radius, f.gamma));
        }
    }
}

#[test]
fn gaussian_cells_have_unit_variance() {
    let g = GridSpec::new(1, 131072.0, 131072);
    let spec = OmegaSpec::new(1.0, Distribution::Gaussian, 2024);
    let om = draw_omega(&spec, &g).unwrap();
    let v = om.values();
    assert!(v.len() >= 100_000);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((0.97..=1.03).contains(&var), "{var}");
    assert!(mean.abs() < 0.02);
}

#[test]
fn tail_of_normal_absolute_values() {
    let want = erfc(2.0 / 2f64.sqrt());
    assert!((want - 0.0455).abs() < 1e-4);
    // a 95% interval should cover the true fraction for nearly every seed
    let mut covered = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<f64> = (0..2000).map(|_| gaussian(&mut rng).abs()).collect();
        let row = tail_table(&samples, &[2.0]).unwrap()[0];
        if row.wilson_lo <= want && want <= row.wilson_hi {
            covered += 1;
        }
    }
    assert!(covered >= 88, "covered {covered}/100");
}

#[test]
fn power_decay_l1_matches_quadrature() {
    let g = GridSpec::new(1, 64.0, 512);
    let spec = PotentialSpec {
        kind: PotentialKind::PowerDecay { s: 2.0 },
        amplitude: c(1.0, 0.0),
        radius: 1.0,
        sampling: Sampling::Point,
    };
    let v = sample_potential(&spec, &g).unwrap();
    let want = 2.0 * simpson(&|x| (2.0 + x).powi(-2), 0.0, 32.0, 1e-12);
    let got = v.lq_norm(1.0).unwrap();
    assert!(((got - want) / want).abs() < 0.01, "{got} vs {want}");
}

#[test]
fn bs_spectrum_transposes_with_conjugate() {
    // BS for conj(V) at conj(z) has the conjugate spectrum
    let g = GridSpec::new(1, 8.0, 64);
    let grid = build_grid(g).unwrap();
    let v = sample_potential(&PotentialSpec::indicator_ball(c(1.0, 2.0), 1.0), &g).unwrap();
    let z = c(-0.5, 0.3);
    let a = assemble_bs(&grid, &v, z).unwrap();
    let b = assemble_bs(&grid, &v.conj(), z.conj()).unwrap();
    let mut ea: Vec<Complex64> = a.matrix.eigenvalues().unwrap();
    let mut eb: Vec<Complex64> = b.matrix.eigenvalues().unwrap().iter().map(|z| z.conj()).collect();
    let key = |z: &Complex64| (z.re * 1e6).round() as i64 * 1_000_000_000 + (z.im * 1e6).round() as i64;
    ea.sort_by_key(key);
    eb.sort_by_key(key);
    for (x, y) in ea.iter().zip(&eb) {
        assert!((x - y).norm() < 1e-9);
    }
}
