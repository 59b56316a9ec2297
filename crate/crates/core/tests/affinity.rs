use avae_core::affinity::{
    build_affinity, fft_nd, fft_real, fsc_average, fsc_curve, ifft_nd, mean_difference, overlap_kernel, AffinityError,
    Metric,
};
use avae_core::datagen::{canonical_exemplar, canonical_glyph, rotate_2d, DatasetKind, Grid, GLYPH_ROSTER};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Textbook O(N²) multidimensional DFT.
fn naive_dft(dims: &[usize], values: &[f64]) -> Vec<Complex64> {
    let total = values.len();
    let unravel = |mut flat: usize| {
        let mut idx = vec![0usize; dims.len()];
        for a in (0..dims.len()).rev() {
            idx[a] = flat % dims[a];
            flat /= dims[a];
        }
        idx
    };
    (0..total)
        .map(|k| {
            let kk = unravel(k);
            let mut acc = Complex64::new(0.0, 0.0);
            for (x, &v) in values.iter().enumerate() {
                let xx = unravel(x);
                let phase: f64 = (0..dims.len()).map(|a| (kk[a] * xx[a]) as f64 / dims[a] as f64).sum();
                acc += v * Complex64::from_polar(1.0, -2.0 * PI * phase);
            }
            acc
        })
        .collect()
}

/// Shell correlation computed straight from the definition with explicit loops.
fn oracle_fsc(n: usize, a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let dims = [n, n, n];
    let fa = naive_dft(&dims, a);
    let fb = naive_dft(&dims, b);
    let half = n / 2;
    let mut num = vec![Complex64::new(0.0, 0.0); half + 1];
    let mut d1 = vec![0.0; half + 1];
    let mut d2 = vec![0.0; half + 1];
    let mut cnt = vec![0usize; half + 1];
    let signed = |i: usize| if i < n / 2 { i as f64 } else { i as f64 - n as f64 };
    for z in 0..n {
        for y in 0..n {
            for x in 0..n {
                let r = (signed(z).powi(2) + signed(y).powi(2) + signed(x).powi(2)).sqrt();
                let s = r.floor() as usize;
                if s > half {
                    continue;
                }
                let i = (z * n + y) * n + x;
                num[s] += fa[i] * fb[i].conj();
                d1[s] += fa[i].norm_sqr();
                d2[s] += fb[i].norm_sqr();
                cnt[s] += 1;
            }
        }
    }
    let corr = (0..=half)
        .map(|s| {
            let den = (d1[s] * d2[s]).sqrt();
            if den > 0.0 {
                num[s].re / den
            } else {
                0.0
            }
        })
        .collect();
    (corr, cnt)
}

fn random_values(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random::<f64>()).collect()
}

fn random_grid(seed: u64, rank: usize, size: usize) -> Grid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Grid::from_fn(rank, size, |_| rng.random::<f32>())
}

#[test]
fn fft_matches_naive_dft_for_all_small_extents() {
    let mut seed = 0;
    for rank in 1..=3 {
        for n in [4usize, 8, 16] {
            if rank == 3 && n == 16 {
                // 4096² naive evaluations; covered by the 8³ case and the property test
                continue;
            }
            let dims = vec![n; rank];
            let values = random_values(seed, dims.iter().product());
            seed += 1;
            let fast = fft_real(&dims, &values).unwrap();
            let slow = naive_dft(&dims, &values);
            let err = fast.coefficients.iter().zip(&slow).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err <= 1e-9, "dims {dims:?}: max err {err}");
        }
    }
}

#[test]
fn fft_16_cubed_matches_separable_oracle() {
    // The 3D DFT factorises into 1D DFTs per axis; use the naive 1D DFT on each axis.
    let n = 16;
    let values = random_values(99, n * n * n);
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    for axis in 0..3 {
        let stride = n.pow(2 - axis as u32);
        for start in 0..n * n * n {
            if (start / stride) % n != 0 {
                continue;
            }
            let line: Vec<Complex64> = (0..n).map(|i| data[start + i * stride]).collect();
            for k in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for (x, v) in line.iter().enumerate() {
                    acc += v * Complex64::from_polar(1.0, -2.0 * PI * (k * x) as f64 / n as f64);
                }
                data[start + k * stride] = acc;
            }
        }
    }
    let fast = fft_real(&[n, n, n], &values).unwrap();
    let err = fast.coefficients.iter().zip(&data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(err <= 1e-9, "max err {err}");
}

#[test]
fn fsc_matches_brute_force_oracle_on_fixed_pairs() {
    for (sa, sb) in [(1u64, 2u64), (3, 4), (5, 6)] {
        let a = random_grid(sa, 3, 8);
        let b = random_grid(sb, 3, 8);
        let curve = fsc_curve(&a, &b).unwrap();
        let (corr, cnt) = oracle_fsc(8, &a.to_f64(), &b.to_f64());
        for (s, shell) in curve.iter().enumerate() {
            assert_eq!(shell.count, cnt[s]);
            assert!((shell.correlation - corr[s]).abs() <= 1e-9, "shell {s}");
        }
        let total: usize = cnt.iter().sum();
        let oracle_avg: f64 = corr.iter().zip(&cnt).map(|(c, &k)| c * k as f64).sum::<f64>() / total as f64;
        assert!((fsc_average(&a, &b).unwrap() - oracle_avg).abs() <= 1e-9);
    }
}

#[test]
fn fsc_self_scale_and_symmetry() {
    let v = random_grid(11, 3, 8);
    let w = random_grid(12, 3, 8);
    let twice = v.map(|x| 2.0 * x);
    for shell in fsc_curve(&v, &twice).unwrap() {
        if shell.count > 0 {
            assert!((shell.correlation - 1.0).abs() < 1e-12);
        }
    }
    assert!((fsc_average(&v, &v).unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(fsc_average(&v, &w).unwrap(), fsc_average(&w, &v).unwrap());
}

#[test]
fn mean_difference_matches_loop_and_is_translation_covariant() {
    let a = random_grid(21, 2, 16);
    let b = random_grid(22, 2, 16);
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += f64::from(a.values()[i]) - f64::from(b.values()[i]);
    }
    let md = mean_difference(&a, &b).unwrap();
    assert!((md.raw - acc / a.len() as f64).abs() <= 1e-12);

    // cyclic shift of both grids by the same offset permutes the summands identically
    let shift = |g: &Grid| {
        let n = g.size();
        Grid::from_fn(2, n, |i| {
            let (y, x) = (i / n, i % n);
            g.values()[((y + 3) % n) * n + (x + 5) % n]
        })
    };
    let shifted = mean_difference(&shift(&a), &shift(&b)).unwrap();
    let mut acc2 = 0.0;
    for i in 0..a.len() {
        acc2 += f64::from(shift(&a).values()[i]) - f64::from(shift(&b).values()[i]);
    }
    assert_eq!(shifted.raw, acc2 / a.len() as f64);
    assert!((shifted.raw - md.raw).abs() < 1e-12);
}

#[test]
fn overlap_self_and_rotated_copies() {
    let g = canonical_glyph('k', 32).unwrap();
    assert!((overlap_kernel(&g, &g, 2.0, 8).unwrap() - 1.0).abs() < 1e-9);
    for j in 1..8 {
        let r = rotate_2d(&g, 45.0 * j as f64);
        let k = overlap_kernel(&g, &r, 2.0, 8).unwrap();
        assert!((k - 1.0).abs() <= 0.02, "rotation {j}: {k}");
    }
}

#[test]
fn overlap_invariant_under_joint_rotation() {
    let a = canonical_glyph('b', 32).unwrap();
    let b = canonical_glyph('p', 32).unwrap();
    let base = overlap_kernel(&a, &b, 2.0, 12).unwrap();
    for angle in [30.0, 90.0, 150.0] {
        let k = overlap_kernel(&rotate_2d(&a, angle), &rotate_2d(&b, angle), 2.0, 12).unwrap();
        assert!((k - base).abs() <= 0.02, "angle {angle}: {k} vs {base}");
    }
}

#[test]
fn glyph_b_closer_to_d_than_to_i() {
    let b = canonical_glyph('b', 32).unwrap();
    let d = canonical_glyph('d', 32).unwrap();
    let i = canonical_glyph('i', 32).unwrap();
    let bd = overlap_kernel(&b, &d, 2.0, 12).unwrap();
    let bi = overlap_kernel(&b, &i, 2.0, 12).unwrap();
    assert!(bd > bi, "b-d {bd} vs b-i {bi}");
}

#[test]
fn overlap_argument_errors() {
    let g = canonical_glyph('a', 32).unwrap();
    assert!(matches!(overlap_kernel(&g, &g, 0.0, 8), Err(AffinityError::Config(_))));
    assert!(matches!(overlap_kernel(&g, &g, 1.0, 3), Err(AffinityError::Config(_))));
}

fn tetromino_classes(size: usize) -> Vec<(String, Grid)> {
    ["I", "L", "T", "S", "O", "E"]
        .iter()
        .map(|c| (c.to_string(), canonical_exemplar(&DatasetKind::Tetromino, c, size).unwrap()))
        .collect()
}

fn assert_invariants(m: &avae_core::affinity::AffinityMatrix) {
    let n = m.len();
    for i in 0..n {
        assert_eq!(m.get(i, i), 1.0);
        for j in 0..n {
            assert_eq!(m.get(i, j), m.get(j, i));
            assert!((-1.0..=1.0).contains(&m.get(i, j)));
        }
    }
}

#[test]
fn tetromino_matrices_hold_invariants_and_order() {
    for size in [16, 32] {
        let classes = tetromino_classes(size);
        for metric in [Metric::Fsc, Metric::MeanDifference] {
            assert_invariants(&build_affinity(&classes, metric).unwrap());
        }
        let fsc = build_affinity(&classes, Metric::Fsc).unwrap();
        assert!(fsc.by_name("E", "L").unwrap() > fsc.by_name("E", "O").unwrap(), "size {size}");
    }
}

#[test]
fn glyph_overlap_matrix_holds_invariants() {
    let classes: Vec<(String, Grid)> =
        GLYPH_ROSTER.iter().map(|&c| (c.to_string(), canonical_glyph(c, 32).unwrap())).collect();
    assert_invariants(&build_affinity(&classes, Metric::overlap()).unwrap());
}

#[test]
fn overlap_metric_rejects_volumes() {
    let classes = tetromino_classes(8);
    assert!(matches!(
        build_affinity(&classes[..2], Metric::overlap()),
        Err(AffinityError::Metric { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fft_matches_naive_dft(rank in 1usize..=3, e in 0usize..2, seed in any::<u64>()) {
        let n = [4usize, 8][e];
        let dims = vec![n; rank];
        let values = random_values(seed, dims.iter().product());
        let fast = fft_real(&dims, &values).unwrap();
        let slow = naive_dft(&dims, &values);
        for (a, b) in fast.coefficients.iter().zip(&slow) {
            prop_assert!((a - b).norm() <= 1e-9);
        }
    }

    #[test]
    fn hermitian_parseval_and_inverse(seed in any::<u64>()) {
        let g = random_grid(seed, 3, 8);
        let s = fft_nd(&g).unwrap();
        let n = 8;
        for z in 0..n { for y in 0..n { for x in 0..n {
            let i = (z * n + y) * n + x;
            let j = (((n - z) % n) * n + (n - y) % n) * n + (n - x) % n;
            prop_assert!((s.coefficients[i] - s.coefficients[j].conj()).norm() <= 1e-9);
        }}}
        let spatial: f64 = g.to_f64().iter().map(|v| v * v).sum();
        let spectral: f64 = s.coefficients.iter().map(|c| c.norm_sqr()).sum::<f64>() / g.len() as f64;
        prop_assert!((spatial - spectral).abs() <= 1e-9 * spatial.max(1.0));
        let back = ifft_nd(&s).unwrap();
        for (a, b) in g.values().iter().zip(back.values()) {
            prop_assert!((a - b).abs() <= 1e-6);
        }
    }

    #[test]
    fn fsc_average_bounded_and_positive_scale_gives_one(sa in any::<u64>(), sb in any::<u64>(), c in 0.1f32..10.0) {
        let a = random_grid(sa, 3, 8);
        let b = random_grid(sb, 3, 8);
        let v = fsc_average(&a, &b).unwrap();
        prop_assert!((-1.0..=1.0).contains(&v));
        let scaled = a.map(|x| c * x);
        prop_assert!((fsc_average(&a, &scaled).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn random_matrices_hold_invariants(seed in any::<u64>(), m in 2usize..5) {
        let classes: Vec<(String, Grid)> =
            (0..m).map(|k| (format!("c{k}"), random_grid(seed.wrapping_add(k as u64), 2, 16))).collect();
        for metric in [Metric::Fsc, Metric::MeanDifference, Metric::Overlap { sigma: 1.5, rotations: 4 }] {
            assert_invariants(&build_affinity(&classes, metric).unwrap());
        }
    }
}
