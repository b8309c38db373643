use conelab::maximal::*;
use conelab::{Field, GridSpec, Repr};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn real_field(n: usize, vals: Vec<f64>) -> Field {
    let grid = GridSpec::new(n, n as f64).unwrap();
    Field::new(grid, vals.into_iter().map(|v| Complex64::new(v, 0.0)).collect(), Repr::Space).unwrap()
}

fn random_field(n: usize, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals = (0..n * n).map(|_| rng.random::<f64>().powi(3)).collect();
    real_field(n, vals)
}

fn indicator(n: usize, cells: &[(usize, usize)]) -> Field {
    let mut v = vec![0.0; n * n];
    for &(a, b) in cells {
        v[a * n + b] = 1.0;
    }
    real_field(n, v)
}

/// Enumeration over periodic placements of dyadic rectangles `h1 x h2` with
/// `keep(h1, h2)`.
fn enumerate_max(f: &Field, keep: impl Fn(usize, usize) -> bool) -> Vec<f64> {
    let n = f.grid().n();
    let abs: Vec<f64> = f.samples().iter().map(|v| v.norm()).collect();
    let mut out = abs.clone();
    let sides: Vec<usize> = (0..).map(|k| 1usize << k).take_while(|&h| h <= n).collect();
    for &h1 in &sides {
        for &h2 in &sides {
            if !keep(h1, h2) {
                continue;
            }
            for p1 in 0..n {
                for p2 in 0..n {
                    let mut s = 0.0;
                    for a in 0..h1 {
                        for b in 0..h2 {
                            s += abs[((p1 + a) % n) * n + (p2 + b) % n];
                        }
                    }
                    let avg = s / (h1 * h2) as f64;
                    for a in 0..h1 {
                        for b in 0..h2 {
                            let i = ((p1 + a) % n) * n + (p2 + b) % n;
                            out[i] = out[i].max(avg);
                        }
                    }
                }
            }
        }
    }
    out
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn strong_matches_enumeration() {
    for (n, seed) in [(8, 1), (16, 2)] {
        let f = random_field(n, seed);
        let fast = strong_maximal(&f);
        let slow = enumerate_max(&f, |_, _| true);
        assert!(max_abs_diff(&fast.samples, &slow) < 1e-12);
        let brute = brute_strong_maximal(&f).unwrap();
        assert!(max_abs_diff(&fast.samples, &brute.samples) < 1e-12);
    }
}

#[test]
fn strong_single_cell_profile() {
    let n = 8;
    let f = indicator(n, &[(2, 3)]);
    let m = strong_maximal(&f);
    let expect = enumerate_max(&f, |_, _| true);
    assert_eq!(m.samples[2 * n + 3], 1.0);
    assert!(max_abs_diff(&m.samples, &expect) < 1e-15);
    // One cell to the right: a 1x2 rectangle covers both.
    assert!((m.samples[2 * n + 4] - 0.5).abs() < 1e-15);
    // Three cells down: the smallest dyadic cover is 4x1.
    assert!((m.samples[5 * n + 3] - 0.25).abs() < 1e-15);
}

#[test]
fn constant_input_is_reproduced() {
    let f = real_field(16, vec![-2.5; 256]);
    for m in [
        strong_maximal(&f),
        directional_maximal(&f, 0.3).unwrap(),
        kakeya(&f, 1.0, 1.0, 4).unwrap(),
        sector_maximal(&f, std::f64::consts::FRAC_PI_8, 4).unwrap(),
        power_maximal(&f, 1.5, MaximalBase::Strong).unwrap(),
    ] {
        assert!(m.samples.iter().all(|&v| (v - 2.5).abs() < 1e-12), "{:?}", &m.samples[..4]);
    }
}

#[test]
fn horizontal_direction_equals_long_axis_enumeration() {
    let f = random_field(16, 5);
    let m = directional_maximal(&f, 0.0).unwrap();
    let expect = enumerate_max(&f, |h1, h2| h1 >= h2);
    assert!(max_abs_diff(&m.samples, &expect) < 1e-12);
}

#[test]
fn kakeya_single_cell_reach() {
    let n = 32;
    let f = indicator(n, &[(4, 4)]);
    let k = kakeya(&f, 1.0, 8.0, 8).unwrap();
    // An 8x1 rectangle along the first axis, and its 45 degree shear.
    assert!(k.samples[11 * n + 4] >= 1.0 / 8.0 - 1e-15);
    assert!(k.samples[11 * n + 11] >= 1.0 / 8.0 - 1e-15);
}

#[test]
fn bar_along_slope_is_seen_by_matching_direction_only() {
    let n = 64;
    // Bar along (1, 0.5): cells (16 + 2s, 16 + s) and (17 + 2s, 16 + s).
    let mut cells = Vec::new();
    for s in 0..8 {
        cells.push((16 + 2 * s, 16 + s));
        cells.push((17 + 2 * s, 16 + s));
    }
    let f = indicator(n, &cells);
    let plus = directional_maximal(&f, 0.5).unwrap();
    let minus_only = menu_maximal_field(
        &f,
        &RectangleMenu { directions: vec![-0.5], ..RectangleMenu::directional(n, 0.5) },
    )
    .unwrap();
    let brute = brute_directional_maximal(&f, 0.5, 32).unwrap();
    // Extension of the bar axis beyond its end.
    for d in [2usize, 4, 8] {
        let (a, b) = (32 + 2 * d - 1, 24 + d - 1);
        let i = a * n + b;
        assert!(plus.samples[i] > minus_only.samples[i], "d = {d}");
        assert!(plus.samples[i] >= 0.25, "d = {d}: {}", plus.samples[i]);
        let r = plus.samples[i] / brute.samples[i];
        assert!((0.5..=2.0).contains(&r), "d = {d}: ratio {r}");
    }
}

#[test]
fn sheared_agrees_with_rasterized_rectangles_within_factor_two() {
    let n = 32;
    let f = random_field(n, 9);
    for t in [0.25, 0.5, 1.0] {
        let menu = RectangleMenu {
            lengths: vec![1, 2, 4, 8, 16],
            widths: vec![1, 2, 4, 8, 16],
            ..RectangleMenu::directional(n, t)
        };
        let fast = menu_maximal_field(&f, &menu).unwrap();
        let brute = brute_directional_maximal(&f, t, 16).unwrap();
        for (a, b) in fast.samples.iter().zip(&brute.samples) {
            let r = a / b;
            assert!((0.5..=2.0).contains(&r), "t = {t}: {a} vs {b}");
        }
    }
}

#[test]
fn output_of_direction_invariant_input_is_invariant() {
    let n = 32;
    // Constant along (2, 1): depends on y2 - y1/2 only through 2 y2 - y1.
    let vals: Vec<f64> = (0..n * n)
        .map(|i| {
            let (y1, y2) = ((i / n) as f64, (i % n) as f64);
            let s = (2.0 * y2 - y1) / n as f64;
            1.5 + (std::f64::consts::TAU * s).sin()
        })
        .collect();
    let f = real_field(n, vals);
    let m = directional_maximal(&f, 0.5).unwrap();
    for y1 in 0..n {
        for y2 in 0..n {
            let a = m.samples[y1 * n + y2];
            let b = m.samples[((y1 + 2) % n) * n + (y2 + 1) % n];
            assert!((a - b).abs() < 1e-6);
        }
    }
}

#[test]
fn power_maximal_dominates_and_tends_to_base() {
    let f = random_field(16, 3);
    let base = strong_maximal(&f);
    let p = power_maximal(&f, 1.5, MaximalBase::Strong).unwrap();
    assert!(p.samples.iter().zip(&base.samples).all(|(a, b)| *a >= *b - 1e-12));
    let near = power_maximal(&f, 1.0 + 1e-6, MaximalBase::Strong).unwrap();
    assert!(max_abs_diff(&near.samples, &base.samples) < 1e-4);
}

#[test]
fn sector_growth_is_slow() {
    let n = 64;
    let mut worst = Vec::new();
    for big_n in [4usize, 8, 16, 32] {
        let mut best: f64 = 0.0;
        for seed in 0..3 {
            let f = random_field(n, 100 + seed);
            let m = sector_maximal(&f, std::f64::consts::FRAC_PI_4, big_n).unwrap();
            let norm_f: f64 = f.samples().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            let norm_m: f64 = m.samples.iter().map(|v| v * v).sum::<f64>().sqrt();
            best = best.max(norm_m / norm_f);
        }
        worst.push(best);
    }
    for w in worst.windows(2) {
        assert!(w[1] / w[0] <= 1.6, "{worst:?}");
    }
}

#[test]
fn invalid_parameters_are_rejected() {
    let f = random_field(8, 0);
    assert!(directional_maximal(&f, 1.5).is_err());
    assert!(kakeya(&f, 2.0, 1.0, 4).is_err());
    assert!(kakeya(&f, 1.0, 8.0, 4).is_err());
    assert!(sector_maximal(&f, 1.0, 4).is_err());
    assert!(sector_maximal(&f, 0.5, 0).is_err());
    assert!(power_maximal(&f, 2.5, MaximalBase::Strong).is_err());
    let big = real_field(128, vec![0.0; 128 * 128]);
    assert!(brute_strong_maximal(&big).is_err());
}

fn small_field() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pointwise_lower_bound(v in small_field(), t in -1.0f64..1.0) {
        let f = real_field(8, v.clone());
        for m in [strong_maximal(&f), directional_maximal(&f, t).unwrap()] {
            for (a, b) in m.samples.iter().zip(&v) {
                prop_assert!(*a >= b.abs());
            }
        }
    }

    #[test]
    fn sublinear(a in small_field(), b in small_field(), t in -1.0f64..1.0) {
        let fa = real_field(8, a.clone());
        let fb = real_field(8, b.clone());
        let fs = real_field(8, a.iter().zip(&b).map(|(x, y)| x + y).collect());
        let ops: [&dyn Fn(&Field) -> MaxField; 3] = [
            &|f| strong_maximal(f),
            &|f| directional_maximal(f, t).unwrap(),
            &|f| kakeya(f, 1.0, 4.0, 4).unwrap(),
        ];
        for op in ops {
            let (ma, mb, ms) = (op(&fa), op(&fb), op(&fs));
            for i in 0..64 {
                prop_assert!(ms.samples[i] <= ma.samples[i] + mb.samples[i] + 1e-12);
            }
        }
    }

    #[test]
    fn monotone(v in small_field(), s in prop::collection::vec(0.0f64..1.0, 64), t in -1.0f64..1.0) {
        let small = real_field(8, v.iter().zip(&s).map(|(x, k)| x * k).collect());
        let big = real_field(8, v);
        let (a, b) = (directional_maximal(&small, t).unwrap(), directional_maximal(&big, t).unwrap());
        for i in 0..64 {
            prop_assert!(a.samples[i] <= b.samples[i]);
        }
    }

    #[test]
    fn larger_menu_never_decreases(v in small_field(), t in -1.0f64..1.0) {
        let f = real_field(8, v);
        let full = RectangleMenu::directional(8, t);
        let sub = RectangleMenu { lengths: vec![1, 4], widths: vec![1], ..full.clone() };
        let (a, b) = (menu_maximal_field(&f, &sub).unwrap(), menu_maximal_field(&f, &full).unwrap());
        for i in 0..64 {
            prop_assert!(a.samples[i] <= b.samples[i]);
        }
    }
}
