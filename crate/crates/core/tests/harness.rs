use conelab::geometry::FrequencyRegion;
use conelab::harness::*;
use conelab::{Error, Field, GridSpec, Repr};
use proptest::prelude::*;

fn grid() -> GridSpec {
    GridSpec::new(64, 8.0).unwrap()
}

fn packet_spec(normalization: Option<Normalization>) -> TestFunctionSpec {
    TestFunctionSpec {
        family: TestFamily::GaussianPacket {
            center: (3.0, 5.0),
            freq_center: (0.5, -0.25),
            widths: (0.6, 0.55),
            orientation: 0.7,
        },
        grid: grid(),
        normalization,
    }
}

fn product(f: &Field, g: &Field) -> conelab::Result<Field> {
    let (a, b) = (f.to_space(), g.to_space());
    let s = a.samples().iter().zip(b.samples()).map(|(x, y)| x * y).collect();
    Field::new(a.grid(), s, Repr::Space)
}

fn small_mix() -> TestMix {
    TestMix { weights: [0.0, 0.6, 0.3, 0.1], ..TestMix::new(FrequencyTarget::Band) }
}

#[test]
fn packet_normalization() {
    for p in [1.0, 2.0, 4.0] {
        let f = gen_test_function(&packet_spec(Some(Normalization { p, value: 1.0 })), 0).unwrap();
        assert!((lp_norm(&f, p) - 1.0).abs() < 1e-10, "p = {p}");
    }
    let f = gen_test_function(&packet_spec(None), 0).unwrap();
    assert!(lp_norm(&f, 2.0) > 0.0);
}

#[test]
fn packet_too_wide_is_rejected() {
    let mut spec = packet_spec(None);
    spec.family = TestFamily::GaussianPacket {
        center: (0.0, 0.0),
        freq_center: (0.0, 0.0),
        widths: (1.0, 0.8),
        orientation: 0.0,
    };
    assert!(gen_test_function(&spec, 0).is_err());
}

#[test]
fn rademacher_parseval() {
    let g = grid();
    let regions = vec![
        FrequencyRegion::Rectangle { lo: (-1.0, 0.5), hi: (-0.5, 1.0) },
        FrequencyRegion::Rectangle { lo: (0.25, -1.5), hi: (1.5, -1.25) },
    ];
    let points = (0..g.len())
        .filter(|&i| {
            let (k1, k2) = g.wavenumber(i);
            g.in_band(k1, k2) && regions.iter().any(|r| r.contains(g.frequency(i)))
        })
        .count();
    let spec = TestFunctionSpec { family: TestFamily::RademacherRegions { regions }, grid: g, normalization: None };
    let f = gen_test_function(&spec, 3).unwrap();
    let expect = (points as f64).sqrt() / g.period();
    assert!((lp_norm(&f, 2.0) - expect).abs() < 1e-12 * expect);
    let spectrum = f.to_frequency();
    assert!(spectrum.samples().iter().all(|v| v.norm() < 1e-9 || (v.norm() - 1.0).abs() < 1e-9));
}

#[test]
fn empty_region_is_rejected() {
    let region = FrequencyRegion::Rectangle { lo: (100.0, 100.0), hi: (101.0, 101.0) };
    let spec = TestFunctionSpec { family: TestFamily::Knapp { region }, grid: grid(), normalization: None };
    assert!(matches!(gen_test_function(&spec, 0), Err(Error::InvalidParameter(_))));
}

#[test]
fn knapp_profile_is_elongated_across_the_long_side() {
    let g = grid();
    // 16 wavenumbers along the first axis, 4 along the second.
    let region = FrequencyRegion::Rectangle { lo: (-1.0, -0.25), hi: (1.0, 0.25) };
    let spec = TestFunctionSpec { family: TestFamily::Knapp { region }, grid: g, normalization: None };
    let f = gen_test_function(&spec, 0).unwrap().to_space();
    let n = g.n();
    let peak = f.samples()[0].norm();
    assert!((peak - f.max_abs()).abs() < 1e-12);
    let half = |along_first: bool| {
        (0..n).filter(|&s| f.samples()[if along_first { s * n } else { s }].norm() >= 0.5 * peak).count() as f64
    };
    let aspect = half(false) / half(true);
    assert!((2.0..=8.0).contains(&aspect), "aspect {aspect}");
}

#[test]
fn zero_operator_gives_zero_ratio() {
    let sampler = PairSampler::new(grid(), small_mix());
    let holder = HolderTriple::new(2.0, 2.0).unwrap();
    let rec = estimate_bilinear_ratio("zero", |f, _| Ok(Field::zeros(f.grid(), Repr::Space)), holder, 5, 1, &sampler)
        .unwrap();
    assert_eq!(rec.max_ratio, 0.0);
    assert_eq!(rec.discarded, 0);
}

#[test]
fn pointwise_product_obeys_holder() {
    let sampler = PairSampler::new(grid(), small_mix());
    let holder = HolderTriple::with_target(2.0, 2.0, 1.0).unwrap();
    let rec = estimate_bilinear_ratio("product", product, holder, 12, 2, &sampler).unwrap();
    assert!(rec.max_ratio > 0.0 && rec.max_ratio <= 1.0 + 1e-12, "{}", rec.max_ratio);
    // f = g turns Cauchy-Schwarz into equality.
    let same = estimate_bilinear_ratio("square", |f, _| product(f, f), holder, 1, 2, &sampler).unwrap();
    let (f, g) = sampler.draw(2, 0).unwrap();
    let expect = lp_norm(&f, 2.0) / lp_norm(&g, 2.0);
    assert!((same.max_ratio - expect).abs() < 1e-10 * expect);
}

#[test]
fn ratio_is_scale_invariant() {
    let holder = HolderTriple::new(2.0, 4.0).unwrap();
    let raw = PairSampler::new(grid(), small_mix());
    let scaled = PairSampler::new(grid(), small_mix().normalized(3.0, 7.5));
    let a = estimate_bilinear_ratio("product", product, holder, 6, 9, &raw).unwrap();
    let b = estimate_bilinear_ratio("product", product, holder, 6, 9, &scaled).unwrap();
    for (x, y) in a.ratios.iter().zip(&b.ratios) {
        let (x, y) = (x.unwrap(), y.unwrap());
        assert!((x - y).abs() < 1e-10 * x);
    }
}

#[test]
fn more_trials_never_lower_the_estimate() {
    let sampler = PairSampler::new(grid(), small_mix());
    let holder = HolderTriple::new(2.0, 2.0).unwrap();
    let short = estimate_bilinear_ratio("product", product, holder, 5, 4, &sampler).unwrap();
    let long = estimate_bilinear_ratio("product", product, holder, 15, 4, &sampler).unwrap();
    assert!(long.max_ratio >= short.max_ratio);
    assert_eq!(&long.ratios[..5], &short.ratios[..]);
}

#[test]
fn parallel_estimate_matches_serial_replay() {
    let sampler = PairSampler::for_levels(grid(), &[2, 3]);
    let holder = HolderTriple::new(2.0, 2.0).unwrap();
    let rec = estimate_bilinear_ratio("product", product, holder, 8, 17, &sampler).unwrap();
    for (t, r) in rec.ratios.iter().enumerate() {
        let (f, g) = sampler.draw(17, t).unwrap();
        let h = product(&f, &g).unwrap();
        let serial = lp_norm(&h, holder.p) / (lp_norm(&f, 2.0) * lp_norm(&g, 2.0));
        assert_eq!(r.unwrap(), serial);
    }
    let again = estimate_bilinear_ratio("product", product, holder, 8, 17, &sampler).unwrap();
    assert_eq!(rec, again);
}

#[test]
fn level_pairs_share_a_peak() {
    let sampler = PairSampler::for_levels(grid(), &[2, 3]);
    for t in 0..4 {
        let (f, g) = sampler.draw(5, t).unwrap();
        let (i1, i2) = f.peak();
        let at = g.samples()[i1 * grid().n() + i2].norm();
        assert!((at - g.max_abs()).abs() <= 1e-12 * g.max_abs(), "trial {t}");
    }
    assert!(!PairSampler::new(grid(), small_mix()).colocate);
}

#[test]
fn holder_triple_validation() {
    assert!(HolderTriple::new(0.5, 2.0).is_err());
    assert!(HolderTriple::with_target(2.0, 2.0, 2.0).is_err());
    assert_eq!(HolderTriple::new(3.0, 6.0).unwrap().p, 2.0);
}

#[test]
fn line_fit_on_synthetic_data() {
    let pts: Vec<(f64, f64)> = (2..=6).map(|j| (j as f64, -(j as f64) + 0.5)).collect();
    let fit = fit_line(&pts).unwrap();
    assert!((fit.slope + 1.0).abs() < 1e-12 && (fit.intercept - 0.5).abs() < 1e-12);
    assert!((fit.r_squared - 1.0).abs() < 1e-12);
    let flat: Vec<(f64, f64)> = (2..=6).map(|j| (j as f64, 3.0)).collect();
    assert_eq!(fit_line(&flat).unwrap().slope, 0.0);
    assert!(matches!(fit_line(&pts[..2]), Err(Error::InsufficientData(_))));
}

fn record(j: u32, max_ratio: f64) -> RatioRecord {
    RatioRecord {
        op: "C_j".into(),
        j: Some(j),
        p1: 2.0,
        p2: 2.0,
        p: 1.0,
        lambda: None,
        trials: 1,
        discarded: 0,
        seed: 0,
        max_ratio,
        argmax_trial: Some(0),
        ratios: vec![Some(max_ratio)],
    }
}

#[test]
fn decay_fit_uses_log2_of_positive_ratios() {
    let recs: Vec<RatioRecord> = (2..=5).map(|j| record(j, 2f64.powi(-(j as i32)))).collect();
    let fit = fit_decay(&recs).unwrap();
    assert!((fit.slope + 1.0).abs() < 1e-12 && (fit.r_squared - 1.0).abs() < 1e-12);
    let sparse = vec![record(2, 0.5), record(3, 0.0), record(4, 0.0), record(5, 0.1)];
    assert!(matches!(fit_decay(&sparse), Err(Error::InsufficientData(_))));
}

#[test]
fn identity_against_strong_maximal_is_one() {
    let fs = small_mix().draw_many(grid(), 3, 5).unwrap();
    let tab = check_domination(DominationOp::Identity, &[0.5], MaximalVariant::Strong, &fs).unwrap();
    assert!((tab.rows[0].constant - 1.0).abs() < 1e-12);
    assert_eq!(tab.spread, Some(1.0));
}

#[test]
fn vanishing_function_gives_zero_constant() {
    let zero = vec![Field::zeros(grid(), Repr::Space)];
    let tab = check_domination(DominationOp::T { nu: 0.5 }, &[0.3, 0.6], MaximalVariant::AlongT, &zero).unwrap();
    assert!(tab.rows.iter().all(|r| r.constant == 0.0));
    assert_eq!(tab.spread, None);
}

#[test]
fn domination_rejects_bad_arguments() {
    let fs = vec![Field::zeros(grid(), Repr::Space)];
    assert!(check_domination(DominationOp::T { nu: 0.0 }, &[0.5], MaximalVariant::AlongT, &fs).is_err());
    assert!(check_domination(DominationOp::B { mu: -1.0, j: 2 }, &[0.1], MaximalVariant::Strong, &fs).is_err());
    assert!(check_domination(DominationOp::Identity, &[1.0], MaximalVariant::Strong, &fs).is_err());
}

#[test]
fn unit_weight_reduces_to_parseval() {
    let g = grid();
    let f = small_mix().draw_many(g, 1, 8).unwrap().remove(0);
    let w = vec![1.0; g.len()];
    for size in [(4, 4), (8, 2), (1, 1)] {
        let lattice = RectangleLattice { size, offset: (1, -3) };
        let (lhs, rhs) = weighted_lattice_sides(&f, &w, &lattice, 1.5).unwrap();
        assert!((lhs / rhs - 1.0).abs() < 1e-10, "{size:?}: {lhs} vs {rhs}");
    }
}

#[test]
fn single_cell_lattice_is_bounded_by_one() {
    let g = grid();
    let lattice = RectangleLattice { size: (g.n(), g.n()), offset: (-(g.n() as i64) / 2, -(g.n() as i64) / 2) };
    let rows = check_weighted_lattice(g, &lattice, &[1.1, 1.5], 6, 3, &small_mix()).unwrap();
    for r in rows {
        assert!(r.max_ratio > 0.0 && r.max_ratio <= 1.0 + 1e-12, "{r:?}");
    }
}

#[test]
fn lattice_square_sum_of_one_cell_is_modulus_squared() {
    let g = grid();
    let region = FrequencyRegion::Rectangle { lo: (0.0, 0.0), hi: (0.5, 0.5) };
    let spec = TestFunctionSpec { family: TestFamily::Knapp { region }, grid: g, normalization: None };
    let f = gen_test_function(&spec, 0).unwrap();
    let sq = lattice_square_sum(&f, &RectangleLattice { size: (4, 4), offset: (0, 0) }).unwrap();
    let fs = f.to_space();
    for (a, v) in sq.iter().zip(fs.samples()) {
        assert!((a - v.norm_sqr()).abs() < 1e-12 * fs.max_abs().powi(2));
    }
}

#[test]
fn square_function_is_an_isometry_at_p2() {
    let g = GridSpec::new(64, 16.0).unwrap();
    let fs = SqfnFamily::Trapezoid.spread_functions(g, 3, 2, 6).unwrap();
    let rows = sqfn_growth(SqfnFamily::Trapezoid, &[2, 3], 2.0, &fs).unwrap();
    for r in &rows {
        assert!((r.max_ratio - 1.0).abs() < 1e-10, "{r:?}");
    }
    assert!((rows[1].step_ratio.unwrap() - 1.0).abs() < 1e-10);
}

#[test]
fn unresolved_family_sizes_are_rejected() {
    let g = GridSpec::new(64, 8.0).unwrap();
    assert!(SqfnFamily::Trapezoid.regions(g, 4).is_err());
    assert!(SqfnFamily::Sector { alpha: 0.2 }.regions(g, 64).is_err());
}

#[test]
fn config_values_and_lists() {
    let cfg = ExperimentConfig::parse("seed = 7\n[sweep]\nlevels = 2, 3, 4\nlambda = 0.25\nname = cone\n").unwrap();
    assert_eq!(cfg.get::<u64>(None, "seed").unwrap(), Some(7));
    assert_eq!(cfg.get_list::<u32>(Some("sweep"), "levels").unwrap(), Some(vec![2, 3, 4]));
    assert_eq!(cfg.get::<f64>(Some("sweep"), "lambda").unwrap(), Some(0.25));
    assert_eq!(cfg.get::<f64>(Some("sweep"), "missing").unwrap(), None);
    assert!(matches!(cfg.get::<f64>(Some("sweep"), "name"), Err(Error::Config(_))));
    let keys: Vec<String> = cfg.entries(Some("sweep")).into_iter().map(|(k, _)| k).collect();
    assert_eq!(keys, ["levels", "lambda", "name"]);
    assert_eq!(cfg.entries(None), [("seed".to_string(), "7".to_string())]);
    assert!(cfg.entries(Some("absent")).is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn draws_are_deterministic(seed in any::<u64>(), trial in 0usize..50) {
        let sampler = PairSampler::new(grid(), small_mix());
        let (a, b) = sampler.draw(seed, trial).unwrap();
        let (c, d) = sampler.draw(seed, trial).unwrap();
        prop_assert_eq!(a.samples(), c.samples());
        prop_assert_eq!(b.samples(), d.samples());
    }

    #[test]
    fn normalized_draws_hit_the_target(seed in any::<u64>(), p in 1.0f64..6.0) {
        let f = small_mix().normalized(p, 2.0).draw_many(grid(), 1, seed).unwrap().remove(0);
        prop_assert!((lp_norm(&f, p) - 2.0).abs() < 1e-10);
    }
}
