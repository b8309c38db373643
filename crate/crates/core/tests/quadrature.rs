use conelab::quadrature::*;
use conelab::{ExponentParams, GridSpec};
use proptest::prelude::*;

/// `int_lo^hi (u - a)_+^e u^k du` for `a <= lo`, by the binomial expansion of `u = (u - a) + a`.
fn rising_moment(lo: f64, hi: f64, a: f64, e: f64, k: u32) -> f64 {
    let lo = lo.max(a);
    if hi <= lo {
        return 0.0;
    }
    let mut acc = 0.0;
    let mut binom = 1.0;
    for m in 0..=k {
        if m > 0 {
            binom *= (k - m + 1) as f64 / m as f64;
        }
        let p = e + m as f64 + 1.0;
        acc += binom * a.powi((k - m) as i32) * ((hi - a).powf(p) - (lo - a).powf(p)) / p;
    }
    acc
}

#[test]
fn legendre_exactness() {
    for p in [1usize, 3, 6, 10] {
        let gl = gauss_legendre(p);
        assert_eq!(gl.len(), p);
        for k in 0..2 * p as i32 {
            let got: f64 = gl.iter().map(|(x, w)| w * x.powi(k)).sum();
            let expect = if k % 2 == 0 { 2.0 / (k + 1) as f64 } else { 0.0 };
            assert!((got - expect).abs() < 1e-13, "p = {p}, k = {k}");
        }
    }
}

#[test]
fn jacobi_exactness() {
    for beta in [-0.5, -0.25, 0.5, 1.7] {
        let gj = gauss_jacobi(5, beta);
        assert!(gj.len() >= 5);
        for k in 0..10 {
            // int_{-1}^1 (1+x)^beta (1+x)^k dx.
            let got: f64 = gj.iter().map(|(x, w)| w * (1.0 + x).powi(k)).sum();
            let p = beta + k as f64 + 1.0;
            assert!((got - 2f64.powf(p) / p).abs() < 1e-12 * 2f64.powf(p), "beta = {beta}, k = {k}");
        }
    }
}

#[test]
fn dyadic_t_rule_integrates_the_power_weight() {
    for (mu, nu) in [(1.0, 0.5), (0.75, -0.25), (0.5, 0.5)] {
        let p = ExponentParams::with_split(mu, nu).unwrap();
        for j in [1u32, 3] {
            let q = build_t_quadrature(j, &p, 2, 8).unwrap();
            let e = 2.0 * nu + 1.0;
            let top = t_max_for_level(j);
            let got = q.integrate(|t| t.powf(e));
            let expect = top.powf(e + 1.0) / (e + 1.0);
            assert!((got - expect).abs() < 1e-10, "({mu}, {nu}) j = {j}: {got} vs {expect}");
            assert!(q.nodes.windows(2).all(|w| w[0] <= w[1]));
            assert!(q.nodes.iter().all(|&t| t > 0.0 && t < top));
        }
    }
    let p = ExponentParams::with_split(1.0, 0.5).unwrap();
    assert!(build_t_quadrature(0, &p, 1, 4).is_err());
    assert!(build_t_quadrature(2, &p, 0, 4).is_err());
}

#[test]
fn restricted_rule_keeps_half_open_ranges() {
    let p = ExponentParams::with_split(1.0, 0.5).unwrap();
    let q = build_t_quadrature(2, &p, 1, 4).unwrap();
    let cut = 0.4;
    let (a, b) = (q.restricted(0.0, cut), q.restricted(cut, 1.0));
    assert_eq!(a.len() + b.len(), q.len());
    let total = q.integrate(|t| t * t);
    assert!((a.integrate(|t| t * t) + b.integrate(|t| t * t) - total).abs() < 1e-15);
}

#[test]
fn lattice_head_handles_fractional_weights() {
    let rule = LatticeRule { sub_panels: 1, nodes_per_panel: 8, exact: false };
    let c: f64 = 0.125;
    // Below the head break the factor next to t^e is constant, as for lattice symbols.
    let ramp = |t: f64| 1.0 + (t - c).max(0.0).powi(2);
    let power_int = |p: f64| (1.0 - c.powf(p + 1.0)) / (p + 1.0);
    for e in [-0.5, 0.5, 2.0] {
        let breaks = LatticeBreaks { head: Some(c), singular: vec![] };
        let q = build_lattice_t_quadrature(0.0, 1.0, &breaks, e, &rule).unwrap();
        let got = q.integrate(|t| t.powf(e) * ramp(t));
        let expect = 1.0 / (e + 1.0) + power_int(e + 2.0) - 2.0 * c * power_int(e + 1.0) + c * c * power_int(e);
        assert!((got - expect).abs() < 1e-10, "e = {e}: {got} vs {expect}");
    }
    let bad = LatticeBreaks::default();
    assert!(build_lattice_t_quadrature(0.5, 0.5, &bad, 0.0, &rule).is_err());
    assert!(build_lattice_t_quadrature(0.0, 1.0, &bad, -1.0, &rule).is_err());
}

#[test]
fn exact_lattice_rule_resolves_square_root_edges() {
    // (t - 0.3)_+^(1/2) has a square-root edge at a break point.
    let rule = LatticeRule { sub_panels: 1, nodes_per_panel: 6, exact: true };
    let breaks = LatticeBreaks { head: None, singular: vec![0.3] };
    let q = build_lattice_t_quadrature(0.1, 0.8, &breaks, 0.0, &rule).unwrap();
    let got = q.integrate(|t| (t - 0.3).max(0.0).sqrt());
    let expect = 2.0 / 3.0 * 0.5f64.powf(1.5);
    assert!((got - expect).abs() < 1e-7, "{got} vs {expect}");
}

#[test]
fn lattice_breaks_of_a_small_grid() {
    let g = GridSpec::new(16, 4.0).unwrap();
    // phi(k2/4) != 0 for k2 in 3..=7.
    let br = t_breaks(&g, 1.0, true);
    assert_eq!(br.head, Some(1.0 / 7.0));
    assert!(br.singular.contains(&(1.0 / 3.0)) && br.singular.contains(&(6.0 / 7.0)));
    assert!(br.singular.iter().all(|&a| a > 0.0 && a < 1.0));
    let b = b_breaks(&g, 1.0, |_| true);
    assert!(b.singular.iter().any(|&t| (t - (1.0f64 - 4.0 / 9.0).sqrt()).abs() < 1e-15));
}

#[test]
fn product_rule_cells_tile_and_cut() {
    let rule = ProductRule::dyadic(0.5, 0.01, &[0.3, 0.7, -1.0], 2, 3).unwrap();
    assert_eq!(rule.cells[0].0, 0.0);
    assert_eq!(rule.top(), 0.5);
    assert!(rule.cells.windows(2).all(|w| w[0].1 == w[1].0));
    assert!(rule.cells.iter().any(|c| c.1 == 0.3));
    assert_eq!(rule.len(), 3 * rule.cells.len());
    assert!(ProductRule::dyadic(0.5, 0.6, &[], 1, 3).is_err());
    assert!(ProductRule::dyadic(0.5, 0.1, &[], 0, 3).is_err());
}

#[test]
fn level_rules_have_edges_at_every_top() {
    let g = GridSpec::new(64, 16.0).unwrap();
    let plan = ProductPlan { sub_panels: 1, nodes_per_cell: 3, exact: false };
    let rule = plan.for_levels(&g, &[2, 3, 5]).unwrap();
    assert_eq!(rule.top(), 0.5);
    for j in [2, 3, 5] {
        let top = (1.0 - j as f64).exp2();
        assert!(rule.cells.iter().any(|c| c.1 == top), "j = {j}");
    }
    assert!(plan.for_levels(&g, &[]).is_err());
    assert!(plan.refined().for_levels(&g, &[2]).unwrap().len() > plan.for_levels(&g, &[2]).unwrap().len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn product_coefficients_reproduce_low_moments(
        a in 0.0f64..0.5, e in -0.75f64..1.5, cell_pick in 0usize..64, rising in any::<bool>(),
    ) {
        let rule = ProductRule::dyadic(0.5, 0.004, &[], 1, 4).unwrap();
        let cell = cell_pick % rule.cells.len();
        let (lo, hi) = rule.cells[cell];
        let side = if rising { PowerSide::Rising } else { PowerSide::Falling };
        let mut c = vec![0.0; 4];
        rule.coefficients(cell, a, e, side, &mut c);
        let (nodes, weights) = (&rule.nodes[cell * 4..cell * 4 + 4], &rule.weights[cell * 4..cell * 4 + 4]);
        for k in 0..4u32 {
            let got: f64 = (0..4).map(|q| weights[q] * c[q] * nodes[q].powi(k as i32)).sum();
            let expect = if rising {
                rising_moment(lo, hi, a, e, k)
            } else {
                // With v = -u the falling power becomes a rising one at -a.
                let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                s * rising_moment(-hi, -lo, -a, e, k)
            };
            // Far cells use point values: exact only up to the projection error.
            let near = if rising { a >= lo - (hi - lo) } else { a <= hi + (hi - lo) };
            let tol = if near { 1e-11 } else { 1e-4 } * expect.abs().max((hi - lo).powf(e + 1.0) * hi.powi(k as i32));
            prop_assert!((got - expect).abs() <= tol, "cell {cell} [{lo}, {hi}] a = {a} e = {e} k = {k}: {got} vs {expect}");
        }
    }
}
