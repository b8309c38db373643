use std::f64::consts::TAU;

use conelab::io::{read_field, write_field};
use conelab::spectral::{dft_forward, dft_inverse, norm_lp};
use conelab::{Error, Field, GridSpec, Repr};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noise(grid: GridSpec, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = (0..grid.len()).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    Field::new(grid, s, Repr::Space).unwrap()
}

#[test]
fn grid_validation() {
    assert!(matches!(GridSpec::new(48, 1.0), Err(Error::InvalidGrid(_))));
    assert!(GridSpec::new(4, 1.0).is_err());
    assert!(GridSpec::new(16, 0.0).is_err());
    assert!(GridSpec::new(16, f64::NAN).is_err());
    let g = GridSpec::new(16, 4.0).unwrap();
    assert_eq!((g.len(), g.spacing(), g.nyquist(), g.band_half_width()), (256, 0.25, 2.0, 4));
    assert!(g.in_band(-4, 3) && !g.in_band(4, 0));
}

#[test]
fn cone_adequacy() {
    let g = GridSpec::new(1024, 128.0).unwrap();
    assert!(g.is_cone_adequate(5));
    assert!(!g.is_cone_adequate(6));
    match g.require_cone_adequate(6) {
        Err(Error::NotConeAdequate { required_period, required_n, .. }) => {
            assert_eq!((required_period, required_n), (256.0, 2048));
        }
        other => panic!("{other:?}"),
    }
    // Enough resolution but too small a Nyquist frequency.
    assert!(!GridSpec::new(32, 16.0).unwrap().is_cone_adequate(2));
}

#[test]
fn plane_wave_has_a_single_coefficient() {
    let g = GridSpec::new(16, 4.0).unwrap();
    let (k1, k2) = (3i64, -5i64);
    let f = Field::from_space_fn(g, |x1, x2| Complex64::from_polar(1.0, TAU * (k1 as f64 * x1 + k2 as f64 * x2) / 4.0));
    let spec = dft_forward(&f).unwrap();
    let at = g.index_of_wavenumber(k1, k2).unwrap();
    for (i, v) in spec.samples().iter().enumerate() {
        let expect = if i == at { 16.0 } else { 0.0 };
        assert!((v - Complex64::new(expect, 0.0)).norm() < 1e-12, "{:?}", g.wavenumber(i));
    }
}

#[test]
fn frequency_fn_builds_the_matching_space_field() {
    let g = GridSpec::new(16, 2.0).unwrap();
    let f = Field::from_frequency_fn(g, |a, b| if (a, b) == (1.0, -0.5) { Complex64::new(4.0, 0.0) } else { Complex64::ZERO });
    let s = f.to_space();
    for i in 0..g.len() {
        let (x1, x2) = g.position(i);
        let expect = Complex64::from_polar(1.0, TAU * (x1 - 0.5 * x2));
        assert!((s.samples()[i] - expect).norm() < 1e-12);
    }
}

#[test]
fn constant_norms() {
    let g = GridSpec::new(8, 3.0).unwrap();
    let f = Field::new(g, vec![Complex64::new(0.0, -2.0); 64], Repr::Space).unwrap();
    for p in [1.0, 2.0, 3.5] {
        let expect = 2.0 * 9f64.powf(1.0 / p);
        assert!((norm_lp(&f, p).unwrap() - expect).abs() < 1e-12 * expect);
    }
    assert_eq!(norm_lp(&f, f64::INFINITY).unwrap(), 2.0);
    assert!(norm_lp(&f, 0.5).is_err());
    assert!(norm_lp(&f.to_frequency(), 2.0).is_err());
}

#[test]
fn representation_and_grid_errors() {
    let g = GridSpec::new(8, 1.0).unwrap();
    assert!(Field::new(g, vec![Complex64::ZERO; 63], Repr::Space).is_err());
    let f = Field::zeros(g, Repr::Space);
    assert!(matches!(dft_inverse(&f), Err(Error::Representation { .. })));
    let other = Field::zeros(GridSpec::new(8, 2.0).unwrap(), Repr::Space);
    assert!(matches!(f.combine(Complex64::ONE, &other, Complex64::ONE), Err(Error::GridMismatch)));
}

#[test]
fn combine_commutes_with_the_transform() {
    let g = GridSpec::new(16, 2.0).unwrap();
    let (a, b) = (noise(g, 1), noise(g, 2));
    let (ca, cb) = (Complex64::new(2.0, -1.0), Complex64::new(0.5, 0.0));
    let direct = a.combine(ca, &b, cb).unwrap();
    let spectral = a.to_frequency().combine(ca, &b.to_frequency(), cb).unwrap().to_space();
    assert!(a.combine(ca, &b.to_frequency(), cb).is_err());
    for (x, y) in direct.samples().iter().zip(spectral.samples()) {
        assert!((x - y).norm() < 1e-12);
    }
}

#[test]
fn field_file_roundtrip() {
    let g = GridSpec::new(8, 1.5).unwrap();
    let f = noise(g, 3).to_frequency();
    let mut bytes = Vec::new();
    write_field(&mut bytes, &f).unwrap();
    assert_eq!(bytes.len(), 4 + 4 + 4 + 8 + 16 * 64);
    let back = read_field(bytes.as_slice()).unwrap();
    assert_eq!((back.grid(), back.repr()), (g, Repr::Frequency));
    assert_eq!(back.samples(), f.samples());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(read_field(bad.as_slice()), Err(Error::Format(_))));
    bytes.push(0);
    assert!(matches!(read_field(bytes.as_slice()), Err(Error::Format(_))));
    assert!(matches!(read_field(&bytes[..100]), Err(Error::Io(_))));
}

#[test]
fn translation_moves_samples_and_peak() {
    let g = GridSpec::new(8, 2.0).unwrap();
    let mut s = vec![Complex64::new(0.0, 0.0); 64];
    s[2 * 8 + 7] = Complex64::new(0.0, -3.0);
    let f = Field::new(g, s, Repr::Space).unwrap();
    assert_eq!(f.peak(), (2, 7));
    let moved = f.translated(-3, 2);
    assert_eq!(moved.peak(), (7, 1));
    assert_eq!(moved.samples()[7 * 8 + 1], Complex64::new(0.0, -3.0));
    let back = f.to_frequency().translated(0, 0);
    assert_eq!(back.repr(), Repr::Space);
    assert!(back.samples().iter().zip(f.samples()).all(|(x, y)| (x - y).norm() < 1e-12));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn wavenumber_index_roundtrip(i in 0usize..1024) {
        let g = GridSpec::new(32, 5.0).unwrap();
        let (k1, k2) = g.wavenumber(i);
        prop_assert_eq!(g.index_of_wavenumber(k1, k2), Some(i));
        prop_assert!((-16..16).contains(&k1) && (-16..16).contains(&k2));
    }

    #[test]
    fn parseval_and_inversion(seed in any::<u64>(), period in 0.5f64..20.0) {
        let g = GridSpec::new(16, period).unwrap();
        let f = noise(g, seed);
        let spec = dft_forward(&f).unwrap();
        let (a, b) = (norm_lp(&f, 2.0).unwrap(), spec.spectral_l2().unwrap());
        prop_assert!((a - b).abs() < 1e-12 * a);
        let back = dft_inverse(&spec).unwrap();
        for (x, y) in back.samples().iter().zip(f.samples()) {
            prop_assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn translation_keeps_spectral_magnitudes(seed in any::<u64>(), d1 in -40i64..40, d2 in -40i64..40) {
        let g = GridSpec::new(16, 3.0).unwrap();
        let f = noise(g, seed);
        let moved = f.translated(d1, d2);
        prop_assert_eq!(&moved.translated(-d1, -d2), &f);
        let (a, b) = (dft_forward(&f).unwrap(), dft_forward(&moved).unwrap());
        for (x, y) in a.samples().iter().zip(b.samples()) {
            prop_assert!((x.norm() - y.norm()).abs() < 1e-12 * (1.0 + x.norm()));
        }
    }
}
