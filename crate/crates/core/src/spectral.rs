//! Periodic square grids, sampled fields and the discrete Fourier transform.
//!
//! Space samples sit at `x = (i1, i2) * L/n` with `i1` the row index.
//! Frequency samples are centered: row `c1` and column `c2` hold the
//! wavenumber `k = (c1 - n/2, c2 - n/2)`, i.e. frequency `k / L`.
//!
//! `F(k/L) = (L/n)^2 sum_x f(x) exp(-2 pi i x.k/L)` and the inverse carries
//! the factor `1/L^2`, so Parseval reads `(L/n)^2 sum |f|^2 = L^-2 sum |F|^2`.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    n: usize,
    period: f64,
}

impl GridSpec {
    pub fn new(n: usize, period: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("n = {n} must be a power of two >= 8")));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidGrid(format!("period = {period} must be positive")));
        }
        Ok(Self { n, period })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Spatial sample spacing `L/n`.
    pub fn spacing(&self) -> f64 {
        self.period / self.n as f64
    }

    /// Area of one spatial cell, the Riemann-sum weight.
    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h * h
    }

    pub fn freq_spacing(&self) -> f64 {
        1.0 / self.period
    }

    /// Highest representable frequency magnitude per axis, `n / (2L)`.
    pub fn nyquist(&self) -> f64 {
        self.n as f64 / (2.0 * self.period)
    }

    /// Largest wavenumber magnitude allowed for inputs whose pointwise
    /// products must not alias: inputs use `k` in `[-n/4, n/4)`.
    pub fn band_half_width(&self) -> i64 {
        (self.n / 4) as i64
    }

    pub fn in_band(&self, k1: i64, k2: i64) -> bool {
        let b = self.band_half_width();
        (-b..b).contains(&k1) && (-b..b).contains(&k2)
    }

    pub fn is_cone_adequate(&self, level: u32) -> bool {
        let shell = (-(level as f64) - 2.0).exp2();
        1.0 / self.period <= shell * (1.0 + 1e-12) && self.nyquist() >= 4.0
    }

    pub fn require_cone_adequate(&self, level: u32) -> Result<()> {
        if self.is_cone_adequate(level) {
            return Ok(());
        }
        let required_period = (level as f64 + 2.0).exp2().max(self.period);
        let required_n = ((8.0 * required_period).ceil() as usize).next_power_of_two();
        Err(Error::NotConeAdequate {
            level,
            n: self.n,
            period: self.period,
            required_period,
            required_n,
        })
    }

    /// Wavenumber of the centered frequency index.
    pub fn wavenumber(&self, index: usize) -> (i64, i64) {
        let h = (self.n / 2) as i64;
        ((index / self.n) as i64 - h, (index % self.n) as i64 - h)
    }

    /// Centered frequency index of a wavenumber, if representable.
    pub fn index_of_wavenumber(&self, k1: i64, k2: i64) -> Option<usize> {
        let h = (self.n / 2) as i64;
        let (c1, c2) = (k1 + h, k2 + h);
        let n = self.n as i64;
        if (0..n).contains(&c1) && (0..n).contains(&c2) {
            Some((c1 * n + c2) as usize)
        } else {
            None
        }
    }

    pub fn frequency(&self, index: usize) -> (f64, f64) {
        let (k1, k2) = self.wavenumber(index);
        (k1 as f64 / self.period, k2 as f64 / self.period)
    }

    pub fn position(&self, index: usize) -> (f64, f64) {
        let h = self.spacing();
        ((index / self.n) as f64 * h, (index % self.n) as f64 * h)
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={} L={}", self.n, self.period)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Repr {
    Space,
    Frequency,
}

impl fmt::Display for Repr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Repr::Space => "space",
            Repr::Frequency => "frequency",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: GridSpec,
    samples: Vec<Complex64>,
    repr: Repr,
}

impl Field {
    pub fn new(grid: GridSpec, samples: Vec<Complex64>, repr: Repr) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} samples, got {}",
                grid.len(),
                samples.len()
            )));
        }
        Ok(Self { grid, samples, repr })
    }

    pub fn zeros(grid: GridSpec, repr: Repr) -> Self {
        Self { grid, samples: vec![Complex64::new(0.0, 0.0); grid.len()], repr }
    }

    /// Samples `f(x1, x2)` at the spatial grid points.
    pub fn from_space_fn(grid: GridSpec, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let samples = (0..grid.len())
            .map(|i| {
                let (x1, x2) = grid.position(i);
                f(x1, x2)
            })
            .collect();
        Self { grid, samples, repr: Repr::Space }
    }

    /// Spectrum given as a function of the frequency `(xi1, xi2)`.
    pub fn from_frequency_fn(grid: GridSpec, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let samples = (0..grid.len())
            .map(|i| {
                let (a, b) = grid.frequency(i);
                f(a, b)
            })
            .collect();
        Self { grid, samples, repr: Repr::Frequency }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn repr(&self) -> Repr {
        self.repr
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn expect(&self, repr: Repr) -> Result<()> {
        if self.repr == repr {
            Ok(())
        } else {
            Err(Error::Representation { expected: repr, found: self.repr })
        }
    }

    /// Returns the space representation, transforming if needed.
    pub fn to_space(&self) -> Field {
        match self.repr {
            Repr::Space => self.clone(),
            Repr::Frequency => inverse_unchecked(self),
        }
    }

    pub fn to_frequency(&self) -> Field {
        match self.repr {
            Repr::Frequency => self.clone(),
            Repr::Space => forward_unchecked(self),
        }
    }

    pub fn scaled(&self, c: Complex64) -> Field {
        Field { grid: self.grid, samples: self.samples.iter().map(|v| v * c).collect(), repr: self.repr }
    }

    /// `a*self + b*other`.
    pub fn combine(&self, a: Complex64, other: &Field, b: Complex64) -> Result<Field> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        other.expect(self.repr)?;
        let samples = self.samples.iter().zip(&other.samples).map(|(x, y)| a * x + b * y).collect();
        Ok(Field { grid: self.grid, samples, repr: self.repr })
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Cyclic translation by `(d1, d2)` grid steps, in space representation.
    pub fn translated(&self, d1: i64, d2: i64) -> Field {
        let src = self.to_space();
        let n = self.grid.n;
        let (s1, s2) = (d1.rem_euclid(n as i64) as usize, d2.rem_euclid(n as i64) as usize);
        let mut samples = vec![Complex64::new(0.0, 0.0); n * n];
        for i1 in 0..n {
            for i2 in 0..n {
                samples[((i1 + s1) % n) * n + (i2 + s2) % n] = src.samples[i1 * n + i2];
            }
        }
        Field { grid: self.grid, samples, repr: Repr::Space }
    }

    /// Grid index `(i1, i2)` of the largest space sample.
    pub fn peak(&self) -> (usize, usize) {
        let src = self.to_space();
        let n = self.grid.n;
        let mut best = (0, 0.0);
        for (i, v) in src.samples.iter().enumerate() {
            if v.norm_sqr() > best.1 {
                best = (i, v.norm_sqr());
            }
        }
        (best.0 / n, best.0 % n)
    }

    /// Frequency-side l2 norm `(L^-2 sum |F|^2)^(1/2)`.
    pub fn spectral_l2(&self) -> Result<f64> {
        self.expect(Repr::Frequency)?;
        let s: f64 = self.samples.iter().map(|v| v.norm_sqr()).sum();
        Ok((s / (self.grid.period * self.grid.period)).sqrt())
    }
}

fn forward_unchecked(f: &Field) -> Field {
    let mut buf = f.samples.clone();
    forward_in_place(&mut buf, f.grid);
    Field { grid: f.grid, samples: buf, repr: Repr::Frequency }
}

fn inverse_unchecked(f: &Field) -> Field {
    let mut buf = f.samples.clone();
    inverse_in_place(&mut buf, f.grid);
    Field { grid: f.grid, samples: buf, repr: Repr::Space }
}

/// Centered spectrum buffer to space samples, including the `1/L^2` factor.
pub(crate) fn inverse_in_place(buf: &mut [Complex64], grid: GridSpec) {
    fft::inverse_centered(buf, grid.n);
    let s = 1.0 / (grid.period * grid.period);
    buf.iter_mut().for_each(|v| *v *= s);
}

/// Space samples to centered spectrum, including the `(L/n)^2` factor.
pub(crate) fn forward_in_place(buf: &mut [Complex64], grid: GridSpec) {
    fft::forward_centered(buf, grid.n);
    let s = grid.cell_area();
    buf.iter_mut().for_each(|v| *v *= s);
}

pub fn dft_forward(f: &Field) -> Result<Field> {
    f.expect(Repr::Space)?;
    Ok(forward_unchecked(f))
}

pub fn dft_inverse(f: &Field) -> Result<Field> {
    f.expect(Repr::Frequency)?;
    Ok(inverse_unchecked(f))
}

/// Riemann-sum `L^p` norm of space samples; `p = f64::INFINITY` gives the max.
pub fn norm_lp(f: &Field, p: f64) -> Result<f64> {
    f.expect(Repr::Space)?;
    lp_of_samples(f.samples(), f.grid(), p)
}

pub(crate) fn lp_of_samples(samples: &[Complex64], grid: GridSpec, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidParameter(format!("p = {p} must lie in [1, inf]")));
    }
    Ok(lp_of_moduli(samples.iter().map(|v| v.norm()), grid, p))
}

pub(crate) fn lp_of_moduli(moduli: impl Iterator<Item = f64>, grid: GridSpec, p: f64) -> f64 {
    if p.is_infinite() {
        return moduli.fold(0.0, f64::max);
    }
    let s: f64 = if p == 2.0 {
        moduli.map(|m| m * m).sum()
    } else if p == 1.0 {
        moduli.sum()
    } else {
        moduli.map(|m| m.powf(p)).sum()
    };
    (grid.cell_area() * s).powf(1.0 / p)
}

/// All lattice frequencies `k/L` in the centered row-major field order.
pub fn frequency_lattice(grid: GridSpec) -> Vec<(f64, f64)> {
    (0..grid.len()).map(|i| grid.frequency(i)).collect()
}
