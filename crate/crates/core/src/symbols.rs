//! Pointwise multiplier symbols, the Stein–Weiss constant and its
//! integral representation.
//!
//! Ratios are written `r(x) = x1^2 / x2^2`. Every symbol carries the factor
//! `phi(x2)`, which vanishes unless `x2` lies in `(1/2, 2)`; evaluation checks
//! that factor first so the ratio is never formed with a zero denominator.

use std::fmt;

use crate::bumps::PartitionFamily;
use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, Quadrature, QuadratureScheme};

/// Distance to a singular set below which a value is considered singular.
pub const SINGULAR_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentParams {
    pub lambda: f64,
    pub mu: f64,
    pub nu: f64,
    pub a: f64,
    pub b: f64,
}

impl ExponentParams {
    pub fn new(lambda: f64, mu: f64, nu: f64, a: f64, b: f64) -> Result<Self> {
        let all = [lambda, mu, nu, a, b];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("exponents must be finite".into()));
        }
        if lambda <= 0.0 || mu <= 0.0 || nu <= -1.0 {
            return Err(Error::InvalidParameter(format!(
                "need lambda > 0, mu > 0, nu > -1 (got {lambda}, {mu}, {nu})"
            )));
        }
        let tol = 1e-14 * lambda.abs().max(1.0);
        if (lambda - mu - nu).abs() > tol {
            return Err(Error::InvalidParameter(format!("lambda = {lambda} differs from mu + nu = {}", mu + nu)));
        }
        if (a + b - 2.0 * nu - 1.0).abs() > 1e-14 * (2.0 * nu + 1.0).abs().max(1.0) {
            return Err(Error::InvalidParameter(format!("a + b = {} differs from 2 nu + 1 = {}", a + b, 2.0 * nu + 1.0)));
        }
        Ok(Self { lambda, mu, nu, a, b })
    }

    /// Split `lambda = mu + nu` with the square-function weights `a = b = nu + 1/2`.
    pub fn with_split(mu: f64, nu: f64) -> Result<Self> {
        let w = nu + 0.5;
        Self::new(mu + nu, mu, nu, w, w)
    }

    /// Default regime: `mu = a = 1/2 + lambda/2`, `nu = b = -1/2 + lambda/2`.
    pub fn from_lambda(lambda: f64) -> Result<Self> {
        let mu = 0.5 + lambda / 2.0;
        let nu = -0.5 + lambda / 2.0;
        Self::new(lambda, mu, nu, mu, nu)
    }

    pub fn stein_weiss_constant(&self) -> f64 {
        stein_weiss_constant_unchecked(self.mu, self.nu)
    }
}

impl fmt::Display for ExponentParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "lambda={} mu={} nu={} a={} b={}", self.lambda, self.mu, self.nu, self.a, self.b)
    }
}

/// `x^e` for `x > 0`, and 0 for `x <= 0` (including `e = 0`).
#[inline]
pub fn pos_pow(x: f64, e: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if e == 0.0 {
        1.0
    } else if e == 1.0 {
        x
    } else if e == 0.5 {
        x.sqrt()
    } else if e == -0.5 {
        1.0 / x.sqrt()
    } else {
        x.powf(e)
    }
}

#[inline]
fn ratio(x: (f64, f64)) -> f64 {
    x.0 * x.0 / (x.1 * x.1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BilinearKind {
    Full,
    Dyadic(u32),
    J1,
    J1k(u32),
    J1Smooth,
    J1Sing,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BilinearSymbolSpec {
    pub kind: BilinearKind,
    pub params: ExponentParams,
    pub partition: PartitionFamily,
}

impl BilinearSymbolSpec {
    pub fn new(kind: BilinearKind, params: ExponentParams) -> Result<Self> {
        match kind {
            BilinearKind::Dyadic(j) if j < 2 => {
                Err(Error::InvalidParameter(format!("dyadic level {j} must be >= 2")))
            }
            BilinearKind::J1k(k) if k < 2 => Err(Error::InvalidParameter(format!("j=1 sub-level {k} must be >= 2"))),
            _ => Ok(Self { kind, params, partition: PartitionFamily }),
        }
    }

    pub fn eval(&self, xi: (f64, f64), eta: (f64, f64)) -> f64 {
        eval_bilinear_symbol(self, xi, eta)
    }
}

pub fn eval_bilinear_symbol(spec: &BilinearSymbolSpec, xi: (f64, f64), eta: (f64, f64)) -> f64 {
    let p = &spec.partition;
    let cut = p.phi(xi.1) * p.phi(eta.1);
    if cut == 0.0 {
        return 0.0;
    }
    let (rx, re) = (ratio(xi), ratio(eta));
    let angular = match spec.kind {
        BilinearKind::Full => 1.0,
        BilinearKind::Dyadic(j) => p.psi((j as f64).exp2() * (1.0 - rx)),
        BilinearKind::J1 => p.psi1(rx),
        BilinearKind::J1k(k) => p.psi1(rx) * p.psi((k as f64).exp2() * (1.0 - re)),
        BilinearKind::J1Smooth => p.psi1(rx) * p.psi11(re),
        BilinearKind::J1Sing => p.psi1(rx) * p.psi12(re),
    };
    if angular == 0.0 {
        return 0.0;
    }
    angular * cut * pos_pow(1.0 - rx - re, spec.params.lambda)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LinearKind {
    /// `(1 - r/t^2)_+^nu phi`.
    T { t: f64 },
    /// Singular slice `psi(s/delta) (s/delta)^nu phi` with `s = 1 - r/t^2`.
    TSing { delta: f64, t: f64 },
    /// Non-singular part `psi1(r/t^2) (1 - r/t^2)^nu phi`.
    TNonsing { t: f64 },
    /// `psi(2^j (1-r)) phi (1 - r - t^2)_+^(mu-1)`.
    B { j: u32, t: f64 },
    /// `psi12(r) (1 - r - t^2)_+^(mu-1) phi`.
    BTilde { t: f64 },
    /// `phiTilde psi(2^j (1-r))`.
    CutoffF1j { j: u32 },
    /// `phiTilde psi1(r)`.
    CutoffH,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearSymbolSpec {
    pub kind: LinearKind,
    pub params: ExponentParams,
    pub partition: PartitionFamily,
}

/// A symbol value with the near-singularity flag.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymbolValue {
    pub value: f64,
    pub near_singular: bool,
}

impl LinearSymbolSpec {
    pub fn new(kind: LinearKind, params: ExponentParams) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        match kind {
            LinearKind::T { t } | LinearKind::TNonsing { t } if !(t > 0.0 && t <= 1.0) => {
                bad(format!("t = {t} outside (0, 1]"))
            }
            LinearKind::TSing { delta, t } if !(t > 0.0 && t <= 1.0 && delta > 0.0 && delta < 0.5) => {
                bad(format!("need t in (0,1], delta in (0,1/2); got t = {t}, delta = {delta}"))
            }
            LinearKind::B { j, .. } | LinearKind::CutoffF1j { j } if j < 1 => bad(format!("level {j} must be >= 1")),
            _ => Ok(Self { kind, params, partition: PartitionFamily }),
        }
    }

    pub fn eval(&self, eta: (f64, f64)) -> SymbolValue {
        eval_linear_symbol(self, eta)
    }
}

/// `base^e` with the positive-part convention, flagging bases within
/// [`SINGULAR_EPS`] of a negative-exponent singularity.
#[inline]
pub(crate) fn singular_power(base: f64, e: f64) -> SymbolValue {
    if base <= 0.0 {
        SymbolValue { value: 0.0, near_singular: false }
    } else if e < 0.0 && base < SINGULAR_EPS {
        SymbolValue { value: base.powf(e), near_singular: true }
    } else {
        SymbolValue { value: pos_pow(base, e), near_singular: false }
    }
}

pub fn eval_linear_symbol(spec: &LinearSymbolSpec, eta: (f64, f64)) -> SymbolValue {
    let p = &spec.partition;
    let zero = SymbolValue { value: 0.0, near_singular: false };
    let prm = &spec.params;
    let scaled = |s: SymbolValue, c: f64| {
        if c == 0.0 {
            zero
        } else {
            SymbolValue { value: c * s.value, near_singular: s.near_singular }
        }
    };
    match spec.kind {
        LinearKind::CutoffF1j { .. } | LinearKind::CutoffH => {
            let c = p.phi_tilde(eta.1);
            if c == 0.0 {
                return zero;
            }
            let r = ratio(eta);
            let ang = match spec.kind {
                LinearKind::CutoffH => p.psi1(r),
                _ => p.psi((j_of(&spec.kind) as f64).exp2() * (1.0 - r)),
            };
            SymbolValue { value: c * ang, near_singular: false }
        }
        _ => {
            let c = p.phi(eta.1);
            if c == 0.0 {
                return zero;
            }
            let r = ratio(eta);
            match spec.kind {
                LinearKind::T { t } => scaled(singular_power(1.0 - r / (t * t), prm.nu), c),
                LinearKind::TNonsing { t } => {
                    let s = r / (t * t);
                    scaled(singular_power(1.0 - s, prm.nu), c * p.psi1(s))
                }
                LinearKind::TSing { delta, t } => {
                    let s = (1.0 - r / (t * t)) / delta;
                    scaled(singular_power(s, prm.nu), c * p.psi(s))
                }
                LinearKind::B { j, t } => {
                    let ang = p.psi((j as f64).exp2() * (1.0 - r));
                    scaled(singular_power(1.0 - r - t * t, prm.mu - 1.0), c * ang)
                }
                LinearKind::BTilde { t } => scaled(singular_power(1.0 - r - t * t, prm.mu - 1.0), c * p.psi12(r)),
                LinearKind::CutoffF1j { .. } | LinearKind::CutoffH => unreachable!(),
            }
        }
    }
}

fn j_of(kind: &LinearKind) -> u32 {
    match kind {
        LinearKind::B { j, .. } | LinearKind::CutoffF1j { j } => *j,
        _ => 0,
    }
}

fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

fn stein_weiss_constant_unchecked(mu: f64, nu: f64) -> f64 {
    2.0 * gamma(mu + nu + 1.0) / (gamma(nu + 1.0) * gamma(mu))
}

/// `2 Gamma(mu+nu+1) / (Gamma(nu+1) Gamma(mu))`.
pub fn stein_weiss_constant(mu: f64, nu: f64) -> Result<f64> {
    if !(mu > 0.0 && nu > -1.0 && mu.is_finite() && nu.is_finite()) {
        return Err(Error::InvalidParameter(format!("need mu > 0 and nu > -1 (got {mu}, {nu})")));
    }
    Ok(stein_weiss_constant_unchecked(mu, nu))
}

/// Geometric grading ratio for panels approaching an endpoint singularity.
const GRADING: f64 = 0.15;

/// Composite Gauss–Legendre rule on `[m, r]`, graded geometrically toward
/// both endpoints. Each node stores its exact distances to both ends so that
/// `r - t` and `t - m` never suffer cancellation.
pub fn build_stein_weiss_quadrature(m: f64, r: f64, levels: usize, nodes_per_panel: usize) -> Result<Quadrature> {
    if !(r >= m && m >= 0.0) {
        return Err(Error::InvalidParameter(format!("need R >= m >= 0 (got R = {r}, m = {m})")));
    }
    if levels == 0 || nodes_per_panel == 0 {
        return Err(Error::InvalidParameter("panel counts must be positive".into()));
    }
    let mut q = Quadrature::empty(m, r, QuadratureScheme::GradedBothEnds);
    if r == m {
        return Ok(q);
    }
    let half = 0.5 * (r - m);
    let gl = gauss_legendre(nodes_per_panel);
    let mut offsets = Vec::new();
    // Panel edges as distances from the graded end: half * GRADING^k.
    let mut edges: Vec<f64> = (0..=levels).map(|k| half * GRADING.powi(k as i32)).collect();
    edges.push(0.0);
    for from_lower in [true, false] {
        for w in edges.windows(2) {
            let (far, near) = (w[0], w[1]);
            let (c, h) = (0.5 * (far + near), 0.5 * (far - near));
            for &(x, wt) in gl.iter() {
                let d = c + h * x;
                let (lo, hi) = if from_lower { (d, 2.0 * half - d) } else { (2.0 * half - d, d) };
                let t = if from_lower { m + d } else { r - d };
                q.push(t, wt * h);
                offsets.push((lo, hi));
            }
        }
    }
    q.offsets = Some(offsets);
    Ok(q)
}

/// Right-hand side of the Stein–Weiss identity
/// `c int_m^R (R^2-t^2)^(mu-1) t^(2nu+1) (1 - m^2/t^2)^nu dt`.
pub fn stein_weiss_reconstruct(r: f64, m: f64, params: &ExponentParams, quad: &Quadrature) -> f64 {
    let m = m.abs();
    if r <= m {
        return 0.0;
    }
    let (mu, nu) = (params.mu, params.nu);
    let mut acc = 0.0;
    for (i, (&t, &w)) in quad.nodes.iter().zip(&quad.weights).enumerate() {
        let (dl, du) = match &quad.offsets {
            Some(o) => o[i],
            None => (t - m, r - t),
        };
        if dl <= 0.0 || du <= 0.0 {
            continue;
        }
        // (R^2-t^2)^(mu-1) t^(2nu+1) (1-m^2/t^2)^nu = (R-t)^(mu-1) (R+t)^(mu-1) t (t-m)^nu (t+m)^nu
        let v = pos_pow(du, mu - 1.0) * pos_pow(r + t, mu - 1.0) * t * pos_pow(dl, nu) * pos_pow(t + m, nu);
        acc += w * v;
    }
    params.stein_weiss_constant() * acc
}

/// Convenience: reconstruct with a default graded rule.
pub fn stein_weiss_reconstruct_default(r: f64, m: f64, params: &ExponentParams) -> Result<f64> {
    let m = m.abs();
    if r < m {
        return Err(Error::InvalidParameter(format!("need R >= m (got R = {r}, m = {m})")));
    }
    let q = build_stein_weiss_quadrature(m, r, 24, 12)?;
    Ok(stein_weiss_reconstruct(r, m, params, &q))
}
