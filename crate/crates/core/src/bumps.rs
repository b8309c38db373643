//! Smooth cutoffs built from `beta(u) = exp(-1/u)`.
//!
//! `chi` is 1 on `(-inf, 1]`, 0 on `[2, inf)` and monotone in between; every
//! other bump is an algebraic combination of dilates of `chi`, so supports are
//! exact (evaluations outside return literal zeros).

use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BumpKind {
    Chi,
    Psi,
    Psi1,
    Phi,
    PhiTilde,
    Psi11,
    Psi12,
}

impl BumpKind {
    pub const ALL: [BumpKind; 7] = [
        BumpKind::Chi,
        BumpKind::Psi,
        BumpKind::Psi1,
        BumpKind::Phi,
        BumpKind::PhiTilde,
        BumpKind::Psi11,
        BumpKind::Psi12,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            BumpKind::Chi => "chi",
            BumpKind::Psi => "psi",
            BumpKind::Psi1 => "psi1",
            BumpKind::Phi => "phi",
            BumpKind::PhiTilde => "phiTilde",
            BumpKind::Psi11 => "psi11",
            BumpKind::Psi12 => "psi12",
        }
    }
}

impl fmt::Display for BumpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// The base cutoff.
pub fn chi(s: f64) -> f64 {
    if s <= 1.0 {
        1.0
    } else if s >= 2.0 {
        0.0
    } else {
        // beta(2-s) / (beta(2-s) + beta(s-1)) rewritten to avoid underflow.
        let e = 1.0 / (2.0 - s) - 1.0 / (s - 1.0);
        1.0 / (1.0 + e.exp())
    }
}

fn psi(s: f64) -> f64 {
    chi(s) - chi(2.0 * s)
}

fn psi1(t: f64) -> f64 {
    1.0 - chi(4.0 * (1.0 - t))
}

fn phi_tilde(s: f64) -> f64 {
    chi(s / 2.0) * (1.0 - chi(4.0 * s))
}

fn rho(t: f64) -> f64 {
    chi(16.0 * t)
}

/// A named cutoff with its support bookkeeping.
///
/// `domain_lo` is the left end of the half-line the bump is used on: the
/// `psi1` family only ever sees squared ratios, so it is one-sided at 0 and
/// its formula equals 1 to the left of the domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothBump {
    pub kind: BumpKind,
    pub support: (f64, f64),
    pub domain_lo: f64,
}

impl SmoothBump {
    pub fn eval(&self, s: f64) -> f64 {
        match self.kind {
            BumpKind::Chi => chi(s),
            BumpKind::Psi | BumpKind::Phi => psi(s),
            BumpKind::Psi1 => psi1(s),
            BumpKind::PhiTilde => phi_tilde(s),
            BumpKind::Psi11 => psi1(s) * rho(s),
            BumpKind::Psi12 => psi1(s) * (1.0 - rho(s)),
        }
    }

    /// Whether `s` lies in the domain but outside the support.
    pub fn outside_support(&self, s: f64) -> bool {
        s >= self.domain_lo && (s < self.support.0 || s > self.support.1)
    }
}

pub fn build_base_cutoff() -> SmoothBump {
    SmoothBump { kind: BumpKind::Chi, support: (f64::NEG_INFINITY, 2.0), domain_lo: f64::NEG_INFINITY }
}

/// The fixed partition family; all members are closed-form in `chi`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PartitionFamily;

pub fn build_partition() -> PartitionFamily {
    PartitionFamily
}

impl PartitionFamily {
    pub fn bump(&self, kind: BumpKind) -> SmoothBump {
        let ninf = f64::NEG_INFINITY;
        let (support, domain_lo) = match kind {
            BumpKind::Chi => ((ninf, 2.0), ninf),
            BumpKind::Psi | BumpKind::Phi => ((0.5, 2.0), ninf),
            BumpKind::Psi1 => ((0.0, 0.75), 0.0),
            BumpKind::PhiTilde => ((0.25, 4.0), ninf),
            BumpKind::Psi11 => ((0.0, 0.125), 0.0),
            BumpKind::Psi12 => ((0.0625, 0.75), ninf),
        };
        SmoothBump { kind, support, domain_lo }
    }

    #[inline]
    pub fn chi(&self, s: f64) -> f64 {
        chi(s)
    }
    #[inline]
    pub fn psi(&self, s: f64) -> f64 {
        psi(s)
    }
    #[inline]
    pub fn phi(&self, s: f64) -> f64 {
        psi(s)
    }
    #[inline]
    pub fn psi1(&self, t: f64) -> f64 {
        psi1(t)
    }
    #[inline]
    pub fn phi_tilde(&self, s: f64) -> f64 {
        phi_tilde(s)
    }
    #[inline]
    pub fn psi11(&self, t: f64) -> f64 {
        psi1(t) * rho(t)
    }
    #[inline]
    pub fn psi12(&self, t: f64) -> f64 {
        psi1(t) * (1.0 - rho(t))
    }
    /// `psi1(1 - s/2)`, so that `psi1(t) = psi1_tilde(2(1-t))`.
    #[inline]
    pub fn psi1_tilde(&self, s: f64) -> f64 {
        psi1(1.0 - s / 2.0)
    }

    /// `sum_{j=2}^{big_j} psi(2^j (1-t)) + psi1(t)`.
    pub fn partition_sum(&self, big_j: u32, t: f64) -> f64 {
        let d = 1.0 - t;
        let mut acc = psi1(t);
        for j in 2..=big_j {
            acc += psi((j as f64).exp2() * d);
        }
        acc
    }
}

/// Largest `t` for which the truncated sum up to `big_j` is exactly 1:
/// the last omitted term `psi(2^(J+1)(1-t))` vanishes iff `1-t >= 2^-J`.
pub fn partition_valid_limit(big_j: u32) -> f64 {
    1.0 - (-(big_j as f64)).exp2()
}

/// Deviation samples `(t, |sum - 1|)` on a closed uniform grid of `[0, t_hi]`.
pub fn partition_deviations(big_j: u32, samples: usize, t_hi: f64) -> Vec<(f64, f64)> {
    let fam = build_partition();
    let step = t_hi / (samples - 1) as f64;
    (0..samples)
        .map(|i| {
            let t = if i + 1 == samples { t_hi } else { i as f64 * step };
            (t, (fam.partition_sum(big_j, t) - 1.0).abs())
        })
        .collect()
}

/// Maximum partition deviation over `[0, 1 - 2^-J]`.
pub fn verify_partition(big_j: u32, samples: usize) -> crate::Result<f64> {
    verify_partition_on(big_j, samples, partition_valid_limit(big_j))
}

/// Maximum partition deviation over an explicit closed interval `[0, t_hi]`.
pub fn verify_partition_on(big_j: u32, samples: usize, t_hi: f64) -> crate::Result<f64> {
    if big_j < 2 {
        return Err(crate::Error::InvalidParameter(format!("J = {big_j} must be >= 2")));
    }
    if samples < 1000 {
        return Err(crate::Error::InvalidParameter(format!("samples = {samples} must be >= 1000")));
    }
    if !(0.0..=1.0).contains(&t_hi) {
        return Err(crate::Error::InvalidParameter(format!("t_hi = {t_hi} outside [0, 1]")));
    }
    Ok(partition_deviations(big_j, samples, t_hi).into_iter().map(|(_, d)| d).fold(0.0, f64::max))
}
