//! Randomized experiments: test-function families, empirical ratio
//! estimates for the bilinear pieces, decay fits, pointwise domination by
//! maximal functions, the weighted lattice inequality and square-function
//! growth.
//!
//! Every trial draws from its own ChaCha stream keyed by `(master seed,
//! trial index)`, so serial and parallel runs produce identical numbers.
//! Ratios are empirical lower bounds for operator norms; experiments assert
//! shapes (slopes, spreads, successive ratios), not constants.

use std::f64::consts::TAU;
use std::path::Path;
use std::str::FromStr;

use ini::Ini;
use log::{debug, warn};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{label_lattice, sectors, square_function_labeled, trapezoid_family, FrequencyRegion};
use crate::maximal::{directional_maximal, power_maximal, strong_maximal, MaximalBase, MaxField};
use crate::operators::{apply_linear, c_j_sweep};
use crate::quadrature::ProductPlan;
use crate::spectral::{lp_of_moduli, Field, GridSpec, Repr};
use crate::symbols::{ExponentParams, LinearKind, LinearSymbolSpec};

/// Out-of-band spectral energy fraction above which a family is rejected.
pub const BAND_LEAK: f64 = 1e-10;

/// Denominators below this discard a trial.
pub const DEGENERATE: f64 = 1e-14;

/// Relative floor on the maximal function in domination checks.
pub const DOMINATION_FLOOR: f64 = 1e-14;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Random stream of one trial.
pub fn trial_rng(master: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(trial);
    rng
}

#[derive(Clone, Debug)]
pub enum TestFamily {
    /// Anisotropic Gaussian envelope of spatial standard deviations `widths`,
    /// rotated by `orientation`, modulated to `freq_center`.
    GaussianPacket { center: (f64, f64), freq_center: (f64, f64), widths: (f64, f64), orientation: f64 },
    /// Independent signs on the lattice points of the regions.
    RademacherRegions { regions: Vec<FrequencyRegion> },
    /// Indicator spectrum of one region.
    Knapp { region: FrequencyRegion },
    /// Plane wave under a broad isotropic Gaussian of deviation `width`.
    PlaneWaveBump { freq: (f64, f64), width: f64 },
}

impl TestFamily {
    pub fn tag(&self) -> &'static str {
        match self {
            TestFamily::GaussianPacket { .. } => "gaussian_packet",
            TestFamily::RademacherRegions { .. } => "rademacher_regions",
            TestFamily::Knapp { .. } => "knapp",
            TestFamily::PlaneWaveBump { .. } => "plane_wave_bump",
        }
    }
}

/// Target `L^p` norm of a generated function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normalization {
    pub p: f64,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct TestFunctionSpec {
    pub family: TestFamily,
    pub grid: GridSpec,
    pub normalization: Option<Normalization>,
}

fn periodic_offset(x: f64, c: f64, period: f64) -> f64 {
    (x - c + 0.5 * period).rem_euclid(period) - 0.5 * period
}

fn gaussian_space(grid: GridSpec, center: (f64, f64), freq: (f64, f64), widths: (f64, f64), angle: f64) -> Result<Field> {
    let l = grid.period();
    if widths.0 <= 0.0 || widths.1 <= 0.0 {
        return Err(Error::InvalidParameter("packet widths must be positive".into()));
    }
    // Six deviations inside half a period keep the wrapped mass below 1e-15.
    if 6.0 * widths.0.max(widths.1) > 0.5 * l {
        return Err(Error::InvalidParameter(format!("packet widths {widths:?} too wide for period {l}")));
    }
    let k = ((freq.0 * l).round() / l, (freq.1 * l).round() / l);
    let (c, s) = (angle.cos(), angle.sin());
    Ok(Field::from_space_fn(grid, |x1, x2| {
        let d1 = periodic_offset(x1, center.0, l);
        let d2 = periodic_offset(x2, center.1, l);
        let u = c * d1 + s * d2;
        let v = -s * d1 + c * d2;
        let env = (-0.5 * (u * u / (widths.0 * widths.0) + v * v / (widths.1 * widths.1))).exp();
        Complex64::from_polar(env, TAU * (k.0 * x1 + k.1 * x2))
    }))
}

/// Zeroes the spectrum outside the band, rejecting a noticeable leak.
fn band_limit(f: Field) -> Result<Field> {
    let grid = f.grid();
    let mut spec = f.to_frequency().into_samples();
    let (mut inside, mut outside) = (0.0, 0.0);
    for (i, v) in spec.iter_mut().enumerate() {
        let (k1, k2) = grid.wavenumber(i);
        if grid.in_band(k1, k2) {
            inside += v.norm_sqr();
        } else {
            outside += v.norm_sqr();
            *v = ZERO;
        }
    }
    if outside > BAND_LEAK * (inside + outside) || inside == 0.0 {
        return Err(Error::InvalidParameter(format!(
            "band limit infeasible: out-of-band energy fraction {:.3e}",
            outside / (inside + outside).max(f64::MIN_POSITIVE)
        )));
    }
    Ok(Field::new(grid, spec, Repr::Frequency)?.to_space())
}

fn region_spectrum(grid: GridSpec, regions: &[FrequencyRegion], mut coef: impl FnMut() -> f64) -> Result<Field> {
    let mut spec = vec![ZERO; grid.len()];
    let mut any = false;
    for i in 0..grid.len() {
        let (k1, k2) = grid.wavenumber(i);
        let xi = grid.frequency(i);
        if grid.in_band(k1, k2) && regions.iter().any(|r| r.contains(xi)) {
            spec[i] = Complex64::new(coef(), 0.0);
            any = true;
        }
    }
    if !any {
        return Err(Error::InvalidParameter("band limit infeasible: no in-band lattice point in the regions".into()));
    }
    Ok(Field::new(grid, spec, Repr::Frequency)?.to_space())
}

/// Generates one test function; deterministic in `(spec, seed)`.
pub fn gen_test_function(spec: &TestFunctionSpec, seed: u64) -> Result<Field> {
    let grid = spec.grid;
    let f = match &spec.family {
        TestFamily::GaussianPacket { center, freq_center, widths, orientation } => {
            band_limit(gaussian_space(grid, *center, *freq_center, *widths, *orientation)?)?
        }
        TestFamily::PlaneWaveBump { freq, width } => {
            let c = (0.5 * grid.period(), 0.5 * grid.period());
            band_limit(gaussian_space(grid, c, *freq, (*width, *width), 0.0)?)?
        }
        TestFamily::RademacherRegions { regions } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            region_spectrum(grid, regions, || if rng.random::<bool>() { 1.0 } else { -1.0 })?
        }
        TestFamily::Knapp { region } => region_spectrum(grid, std::slice::from_ref(region), || 1.0)?,
    };
    match spec.normalization {
        None => Ok(f),
        Some(Normalization { p, value }) => {
            let norm = lp_norm(&f, p);
            if norm < DEGENERATE {
                return Err(Error::InvalidParameter("cannot normalize a vanishing function".into()));
            }
            Ok(f.scaled(Complex64::new(value / norm, 0.0)))
        }
    }
}

/// `L^p` norm of the space samples for any `p > 0`.
pub fn lp_norm(f: &Field, p: f64) -> f64 {
    let space = f.to_space();
    lp_of_moduli(space.samples().iter().map(|v| v.norm()), space.grid(), p)
}

/// Where in frequency a mix places its spectra.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FrequencyTarget {
    /// `1/2 < xi2 < 2`, `|xi1| <= xi2`: the support of the cone pieces.
    Cone,
    /// `xi1 > 0`, `1/2 <= xi2 <= 2`: the trapezoid strip.
    Strip,
    /// `0 <= arg xi < alpha`, `|xi| >= 1/2`.
    Sector { alpha: f64 },
    /// Anywhere in the band.
    Band,
    /// Cone points with `1 - (xi1/xi2)^2` in `2^-j [1/2, 2]`, the support of the level `j` pieces.
    ConeEdge { j: u32 },
    /// `1/2 < xi2 < 2` with `(xi1/xi2)^2 < 2^-j`.
    Axis { j: u32 },
}

fn near_axis(j: u32, xi: (f64, f64)) -> bool {
    xi.1 > 0.55 && xi.1 < 1.95 && (xi.0 / xi.1).powi(2) < (-(j as f64)).exp2()
}

fn on_cone_edge(j: u32, xi: (f64, f64)) -> bool {
    let gap = 1.0 - (xi.0 / xi.1).powi(2);
    let lo = (-(j as f64) - 1.0).exp2();
    xi.1 > 0.55 && xi.1 < 1.95 && (lo..=4.0 * lo).contains(&gap)
}

impl FrequencyTarget {
    fn accepts(&self, xi: (f64, f64)) -> bool {
        match *self {
            FrequencyTarget::Cone => xi.1 > 0.55 && xi.1 < 1.95 && xi.0.abs() <= xi.1,
            FrequencyTarget::Strip => xi.0 > 0.0 && (0.5..=2.0).contains(&xi.1),
            FrequencyTarget::Sector { alpha } => {
                let a = xi.1.atan2(xi.0);
                (0.0..alpha).contains(&a) && xi.0.hypot(xi.1) >= 0.5
            }
            FrequencyTarget::Band => true,
            FrequencyTarget::ConeEdge { j } => on_cone_edge(j, xi),
            FrequencyTarget::Axis { j } => near_axis(j, xi),
        }
    }

    /// Thin regions for the knapp and rademacher families.
    fn cell(&self, grid: GridSpec, rng: &mut ChaCha8Rng) -> FrequencyRegion {
        match *self {
            FrequencyTarget::Cone => {
                let n = rng.random_range(-4..=-1);
                let ell = 3;
                let base = FrequencyRegion::TrapezoidSlice { n, j: rng.random_range(1..=1 << ell), ell };
                if rng.random::<bool>() {
                    FrequencyRegion::custom(format!("mirror {base}"), move |a, b| base.contains((-a, b)))
                } else {
                    base
                }
            }
            FrequencyTarget::Strip => {
                // Slices of X_n reach xi1 = 2^(n+2); keep them inside the band.
                let top = band_edge(grid).log2().floor() as i32 - 2;
                let n = rng.random_range(top - 2..=top);
                let ell = 4;
                FrequencyRegion::TrapezoidSlice { n, j: rng.random_range(1..=1 << ell), ell }
            }
            FrequencyTarget::Sector { alpha } => {
                let count = 64;
                let j = rng.random_range(1..=count);
                let r0 = rng.random_range(0.5..0.75) * band_edge(grid);
                let sector = FrequencyRegion::Sector { j, aperture: alpha, count };
                let r1 = r0 + 0.25 * band_edge(grid);
                FrequencyRegion::custom(format!("{sector} r in [{r0}, {r1})"), move |a, b| {
                    let r = a.hypot(b);
                    r0 <= r && r < r1 && sector.contains((a, b))
                })
            }
            FrequencyTarget::Band => {
                let e = band_edge(grid);
                let (x, y) = (rng.random_range(-e..e), rng.random_range(-e..e));
                let w = 0.25 * e;
                FrequencyRegion::Rectangle { lo: (x, y), hi: (x + w, y + w) }
            }
            FrequencyTarget::ConeEdge { j } => {
                let y0 = rng.random_range(0.55..1.45);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                FrequencyRegion::custom(format!("edge j={j} sign {sign} xi2 in [{y0}, {})", y0 + 0.5), move |a, b| {
                    a * sign > 0.0 && (y0..y0 + 0.5).contains(&b) && on_cone_edge(j, (a, b))
                })
            }
            FrequencyTarget::Axis { j } => {
                let y0 = rng.random_range(0.55..1.45);
                FrequencyRegion::custom(format!("axis j={j} xi2 in [{y0}, {})", y0 + 0.5), move |a, b| {
                    (y0..y0 + 0.5).contains(&b) && near_axis(j, (a, b))
                })
            }
        }
    }
}

fn band_edge(grid: GridSpec) -> f64 {
    grid.band_half_width() as f64 / grid.period()
}

/// Weighted draw over the four families.
#[derive(Clone, Debug)]
pub struct TestMix {
    /// Gaussian packet, rademacher, knapp, plane-wave bump.
    pub weights: [f64; 4],
    pub target: FrequencyTarget,
    pub normalization: Option<Normalization>,
}

impl TestMix {
    pub fn new(target: FrequencyTarget) -> TestMix {
        TestMix { weights: [0.4, 0.3, 0.2, 0.1], target, normalization: None }
    }

    pub fn normalized(mut self, p: f64, value: f64) -> TestMix {
        self.normalization = Some(Normalization { p, value });
        self
    }

    fn frequency(&self, grid: GridSpec, rng: &mut ChaCha8Rng, margin: f64) -> Result<(f64, f64)> {
        let e = band_edge(grid) - margin;
        if e <= 0.0 {
            return Err(Error::InvalidParameter("band too narrow for the requested margin".into()));
        }
        for _ in 0..10_000 {
            let xi = (rng.random_range(-e..e), rng.random_range(-e..e));
            if self.target.accepts(xi) {
                return Ok(xi);
            }
        }
        Err(Error::InvalidParameter(format!("no frequency of {:?} fits the band of {grid}", self.target)))
    }

    /// Draws a family description from `rng`.
    pub fn draw_spec(&self, grid: GridSpec, rng: &mut ChaCha8Rng) -> Result<TestFunctionSpec> {
        let total: f64 = self.weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut kind = 3;
        for (i, w) in self.weights.iter().enumerate() {
            if u < *w {
                kind = i;
                break;
            }
            u -= w;
        }
        let l = grid.period();
        let family = match kind {
            0 => {
                let hi = l / 12.0;
                let w = (rng.random_range(0.25..1.0) * hi, rng.random_range(0.25..1.0) * hi);
                // Six frequency deviations 1/(2 pi w) clear of the band edge.
                let margin = 6.0 / (TAU * w.0.min(w.1));
                TestFamily::GaussianPacket {
                    center: (rng.random_range(0.0..l), rng.random_range(0.0..l)),
                    freq_center: self.frequency(grid, rng, margin)?,
                    widths: w,
                    orientation: rng.random_range(0.0..std::f64::consts::PI),
                }
            }
            1 => {
                let count = rng.random_range(1..=4);
                TestFamily::RademacherRegions { regions: (0..count).map(|_| self.target.cell(grid, rng)).collect() }
            }
            2 => TestFamily::Knapp { region: self.target.cell(grid, rng) },
            _ => {
                let width = l / 12.0;
                let margin = 6.0 / (TAU * width);
                TestFamily::PlaneWaveBump { freq: self.frequency(grid, rng, margin)?, width }
            }
        };
        Ok(TestFunctionSpec { family, grid, normalization: self.normalization })
    }

    /// One function from `rng`, retrying draws that fall outside the band.
    pub fn draw(&self, grid: GridSpec, rng: &mut ChaCha8Rng) -> Result<Field> {
        let mut last = None;
        for _ in 0..32 {
            let drawn = self.draw_spec(grid, rng).and_then(|spec| {
                let seed = rng.random::<u64>();
                gen_test_function(&spec, seed)
            });
            match drawn {
                Ok(f) => return Ok(f),
                Err(e) => {
                    debug!("redrawing: {e}");
                    last = Some(e);
                }
            }
        }
        Err(last.unwrap_or_else(|| Error::InvalidParameter("no draw succeeded".into())))
    }

    /// `count` functions, the `i`-th from stream `i` of `seed`.
    pub fn draw_many(&self, grid: GridSpec, count: usize, seed: u64) -> Result<Vec<Field>> {
        (0..count).into_par_iter().map(|i| self.draw(grid, &mut trial_rng(seed, i as u64))).collect()
    }
}

/// Independent mixes for the two arguments of a bilinear operator.
#[derive(Clone, Debug)]
pub struct PairSampler {
    pub grid: GridSpec,
    /// `(f mix, g mix)` choices, taken in turn by trial index.
    pub mixes: Vec<(TestMix, TestMix)>,
    /// Translate `g` so its peak sits on the peak of `f`.
    pub colocate: bool,
}

impl PairSampler {
    pub fn new(grid: GridSpec, mix: TestMix) -> PairSampler {
        PairSampler { grid, mixes: vec![(mix.clone(), mix)], colocate: false }
    }

    /// For each level `j`, `f` near the cone edge of level `j` and `g` near the
    /// axis, co-located in space.
    pub fn for_levels(grid: GridSpec, levels: &[u32]) -> PairSampler {
        let mixes = levels
            .iter()
            .map(|&j| (TestMix::new(FrequencyTarget::ConeEdge { j }), TestMix::new(FrequencyTarget::Axis { j })))
            .collect();
        PairSampler { grid, mixes, colocate: true }
    }

    pub fn draw(&self, master: u64, trial: usize) -> Result<(Field, Field)> {
        if self.mixes.is_empty() {
            return Err(Error::InvalidParameter("pair sampler without mixes".into()));
        }
        let mut rng = trial_rng(master, trial as u64);
        let (f_mix, g_mix) = &self.mixes[trial % self.mixes.len()];
        let f = f_mix.draw(self.grid, &mut rng)?;
        let g = g_mix.draw(self.grid, &mut rng)?;
        if !self.colocate {
            return Ok((f, g));
        }
        let ((a1, a2), (b1, b2)) = (f.peak(), g.peak());
        Ok((f, g.translated(a1 as i64 - b1 as i64, a2 as i64 - b2 as i64)))
    }
}

/// Exponents with `1/p = 1/p1 + 1/p2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HolderTriple {
    pub p1: f64,
    pub p2: f64,
    pub p: f64,
}

impl HolderTriple {
    pub fn new(p1: f64, p2: f64) -> Result<HolderTriple> {
        if !(p1 >= 1.0 && p2 >= 1.0) {
            return Err(Error::InvalidParameter(format!("need p1, p2 >= 1 (got {p1}, {p2})")));
        }
        Ok(HolderTriple { p1, p2, p: 1.0 / (1.0 / p1 + 1.0 / p2) })
    }

    /// Validates a given `p` against the scaling condition.
    pub fn with_target(p1: f64, p2: f64, p: f64) -> Result<HolderTriple> {
        let h = HolderTriple::new(p1, p2)?;
        if (1.0 / p - 1.0 / h.p).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("1/{p} != 1/{p1} + 1/{p2}")));
        }
        Ok(h)
    }
}

/// Largest observed `||op(f,g)||_p / (||f||_p1 ||g||_p2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RatioRecord {
    pub op: String,
    pub j: Option<u32>,
    pub p1: f64,
    pub p2: f64,
    pub p: f64,
    pub lambda: Option<f64>,
    pub trials: usize,
    pub discarded: usize,
    pub seed: u64,
    pub max_ratio: f64,
    pub argmax_trial: Option<usize>,
    /// Per-trial ratio, `None` for discarded trials.
    pub ratios: Vec<Option<f64>>,
}

fn ratio_of(h: &Field, f: &Field, g: &Field, holder: HolderTriple) -> Option<f64> {
    let den = lp_norm(f, holder.p1) * lp_norm(g, holder.p2);
    if den < DEGENERATE {
        None
    } else {
        Some(lp_norm(h, holder.p) / den)
    }
}

fn summarize(ratios: Vec<Option<f64>>) -> (f64, Option<usize>, usize) {
    let mut best = (0.0, None);
    let mut discarded = 0;
    for (i, r) in ratios.iter().enumerate() {
        match r {
            Some(v) if best.1.is_none() || *v > best.0 => best = (*v, Some(i)),
            Some(_) => {}
            None => discarded += 1,
        }
    }
    (best.0, best.1, discarded)
}

/// Ratio estimate of a bilinear operator over `trials` sampled pairs.
pub fn estimate_bilinear_ratio<F>(
    tag: &str,
    op: F,
    holder: HolderTriple,
    trials: usize,
    seed: u64,
    sampler: &PairSampler,
) -> Result<RatioRecord>
where
    F: Fn(&Field, &Field) -> Result<Field> + Sync,
{
    let ratios: Vec<Option<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let (f, g) = sampler.draw(seed, t)?;
            let h = op(&f, &g)?;
            let r = ratio_of(&h, &f, &g, holder);
            if r.is_none() {
                warn!("{tag}: trial {t} discarded, degenerate denominator");
            }
            Ok(r)
        })
        .collect::<Result<_>>()?;
    let (max_ratio, argmax_trial, discarded) = summarize(ratios.clone());
    Ok(RatioRecord {
        op: tag.to_string(),
        j: None,
        p1: holder.p1,
        p2: holder.p2,
        p: holder.p,
        lambda: None,
        trials,
        discarded,
        seed,
        max_ratio,
        argmax_trial,
        ratios,
    })
}

/// One record per level of `C_j`, all levels seeing the same pairs.
pub fn sweep_j(
    params: &ExponentParams,
    holder: HolderTriple,
    levels: &[u32],
    trials: usize,
    seed: u64,
    sampler: &PairSampler,
    plan: &ProductPlan,
) -> Result<Vec<RatioRecord>> {
    let grid = sampler.grid;
    let j_max = *levels.iter().max().ok_or_else(|| Error::InvalidParameter("no levels".into()))?;
    grid.require_cone_adequate(j_max)?;
    let rule = plan.for_levels(&grid, levels)?;
    let mut per_level: Vec<Vec<Option<f64>>> = vec![Vec::with_capacity(trials); levels.len()];
    for t in 0..trials {
        let (f, g) = sampler.draw(seed, t)?;
        let reports = c_j_sweep(params, levels, &f, &g, &rule)?;
        for (k, rep) in reports.iter().enumerate() {
            per_level[k].push(ratio_of(&rep.result, &f, &g, holder));
        }
        debug!("sweep trial {t} done");
    }
    Ok(levels
        .iter()
        .zip(per_level)
        .map(|(&j, ratios)| {
            let (max_ratio, argmax_trial, discarded) = summarize(ratios.clone());
            RatioRecord {
                op: "C_j".into(),
                j: Some(j),
                p1: holder.p1,
                p2: holder.p2,
                p: holder.p,
                lambda: Some(params.lambda),
                trials,
                discarded,
                seed,
                max_ratio,
                argmax_trial,
                ratios,
            }
        })
        .collect())
}

/// Least squares line through `(j, log2 ratio)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares on `(x, y)` points.
pub fn fit_line(points: &[(f64, f64)]) -> Result<DecayFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!("{} points, need at least 3", points.len())));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(DecayFit { slope, intercept: my - slope * mx, r_squared })
}

/// Fit of `log2 max_ratio` against `j` over records with a positive ratio.
pub fn fit_decay(records: &[RatioRecord]) -> Result<DecayFit> {
    let points: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| match r.j {
            Some(j) if r.max_ratio > 0.0 => Some((j as f64, r.max_ratio.log2())),
            _ => None,
        })
        .collect();
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!("{} positive ratios, need at least 3", points.len())));
    }
    fit_line(&points)
}

/// Operator checked against a maximal function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DominationOp {
    Identity,
    /// `T_t^nu`, compared with the directional maximal function at slope `t`.
    T { nu: f64 },
    /// `B_{j,t}` with exponent `mu - 1`.
    B { mu: f64, j: u32 },
}

/// Maximal function on the right-hand side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MaximalVariant {
    /// Directional maximal function with the slope of the current `t`.
    AlongT,
    Directional(f64),
    Strong,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DominationRow {
    pub t: f64,
    pub constant: f64,
    pub argmax_function: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DominationTable {
    pub rows: Vec<DominationRow>,
    /// `max C / min C` over rows with a positive constant.
    pub spread: Option<f64>,
}

fn apply_domination_op(op: DominationOp, t: f64, f: &Field) -> Result<Field> {
    let (kind, params) = match op {
        DominationOp::Identity => return Ok(f.to_space()),
        DominationOp::T { nu } => (LinearKind::T { t }, ExponentParams::with_split(1.0, nu)?),
        DominationOp::B { mu, j } => (LinearKind::B { j, t }, ExponentParams::with_split(mu, 0.5)?),
    };
    Ok(apply_linear(&LinearSymbolSpec::new(kind, params)?, f)?.result)
}

fn maximal_of(variant: MaximalVariant, t: f64, f: &Field) -> Result<MaxField> {
    match variant {
        MaximalVariant::AlongT => directional_maximal(f, t),
        MaximalVariant::Directional(s) => directional_maximal(f, s),
        MaximalVariant::Strong => Ok(strong_maximal(f)),
    }
}

/// `C(t) = max |op_t f| / M f` over functions and grid points with
/// `M f >= 1e-14 ||f||_inf`.
pub fn check_domination(
    op: DominationOp,
    ts: &[f64],
    variant: MaximalVariant,
    functions: &[Field],
) -> Result<DominationTable> {
    match op {
        DominationOp::T { nu } if nu <= 0.0 => {
            return Err(Error::InvalidParameter(format!("the T check needs nu > 0, got {nu}")));
        }
        DominationOp::B { mu, .. } if mu <= 0.0 => {
            return Err(Error::InvalidParameter(format!("the B check needs mu > 0, got {mu}")));
        }
        _ => {}
    }
    if let Some(t) = ts.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(Error::InvalidParameter(format!("t = {t} outside (0, 1)")));
    }
    let rows = ts
        .iter()
        .map(|&t| {
            let per: Vec<f64> = functions
                .par_iter()
                .map(|f| {
                    let out = apply_domination_op(op, t, f)?;
                    let m = maximal_of(variant, t, f)?;
                    let floor = DOMINATION_FLOOR * f.to_space().max_abs();
                    Ok(out
                        .samples()
                        .iter()
                        .zip(&m.samples)
                        .filter(|(_, &mv)| mv >= floor && mv > 0.0)
                        .map(|(o, &mv)| o.norm() / mv)
                        .fold(0.0, f64::max))
                })
                .collect::<Result<_>>()?;
            let (constant, argmax_function, _) = summarize(per.into_iter().map(Some).collect());
            Ok(DominationRow { t, constant, argmax_function })
        })
        .collect::<Result<Vec<_>>>()?;
    let positive: Vec<f64> = rows.iter().map(|r| r.constant).filter(|&c| c > 0.0).collect();
    let spread = if positive.is_empty() {
        None
    } else {
        Some(positive.iter().cloned().fold(0.0, f64::max) / positive.iter().cloned().fold(f64::INFINITY, f64::min))
    };
    Ok(DominationTable { rows, spread })
}

/// Frequency lattice tiled by congruent rectangles of `size` wavenumbers,
/// translated by `offset`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RectangleLattice {
    pub size: (usize, usize),
    pub offset: (i64, i64),
}

impl RectangleLattice {
    pub fn cell_of(&self, k: (i64, i64)) -> (i64, i64) {
        (
            (k.0 - self.offset.0).div_euclid(self.size.0 as i64),
            (k.1 - self.offset.1).div_euclid(self.size.1 as i64),
        )
    }

    fn validate(&self) -> Result<()> {
        if self.size.0 == 0 || self.size.1 == 0 {
            return Err(Error::InvalidParameter("lattice rectangles need positive sides".into()));
        }
        Ok(())
    }
}

/// `sum_nu |P_nu f|^2` pointwise, one inverse transform per occupied cell.
pub fn lattice_square_sum(f: &Field, lattice: &RectangleLattice) -> Result<Vec<f64>> {
    lattice.validate()?;
    let grid = f.grid();
    let spec = f.to_frequency();
    let mut cells: std::collections::BTreeMap<(i64, i64), Vec<usize>> = Default::default();
    for (i, v) in spec.samples().iter().enumerate() {
        if *v != ZERO {
            cells.entry(lattice.cell_of(grid.wavenumber(i))).or_default().push(i);
        }
    }
    let pieces: Vec<Vec<f64>> = cells
        .into_par_iter()
        .map(|(_, idx)| {
            let mut buf = vec![ZERO; grid.len()];
            for i in idx {
                buf[i] = spec.samples()[i];
            }
            let piece = Field::new(grid, buf, Repr::Frequency).expect("grid length").to_space();
            piece.samples().iter().map(|v| v.norm_sqr()).collect()
        })
        .collect();
    let mut acc = vec![0.0; grid.len()];
    for p in pieces {
        acc.iter_mut().zip(p).for_each(|(a, v)| *a += v);
    }
    Ok(acc)
}

/// Both sides of the weighted inequality for one `(f, w)`.
pub fn weighted_lattice_sides(f: &Field, w: &[f64], lattice: &RectangleLattice, s: f64) -> Result<(f64, f64)> {
    let grid = f.grid();
    if w.len() != grid.len() || w.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidParameter("weight must be nonnegative on the grid".into()));
    }
    let sq = lattice_square_sum(f, lattice)?;
    let wf = Field::new(grid, w.iter().map(|&v| Complex64::new(v, 0.0)).collect(), Repr::Space)?;
    let mw = power_maximal(&wf, s, MaximalBase::Strong)?;
    let fs = f.to_space();
    let area = grid.cell_area();
    let lhs = area * sq.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
    let rhs = area * fs.samples().iter().zip(&mw.samples).map(|(v, m)| v.norm_sqr() * m).sum::<f64>();
    Ok((lhs, rhs))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedRow {
    pub s: f64,
    pub max_ratio: f64,
    pub argmax_trial: Option<usize>,
}

/// Max over `trials` random `(f, w)` of LHS/RHS for each `s`; `w = |h|^2`
/// with `h` drawn from the same mix as `f`.
pub fn check_weighted_lattice(
    grid: GridSpec,
    lattice: &RectangleLattice,
    s_values: &[f64],
    trials: usize,
    seed: u64,
    mix: &TestMix,
) -> Result<Vec<WeightedRow>> {
    lattice.validate()?;
    let per_trial: Vec<Vec<Option<f64>>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t as u64);
            let f = mix.draw(grid, &mut rng)?;
            let h = mix.draw(grid, &mut rng)?.to_space();
            let w: Vec<f64> = h.samples().iter().map(|v| v.norm_sqr()).collect();
            s_values
                .iter()
                .map(|&s| {
                    let (lhs, rhs) = weighted_lattice_sides(&f, &w, lattice, s)?;
                    Ok((rhs > DEGENERATE).then_some(lhs / rhs))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(s_values
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let (max_ratio, argmax_trial, _) = summarize(per_trial.iter().map(|r| r[k]).collect());
            WeightedRow { s, max_ratio, argmax_trial }
        })
        .collect())
}

/// Region family of a square function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SqfnFamily {
    /// All slices `S_n^j(l)` meeting the lattice; the size is `l`.
    Trapezoid,
    /// `N` sub-sectors of the aperture; the size is `N`.
    Sector { alpha: f64 },
}

impl SqfnFamily {
    pub fn regions(&self, grid: GridSpec, size: u32) -> Result<Vec<FrequencyRegion>> {
        match *self {
            SqfnFamily::Trapezoid => {
                // Slices of X_0 must be at least one lattice spacing wide.
                if 2f64.powi(-(size as i32)) < grid.freq_spacing() {
                    return Err(Error::InvalidParameter(format!("l = {size} below the lattice resolution of {grid}")));
                }
                trapezoid_family(grid, size)
            }
            SqfnFamily::Sector { alpha } => {
                // Half a lattice spacing of arc at the band edge.
                if alpha / size as f64 * grid.band_half_width() as f64 <= 0.5 {
                    return Err(Error::InvalidParameter(format!(
                        "N = {size} sub-sectors of {alpha} are not resolved on {grid}"
                    )));
                }
                sectors(alpha, size)
            }
        }
    }
}

impl SqfnFamily {
    /// Random-sign sums over every region of size `size`; for nested families these
    /// spread over all regions of every coarser size too.
    pub fn spread_functions(&self, grid: GridSpec, size: u32, count: usize, seed: u64) -> Result<Vec<Field>> {
        let regions = self.regions(grid, size)?;
        (0..count)
            .into_par_iter()
            .map(|i| {
                let spec = TestFunctionSpec {
                    family: TestFamily::RademacherRegions { regions: regions.clone() },
                    grid,
                    normalization: None,
                };
                gen_test_function(&spec, trial_rng(seed, i as u64).random())
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthRow {
    pub size: u32,
    pub max_ratio: f64,
    pub argmax_function: Option<usize>,
    /// `max_ratio` over the previous row's.
    pub step_ratio: Option<f64>,
}

/// `max_f ||S f||_p / ||f||_p` for each family size.
pub fn sqfn_growth(family: SqfnFamily, sizes: &[u32], p: f64, functions: &[Field]) -> Result<Vec<GrowthRow>> {
    let grid = functions.first().map(|f| f.grid()).ok_or_else(|| Error::InsufficientData("no functions".into()))?;
    if functions.iter().any(|f| f.grid() != grid) {
        return Err(Error::GridMismatch);
    }
    let mut rows: Vec<GrowthRow> = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let labels = label_lattice(&family.regions(grid, size)?, grid)?;
        let ratios: Vec<Option<f64>> = functions
            .iter()
            .map(|f| {
                let den = lp_norm(f, p);
                if den < DEGENERATE {
                    return Ok(None);
                }
                let s = square_function_labeled(f, &labels)?;
                Ok(Some(lp_norm(&s, p) / den))
            })
            .collect::<Result<_>>()?;
        let (max_ratio, argmax_function, _) = summarize(ratios);
        let step_ratio = rows.last().filter(|r| r.max_ratio > 0.0).map(|r| max_ratio / r.max_ratio);
        rows.push(GrowthRow { size, max_ratio, argmax_function, step_ratio });
    }
    Ok(rows)
}

/// `key = value` experiment configuration with `[section]` headers.
#[derive(Clone, Debug, Default)]
pub struct ExperimentConfig {
    ini: Ini,
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        Ini::load_from_str(text)
            .map(|ini| ExperimentConfig { ini })
            .map_err(|e| Error::Config(e.to_string()))
    }

    /// Typed value of `key` in `section` (`None` for the general section).
    pub fn get<T: FromStr>(&self, section: Option<&str>, key: &str) -> Result<Option<T>> {
        let Some(raw) = self.ini.get_from(section, key) else {
            return Ok(None);
        };
        raw.trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("cannot parse {key} = {raw:?} in [{}]", section.unwrap_or(""))))
    }

    /// Raw `(key, value)` pairs of one section, in file order.
    pub fn entries(&self, section: Option<&str>) -> Vec<(String, String)> {
        self.ini
            .section(section)
            .map(|p| p.iter().map(|(k, v)| (k.to_string(), v.trim().to_string())).collect())
            .unwrap_or_default()
    }

    /// Comma-separated list value.
    pub fn get_list<T: FromStr>(&self, section: Option<&str>, key: &str) -> Result<Option<Vec<T>>> {
        let Some(raw) = self.ini.get_from(section, key) else {
            return Ok(None);
        };
        raw.split(',')
            .map(|s| s.trim().parse().map_err(|_| Error::Config(format!("cannot parse list item {s:?} of {key}"))))
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }
}
