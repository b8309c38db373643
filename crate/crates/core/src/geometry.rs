//! Frequency regions of the plane, sharp projections onto them, and a
//! probe-lattice bound for the overlap of Minkowski sums of region families.
//!
//! Every region is half-open in its slicing coordinate: the lower edge
//! belongs to the region and the upper edge does not, so the slices of a
//! family tile their union with each lattice point counted once. Ratio
//! edges are tested by cross-multiplication against dyadic constants, which
//! is exact for lattice frequencies `k / L` with `L` a power of two.

use std::f64::consts::{FRAC_PI_4, TAU};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral::{Field, GridSpec, Repr};

/// Membership predicate used by [`FrequencyRegion::Custom`].
pub type Predicate = Arc<dyn Fn(f64, f64) -> bool + Send + Sync>;

#[derive(Clone)]
pub enum FrequencyRegion {
    /// `X_n`: `1/2 <= xi2 <= 2`, `2^n <= xi1/xi2 < 2^(n+1)`.
    Trapezoid { n: i32 },
    /// `S_n^j(l)`: the `j`-th of `2^l` equal ratio slices of `X_n`.
    TrapezoidSlice { n: i32, j: u32, ell: u32 },
    /// `S_n^{j,a}(l)`: `S_n^j` with `xi2` in the `a`-th band of height `2^-l`.
    TrapezoidCell { n: i32, j: u32, alpha: u32, ell: u32 },
    /// `(0, inf) x [1/2, 2]`, the union of all trapezoids.
    ConeStrip,
    /// `Theta_j^a(N)`: `(j-1) a/N <= arg xi < j a/N` with `arg` in `[0, 2 pi)`.
    Sector { j: u32, aperture: f64, count: u32 },
    /// `Theta_{j,g}^a`: the sector cut to `start + g step <= xi1 < start + (g+1) step`.
    SectorCell { j: u32, aperture: f64, count: u32, gamma: u32, start: f64, step: f64 },
    /// `Delta_n`: `2^n <= xi1 < 2^(n+1)`.
    DyadicBand { n: i32 },
    /// `P_{j,n}^a = Theta_j^a ∩ Delta_n`, optionally cut to
    /// `2^n + g/N <= xi1 < 2^n + (g+1)/N`.
    BandCell { j: u32, aperture: f64, count: u32, n: i32, gamma: Option<u32> },
    /// `normal . xi >= offset`.
    HalfSpace { normal: (f64, f64), offset: f64 },
    /// `[lo1, hi1) x [lo2, hi2)`.
    Rectangle { lo: (f64, f64), hi: (f64, f64) },
    Custom { name: String, predicate: Predicate },
}

impl fmt::Debug for FrequencyRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for FrequencyRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use FrequencyRegion::*;
        match self {
            Trapezoid { n } => write!(f, "X[n={n}]"),
            TrapezoidSlice { n, j, ell } => write!(f, "S[n={n},j={j},l={ell}]"),
            TrapezoidCell { n, j, alpha, ell } => write!(f, "S[n={n},j={j},a={alpha},l={ell}]"),
            ConeStrip => write!(f, "strip"),
            Sector { j, aperture, count } => write!(f, "Theta[j={j},a={aperture},N={count}]"),
            SectorCell { j, aperture, count, gamma, .. } => {
                write!(f, "Theta[j={j},g={gamma},a={aperture},N={count}]")
            }
            DyadicBand { n } => write!(f, "Delta[n={n}]"),
            BandCell { j, aperture, count, n, gamma: None } => {
                write!(f, "P[j={j},n={n},a={aperture},N={count}]")
            }
            BandCell { j, aperture, count, n, gamma: Some(g) } => {
                write!(f, "P[j={j},n={n},g={g},a={aperture},N={count}]")
            }
            HalfSpace { normal, offset } => write!(f, "half[{normal:?}>={offset}]"),
            Rectangle { lo, hi } => write!(f, "rect[{lo:?},{hi:?})"),
            Custom { name, .. } => write!(f, "{name}"),
        }
    }
}

/// `2^n (1 + m 2^-l)`, exact in binary.
fn ratio_edge(n: i32, m: u32, ell: u32) -> f64 {
    ((1u64 << ell) + m as u64) as f64 * 2f64.powi(n - ell as i32)
}

fn in_ratio(xi: (f64, f64), lo: f64, hi: f64) -> bool {
    lo * xi.1 <= xi.0 && xi.0 < hi * xi.1
}

fn in_strip(xi2: f64) -> bool {
    (0.5..=2.0).contains(&xi2)
}

fn angle(xi: (f64, f64)) -> Option<f64> {
    if xi == (0.0, 0.0) {
        return None;
    }
    let a = xi.1.atan2(xi.0);
    Some(if a < 0.0 { a + TAU } else { a })
}

fn sector_index(xi: (f64, f64), aperture: f64, count: u32) -> Option<u32> {
    let a = angle(xi)?;
    if a >= aperture {
        return None;
    }
    Some(((a * count as f64 / aperture).floor() as u32).min(count - 1) + 1)
}

fn cell_height(ell: u32) -> f64 {
    2f64.powi(-(ell as i32))
}

impl FrequencyRegion {
    pub fn trapezoid(n: i32) -> Self {
        Self::Trapezoid { n }
    }

    pub fn slice(n: i32, j: u32, ell: u32) -> Result<Self> {
        check_ell(ell)?;
        if !(1..=1u32 << ell).contains(&j) {
            return Err(Error::InvalidParameter(format!("slice index {j} outside 1..=2^{ell}")));
        }
        Ok(Self::TrapezoidSlice { n, j, ell })
    }

    pub fn cell(n: i32, j: u32, alpha: u32, ell: u32) -> Result<Self> {
        Self::slice(n, j, ell)?;
        if !(1..=cells_per_slice(ell)).contains(&alpha) {
            return Err(Error::InvalidParameter(format!(
                "cell index {alpha} outside 1..={}",
                cells_per_slice(ell)
            )));
        }
        Ok(Self::TrapezoidCell { n, j, alpha, ell })
    }

    pub fn sector(j: u32, aperture: f64, count: u32) -> Result<Self> {
        check_sector(aperture, count)?;
        if !(1..=count).contains(&j) {
            return Err(Error::InvalidParameter(format!("sector index {j} outside 1..={count}")));
        }
        Ok(Self::Sector { j, aperture, count })
    }

    pub fn band_cell(j: u32, aperture: f64, count: u32, n: i32, gamma: Option<u32>) -> Result<Self> {
        Self::sector(j, aperture, count)?;
        if gamma.is_some_and(|g| g >= count) {
            return Err(Error::InvalidParameter(format!("band cell index outside 0..{count}")));
        }
        Ok(Self::BandCell { j, aperture, count, n, gamma })
    }

    pub fn custom(name: impl Into<String>, predicate: impl Fn(f64, f64) -> bool + Send + Sync + 'static) -> Self {
        Self::Custom { name: name.into(), predicate: Arc::new(predicate) }
    }

    pub fn contains(&self, xi: (f64, f64)) -> bool {
        use FrequencyRegion::*;
        match *self {
            Trapezoid { n } => in_strip(xi.1) && in_ratio(xi, ratio_edge(n, 0, 0), ratio_edge(n + 1, 0, 0)),
            TrapezoidSlice { n, j, ell } => {
                in_strip(xi.1) && in_ratio(xi, ratio_edge(n, j - 1, ell), ratio_edge(n, j, ell))
            }
            TrapezoidCell { n, j, alpha, ell } => {
                let h = cell_height(ell);
                let lo = 0.5 + (alpha - 1) as f64 * h;
                let hi = 0.5 + alpha as f64 * h;
                let band = if alpha == cells_per_slice(ell) {
                    lo <= xi.1 && xi.1 <= 2.0
                } else {
                    lo <= xi.1 && xi.1 < hi
                };
                band && in_ratio(xi, ratio_edge(n, j - 1, ell), ratio_edge(n, j, ell))
            }
            ConeStrip => xi.0 > 0.0 && in_strip(xi.1),
            Sector { j, aperture, count } => sector_index(xi, aperture, count) == Some(j),
            SectorCell { j, aperture, count, gamma, start, step } => {
                let lo = start + gamma as f64 * step;
                sector_index(xi, aperture, count) == Some(j) && lo <= xi.0 && xi.0 < lo + step
            }
            DyadicBand { n } => in_band(xi.0, n),
            BandCell { j, aperture, count, n, gamma } => {
                let cut = match gamma {
                    None => true,
                    Some(g) => {
                        let lo = 2f64.powi(n) + g as f64 / count as f64;
                        lo <= xi.0 && xi.0 < lo + 1.0 / count as f64
                    }
                };
                cut && in_band(xi.0, n) && sector_index(xi, aperture, count) == Some(j)
            }
            HalfSpace { normal, offset } => normal.0 * xi.0 + normal.1 * xi.1 >= offset,
            Rectangle { lo, hi } => lo.0 <= xi.0 && xi.0 < hi.0 && lo.1 <= xi.1 && xi.1 < hi.1,
            Custom { ref predicate, .. } => predicate(xi.0, xi.1),
        }
    }

    /// Closed box `[xi1_lo, xi1_hi] x [xi2_lo, xi2_hi]` containing the region,
    /// when it is bounded.
    pub fn bounding_box(&self) -> Option<[f64; 4]> {
        use FrequencyRegion::*;
        match *self {
            Trapezoid { n } => Some([ratio_edge(n - 1, 0, 0), ratio_edge(n + 2, 0, 0), 0.5, 2.0]),
            TrapezoidSlice { n, j, ell } => {
                Some([0.5 * ratio_edge(n, j - 1, ell), 2.0 * ratio_edge(n, j, ell), 0.5, 2.0])
            }
            TrapezoidCell { n, j, alpha, ell } => {
                let h = cell_height(ell);
                let (lo, hi) = (0.5 + (alpha - 1) as f64 * h, (0.5 + alpha as f64 * h).min(2.0));
                Some([lo * ratio_edge(n, j - 1, ell), hi * ratio_edge(n, j, ell), lo, hi])
            }
            SectorCell { j, aperture, count, gamma, start, step } => {
                let lo = start + gamma as f64 * step;
                let hi = lo + step;
                let (a0, a1) = sector_angles(j, aperture, count);
                Some([lo, hi, lo * a0.tan(), hi * a1.tan()])
            }
            BandCell { j, aperture, count, n, gamma } => {
                let (mut lo, mut hi) = (2f64.powi(n), 2f64.powi(n + 1));
                if let Some(g) = gamma {
                    lo = lo.max(2f64.powi(n) + g as f64 / count as f64);
                    hi = hi.min(2f64.powi(n) + (g + 1) as f64 / count as f64);
                }
                let (a0, a1) = sector_angles(j, aperture, count);
                Some([lo, hi, lo * a0.tan(), hi * a1.tan()])
            }
            Rectangle { lo, hi } => Some([lo.0, hi.0, lo.1, hi.1]),
            Sector { .. } | ConeStrip | DyadicBand { .. } | HalfSpace { .. } | Custom { .. } => None,
        }
    }

    /// Width of the thinnest feature the region resolves, used to decide
    /// whether a probe lattice is fine enough.
    pub fn feature_scale(&self) -> Option<f64> {
        use FrequencyRegion::*;
        match *self {
            Trapezoid { .. } => Some(0.5),
            TrapezoidSlice { ell, .. } | TrapezoidCell { ell, .. } => Some(cell_height(ell)),
            Sector { aperture, count, .. } => Some(aperture / count as f64),
            SectorCell { aperture, count, start, step, .. } => Some(step.min(start * aperture / count as f64)),
            BandCell { aperture, count, n, gamma, .. } => {
                let angular = 2f64.powi(n) * aperture / count as f64;
                Some(match gamma {
                    Some(_) => angular.min(1.0 / count as f64),
                    None => angular,
                })
            }
            Rectangle { lo, hi } => Some((hi.0 - lo.0).min(hi.1 - lo.1)),
            ConeStrip | DyadicBand { .. } | HalfSpace { .. } | Custom { .. } => None,
        }
    }

    /// 0/1 membership of each lattice frequency, in field order.
    pub fn mask(&self, grid: GridSpec) -> Vec<bool> {
        (0..grid.len()).into_par_iter().map(|i| self.contains(grid.frequency(i))).collect()
    }
}

fn in_band(xi1: f64, n: i32) -> bool {
    2f64.powi(n) <= xi1 && xi1 < 2f64.powi(n + 1)
}

fn sector_angles(j: u32, aperture: f64, count: u32) -> (f64, f64) {
    let w = aperture / count as f64;
    ((j - 1) as f64 * w, j as f64 * w)
}

fn check_ell(ell: u32) -> Result<()> {
    if ell > 20 {
        return Err(Error::InvalidParameter(format!("slice depth {ell} exceeds 20")));
    }
    Ok(())
}

fn check_sector(aperture: f64, count: u32) -> Result<()> {
    if !(aperture > 0.0 && aperture <= FRAC_PI_4) {
        return Err(Error::InvalidParameter(format!("aperture {aperture} outside (0, pi/4]")));
    }
    if count == 0 {
        return Err(Error::InvalidParameter("sector count must be positive".into()));
    }
    Ok(())
}

/// Number of height bands `S_n^{j,a}` per slice: `3/2 * 2^l`, the last one
/// ending exactly at `xi2 = 2`.
pub fn cells_per_slice(ell: u32) -> u32 {
    if ell == 0 {
        // Height 1 bands: [1/2, 3/2) and [3/2, 2].
        2
    } else {
        3 << (ell - 1)
    }
}

/// `S_n^1, ..., S_n^{2^l}`.
pub fn trapezoid_slices(n: i32, ell: u32) -> Result<Vec<FrequencyRegion>> {
    check_ell(ell)?;
    Ok((1..=1u32 << ell).map(|j| FrequencyRegion::TrapezoidSlice { n, j, ell }).collect())
}

/// `S_n^{j,a}` for all height bands `a`.
pub fn trapezoid_cells(n: i32, j: u32, ell: u32) -> Result<Vec<FrequencyRegion>> {
    FrequencyRegion::slice(n, j, ell)?;
    Ok((1..=cells_per_slice(ell)).map(|alpha| FrequencyRegion::TrapezoidCell { n, j, alpha, ell }).collect())
}

/// Trapezoid indices `n` whose slices meet the lattice of `grid`.
pub fn trapezoid_range(grid: GridSpec) -> std::ops::RangeInclusive<i32> {
    // Ratios of lattice points in the strip lie in [1/(2L), 2 * nyquist].
    let lo = (0.5 / grid.period()).log2().floor() as i32;
    let hi = (2.0 * grid.nyquist()).log2().ceil() as i32;
    lo..=hi
}

/// All slices `S_n^j(l)` over the trapezoids that meet the lattice.
pub fn trapezoid_family(grid: GridSpec, ell: u32) -> Result<Vec<FrequencyRegion>> {
    let mut out = Vec::new();
    for n in trapezoid_range(grid) {
        out.extend(trapezoid_slices(n, ell)?);
    }
    Ok(out)
}

/// `Theta_1^a, ..., Theta_N^a`.
pub fn sectors(aperture: f64, count: u32) -> Result<Vec<FrequencyRegion>> {
    check_sector(aperture, count)?;
    Ok((1..=count).map(|j| FrequencyRegion::Sector { j, aperture, count }).collect())
}

/// `Theta_{j,g}^a` for `g = 0, ..., ceil(sqrt(N) / 2^nu) - 1`, cut along
/// `xi1` into steps of `2^nu / sqrt(N)` from `xi1 = 1`.
pub fn sector_cells(j: u32, aperture: f64, count: u32, nu: u32) -> Result<Vec<FrequencyRegion>> {
    FrequencyRegion::sector(j, aperture, count)?;
    let root = (count as f64).sqrt();
    let step = 2f64.powi(nu as i32) / root;
    let cells = (root / 2f64.powi(nu as i32)).ceil().max(1.0) as u32;
    Ok((0..cells)
        .map(|gamma| FrequencyRegion::SectorCell { j, aperture, count, gamma, start: 1.0, step })
        .collect())
}

/// `P_{j,n,g}^a` for `g = 0, ..., N - 1`.
pub fn band_cells(j: u32, aperture: f64, count: u32, n: i32) -> Result<Vec<FrequencyRegion>> {
    FrequencyRegion::sector(j, aperture, count)?;
    Ok((0..count)
        .map(|g| FrequencyRegion::BandCell { j, aperture, count, n, gamma: Some(g) })
        .collect())
}

fn spectrum_of(f: &Field) -> Field {
    match f.repr() {
        Repr::Frequency => f.clone(),
        Repr::Space => f.to_frequency(),
    }
}

fn masked(spec: &Field, keep: impl Fn(usize) -> bool + Sync) -> Field {
    let zero = Complex64::new(0.0, 0.0);
    let samples: Vec<Complex64> =
        spec.samples().par_iter().enumerate().map(|(i, v)| if keep(i) { *v } else { zero }).collect();
    Field::new(spec.grid(), samples, Repr::Frequency).expect("same grid")
}

fn in_repr(g: Field, repr: Repr) -> Field {
    match repr {
        Repr::Frequency => g,
        Repr::Space => g.to_space(),
    }
}

/// Sharp projection `chi_R(xi) f^(xi)`, returned in the representation of `f`.
pub fn project(region: &FrequencyRegion, f: &Field) -> Field {
    let grid = f.grid();
    let spec = spectrum_of(f);
    let g = masked(&spec, |i| region.contains(grid.frequency(i)));
    in_repr(g, f.repr())
}

/// Projection onto the union of `regions`.
pub fn project_union(regions: &[FrequencyRegion], f: &Field) -> Field {
    let grid = f.grid();
    let spec = spectrum_of(f);
    let g = masked(&spec, |i| {
        let xi = grid.frequency(i);
        regions.iter().any(|r| r.contains(xi))
    });
    in_repr(g, f.repr())
}

/// Index of the region holding each lattice frequency, for a family whose
/// regions are disjoint on the lattice.
#[derive(Clone, Debug)]
pub struct RegionLabels {
    grid: GridSpec,
    labels: Vec<Option<u32>>,
    count: usize,
}

impl RegionLabels {
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn label(&self, index: usize) -> Option<u32> {
        self.labels[index]
    }

    pub fn region_count(&self) -> usize {
        self.count
    }
}

/// Labels every lattice frequency with the region containing it; a point in
/// two regions is an overlap.
pub fn label_lattice(regions: &[FrequencyRegion], grid: GridSpec) -> Result<RegionLabels> {
    let labels: Vec<std::result::Result<Option<u32>, usize>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let xi = grid.frequency(i);
            let mut hit = None;
            for (r, region) in regions.iter().enumerate() {
                if region.contains(xi) {
                    if hit.is_some() {
                        return Err(i);
                    }
                    hit = Some(r as u32);
                }
            }
            Ok(hit)
        })
        .collect();
    let labels = labels
        .into_iter()
        .map(|l| {
            l.map_err(|i| {
                let (k1, k2) = grid.wavenumber(i);
                Error::RegionOverlap(k1, k2)
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RegionLabels { grid, labels, count: regions.len() })
}

/// `(sum_R |P_R f|^2)^(1/2)` in space for lattice-disjoint regions.
pub fn directional_square_function(f: &Field, regions: &[FrequencyRegion]) -> Result<Field> {
    let labels = label_lattice(regions, f.grid())?;
    square_function_labeled(f, &labels)
}

/// Square function over a precomputed labelling; regions holding no
/// spectrum are skipped.
pub fn square_function_labeled(f: &Field, labels: &RegionLabels) -> Result<Field> {
    let grid = f.grid();
    if grid != labels.grid {
        return Err(Error::GridMismatch);
    }
    let spec = spectrum_of(f);
    let zero = Complex64::new(0.0, 0.0);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); labels.count];
    for (i, v) in spec.samples().iter().enumerate() {
        if let (Some(l), true) = (labels.labels[i], *v != zero) {
            members[l as usize].push(i);
        }
    }
    let mut acc = vec![0.0f64; grid.len()];
    let mut buf = vec![zero; grid.len()];
    for idx in members.iter().filter(|m| !m.is_empty()) {
        buf.iter_mut().for_each(|v| *v = zero);
        for &i in idx {
            buf[i] = spec.samples()[i];
        }
        let piece = Field::new(grid, std::mem::take(&mut buf), Repr::Frequency)?.to_space();
        acc.par_iter_mut().zip(piece.samples()).for_each(|(a, v)| *a += v.norm_sqr());
        buf = piece.into_samples();
    }
    let samples = acc.into_iter().map(|a| Complex64::new(a.sqrt(), 0.0)).collect();
    Field::new(grid, samples, Repr::Space)
}

/// Lattice points of a region as row runs `(k2, k1_lo, k1_hi)`, inclusive.
struct Runs {
    runs: Vec<(i64, i64, i64)>,
    points: usize,
}

fn lattice_runs(region: &FrequencyRegion, grid: GridSpec) -> Runs {
    let h = (grid.n() / 2) as i64;
    let (k1_lo, k1_hi, k2_lo, k2_hi) = match region.bounding_box() {
        Some([a, b, c, d]) => {
            let l = grid.period();
            let clamp = |v: f64| (v as i64).clamp(-h, h - 1);
            (clamp((a * l).floor() - 1.0), clamp((b * l).ceil() + 1.0), clamp((c * l).floor() - 1.0), clamp((d * l).ceil() + 1.0))
        }
        None => (-h, h - 1, -h, h - 1),
    };
    let l = grid.period();
    let mut runs = Vec::new();
    let mut points = 0;
    for k2 in k2_lo..=k2_hi {
        let mut open: Option<i64> = None;
        for k1 in k1_lo..=k1_hi + 1 {
            let inside = k1 <= k1_hi && region.contains((k1 as f64 / l, k2 as f64 / l));
            match (inside, open) {
                (true, None) => open = Some(k1),
                (false, Some(s)) => {
                    runs.push((k2, s, k1 - 1));
                    points += (k1 - s) as usize;
                    open = None;
                }
                _ => {}
            }
        }
    }
    Runs { runs, points }
}

/// Box of lattice sums `a + b`, inclusive on both ends.
fn sum_box(a: &[Runs], b: &[Runs]) -> Option<(i64, i64, i64, i64)> {
    let ext = |rs: &[Runs]| {
        rs.iter().flat_map(|r| r.runs.iter()).fold(None, |acc: Option<(i64, i64, i64, i64)>, &(k2, lo, hi)| {
            Some(match acc {
                None => (lo, hi, k2, k2),
                Some((a, b, c, d)) => (a.min(lo), b.max(hi), c.min(k2), d.max(k2)),
            })
        })
    };
    let (a, b) = (ext(a)?, ext(b)?);
    Some((a.0 + b.0, a.1 + b.1, a.2 + b.2, a.3 + b.3))
}

/// Largest number of pairs `(A, B)` whose lattice Minkowski sum covers a
/// common probe point.
///
/// Both families are sampled on the full frequency lattice of `probe`;
/// `A + B` is the set of sums `a + b` of sampled points, which is again a
/// lattice set, so counting is exact for the samples. The probe spacing
/// `1/L` must not exceed a quarter of the finest region feature.
pub fn minkowski_overlap_bound(a_list: &[FrequencyRegion], b_list: &[FrequencyRegion], probe: GridSpec) -> Result<usize> {
    let scale = a_list
        .iter()
        .chain(b_list)
        .filter_map(|r| r.feature_scale())
        .fold(f64::INFINITY, f64::min);
    let limit = scale / 4.0;
    if probe.freq_spacing() > limit * (1.0 + 1e-12) {
        return Err(Error::ProbeTooCoarse { spacing: probe.freq_spacing(), limit });
    }
    let nyq = probe.nyquist();
    for r in a_list.iter().chain(b_list) {
        match r.bounding_box() {
            Some([a, b, c, d]) if [a, b, c, d].iter().all(|v| v.abs() < nyq) => {}
            Some(_) => {
                return Err(Error::InvalidParameter(format!("region {r} extends past the probe lattice")));
            }
            None => {}
        }
    }
    let a_runs: Vec<Runs> = a_list.par_iter().map(|r| lattice_runs(r, probe)).collect();
    let b_runs: Vec<Runs> = b_list.par_iter().map(|r| lattice_runs(r, probe)).collect();
    let Some((x0, x1, y0, y1)) = sum_box(&a_runs, &b_runs) else {
        return Ok(0);
    };
    let width = (x1 - x0 + 1) as usize;
    let height = (y1 - y0 + 1) as usize;
    let mut count = vec![0u32; width * height];
    let mut stamp = vec![u32::MAX; width * height];
    let mut pair = 0u32;
    for ra in &a_runs {
        for rb in &b_runs {
            // Sweep the points of the smaller set against the runs of the other.
            let (pts, other) = if ra.points <= rb.points { (ra, rb) } else { (rb, ra) };
            for &(p2, p_lo, p_hi) in &pts.runs {
                for p1 in p_lo..=p_hi {
                    for &(q2, q_lo, q_hi) in &other.runs {
                        let row = (p2 + q2 - y0) as usize * width;
                        let c0 = (p1 + q_lo - x0) as usize;
                        let c1 = (p1 + q_hi - x0) as usize;
                        for i in row + c0..=row + c1 {
                            if stamp[i] != pair {
                                stamp[i] = pair;
                                count[i] += 1;
                            }
                        }
                    }
                }
            }
            pair += 1;
        }
    }
    Ok(count.into_iter().max().unwrap_or(0) as usize)
}
