//! Discrete strong, directional, Kakeya and sector maximal operators.
//!
//! For one rectangle size the averages of `|f|` at every placement come from
//! window sums; the maximum over the placements containing a point is a
//! trailing sliding-window maximum of those averages (van Herk). Rectangles
//! with long side along `(1, t)` are realized by shearing: `|f|` is resampled
//! at `(y1, y2 + t y1)` with periodic linear interpolation in `y2`, processed
//! with axis-parallel rectangles whose long side is the first axis, and
//! resampled back. Slopes with `|t| > 1` go through the transpose.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral::{lp_of_moduli, Field, GridSpec};

/// Admissible rectangles, in grid cells.
///
/// A pair `(len, wid)` is admitted when `len` is in `lengths`, `wid` in
/// `widths` and `len / wid` lies in `eccentricity`; `len` runs along the first
/// (possibly sheared) axis.
#[derive(Clone, Debug, PartialEq)]
pub struct RectangleMenu {
    /// Slopes `t` of the long-side directions `(1, t)`.
    pub directions: Vec<f64>,
    pub lengths: Vec<usize>,
    pub widths: Vec<usize>,
    pub eccentricity: (f64, f64),
}

fn dyadic_up_to(n: usize) -> Vec<usize> {
    std::iter::successors(Some(1usize), |&h| (h < n).then_some(2 * h)).filter(|&h| h <= n).collect()
}

impl RectangleMenu {
    /// All dyadic side pairs up to `n`, both orientations.
    pub fn strong(n: usize) -> RectangleMenu {
        RectangleMenu {
            directions: vec![0.0],
            lengths: dyadic_up_to(n),
            widths: dyadic_up_to(n),
            eccentricity: (0.0, f64::INFINITY),
        }
    }

    /// Dyadic pairs with the long side along `(1, t)` and `(1, -t)`.
    pub fn directional(n: usize, t: f64) -> RectangleMenu {
        let directions = if t == 0.0 { vec![0.0] } else { vec![t, -t] };
        RectangleMenu { directions, lengths: dyadic_up_to(n), widths: dyadic_up_to(n), eccentricity: (1.0, f64::INFINITY) }
    }

    /// Dyadic pairs with eccentricity in `[a, b]` along `direction_count`
    /// equally spaced angles in `[0, pi)`.
    pub fn kakeya(n: usize, a: f64, b: f64, direction_count: usize) -> Result<RectangleMenu> {
        if !(a >= 1.0 && b >= a) {
            return Err(Error::InvalidParameter(format!("eccentricity window [{a}, {b}] needs 1 <= a <= b")));
        }
        if (direction_count as f64) < b.ceil() {
            return Err(Error::InvalidParameter(format!(
                "{direction_count} directions cannot resolve eccentricity {b}"
            )));
        }
        let directions = (0..direction_count)
            .map(|k| (k as f64 * std::f64::consts::PI / direction_count as f64).tan())
            .collect();
        Ok(RectangleMenu { directions, lengths: dyadic_up_to(n), widths: dyadic_up_to(n), eccentricity: (a, b) })
    }

    /// Admitted `(len, wid)` pairs.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for &l in &self.lengths {
            for &w in &self.widths {
                let e = l as f64 / w as f64;
                if e >= self.eccentricity.0 * (1.0 - 1e-12) && e <= self.eccentricity.1 * (1.0 + 1e-12) {
                    out.push((l, w));
                }
            }
        }
        out
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.lengths.iter().chain(&self.widths).any(|&h| h == 0 || h > n) {
            return Err(Error::InvalidParameter(format!("rectangle sides must lie in [1, {n}]")));
        }
        if self.directions.iter().any(|t| t.is_nan()) {
            return Err(Error::InvalidParameter("direction slope is NaN".into()));
        }
        Ok(())
    }
}

/// Values of a maximal operator.
#[derive(Clone, Debug, PartialEq)]
pub struct MaxField {
    pub grid: GridSpec,
    pub samples: Vec<f64>,
}

impl MaxField {
    pub fn norm_lp(&self, p: f64) -> f64 {
        lp_of_moduli(self.samples.iter().copied(), self.grid, p)
    }

    pub fn max_value(&self) -> f64 {
        self.samples.iter().copied().fold(0.0, f64::max)
    }
}

fn moduli(f: &Field) -> Vec<f64> {
    f.to_space().samples().iter().map(|v| v.norm()).collect()
}

fn transpose(a: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    for i in 0..n {
        for j in 0..n {
            out[j * n + i] = a[i * n + j];
        }
    }
    out
}

/// Periodic linear interpolation of one row at real position `y`.
#[inline]
fn interp_row(row: &[f64], y: f64) -> f64 {
    let n = row.len();
    let fl = y.floor();
    let frac = y - fl;
    let i = (fl as i64).rem_euclid(n as i64) as usize;
    if frac == 0.0 {
        return row[i];
    }
    let k = if i + 1 == n { 0 } else { i + 1 };
    (1.0 - frac) * row[i] + frac * row[k]
}

/// `out[x] = max_{q < h} a[(x - q) mod n]` by van Herk's block method.
fn trailing_max_periodic(a: &[f64], h: usize, out: &mut [f64]) {
    let n = a.len();
    if h == 1 {
        out.copy_from_slice(a);
        return;
    }
    if h >= n {
        let m = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out.iter_mut().for_each(|v| *v = m);
        return;
    }
    // e[i] = a[(i - (h-1)) mod n]; the window of x is e[x .. x+h-1].
    let m = n + h - 1;
    let e: Vec<f64> = (0..m).map(|i| a[(i + n - (h - 1)) % n]).collect();
    let mut pre = vec![0.0; m];
    let mut suf = vec![0.0; m];
    for i in 0..m {
        pre[i] = if i % h == 0 { e[i] } else { pre[i - 1].max(e[i]) };
    }
    for i in (0..m).rev() {
        suf[i] = if i % h == h - 1 || i == m - 1 { e[i] } else { suf[i + 1].max(e[i]) };
    }
    for (x, o) in out.iter_mut().enumerate() {
        *o = suf[x].max(pre[x + h - 1]);
    }
}

/// `out[x] = sum_{q < h} a[(x + q) mod n]`.
fn window_sum_periodic(a: &[f64], h: usize, out: &mut [f64]) {
    let n = a.len();
    if h >= n {
        let s: f64 = a.iter().sum();
        out.iter_mut().for_each(|v| *v = s);
        return;
    }
    let mut prefix = vec![0.0; n + h];
    for i in 0..n + h - 1 {
        prefix[i + 1] = prefix[i] + a[i % n];
    }
    for (x, o) in out.iter_mut().enumerate() {
        *o = prefix[x + h] - prefix[x];
    }
}

/// `out[y] = max(out[y], max_{q < h} rows[y + q])` elementwise for the first
/// `rows.len()/n - h + 1` rows, by van Herk blocks along the row index.
fn window_max_rows(rows: &[f64], n: usize, h: usize, pre: &mut [f64], suf: &mut [f64], out: &mut [f64]) {
    let m = rows.len() / n;
    let count = m + 1 - h;
    for i in 0..m {
        let (src, dst) = (&rows[i * n..(i + 1) * n], i * n);
        if i % h == 0 {
            pre[dst..dst + n].copy_from_slice(src);
        } else {
            let (done, cur) = pre.split_at_mut(dst);
            let prev = &done[dst - n..];
            cur[..n].iter_mut().zip(prev).zip(src).for_each(|((o, p), v)| *o = p.max(*v));
        }
    }
    for i in (0..m).rev() {
        let (src, dst) = (&rows[i * n..(i + 1) * n], i * n);
        if i % h == h - 1 || i == m - 1 {
            suf[dst..dst + n].copy_from_slice(src);
        } else {
            let (cur, rest) = suf.split_at_mut(dst + n);
            let next = &rest[..n];
            cur[dst..].iter_mut().zip(next).zip(src).for_each(|((o, q), v)| *o = q.max(*v));
        }
    }
    for y in 0..count.min(out.len() / n) {
        let a = &suf[y * n..(y + 1) * n];
        let b = &pre[(y + h - 1) * n..(y + h) * n];
        out[y * n..(y + 1) * n].iter_mut().zip(a).zip(b).for_each(|((o, x), z)| *o = o.max(x.max(*z)));
    }
}

/// Maximal function over sheared rectangles of slope `t` (`|t| <= 1`),
/// long side along rows (the first index).
fn sheared_maximal(abs: &[f64], n: usize, t: f64, pairs: &[(usize, usize)]) -> Vec<f64> {
    let max_h1 = pairs.iter().map(|p| p.0).max().unwrap_or(1);
    let pad = max_h1 - 1;
    let rows = n + 2 * pad;
    // Sheared samples; row r is y1 = r - pad.
    let sheared: Vec<Vec<f64>> = (0..rows)
        .map(|r| {
            let y1 = r as i64 - pad as i64;
            let src = &abs[(y1.rem_euclid(n as i64) as usize) * n..][..n];
            (0..n).map(|k| interp_row(src, k as f64 + t * y1 as f64)).collect()
        })
        .collect();
    let mut widths: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    widths.sort_unstable();
    widths.dedup();
    let best = widths
        .par_iter()
        .map(|&h2| {
            let mut col_sums = vec![vec![0.0; n]; rows];
            for (r, row) in sheared.iter().enumerate() {
                window_sum_periodic(row, h2, &mut col_sums[r]);
            }
            let mut best = vec![0.0f64; n * n];
            let mut avg = vec![0.0; n];
            let mut row_max = vec![0.0; rows * n];
            let mut pre = vec![0.0; rows * n];
            let mut suf = vec![0.0; rows * n];
            for &(h1, _) in pairs.iter().filter(|p| p.1 == h2) {
                let area = (h1 * h2) as f64;
                // Windows start at rows p1 in [-(h1-1), n-1].
                let first = pad + 1 - h1;
                let last = pad + n - 1;
                let mut run = vec![0.0; n];
                for r in first..first + h1 {
                    run.iter_mut().zip(&col_sums[r]).for_each(|(s, v)| *s += v);
                }
                for r in first..=last {
                    if r > first {
                        let (add, sub) = (&col_sums[r + h1 - 1], &col_sums[r - 1]);
                        for ((s, a), b) in run.iter_mut().zip(add).zip(sub) {
                            *s += a - b;
                        }
                    }
                    avg.iter_mut().zip(&run).for_each(|(a, s)| *a = (s / area).max(0.0));
                    trailing_max_periodic(&avg, h2, &mut row_max[r * n..(r + 1) * n]);
                }
                // Output row y1 takes the max over window starts p1 = y1 - s,
                // s < h1: rows first + y1 .. first + y1 + h1 - 1.
                window_max_rows(&row_max[first * n..(last + 1) * n], n, h1, &mut pre, &mut suf, &mut best);
            }
            best
        })
        .reduce(|| vec![0.0f64; n * n], |mut a, b| {
            a.iter_mut().zip(&b).for_each(|(x, y)| *x = x.max(*y));
            a
        });
    if t == 0.0 {
        return best;
    }
    let mut out = vec![0.0; n * n];
    for y1 in 0..n {
        let src = &best[y1 * n..(y1 + 1) * n];
        for y2 in 0..n {
            out[y1 * n + y2] = interp_row(src, y2 as f64 - t * y1 as f64);
        }
    }
    out
}

/// Maximal function of the nonnegative samples `abs` over a menu.
fn menu_maximal(abs: &[f64], n: usize, menu: &RectangleMenu) -> Vec<f64> {
    let pairs = menu.pairs();
    let mut out = abs.to_vec();
    for &t in &menu.directions {
        let vals = if t.abs() <= 1.0 {
            sheared_maximal(abs, n, t, &pairs)
        } else {
            let tr = transpose(abs, n);
            transpose(&sheared_maximal(&tr, n, 1.0 / t, &pairs), n)
        };
        out.iter_mut().zip(&vals).for_each(|(o, v)| *o = o.max(*v));
    }
    out
}

fn run(f: &Field, menu: &RectangleMenu) -> Result<MaxField> {
    let grid = f.grid();
    menu.validate(grid.n())?;
    Ok(MaxField { grid, samples: menu_maximal(&moduli(f), grid.n(), menu) })
}

/// Strong maximal function over all dyadic axis-parallel rectangles.
pub fn strong_maximal(f: &Field) -> MaxField {
    run(f, &RectangleMenu::strong(f.grid().n())).expect("dyadic menu is valid")
}

/// Maximal function over rectangles with long side along `(1, t)` or `(1, -t)`.
pub fn directional_maximal(f: &Field, t: f64) -> Result<MaxField> {
    if !(t.abs() <= 1.0) {
        return Err(Error::InvalidParameter(format!("slope {t} outside [-1, 1]; pass the transposed slope")));
    }
    run(f, &RectangleMenu::directional(f.grid().n(), t))
}

/// Maximal function over an explicit menu.
pub fn menu_maximal_field(f: &Field, menu: &RectangleMenu) -> Result<MaxField> {
    run(f, menu)
}

/// Kakeya maximal function `K_{a,b}` over `direction_count` directions.
pub fn kakeya(f: &Field, a: f64, b: f64, direction_count: usize) -> Result<MaxField> {
    run(f, &RectangleMenu::kakeya(f.grid().n(), a, b, direction_count)?)
}

/// `max_{j=0..N} directional_maximal(f, tan(j alpha / N))`.
pub fn sector_maximal(f: &Field, alpha: f64, big_n: usize) -> Result<MaxField> {
    if !(alpha > 0.0 && alpha <= std::f64::consts::FRAC_PI_4) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} outside (0, pi/4]")));
    }
    if big_n == 0 {
        return Err(Error::InvalidParameter("N must be >= 1".into()));
    }
    let n = f.grid().n();
    let mut directions = Vec::with_capacity(2 * big_n + 1);
    for j in 0..=big_n {
        let t = (j as f64 * alpha / big_n as f64).tan();
        directions.push(t);
        if t != 0.0 {
            directions.push(-t);
        }
    }
    let menu = RectangleMenu { directions, ..RectangleMenu::directional(n, 0.0) };
    run(f, &menu)
}

/// Base operator of [`power_maximal`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MaximalBase {
    Strong,
    Directional(f64),
    Sector { alpha: f64, n: usize },
    Kakeya { a: f64, b: f64, directions: usize },
}

fn base_maximal(f: &Field, base: MaximalBase) -> Result<MaxField> {
    match base {
        MaximalBase::Strong => Ok(strong_maximal(f)),
        MaximalBase::Directional(t) => directional_maximal(f, t),
        MaximalBase::Sector { alpha, n } => sector_maximal(f, alpha, n),
        MaximalBase::Kakeya { a, b, directions } => kakeya(f, a, b, directions),
    }
}

/// `(M(|f|^s))^(1/s)`.
pub fn power_maximal(f: &Field, s: f64, base: MaximalBase) -> Result<MaxField> {
    if !(s > 1.0 && s <= 2.0) {
        return Err(Error::InvalidParameter(format!("s = {s} outside (1, 2]")));
    }
    let grid = f.grid();
    let powered: Vec<num_complex::Complex64> =
        moduli(f).into_iter().map(|v| num_complex::Complex64::new(v.powf(s), 0.0)).collect();
    let pf = Field::new(grid, powered, crate::spectral::Repr::Space)?;
    let m = base_maximal(&pf, base)?;
    Ok(MaxField { grid, samples: m.samples.into_iter().map(|v| v.powf(1.0 / s)).collect() })
}

/// Largest grid accepted by the brute-force oracles.
pub const BRUTE_FORCE_LIMIT: usize = 64;

/// Strong maximal function by enumerating every placement of every dyadic
/// rectangle (periodic).
pub fn brute_strong_maximal(f: &Field) -> Result<MaxField> {
    let grid = f.grid();
    let n = grid.n();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::GridTooLarge { n, limit: BRUTE_FORCE_LIMIT });
    }
    let abs = moduli(f);
    let mut out = abs.clone();
    for (h1, h2) in RectangleMenu::strong(n).pairs() {
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
    Ok(MaxField { grid, samples: out })
}

/// Maximal function over rasterized rotated rectangles with long side along
/// `(1, t)` or `(1, -t)`: for each dyadic `len >= wid` up to `max_side`, and
/// each center on the half-integer lattice, the cells whose centers lie in
/// the closed rectangle.
pub fn brute_directional_maximal(f: &Field, t: f64, max_side: usize) -> Result<MaxField> {
    let grid = f.grid();
    let n = grid.n();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::GridTooLarge { n, limit: BRUTE_FORCE_LIMIT });
    }
    let abs = moduli(f);
    let mut out = abs.clone();
    let sides = dyadic_up_to(max_side.min(n));
    let signs: &[f64] = if t == 0.0 { &[1.0] } else { &[1.0, -1.0] };
    let mut cells = Vec::new();
    for &sg in signs {
        let norm = (1.0 + t * t).sqrt();
        let e = (1.0 / norm, sg * t / norm);
        let p = (-e.1, e.0);
        for &len in &sides {
            for &wid in sides.iter().filter(|&&w| w <= len) {
                let (hl, hw) = (0.5 * len as f64, 0.5 * wid as f64);
                let reach = (hl + hw).ceil() as i64 + 1;
                for c1 in 0..2 * n {
                    for c2 in 0..2 * n {
                        let c = (0.5 * c1 as f64, 0.5 * c2 as f64);
                        cells.clear();
                        let mut s = 0.0;
                        for d1 in -reach..=reach {
                            for d2 in -reach..=reach {
                                let x = ((c.0).floor() as i64 + d1, (c.1).floor() as i64 + d2);
                                let v = (x.0 as f64 - c.0, x.1 as f64 - c.1);
                                let along = v.0 * e.0 + v.1 * e.1;
                                let across = v.0 * p.0 + v.1 * p.1;
                                if along.abs() <= hl + 1e-12 && across.abs() <= hw + 1e-12 {
                                    let i = (x.0.rem_euclid(n as i64) as usize) * n + x.1.rem_euclid(n as i64) as usize;
                                    cells.push(i);
                                    s += abs[i];
                                }
                            }
                        }
                        if cells.is_empty() {
                            continue;
                        }
                        let avg = s / cells.len() as f64;
                        for &i in &cells {
                            out[i] = out[i].max(avg);
                        }
                    }
                }
            }
        }
    }
    Ok(MaxField { grid, samples: out })
}
