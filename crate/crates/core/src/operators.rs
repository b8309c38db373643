//! Linear and bilinear multiplier operators on [`Field`]s.
//!
//! Linear operators multiply the centered spectrum by a symbol and transform
//! back. The dyadic bilinear pieces are applied through their factorization
//! `C_j(f,g) = c int T_t g . B_{j,t} f . t^(2nu+1) dt`, integrated in `u = t^2`
//! with a [`ProductRule`]: for every node two linear applications are
//! multiplied pointwise in space.
//!
//! Pointwise symbol values within [`SINGULAR_EPS`](crate::symbols::SINGULAR_EPS)
//! of a negative-power singularity are set to zero. The excised mass reported
//! is the spectral energy `L^-2 sum |symbol-free coefficient|^2` of the
//! frequencies dropped, accumulated over all applications. Product rules use
//! exact moments near singular points and excise nothing.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bumps::PartitionFamily;
use crate::error::{Error, Result};
use crate::quadrature::{t_max_for_level, PowerSide, ProductPlan, ProductRule, Quadrature};
use crate::spectral::{inverse_in_place, lp_of_samples, Field, GridSpec, Repr};
use crate::symbols::{
    eval_bilinear_symbol, eval_linear_symbol, pos_pow, singular_power, BilinearSymbolSpec, ExponentParams,
    LinearSymbolSpec,
};

/// Largest grid accepted by [`apply_bilinear_direct`].
pub const DIRECT_LIMIT: usize = 64;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Result of a linear application together with what was excised.
#[derive(Clone, Debug)]
pub struct LinearApplyReport {
    pub result: Field,
    pub excised_points: usize,
    pub excised_symbol_mass: f64,
}

#[derive(Clone, Debug)]
pub struct BilinearApplyReport {
    pub result: Field,
    pub quadrature_nodes_used: usize,
    pub excised_symbol_mass: f64,
    /// Highest dyadic level included, for the full operator only.
    pub truncation_j_max: Option<u32>,
    /// Relative `L^2` difference between two refinement levels, when run.
    pub cauchy_difference: Option<f64>,
}

/// `dft_inverse(symbol . dft_forward(g))`.
pub fn apply_linear(spec: &LinearSymbolSpec, g: &Field) -> Result<LinearApplyReport> {
    let grid = g.grid();
    let spec_g = g.to_frequency();
    let mut buf = spec_g.into_samples();
    let mut excised_points = 0;
    let mut mass = 0.0;
    for (i, v) in buf.iter_mut().enumerate() {
        if *v == ZERO {
            continue;
        }
        let s = eval_linear_symbol(spec, grid.frequency(i));
        if s.near_singular {
            excised_points += 1;
            mass += v.norm_sqr();
            *v = ZERO;
        } else {
            *v *= s.value;
        }
    }
    inverse_in_place(&mut buf, grid);
    let area = grid.period() * grid.period();
    Ok(LinearApplyReport {
        result: Field::new(grid, buf, Repr::Space)?,
        excised_points,
        excised_symbol_mass: mass / area,
    })
}

/// Exact lattice double sum
/// `h(x) = sum_xi L^-2 f^(xi) e^{2 pi i x.xi} IDFT_eta[m(xi, .) g^](x)`.
///
/// With this normalization `m = 1` gives `h = f g`, and plane waves
/// `f = e(x.xi0)`, `g = e(x.eta0)` give `h = m(xi0, eta0) e(x.(xi0+eta0))`.
pub fn apply_bilinear_direct(spec: &BilinearSymbolSpec, f: &Field, g: &Field) -> Result<Field> {
    let grid = check_pair(f, g)?;
    let n = grid.n();
    if n > DIRECT_LIMIT {
        return Err(Error::GridTooLarge { n, limit: DIRECT_LIMIT });
    }
    let fh = f.to_frequency().into_samples();
    let gh = g.to_frequency().into_samples();
    let xi_list: Vec<usize> = (0..fh.len()).filter(|&i| fh[i] != ZERO).collect();
    let twiddle: Vec<Complex64> =
        (0..n).map(|k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64)).collect();
    let inv_area = 1.0 / (grid.period() * grid.period());
    let etas: Vec<(usize, (f64, f64))> =
        (0..gh.len()).filter(|&i| gh[i] != ZERO).map(|i| (i, grid.frequency(i))).collect();

    let partials: Vec<Vec<Complex64>> = xi_list
        .par_chunks(16)
        .map(|chunk| {
            let mut acc = vec![ZERO; n * n];
            let mut buf = vec![ZERO; n * n];
            for &xi_idx in chunk {
                let xi = grid.frequency(xi_idx);
                buf.iter_mut().for_each(|v| *v = ZERO);
                let mut any = false;
                for &(i, eta) in &etas {
                    let m = eval_bilinear_symbol(spec, xi, eta);
                    if m != 0.0 {
                        buf[i] = gh[i] * m;
                        any = true;
                    }
                }
                if !any {
                    continue;
                }
                inverse_in_place(&mut buf, grid);
                let (k1, k2) = grid.wavenumber(xi_idx);
                let (k1, k2) = (k1.rem_euclid(n as i64) as usize, k2.rem_euclid(n as i64) as usize);
                let amp = fh[xi_idx] * inv_area;
                for i1 in 0..n {
                    let row = twiddle[(i1 * k1) % n] * amp;
                    for i2 in 0..n {
                        let idx = i1 * n + i2;
                        acc[idx] += row * twiddle[(i2 * k2) % n] * buf[idx];
                    }
                }
            }
            acc
        })
        .collect();
    let mut out = vec![ZERO; n * n];
    for p in &partials {
        out.iter_mut().zip(p).for_each(|(o, v)| *o += v);
    }
    Field::new(grid, out, Repr::Space)
}

fn check_pair(f: &Field, g: &Field) -> Result<GridSpec> {
    if f.grid() != g.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(f.grid())
}

/// Nonzero spectral coefficients, each with a static symbol factor already
/// applied, sorted by a key that decides support in `t`.
pub(crate) struct SymbolPlan {
    grid: GridSpec,
    entries: Vec<(usize, f64, Complex64)>,
    side: PowerSide,
}

impl SymbolPlan {
    /// `T`-type plan: key `r = eta1^2/eta2^2`, support `r < t^2`.
    pub(crate) fn for_t(grid: GridSpec, spec: &[Complex64]) -> SymbolPlan {
        let p = PartitionFamily;
        let mut entries = Vec::new();
        for (i, &v) in spec.iter().enumerate() {
            if v == ZERO {
                continue;
            }
            let (e1, e2) = grid.frequency(i);
            let c = p.phi(e2);
            if c != 0.0 {
                entries.push((i, e1 * e1 / (e2 * e2), v * c));
            }
        }
        entries.sort_by(|a, b| a.1.total_cmp(&b.1));
        SymbolPlan { grid, entries, side: PowerSide::Rising }
    }

    /// `B`-type plan: key `1 - r`, support `1 - r > t^2`, angular factor `ang(r)`.
    pub(crate) fn for_b(grid: GridSpec, spec: &[Complex64], ang: impl Fn(f64) -> f64) -> SymbolPlan {
        let p = PartitionFamily;
        let mut entries = Vec::new();
        for (i, &v) in spec.iter().enumerate() {
            if v == ZERO {
                continue;
            }
            let (e1, e2) = grid.frequency(i);
            let c = p.phi(e2);
            if c == 0.0 {
                continue;
            }
            let r = e1 * e1 / (e2 * e2);
            let a = ang(r);
            if a != 0.0 {
                entries.push((i, 1.0 - r, v * (c * a)));
            }
        }
        entries.sort_by(|a, b| b.1.total_cmp(&a.1));
        SymbolPlan { grid, entries, side: PowerSide::Falling }
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Writes the `T_t` spectrum into `buf`; returns false if it is zero.
    fn synth_t(&self, t: f64, nu: f64, buf: &mut [Complex64], tally: &mut Tally) -> bool {
        buf.iter_mut().for_each(|v| *v = ZERO);
        let t2 = t * t;
        let end = self.entries.partition_point(|e| e.1 < t2);
        let mut any = false;
        for &(i, r, c) in &self.entries[..end] {
            let s = singular_power(1.0 - r / t2, nu);
            if s.near_singular {
                tally.add(c);
            } else if s.value != 0.0 {
                buf[i] = c * s.value;
                any = true;
            }
        }
        any
    }

    /// Writes the `B_t` spectrum into `buf`; returns false if it is zero.
    fn synth_b(&self, t: f64, mu: f64, buf: &mut [Complex64], tally: &mut Tally) -> bool {
        buf.iter_mut().for_each(|v| *v = ZERO);
        let t2 = t * t;
        let end = self.entries.partition_point(|e| e.1 > t2);
        let mut any = false;
        for &(i, d, c) in &self.entries[..end] {
            let s = singular_power(d - t2, mu - 1.0);
            if s.near_singular {
                tally.add(c);
            } else if s.value != 0.0 {
                buf[i] = c * s.value;
                any = true;
            }
        }
        any
    }

    /// Projection coefficients on `cell` for every entry whose factor does not
    /// vanish there (a prefix of the sorted entries); returns that count.
    fn cell_table(&self, rule: &ProductRule, cell: usize, e: f64, table: &mut Vec<f64>) -> usize {
        let (lo, hi) = rule.cells[cell];
        let active = match self.side {
            PowerSide::Rising => self.entries.partition_point(|x| x.1 < hi),
            PowerSide::Falling => self.entries.partition_point(|x| x.1 > lo),
        };
        let p = rule.nodes_per_cell;
        table.resize(active * p, 0.0);
        let side = self.side;
        table.par_chunks_mut(p * 256).enumerate().for_each(|(b, block)| {
            for (i, chunk) in block.chunks_mut(p).enumerate() {
                rule.coefficients(cell, self.entries[b * 256 + i].1, e, side, chunk);
            }
        });
        active
    }

    /// Spectrum of node `k` from a cell table; returns false if it is zero.
    fn synth_node(&self, table: &[f64], active: usize, p: usize, k: usize, buf: &mut [Complex64]) -> bool {
        buf.iter_mut().for_each(|v| *v = ZERO);
        let mut any = false;
        for (n, &(i, _, c)) in self.entries[..active].iter().enumerate() {
            let v = table[n * p + k];
            if v != 0.0 {
                buf[i] = c * v;
                any = true;
            }
        }
        any
    }

    pub(crate) fn apply_t(&self, t: f64, nu: f64, buf: &mut [Complex64], tally: &mut Tally) -> bool {
        let any = self.synth_t(t, nu, buf, tally);
        if any {
            inverse_in_place(buf, self.grid);
        }
        any
    }

    pub(crate) fn apply_b(&self, t: f64, mu: f64, buf: &mut [Complex64], tally: &mut Tally) -> bool {
        let any = self.synth_b(t, mu, buf, tally);
        if any {
            inverse_in_place(buf, self.grid);
        }
        any
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Tally {
    pub mass: f64,
}

impl Tally {
    fn add(&mut self, c: Complex64) {
        self.mass += c.norm_sqr();
    }
}

fn dyadic_angular(j: u32) -> impl Fn(f64) -> f64 {
    let p = PartitionFamily;
    let s = (j as f64).exp2();
    move |r| p.psi(s * (1.0 - r))
}

/// `acc += s * a * b` elementwise.
fn accumulate_product(acc: &mut [Complex64], s: f64, a: &[Complex64], b: &[Complex64]) {
    acc.par_chunks_mut(4096).zip(a.par_chunks(4096)).zip(b.par_chunks(4096)).for_each(|((o, x), y)| {
        for ((o, x), y) in o.iter_mut().zip(x).zip(y) {
            *o += s * x * y;
        }
    });
}

/// `(c/2) sum_q W_q T_q g . B_q f` over the cells of `rule`, one accumulator
/// per `B` plan; plan `l` only sees cells below `tops[l]`. Returns the sums and
/// the number of nodes used by each.
fn product_sums(
    params: &ExponentParams,
    t_plan: &SymbolPlan,
    b_plans: &[SymbolPlan],
    tops: &[f64],
    rule: &ProductRule,
    grid: GridSpec,
) -> Vec<(Vec<Complex64>, usize)> {
    let len = grid.len();
    let p = rule.nodes_per_cell;
    let c = 0.5 * params.stein_weiss_constant();
    let mut out: Vec<(Vec<Complex64>, usize)> = b_plans.iter().map(|_| (vec![ZERO; len], 0)).collect();
    if t_plan.is_empty() {
        return out;
    }
    let mut bt = vec![ZERO; len];
    let mut bb = vec![ZERO; len];
    let mut t_tab = Vec::new();
    let mut b_tabs: Vec<Vec<f64>> = b_plans.iter().map(|_| Vec::new()).collect();
    for (cell, &(_, hi)) in rule.cells.iter().enumerate() {
        let live: Vec<bool> =
            tops.iter().zip(b_plans).map(|(&top, b)| hi <= top * (1.0 + 1e-12) && !b.is_empty()).collect();
        if !live.iter().any(|&l| l) {
            continue;
        }
        let nt = t_plan.cell_table(rule, cell, params.nu, &mut t_tab);
        if nt == 0 {
            continue;
        }
        let nb: Vec<usize> = b_plans
            .iter()
            .zip(&mut b_tabs)
            .zip(&live)
            .map(|((b, tab), &l)| if l { b.cell_table(rule, cell, params.mu - 1.0, tab) } else { 0 })
            .collect();
        if nb.iter().all(|&x| x == 0) {
            continue;
        }
        for k in 0..p {
            if !t_plan.synth_node(&t_tab, nt, p, k, &mut bt) {
                continue;
            }
            inverse_in_place(&mut bt, grid);
            let w = c * rule.weights[cell * p + k];
            for (l, b) in b_plans.iter().enumerate() {
                if nb[l] == 0 || !b.synth_node(&b_tabs[l], nb[l], p, k, &mut bb) {
                    continue;
                }
                inverse_in_place(&mut bb, grid);
                out[l].1 += 1;
                accumulate_product(&mut out[l].0, w, &bt, &bb);
            }
        }
    }
    out
}

/// Checks that `rule` has a cell edge at `t_max(j)^2` for each level.
fn check_rule_levels(rule: &ProductRule, levels: &[u32]) -> Result<()> {
    for &j in levels {
        let top = t_max_for_level(j).powi(2);
        let ok = rule.cells.iter().any(|&(_, hi)| (hi - top).abs() <= 1e-12 * top);
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "product rule (top {}) has no cell edge at u = {top} for level {j}",
                rule.top()
            )));
        }
    }
    Ok(())
}

/// Dyadic piece `C_j`, `j >= 2`, with a prebuilt rule.
pub fn apply_c_j_with(
    params: &ExponentParams,
    j: u32,
    f: &Field,
    g: &Field,
    rule: &ProductRule,
) -> Result<BilinearApplyReport> {
    if j < 2 {
        return Err(Error::InvalidParameter(format!(
            "level {j}: a single rule only serves j >= 2, use apply_c_j for j = 1"
        )));
    }
    let grid = check_pair(f, g)?;
    let fh = f.to_frequency().into_samples();
    let gh = g.to_frequency().into_samples();
    check_rule_levels(rule, &[j])?;
    let t_plan = SymbolPlan::for_t(grid, &gh);
    let b_plan = SymbolPlan::for_b(grid, &fh, dyadic_angular(j));
    let top = t_max_for_level(j).powi(2);
    let (acc, used) = product_sums(params, &t_plan, &[b_plan], &[top], rule, grid).remove(0);
    Ok(BilinearApplyReport {
        result: Field::new(grid, acc, Repr::Space)?,
        quadrature_nodes_used: used,
        excised_symbol_mass: 0.0,
        truncation_j_max: None,
        cauchy_difference: None,
    })
}

/// Dyadic piece `C_j` for any `j >= 1`, building its rules from `plan`.
///
/// For `j = 1` the three pieces of the `j = 1` symbol are assembled: the smooth
/// `psi11` part by a separable expansion, the `psi12` part through the
/// `B~_t . T_t` factorization, and the `psi(2^k(1 - eta1^2/eta2^2))` parts as
/// `C_k(g, h)` with `h^ = phiTilde psi1 f^`.
pub fn apply_c_j(
    params: &ExponentParams,
    j: u32,
    f: &Field,
    g: &Field,
    plan: &ProductPlan,
) -> Result<BilinearApplyReport> {
    check_pair(f, g)?;
    if j == 0 {
        return Err(Error::InvalidParameter("level must be >= 1".into()));
    }
    if j >= 2 {
        return apply_c_j_with(params, j, f, g, &plan.for_levels(&f.grid(), &[j])?);
    }
    apply_c_1(params, f, g, plan)
}

/// Runs [`apply_c_j`] at `plan` and at its refinement; returns the finer
/// result with the relative `L^2` Cauchy difference filled in.
pub fn apply_c_j_checked(
    params: &ExponentParams,
    j: u32,
    f: &Field,
    g: &Field,
    plan: &ProductPlan,
) -> Result<BilinearApplyReport> {
    let coarse = apply_c_j(params, j, f, g, plan)?;
    let mut fine = apply_c_j(params, j, f, g, &plan.refined())?;
    fine.cauchy_difference = Some(relative_l2(&coarse.result, &fine.result)?);
    Ok(fine)
}

/// `||a - b||_2 / ||b||_2` (0 when both vanish).
pub fn relative_l2(a: &Field, b: &Field) -> Result<f64> {
    let grid = check_pair(a, b)?;
    let a = a.to_space();
    let b = b.to_space();
    let diff: Vec<Complex64> = a.samples().iter().zip(b.samples()).map(|(x, y)| x - y).collect();
    let num = lp_of_samples(&diff, grid, 2.0)?;
    let den = lp_of_samples(b.samples(), grid, 2.0)?;
    Ok(if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    })
}

/// Chebyshev points of the first kind on `[lo, hi]` with barycentric weights.
fn chebyshev(lo: f64, hi: f64, count: usize) -> (Vec<f64>, Vec<f64>) {
    let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    (0..count)
        .map(|i| {
            let th = (2 * i + 1) as f64 * std::f64::consts::PI / (2 * count) as f64;
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            (c + h * th.cos(), sign * th.sin())
        })
        .unzip()
}

/// Lagrange basis values at `v` for the given nodes and barycentric weights.
fn lagrange_basis(v: f64, nodes: &[f64], bw: &[f64]) -> Vec<f64> {
    if let Some(k) = nodes.iter().position(|&x| x == v) {
        let mut out = vec![0.0; nodes.len()];
        out[k] = 1.0;
        return out;
    }
    let terms: Vec<f64> = nodes.iter().zip(bw).map(|(&x, &w)| w / (v - x)).collect();
    let s: f64 = terms.iter().sum();
    terms.into_iter().map(|t| t / s).collect()
}

/// Separable expansion `(1-u-v)^lambda ~ sum_i (1-u-v_i)^lambda l_i(v)` for
/// `u in [0, 3/4]`, `v in [0, 1/8]`, with the rank grown until the sampled
/// residual is below `1e-8`. Returns the interpolation nodes and weights.
pub(crate) fn smooth_piece_expansion(lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let (vlo, vhi) = (0.0, 0.125);
    let mut rank = 4;
    loop {
        let (nodes, bw) = chebyshev(vlo, vhi, rank);
        let mut worst: f64 = 0.0;
        for a in 0..=40 {
            let u = 0.75 * a as f64 / 40.0;
            for b in 0..=41 {
                let v = vhi * b as f64 / 41.0;
                let basis = lagrange_basis(v, &nodes, &bw);
                let approx: f64 = nodes.iter().zip(&basis).map(|(&vi, &l)| pos_pow(1.0 - u - vi, lambda) * l).sum();
                worst = worst.max((approx - pos_pow(1.0 - u - v, lambda)).abs());
            }
        }
        if worst < 1e-8 || rank >= 48 {
            return (nodes, bw);
        }
        rank += 2;
    }
}

fn apply_c_1(params: &ExponentParams, f: &Field, g: &Field, plan: &ProductPlan) -> Result<BilinearApplyReport> {
    let grid = f.grid();
    let p = PartitionFamily;
    let len = grid.len();
    let fh = f.to_frequency().into_samples();
    let gh = g.to_frequency().into_samples();
    let mut total = vec![ZERO; len];
    let mut used = 0;

    // psi11 piece: rank-r separable sum of products of linear applications.
    let (nodes, bw) = smooth_piece_expansion(params.lambda);
    let ratios: Vec<Option<f64>> = (0..len)
        .map(|idx| {
            let (x1, x2) = grid.frequency(idx);
            (p.phi(x2) != 0.0).then(|| x1 * x1 / (x2 * x2))
        })
        .collect();
    // Barycentric denominators of the right factor, one per frequency.
    let right_den: Vec<f64> = ratios
        .iter()
        .zip(&gh)
        .map(|(r, &v)| match r {
            Some(r) if v != ZERO && p.psi11(*r) != 0.0 => {
                nodes.iter().zip(&bw).map(|(&x, &w)| if x == *r { 0.0 } else { w / (r - x) }).sum()
            }
            _ => 0.0,
        })
        .collect();
    let mut left = vec![ZERO; len];
    let mut right = vec![ZERO; len];
    for (i, &vi) in nodes.iter().enumerate() {
        let mut any_l = false;
        let mut any_r = false;
        for idx in 0..len {
            left[idx] = ZERO;
            right[idx] = ZERO;
            let Some(r) = ratios[idx] else { continue };
            let (_, x2) = grid.frequency(idx);
            let c = p.phi(x2);
            if fh[idx] != ZERO {
                let a = c * p.psi1(r);
                if a != 0.0 {
                    left[idx] = fh[idx] * (a * pos_pow(1.0 - r - vi, params.lambda));
                    any_l = true;
                }
            }
            if right_den[idx] != 0.0 || (gh[idx] != ZERO && nodes.contains(&r)) {
                let a = c * p.psi11(r);
                if a != 0.0 {
                    let basis = if nodes.contains(&r) {
                        if r == vi { 1.0 } else { 0.0 }
                    } else {
                        bw[i] / (r - vi) / right_den[idx]
                    };
                    right[idx] = gh[idx] * (a * basis);
                    any_r = true;
                }
            }
        }
        if any_l && any_r {
            inverse_in_place(&mut left, grid);
            inverse_in_place(&mut right, grid);
            accumulate_product(&mut total, 1.0, &left, &right);
        }
    }

    // h^ = phiTilde(xi2) psi1(xi1^2/xi2^2) f^.
    let hh: Vec<Complex64> = fh
        .iter()
        .enumerate()
        .map(|(idx, &v)| {
            if v == ZERO {
                return ZERO;
            }
            let (x1, x2) = grid.frequency(idx);
            let c = p.phi_tilde(x2);
            if c == 0.0 {
                ZERO
            } else {
                v * (c * p.psi1(x1 * x1 / (x2 * x2)))
            }
        })
        .collect();
    let t_plan = SymbolPlan::for_t(grid, &hh);

    // psi12 piece.
    let rule = plan.for_tilde(&grid)?;
    let b_plan = SymbolPlan::for_b(grid, &gh, |r| p.psi12(r));
    let (acc, u) = product_sums(params, &t_plan, &[b_plan], &[rule.top()], &rule, grid).remove(0);
    total.iter_mut().zip(&acc).for_each(|(o, v)| *o += v);
    used += u;

    // psi(2^k(...)) pieces, k = 2..K, as C_k(g, h).
    let mut dmin = f64::INFINITY;
    for (idx, &v) in gh.iter().enumerate() {
        if v == ZERO {
            continue;
        }
        let (x1, x2) = grid.frequency(idx);
        if p.phi(x2) == 0.0 {
            continue;
        }
        let d = 1.0 - x1 * x1 / (x2 * x2);
        if d > 0.0 {
            dmin = dmin.min(d);
        }
    }
    if dmin.is_finite() {
        let k_max = ((2.0 / dmin).log2().ceil() as u32).clamp(2, 60);
        let levels: Vec<u32> = (2..=k_max).collect();
        let rule = plan.for_levels(&grid, &levels)?;
        let b_plans: Vec<SymbolPlan> = levels.iter().map(|&k| SymbolPlan::for_b(grid, &gh, dyadic_angular(k))).collect();
        let tops: Vec<f64> = levels.iter().map(|&k| t_max_for_level(k).powi(2)).collect();
        for (acc, u) in product_sums(params, &t_plan, &b_plans, &tops, &rule, grid) {
            total.iter_mut().zip(&acc).for_each(|(o, v)| *o += v);
            used += u;
        }
    }
    Ok(BilinearApplyReport {
        result: Field::new(grid, total, Repr::Space)?,
        quadrature_nodes_used: used,
        excised_symbol_mass: 0.0,
        truncation_j_max: None,
        cauchy_difference: None,
    })
}

/// `sum_{j=1}^{j_max} C_j(f, g)`.
pub fn apply_c(
    params: &ExponentParams,
    f: &Field,
    g: &Field,
    j_max: u32,
    plan: &ProductPlan,
) -> Result<BilinearApplyReport> {
    if j_max < 2 {
        return Err(Error::InvalidParameter(format!("j_max = {j_max} must be >= 2")));
    }
    let grid = check_pair(f, g)?;
    grid.require_cone_adequate(j_max)?;
    let mut total = vec![ZERO; grid.len()];
    let mut used = 0;
    let mut mass = 0.0;
    for j in 1..=j_max {
        let r = apply_c_j(params, j, f, g, plan)?;
        total.iter_mut().zip(r.result.samples()).for_each(|(o, v)| *o += v);
        used += r.quadrature_nodes_used;
        mass += r.excised_symbol_mass;
    }
    Ok(BilinearApplyReport {
        result: Field::new(grid, total, Repr::Space)?,
        quadrature_nodes_used: used,
        excised_symbol_mass: mass,
        truncation_j_max: Some(j_max),
        cauchy_difference: None,
    })
}

/// Space fields `C_j(f, g)` for several `j`, sharing every `T_t g`
/// application between levels. `rule` must cover `[0, t_max(min j)^2]` with a
/// cell edge at each `t_max(j)^2`, as [`ProductPlan::for_levels`] builds.
pub fn c_j_sweep(
    params: &ExponentParams,
    levels: &[u32],
    f: &Field,
    g: &Field,
    rule: &ProductRule,
) -> Result<Vec<BilinearApplyReport>> {
    let grid = check_pair(f, g)?;
    if levels.iter().any(|&j| j < 2) {
        return Err(Error::InvalidParameter("sweep levels must be >= 2".into()));
    }
    check_rule_levels(rule, levels)?;
    let fh = f.to_frequency().into_samples();
    let gh = g.to_frequency().into_samples();
    let t_plan = SymbolPlan::for_t(grid, &gh);
    let b_plans: Vec<SymbolPlan> = levels.iter().map(|&j| SymbolPlan::for_b(grid, &fh, dyadic_angular(j))).collect();
    let tops: Vec<f64> = levels.iter().map(|&j| t_max_for_level(j).powi(2)).collect();
    product_sums(params, &t_plan, &b_plans, &tops, rule, grid)
        .into_iter()
        .map(|(acc, used)| {
            Ok(BilinearApplyReport {
                result: Field::new(grid, acc, Repr::Space)?,
                quadrature_nodes_used: used,
                excised_symbol_mass: 0.0,
                truncation_j_max: None,
                cauchy_difference: None,
            })
        })
        .collect()
}

/// `(sum_q w_q t_q^(2b) |T_{t_q} g|^2)^(1/2)` pointwise.
pub fn square_h(params: &ExponentParams, g: &Field, quad: &Quadrature) -> Result<Field> {
    let grid = g.grid();
    let gh = g.to_frequency().into_samples();
    let plan = SymbolPlan::for_t(grid, &gh);
    let mut buf = vec![ZERO; grid.len()];
    let mut sq = vec![0.0; grid.len()];
    let mut tally = Tally::default();
    for (&t, &w) in quad.nodes.iter().zip(&quad.weights) {
        if plan.apply_t(t, params.nu, &mut buf, &mut tally) {
            let s = w * pos_pow(t, 2.0 * params.b);
            sq.iter_mut().zip(&buf).for_each(|(o, v)| *o += s * v.norm_sqr());
        }
    }
    real_field(grid, sq)
}

/// `(sum_q w_q t_q^(2a) |B_{j,t_q} f|^2)^(1/2)` pointwise.
pub fn square_g(params: &ExponentParams, j: u32, f: &Field, quad: &Quadrature) -> Result<Field> {
    if j < 1 {
        return Err(Error::InvalidParameter("level must be >= 1".into()));
    }
    let grid = f.grid();
    let fh = f.to_frequency().into_samples();
    let plan = SymbolPlan::for_b(grid, &fh, dyadic_angular(j));
    let mut buf = vec![ZERO; grid.len()];
    let mut sq = vec![0.0; grid.len()];
    let mut tally = Tally::default();
    for (&t, &w) in quad.nodes.iter().zip(&quad.weights) {
        if plan.apply_b(t, params.mu, &mut buf, &mut tally) {
            let s = w * pos_pow(t, 2.0 * params.a);
            sq.iter_mut().zip(&buf).for_each(|(o, v)| *o += s * v.norm_sqr());
        }
    }
    real_field(grid, sq)
}

fn real_field(grid: GridSpec, sq: Vec<f64>) -> Result<Field> {
    Field::new(grid, sq.into_iter().map(|v| Complex64::new(v.max(0.0).sqrt(), 0.0)).collect(), Repr::Space)
}

/// Which `t`-interval a restricted square function runs over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnnulusPiece {
    /// `[sqrt(2^(-2-j)), sqrt(2^(1-j))]`.
    Head,
    /// `[2^(-(k+1)/2), 2^(-k/2)]`, `k >= 2 + j`.
    Tail(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnnulusOperator {
    T,
    B,
}

/// The `t`-interval of an annulus piece at level `j`.
pub fn annulus_interval(j: u32, piece: AnnulusPiece) -> Result<(f64, f64)> {
    match piece {
        AnnulusPiece::Head => Ok(((-2.0 - j as f64).exp2().sqrt(), t_max_for_level(j))),
        AnnulusPiece::Tail(k) if k >= 2 + j => Ok(((-(k as f64 + 1.0) / 2.0).exp2(), (-(k as f64) / 2.0).exp2())),
        AnnulusPiece::Tail(k) => Err(Error::InvalidParameter(format!("tail index {k} must be >= 2 + j = {}", 2 + j))),
    }
}

/// Square function restricted to one `t`-annulus; `quad` must live on
/// [`annulus_interval`]`(j, piece)`.
pub fn square_annulus(
    params: &ExponentParams,
    j: u32,
    piece: AnnulusPiece,
    op: AnnulusOperator,
    field: &Field,
    quad: &Quadrature,
) -> Result<Field> {
    let (lo, hi) = annulus_interval(j, piece)?;
    let tol = 1e-12 * hi;
    if (quad.lower - lo).abs() > tol || (quad.upper - hi).abs() > tol {
        return Err(Error::InvalidParameter(format!(
            "rule lives on [{}, {}], annulus is [{lo}, {hi}]",
            quad.lower, quad.upper
        )));
    }
    match op {
        AnnulusOperator::T => square_h(params, field, quad),
        AnnulusOperator::B => square_g(params, j, field, quad),
    }
}
