//! Composite Gauss–Legendre rules for the `t`-integrals.
//!
//! Weights are plain `dt` weights: the power weight `t^e` of each integral is
//! applied by the caller. Two builders exist. [`build_t_quadrature`] uses
//! half-dyadic panels `[2^{-(k+1)/2}, 2^{-k/2}]` below `t_max`.
//! [`build_lattice_t_quadrature`] additionally knows where the symbols of a
//! given frequency lattice are singular in `t` and puts panel edges there.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::jacobi::GaussJacobi;
use gauss_quad::legendre::GaussLegendre;
use gauss_quad::FiniteAboveNegOneF64;

use crate::bumps::PartitionFamily;
use crate::error::{Error, Result};
use crate::spectral::GridSpec;
use crate::symbols::ExponentParams;

/// Tail mass of the `t^(2nu+1)` weight left out below the last panel.
pub const TAIL_MASS: f64 = 1e-12;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, cached per degree.
pub fn gauss_legendre(degree: usize) -> Arc<Vec<(f64, f64)>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<(f64, f64)>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(degree)
        .or_insert_with(|| {
            let d = NonZeroUsize::new(degree).expect("degree must be positive");
            let mut v: Vec<(f64, f64)> = GaussLegendre::new(d).as_node_weight_pairs().to_vec();
            v.sort_by(|a, b| a.0.total_cmp(&b.0));
            Arc::new(v)
        })
        .clone()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuadratureScheme {
    DyadicPanels,
    GradedBothEnds,
    LatticeExact,
    LatticeDyadic,
}

impl QuadratureScheme {
    pub fn tag(&self) -> &'static str {
        match self {
            QuadratureScheme::DyadicPanels => "dyadic-gl",
            QuadratureScheme::GradedBothEnds => "graded-gl",
            QuadratureScheme::LatticeExact => "lattice-exact",
            QuadratureScheme::LatticeDyadic => "lattice-dyadic",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Quadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
    /// Exact `(t - lower, upper - t)` per node, when the builder knows them.
    pub offsets: Option<Vec<(f64, f64)>>,
    pub scheme: QuadratureScheme,
}

impl Quadrature {
    pub(crate) fn empty(lower: f64, upper: f64, scheme: QuadratureScheme) -> Self {
        Self { nodes: Vec::new(), weights: Vec::new(), lower, upper, offsets: None, scheme }
    }

    pub(crate) fn push(&mut self, t: f64, w: f64) {
        self.nodes.push(t);
        self.weights.push(w);
    }

    pub fn t_max(&self) -> f64 {
        self.upper
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&t, &w)| w * f(t)).sum()
    }

    /// Nodes in `(lo, hi]` with their weights; used to share one rule
    /// between nested `t`-ranges.
    pub fn restricted(&self, lo: f64, hi: f64) -> Quadrature {
        let mut q = Quadrature::empty(lo.max(self.lower), hi.min(self.upper), self.scheme);
        for (&t, &w) in self.nodes.iter().zip(&self.weights) {
            if t > lo && t <= hi {
                q.push(t, w);
            }
        }
        q
    }

    fn push_gl(&mut self, lo: f64, hi: f64, p: usize) {
        let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        for &(x, w) in gauss_legendre(p).iter() {
            self.push(c + h * x, w * h);
        }
    }

    fn sort(&mut self) {
        let mut idx: Vec<usize> = (0..self.nodes.len()).collect();
        idx.sort_by(|&a, &b| self.nodes[a].total_cmp(&self.nodes[b]));
        self.nodes = idx.iter().map(|&i| self.nodes[i]).collect();
        self.weights = idx.iter().map(|&i| self.weights[i]).collect();
    }
}

/// `t_max = sqrt(2^(1-j))`.
pub fn t_max_for_level(j: u32) -> f64 {
    (0.5 * (1.0 - j as f64)).exp2()
}

/// Half-dyadic panel rule on `[0, sqrt(2^(1-j))]`.
///
/// Panels `[2^{-(k+1)/2}, 2^{-k/2}]` start at `k = j-1` and continue until the
/// `t^(2nu+1)` mass below the last panel is under [`TAIL_MASS`]. Each panel is
/// split into `panels_per_dyad` equal pieces; for `mu < 1` the top panel is
/// additionally graded toward `t_max`.
pub fn build_t_quadrature(
    j: u32,
    params: &ExponentParams,
    panels_per_dyad: usize,
    nodes_per_panel: usize,
) -> Result<Quadrature> {
    if j < 1 {
        return Err(Error::InvalidParameter(format!("level {j} must be >= 1")));
    }
    if panels_per_dyad == 0 || nodes_per_panel == 0 {
        return Err(Error::InvalidParameter(format!(
            "panel counts must be positive (panels_per_dyad = {panels_per_dyad}, nodes_per_panel = {nodes_per_panel})"
        )));
    }
    let t_max = t_max_for_level(j);
    let e = 2.0 * params.nu + 2.0;
    let mut q = Quadrature::empty(0.0, t_max, QuadratureScheme::DyadicPanels);
    let mut k = j - 1;
    loop {
        let hi = (-(k as f64) / 2.0).exp2();
        let lo = (-(k as f64 + 1.0) / 2.0).exp2();
        if k == j - 1 && params.mu < 1.0 {
            // Geometric grading toward the top endpoint.
            let d = hi - lo;
            let grades = 8;
            let mut edges: Vec<f64> = (0..=grades).map(|g| hi - d * (-(g as f64)).exp2()).collect();
            edges.push(hi);
            for w in edges.windows(2) {
                let step = (w[1] - w[0]) / panels_per_dyad as f64;
                for s in 0..panels_per_dyad {
                    q.push_gl(w[0] + s as f64 * step, w[0] + (s + 1) as f64 * step, nodes_per_panel);
                }
            }
        } else {
            let step = (hi - lo) / panels_per_dyad as f64;
            for s in 0..panels_per_dyad {
                q.push_gl(lo + s as f64 * step, lo + (s + 1) as f64 * step, nodes_per_panel);
            }
        }
        if lo.powf(e) / e < TAIL_MASS || k > j + 400 {
            break;
        }
        k += 1;
    }
    q.sort();
    Ok(q)
}

/// Refinement parameters of the lattice-aware rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatticeRule {
    /// Equal sub-panels per segment; doubling it halves the panel size.
    pub sub_panels: usize,
    pub nodes_per_panel: usize,
    /// Place edges at every lattice singularity (small grids) or only at
    /// half-dyadic points (large grids).
    pub exact: bool,
}

impl LatticeRule {
    pub fn refined(&self) -> LatticeRule {
        LatticeRule { sub_panels: 2 * self.sub_panels, ..*self }
    }
}

/// Where the lattice symbols change analytic form in `t`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LatticeBreaks {
    /// Smallest positive `|k1|/k2`: below it the `T` symbols are constant in `t`.
    pub head: Option<f64>,
    /// Every singular point in `t` (used by exact rules).
    pub singular: Vec<f64>,
}

impl LatticeBreaks {
    pub fn merge(mut self, other: LatticeBreaks) -> LatticeBreaks {
        self.head = match (self.head, other.head) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.singular.extend(other.singular);
        self
    }
}

fn dedup_sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(v.len());
    for x in v {
        match out.last() {
            Some(&p) if x - p <= 1e-12 * x.max(1e-300) => {}
            _ => out.push(x),
        }
    }
    out
}

/// Lattice `k2` values where `phi(k2/L) != 0`.
fn phi_rows(grid: &GridSpec) -> Vec<i64> {
    let p = PartitionFamily;
    let half = (grid.n() / 2) as i64;
    (1..half).filter(|&k2| p.phi(k2 as f64 / grid.period()) != 0.0).collect()
}

/// Breakpoints of the `T_t` symbols: `t = |k1|/k2` below `hi`.
pub fn t_breaks(grid: &GridSpec, hi: f64, exact: bool) -> LatticeBreaks {
    let rows = phi_rows(grid);
    let head = rows.iter().max().map(|&k2| 1.0 / k2 as f64).filter(|&h| h < hi);
    let mut singular = Vec::new();
    if exact {
        let half = (grid.n() / 2) as i64;
        for &k2 in &rows {
            for k1 in 1..=half {
                let a = k1 as f64 / k2 as f64;
                if a >= hi {
                    break;
                }
                singular.push(a);
            }
        }
    }
    LatticeBreaks { head, singular: dedup_sorted(singular) }
}

/// Breakpoints of `B`-type symbols: `t = sqrt(1 - r)` for lattice points where
/// the angular cutoff `keep(r)` is nonzero, below `hi`.
pub fn b_breaks(grid: &GridSpec, hi: f64, keep: impl Fn(f64) -> bool) -> LatticeBreaks {
    let rows = phi_rows(grid);
    let half = (grid.n() / 2) as i64;
    let mut singular = Vec::new();
    for &k2 in &rows {
        for k1 in 0..=half {
            let r = (k1 * k1) as f64 / (k2 * k2) as f64;
            if r >= 1.0 {
                break;
            }
            if keep(r) {
                let big_r = (1.0 - r).sqrt();
                if big_r < hi {
                    singular.push(big_r);
                }
            }
        }
    }
    LatticeBreaks { head: None, singular: dedup_sorted(singular) }
}

/// Lattice-aware rule on `[lo, hi]` for integrands `t^head_exp F(t)`.
///
/// When `lo = 0` the first segment `[0, tau]` (with `tau` the head break) uses
/// Gauss–Legendre in `u = t^(head_exp+1)`, or plain Gauss–Legendre when the
/// exponent is a nonnegative integer. In exact mode each remaining segment is
/// mapped by `t = u + (v-u)(3s^2 - 2s^3)`, which turns square-root endpoint
/// behaviour into a smooth integrand in `s`.
pub fn build_lattice_t_quadrature(
    lo: f64,
    hi: f64,
    breaks: &LatticeBreaks,
    head_exp: f64,
    rule: &LatticeRule,
) -> Result<Quadrature> {
    if !(lo >= 0.0 && hi > lo) {
        return Err(Error::InvalidParameter(format!("bad interval [{lo}, {hi}]")));
    }
    if rule.sub_panels == 0 || rule.nodes_per_panel == 0 {
        return Err(Error::InvalidParameter("panel counts must be positive".into()));
    }
    if head_exp <= -1.0 {
        return Err(Error::InvalidParameter(format!("weight exponent {head_exp} must exceed -1")));
    }
    let scheme = if rule.exact { QuadratureScheme::LatticeExact } else { QuadratureScheme::LatticeDyadic };
    let mut q = Quadrature::empty(lo, hi, scheme);
    let mut pts = vec![lo, hi];
    let head = breaks.head.filter(|&h| h > lo && h < hi);
    if let Some(h) = head {
        pts.push(h);
    }
    let floor = head.unwrap_or(lo);
    if rule.exact {
        pts.extend(breaks.singular.iter().copied().filter(|&b| b > lo && b < hi));
    } else {
        let mut k = 0;
        loop {
            let d = (-(k as f64) / 2.0).exp2();
            if d <= floor || k > 400 {
                break;
            }
            if d < hi {
                pts.push(d);
            }
            k += 1;
        }
    }
    let pts = dedup_sorted(pts);
    let (m, p) = (rule.sub_panels, rule.nodes_per_panel);
    for (i, w) in pts.windows(2).enumerate() {
        let (u, v) = (w[0], w[1]);
        if i == 0 && u == 0.0 {
            push_head(&mut q, v, head_exp, m, p);
        } else if rule.exact {
            push_smoothstep(&mut q, u, v, m, p);
        } else {
            let step = (v - u) / m as f64;
            for s in 0..m {
                q.push_gl(u + s as f64 * step, u + (s + 1) as f64 * step, p);
            }
        }
    }
    Ok(q)
}

fn push_head(q: &mut Quadrature, tau: f64, e: f64, m: usize, p: usize) {
    if e >= 0.0 && e.fract() == 0.0 {
        let step = tau / m as f64;
        for s in 0..m {
            q.push_gl(s as f64 * step, (s + 1) as f64 * step, p);
        }
        return;
    }
    let k = e + 1.0;
    let top = tau.powf(k);
    let step = top / m as f64;
    let gl = gauss_legendre(p);
    for s in 0..m {
        let (c, h) = ((s as f64 + 0.5) * step, 0.5 * step);
        for &(x, w) in gl.iter() {
            let u = c + h * x;
            let t = u.powf(1.0 / k);
            q.push(t, w * h / k / t.powf(e));
        }
    }
}

fn push_smoothstep(q: &mut Quadrature, u: f64, v: f64, m: usize, p: usize) {
    let d = v - u;
    let gl = gauss_legendre(p);
    let step = 1.0 / m as f64;
    for s in 0..m {
        let (c, h) = ((s as f64 + 0.5) * step, 0.5 * step);
        for &(x, w) in gl.iter() {
            let sv = c + h * x;
            let t = u + d * sv * sv * (3.0 - 2.0 * sv);
            q.push(t, w * h * 6.0 * d * sv * (1.0 - sv));
        }
    }
}

/// How `t`-rules are built for an operator application.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuadPlan {
    Dyadic { panels_per_dyad: usize, nodes_per_panel: usize },
    Lattice(LatticeRule),
}

impl QuadPlan {
    /// Exact lattice rule on small grids, half-dyadic lattice rule otherwise.
    pub fn auto(grid: &GridSpec) -> QuadPlan {
        QuadPlan::Lattice(LatticeRule { sub_panels: 1, nodes_per_panel: 6, exact: grid.n() <= 128 })
    }

    pub fn refined(&self) -> QuadPlan {
        match *self {
            QuadPlan::Dyadic { panels_per_dyad, nodes_per_panel } => {
                QuadPlan::Dyadic { panels_per_dyad: 2 * panels_per_dyad, nodes_per_panel }
            }
            QuadPlan::Lattice(r) => QuadPlan::Lattice(r.refined()),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            QuadPlan::Dyadic { panels_per_dyad, nodes_per_panel } => {
                format!("dyadic-gl panels={panels_per_dyad} nodes={nodes_per_panel}")
            }
            QuadPlan::Lattice(r) => format!(
                "{} panels={} nodes={}",
                if r.exact { "lattice-exact" } else { "lattice-dyadic" },
                r.sub_panels,
                r.nodes_per_panel
            ),
        }
    }

    /// Rule for the dyadic piece `C_j`, `j >= 2`, on `[0, t_max(j)]`.
    pub fn for_level(&self, grid: &GridSpec, params: &ExponentParams, j: u32) -> Result<Quadrature> {
        let hi = t_max_for_level(j);
        match self {
            QuadPlan::Dyadic { panels_per_dyad, nodes_per_panel } => {
                build_t_quadrature(j, params, *panels_per_dyad, *nodes_per_panel)
            }
            QuadPlan::Lattice(rule) => {
                let p = PartitionFamily;
                let scale = (j as f64).exp2();
                let mut br = t_breaks(grid, hi, rule.exact);
                if rule.exact {
                    br = br.merge(b_breaks(grid, hi, |r| p.psi(scale * (1.0 - r)) != 0.0));
                }
                build_lattice_t_quadrature(0.0, hi, &br, 2.0 * params.nu + 1.0, rule)
            }
        }
    }

    /// Rule on an arbitrary interval `[lo, hi]` for `t^weight_exp`-weighted
    /// integrals of `T_t` (`t_symbols`) and/or `B_{j,t}` (`b_level`) outputs.
    pub fn for_interval(
        &self,
        grid: &GridSpec,
        lo: f64,
        hi: f64,
        weight_exp: f64,
        t_symbols: bool,
        b_level: Option<u32>,
    ) -> Result<Quadrature> {
        let rule = match self {
            QuadPlan::Lattice(r) => *r,
            QuadPlan::Dyadic { panels_per_dyad, nodes_per_panel } => {
                LatticeRule { sub_panels: *panels_per_dyad, nodes_per_panel: *nodes_per_panel, exact: false }
            }
        };
        let mut br = if t_symbols { t_breaks(grid, hi, rule.exact) } else { LatticeBreaks::default() };
        if let (Some(j), true) = (b_level, rule.exact) {
            let p = PartitionFamily;
            let scale = (j as f64).exp2();
            br = br.merge(b_breaks(grid, hi, |r| p.psi(scale * (1.0 - r)) != 0.0));
        }
        build_lattice_t_quadrature(lo, hi, &br, weight_exp, &rule)
    }
}

/// Gauss–Jacobi nodes and weights on `[-1, 1]` for the weight `(1 + x)^beta`,
/// cached per `(degree, beta)`. Odd degrees are rounded up: the upstream
/// generator pins the middle node of odd rules at 0, which is only right for
/// symmetric weights.
pub fn gauss_jacobi(degree: usize, beta: f64) -> Arc<Vec<(f64, f64)>> {
    type Cache = Mutex<HashMap<(usize, u64), Arc<Vec<(f64, f64)>>>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry((degree, beta.to_bits()))
        .or_insert_with(|| {
            let d = NonZeroUsize::new(degree + degree % 2).expect("degree must be positive");
            let a = FiniteAboveNegOneF64::new(0.0).expect("zero is above -1");
            let b = FiniteAboveNegOneF64::new(beta).expect("Jacobi exponent must exceed -1");
            Arc::new(GaussJacobi::new(d, a, b).as_node_weight_pairs().to_vec())
        })
        .clone()
}

/// Which side of its singular point a power factor lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PowerSide {
    /// `(u - a)_+^e`
    Rising,
    /// `(a - u)_+^e`
    Falling,
}

/// Product-integration rule in `u = t^2` for the factorized bilinear pieces.
///
/// In `u` each frequency pair contributes `(u - a)_+^nu (b - u)_+^(mu-1) du/2`
/// times factors constant in `u`. Each cell carries Gauss–Legendre nodes; a
/// power factor is replaced on every cell by the coefficients of its `L^2`
/// projection onto polynomials, taken from exact moments when the singular
/// point lies in or next to the cell and from point values otherwise. Because
/// the Gram matrix of the Lagrange basis at Gauss nodes is diagonal, the rule
/// stays a sum of products over nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductRule {
    /// Cells `[lo, hi]` in increasing order.
    pub cells: Vec<(f64, f64)>,
    pub nodes_per_cell: usize,
    /// Nodes in `u`, cell-major.
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ProductRule {
    /// Cells on `[0, top]`: dyadic cells `[top 2^-(k+1), top 2^-k]` down to
    /// `floor`, then `[0, floor]`, further cut at every point of `extra`
    /// inside `(0, top)`; each resulting segment is split into `sub_panels`
    /// equal parts.
    pub fn dyadic(
        top: f64,
        floor: f64,
        extra: &[f64],
        sub_panels: usize,
        nodes_per_cell: usize,
    ) -> Result<ProductRule> {
        if !(top > 0.0 && floor > 0.0 && floor < top) {
            return Err(Error::InvalidParameter(format!("need 0 < floor < top, got floor = {floor}, top = {top}")));
        }
        if sub_panels == 0 || nodes_per_cell == 0 {
            return Err(Error::InvalidParameter("panel counts must be positive".into()));
        }
        let mut edges = vec![0.0, top];
        let mut k = 0;
        loop {
            let lo = top * (-(k as f64) - 1.0).exp2();
            edges.push(lo);
            if lo <= floor * (1.0 + 1e-12) {
                break;
            }
            k += 1;
        }
        edges.extend(extra.iter().copied().filter(|&x| x > 0.0 && x < top));
        let edges = dedup_sorted(edges);
        let mut cells = Vec::with_capacity(edges.len() * sub_panels);
        for w in edges.windows(2) {
            let step = (w[1] - w[0]) / sub_panels as f64;
            for s in 0..sub_panels {
                let hi = if s + 1 == sub_panels { w[1] } else { w[0] + (s + 1) as f64 * step };
                cells.push((w[0] + s as f64 * step, hi));
            }
        }
        let gl = gauss_legendre(nodes_per_cell);
        let mut nodes = Vec::with_capacity(cells.len() * nodes_per_cell);
        let mut weights = Vec::with_capacity(cells.len() * nodes_per_cell);
        for &(lo, hi) in &cells {
            let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            for &(x, w) in gl.iter() {
                nodes.push(c + h * x);
                weights.push(h * w);
            }
        }
        Ok(ProductRule { cells, nodes_per_cell, nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn top(&self) -> f64 {
        self.cells.last().map_or(0.0, |c| c.1)
    }

    /// Projection coefficients, one per node of `cell`, of `(u - a)_+^e` or
    /// `(a - u)_+^e`. Writes zeros where the factor vanishes on the cell.
    pub fn coefficients(&self, cell: usize, a: f64, e: f64, side: PowerSide, out: &mut [f64]) {
        let p = self.nodes_per_cell;
        let (lo, hi) = self.cells[cell];
        let w = hi - lo;
        let nodes = &self.nodes[cell * p..(cell + 1) * p];
        let weights = &self.weights[cell * p..(cell + 1) * p];
        let inactive = match side {
            PowerSide::Rising => a >= hi,
            PowerSide::Falling => a <= lo,
        };
        if inactive {
            out.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        let far = match side {
            PowerSide::Rising => a < lo - w,
            PowerSide::Falling => a > hi + w,
        };
        if far {
            for (o, &u) in out.iter_mut().zip(nodes) {
                let d = match side {
                    PowerSide::Rising => u - a,
                    PowerSide::Falling => a - u,
                };
                *o = d.powf(e);
            }
            return;
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        let gj = gauss_jacobi(p, e);
        let (c, h) = (0.5 * (lo + hi), 0.5 * w);
        let gl = gauss_legendre(p);
        let mut basis = vec![0.0; p];
        // Integral of the power times each Lagrange basis over [a, b] (or [b, a]).
        let mut add = |b: f64, sign: f64, out: &mut [f64]| {
            let len = (b - a).abs();
            let scale = sign * (0.5 * len).powf(e + 1.0);
            for &(x, wx) in gj.iter() {
                let u = match side {
                    PowerSide::Rising => a + 0.5 * len * (1.0 + x),
                    PowerSide::Falling => a - 0.5 * len * (1.0 + x),
                };
                lagrange_at_gauss((u - c) / h, &gl, &mut basis);
                for (o, l) in out.iter_mut().zip(&basis) {
                    *o += scale * wx * l;
                }
            }
        };
        match side {
            PowerSide::Rising => {
                add(hi, 1.0, out);
                if a < lo {
                    add(lo, -1.0, out);
                }
            }
            PowerSide::Falling => {
                add(lo, 1.0, out);
                if a > hi {
                    add(hi, -1.0, out);
                }
            }
        }
        for (o, &wk) in out.iter_mut().zip(weights) {
            *o /= wk;
        }
    }
}

/// Lagrange basis at the Gauss–Legendre nodes of `[-1, 1]`, evaluated at `x`.
fn lagrange_at_gauss(x: f64, gl: &[(f64, f64)], out: &mut [f64]) {
    for (k, o) in out.iter_mut().enumerate() {
        let xk = gl[k].0;
        let mut v = 1.0;
        for (m, &(xm, _)) in gl.iter().enumerate() {
            if m != k {
                v *= (x - xm) / (xk - xm);
            }
        }
        *o = v;
    }
}

/// Refinement parameters of [`ProductRule`]s for the bilinear pieces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProductPlan {
    /// Equal sub-cells per segment; doubling it halves the cell size.
    pub sub_panels: usize,
    pub nodes_per_cell: usize,
    /// Also cut cells at every lattice singular point `r` and `1 - r`,
    /// `r = k1^2/k2^2` (small grids only).
    pub exact: bool,
}

/// Dyadic cells kept below the smallest `u`-range top.
pub const PRODUCT_DEPTH: u32 = 6;

/// Largest grid for which [`ProductPlan::auto`] cuts at lattice points.
pub const EXACT_GRID_LIMIT: usize = 64;

impl ProductPlan {
    pub fn auto(grid: &GridSpec) -> ProductPlan {
        ProductPlan { sub_panels: 1, nodes_per_cell: 4, exact: grid.n() <= EXACT_GRID_LIMIT }
    }

    pub fn refined(&self) -> ProductPlan {
        ProductPlan { sub_panels: 2 * self.sub_panels, ..*self }
    }

    pub fn describe(&self) -> String {
        format!(
            "{} cells={} nodes={}",
            if self.exact { "product-exact" } else { "product-dyadic" },
            self.sub_panels,
            self.nodes_per_cell
        )
    }

    fn extra(&self, grid: &GridSpec) -> Vec<f64> {
        if !self.exact {
            return Vec::new();
        }
        let half = (grid.n() / 2) as i64;
        let mut out = Vec::new();
        for k2 in phi_rows(grid) {
            for k1 in 0..=half {
                let r = (k1 * k1) as f64 / (k2 * k2) as f64;
                if r >= 1.0 {
                    break;
                }
                out.push(r);
                out.push(1.0 - r);
            }
        }
        out
    }

    /// Rule covering `[0, t_max(j)^2]` for every `j` in `levels`, with cell
    /// edges at each `t_max(j)^2`.
    pub fn for_levels(&self, grid: &GridSpec, levels: &[u32]) -> Result<ProductRule> {
        let (lo, hi) = match (levels.iter().min(), levels.iter().max()) {
            (Some(&a), Some(&b)) if a >= 1 => (a, b),
            _ => return Err(Error::InvalidParameter("levels must be nonempty and >= 1".into())),
        };
        let top = (1.0 - lo as f64).exp2();
        let floor = (1.0 - hi as f64 - PRODUCT_DEPTH as f64).exp2();
        ProductRule::dyadic(top, floor, &self.extra(grid), self.sub_panels, self.nodes_per_cell)
    }

    /// Rule on `[0, 15/16]` for the `psi12` piece of the `j = 1` symbol.
    pub fn for_tilde(&self, grid: &GridSpec) -> Result<ProductRule> {
        let top = 15.0 / 16.0;
        let floor = top * (-(PRODUCT_DEPTH as f64)).exp2();
        ProductRule::dyadic(top, floor, &self.extra(grid), self.sub_panels, self.nodes_per_cell)
    }
}
