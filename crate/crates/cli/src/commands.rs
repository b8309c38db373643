use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use conelab::bumps::{partition_deviations, partition_valid_limit, verify_partition_on};
use conelab::geometry::{label_lattice, sectors, trapezoid_family};
use conelab::harness::*;
use conelab::io::{load_field, save_field};
use conelab::maximal::{directional_maximal, kakeya, sector_maximal, strong_maximal};
use conelab::operators::{apply_bilinear_direct, apply_c, apply_c_j_checked, relative_l2};
use conelab::quadrature::ProductPlan;
use conelab::symbols::{stein_weiss_reconstruct_default, BilinearKind, BilinearSymbolSpec};
use conelab::{ExponentParams, Field, GridSpec, Repr};
use log::info;
use num_complex::Complex64;

use crate::args::*;
use crate::output::{num, opt, Manifest, Table};

/// Whether a command's numerical check held.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

/// Invalid flag combination, reported with the usage exit code.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

pub fn run(command: &Command) -> Result<Outcome> {
    match command {
        Command::PartitionCheck(a) => partition_check(a),
        Command::SteinWeiss(a) => stein_weiss(a),
        Command::Apply(a) => apply(a),
        Command::NormSweep(a) => norm_sweep(a),
        Command::Domination(a) => domination(a),
        Command::Sqfn(a) => sqfn(a),
        Command::Regions(a) => regions(a),
        Command::Maximal(a) => maximal(a),
        Command::WeightedLattice(a) => weighted(a),
        Command::Generate(a) => generate(a),
    }
}

fn grid_or(args: &GridArgs, n: usize, period: f64) -> Result<GridSpec> {
    Ok(GridSpec::new(args.n.unwrap_or(n), args.period.unwrap_or(period))?)
}

fn partition_check(a: &PartitionArgs) -> Result<Outcome> {
    let t_hi = a.t_max.unwrap_or_else(|| partition_valid_limit(a.levels));
    let worst = verify_partition_on(a.levels, a.samples, t_hi)?;
    let manifest = Manifest::new("partition-check").with("J", a.levels).with("t_max", t_hi);
    let mut table = Table::create(a.out.as_deref(), &manifest, &["t", "deviation"])?;
    for (t, d) in partition_deviations(a.levels, a.samples, t_hi) {
        table.row([num(t), num(d)])?;
    }
    table.finish(&[format!("max_deviation={worst:?}")])?;
    eprintln!("partition-check: max deviation {worst:e} on [0, {t_hi}]");
    Ok(if worst <= 1e-10 { Outcome::Pass } else { Outcome::Fail })
}

fn stein_weiss(a: &SteinWeissArgs) -> Result<Outcome> {
    let params = ExponentParams::new(a.lambda, a.mu, a.nu, a.nu + 0.5, a.nu + 0.5)?;
    if a.grid_rm < 2 {
        bail!(usage("--grid-rm must be at least 2"));
    }
    let tol = if a.nu < 0.0 { 1e-6 } else { 1e-8 };
    let manifest = Manifest::new("stein-weiss").with("params", params).with("tolerance", tol);
    let mut table = Table::create(a.out.as_deref(), &manifest, &["R", "m", "reconstructed", "exact", "rel_err"])?;
    let steps = (a.grid_rm - 1) as f64;
    let mut worst: f64 = 0.0;
    for i in 0..a.grid_rm {
        let r = 0.1 + 0.9 * i as f64 / steps;
        for k in 0..a.grid_rm {
            let m = if k + 1 == a.grid_rm { r } else { r * k as f64 / steps };
            let got = stein_weiss_reconstruct_default(r, m, &params)?;
            let exact = (r * r - m * m).powf(params.lambda);
            let err = if exact > 0.0 { (got - exact).abs() / exact } else { (got - exact).abs() };
            worst = worst.max(err);
            table.row([num(r), num(m), num(got), num(exact), num(err)])?;
        }
    }
    table.finish(&[format!("max_rel_err={worst:?}")])?;
    eprintln!("stein-weiss: max relative error {worst:e} (tolerance {tol:e})");
    Ok(if worst <= tol { Outcome::Pass } else { Outcome::Fail })
}

fn exponent_params(lambda: Option<f64>, mu: Option<f64>, nu: Option<f64>) -> Result<ExponentParams> {
    match (lambda, mu, nu) {
        (l, Some(mu), Some(nu)) => {
            let p = ExponentParams::with_split(mu, nu)?;
            if l.is_some_and(|l| (l - p.lambda).abs() > 1e-12) {
                bail!(usage(format!("--lambda must equal --mu + --nu = {}", p.lambda)));
            }
            Ok(p)
        }
        (Some(l), None, None) => Ok(ExponentParams::from_lambda(l)?),
        _ => bail!(usage("give --lambda, or both --mu and --nu")),
    }
}

fn level_kind(j: u32) -> BilinearKind {
    if j == 1 {
        BilinearKind::J1
    } else {
        BilinearKind::Dyadic(j)
    }
}

fn direct_sum(params: &ExponentParams, levels: &[u32], f: &Field, g: &Field) -> Result<Field> {
    let mut acc = Field::zeros(f.grid(), Repr::Space);
    for &j in levels {
        let piece = apply_bilinear_direct(&BilinearSymbolSpec::new(level_kind(j), *params)?, f, g)?;
        acc = acc.combine(Complex64::ONE, &piece, Complex64::ONE)?;
    }
    Ok(acc)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn apply(a: &ApplyArgs) -> Result<Outcome> {
    let params = exponent_params(a.lambda, a.mu, a.nu)?;
    let f = load_field(&a.f).with_context(|| format!("reading {}", a.f.display()))?;
    let g = load_field(&a.g).with_context(|| format!("reading {}", a.g.display()))?;
    if f.grid() != g.grid() {
        bail!(usage("--f and --g live on different grids"));
    }
    let grid = f.grid();
    if a.quad_panels == 0 || a.nodes == 0 {
        bail!(usage("--quad-panels and --nodes must be positive"));
    }
    let plan = ProductPlan { sub_panels: a.quad_panels, nodes_per_cell: a.nodes, ..ProductPlan::auto(&grid) };
    let (result, nodes, cauchy, levels) = match a.spec {
        SpecKind::Dyadic => {
            let rep = apply_c_j_checked(&params, a.j, &f, &g, &plan)?;
            (rep.result, rep.quadrature_nodes_used, rep.cauchy_difference, vec![a.j])
        }
        SpecKind::Full => {
            let coarse = apply_c(&params, &f, &g, a.j, &plan)?;
            let fine = apply_c(&params, &f, &g, a.j, &plan.refined())?;
            let diff = relative_l2(&coarse.result, &fine.result)?;
            (fine.result, fine.quadrature_nodes_used, Some(diff), (1..=a.j).collect())
        }
    };
    save_field(&a.out, &result).with_context(|| format!("writing {}", a.out.display()))?;
    let direct_diff = if a.direct {
        let direct = direct_sum(&params, &levels, &f, &g)?;
        let path = a.direct_out.clone().unwrap_or_else(|| sibling(&a.out, ".direct"));
        save_field(&path, &direct).with_context(|| format!("writing {}", path.display()))?;
        Some(relative_l2(&result, &direct)?)
    } else {
        None
    };
    let manifest = Manifest::new("apply").grid(grid).with("params", params).with("plan", plan.refined().describe());
    let mut table = Table::create(
        a.report.as_deref(),
        &manifest,
        &["spec", "j", "lambda", "nodes_used", "cauchy_difference", "direct_difference"],
    )?;
    let spec = match a.spec {
        SpecKind::Dyadic => "dyadic",
        SpecKind::Full => "full",
    };
    table.row([
        spec.to_string(),
        a.j.to_string(),
        num(params.lambda),
        nodes.to_string(),
        opt(cauchy.map(num)),
        opt(direct_diff.map(num)),
    ])?;
    table.finish(&[])?;
    Ok(Outcome::Pass)
}

fn norm_sweep(a: &NormSweepArgs) -> Result<Outcome> {
    if a.jmin < 2 || a.jmax < a.jmin {
        bail!(usage("need 2 <= --jmin <= --jmax"));
    }
    let period = (a.jmax as f64 + 2.0).exp2();
    let grid = grid_or(&a.grid, 8 * period as usize, period)?;
    let levels: Vec<u32> = (a.jmin..=a.jmax).collect();
    let params = ExponentParams::from_lambda(a.lambda)?;
    let holder = HolderTriple::new(a.p1, a.p2)?;
    let plan = ProductPlan { nodes_per_cell: a.nodes, ..ProductPlan::auto(&grid) };
    let sampler = PairSampler::for_levels(grid, &levels);
    info!("norm-sweep: levels {levels:?} on {grid}, {} trials", a.trials);
    let records = sweep_j(&params, holder, &levels, a.trials, a.seed, &sampler, &plan)?;
    let manifest = Manifest::new("norm-sweep")
        .seed(a.seed)
        .grid(grid)
        .with("lambda", a.lambda)
        .with("holder", format!("{}/{}/{}", holder.p1, holder.p2, holder.p))
        .with("levels", format!("{}..{}", a.jmin, a.jmax))
        .with("plan", plan.describe());
    let mut table = Table::create(a.out.as_deref(), &manifest, &["j", "max_ratio", "trials", "argmax_trial", "discarded"])?;
    for r in &records {
        table.row([
            opt(r.j),
            num(r.max_ratio),
            r.trials.to_string(),
            opt(r.argmax_trial),
            r.discarded.to_string(),
        ])?;
    }
    let fit = match fit_decay(&records) {
        Ok(fit) => format!("fit slope={:?} intercept={:?} r2={:?}", fit.slope, fit.intercept, fit.r_squared),
        Err(e) => format!("fit unavailable: {e}"),
    };
    table.finish(&[fit.clone()])?;
    eprintln!("norm-sweep: {fit}");
    Ok(Outcome::Pass)
}

fn domination(a: &DominationArgs) -> Result<Outcome> {
    let grid = grid_or(&a.grid, 256, 32.0)?;
    let (op, target, variant, default_ts) = match a.op {
        OpKind::T => {
            let ts = (1..=9).map(|k| k as f64 / 10.0).collect();
            (DominationOp::T { nu: a.nu }, FrequencyTarget::Band, MaximalVariant::AlongT, ts)
        }
        OpKind::B => {
            let top = (-2.0 - a.j as f64).exp2().sqrt();
            let op = DominationOp::B { mu: a.mu, j: a.j };
            (op, FrequencyTarget::ConeEdge { j: a.j }, MaximalVariant::Directional(1.0), vec![top / 2.0, top])
        }
    };
    let ts = a.t_grid.clone().unwrap_or(default_ts);
    let functions = TestMix::new(target).draw_many(grid, a.trials, a.seed)?;
    let table_data = check_domination(op, &ts, variant, &functions)?;
    let scale = match a.op {
        OpKind::T => None,
        OpKind::B => Some(((1.0 - a.mu) * a.j as f64).exp2()),
    };
    let manifest = Manifest::new("domination").seed(a.seed).grid(grid).with("op", format!("{op:?}").replace(' ', ""));
    let mut table = Table::create(a.out.as_deref(), &manifest, &["t", "C", "scaled_C", "argmax_function"])?;
    for r in &table_data.rows {
        table.row([num(r.t), num(r.constant), opt(scale.map(|s| num(r.constant / s))), opt(r.argmax_function)])?;
    }
    let spread = format!("spread={}", opt(table_data.spread.map(num)));
    table.finish(std::slice::from_ref(&spread))?;
    eprintln!("domination: {spread}");
    Ok(Outcome::Pass)
}

fn sqfn(a: &SqfnArgs) -> Result<Outcome> {
    let (family, target, grid) = match a.family {
        FamilyKind::Trapezoid => (SqfnFamily::Trapezoid, FrequencyTarget::Strip, grid_or(&a.grid, 256, 32.0)?),
        FamilyKind::Sector => (
            SqfnFamily::Sector { alpha: a.alpha },
            FrequencyTarget::Sector { alpha: a.alpha },
            grid_or(&a.grid, 1024, 128.0)?,
        ),
    };
    let finest = *a.sizes.iter().max().ok_or_else(|| usage("--sizes is empty"))?;
    let mut functions = TestMix::new(target).draw_many(grid, a.functions, a.seed)?;
    functions.extend(family.spread_functions(grid, finest, a.spread, a.seed.wrapping_add(1))?);
    let rows = sqfn_growth(family, &a.sizes, a.p, &functions)?;
    let manifest = Manifest::new("sqfn").seed(a.seed).grid(grid).with("family", format!("{family:?}").replace(' ', ""));
    let mut table = Table::create(a.out.as_deref(), &manifest, &["size", "max_ratio", "step_ratio", "argmax_function"])?;
    for r in &rows {
        table.row([r.size.to_string(), num(r.max_ratio), opt(r.step_ratio.map(num)), opt(r.argmax_function)])?;
    }
    table.finish(&[])?;
    Ok(Outcome::Pass)
}

fn regions(a: &RegionsArgs) -> Result<Outcome> {
    let grid = grid_or(&a.grid, 64, 8.0)?;
    let family = match a.mode {
        FamilyKind::Trapezoid => trapezoid_family(grid, a.ell)?,
        FamilyKind::Sector => sectors(a.alpha, a.count)?,
    };
    let labels = label_lattice(&family, grid)?;
    let manifest = Manifest::new("regions").grid(grid).with("regions", family.len());
    let mut table = Table::create(a.out.as_deref(), &manifest, &["k1", "k2", "xi1", "xi2", "region_id", "region"])?;
    for i in 0..grid.len() {
        if let Some(id) = labels.label(i) {
            let (k1, k2) = grid.wavenumber(i);
            let (x1, x2) = grid.frequency(i);
            let name = family[id as usize].to_string();
            table.row([k1.to_string(), k2.to_string(), num(x1), num(x2), id.to_string(), name])?;
        }
    }
    table.finish(&[])?;
    Ok(Outcome::Pass)
}

fn maximal(a: &MaximalArgs) -> Result<Outcome> {
    let f = load_field(&a.f).with_context(|| format!("reading {}", a.f.display()))?;
    let m = match a.kind {
        MaximalKind::Strong => strong_maximal(&f),
        MaximalKind::Directional => directional_maximal(&f, a.t)?,
        MaximalKind::Kakeya => kakeya(&f, a.a, a.b, a.directions)?,
        MaximalKind::Sector => sector_maximal(&f, a.alpha, a.count)?,
    };
    let grid = f.grid();
    let manifest = Manifest::new("maximal").grid(grid).with("kind", format!("{:?}", a.kind).to_lowercase());
    let mut table = Table::create(a.out.as_deref(), &manifest, &["i1", "i2", "x1", "x2", "value"])?;
    for (i, v) in m.samples.iter().enumerate() {
        let (x1, x2) = grid.position(i);
        table.row([(i / grid.n()).to_string(), (i % grid.n()).to_string(), num(x1), num(x2), num(*v)])?;
    }
    table.finish(&[format!("max={:?}", m.max_value())])?;
    Ok(Outcome::Pass)
}

/// Mix without Gaussian packets, which do not fit the band of small grids.
pub fn lattice_mix() -> TestMix {
    TestMix { weights: [0.0, 0.6, 0.3, 0.1], ..TestMix::new(FrequencyTarget::Band) }
}

fn weighted(a: &WeightedArgs) -> Result<Outcome> {
    let grid = grid_or(&a.grid, 64, 8.0)?;
    let &[w1, w2] = a.rect.as_slice() else {
        bail!(usage("--rect takes two sides"));
    };
    let lattice = RectangleLattice { size: (w1, w2), offset: (0, 0) };
    let rows = check_weighted_lattice(grid, &lattice, &a.s, a.trials, a.seed, &lattice_mix())?;
    let manifest = Manifest::new("weighted-lattice").seed(a.seed).grid(grid).with("rect", format!("{w1}x{w2}"));
    let mut table = Table::create(a.out.as_deref(), &manifest, &["s", "max_ratio", "argmax_trial"])?;
    for r in &rows {
        table.row([num(r.s), num(r.max_ratio), opt(r.argmax_trial)])?;
    }
    table.finish(&[])?;
    Ok(Outcome::Pass)
}

fn generate(a: &GenerateArgs) -> Result<Outcome> {
    let grid = grid_or(&a.grid, 64, 8.0)?;
    let target = match a.target {
        TargetKind::Band => FrequencyTarget::Band,
        TargetKind::Cone => FrequencyTarget::Cone,
        TargetKind::Strip => FrequencyTarget::Strip,
        TargetKind::Sector => FrequencyTarget::Sector { alpha: a.alpha },
        TargetKind::ConeEdge => FrequencyTarget::ConeEdge { j: a.j },
        TargetKind::Axis => FrequencyTarget::Axis { j: a.j },
    };
    let f = TestMix::new(target).draw(grid, &mut trial_rng(a.seed, 0))?;
    save_field(&a.out, &f).with_context(|| format!("writing {}", a.out.display()))?;
    eprintln!("generate: wrote {} ({grid})", a.out.display());
    Ok(Outcome::Pass)
}
