//! One function per command; each returns a uniform [`Outcome`].

use afree::convexity::{aqc_test, garding_adversarial_check, garding_verify, make_density, AqcBudget, EnergyDensity};
use afree::dynamics::{dissipation_check, make_system_from_spec, weak_strong_runs, ConservationSystem};
use afree::opsym::sampling::sphere_samples;
use afree::opsym::{constant_rank_check_seeded, make_operator, potential_compat_check, symbol, wave_cone_sample, DiffOp};
use afree::projection::{
    afree_residual, decompose_sequence_with, fm_constant_fit, primitive, primitive_bounds_report,
    project_afree_with_mean,
};
use afree::report::{num, Table, Tabular};
use afree::spectral::io::{load_field, FieldData};
use afree::spectral::{apply_operator, random_afree_field, random_band_limited_field, Grid, PeriodicField};
use afree::statics::minimality_check;
use anyhow::{anyhow, bail, Context};
use serde_json::{json, Value};

use crate::spec::{Command, FieldOptions, FieldSource, RunSpec};

pub struct Outcome {
    /// A checked property failed.
    pub violation: bool,
    pub result: Value,
    pub table: Table,
    pub summary: Vec<String>,
    pub fields: Vec<(String, PeriodicField)>,
}

impl Outcome {
    fn new(violation: bool, result: Value, table: Table) -> Self {
        Self {
            violation,
            result,
            table,
            summary: Vec::new(),
            fields: Vec::new(),
        }
    }

    fn line(mut self, s: impl Into<String>) -> Self {
        self.summary.push(s.into());
        self
    }
}

pub fn run(spec: &RunSpec) -> anyhow::Result<Outcome> {
    match spec.command {
        Command::Symbol => symbol_cmd(spec),
        Command::Wavecone => wavecone_cmd(spec),
        Command::Project => project_cmd(spec),
        Command::Primitive => primitive_cmd(spec),
        Command::Decompose => decompose_cmd(spec),
        Command::Garding => garding_cmd(spec),
        Command::Aqc => aqc_cmd(spec),
        Command::Dynamics => dynamics_cmd(spec),
        Command::Statics => statics_cmd(spec),
    }
}

fn operator(spec: &RunSpec) -> anyhow::Result<DiffOp> {
    let o = spec.operator.as_ref().ok_or_else(|| anyhow!("command needs `operator`"))?;
    Ok(make_operator(o)?)
}

fn grid(spec: &RunSpec) -> anyhow::Result<Grid> {
    let g = spec.grid.ok_or_else(|| anyhow!("command needs `grid`"))?;
    Ok(Grid::new(g.d, g.n)?)
}

fn density(spec: &RunSpec) -> anyhow::Result<EnergyDensity> {
    let d = spec.density.as_ref().ok_or_else(|| anyhow!("command needs `density`"))?;
    Ok(make_density(d)?)
}

/// Materialises a field of fiber `fiber`; `op` is the constraint used by
/// `random_afree`.
fn field(src: &FieldSource, grid: Grid, fiber: usize, op: Option<&DiffOp>, seed: u64) -> anyhow::Result<PeriodicField> {
    let f = match src {
        FieldSource::Zero {} => PeriodicField::zeros(grid, fiber),
        FieldSource::Constant { value } => {
            if value.len() != fiber {
                bail!("constant field has {} components, expected {fiber}", value.len());
            }
            PeriodicField::from_fn(grid, fiber, |_, out| out.copy_from_slice(value))
        }
        FieldSource::Random { band, amplitude, seed_offset } => {
            random_band_limited_field(grid, fiber, *band, seed.wrapping_add(*seed_offset), *amplitude)?
        }
        FieldSource::RandomAfree { band, amplitude, seed_offset } => match op {
            Some(op) => random_afree_field(op, grid, *band, seed.wrapping_add(*seed_offset), *amplitude)?,
            None => random_band_limited_field(grid, fiber, *band, seed.wrapping_add(*seed_offset), *amplitude)?,
        },
        FieldSource::File { path } => match load_field(path).with_context(|| format!("reading {}", path.display()))? {
            FieldData::Samples(f) => f,
            FieldData::Coeffs(_) => bail!("{} holds coefficients; expected samples", path.display()),
        },
    };
    if f.grid() != grid || f.fiber() != fiber {
        bail!(
            "field is R^{} on n = {}, d = {}; expected R^{fiber} on n = {}, d = {}",
            f.fiber(),
            f.grid().n(),
            f.grid().dim(),
            grid.n(),
            grid.dim()
        );
    }
    Ok(f)
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(";")
}

fn symbol_cmd(spec: &RunSpec) -> anyhow::Result<Outcome> {
    let op = operator(spec)?;
    let opts = spec.symbol.clone().unwrap_or_default();
    let rank = constant_rank_check_seeded(&op, opts.n_samples, opts.tol, spec.seed)?;
    let compat = match op.potential() {
        Some(b) => Some(potential_compat_check(&op, &b, opts.n_samples, opts.tol)?),
        None => None,
    };
    let mut table = Table::new(["xi", "rank", "singular_values"]);
    for xi in opts.xis.iter().chain(&rank.witness_xis) {
        let s = symbol(&op, xi)?;
        table.push(vec![fmt_vec(xi), s.rank.to_string(), fmt_vec(&s.singular_values)]);
    }
    let violation = !rank.is_constant_rank || compat.as_ref().is_some_and(|c| !c.compatible);
    let mut out = Outcome::new(violation, json!({"operator": op.name(), "rank": rank, "potential_compat": compat}), table)
        .line(format!("operator {}", op.name()))
        .line(format!(
            "rank {}..{} over {} directions: {}",
            rank.min_rank,
            rank.max_rank,
            rank.sample_count,
            if rank.is_constant_rank { "constant" } else { "NOT constant" }
        ));
    if let Some(c) = &compat {
        out = out.line(format!(
            "potential: max |A B| residual {:e}, rank defects {}",
            c.max_product_residual, c.rank_defect_count
        ));
    }
    Ok(out)
}

fn wavecone_cmd(spec: &RunSpec) -> anyhow::Result<Outcome> {
    let op = operator(spec)?;
    let opts = spec.wavecone.clone().unwrap_or_default();
    let xis = sphere_samples(op.dim(), opts.n_dirs, spec.seed);
    let cone = wave_cone_sample(&op, &xis)?;
    let mut table = Table::new(["xi", "kernel_dim", "kernel_basis"]);
    let mut dims = Vec::new();
    for (xi, k) in &cone {
        dims.push(k.ncols());
        let basis: Vec<f64> = k.transpose().iter().cloned().collect();
        table.push(vec![fmt_vec(xi), k.ncols().to_string(), fmt_vec(&basis)]);
    }
    let (lo, hi) = (dims.iter().min().copied().unwrap_or(0), dims.iter().max().copied().unwrap_or(0));
    Ok(Outcome::new(false, json!({"operator": op.name(), "n_dirs": cone.len(), "min_kernel_dim": lo, "max_kernel_dim": hi}), table)
        .line(format!("operator {}: kernel dimension {lo}..{hi} over {} directions", op.name(), cone.len())))
}

fn field_opts(o: &Option<FieldOptions>, fallback: FieldSource) -> FieldOptions {
    o.clone().unwrap_or(FieldOptions {
        input: fallback,
        save_field: false,
    })
}

fn project_cmd(spec: &RunSpec) -> anyhow::Result<Outcome> {
    let op = operator(spec)?;
    let g = grid(spec)?;
    let opts = field_opts(&spec.project, FieldSource::Random { band: g.half(), amplitude: 1.0, seed_offset: 0 });
    let v = field(&opts.input, g, op.source_dim(), Some(&op), spec.seed)?;
    let (pv, mean) = project_afree_with_mean(&op, &v)?;
    let fm = fm_constant_fit(&op, std::slice::from_ref(&v))?;
    let residual = afree_residual(&op, &pv)?;
    let idem = project_afree_with_mean(&op, &pv)?.0.sub(&pv)?.l2_norm();
    let row = &fm.rows[0];
    let mut table = Table::new(["input_l2", "defect", "constraint", "residual_after", "idempotence"]);
    table.push_nums(&[v.l2_norm(), row.defect, row.constraint, residual, idem]);
    let violation = residual > spec.tolerances.afree || idem > spec.tolerances.afree * v.l2_norm().max(1e-300);
    let mut out = Outcome::new(
        violation,
        json!({"operator": op.name(), "removed_mean": mean, "defect": row.defect, "constraint": row.constraint,
               "residual_after": residual, "idempotence": idem}),
        table,
    )
    .line(format!("|v - Pv| = {:e}, |Av|_(-k) = {:e}", row.defect, row.constraint))
    .line(format!("A-free residual after projection {residual:e}"));
    if opts.save_field {
        out.fields.push(("projected.field".into(), pv));
    }
    Ok(out)
}

fn primitive_cmd(spec: &RunSpec) -> anyhow::Result<Outcome> {
    let op = operator(spec)?;
    let b = op.potential().ok_or_else(|| anyhow!("operator {} has no shipped potential", op.name()))?;
    let g = grid(spec)?;
    let opts = field_opts(&spec.primitive, FieldSource::RandomAfree { band: g.half(), amplitude: 1.0, seed_offset: 0 });
    let psi = field(&opts.input, g, op.source_dim(), Some(&op), spec.seed)?;
    let pair = primitive(&b, &psi)?;
    let round_trip = apply_operator(&b, &pair.phi)?.sub(&psi)?.l2_norm() / psi.l2_norm().max(1e-300);
    let mut table = Table::new(["p", "c_ii", "c_iii", "c_iv"]);
    let mut bounds = Vec::new();
    for p in [2.0, 4.0] {
        let r = primitive_bounds_report(&pair, p)?;
        table.push_nums(&[p, r.c_ii, r.c_iii, r.c_iv]);
        bounds.push(json!({"p": p, "bounds": r}));
    }
    let mut out = Outcome::new(
        round_trip > spec.tolerances.afree,
        json!({"constraint": op.name(), "potential": b.name(), "round_trip": round_trip, "bounds": bounds}),
        table,
    )
    .line(format!("potential {} of {}; |B phi - psi| / |psi| = {round_trip:e}", b.name(), op.name()));
    if opts.save_field {
        out.fields.push(("primitive.field".into(), pair.phi));
    }
    Ok(out)
}

fn decompose_cmd(spec: &RunSpec) -> anyhow::Result<Outcome> {
    let op = operator(spec)?;
    let b = op.potential().ok_or_else(|| anyhow!("operator {} has no shipped potential", op.name()))?;
    let g = grid(spec)?;
    let d = spec.decompose.as_ref().ok_or_else(|| anyhow!("command needs `decompose`"))?;
    let fields: Vec<PeriodicField> = d
        .sequence
        .iter()
        .enumerate()
        .map(|(j, s)| field(s, g, op.source_dim(), Some(&op), spec.seed.wrapping_add(j as u64)))
        .collect::<anyhow::Result<_>>()?;
    let r = decompose_sequence_with(&op, &b, &fields, &d.k_schedule, d.p, &d.options)?;
    let worst = r.diagnostics.iter().map(|x| x.additivity_residual).fold(0.0, f64::max);
    Ok(Outcome::new(
        worst > spec.tolerances.afree,
        json!({"diagnostics": r.diagnostics, "sup_tail_mass": r.sup_tail_mass(), "t_grid": r.options.t_grid}),
        r.table(),
    )
    .line(format!("{} fields split; worst additivity residual {worst:e}", fields.len())))
}

fn garding_cmd(spec: &RunSpec) -> anyhow::Result<Outcome> {
    let op = operator(spec)?;
    let g = grid(spec)?;
    let w = density(spec)?;
    let opts = spec.garding.clone().unwrap_or_default();
    if opts.bands.is_empty() || opts.amplitudes.is_empty() {
        bail!("garding needs at least one band and one amplitude");
    }
    let ubar = field(&opts.background, g, w.dim(), Some(&op), spec.seed ^ 0xb6)?;
    let fields: Vec<PeriodicField> = (0..opts.n_fields)
        .map(|i| {
            let band = opts.bands[i % opts.bands.len()];
            let amp = opts.amplitudes[(i / opts.bands.len()) % opts.amplitudes.len()];
            random_afree_field(&op, g, band, spec.seed.wrapping_add(i as u64), amp)
        })
        .collect::<afree::Result<_>>()?;
    let p = opts.p.unwrap_or(w.p);
    let r = garding_verify(&w, &ubar, &op, &fields, p)?;
    let mut out = Outcome::new(false, Value::Null, r.table())
        .line(format!("density {}, p = {p}", w.name))
        .line(format!("C0 = {}, C1 = {}", num(r.c0_fit), num(r.c1_fit)));
    let adv = match &opts.adversarial {
        Some(budget) => {
            let budget = afree::convexity::GardingSearchBudget { seed: spec.seed, ..budget.clone() };
            let a = garding_adversarial_check(&w, &ubar, &op, r.c0_fit, r.c1_fit, p, &budget)?;
            out.violation = a.violated;
            out = out.line(format!(
                "adversarial search: max ratio {} over {} steps{}",
                num(a.max_ratio),
                a.steps_taken,
                if a.violated { ", VIOLATED" } else { "" }
            ));
            Some(a)
        }
        None => None,
    };
    out.result = json!({"garding": r, "adversarial": adv});
    Ok(out)
}

fn aqc_cmd(spec: &RunSpec) -> anyhow::Result<Outcome> {
    let op = operator(spec)?;
    let w = density(spec)?;
    let a = spec.aqc.as_ref().ok_or_else(|| anyhow!("command needs `aqc`"))?;
    let budget = AqcBudget { seed: spec.seed, ..a.budget.clone() };
    let r = aqc_test(&w, &a.lambda, &op, &budget)?;
    let mut out = Outcome::new(r.violated, serde_json::to_value(&r)?, r.table())
        .line(format!("density {} at lambda = [{}]", w.name, fmt_vec(&a.lambda)))
        .line(format!(
            "min gap {}{}",
            num(r.min_gap),
            if r.violated { ": quasiconvexity certificate found" } else { "" }
        ));
    if let Some(f) = r.certificate_field.clone() {
        out.fields.push(("certificate.field".into(), f));
    }
    Ok(out)
}

fn system(spec: &RunSpec) -> anyhow::Result<ConservationSystem> {
    let s = spec.system.as_ref().ok_or_else(|| anyhow!("command needs `system`"))?;
    Ok(make_system_from_spec(s)?)
}

fn dynamics_cmd(spec: &RunSpec) -> anyhow::Result<Outcome> {
    let sys = system(spec)?;
    let g = grid(spec)?;
    let d = spec.dynamics.as_ref().ok_or_else(|| anyhow!("command needs `dynamics`"))?;
    let n = sys.state_dim();
    let ubar = field(&d.background, g, n, sys.involution.as_ref(), spec.seed)?;
    let pert = field(&d.perturbation, g, n, sys.involution.as_ref(), spec.seed.wrapping_add(1))?;
    let u0 = ubar.add(&pert)?;
    let runs = weak_strong_runs(&sys, &u0, &ubar, d.dt, d.t_final, d.viscosity_weak, d.stride)?;
    if runs.report.blew_up {
        bail!(
            "numerical blow-up: trajectory truncated at t = {} of {}",
            num(runs.weak.t_final().min(runs.strong.t_final())),
            num(d.t_final)
        );
    }
    let mut windows = Vec::new();
    for [t, eps] in &d.dissipation_windows {
        windows.push(dissipation_check(&runs.weak, *t, *eps)?);
    }
    let violations = runs.report.bound_violations();
    let dissipation_bad = d.viscosity_weak > 0.0 && windows.iter().any(|w| w.margin < -spec.tolerances.dissipation);
    let mut out = Outcome::new(
        violations > 0 || dissipation_bad,
        json!({"stability": runs.report, "dissipation": windows, "cfl_ratio": runs.weak.cfl_ratio, "dt_used": runs.weak.dt}),
        runs.report.table(),
    )
    .line(format!("system {}, dt = {}, T = {}", sys.name, num(runs.weak.dt), num(d.t_final)))
    .line(format!(
        "Gronwall fit C1 = {}, C2 = {}{}",
        num(runs.report.c1),
        num(runs.report.c2),
        if runs.report.fit_degenerate { " (degenerate)" } else { "" }
    ));
    for w in &windows {
        out = out.line(format!("dissipation margin on [{}, {}]: {}", num(w.t), num(w.t + w.eps), num(w.margin)));
    }
    if d.save_fields {
        let last = |t: &afree::dynamics::Trajectory| t.states.last().cloned().expect("trajectory has a state");
        out.fields.push(("strong_initial.field".into(), ubar));
        out.fields.push(("weak_initial.field".into(), u0));
        out.fields.push(("strong_final.field".into(), last(&runs.strong)));
        out.fields.push(("weak_final.field".into(), last(&runs.weak)));
    }
    Ok(out)
}

fn statics_cmd(spec: &RunSpec) -> anyhow::Result<Outcome> {
    let op = operator(spec)?;
    let g = grid(spec)?;
    let w = density(spec)?;
    let s = spec.statics.as_ref().ok_or_else(|| anyhow!("command needs `statics`"))?;
    let ubar = field(&s.background, g, w.dim(), Some(&op), spec.seed ^ 0x5a)?;
    let mut opts = s.options.clone();
    opts.seed = spec.seed;
    opts.aqc.seed = spec.seed;
    opts.second_variation.seed = spec.seed;
    let r = minimality_check(&w, &ubar, &op, &opts)?;
    let mut out = Outcome::new(!r.pass, serde_json::to_value(&r)?, r.table())
        .line(format!("density {}", w.name))
        .line(format!(
            "EL residual {:e}, second variation {}, epsilon0 {}",
            r.el_residual,
            num(r.second_variation_min),
            num(r.epsilon0_used)
        ))
        .line(format!("C_fit = {}", num(r.c_fit)));
    for d in &r.diagnostics {
        out = out.line(format!("diagnostic: {d}"));
    }
    Ok(out)
}
