use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::density::{tilde_shift, v_squared, v_squared_gradient, EnergyDensity};
use super::excess::excess;
use crate::opsym::linalg::full_svd;
use crate::opsym::sampling::DEFAULT_SEED;
use crate::opsym::{DiffOp, RANK_TOL};
use crate::projection::afree_residual;
use crate::report::{num, Table, Tabular};
use crate::spectral::{
    apply_operator, check_zero_mean, inverse_transform, mixed_negative_norm, random_afree_field_with,
    sobolev_multiplier, sobolev_norm, transform, Grid, PeriodicField, ProjectorTable,
};
use crate::{Error, Result};

const AFREE_TOL: f64 = 1e-8;
/// Relative slack before a row counts as violating a fitted pair.
pub const VIOLATION_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GardingRow {
    pub field_id: usize,
    /// `int |V(psi)|^2`.
    pub lhs: f64,
    /// `int W(U + psi | U)`.
    pub excess: f64,
    /// `|psi|^2_{W^{-1,(2,p)}}`.
    pub penalty: f64,
    /// `|psi|_{W^{-1,p}}`.
    pub wnorm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GardingReport {
    pub c0_fit: f64,
    pub c1_fit: f64,
    pub worst_ratio_field_id: usize,
    /// `lhs / (c0 excess + c1 penalty)` at the worst row.
    pub worst_ratio: f64,
    pub n_fields: usize,
    /// Smallest `|psi|_{W^{-1,p}}` among rows that need the penalty term;
    /// `None` when the excess alone majorizes every row.
    pub epsilon0_estimate: Option<f64>,
    /// `sup |U|`.
    pub k: f64,
    pub p: f64,
    pub rows: Vec<GardingRow>,
}

impl GardingReport {
    pub fn majorant(&self, row: &GardingRow) -> f64 {
        self.c0_fit * row.excess + self.c1_fit * row.penalty
    }
}

impl Tabular for GardingReport {
    fn table(&self) -> Table {
        let mut t = Table::new(["field_id", "lhs", "excess", "penalty", "wnorm", "majorant"]);
        for r in &self.rows {
            t.push(vec![
                r.field_id.to_string(),
                num(r.lhs),
                num(r.excess),
                num(r.penalty),
                num(r.wnorm),
                num(self.majorant(r)),
            ]);
        }
        t
    }
}

fn check_background(w: &EnergyDensity, ubar: &PeriodicField, field: &PeriodicField) -> Result<()> {
    if ubar.fiber() != w.dim() || field.fiber() != w.dim() || ubar.grid() != field.grid() {
        return Err(Error::DimensionMismatch(format!(
            "density on R^{}, background R^{} on {:?}, field R^{} on {:?}",
            w.dim(),
            ubar.fiber(),
            ubar.grid(),
            field.fiber(),
            field.grid()
        )));
    }
    Ok(())
}

/// Grid mean of `W(U(x) + psi(x) | U(x))`.
pub fn excess_integral_field(w: &EnergyDensity, ubar: &PeriodicField, psi: &PeriodicField) -> Result<f64> {
    check_background(w, ubar, psi)?;
    let s: f64 = ubar.points().zip(psi.points()).map(|(a, z)| excess(w, a, z)).sum();
    if !s.is_finite() {
        return Err(Error::NonFinite("excess integral".into()));
    }
    Ok(s / psi.grid().len() as f64)
}

pub fn garding_row(
    w: &EnergyDensity,
    ubar: &PeriodicField,
    psi: &PeriodicField,
    p: f64,
    field_id: usize,
) -> Result<GardingRow> {
    check_zero_mean(psi)?;
    let z: f64 = psi.points().map(|v| v_squared(v, p)).sum();
    let pen = mixed_negative_norm(psi, p)?;
    Ok(GardingRow {
        field_id,
        lhs: z / psi.grid().len() as f64,
        excess: excess_integral_field(w, ubar, psi)?,
        penalty: pen * pen,
        wnorm: sobolev_norm(psi, -1, p)?,
    })
}

/// Fits `lhs <= C0 excess + C1 penalty` over the rows.
///
/// `C1` is minimised first and `C0` is the least value attaining it. With
/// `a = lhs / penalty`, `b = excess / penalty` the smallest feasible `C1` at
/// a given `C0` is `max(0, max_i a_i - b_i C0)`, a convex piecewise-linear
/// function whose upper envelope is built exactly. Rows within a relative
/// `VIOLATION_TOL` of the `C0` term are treated as satisfied by it.
pub fn fit_garding_constants(rows: &[GardingRow]) -> (f64, f64) {
    let mut lines: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    for r in rows {
        if r.penalty > 0.0 {
            lines.push((-r.excess / r.penalty, r.lhs / r.penalty));
        } else if r.lhs > 0.0 && r.excess > 0.0 {
            // penalty-free row: only C0 can absorb it
            lines.push((f64::NEG_INFINITY, r.lhs / r.excess));
        }
    }
    // rows with zero penalty force C0 >= lhs / excess
    let c0_floor = lines
        .iter()
        .filter(|l| l.0 == f64::NEG_INFINITY)
        .map(|l| l.1)
        .fold(0.0, f64::max);
    lines.retain(|l| l.0.is_finite());
    let hull = upper_envelope(lines);
    let mut c0 = 0.0;
    for (i, &(slope, _)) in hull.iter().enumerate() {
        if slope >= 0.0 {
            if i > 0 {
                c0 = intersect(hull[i - 1], hull[i]).max(0.0);
            }
            break;
        }
    }
    let c0 = c0.max(c0_floor);
    let c1 = rows
        .iter()
        .filter(|r| r.penalty > 0.0)
        .filter(|r| r.lhs > c0 * r.excess * (1.0 + VIOLATION_TOL))
        .map(|r| (r.lhs - c0 * r.excess) / r.penalty)
        .fold(0.0, f64::max);
    (c0, c1)
}

fn intersect(l: (f64, f64), m: (f64, f64)) -> f64 {
    (l.1 - m.1) / (m.0 - l.0)
}

/// Upper envelope of lines `y = s x + c`, ordered by increasing slope.
fn upper_envelope(mut lines: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    lines.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(lines.len());
    for l in lines {
        if let Some(last) = hull.last() {
            if last.0 == l.0 {
                hull.pop();
            }
        }
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // b is hidden when l overtakes a no later than b does
            if intersect(a, l) <= intersect(a, b) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(l);
    }
    hull
}

/// Evaluates the Gårding rows for A-free zero-mean test fields and fits
/// `(C0, C1)`.
pub fn garding_verify(
    w: &EnergyDensity,
    ubar: &PeriodicField,
    op: &DiffOp,
    fields: &[PeriodicField],
    p: f64,
) -> Result<GardingReport> {
    if fields.is_empty() {
        return Err(Error::Empty("no test fields".into()));
    }
    if !(p >= 2.0) {
        return Err(Error::InvalidParameter(format!("p = {p} must be >= 2")));
    }
    let mut rows = Vec::with_capacity(fields.len());
    for (i, f) in fields.iter().enumerate() {
        check_background(w, ubar, f)?;
        let r = afree_residual(op, f)?;
        if r > AFREE_TOL {
            return Err(Error::NotAFree(r));
        }
        rows.push(garding_row(w, ubar, f, p, i)?);
    }
    let (c0, c1) = fit_garding_constants(&rows);
    let ratio = |r: &GardingRow| {
        let m = c0 * r.excess + c1 * r.penalty;
        if r.lhs == 0.0 {
            0.0
        } else if m > 0.0 {
            r.lhs / m
        } else {
            f64::INFINITY
        }
    };
    let (worst_ratio_field_id, worst_ratio) = rows
        .iter()
        .map(|r| (r.field_id, ratio(r)))
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    let epsilon0_estimate = rows
        .iter()
        .filter(|r| r.lhs > c0 * r.excess * (1.0 + VIOLATION_TOL))
        .map(|r| r.wnorm)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));
    Ok(GardingReport {
        c0_fit: c0,
        c1_fit: c1,
        worst_ratio_field_id,
        worst_ratio,
        n_fields: rows.len(),
        epsilon0_estimate,
        k: ubar.sup_norm(),
        p,
        rows,
    })
}

#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GardingSearchBudget {
    pub n_random: usize,
    pub n_ascent_steps: usize,
    pub band: usize,
    pub seed: u64,
    pub amplitudes: Vec<f64>,
    /// Random starts refined by ascent.
    pub n_refine: usize,
}

impl Default for GardingSearchBudget {
    fn default() -> Self {
        Self {
            n_random: 32,
            n_ascent_steps: 100,
            band: 3,
            seed: DEFAULT_SEED ^ 0x6a2d,
            amplitudes: vec![0.05, 0.2, 1.0],
            n_refine: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GardingSearchReport {
    /// Largest `lhs / (C0 excess + C1 penalty)` found.
    pub max_ratio: f64,
    pub violated: bool,
    pub steps_taken: usize,
    pub rows: Vec<GardingRow>,
}

/// Gradient ascent on `lhs / (C0 excess + C1 penalty)` over A-free fields.
pub fn garding_adversarial_check(
    w: &EnergyDensity,
    ubar: &PeriodicField,
    op: &DiffOp,
    c0: f64,
    c1: f64,
    p: f64,
    budget: &GardingSearchBudget,
) -> Result<GardingSearchReport> {
    if budget.n_random == 0 || budget.amplitudes.is_empty() {
        return Err(Error::InvalidParameter("need at least one random start".into()));
    }
    let grid = ubar.grid();
    let table = ProjectorTable::with_band(op, grid, budget.band)?;
    let ratio = |psi: &PeriodicField| -> Result<(f64, GardingRow)> {
        let r = garding_row(w, ubar, psi, p, 0)?;
        let m = c0 * r.excess + c1 * r.penalty;
        let q = if m > 0.0 { r.lhs / m } else if r.lhs > 0.0 { f64::INFINITY } else { 0.0 };
        Ok((q, r))
    };

    let mut starts = Vec::with_capacity(budget.n_random);
    for i in 0..budget.n_random {
        let amp = budget.amplitudes[i % budget.amplitudes.len()];
        let psi = random_afree_field_with(&table, budget.band, budget.seed.wrapping_add(i as u64), amp)?;
        let (q, _) = ratio(&psi)?;
        starts.push((i, psi, q));
    }
    starts.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));

    let mut rows = Vec::new();
    let mut max_ratio = f64::NEG_INFINITY;
    let mut steps_taken = 0;
    for (rank, (i, mut psi, mut q)) in starts.into_iter().enumerate() {
        if rank < budget.n_refine && q.is_finite() {
            let mut t = 1.0;
            for _ in 0..budget.n_ascent_steps {
                let d = ratio_gradient(w, ubar, &psi, c0, c1, p, &table)?;
                let slope = d.mean_square();
                if !(slope > 1e-300) || !slope.is_finite() {
                    break;
                }
                let mut accepted = false;
                for _ in 0..50 {
                    let trial = psi.axpy(t, &d)?;
                    if let Ok((v, _)) = ratio(&trial) {
                        if v.is_finite() && v >= q + 1e-4 * t * slope {
                            psi = trial;
                            q = v;
                            accepted = true;
                            break;
                        }
                    }
                    t *= 0.5;
                }
                if !accepted {
                    break;
                }
                steps_taken += 1;
                t *= 2.0;
            }
        }
        let (q, mut row) = ratio(&psi)?;
        row.field_id = i;
        max_ratio = max_ratio.max(q);
        rows.push(row);
    }
    rows.sort_by_key(|r| r.field_id);
    Ok(GardingSearchReport {
        max_ratio,
        violated: max_ratio > 1.0 + VIOLATION_TOL,
        steps_taken,
        rows,
    })
}

fn ratio_gradient(
    w: &EnergyDensity,
    ubar: &PeriodicField,
    psi: &PeriodicField,
    c0: f64,
    c1: f64,
    p: f64,
    table: &ProjectorTable,
) -> Result<PeriodicField> {
    let r = garding_row(w, ubar, psi, p, 0)?;
    let m = c0 * r.excess + c1 * r.penalty;
    let n = psi.fiber();
    let grid = psi.grid();

    // d penalty = 2 T^2 psi + T(p |T psi|^{p-2} T psi), T = (2 pi |xi|)^{-1}
    let spec = transform(psi)?;
    let t_psi_hat = spec.scale_modes(|i| sobolev_multiplier(grid, i, -1));
    let t_psi = inverse_transform(&t_psi_hat);
    let lp = t_psi.map_points(n, |v, o| {
        let a: f64 = v.iter().map(|x| x * x).sum();
        let s = if a == 0.0 { if p == 2.0 { 2.0 } else { 0.0 } } else { p * a.powf(p / 2.0 - 1.0) };
        o.iter_mut().zip(v).for_each(|(o, x)| *o = s * x);
    });
    let d_pen_hat = t_psi_hat
        .scale_modes(|i| 2.0 * sobolev_multiplier(grid, i, -1))
        .add(&transform(&lp)?.scale_modes(|i| sobolev_multiplier(grid, i, -1)))?;
    let d_pen = inverse_transform(&d_pen_hat);

    let mut g1 = vec![0.0; n];
    let mut g2 = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut raw = PeriodicField::zeros(grid, n);
    let data = raw.data_mut();
    for (k, (u, v)) in ubar.points().zip(psi.points()).enumerate() {
        z.iter_mut().zip(u).zip(v).for_each(|((o, a), b)| *o = a + b);
        w.gradient_into(&z, &mut g1);
        w.gradient_into(u, &mut g2);
        let mut dl = vec![0.0; n];
        v_squared_gradient(v, p, &mut dl);
        let dp = d_pen.at(k);
        for c in 0..n {
            let dm = c0 * (g1[c] - g2[c]) + c1 * dp[c];
            data[k * n + c] = (dl[c] * m - r.lhs * dm) / (m * m);
        }
    }
    Ok(inverse_transform(&table.project(&transform(&raw)?)))
}

#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadraticGardingOptions {
    /// Shift in `W~ = W - c2 |V|^2`.
    pub c2: f64,
    pub delta: f64,
    /// Frequencies with `|xi|_inf <= xi_band` enter the frozen constant.
    pub xi_band: usize,
}

impl Default for QuadraticGardingOptions {
    fn default() -> Self {
        Self {
            c2: 0.0,
            delta: 0.1,
            xi_band: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticGardingRow {
    pub phi_id: usize,
    /// `int D^2 W~(U) B phi . B phi`.
    pub second_variation: f64,
    /// `int |B phi|^2`.
    pub b_norm2: f64,
    /// `sum_{i=1}^l int |grad^{l-i} phi|^2`.
    pub lower_order: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticGardingReport {
    /// Frozen-coefficient constant: least eigenvalue of `D^2 W~(U(x))` on
    /// `im B(xi)` over sampled points and frequencies.
    pub c0_frozen: f64,
    /// `c0 (1 - delta)`.
    pub c0_delta_fit: f64,
    pub c1_fit: f64,
    /// Largest jump of `U` between neighbouring grid points.
    pub modulus: f64,
    pub delta: f64,
    pub rows: Vec<QuadraticGardingRow>,
}

impl Tabular for QuadraticGardingReport {
    fn table(&self) -> Table {
        let mut t = Table::new(["phi_id", "second_variation", "b_norm2", "lower_order", "slack"]);
        for r in &self.rows {
            let slack = r.second_variation - self.c0_delta_fit * r.b_norm2 + self.c1_fit * r.lower_order;
            t.push(vec![
                r.phi_id.to_string(),
                num(r.second_variation),
                num(r.b_norm2),
                num(r.lower_order),
                num(slack),
            ]);
        }
        t
    }
}

/// Discrete modulus of continuity: max `|U(x) - U(y)|` over grid neighbours.
pub fn discrete_modulus(u: &PeriodicField) -> f64 {
    let g = u.grid();
    let mut m = 0.0_f64;
    for idx in 0..g.len() {
        let mi = g.multi_index(idx);
        for axis in 0..g.dim() {
            let mut nb = mi.clone();
            nb[axis] = (nb[axis] + 1) % g.n();
            let j = nb.iter().fold(0, |acc, &v| acc * g.n() + v);
            let d: f64 = u.at(idx).iter().zip(u.at(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            m = m.max(d.sqrt());
        }
    }
    m
}

/// Background sample points, at most 64, evenly strided over the grid.
fn background_samples(u: &PeriodicField) -> Vec<Vec<f64>> {
    let len = u.grid().len();
    let stride = len.div_ceil(64).max(1);
    (0..len).step_by(stride).map(|i| u.at(i).to_vec()).collect()
}

/// `min lambda_min(K^T D^2 W~(a) K)` with `K` an orthonormal basis of `im B(xi)`.
pub fn frozen_constant(
    w: &EnergyDensity,
    samples: &[Vec<f64>],
    op_b: &DiffOp,
    grid: Grid,
    band: usize,
) -> Result<f64> {
    let hessians: Vec<DMatrix<f64>> = samples.iter().map(|a| w.hessian(a)).collect();
    let mut c0 = f64::INFINITY;
    for idx in 1..grid.len() {
        if !grid.is_half_space(idx) || grid.freq_inf(idx) > band {
            continue;
        }
        let k = full_svd(&op_b.real_symbol(&grid.freq_f64(idx))).range(RANK_TOL);
        if k.ncols() == 0 {
            continue;
        }
        for h in &hessians {
            let e = SymmetricEigen::new(k.transpose() * h * &k).eigenvalues.min();
            c0 = c0.min(e);
        }
    }
    if !c0.is_finite() {
        return Err(Error::InvalidParameter("potential has trivial range at every sampled frequency".into()));
    }
    Ok(c0)
}

/// Realised constants in the frozen-coefficient lower bound
/// `int D^2 W~(U) B phi . B phi >= c0 (1 - delta) int |B phi|^2 - c1 sum int |grad^{l-i} phi|^2`.
pub fn quadratic_garding_check(
    w: &EnergyDensity,
    ubar: &PeriodicField,
    op_b: &DiffOp,
    phis: &[PeriodicField],
    opts: &QuadraticGardingOptions,
) -> Result<QuadraticGardingReport> {
    if phis.is_empty() {
        return Err(Error::Empty("no potentials".into()));
    }
    if !(opts.delta > 0.0 && opts.delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta = {} must lie in (0, 1)", opts.delta)));
    }
    let wt = tilde_shift(w, opts.c2)?;
    let grid = ubar.grid();
    if ubar.fiber() != wt.dim() || op_b.target_dim() != wt.dim() {
        return Err(Error::DimensionMismatch(format!(
            "density on R^{}, background R^{}, potential into R^{}",
            wt.dim(),
            ubar.fiber(),
            op_b.target_dim()
        )));
    }
    let c0 = frozen_constant(&wt, &background_samples(ubar), op_b, grid, opts.xi_band)?;
    let c0_delta = c0 * (1.0 - opts.delta);
    let hessians: Vec<DMatrix<f64>> = ubar.points().map(|a| wt.hessian(a)).collect();
    let l = op_b.order() as i32;

    let mut rows = Vec::with_capacity(phis.len());
    for (i, phi) in phis.iter().enumerate() {
        if phi.grid() != grid || phi.fiber() != op_b.source_dim() {
            return Err(Error::DimensionMismatch(format!("potential {i} has the wrong shape")));
        }
        let bphi = apply_operator(op_b, phi)?;
        let mut sv = 0.0;
        for (h, z) in hessians.iter().zip(bphi.points()) {
            let zv = nalgebra::DVector::from_column_slice(z);
            sv += (h * &zv).dot(&zv);
        }
        let mut lower = 0.0;
        for j in 0..l {
            let s = sobolev_norm(phi, j, 2.0)?;
            lower += s * s;
        }
        rows.push(QuadraticGardingRow {
            phi_id: i,
            second_variation: sv / grid.len() as f64,
            b_norm2: bphi.mean_square(),
            lower_order: lower,
        });
    }
    let c1 = rows
        .iter()
        .filter(|r| r.lower_order > 0.0)
        .map(|r| (c0_delta * r.b_norm2 - r.second_variation) / r.lower_order)
        .fold(0.0, f64::max);
    Ok(QuadraticGardingReport {
        c0_frozen: c0,
        c0_delta_fit: c0_delta,
        c1_fit: c1,
        modulus: discrete_modulus(ubar),
        delta: opts.delta,
        rows,
    })
}
