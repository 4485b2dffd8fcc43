//! Sufficiency checks for constrained local minimisers of
//! `W[U] = int W(U)` over `U` with `A U = 0`: the Euler-Lagrange residual,
//! positivity of the second variation and a sampled quantitative
//! minimality test.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::convexity::{aqc_test, excess, AqcBudget, EnergyDensity};
use crate::opsym::linalg::full_svd;
use crate::opsym::sampling::DEFAULT_SEED;
use crate::opsym::{DiffOp, RANK_TOL};
use crate::projection::afree_residual;
use crate::report::{num, Table, Tabular};
use crate::spectral::{
    inverse_transform, random_afree_field_with, sobolev_norm, transform, v_energy, zero_mean, Grid,
    PeriodicField, ProjectorTable,
};
use crate::{Error, Result};

const AFREE_TOL: f64 = 1e-8;
pub const EL_TOL: f64 = 1e-8;

fn check_inputs(w: &EnergyDensity, ubar: &PeriodicField, op: &DiffOp) -> Result<()> {
    let n = w.dim();
    if ubar.fiber() != n || op.source_dim() != n || op.dim() != ubar.grid().dim() {
        return Err(Error::DimensionMismatch(format!(
            "density on R^{n}, field R^{} in d = {}, operator on R^{} in d = {}",
            ubar.fiber(),
            ubar.grid().dim(),
            op.source_dim(),
            op.dim()
        )));
    }
    let r = afree_residual(op, &zero_mean(ubar))?;
    if r > AFREE_TOL {
        return Err(Error::NotAFree(r));
    }
    Ok(())
}

fn pointwise_gradient(w: &EnergyDensity, u: &PeriodicField) -> PeriodicField {
    u.map_points(w.dim(), |z, out| w.gradient_into(z, out))
}

/// `|P DW(Ubar)|_{L^2}`; zero iff `int DW(Ubar) . psi = 0` for every discrete
/// A-free zero-mean `psi`.
///
/// `Ubar` is the sum of a constant and an A-free zero-mean field.
pub fn euler_lagrange_residual(w: &EnergyDensity, ubar: &PeriodicField, op: &DiffOp) -> Result<f64> {
    check_inputs(w, ubar, op)?;
    let table = ProjectorTable::new(op, ubar.grid())?;
    let g = transform(&pointwise_gradient(w, ubar))?;
    Ok(inverse_transform(&table.project(&g)).l2_norm())
}

#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SecondVariationOptions {
    /// Test fields live on `|xi|_inf <= band`; `None` uses the whole grid.
    pub band: Option<usize>,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for SecondVariationOptions {
    fn default() -> Self {
        Self {
            band: None,
            max_iters: 10_000,
            tol: 1e-8,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondVariationReport {
    /// Smallest Rayleigh quotient `int D^2W(Ubar) psi . psi / int |psi|^2`.
    pub min_quotient: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Interval that contains an eigenvalue: `min_quotient -/+ |L psi - q psi|`.
    pub interval: (f64, f64),
    /// Shift `s` of the iteration on `s - L`.
    pub shift: f64,
}

/// Shifted power iteration for the bottom of the spectrum of
/// `psi -> P(D^2W(Ubar) psi)` on A-free zero-mean band-limited fields.
///
/// Stops once the eigen-residual is below `sqrt(tol)`, so the quotient is
/// accurate to about `tol` over the spectral gap.
pub fn second_variation_min(
    w: &EnergyDensity,
    ubar: &PeriodicField,
    op: &DiffOp,
    opts: &SecondVariationOptions,
) -> Result<SecondVariationReport> {
    check_inputs(w, ubar, op)?;
    let grid = ubar.grid();
    let band = opts.band.unwrap_or(grid.half()).clamp(1, grid.half().max(1));
    let table = ProjectorTable::with_band(op, grid, band)?;
    let hess: Vec<DMatrix<f64>> = ubar.points().map(|z| w.hessian(z)).collect();
    let top = hess
        .iter()
        .map(|h| SymmetricEigen::new(h.clone()).eigenvalues.max())
        .fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::NonFinite("Hessian along the background".into()));
    }
    let shift = top.max(0.0) + 1.0;
    let n = w.dim();
    let apply = |psi: &PeriodicField| -> Result<PeriodicField> {
        let mut k = 0;
        let hp = psi.map_points(n, |z, out| {
            let h = &hess[k];
            k += 1;
            for (i, o) in out.iter_mut().enumerate() {
                *o = (0..n).map(|j| h[(i, j)] * z[j]).sum();
            }
        });
        Ok(inverse_transform(&table.project(&transform(&hp)?)))
    };

    let mut psi = random_afree_field_with(&table, band, opts.seed, 1.0)?;
    let mut q = f64::NAN;
    let mut resid = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=opts.max_iters.max(1) {
        iterations = it;
        let lp = apply(&psi)?;
        let nrm2 = psi.mean_square();
        q = lp.inner(&psi) / nrm2;
        resid = (lp.axpy(-q, &psi)?.mean_square() / nrm2).sqrt();
        if resid <= opts.tol.sqrt() * q.abs().max(1.0) {
            converged = true;
            break;
        }
        let next = inverse_transform(&table.project(&transform(&psi.scaled(shift).axpy(-1.0, &lp)?)?));
        let m = next.l2_norm();
        if !(m > 0.0) || !m.is_finite() {
            break;
        }
        psi = next.scaled(1.0 / m);
    }
    Ok(SecondVariationReport {
        min_quotient: q,
        converged,
        iterations,
        interval: (q - resid, q + resid),
        shift,
    })
}

/// Frozen-coefficient value for a constant background: the minimum over
/// lattice `xi` in the band of the smallest eigenvalue of `D^2W(a)` on
/// `ker A(xi)`.
pub fn frozen_second_variation(
    w: &EnergyDensity,
    a: &[f64],
    op: &DiffOp,
    grid: Grid,
    band: usize,
) -> Result<f64> {
    if a.len() != w.dim() || op.source_dim() != w.dim() || op.dim() != grid.dim() {
        return Err(Error::DimensionMismatch("background, density and operator".into()));
    }
    let h = w.hessian(a);
    let mut min = f64::INFINITY;
    for idx in 0..grid.len() {
        if !grid.is_half_space(idx) || grid.freq_inf(idx) > band {
            continue;
        }
        let k = full_svd(&op.real_symbol(&grid.freq_f64(idx))).kernel(RANK_TOL);
        if k.ncols() == 0 {
            continue;
        }
        min = min.min(SymmetricEigen::new(k.transpose() * &h * &k).eigenvalues.min());
    }
    if min.is_infinite() {
        return Err(Error::Elliptic);
    }
    Ok(min)
}

#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimalityOptions {
    /// Radius in `W^{-1,p}`; default `0.1 |Ubar - mean|_{W^{-1,p}} + 0.01`.
    pub epsilon0: Option<f64>,
    pub n_samples: usize,
    pub seed: u64,
    /// Band of the random perturbations.
    pub band: usize,
    pub second_variation: SecondVariationOptions,
    /// Distinct background values probed for strong A-quasiconvexity.
    pub aqc_points: usize,
    pub aqc: AqcBudget,
}

impl Default for MinimalityOptions {
    fn default() -> Self {
        Self {
            epsilon0: None,
            n_samples: 32,
            seed: DEFAULT_SEED,
            band: 2,
            second_variation: SecondVariationOptions::default(),
            aqc_points: 64,
            aqc: AqcBudget::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimalityRow {
    pub sample: usize,
    /// `|U - Ubar|_{W^{-1,p}}`.
    pub wnorm: f64,
    pub energy_gap: f64,
    /// `int W(U | Ubar)`; equals the gap at a critical point.
    pub excess_integral: f64,
    pub v_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimalityReport {
    pub el_residual: f64,
    pub second_variation_min: f64,
    pub second_variation_converged: bool,
    pub aqc_min_gap: Option<f64>,
    pub aqc_points_probed: usize,
    pub epsilon0_used: f64,
    pub p: f64,
    pub rows: Vec<MinimalityRow>,
    /// `min energy_gap / v_distance` over rows with `v_distance > 0`.
    pub c_fit: f64,
    /// Unmet hypotheses, in words.
    pub diagnostics: Vec<String>,
    pub pass: bool,
}

impl Tabular for MinimalityReport {
    fn table(&self) -> Table {
        let mut t = Table::new(["sample", "wnorm", "energy_gap", "excess_integral", "v_distance"]);
        for r in &self.rows {
            t.push(vec![
                r.sample.to_string(),
                num(r.wnorm),
                num(r.energy_gap),
                num(r.excess_integral),
                num(r.v_distance),
            ]);
        }
        t
    }
}

fn mean_value(w: &EnergyDensity, u: &PeriodicField) -> f64 {
    u.points().map(|z| w.value(z)).sum::<f64>() / u.grid().len() as f64
}

/// Up to `cap` distinct background values, evenly subsampled.
fn distinct_values(u: &PeriodicField, cap: usize) -> Vec<Vec<f64>> {
    let mut seen: Vec<Vec<f64>> = Vec::new();
    for z in u.points() {
        if !seen.iter().any(|s| s.iter().zip(z).all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()))) {
            seen.push(z.to_vec());
        }
    }
    if seen.len() <= cap || cap == 0 {
        if cap == 0 {
            seen.clear();
        }
        return seen;
    }
    let step = seen.len() as f64 / cap as f64;
    (0..cap).map(|i| seen[(i as f64 * step) as usize].clone()).collect()
}

/// Checks the three hypotheses at `Ubar`, then samples competitors
/// `Ubar + psi` with `|psi|_{W^{-1,p}}` sweeping `(0, epsilon0]` and fits the
/// largest `C` with `W[U] - W[Ubar] >= C int |V(U - Ubar)|^2` on the sample.
pub fn minimality_check(
    w: &EnergyDensity,
    ubar: &PeriodicField,
    op: &DiffOp,
    opts: &MinimalityOptions,
) -> Result<MinimalityReport> {
    check_inputs(w, ubar, op)?;
    if opts.n_samples == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    let p = w.p;
    let grid = ubar.grid();
    let mut diagnostics = Vec::new();

    let el = euler_lagrange_residual(w, ubar, op)?;
    if el > EL_TOL {
        diagnostics.push(format!("Euler-Lagrange residual {el:e} exceeds {EL_TOL:e}"));
    }
    let sv = second_variation_min(w, ubar, op, &opts.second_variation)?;
    if !sv.converged {
        diagnostics.push(format!(
            "second variation did not converge in {} iterations; eigenvalue in [{:e}, {:e}]",
            sv.iterations, sv.interval.0, sv.interval.1
        ));
    }
    if !(sv.min_quotient > 0.0) {
        diagnostics.push(format!("second variation not positive (min quotient {:e})", sv.min_quotient));
    }
    let probes = distinct_values(ubar, opts.aqc_points);
    let mut aqc_min: Option<f64> = None;
    for (i, lambda) in probes.iter().enumerate() {
        let budget = AqcBudget {
            seed: opts.aqc.seed.wrapping_add(i as u64),
            ..opts.aqc.clone()
        };
        let r = aqc_test(w, lambda, op, &budget)?;
        aqc_min = Some(aqc_min.map_or(r.min_gap, |m: f64| m.min(r.min_gap)));
        if r.violated {
            diagnostics.push(format!("quasiconvexity gap {:e} at background value {lambda:?}", r.min_gap));
        }
    }

    let fluct = zero_mean(ubar);
    let epsilon0 = match opts.epsilon0 {
        Some(e) if e > 0.0 && e.is_finite() => e,
        Some(e) => return Err(Error::InvalidParameter(format!("epsilon0 = {e} must be positive"))),
        None => 0.1 * sobolev_norm(&fluct, -1, p)? + 0.01,
    };

    let table = ProjectorTable::with_band(op, grid, opts.band.max(1))?;
    let w0 = mean_value(w, ubar);
    let mut rows = Vec::with_capacity(opts.n_samples);
    let mut dz = vec![0.0; w.dim()];
    for k in 0..opts.n_samples {
        let psi = random_afree_field_with(&table, opts.band.max(1), opts.seed.wrapping_add(k as u64), 1.0)?;
        let target = epsilon0 * (k + 1) as f64 / opts.n_samples as f64;
        let psi = psi.scaled(target / sobolev_norm(&psi, -1, p)?);
        let u = ubar.add(&psi)?;
        let excess_integral = ubar
            .points()
            .zip(psi.points())
            .map(|(b, d)| {
                dz.copy_from_slice(d);
                excess(w, b, &dz)
            })
            .sum::<f64>()
            / grid.len() as f64;
        rows.push(MinimalityRow {
            sample: k,
            wnorm: sobolev_norm(&psi, -1, p)?,
            energy_gap: mean_value(w, &u) - w0,
            excess_integral,
            v_distance: v_energy(&psi, p)?,
        });
    }
    let c_fit = rows
        .iter()
        .filter(|r| r.v_distance > 0.0)
        .map(|r| r.energy_gap / r.v_distance)
        .fold(f64::INFINITY, f64::min);
    if !(c_fit > 0.0) {
        diagnostics.push(format!("fitted constant {c_fit:e} is not positive"));
    }
    let pass = diagnostics.is_empty() && c_fit > 0.0 && c_fit.is_finite();
    Ok(MinimalityReport {
        el_residual: el,
        second_variation_min: sv.min_quotient,
        second_variation_converged: sv.converged,
        aqc_min_gap: aqc_min,
        aqc_points_probed: probes.len(),
        epsilon0_used: epsilon0,
        p,
        rows,
        c_fit,
        diagnostics,
        pass,
    })
}

#[cfg(test)]
mod tests;
