use serde::{Deserialize, Serialize};

use super::density::{v_squared, v_squared_gradient, EnergyDensity};
use crate::opsym::sampling::DEFAULT_SEED;
use crate::opsym::DiffOp;
use crate::report::{num, Table, Tabular};
use crate::spectral::{
    inverse_transform, random_afree_field_with, transform, Grid, PeriodicField, ProjectorTable,
};
use crate::{Error, Result};

#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AqcBudget {
    /// Odd points per axis of the test grid.
    pub grid_n: usize,
    pub n_random: usize,
    pub n_descent_steps: usize,
    /// Test fields live on `|xi|_inf <= band`.
    pub band: usize,
    pub c0_probe: f64,
    pub seed: u64,
    /// L² amplitudes cycled over the random starts.
    pub amplitudes: Vec<f64>,
    /// A gap below `-tol` is a violation.
    pub tol: f64,
    /// Random starts refined by descent.
    pub n_refine: usize,
}

impl Default for AqcBudget {
    fn default() -> Self {
        Self {
            grid_n: 9,
            n_random: 32,
            n_descent_steps: 100,
            band: 2,
            c0_probe: 0.0,
            seed: DEFAULT_SEED,
            amplitudes: vec![0.1, 0.5, 1.0, 2.0],
            tol: 1e-8,
            n_refine: 4,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AqcStart {
    pub start: usize,
    pub amplitude: f64,
    pub initial_gap: f64,
    pub final_gap: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AqcReport {
    pub min_gap: f64,
    pub violated: bool,
    /// Field attaining `min_gap` when it is a violation.
    #[serde(skip)]
    pub certificate_field: Option<PeriodicField>,
    pub rejected_steps: usize,
    pub starts: Vec<AqcStart>,
}

impl Tabular for AqcReport {
    fn table(&self) -> Table {
        let mut t = Table::new(["start", "amplitude", "initial_gap", "final_gap", "steps"]);
        for s in &self.starts {
            t.push(vec![
                s.start.to_string(),
                num(s.amplitude),
                num(s.initial_gap),
                num(s.final_gap),
                s.steps.to_string(),
            ]);
        }
        t
    }
}

/// `G(psi) = int [W(l + psi) - W(l)] - c0 int |V(psi)|^2` with its `L^2` gradient.
pub struct GapFunctional<'a> {
    w: &'a EnergyDensity,
    lambda: Vec<f64>,
    w_lambda: f64,
    c0: f64,
    table: ProjectorTable,
}

impl<'a> GapFunctional<'a> {
    pub fn new(
        w: &'a EnergyDensity,
        lambda: &[f64],
        op: &DiffOp,
        grid: Grid,
        band: usize,
        c0: f64,
    ) -> Result<Self> {
        if lambda.len() != w.dim() || op.source_dim() != w.dim() {
            return Err(Error::DimensionMismatch(format!(
                "density on R^{}, lambda in R^{}, operator on R^{}",
                w.dim(),
                lambda.len(),
                op.source_dim()
            )));
        }
        Ok(Self {
            w,
            lambda: lambda.to_vec(),
            w_lambda: w.value(lambda),
            c0,
            table: ProjectorTable::with_band(op, grid, band)?,
        })
    }

    pub fn table(&self) -> &ProjectorTable {
        &self.table
    }

    pub fn value(&self, psi: &PeriodicField) -> f64 {
        let mut z = vec![0.0; self.lambda.len()];
        let s: f64 = psi
            .points()
            .map(|v| {
                z.iter_mut()
                    .zip(&self.lambda)
                    .zip(v)
                    .for_each(|((o, l), x)| *o = l + x);
                self.w.value(&z) - self.w_lambda - self.c0 * v_squared(v, self.w.p)
            })
            .sum();
        s / psi.grid().len() as f64
    }

    /// Pointwise gradient projected onto the admissible fields.
    pub fn gradient(&self, psi: &PeriodicField) -> Result<PeriodicField> {
        let n = self.lambda.len();
        let mut z = vec![0.0; n];
        let mut gv = vec![0.0; n];
        let raw = psi.map_points(n, |v, out| {
            z.iter_mut()
                .zip(&self.lambda)
                .zip(v)
                .for_each(|((o, l), x)| *o = l + x);
            self.w.gradient_into(&z, out);
            if self.c0 != 0.0 {
                v_squared_gradient(v, self.w.p, &mut gv);
                out.iter_mut().zip(&gv).for_each(|(o, g)| *o -= self.c0 * g);
            }
        });
        Ok(inverse_transform(&self.table.project(&transform(&raw)?)))
    }
}

const ARMIJO: f64 = 1e-4;

/// Adversarial search for a negative gap over A-free zero-mean test fields.
///
/// Random starts `psi^ = P g^` are drawn on the band; the best `n_refine`
/// are refined by projected gradient descent with Armijo backtracking. A
/// negative `min_gap` falsifies (strong) A-quasiconvexity at `lambda`; a
/// nonnegative one certifies nothing.
pub fn aqc_test(
    w: &EnergyDensity,
    lambda: &[f64],
    op: &DiffOp,
    budget: &AqcBudget,
) -> Result<AqcReport> {
    if budget.n_random == 0 || budget.amplitudes.is_empty() {
        return Err(Error::InvalidParameter("need at least one random start".into()));
    }
    if budget.amplitudes.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::InvalidParameter("amplitudes must be positive".into()));
    }
    let grid = Grid::new(op.dim(), budget.grid_n)?;
    let g = GapFunctional::new(w, lambda, op, grid, budget.band, budget.c0_probe)?;

    let mut starts: Vec<(usize, f64, PeriodicField, f64)> = Vec::with_capacity(budget.n_random);
    for i in 0..budget.n_random {
        let amp = budget.amplitudes[i % budget.amplitudes.len()];
        let psi = random_afree_field_with(g.table(), budget.band, budget.seed.wrapping_add(i as u64), amp)?;
        let gap = g.value(&psi);
        starts.push((i, amp, psi, gap));
    }
    starts.sort_by(|a, b| nan_last(a.3).total_cmp(&nan_last(b.3)).then(a.0.cmp(&b.0)));

    let mut rejected = 0;
    let mut rows = Vec::new();
    let mut best: Option<(f64, PeriodicField)> = None;
    for (rank, (i, amp, psi, gap)) in starts.into_iter().enumerate() {
        let (psi, final_gap, steps) = if rank < budget.n_refine {
            descend(&g, psi, gap, budget.n_descent_steps, &mut rejected)?
        } else {
            (psi, gap, 0)
        };
        rows.push(AqcStart {
            start: i,
            amplitude: amp,
            initial_gap: gap,
            final_gap,
            steps,
        });
        if final_gap.is_finite() && best.as_ref().is_none_or(|(b, _)| final_gap < *b) {
            best = Some((final_gap, psi));
        }
    }
    rows.sort_by_key(|r| r.start);
    let (min_gap, field) = best.ok_or_else(|| Error::NonFinite("every start of the gap functional".into()))?;
    let violated = min_gap < -budget.tol;
    Ok(AqcReport {
        min_gap,
        violated,
        certificate_field: violated.then_some(field),
        rejected_steps: rejected,
        starts: rows,
    })
}

fn nan_last(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn descend(
    g: &GapFunctional,
    mut psi: PeriodicField,
    mut gap: f64,
    steps: usize,
    rejected: &mut usize,
) -> Result<(PeriodicField, f64, usize)> {
    let mut t = 1.0;
    let mut taken = 0;
    for _ in 0..steps {
        if !gap.is_finite() {
            break;
        }
        let d = g.gradient(&psi)?;
        let slope = d.mean_square();
        if !(slope > 1e-300) || !slope.is_finite() {
            break;
        }
        let mut accepted = false;
        for _ in 0..60 {
            let trial = psi.axpy(-t, &d)?;
            let v = g.value(&trial);
            if !v.is_finite() {
                *rejected += 1;
            } else if v <= gap - ARMIJO * t * slope {
                psi = trial;
                gap = v;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        taken += 1;
        t *= 2.0;
    }
    Ok((psi, gap, taken))
}
