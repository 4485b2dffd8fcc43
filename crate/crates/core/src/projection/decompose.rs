use serde::{Deserialize, Serialize};

use super::{afree_residual, truncate, AFreeProjector, PrimitiveTable};
use crate::opsym::DiffOp;
use crate::report::{num, Table, Tabular};
use crate::spectral::{check_zero_mean, inverse_transform, transform, PeriodicField, SpectralField};
use crate::{Error, Result, C64};

#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecomposeOptions {
    /// Thresholds `T` for the tail mass `int_{|f| > T} |f|^p`.
    pub t_grid: Vec<f64>,
    /// Levels `delta` for the superlevel measure `|{|b| > delta}|`.
    pub delta_grid: Vec<f64>,
    /// Largest accepted `|A psi|_{W^{-k,2}} / |psi|_{L^2}` of an input.
    pub afree_tol: f64,
    /// Frequencies with `|xi|_inf <= pairing_band` used for the weak pairings.
    pub pairing_band: usize,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self {
            t_grid: vec![0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0],
            delta_grid: vec![1e-3, 1e-2, 1e-1, 0.5],
            afree_tol: 1e-8,
            pairing_band: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexDiagnostics {
    pub j: usize,
    /// `int_{|B f_j| > T} |B f_j|^p` per threshold.
    pub tail_mass: Vec<f64>,
    /// `|{|B b_j| > delta}|` per level.
    pub measure_above: Vec<f64>,
    /// Largest low-frequency coefficient of `B f_j` and of `B b_j`.
    pub weak_pairing_residuals: [f64; 2],
    /// `|psi_j - limit - B f_j - B b_j|_{L^2} / |psi_j|_{L^2}`.
    pub additivity_residual: f64,
}

#[derive(Clone, Debug)]
pub struct DecompositionResult {
    pub limit: PeriodicField,
    pub oscillation: Vec<PeriodicField>,
    pub concentration: Vec<PeriodicField>,
    pub limit_primitive: PeriodicField,
    pub oscillation_primitives: Vec<PeriodicField>,
    pub concentration_primitives: Vec<PeriodicField>,
    pub diagnostics: Vec<IndexDiagnostics>,
    pub options: DecomposeOptions,
}

impl DecompositionResult {
    /// `sup_j` of the tail mass at each threshold.
    pub fn sup_tail_mass(&self) -> Vec<f64> {
        (0..self.options.t_grid.len())
            .map(|i| {
                self.diagnostics
                    .iter()
                    .map(|d| d.tail_mass[i])
                    .fold(0.0, f64::max)
            })
            .collect()
    }
}

impl Tabular for DecompositionResult {
    fn table(&self) -> Table {
        let mut header = vec!["j".to_string()];
        header.extend(self.options.t_grid.iter().map(|t| format!("tail_mass@{}", num(*t))));
        header.extend(
            self.options
                .delta_grid
                .iter()
                .map(|d| format!("measure_above@{}", num(*d))),
        );
        header.push("additivity_residual".into());
        let mut t = Table::new(header);
        for d in &self.diagnostics {
            let mut row = vec![d.j.to_string()];
            row.extend(d.tail_mass.iter().map(|&v| num(v)));
            row.extend(d.measure_above.iter().map(|&v| num(v)));
            row.push(num(d.additivity_residual));
            t.push(row);
        }
        t
    }
}

pub fn decompose_sequence(
    op_a: &DiffOp,
    op_b: &DiffOp,
    fields: &[PeriodicField],
    k_schedule: &[f64],
    p: f64,
) -> Result<DecompositionResult> {
    decompose_sequence_with(op_a, op_b, fields, k_schedule, p, &DecomposeOptions::default())
}

/// Splits `psi_j = limit + B f_j + B b_j`.
///
/// `limit` stands in for the weak limit: the mode-wise average of the
/// sequence over the frequencies carried by a strict majority of its
/// members. `B f_j` is the A-free projection of the truncation
/// `tau_{k_j}(psi_j - limit)` and `B b_j` is the remainder.
pub fn decompose_sequence_with(
    op_a: &DiffOp,
    op_b: &DiffOp,
    fields: &[PeriodicField],
    k_schedule: &[f64],
    p: f64,
    opts: &DecomposeOptions,
) -> Result<DecompositionResult> {
    let first = fields.first().ok_or_else(|| Error::Empty("no fields to decompose".into()))?;
    if k_schedule.len() != fields.len() {
        return Err(Error::InvalidParameter(format!(
            "{} truncation levels for {} fields",
            k_schedule.len(),
            fields.len()
        )));
    }
    if k_schedule.windows(2).any(|w| w[1] < w[0]) || k_schedule.iter().any(|&k| !(k > 0.0)) {
        return Err(Error::InvalidParameter(
            "truncation levels must be positive and non-decreasing".into(),
        ));
    }
    if !(p >= 2.0) {
        return Err(Error::InvalidParameter(format!("p = {p} must be >= 2")));
    }
    let grid = first.grid();
    for f in fields {
        check_zero_mean(f)?;
        let r = afree_residual(op_a, f)?;
        if r > opts.afree_tol {
            return Err(Error::NotAFree(r));
        }
    }
    let proj = AFreeProjector::new(op_a, grid)?;
    let prims = PrimitiveTable::new(op_b, grid)?;

    let spectra: Vec<SpectralField> = fields.iter().map(transform).collect::<Result<_>>()?;
    let limit = inverse_transform(&majority_average(&spectra));
    let limit_primitive = prims.primitive_unchecked(&limit)?;

    let mut oscillation = Vec::with_capacity(fields.len());
    let mut concentration = Vec::with_capacity(fields.len());
    let mut oscillation_primitives = Vec::with_capacity(fields.len());
    let mut concentration_primitives = Vec::with_capacity(fields.len());
    let mut diagnostics = Vec::with_capacity(fields.len());
    for (j, (psi, &k)) in fields.iter().zip(k_schedule).enumerate() {
        let w = psi.sub(&limit)?;
        let osc = proj.project(&truncate(&w, k)?)?;
        let conc = w.sub(&osc)?;
        let rebuilt = limit.add(&osc)?.add(&conc)?;
        let norm = psi.l2_norm();
        let additivity_residual = if norm > 0.0 {
            psi.sub(&rebuilt)?.l2_norm() / norm
        } else {
            rebuilt.l2_norm()
        };
        diagnostics.push(IndexDiagnostics {
            j,
            tail_mass: opts.t_grid.iter().map(|&t| tail_mass(&osc, t, p)).collect(),
            measure_above: opts.delta_grid.iter().map(|&d| measure_above(&conc, d)).collect(),
            weak_pairing_residuals: [
                low_mode_max(&osc, opts.pairing_band)?,
                low_mode_max(&conc, opts.pairing_band)?,
            ],
            additivity_residual,
        });
        oscillation_primitives.push(prims.primitive_unchecked(&osc)?);
        concentration_primitives.push(prims.primitive_unchecked(&conc)?);
        oscillation.push(osc);
        concentration.push(conc);
    }
    Ok(DecompositionResult {
        limit,
        oscillation,
        concentration,
        limit_primitive,
        oscillation_primitives,
        concentration_primitives,
        diagnostics,
        options: opts.clone(),
    })
}

fn majority_average(spectra: &[SpectralField]) -> SpectralField {
    let first = &spectra[0];
    let grid = first.grid();
    let fiber = first.fiber();
    let mode_norm = |s: &SpectralField, idx: usize| {
        s.at(idx).iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    };
    let peak = spectra
        .iter()
        .flat_map(|s| (0..grid.len()).map(move |i| mode_norm(s, i)))
        .fold(0.0, f64::max);
    let cutoff = 1e-10 * peak;
    let count = spectra.len();
    let mut out = SpectralField::zeros(grid, fiber);
    if peak == 0.0 {
        return out;
    }
    for idx in 1..grid.len() {
        let carried = spectra.iter().filter(|s| mode_norm(s, idx) > cutoff).count();
        if 2 * carried <= count {
            continue;
        }
        for c in 0..fiber {
            let sum: C64 = spectra.iter().map(|s| s.at(idx)[c]).sum();
            out.at_mut(idx)[c] = sum / count as f64;
        }
    }
    out
}

fn tail_mass(f: &PeriodicField, t: f64, p: f64) -> f64 {
    let s: f64 = f
        .points()
        .map(|z| {
            let n = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > t {
                n.powf(p)
            } else {
                0.0
            }
        })
        .sum();
    s / f.grid().len() as f64
}

fn measure_above(f: &PeriodicField, delta: f64) -> f64 {
    let above = f
        .points()
        .filter(|z| z.iter().map(|v| v * v).sum::<f64>().sqrt() > delta)
        .count();
    above as f64 / f.grid().len() as f64
}

fn low_mode_max(f: &PeriodicField, band: usize) -> Result<f64> {
    let s = transform(f)?;
    let grid = s.grid();
    Ok((1..grid.len())
        .filter(|&i| grid.freq_inf(i) <= band)
        .map(|i| s.at(i).iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt())
        .fold(0.0, f64::max))
}
