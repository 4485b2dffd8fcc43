//! The A-free projection, potential primitives, truncation and the
//! oscillation/concentration split of sequences.

mod decompose;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use decompose::{
    decompose_sequence, decompose_sequence_with, DecomposeOptions, DecompositionResult,
    IndexDiagnostics,
};

use crate::opsym::{self, DiffOp};
use crate::report::{num, Table, Tabular};
use crate::spectral::{
    self, apply_operator, check_zero_mean, inverse_transform, transform, Grid, PeriodicField,
    ProjectorTable, SpectralField,
};
use crate::{Error, Result, C64};

/// Relative range residual above which a field is not a potential image.
pub const RANGE_TOL: f64 = 1e-8;

/// Cached projector table for one operator and grid.
#[derive(Clone, Debug)]
pub struct AFreeProjector {
    op: DiffOp,
    table: ProjectorTable,
}

impl AFreeProjector {
    pub fn new(op: &DiffOp, grid: Grid) -> Result<Self> {
        Ok(Self {
            op: op.clone(),
            table: ProjectorTable::new(op, grid)?,
        })
    }

    pub fn op(&self) -> &DiffOp {
        &self.op
    }

    pub fn grid(&self) -> Grid {
        self.table.grid()
    }

    pub fn table(&self) -> &ProjectorTable {
        &self.table
    }

    fn check(&self, field: &PeriodicField) -> Result<()> {
        if field.grid() != self.grid() || field.fiber() != self.op.source_dim() {
            return Err(Error::DimensionMismatch(format!(
                "projector for R^{} on {:?}, field R^{} on {:?}",
                self.op.source_dim(),
                self.grid(),
                field.fiber(),
                field.grid()
            )));
        }
        Ok(())
    }

    pub fn project_spectral(&self, spec: &SpectralField) -> SpectralField {
        self.table.project(spec)
    }

    /// Projects and returns the mean that was removed.
    pub fn project_with_mean(&self, field: &PeriodicField) -> Result<(PeriodicField, Vec<f64>)> {
        self.check(field)?;
        let spec = transform(field)?;
        let mean: Vec<f64> = spec.at(0).iter().map(|c| c.re).collect();
        Ok((inverse_transform(&self.table.project(&spec)), mean))
    }

    pub fn project(&self, field: &PeriodicField) -> Result<PeriodicField> {
        self.project_with_mean(field).map(|(f, _)| f)
    }
}

/// `v -> P v`: mode-wise projection onto `ker A(xi)` with the zero mode removed.
pub fn project_afree(op: &DiffOp, field: &PeriodicField) -> Result<PeriodicField> {
    AFreeProjector::new(op, field.grid())?.project(field)
}

/// As [`project_afree`], also returning the removed mean.
pub fn project_afree_with_mean(
    op: &DiffOp,
    field: &PeriodicField,
) -> Result<(PeriodicField, Vec<f64>)> {
    AFreeProjector::new(op, field.grid())?.project_with_mean(field)
}

/// `|A psi|_{W^{-k,2}} / |psi|_{L^2}` for a zero-mean field, or 0 for the zero field.
pub fn afree_residual(op: &DiffOp, field: &PeriodicField) -> Result<f64> {
    let norm = field.l2_norm();
    if norm == 0.0 {
        return Ok(0.0);
    }
    let a = apply_operator(op, field)?;
    Ok(spectral::sobolev_norm(&a, -(op.order() as i32), 2.0)? / norm)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FmRow {
    /// `|v - P v|_{L^2}`.
    pub defect: f64,
    /// `|A v|_{W^{-k,2}}`.
    pub constraint: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FmReport {
    /// Smallest `C` with `defect <= C * constraint` on every row.
    pub c_fit: f64,
    pub worst_row: usize,
    pub rows: Vec<FmRow>,
}

impl Tabular for FmReport {
    fn table(&self) -> Table {
        let mut t = Table::new(["row", "defect", "constraint", "ratio"]);
        for (i, r) in self.rows.iter().enumerate() {
            let ratio = if r.constraint > 0.0 { r.defect / r.constraint } else { 0.0 };
            t.push(vec![i.to_string(), num(r.defect), num(r.constraint), num(ratio)]);
        }
        t
    }
}

/// Fits the projection-defect constant over a family of (mean-removed) fields.
pub fn fm_constant_fit(op: &DiffOp, fields: &[PeriodicField]) -> Result<FmReport> {
    let first = fields.first().ok_or_else(|| Error::Empty("no fields".into()))?;
    let proj = AFreeProjector::new(op, first.grid())?;
    let mut rows = Vec::with_capacity(fields.len());
    let (mut c_fit, mut worst_row) = (0.0_f64, 0);
    for (i, v) in fields.iter().enumerate() {
        let v = spectral::zero_mean(v);
        let pv = proj.project(&v)?;
        let defect = v.sub(&pv)?.l2_norm();
        let av = apply_operator(op, &v)?;
        let constraint = spectral::sobolev_norm(&av, -(op.order() as i32), 2.0)?;
        if constraint > 0.0 && defect / constraint > c_fit {
            c_fit = defect / constraint;
            worst_row = i;
        }
        rows.push(FmRow { defect, constraint });
    }
    Ok(FmReport {
        c_fit,
        worst_row,
        rows,
    })
}

/// Per-frequency pseudo-inverses and range projectors of a potential.
#[derive(Clone, Debug)]
pub struct PrimitiveTable {
    op: DiffOp,
    grid: Grid,
    pinv: Vec<Option<DMatrix<f64>>>,
    range: Vec<Option<DMatrix<f64>>>,
}

impl PrimitiveTable {
    pub fn new(op_b: &DiffOp, grid: Grid) -> Result<Self> {
        if op_b.dim() != grid.dim() {
            return Err(Error::DimensionMismatch(format!(
                "potential in d = {}, grid in d = {}",
                op_b.dim(),
                grid.dim()
            )));
        }
        let len = grid.len();
        let mut pinv = vec![None; len];
        let mut range = vec![None; len];
        let sign = if op_b.order().is_multiple_of(2) { 1.0 } else { -1.0 };
        for idx in 1..len {
            let neg = grid.neg_index(idx);
            if neg < idx {
                // S(-xi) = (-1)^l S(xi)
                pinv[idx] = pinv[neg].as_ref().map(|m: &DMatrix<f64>| m * sign);
                range[idx] = range[neg].clone();
                continue;
            }
            let xi = grid.freq_f64(idx);
            let s = op_b.real_symbol(&xi);
            let p = opsym::real_pseudo_inverse(op_b, &xi)?;
            range[idx] = Some(&s * &p);
            pinv[idx] = Some(p);
        }
        Ok(Self {
            op: op_b.clone(),
            grid,
            pinv,
            range,
        })
    }

    pub fn op(&self) -> &DiffOp {
        &self.op
    }

    /// Largest `|psi^(xi) - B B^+ psi^(xi)|` relative to `|psi|_{L^2}`, with its frequency.
    pub fn range_residual(&self, spec: &SpectralField) -> (f64, Vec<i64>) {
        let scale = spec.energy().sqrt();
        let mut worst = (0.0_f64, vec![0; self.grid.dim()]);
        if scale == 0.0 {
            return worst;
        }
        for idx in 1..self.grid.len() {
            let r = self.range[idx].as_ref().expect("nonzero modes are filled");
            let c = spec.at(idx);
            let mut res = 0.0;
            for (i, ci) in c.iter().enumerate() {
                let mut acc = *ci;
                for (k, ck) in c.iter().enumerate() {
                    acc -= ck * r[(i, k)];
                }
                res += acc.norm_sqr();
            }
            let res = res.sqrt() / scale;
            if res > worst.0 {
                worst = (res, self.grid.freq(idx));
            }
        }
        worst
    }

    /// The pseudo-inverse primitive of a zero-mean field in the range of `B`.
    pub fn primitive(&self, psi: &PeriodicField) -> Result<PeriodicField> {
        if psi.grid() != self.grid || psi.fiber() != self.op.target_dim() {
            return Err(Error::DimensionMismatch(format!(
                "potential image is R^{}, field is R^{}",
                self.op.target_dim(),
                psi.fiber()
            )));
        }
        check_zero_mean(psi)?;
        let spec = transform(psi)?;
        let (residual, freq) = self.range_residual(&spec);
        if residual > RANGE_TOL {
            return Err(Error::NotInRange { freq, residual });
        }
        Ok(self.apply_pinv(&spec))
    }

    /// `F^{-1}[B^+(xi) psi^(xi)]` without the range check; components outside
    /// the range are dropped.
    pub fn primitive_unchecked(&self, psi: &PeriodicField) -> Result<PeriodicField> {
        if psi.grid() != self.grid || psi.fiber() != self.op.target_dim() {
            return Err(Error::DimensionMismatch(format!(
                "potential image is R^{}, field is R^{}",
                self.op.target_dim(),
                psi.fiber()
            )));
        }
        Ok(self.apply_pinv(&transform(psi)?))
    }

    fn apply_pinv(&self, spec: &SpectralField) -> PeriodicField {
        let factor = C64::new(1.0, 0.0) / self.op.symbol_factor();
        let phi = spectral::apply_mode_matrices(spec, self.op.source_dim(), factor, |idx| {
            self.pinv[idx].clone()
        });
        inverse_transform(&phi)
    }
}

/// `psi = B phi` with `phi` the pseudo-inverse primitive.
#[derive(Clone, Debug)]
pub struct PrimitivePair {
    pub psi: PeriodicField,
    pub phi: PeriodicField,
    pub op_b: DiffOp,
}

pub fn primitive(op_b: &DiffOp, psi: &PeriodicField) -> Result<PrimitivePair> {
    let phi = PrimitiveTable::new(op_b, psi.grid())?.primitive(psi)?;
    Ok(PrimitivePair {
        psi: psi.clone(),
        phi,
        op_b: op_b.clone(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveBounds {
    /// `|phi|_{L^p} / |psi|_{W^{-l,p}}`.
    pub c_ii: f64,
    /// `|phi|_{W^{l,p}} / |psi|_{L^p}`.
    pub c_iii: f64,
    /// `max_i |phi|_{W^{l-i,p}} / |psi|_{W^{-1,p}}`.
    pub c_iv: f64,
}

pub fn primitive_bounds_report(pair: &PrimitivePair, p: f64) -> Result<PrimitiveBounds> {
    let l = pair.op_b.order() as i32;
    let denom = |v: f64, what: &str| {
        if v > 0.0 {
            Ok(v)
        } else {
            Err(Error::ZeroDenominator(format!("{what} of psi vanishes")))
        }
    };
    let psi_neg_l = denom(spectral::sobolev_norm(&pair.psi, -l, p)?, "W^{-l,p} norm")?;
    let psi_lp = denom(spectral::sobolev_norm(&pair.psi, 0, p)?, "L^p norm")?;
    let psi_neg_1 = denom(spectral::sobolev_norm(&pair.psi, -1, p)?, "W^{-1,p} norm")?;
    let c_ii = spectral::sobolev_norm(&pair.phi, 0, p)? / psi_neg_l;
    let c_iii = spectral::full_sobolev_norm(&pair.phi, l, p)? / psi_lp;
    let mut c_iv = 0.0_f64;
    for i in 1..=l {
        c_iv = c_iv.max(spectral::full_sobolev_norm(&pair.phi, l - i, p)? / psi_neg_1);
    }
    Ok(PrimitiveBounds { c_ii, c_iii, c_iv })
}

/// `tau_k(z) = z` for `|z| <= k`, else `k z / |z|`.
pub fn truncate_point(z: &[f64], k: f64) -> Vec<f64> {
    let n = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n <= k {
        z.to_vec()
    } else {
        z.iter().map(|v| k * v / n).collect()
    }
}

pub fn truncate(field: &PeriodicField, k: f64) -> Result<PeriodicField> {
    if !(k > 0.0) {
        return Err(Error::InvalidParameter(format!("truncation level {k} must be positive")));
    }
    Ok(field.map_points(field.fiber(), |z, out| {
        out.copy_from_slice(&truncate_point(z, k))
    }))
}
