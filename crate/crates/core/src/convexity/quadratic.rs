use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::opsym::linalg::full_svd;
use crate::opsym::sampling::{sphere_samples, DEFAULT_SEED};
use crate::opsym::{DiffOp, RANK_TOL};
use crate::projection::afree_residual;
use crate::spectral::{check_zero_mean, transform, PeriodicField};
use crate::{Error, Result};

pub const LAMBDA_CONVEX_TOL: f64 = 1e-10;
const AFREE_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaConvexityReport {
    /// `min M l . l` over unit `l` in the sampled kernels; `None` if every
    /// sampled kernel is trivial.
    pub min_quadratic_on_cone: Option<f64>,
    pub is_lambda_convex: bool,
    pub n_dirs: usize,
    /// Smallest eigenvalue of `M` itself.
    pub min_eigenvalue: f64,
}

fn check_form(m: &DMatrix<f64>, n: usize) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "form is {}x{}, operator acts on R^{n}",
            m.nrows(),
            m.ncols()
        )));
    }
    if (m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
        return Err(Error::InvalidParameter("form must be symmetric".into()));
    }
    Ok(())
}

/// Minimum of `M l . l` over unit `l` in `ker S(xi)` for sampled directions.
pub fn lambda_convexity_check(
    m: &DMatrix<f64>,
    op: &DiffOp,
    n_dirs: usize,
) -> Result<LambdaConvexityReport> {
    check_form(m, op.source_dim())?;
    let mut min: Option<f64> = None;
    for xi in sphere_samples(op.dim(), n_dirs, DEFAULT_SEED) {
        let k = full_svd(&op.real_symbol(&xi)).kernel(RANK_TOL);
        if k.ncols() == 0 {
            continue;
        }
        let reduced = k.transpose() * m * &k;
        let e = SymmetricEigen::new(reduced).eigenvalues.min();
        min = Some(min.map_or(e, |v: f64| v.min(e)));
    }
    Ok(LambdaConvexityReport {
        min_quadratic_on_cone: min,
        is_lambda_convex: min.is_none_or(|v| v >= -LAMBDA_CONVEX_TOL),
        n_dirs,
        min_eigenvalue: SymmetricEigen::new(m.clone()).eigenvalues.min(),
    })
}

/// `int M psi . psi` evaluated as `sum_xi Re(M psi^(xi) . conj psi^(xi))`.
pub fn quadratic_aqc_value(m: &DMatrix<f64>, op: &DiffOp, psi: &PeriodicField) -> Result<f64> {
    check_form(m, psi.fiber())?;
    check_zero_mean(psi)?;
    let r = afree_residual(op, psi)?;
    if r > AFREE_TOL {
        return Err(Error::NotAFree(r));
    }
    let spec = transform(psi)?;
    let n = psi.fiber();
    let mut s = 0.0;
    for c in spec.modes() {
        for i in 0..n {
            for j in 0..n {
                s += m[(i, j)] * (c[j] * c[i].conj()).re;
            }
        }
    }
    Ok(s)
}
