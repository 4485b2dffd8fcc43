//! Small dense helpers on top of nalgebra's SVD.

use nalgebra::{ComplexField, DMatrix};

/// Singular values (non-increasing) and a full set of right singular vectors.
///
/// The columns of `v` are ordered like `singular_values`, followed by the
/// vectors spanning the trailing null directions when the matrix is wide.
pub struct FullSvd<T: ComplexField> {
    pub singular_values: Vec<f64>,
    pub u: DMatrix<T>,
    pub v: DMatrix<T>,
}

pub fn full_svd<T>(a: &DMatrix<T>) -> FullSvd<T>
where
    T: ComplexField<RealField = f64>,
{
    let (rows, cols) = a.shape();
    // Pad wide matrices with zero rows so that V comes back square.
    let padded = if rows < cols {
        let mut p = DMatrix::<T>::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(true, true);
    let u_all = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();

    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));

    let mut v = DMatrix::<T>::zeros(cols, cols);
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..cols {
            v[(r, dst)] = v_t[(src, r)].clone().conjugate();
        }
    }
    let keep = rows.min(cols);
    let mut u = DMatrix::<T>::zeros(rows, keep);
    for (dst, &src) in order.iter().take(keep).enumerate() {
        for r in 0..rows {
            u[(r, dst)] = u_all[(r, src)].clone();
        }
    }
    let singular_values = order.iter().take(keep).map(|&i| sv[i]).collect();
    FullSvd {
        singular_values,
        u,
        v,
    }
}

/// Number of singular values at or above `tol * sigma_max`.
pub fn numerical_rank(singular_values: &[f64], tol: f64) -> usize {
    let max = singular_values.iter().copied().fold(0.0_f64, f64::max);
    if max == 0.0 {
        return 0;
    }
    singular_values.iter().filter(|&&s| s >= tol * max).count()
}

impl<T: ComplexField<RealField = f64>> FullSvd<T> {
    pub fn rank(&self, tol: f64) -> usize {
        numerical_rank(&self.singular_values, tol)
    }

    /// Orthonormal kernel basis as columns.
    pub fn kernel(&self, tol: f64) -> DMatrix<T> {
        let r = self.rank(tol);
        let n = self.v.ncols();
        self.v.columns(r, n - r).into_owned()
    }

    /// Orthonormal basis of the range as columns.
    pub fn range(&self, tol: f64) -> DMatrix<T> {
        let r = self.rank(tol);
        self.u.columns(0, r).into_owned()
    }

    /// Moore-Penrose pseudo-inverse, dropping singular values below `tol * sigma_max`.
    pub fn pseudo_inverse(&self, tol: f64) -> DMatrix<T> {
        let r = self.rank(tol);
        let rows = self.u.nrows();
        let cols = self.v.nrows();
        let mut out = DMatrix::<T>::zeros(cols, rows);
        for k in 0..r {
            let inv = T::from_real(1.0 / self.singular_values[k]);
            let vk = self.v.column(k);
            let uk = self.u.column(k);
            for i in 0..cols {
                let vi = vk[i].clone() * inv.clone();
                for j in 0..rows {
                    out[(i, j)] += vi.clone() * uk[j].clone().conjugate();
                }
            }
        }
        out
    }
}

/// Orthogonal projector `K K^H` onto the span of the orthonormal columns of `k`.
pub fn projector_from_basis<T>(k: &DMatrix<T>) -> DMatrix<T>
where
    T: ComplexField<RealField = f64>,
{
    k * k.adjoint()
}
