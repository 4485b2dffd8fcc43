//! Homogeneous constant-coefficient operators and their symbols.
//!
//! An operator `A = sum_{|alpha| = k} A_alpha d^alpha` maps `R^N`-valued
//! fields to `R^M`-valued ones. Its symbol is
//! `A(xi) = (2 pi i)^k sum A_alpha xi^alpha`; since every `A_alpha` is real the
//! symbol is a complex scalar times the real matrix
//! `S(xi) = sum A_alpha xi^alpha`, and kernels, projectors and
//! pseudo-inverses are obtained from `S` directly.

mod builtin;
pub mod linalg;
pub mod sampling;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use builtin::{mandel_pairs, Builtin};
use linalg::full_svd;

use crate::{Error, Result, C64};

/// Default relative singular-value threshold for rank decisions.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex {
    entries: Vec<u32>,
}

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn order(&self) -> usize {
        self.entries.iter().map(|&e| e as usize).sum()
    }

    /// `xi^alpha = prod_j xi_j^{alpha_j}`.
    pub fn monomial(&self, xi: &[f64]) -> f64 {
        self.entries
            .iter()
            .zip(xi)
            .map(|(&e, &x)| x.powi(e as i32))
            .product()
    }
}

/// One entry of a coefficient table.
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientEntry {
    pub alpha: Vec<u32>,
    /// Row-major `M x N` matrix.
    pub matrix: Vec<Vec<f64>>,
}

/// Explicit operator description as read from JSON.
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientTable {
    pub d: usize,
    #[serde(rename = "N")]
    pub n_source: usize,
    #[serde(rename = "M")]
    pub n_target: usize,
    pub k: usize,
    pub coeffs: Vec<CoefficientEntry>,
}

#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuiltinSpec {
    pub builtin: String,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
}

/// Either a built-in tag with dimension parameters or a coefficient table.
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OperatorSpec {
    Builtin(BuiltinSpec),
    Table(CoefficientTable),
}

impl OperatorSpec {
    pub fn builtin(tag: &str, d: usize, m: Option<usize>) -> Self {
        OperatorSpec::Builtin(BuiltinSpec {
            builtin: tag.to_string(),
            d,
            m,
        })
    }
}

/// A validated homogeneous operator of order `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffOp {
    d: usize,
    n_source: usize,
    n_target: usize,
    order: usize,
    coeffs: Vec<(MultiIndex, DMatrix<f64>)>,
    name: Option<Builtin>,
}

pub fn make_operator(spec: &OperatorSpec) -> Result<DiffOp> {
    match spec {
        OperatorSpec::Builtin(b) => Builtin::parse(&b.builtin, b.d, b.m)?.build(),
        OperatorSpec::Table(t) => DiffOp::from_table(t),
    }
}

impl DiffOp {
    pub(crate) fn from_parts(
        d: usize,
        n_source: usize,
        n_target: usize,
        order: usize,
        coeffs: Vec<(MultiIndex, DMatrix<f64>)>,
        name: Option<Builtin>,
    ) -> Result<Self> {
        if d == 0 || n_source == 0 || n_target == 0 {
            return Err(Error::InvalidOperator(
                "d, N and M must all be positive".into(),
            ));
        }
        let mut merged: Vec<(MultiIndex, DMatrix<f64>)> = Vec::new();
        for (alpha, m) in coeffs {
            if alpha.dim() != d {
                return Err(Error::InvalidOperator(format!(
                    "multi-index {:?} has length {}, expected {d}",
                    alpha.entries(),
                    alpha.dim()
                )));
            }
            if alpha.order() != order {
                return Err(Error::OrderMismatch {
                    alpha: alpha.entries().to_vec(),
                    found: alpha.order(),
                    expected: order,
                });
            }
            if m.shape() != (n_target, n_source) {
                return Err(Error::InvalidOperator(format!(
                    "coefficient for {:?} is {}x{}, expected {n_target}x{n_source}",
                    alpha.entries(),
                    m.nrows(),
                    m.ncols()
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("operator coefficients".into()));
            }
            match merged.iter_mut().find(|(a, _)| *a == alpha) {
                Some((_, acc)) => *acc += m,
                None => merged.push((alpha, m)),
            }
        }
        merged.retain(|(_, m)| m.amax() > 0.0);
        if merged.is_empty() {
            return Err(Error::ZeroOperator);
        }
        merged.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(Self {
            d,
            n_source,
            n_target,
            order,
            coeffs: merged,
            name,
        })
    }

    pub fn from_table(t: &CoefficientTable) -> Result<Self> {
        let mut coeffs = Vec::with_capacity(t.coeffs.len());
        for e in &t.coeffs {
            if e.matrix.len() != t.n_target || e.matrix.iter().any(|r| r.len() != t.n_source) {
                return Err(Error::InvalidOperator(format!(
                    "coefficient for {:?} must be {}x{}",
                    e.alpha, t.n_target, t.n_source
                )));
            }
            let flat: Vec<f64> = e.matrix.iter().flatten().copied().collect();
            coeffs.push((
                MultiIndex::new(e.alpha.clone()),
                DMatrix::from_row_slice(t.n_target, t.n_source, &flat),
            ));
        }
        Self::from_parts(t.d, t.n_source, t.n_target, t.k, coeffs, None)
    }

    pub fn to_table(&self) -> CoefficientTable {
        CoefficientTable {
            d: self.d,
            n_source: self.n_source,
            n_target: self.n_target,
            k: self.order,
            coeffs: self
                .coeffs
                .iter()
                .map(|(a, m)| CoefficientEntry {
                    alpha: a.entries().to_vec(),
                    matrix: (0..m.nrows())
                        .map(|r| m.row(r).iter().copied().collect())
                        .collect(),
                })
                .collect(),
        }
    }

    /// Spatial dimension `d`.
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Source fiber dimension `N`.
    pub fn source_dim(&self) -> usize {
        self.n_source
    }

    /// Target fiber dimension `M`.
    pub fn target_dim(&self) -> usize {
        self.n_target
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coefficients(&self) -> &[(MultiIndex, DMatrix<f64>)] {
        &self.coeffs
    }

    pub fn builtin(&self) -> Option<Builtin> {
        self.name
    }

    pub fn name(&self) -> String {
        match self.name {
            Some(b) => b.tag().to_string(),
            None => "table".to_string(),
        }
    }

    /// The registered potential partner, for built-ins that have one.
    pub fn potential(&self) -> Option<DiffOp> {
        self.name.and_then(|b| b.potential()).and_then(|b| b.build().ok())
    }

    /// `(2 pi i)^k`.
    pub fn symbol_factor(&self) -> C64 {
        C64::new(0.0, 2.0 * PI).powi(self.order as i32)
    }

    /// `S(xi) = sum A_alpha xi^alpha` at an arbitrary (unnormalised) `xi`.
    pub fn real_symbol(&self, xi: &[f64]) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.n_target, self.n_source);
        for (alpha, m) in &self.coeffs {
            let w = alpha.monomial(xi);
            if w != 0.0 {
                s += m * w;
            }
        }
        s
    }

    /// The full symbol `(2 pi i)^k S(xi)` at an unnormalised `xi`.
    pub fn symbol_matrix(&self, xi: &[f64]) -> DMatrix<C64> {
        let f = self.symbol_factor();
        self.real_symbol(xi).map(|v| f * v)
    }

    /// The same operator acting on the block `offset..offset + N` of a
    /// `total`-dimensional fiber.
    pub fn embed(&self, total: usize, offset: usize) -> Result<DiffOp> {
        if offset + self.n_source > total {
            return Err(Error::DimensionMismatch(format!(
                "block {offset}..{} exceeds fiber {total}",
                offset + self.n_source
            )));
        }
        let coeffs = self
            .coeffs
            .iter()
            .map(|(a, m)| {
                let mut big = DMatrix::zeros(self.n_target, total);
                big.view_mut((0, offset), (self.n_target, self.n_source))
                    .copy_from(m);
                (a.clone(), big)
            })
            .collect();
        DiffOp::from_parts(self.d, total, self.n_target, self.order, coeffs, None)
    }

    fn check_xi(&self, xi: &[f64]) -> Result<()> {
        if xi.len() != self.d {
            return Err(Error::DimensionMismatch(format!(
                "frequency has length {}, operator dimension is {}",
                xi.len(),
                self.d
            )));
        }
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("frequency".into()));
        }
        if xi.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroFrequency);
        }
        Ok(())
    }
}

fn unit(xi: &[f64]) -> Vec<f64> {
    let n = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    xi.iter().map(|x| x / n).collect()
}

fn complexify(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|v| C64::new(v, 0.0))
}

/// Symbol data at a unit direction.
#[derive(Clone, Debug)]
pub struct SymbolSample {
    pub xi: Vec<f64>,
    pub matrix: DMatrix<C64>,
    pub rank: usize,
    /// Orthonormal kernel basis as columns (real-valued entries).
    pub kernel_basis: DMatrix<C64>,
    pub singular_values: Vec<f64>,
}

pub fn symbol(op: &DiffOp, xi: &[f64]) -> Result<SymbolSample> {
    op.check_xi(xi)?;
    let xi = unit(xi);
    let s = op.real_symbol(&xi);
    let svd = full_svd(&s);
    let scale = (2.0 * PI).powi(op.order as i32);
    let rank = svd.rank(RANK_TOL);
    Ok(SymbolSample {
        matrix: s.map(|v| op.symbol_factor() * v),
        rank,
        kernel_basis: complexify(&svd.kernel(RANK_TOL)),
        singular_values: svd.singular_values.iter().map(|s| s * scale).collect(),
        xi,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub min_rank: usize,
    pub max_rank: usize,
    pub sample_count: usize,
    pub tol: f64,
    pub is_constant_rank: bool,
    /// Directions realising the minimal and the maximal rank.
    pub witness_xis: Vec<Vec<f64>>,
}

pub fn constant_rank_check(op: &DiffOp, n_samples: usize, tol: f64) -> Result<RankReport> {
    constant_rank_check_seeded(op, n_samples, tol, sampling::DEFAULT_SEED)
}

pub fn constant_rank_check_seeded(
    op: &DiffOp,
    n_samples: usize,
    tol: f64,
    seed: u64,
) -> Result<RankReport> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidParameter(format!("tol = {tol} not in (0, 1)")));
    }
    let xis = sampling::sphere_samples(op.d, n_samples, seed);
    let mut min = (usize::MAX, Vec::new());
    let mut max = (0usize, Vec::new());
    for xi in &xis {
        let svd = full_svd(&op.real_symbol(xi));
        let r = svd.rank(tol);
        if r < min.0 {
            min = (r, xi.clone());
        }
        if r > max.0 || max.1.is_empty() {
            max = (r.max(max.0), xi.clone());
        }
    }
    let mut witness_xis = vec![min.1];
    if min.0 != max.0 {
        witness_xis.push(max.1);
    }
    Ok(RankReport {
        min_rank: min.0,
        max_rank: max.0,
        sample_count: xis.len(),
        tol,
        is_constant_rank: min.0 == max.0,
        witness_xis,
    })
}

/// Real orthonormal kernel bases of the symbol at each direction.
pub fn wave_cone_sample(op: &DiffOp, xis: &[Vec<f64>]) -> Result<Vec<(Vec<f64>, DMatrix<f64>)>> {
    xis.iter()
        .map(|xi| {
            op.check_xi(xi)?;
            let xi = unit(xi);
            let k = full_svd(&op.real_symbol(&xi)).kernel(RANK_TOL);
            Ok((xi, k))
        })
        .collect()
}

/// Orthogonal projector onto `ker S(xi)`; real because `S` is.
pub fn real_projector(op: &DiffOp, xi: &[f64]) -> Result<DMatrix<f64>> {
    op.check_xi(xi)?;
    let k = full_svd(&op.real_symbol(&unit(xi))).kernel(RANK_TOL);
    Ok(linalg::projector_from_basis(&k))
}

pub fn projector_symbol(op: &DiffOp, xi: &[f64]) -> Result<DMatrix<C64>> {
    real_projector(op, xi).map(|p| complexify(&p))
}

/// Pseudo-inverse of the real part `S(xi)`; the full symbol's pseudo-inverse
/// is this divided by `(2 pi i)^l`.
pub fn real_pseudo_inverse(op: &DiffOp, xi: &[f64]) -> Result<DMatrix<f64>> {
    op.check_xi(xi)?;
    Ok(full_svd(&op.real_symbol(xi)).pseudo_inverse(RANK_TOL))
}

pub fn pseudo_inverse_symbol(op: &DiffOp, xi: &[f64]) -> Result<DMatrix<C64>> {
    let f = C64::new(1.0, 0.0) / op.symbol_factor();
    real_pseudo_inverse(op, xi).map(|p| p.map(|v| f * v))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompatReport {
    /// Largest `|A(xi) B(xi)| / (|A(xi)| |B(xi)|)` over the samples.
    pub max_product_residual: f64,
    /// Samples with `rank B(xi) != dim ker A(xi)`.
    pub rank_defect_count: usize,
    pub sample_count: usize,
    pub tol: f64,
    pub compatible: bool,
}

pub fn potential_compat_check(
    op_a: &DiffOp,
    op_b: &DiffOp,
    n_samples: usize,
    tol: f64,
) -> Result<CompatReport> {
    if op_a.d != op_b.d || op_b.n_target != op_a.n_source {
        return Err(Error::DimensionMismatch(format!(
            "potential maps R^{} -> R^{} in d = {}, constraint acts on R^{} in d = {}",
            op_b.n_source, op_b.n_target, op_b.d, op_a.n_source, op_a.d
        )));
    }
    let xis = sampling::sphere_samples(op_a.d, n_samples, sampling::DEFAULT_SEED);
    let mut max_res = 0.0_f64;
    let mut defects = 0;
    for xi in &xis {
        let sa = op_a.real_symbol(xi);
        let sb = op_b.real_symbol(xi);
        let denom = sa.norm() * sb.norm();
        let res = if denom > 0.0 {
            (&sa * &sb).norm() / denom
        } else {
            0.0
        };
        max_res = max_res.max(res);
        let ker_a = op_a.n_source - full_svd(&sa).rank(RANK_TOL);
        if full_svd(&sb).rank(RANK_TOL) != ker_a {
            defects += 1;
        }
    }
    Ok(CompatReport {
        max_product_residual: max_res,
        rank_defect_count: defects,
        sample_count: xis.len(),
        tol,
        compatible: max_res <= tol && defects == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(tag: &str, d: usize, m: Option<usize>) -> DiffOp {
        make_operator(&OperatorSpec::builtin(tag, d, m)).unwrap()
    }

    fn close(a: &DMatrix<C64>, b: &DMatrix<C64>, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn div3_shape_and_coefficients() {
        let div = op("div", 3, None);
        assert_eq!((div.source_dim(), div.target_dim(), div.order()), (3, 1, 1));
        for (i, (alpha, m)) in div.coefficients().iter().rev().enumerate() {
            let mut e = [0; 3];
            e[i] = 1;
            assert_eq!(alpha.entries(), &e[..]);
            assert_eq!(m[(0, i)], 1.0);
            assert_eq!(m.sum(), 1.0);
        }
    }

    #[test]
    fn planar_curl_symbol() {
        let curl = op("curl", 2, Some(1));
        assert_eq!(curl.target_dim(), 1);
        let s = curl.real_symbol(&[0.3, 0.7]);
        // xi_2 l_1 - xi_1 l_2
        assert!((s[(0, 0)] - 0.7).abs() < 1e-15 && (s[(0, 1)] + 0.3).abs() < 1e-15);
        let sample = symbol(&curl, &[1.0, 0.0]).unwrap();
        assert_eq!(sample.rank, 1);
        let k = &sample.kernel_basis;
        assert_eq!(k.ncols(), 1);
        assert!((k[(0, 0)].norm() - 1.0).abs() < 1e-14 && k[(1, 0)].norm() < 1e-14);
    }

    #[test]
    fn mixed_order_table_is_rejected() {
        let t = CoefficientTable {
            d: 2,
            n_source: 1,
            n_target: 1,
            k: 2,
            coeffs: vec![
                CoefficientEntry {
                    alpha: vec![2, 0],
                    matrix: vec![vec![1.0]],
                },
                CoefficientEntry {
                    alpha: vec![1, 0],
                    matrix: vec![vec![1.0]],
                },
            ],
        };
        let err = DiffOp::from_table(&t).unwrap_err();
        assert!(err.to_string().contains("coefficient order mismatch"));
    }

    #[test]
    fn zero_table_and_unknown_tag() {
        let t = CoefficientTable {
            d: 1,
            n_source: 1,
            n_target: 1,
            k: 1,
            coeffs: vec![CoefficientEntry {
                alpha: vec![1],
                matrix: vec![vec![0.0]],
            }],
        };
        assert!(matches!(DiffOp::from_table(&t), Err(Error::ZeroOperator)));
        assert!(matches!(
            make_operator(&OperatorSpec::builtin("rot", 2, None)),
            Err(Error::UnknownTag(_))
        ));
    }

    #[test]
    fn table_round_trip_through_json() {
        let curl = op("curl", 3, Some(2));
        let json = serde_json::to_string(&OperatorSpec::Table(curl.to_table())).unwrap();
        let spec: OperatorSpec = serde_json::from_str(&json).unwrap();
        let back = make_operator(&spec).unwrap();
        assert_eq!(back.coefficients(), curl.coefficients());
        let spec: OperatorSpec =
            serde_json::from_str(r#"{"builtin": "grad", "d": 2, "m": 2}"#).unwrap();
        assert_eq!(make_operator(&spec).unwrap().target_dim(), 4);
    }

    #[test]
    fn div_symbol_at_axis() {
        let div = op("div", 3, None);
        let s = symbol(&div, &[2.0, 0.0, 0.0]).unwrap();
        let two_pi_i = C64::new(0.0, 2.0 * PI);
        assert!((s.matrix[(0, 0)] - two_pi_i).norm() < 1e-14);
        assert_eq!(s.rank, 1);
        assert_eq!(s.kernel_basis.ncols(), 2);
        assert!(s.kernel_basis.row(0).norm() < 1e-14);
        assert!((s.singular_values[0] - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn scalar_grad_symbol_is_injective() {
        let g = op("grad", 2, Some(1));
        let s = symbol(&g, &[0.0, 1.0]).unwrap();
        assert_eq!(s.rank, 1);
        assert_eq!(s.kernel_basis.ncols(), 0);
        assert!((s.matrix[(1, 0)] - C64::new(0.0, 2.0 * PI)).norm() < 1e-14);
        assert!(s.matrix[(0, 0)].norm() == 0.0);
    }

    #[test]
    fn zero_frequency_is_an_error() {
        let g = op("grad", 2, Some(1));
        assert!(matches!(symbol(&g, &[0.0, 0.0]), Err(Error::ZeroFrequency)));
        assert!(matches!(
            pseudo_inverse_symbol(&g, &[0.0, 0.0]),
            Err(Error::ZeroFrequency)
        ));
        assert!(matches!(
            projector_symbol(&g, &[0.0, 0.0]),
            Err(Error::ZeroFrequency)
        ));
    }

    #[test]
    fn rank_reports() {
        let curl = op("curl", 2, Some(2));
        assert!(constant_rank_check(&curl, 200, 1e-10).unwrap().is_constant_rank);
        let div = op("div", 3, None);
        let r = constant_rank_check(&div, 200, 1e-10).unwrap();
        assert_eq!((r.min_rank, r.max_rank), (1, 1));
        let diag = DiffOp::from_table(&CoefficientTable {
            d: 2,
            n_source: 2,
            n_target: 2,
            k: 1,
            coeffs: vec![
                CoefficientEntry {
                    alpha: vec![1, 0],
                    matrix: vec![vec![1.0, 0.0], vec![0.0, 0.0]],
                },
                CoefficientEntry {
                    alpha: vec![0, 1],
                    matrix: vec![vec![0.0, 0.0], vec![0.0, 1.0]],
                },
            ],
        })
        .unwrap();
        let r = constant_rank_check(&diag, 50, 1e-10).unwrap();
        assert!(!r.is_constant_rank);
        assert_eq!((r.min_rank, r.max_rank), (1, 2));
        assert_eq!(r.witness_xis.len(), 2);
        assert!(constant_rank_check(&diag, 0, 1e-10).is_err());
        assert!(constant_rank_check(&diag, 10, 1.0).is_err());
    }

    #[test]
    fn curl_wave_cone_is_rank_one() {
        let curl = op("curl", 2, Some(2));
        let xis = sampling::sphere_samples(2, 30, 3);
        for (xi, k) in wave_cone_sample(&curl, &xis).unwrap() {
            assert_eq!(k.ncols(), 2);
            for c in 0..2 {
                let f = DMatrix::from_row_slice(2, 2, k.column(c).as_slice());
                let sv = f.singular_values();
                assert!(sv.min() < 1e-12, "basis matrix not rank one at {xi:?}");
            }
        }
        assert!(wave_cone_sample(&curl, &[]).unwrap().is_empty());
    }

    #[test]
    fn div_wave_cone_spans_space() {
        let div = op("div", 3, None);
        let cones = wave_cone_sample(&div, &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        let all = DMatrix::from_columns(
            &cones
                .iter()
                .flat_map(|(_, k)| k.column_iter().map(|c| c.into_owned()).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
        );
        assert_eq!(full_svd(&all).rank(1e-10), 3);
    }

    #[test]
    fn grad_pseudo_inverse_closed_form() {
        let g = op("grad", 2, Some(1));
        let p = pseudo_inverse_symbol(&g, &[1.0, 0.0]).unwrap();
        let inv = C64::new(1.0, 0.0) / C64::new(0.0, 2.0 * PI);
        assert_eq!(p.shape(), (1, 2));
        assert!((p[(0, 0)] - inv).norm() < 1e-15 && p[(0, 1)].norm() < 1e-15);
        let p2 = pseudo_inverse_symbol(&g, &[2.0, 0.0]).unwrap();
        assert!(close(&p2, &p.map(|v| v / 2.0), 1e-15));
    }

    #[test]
    fn div_projector_at_axis() {
        let div = op("div", 3, None);
        let p = real_projector(&div, &[0.0, 0.0, 1.0]).unwrap();
        let expected = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1.0, 0.0]));
        assert!((p - expected).norm() < 1e-14);
        let curl = op("curl", 2, Some(2));
        let p = real_projector(&curl, &[1.0, 0.0]).unwrap();
        assert!((p.trace() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn builtin_pairs_are_compatible() {
        for a in [op("curl", 2, Some(2)), op("div", 3, None), op("curlcurl", 2, None), op("curlcurl", 3, None), op("curl", 3, Some(3))] {
            let b = a.potential().expect("registered partner");
            let r = potential_compat_check(&a, &b, 300, 1e-10).unwrap();
            assert!(r.compatible, "{} failed: {r:?}", a.name());
        }
        let r = potential_compat_check(&op("div", 3, None), &op("grad", 3, Some(1)), 50, 1e-10)
            .unwrap();
        assert!(!r.compatible);
        assert!(r.max_product_residual > 0.5);
        assert!(potential_compat_check(&op("div", 3, None), &op("grad", 2, Some(1)), 5, 1e-10)
            .is_err());
    }

    #[test]
    fn embedding_pads_columns() {
        let curl = op("curl", 2, Some(2));
        let e = curl.embed(6, 2).unwrap();
        assert_eq!(e.source_dim(), 6);
        let s = e.real_symbol(&[0.4, 0.9]);
        assert!(s.columns(0, 2).norm() == 0.0);
        assert_eq!(s.columns(2, 4).into_owned(), curl.real_symbol(&[0.4, 0.9]));
        assert!(curl.embed(5, 2).is_err());
    }
}
