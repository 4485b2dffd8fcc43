//! Built-in operators and their potential partners.
//!
//! Matrix-valued fields `F: Q -> R^{m x d}` are flattened row-major, so entry
//! `(i, j)` sits at `i * d + j`. Symmetric tensors use Mandel packing: the
//! diagonal first, then `sqrt(2) E_ij` for `i < j` in lexicographic order,
//! which makes the Euclidean norm of the packed vector the Frobenius norm.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{DiffOp, MultiIndex};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "builtin", rename_all = "lowercase")]
pub enum Builtin {
    /// Gradient of an `R^m`-valued potential.
    Grad { m: usize, d: usize },
    /// Row-wise curl of an `R^{m x d}` field (standard curl when `d = 3`).
    Curl { m: usize, d: usize },
    /// Row-wise divergence of an `R^{m x d}` field.
    Div { m: usize, d: usize },
    /// Saint-Venant incompatibility on Mandel-packed symmetric tensors.
    CurlCurl { d: usize },
    /// Symmetrised gradient of an `R^d`-valued potential, Mandel-packed.
    SymGrad { d: usize },
}

impl Builtin {
    pub fn parse(tag: &str, d: usize, m: Option<usize>) -> Result<Self> {
        let m = m.unwrap_or(1);
        let b = match tag {
            "grad" => Builtin::Grad { m, d },
            "curl" => Builtin::Curl { m, d },
            "div" => Builtin::Div { m, d },
            "curlcurl" => Builtin::CurlCurl { d },
            "symgrad" => Builtin::SymGrad { d },
            other => return Err(Error::UnknownTag(other.to_string())),
        };
        Ok(b)
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Builtin::Grad { .. } => "grad",
            Builtin::Curl { .. } => "curl",
            Builtin::Div { .. } => "div",
            Builtin::CurlCurl { .. } => "curlcurl",
            Builtin::SymGrad { .. } => "symgrad",
        }
    }

    /// The registered potential `B` with `im B(xi) = ker A(xi)`, if any.
    pub fn potential(&self) -> Option<Builtin> {
        match *self {
            Builtin::Curl { m, d } => Some(Builtin::Grad { m, d }),
            Builtin::Div { m, d: 3 } => Some(Builtin::Curl { m, d: 3 }),
            Builtin::CurlCurl { d } => Some(Builtin::SymGrad { d }),
            _ => None,
        }
    }

    pub fn build(self) -> Result<DiffOp> {
        let d = match self {
            Builtin::Grad { d, .. }
            | Builtin::Curl { d, .. }
            | Builtin::Div { d, .. }
            | Builtin::CurlCurl { d }
            | Builtin::SymGrad { d } => d,
        };
        if d == 0 {
            return Err(Error::InvalidOperator("dimension d must be positive".into()));
        }
        let (source, target, order, coeffs) = match self {
            Builtin::Grad { m, d } => {
                check_m(m)?;
                let mut b = Coeffs::new(d, m * d, m);
                for i in 0..m {
                    for j in 0..d {
                        b.add(&[j], i * d + j, i, 1.0);
                    }
                }
                (m, m * d, 1, b.finish())
            }
            Builtin::Curl { m, d } => {
                check_m(m)?;
                if d < 2 {
                    return Err(Error::InvalidOperator("curl needs d >= 2".into()));
                }
                let target = if d == 3 { 3 * m } else { m * d * (d - 1) / 2 };
                let mut b = Coeffs::new(d, target, m * d);
                for i in 0..m {
                    if d == 3 {
                        // (curl F_i)_c = d_{c+1} F_{i,c+2} - d_{c+2} F_{i,c+1}
                        for c in 0..3 {
                            let (p, q) = ((c + 1) % 3, (c + 2) % 3);
                            b.add(&[p], 3 * i + c, i * 3 + q, 1.0);
                            b.add(&[q], 3 * i + c, i * 3 + p, -1.0);
                        }
                    } else {
                        let pairs = d * (d - 1) / 2;
                        let mut r = 0;
                        for j in 0..d {
                            for l in (j + 1)..d {
                                // d_l F_ij - d_j F_il
                                b.add(&[l], i * pairs + r, i * d + j, 1.0);
                                b.add(&[j], i * pairs + r, i * d + l, -1.0);
                                r += 1;
                            }
                        }
                    }
                }
                (m * d, target, 1, b.finish())
            }
            Builtin::Div { m, d } => {
                check_m(m)?;
                let mut b = Coeffs::new(d, m, m * d);
                for i in 0..m {
                    for j in 0..d {
                        b.add(&[j], i, i * d + j, 1.0);
                    }
                }
                (m * d, m, 1, b.finish())
            }
            Builtin::SymGrad { d } => {
                let n_sym = d * (d + 1) / 2;
                let mut b = Coeffs::new(d, n_sym, d);
                for (row, (i, j)) in mandel_pairs(d).into_iter().enumerate() {
                    if i == j {
                        b.add(&[i], row, i, 1.0);
                    } else {
                        // sqrt(2) * (d_j u_i + d_i u_j) / 2
                        b.add(&[j], row, i, 1.0 / SQRT_2);
                        b.add(&[i], row, j, 1.0 / SQRT_2);
                    }
                }
                (d, n_sym, 1, b.finish())
            }
            Builtin::CurlCurl { d } => curl_curl(d)?,
        };
        DiffOp::from_parts(d, source, target, order, coeffs, Some(self))
    }
}

fn check_m(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidOperator("fiber rows m must be positive".into()));
    }
    Ok(())
}

/// Mandel ordering of the index pairs of a symmetric `d x d` tensor.
pub fn mandel_pairs(d: usize) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = (0..d).map(|i| (i, i)).collect();
    for i in 0..d {
        for j in (i + 1)..d {
            out.push((i, j));
        }
    }
    out
}

fn mandel_index(d: usize, i: usize, j: usize) -> (usize, f64) {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    let pos = mandel_pairs(d)
        .iter()
        .position(|&p| p == (a, b))
        .expect("pair in range");
    // E_ab = v / sqrt(2) off the diagonal
    (pos, if a == b { 1.0 } else { 1.0 / SQRT_2 })
}

fn levi_civita3(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

fn curl_curl(d: usize) -> Result<(usize, usize, usize, Vec<(MultiIndex, DMatrix<f64>)>)> {
    let n_sym = d * (d + 1) / 2;
    match d {
        2 => {
            // d_22 E_11 + d_11 E_22 - 2 d_12 E_12
            let mut b = Coeffs::new(2, 1, n_sym);
            b.add(&[1, 1], 0, 0, 1.0);
            b.add(&[0, 0], 0, 1, 1.0);
            b.add(&[0, 1], 0, 2, -SQRT_2);
            Ok((n_sym, 1, 2, b.finish()))
        }
        3 => {
            // inc(E)_ij = eps_ikl eps_jmn d_k d_m E_ln, kept for i <= j
            let rows = mandel_pairs(3);
            let mut b = Coeffs::new(3, rows.len(), n_sym);
            for (r, &(i, j)) in rows.iter().enumerate() {
                for k in 0..3 {
                    for l in 0..3 {
                        let e1 = levi_civita3(i, k, l);
                        if e1 == 0.0 {
                            continue;
                        }
                        for m in 0..3 {
                            for n in 0..3 {
                                let e2 = levi_civita3(j, m, n);
                                if e2 == 0.0 {
                                    continue;
                                }
                                let (col, scale) = mandel_index(3, l, n);
                                b.add(&[k, m], r, col, e1 * e2 * scale);
                            }
                        }
                    }
                }
            }
            Ok((n_sym, rows.len(), 2, b.finish()))
        }
        _ => Err(Error::InvalidOperator("curlcurl is available for d = 2, 3".into())),
    }
}

/// Accumulates coefficient matrices keyed by multi-index.
struct Coeffs {
    d: usize,
    rows: usize,
    cols: usize,
    map: BTreeMap<MultiIndex, DMatrix<f64>>,
}

impl Coeffs {
    fn new(d: usize, rows: usize, cols: usize) -> Self {
        Self {
            d,
            rows,
            cols,
            map: BTreeMap::new(),
        }
    }

    /// Adds `value` at `(row, col)` of the coefficient of `prod_a d_{axes[a]}`.
    fn add(&mut self, axes: &[usize], row: usize, col: usize, value: f64) {
        let mut entries = vec![0u32; self.d];
        for &a in axes {
            entries[a] += 1;
        }
        let (rows, cols) = (self.rows, self.cols);
        let m = self
            .map
            .entry(MultiIndex::new(entries))
            .or_insert_with(|| DMatrix::zeros(rows, cols));
        m[(row, col)] += value;
    }

    fn finish(self) -> Vec<(MultiIndex, DMatrix<f64>)> {
        self.map.into_iter().filter(|(_, m)| m.amax() > 0.0).collect()
    }
}
