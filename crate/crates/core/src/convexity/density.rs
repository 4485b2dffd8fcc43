//! Energy densities and the built-in registry.

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A `C^2` function on `R^N` with analytic derivatives.
pub trait Density: Debug + Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, z: &[f64]) -> f64;
    fn gradient(&self, z: &[f64], out: &mut [f64]);
    fn hessian(&self, z: &[f64]) -> DMatrix<f64>;
}

/// Sampled constants of `|W| <= c_upper (1 + |z|^p)` and
/// `W >= c_lower (|z|^p - 1)`; a non-positive `c_lower` means coercivity
/// failed on the samples and the lower bound carries no information.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthConstants {
    pub c_upper: f64,
    pub c_lower: f64,
}

#[derive(Clone, Debug)]
pub struct EnergyDensity {
    pub name: String,
    pub p: f64,
    pub growth: GrowthConstants,
    pub warnings: Vec<String>,
    inner: Arc<dyn Density>,
}

impl EnergyDensity {
    pub fn new(name: impl Into<String>, p: f64, inner: Arc<dyn Density>) -> Result<Self> {
        if !(p >= 2.0) || !p.is_finite() {
            return Err(Error::InvalidParameter(format!("growth exponent p = {p} must be >= 2")));
        }
        let growth = fit_growth(inner.as_ref(), p);
        let mut warnings = Vec::new();
        if growth.c_lower <= 0.0 {
            warnings.push(format!(
                "p-coercivity fails on samples (c_lower = {:e})",
                growth.c_lower
            ));
        }
        Ok(Self {
            name: name.into(),
            p,
            growth,
            warnings,
            inner,
        })
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        self.inner.value(z)
    }

    pub fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.inner.gradient(z, &mut g);
        g
    }

    pub fn gradient_into(&self, z: &[f64], out: &mut [f64]) {
        self.inner.gradient(z, out)
    }

    pub fn hessian(&self, z: &[f64]) -> DMatrix<f64> {
        self.inner.hessian(z)
    }

    pub fn inner(&self) -> &Arc<dyn Density> {
        &self.inner
    }

    /// Same callbacks with a different growth exponent.
    pub fn with_p(&self, p: f64) -> Result<Self> {
        Self::new(self.name.clone(), p, self.inner.clone())
    }
}

const GROWTH_RADII: [f64; 12] = [0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.1, 1.5, 2.0, 4.0, 8.0, 16.0];
const GROWTH_DIRECTIONS: usize = 64;

/// Seeded points of the radius sweep used for the growth constants.
pub fn growth_samples(n: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e0_0717);
    let mut out = Vec::with_capacity(GROWTH_RADII.len() * GROWTH_DIRECTIONS);
    for &r in &GROWTH_RADII {
        for _ in 0..GROWTH_DIRECTIONS {
            let mut z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            z.iter_mut().for_each(|v| *v *= r / norm);
            out.push(z);
        }
    }
    out
}

fn fit_growth(w: &dyn Density, p: f64) -> GrowthConstants {
    let mut c_upper = 0.0_f64;
    let mut lower_max = f64::INFINITY;
    let mut lower_min = f64::NEG_INFINITY;
    for z in growth_samples(w.dim()) {
        let rp = z.iter().map(|v| v * v).sum::<f64>().sqrt().powf(p);
        let val = w.value(&z);
        c_upper = c_upper.max(val.abs() / (1.0 + rp));
        // W >= c (r^p - 1)
        if rp > 1.0 {
            lower_max = lower_max.min(val / (rp - 1.0));
        } else if rp < 1.0 {
            lower_min = lower_min.max(val / (rp - 1.0));
        }
    }
    let c_lower = if lower_max >= lower_min { lower_max } else { lower_max.min(0.0) };
    GrowthConstants { c_upper, c_lower }
}

/// `|V(z)|^2 = |z|^2 + |z|^p`.
pub fn v_squared(z: &[f64], p: f64) -> f64 {
    let a: f64 = z.iter().map(|v| v * v).sum();
    a + if p == 2.0 { a } else { a.powf(p / 2.0) }
}

/// `D |V|^2 (z) = (2 + p |z|^{p-2}) z`.
pub fn v_squared_gradient(z: &[f64], p: f64, out: &mut [f64]) {
    let r2: f64 = z.iter().map(|v| v * v).sum();
    let s = 2.0 + if r2 == 0.0 { if p == 2.0 { 2.0 } else { 0.0 } } else { p * r2.powf(p / 2.0 - 1.0) };
    out.iter_mut().zip(z).for_each(|(o, v)| *o = s * v);
}

/// One radial term `c |z|^e`.
fn radial_terms_hessian(z: &[f64], terms: &[(f64, f64)]) -> DMatrix<f64> {
    let n = z.len();
    let r2: f64 = z.iter().map(|v| v * v).sum();
    let zz = DMatrix::from_fn(n, n, |i, j| z[i] * z[j]);
    let mut h = DMatrix::zeros(n, n);
    for &(c, e) in terms {
        if e == 0.0 {
            continue;
        }
        if r2 == 0.0 {
            if e == 2.0 {
                h += DMatrix::identity(n, n) * (2.0 * c);
            }
            continue;
        }
        let a = c * e * r2.powf(e / 2.0 - 1.0);
        h += DMatrix::identity(n, n) * a;
        if e != 2.0 {
            h += &zz * (c * e * (e - 2.0) * r2.powf(e / 2.0 - 2.0));
        }
    }
    h
}

/// `sum_t c_t |z|^{e_t}` with `e_t = 0` or `e_t >= 2`.
#[derive(Clone, Debug)]
pub struct Radial {
    pub n: usize,
    pub terms: Vec<(f64, f64)>,
}

impl Density for Radial {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, z: &[f64]) -> f64 {
        let r2: f64 = z.iter().map(|v| v * v).sum();
        self.terms
            .iter()
            .map(|&(c, e)| if e == 0.0 { c } else if e == 2.0 { c * r2 } else { c * r2.powf(e / 2.0) })
            .sum()
    }

    fn gradient(&self, z: &[f64], out: &mut [f64]) {
        let r2: f64 = z.iter().map(|v| v * v).sum();
        let mut s = 0.0;
        for &(c, e) in &self.terms {
            if e == 2.0 {
                s += 2.0 * c;
            } else if e > 2.0 && r2 > 0.0 {
                s += c * e * r2.powf(e / 2.0 - 1.0);
            }
        }
        out.iter_mut().zip(z).for_each(|(o, v)| *o = s * v);
    }

    fn hessian(&self, z: &[f64]) -> DMatrix<f64> {
        radial_terms_hessian(z, &self.terms)
    }
}

/// `1/2 z . M z` with symmetric `M`.
#[derive(Clone, Debug)]
pub struct Quadratic {
    pub m: DMatrix<f64>,
}

impl Density for Quadratic {
    fn dim(&self) -> usize {
        self.m.nrows()
    }

    fn value(&self, z: &[f64]) -> f64 {
        let n = self.dim();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += z[i] * self.m[(i, j)] * z[j];
            }
        }
        0.5 * s
    }

    fn gradient(&self, z: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..z.len()).map(|j| self.m[(i, j)] * z[j]).sum();
        }
    }

    fn hessian(&self, _z: &[f64]) -> DMatrix<f64> {
        self.m.clone()
    }
}

/// Hessian of `det F` on row-major `2 x 2` matrices, so `z.H z = 2 det`.
pub fn det2_hessian() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0, 0.0, 0.0, 1.0, //
            0.0, 0.0, -1.0, 0.0, //
            0.0, -1.0, 0.0, 0.0, //
            1.0, 0.0, 0.0, 0.0,
        ],
    )
}

/// `sum c prod z_i^{a_i}`.
#[derive(Clone, Debug)]
pub struct Polynomial {
    pub n: usize,
    pub monomials: Vec<(f64, Vec<u32>)>,
}

fn mono(z: &[f64], powers: &[u32], skip: &[usize]) -> f64 {
    // product with the listed derivative indices applied
    let mut pw: Vec<i64> = powers.iter().map(|&a| a as i64).collect();
    let mut coef = 1.0;
    for &s in skip {
        if pw[s] <= 0 {
            return 0.0;
        }
        coef *= pw[s] as f64;
        pw[s] -= 1;
    }
    coef * z
        .iter()
        .zip(&pw)
        .map(|(x, &a)| x.powi(a as i32))
        .product::<f64>()
}

impl Density for Polynomial {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, z: &[f64]) -> f64 {
        self.monomials.iter().map(|(c, a)| c * mono(z, a, &[])).sum()
    }

    fn gradient(&self, z: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.monomials.iter().map(|(c, a)| c * mono(z, a, &[i])).sum();
        }
    }

    fn hessian(&self, z: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| {
            self.monomials.iter().map(|(c, a)| c * mono(z, a, &[i, j])).sum()
        })
    }
}

/// `W(z) - c2 |V(z)|^2`.
#[derive(Debug)]
pub struct Shifted {
    pub base: Arc<dyn Density>,
    pub c2: f64,
    pub p: f64,
}

impl Density for Shifted {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn value(&self, z: &[f64]) -> f64 {
        self.base.value(z) - self.c2 * v_squared(z, self.p)
    }

    fn gradient(&self, z: &[f64], out: &mut [f64]) {
        self.base.gradient(z, out);
        let mut g = vec![0.0; z.len()];
        v_squared_gradient(z, self.p, &mut g);
        out.iter_mut().zip(g).for_each(|(o, v)| *o -= self.c2 * v);
    }

    fn hessian(&self, z: &[f64]) -> DMatrix<f64> {
        let terms = [(1.0, 2.0), (1.0, self.p)];
        self.base.hessian(z) - radial_terms_hessian(z, &terms) * self.c2
    }
}

#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonomialSpec {
    pub coef: f64,
    pub powers: Vec<u32>,
}

/// JSON description of a registry density.
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    /// `c/2 |z|^2` on `R^n`.
    Isotropic { n: usize, c: f64 },
    /// `1/2 z . M z`.
    Quadratic { matrix: Vec<Vec<f64>> },
    /// `a |F|^2 + gamma det F` on `2 x 2` matrices.
    QuadraticDet { a: f64, gamma: f64 },
    /// `det F` on `2 x 2` matrices.
    Det {},
    /// `sum c |z|^e`, given as `[c, e]` pairs.
    Radial { n: usize, terms: Vec<[f64; 2]> },
    /// `|z|^4 - |z|^2`.
    DoubleWell { n: usize },
    /// Tabulated polynomial `sum coef prod z_i^{powers_i}`.
    Polynomial { n: usize, monomials: Vec<MonomialSpec> },
    /// `|V(z)|^2`.
    VSquared { n: usize, p: f64 },
    /// `W - c2 |V|^2` for a base density.
    Shifted { base: Box<DensitySpec>, c2: f64 },
}

pub fn make_density(spec: &DensitySpec) -> Result<EnergyDensity> {
    let check_n = |n: usize| {
        if n == 0 {
            Err(Error::InvalidParameter("density dimension must be positive".into()))
        } else {
            Ok(())
        }
    };
    match spec {
        DensitySpec::Isotropic { n, c } => {
            check_n(*n)?;
            let m = DMatrix::identity(*n, *n) * *c;
            EnergyDensity::new(format!("isotropic(c={c})"), 2.0, Arc::new(Quadratic { m }))
        }
        DensitySpec::Quadratic { matrix } => {
            let n = matrix.len();
            check_n(n)?;
            if matrix.iter().any(|r| r.len() != n) {
                return Err(Error::InvalidParameter("quadratic form must be square".into()));
            }
            let m = DMatrix::from_fn(n, n, |i, j| matrix[i][j]);
            if (&m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
                return Err(Error::InvalidParameter("quadratic form must be symmetric".into()));
            }
            EnergyDensity::new("quadratic", 2.0, Arc::new(Quadratic { m }))
        }
        DensitySpec::QuadraticDet { a, gamma } => {
            let m = DMatrix::identity(4, 4) * (2.0 * a) + det2_hessian() * *gamma;
            EnergyDensity::new(format!("{a}|F|^2+{gamma}det"), 2.0, Arc::new(Quadratic { m }))
        }
        DensitySpec::Det {} => EnergyDensity::new("det", 2.0, Arc::new(Quadratic { m: det2_hessian() })),
        DensitySpec::Radial { n, terms } => {
            check_n(*n)?;
            if terms.iter().any(|t| t[1] != 0.0 && t[1] < 2.0) {
                return Err(Error::InvalidParameter("radial exponents must be 0 or >= 2".into()));
            }
            let p = terms.iter().map(|t| t[1]).fold(2.0, f64::max);
            let terms = terms.iter().map(|t| (t[0], t[1])).collect();
            EnergyDensity::new("radial", p, Arc::new(Radial { n: *n, terms }))
        }
        DensitySpec::DoubleWell { n } => {
            check_n(*n)?;
            let terms = vec![(1.0, 4.0), (-1.0, 2.0)];
            EnergyDensity::new("|z|^4-|z|^2", 4.0, Arc::new(Radial { n: *n, terms }))
        }
        DensitySpec::Polynomial { n, monomials } => {
            check_n(*n)?;
            if monomials.iter().any(|m| m.powers.len() != *n) {
                return Err(Error::InvalidParameter(format!("monomial powers must have length {n}")));
            }
            let deg = monomials
                .iter()
                .map(|m| m.powers.iter().sum::<u32>())
                .max()
                .unwrap_or(0);
            let monomials = monomials.iter().map(|m| (m.coef, m.powers.clone())).collect();
            EnergyDensity::new(
                "polynomial",
                (deg as f64).max(2.0),
                Arc::new(Polynomial { n: *n, monomials }),
            )
        }
        DensitySpec::VSquared { n, p } => {
            check_n(*n)?;
            if !(*p >= 2.0) {
                return Err(Error::InvalidParameter(format!("p = {p} must be >= 2")));
            }
            let terms = vec![(1.0, 2.0), (1.0, *p)];
            EnergyDensity::new("|V|^2", *p, Arc::new(Radial { n: *n, terms }))
        }
        DensitySpec::Shifted { base, c2 } => tilde_shift(&make_density(base)?, *c2),
    }
}

/// `W~ = W - c2 |V|^2` with the same growth exponent.
pub fn tilde_shift(w: &EnergyDensity, c2: f64) -> Result<EnergyDensity> {
    if !(c2 >= 0.0) || !c2.is_finite() {
        return Err(Error::InvalidParameter(format!("shift c2 = {c2} must be >= 0")));
    }
    if c2 == 0.0 {
        return Ok(w.clone());
    }
    let inner = Arc::new(Shifted {
        base: w.inner.clone(),
        c2,
        p: w.p,
    });
    EnergyDensity::new(format!("{}-{c2}|V|^2", w.name), w.p, inner)
}
