use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::convexity::{make_density, Density, DensitySpec, EnergyDensity, Polynomial, Quadratic};
use crate::opsym::{make_operator, DiffOp, OperatorSpec};
use crate::{Error, Result};

/// Flux `f: R^N -> R^{N x d}` with analytic Jacobians and an entropy flux.
///
/// Flux values are laid out as `out[j * d + alpha] = f_{j alpha}(u)`.
pub trait FluxModel: Debug + Send + Sync {
    fn state_dim(&self) -> usize;
    fn space_dim(&self) -> usize;
    fn flux(&self, u: &[f64], out: &mut [f64]);
    /// `J_alpha[(j, i)] = d f_{j alpha} / d u_i`, one matrix per direction.
    fn flux_jacobian(&self, u: &[f64]) -> Vec<DMatrix<f64>>;
    fn entropy_flux(&self, u: &[f64]) -> Vec<f64>;
}

#[derive(Clone, Debug)]
pub struct ConservationSystem {
    pub name: String,
    pub model: Arc<dyn FluxModel>,
    pub entropy: EnergyDensity,
    /// Involution acting on the full state.
    pub involution: Option<DiffOp>,
    /// State components `offset..offset + len` the involution acts on.
    pub constraint_block: Option<(usize, usize)>,
}

impl ConservationSystem {
    pub fn new(
        name: impl Into<String>,
        model: Arc<dyn FluxModel>,
        entropy: EnergyDensity,
        involution: Option<(DiffOp, usize)>,
    ) -> Result<Self> {
        let n = model.state_dim();
        if entropy.dim() != n {
            return Err(Error::DimensionMismatch(format!(
                "entropy on R^{}, state in R^{n}",
                entropy.dim()
            )));
        }
        let (involution, constraint_block) = match involution {
            Some((op, offset)) => {
                if op.dim() != model.space_dim() {
                    return Err(Error::DimensionMismatch("involution dimension".into()));
                }
                let len = op.source_dim();
                (Some(op.embed(n, offset)?), Some((offset, len)))
            }
            None => (None, None),
        };
        Ok(Self {
            name: name.into(),
            model,
            entropy,
            involution,
            constraint_block,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.model.state_dim()
    }

    pub fn dim(&self) -> usize {
        self.model.space_dim()
    }

    pub fn flux(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim() * self.dim()];
        self.model.flux(u, &mut out);
        out
    }

    /// Largest `|lambda|` of `sum_alpha w_alpha J_alpha(u)` over unit axis
    /// and diagonal directions `w`.
    pub fn wave_speed(&self, u: &[f64]) -> f64 {
        let js = self.model.flux_jacobian(u);
        let d = self.dim();
        let mut dirs: Vec<Vec<f64>> = (0..d)
            .map(|a| (0..d).map(|b| if a == b { 1.0 } else { 0.0 }).collect())
            .collect();
        if d > 1 {
            dirs.push(vec![1.0 / (d as f64).sqrt(); d]);
        }
        dirs.iter()
            .map(|w| {
                let m = js.iter().zip(w).fold(DMatrix::zeros(js[0].nrows(), js[0].ncols()), |acc, (j, c)| acc + j * *c);
                m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

pub const SYSTEM_TAGS: [&str; 3] = ["psystem1d", "elasticity2d", "linelast2d"];

/// Registry entry: a tag plus its parameters.
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "system", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    /// `d_t v - d_x sigma(u) = 0`, `d_t u - d_x v = 0` with
    /// `sigma(u) = sum_k sigma[k] u^k`; state `(v, u)`.
    #[serde(rename = "psystem1d")]
    Psystem1d { sigma: Vec<f64> },
    /// `d_t v - div DW(F) = 0`, `d_t F - grad v = 0`; state `(v, F)` with
    /// `F` row-major.
    #[serde(rename = "elasticity2d")]
    Elasticity2d { density: DensitySpec },
    /// Linear elasticity; state `(u, E)` with `E` in Mandel form
    /// `(E11, E22, sqrt2 E12)`. Either Lamé parameters or a symmetric 3x3
    /// Mandel stiffness `c`.
    #[serde(rename = "linelast2d")]
    Linelast2d {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mu: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c: Option<Vec<Vec<f64>>>,
    },
}

/// Builds a registry system from a tag and a JSON object of parameters.
pub fn make_system(tag: &str, params: &serde_json::Value) -> Result<ConservationSystem> {
    if !SYSTEM_TAGS.contains(&tag) {
        return Err(Error::UnknownSystem(tag.to_string()));
    }
    let mut obj = match params {
        serde_json::Value::Object(m) => m.clone(),
        serde_json::Value::Null => serde_json::Map::new(),
        _ => return Err(Error::InvalidParameter("system parameters must be an object".into())),
    };
    obj.insert("system".into(), serde_json::Value::String(tag.into()));
    let spec: SystemSpec = serde_json::from_value(serde_json::Value::Object(obj))?;
    make_system_from_spec(&spec)
}

pub fn make_system_from_spec(spec: &SystemSpec) -> Result<ConservationSystem> {
    match spec {
        SystemSpec::Psystem1d { sigma } => psystem(sigma),
        SystemSpec::Elasticity2d { density } => elasticity(make_density(density)?),
        SystemSpec::Linelast2d { lambda, mu, c } => linelast(&mandel_stiffness(*lambda, *mu, c.as_deref())?),
    }
}

fn poly(c: &[f64], u: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, a| acc * u + a)
}

fn poly_deriv(c: &[f64], u: f64) -> f64 {
    c.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (k, a)| acc * u + k as f64 * a)
}

#[derive(Debug)]
struct PSystem {
    sigma: Vec<f64>,
}

impl FluxModel for PSystem {
    fn state_dim(&self) -> usize {
        2
    }

    fn space_dim(&self) -> usize {
        1
    }

    fn flux(&self, u: &[f64], out: &mut [f64]) {
        out[0] = -poly(&self.sigma, u[1]);
        out[1] = -u[0];
    }

    fn flux_jacobian(&self, u: &[f64]) -> Vec<DMatrix<f64>> {
        vec![DMatrix::from_row_slice(2, 2, &[0.0, -poly_deriv(&self.sigma, u[1]), -1.0, 0.0])]
    }

    fn entropy_flux(&self, u: &[f64]) -> Vec<f64> {
        vec![-u[0] * poly(&self.sigma, u[1])]
    }
}

/// `1/2 |v|^2 + W(F)` with `v` the first `k` components.
#[derive(Debug)]
struct KineticPlus {
    k: usize,
    w: Arc<dyn Density>,
}

impl Density for KineticPlus {
    fn dim(&self) -> usize {
        self.k + self.w.dim()
    }

    fn value(&self, z: &[f64]) -> f64 {
        0.5 * z[..self.k].iter().map(|v| v * v).sum::<f64>() + self.w.value(&z[self.k..])
    }

    fn gradient(&self, z: &[f64], out: &mut [f64]) {
        out[..self.k].copy_from_slice(&z[..self.k]);
        self.w.gradient(&z[self.k..], &mut out[self.k..]);
    }

    fn hessian(&self, z: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let mut h = DMatrix::zeros(n, n);
        for i in 0..self.k {
            h[(i, i)] = 1.0;
        }
        let hw = self.w.hessian(&z[self.k..]);
        h.view_mut((self.k, self.k), (hw.nrows(), hw.ncols())).copy_from(&hw);
        h
    }
}

fn psystem(sigma: &[f64]) -> Result<ConservationSystem> {
    if sigma.is_empty() || sigma.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter("sigma needs finite polynomial coefficients".into()));
    }
    let monomials = sigma
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(k, c)| (c / (k + 1) as f64, vec![(k + 1) as u32]))
        .collect();
    let deg = sigma.len() as f64;
    let w = Arc::new(Polynomial { n: 1, monomials });
    let eta = EnergyDensity::new("1/2 v^2 + W(u)", deg.max(2.0), Arc::new(KineticPlus { k: 1, w }))?;
    ConservationSystem::new("psystem1d", Arc::new(PSystem { sigma: sigma.to_vec() }), eta, None)
}

#[derive(Debug)]
struct Elasticity {
    w: EnergyDensity,
}

impl FluxModel for Elasticity {
    fn state_dim(&self) -> usize {
        6
    }

    fn space_dim(&self) -> usize {
        2
    }

    fn flux(&self, u: &[f64], out: &mut [f64]) {
        let dw = self.w.gradient(&u[2..]);
        out.iter_mut().for_each(|o| *o = 0.0);
        for i in 0..2 {
            for a in 0..2 {
                out[i * 2 + a] = -dw[i * 2 + a];
                // F_{i a} row, flux in direction a
                out[(2 + i * 2 + a) * 2 + a] = -u[i];
            }
        }
    }

    fn flux_jacobian(&self, u: &[f64]) -> Vec<DMatrix<f64>> {
        let h = self.w.hessian(&u[2..]);
        (0..2)
            .map(|a| {
                let mut j = DMatrix::zeros(6, 6);
                for i in 0..2 {
                    for k in 0..4 {
                        j[(i, 2 + k)] = -h[(i * 2 + a, k)];
                    }
                    j[(2 + i * 2 + a, i)] = -1.0;
                }
                j
            })
            .collect()
    }

    fn entropy_flux(&self, u: &[f64]) -> Vec<f64> {
        let dw = self.w.gradient(&u[2..]);
        (0..2)
            .map(|a| -(0..2).map(|i| u[i] * dw[i * 2 + a]).sum::<f64>())
            .collect()
    }
}

fn elasticity(w: EnergyDensity) -> Result<ConservationSystem> {
    if w.dim() != 4 {
        return Err(Error::DimensionMismatch(format!(
            "stored energy must act on 2x2 matrices, got R^{}",
            w.dim()
        )));
    }
    let eta = EnergyDensity::new(
        format!("1/2|v|^2 + {}", w.name),
        w.p,
        Arc::new(KineticPlus { k: 2, w: w.inner().clone() }),
    )?;
    let curl = make_operator(&OperatorSpec::builtin("curl", 2, Some(2)))?;
    ConservationSystem::new("elasticity2d", Arc::new(Elasticity { w }), eta, Some((curl, 2)))
}

#[derive(Debug)]
struct LinElast {
    c: DMatrix<f64>,
}

const R2: f64 = std::f64::consts::FRAC_1_SQRT_2;

impl LinElast {
    /// Full stress tensor from the Mandel strain.
    fn stress(&self, e: &[f64]) -> [[f64; 2]; 2] {
        let s: Vec<f64> = (0..3).map(|i| (0..3).map(|j| self.c[(i, j)] * e[j]).sum()).collect();
        [[s[0], s[2] * R2], [s[2] * R2, s[1]]]
    }

    /// Rows of `d sigma_{i a} / d E_packed`.
    fn stress_row(&self, i: usize, a: usize) -> [f64; 3] {
        let (row, scale) = match (i, a) {
            (0, 0) => (0, 1.0),
            (1, 1) => (1, 1.0),
            _ => (2, R2),
        };
        [self.c[(row, 0)] * scale, self.c[(row, 1)] * scale, self.c[(row, 2)] * scale]
    }
}

/// `d_t E_packed = sum_a M_a d_a u`: packed symmetric gradient coefficients.
fn symgrad_coeff(p: usize, a: usize, i: usize) -> f64 {
    match p {
        0 => (a == 0 && i == 0) as u8 as f64,
        1 => (a == 1 && i == 1) as u8 as f64,
        _ => {
            if (a == 1 && i == 0) || (a == 0 && i == 1) {
                R2
            } else {
                0.0
            }
        }
    }
}

impl FluxModel for LinElast {
    fn state_dim(&self) -> usize {
        5
    }

    fn space_dim(&self) -> usize {
        2
    }

    fn flux(&self, u: &[f64], out: &mut [f64]) {
        let s = self.stress(&u[2..]);
        for i in 0..2 {
            for a in 0..2 {
                out[i * 2 + a] = -s[i][a];
            }
        }
        for p in 0..3 {
            for a in 0..2 {
                out[(2 + p) * 2 + a] = -(0..2).map(|i| symgrad_coeff(p, a, i) * u[i]).sum::<f64>();
            }
        }
    }

    fn flux_jacobian(&self, _u: &[f64]) -> Vec<DMatrix<f64>> {
        (0..2)
            .map(|a| {
                let mut j = DMatrix::zeros(5, 5);
                for i in 0..2 {
                    let r = self.stress_row(i, a);
                    for p in 0..3 {
                        j[(i, 2 + p)] = -r[p];
                        j[(2 + p, i)] = -symgrad_coeff(p, a, i);
                    }
                }
                j
            })
            .collect()
    }

    fn entropy_flux(&self, u: &[f64]) -> Vec<f64> {
        let s = self.stress(&u[2..]);
        (0..2).map(|a| -(u[0] * s[0][a] + u[1] * s[1][a])).collect()
    }
}

/// Mandel form of the isotropic stiffness, or a user matrix.
pub fn mandel_stiffness(lambda: Option<f64>, mu: Option<f64>, c: Option<&[Vec<f64>]>) -> Result<DMatrix<f64>> {
    let m = match (lambda, mu, c) {
        (Some(l), Some(m), None) => {
            let l2m = l + 2.0 * m;
            DMatrix::from_row_slice(3, 3, &[l2m, l, 0.0, l, l2m, 0.0, 0.0, 0.0, 2.0 * m])
        }
        (None, None, Some(rows)) => {
            if rows.len() != 3 || rows.iter().any(|r| r.len() != 3) {
                return Err(Error::DimensionMismatch("stiffness must be 3x3".into()));
            }
            DMatrix::from_fn(3, 3, |i, j| rows[i][j])
        }
        _ => {
            return Err(Error::InvalidParameter(
                "give either `lambda` and `mu` or a stiffness `c`".into(),
            ))
        }
    };
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("stiffness".into()));
    }
    if (&m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
        return Err(Error::InvalidParameter("stiffness must be symmetric".into()));
    }
    Ok(m)
}

fn linelast(c: &DMatrix<f64>) -> Result<ConservationSystem> {
    let c = c.clone();
    let mut m = DMatrix::identity(5, 5);
    m.view_mut((2, 2), (3, 3)).copy_from(&c);
    let eta = EnergyDensity::new("1/2|u|^2 + 1/2 CE:E", 2.0, Arc::new(Quadratic { m }))?;
    let cc = make_operator(&OperatorSpec::builtin("curlcurl", 2, None))?;
    ConservationSystem::new("linelast2d", Arc::new(LinElast { c }), eta, Some((cc, 2)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyCompatReport {
    /// Largest relative residual of `dq_a/du_i = d_j eta d f_{j a}/du_i`.
    pub max_residual_q: f64,
    /// Largest relative asymmetry of `D^2 eta J_a`.
    pub max_residual_symmetry: f64,
    pub n_samples: usize,
    pub compatible: bool,
}

pub const COMPAT_TOL: f64 = 1e-6;

/// Finite-difference check of the entropy pair at random states in a ball.
pub fn entropy_compat_check(
    system: &ConservationSystem,
    n_samples: usize,
    radius: f64,
    seed: u64,
) -> Result<EntropyCompatReport> {
    let n = system.state_dim();
    let d = system.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-6;
    let mut rq = 0.0_f64;
    let mut rs = 0.0_f64;
    for _ in 0..n_samples {
        let mut u: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        let r: f64 = rand::Rng::random::<f64>(&mut rng) * radius;
        u.iter_mut().for_each(|v| *v *= r / norm);

        let deta = system.entropy.gradient(&u);
        let hess = system.entropy.hessian(&u);
        let js = system.model.flux_jacobian(&u);
        for i in 0..n {
            let mut up = u.clone();
            let mut um = u.clone();
            up[i] += h;
            um[i] -= h;
            let qp = system.model.entropy_flux(&up);
            let qm = system.model.entropy_flux(&um);
            for a in 0..d {
                let fd = (qp[a] - qm[a]) / (2.0 * h);
                let rhs: f64 = (0..n).map(|j| deta[j] * js[a][(j, i)]).sum();
                rq = rq.max((fd - rhs).abs() / (1.0 + rhs.abs()));
            }
        }
        for j in &js {
            let m = &hess * j;
            let scale = 1.0 + m.amax();
            rs = rs.max((&m - m.transpose()).amax() / scale);
        }
    }
    if !rq.is_finite() || !rs.is_finite() {
        return Err(Error::NonFinite("entropy compatibility residual".into()));
    }
    Ok(EntropyCompatReport {
        max_residual_q: rq,
        max_residual_symmetry: rs,
        n_samples,
        compatible: rq <= COMPAT_TOL && rs <= COMPAT_TOL,
    })
}
