use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::density::{v_squared, EnergyDensity};
use crate::report::{num, Table, Tabular};
use crate::{Error, Result};

/// `W(a + z | a) = W(a + z) - W(a) - DW(a) . z`.
pub fn excess(w: &EnergyDensity, a: &[f64], z: &[f64]) -> f64 {
    let az: Vec<f64> = a.iter().zip(z).map(|(x, y)| x + y).collect();
    let g = w.gradient(a);
    w.value(&az) - w.value(a) - g.iter().zip(z).map(|(x, y)| x * y).sum::<f64>()
}

/// Nodes and weights of the 32-point Gauss-Legendre rule on `[0, 1]`.
pub fn gauss_legendre_32() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(32))
}

/// Golub-Welsch on the Legendre Jacobi matrix, mapped to `[0, 1]`.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = k as f64 / ((4 * k * k - 1) as f64).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut rule: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (0.5 * (eig.eigenvalues[i] + 1.0), v0 * v0)
        })
        .collect();
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

/// `int_0^1 (1 - s) D^2W(a + s z) z . z ds` by Gauss-Legendre quadrature.
pub fn excess_integral(w: &EnergyDensity, a: &[f64], z: &[f64]) -> f64 {
    let zv = nalgebra::DVector::from_column_slice(z);
    gauss_legendre_32()
        .iter()
        .map(|&(s, wt)| {
            let pt: Vec<f64> = a.iter().zip(z).map(|(x, y)| x + s * y).collect();
            let h = w.hessian(&pt);
            wt * (1.0 - s) * (&h * &zv).dot(&zv)
        })
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusRow {
    pub delta: f64,
    /// Largest tested `R` with no violation at `|lambda_1 - lambda_2| < R`.
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcessBoundsReport {
    pub k: f64,
    pub p: f64,
    pub n_samples: usize,
    /// Smallest `C` in the Lipschitz-type bound over the sampled pairs.
    pub c_lipschitz: f64,
    /// Smallest `C` with `|W(l + z | l)| <= C |V(z)|^2`.
    pub c_v: f64,
    pub r_of_delta: Vec<RadiusRow>,
    /// `(C, C~)` with `W(l + z | l) >= C |z|^p - C~ |z|^2`.
    pub c_lower: (f64, f64),
    /// Smallest sampled Hessian eigenvalue over `|lambda| <= K`.
    pub gamma: f64,
    /// `min W(l + z | l) / |V(z)|^2` when `gamma > 0`.
    pub c_d: Option<f64>,
}

impl Tabular for ExcessBoundsReport {
    fn table(&self) -> Table {
        let mut t = Table::new(["delta", "radius"]);
        for r in &self.r_of_delta {
            t.push(vec![num(r.delta), num(r.radius)]);
        }
        t
    }
}

const Z_RADII: [f64; 10] = [0.01, 0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0];
const DELTAS: [f64; 6] = [1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0];

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn in_ball(rng: &mut ChaCha8Rng, n: usize, k: f64) -> Vec<f64> {
    let mut v = gaussian_vec(rng, n);
    let r = norm(&v).max(1e-300);
    let u: f64 = rand::Rng::random(rng);
    let scale = k * u.powf(1.0 / n as f64) / r;
    v.iter_mut().for_each(|x| *x *= scale);
    v
}

fn on_sphere(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vec<f64> {
    let mut v = gaussian_vec(rng, n);
    let s = r / norm(&v).max(1e-300);
    v.iter_mut().for_each(|x| *x *= s);
    v
}

/// Empirical constants for the four excess bounds over `|lambda| <= K`.
///
/// `n_samples` triples `(lambda_1, lambda_2, z)` are drawn with `z` on a
/// fixed radius sweep; the first quarter of the `lambda_1` draws are also
/// used for the Hessian and small-`z` probes.
pub fn excess_bounds_check(
    w: &EnergyDensity,
    k: f64,
    n_samples: usize,
    seed: u64,
) -> Result<ExcessBoundsReport> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::InvalidParameter(format!("K = {k} must be positive")));
    }
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be positive".into()));
    }
    let n = w.dim();
    let p = w.p;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut c_lipschitz = 0.0_f64;
    let mut c_v = 0.0_f64;
    // per pair: distance and largest |f1 - f2| / |V|^2
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n_samples);
    // (lambda, z, excess) kept for branches (c) and (d)
    let mut rows: Vec<(f64, f64)> = Vec::with_capacity(n_samples);
    let mut lambdas = Vec::new();
    let mut ctilde = 0.0_f64;

    for i in 0..n_samples {
        let l1 = in_ball(&mut rng, n, k);
        let l2 = in_ball(&mut rng, n, k);
        let r = Z_RADII[i % Z_RADII.len()];
        let z1 = on_sphere(&mut rng, n, r);
        let z2 = on_sphere(&mut rng, n, Z_RADII[(i * 7 + 3) % Z_RADII.len()]);

        let f1 = excess(w, &l1, &z1);
        let f2 = excess(w, &l1, &z2);
        let n1 = norm(&z1);
        let n2 = norm(&z2);
        let dz: Vec<f64> = z1.iter().zip(&z2).map(|(a, b)| a - b).collect();
        let denom = (n1 + n2 + n1.powf(p - 1.0) + n2.powf(p - 1.0)) * norm(&dz);
        if denom > 0.0 {
            c_lipschitz = c_lipschitz.max((f1 - f2).abs() / denom);
        }
        let v1 = v_squared(&z1, p);
        c_v = c_v.max(f1.abs() / v1);

        let g1 = excess(w, &l2, &z1);
        let dl: Vec<f64> = l1.iter().zip(&l2).map(|(a, b)| a - b).collect();
        pairs.push((norm(&dl), (f1 - g1).abs() / v1));
        rows.push((n1, f1));

        if n1 <= 1.0 {
            ctilde = ctilde.max(-f1 / (n1 * n1));
        }
        if i % 4 == 0 {
            lambdas.push(l1);
        }
    }

    // (b): a pair violates delta when its ratio exceeds delta
    let r_of_delta = DELTAS
        .iter()
        .map(|&delta| RadiusRow {
            delta,
            radius: pairs
                .iter()
                .filter(|&&(_, ratio)| ratio > delta)
                .map(|&(d, _)| d)
                .fold(2.0 * k, f64::min),
        })
        .collect();

    // (c): fix C~, then the largest C; double C~ until C > 0
    let mut ct = 1.0 + ctilde;
    let mut c = f64::NEG_INFINITY;
    for _ in 0..64 {
        c = rows
            .iter()
            .filter(|&&(r, _)| r > 0.0)
            .map(|&(r, f)| (f + ct * r * r) / r.powf(p))
            .fold(f64::INFINITY, f64::min);
        if c > 0.0 {
            break;
        }
        ct *= 2.0;
    }

    // (d)
    let gamma = lambdas
        .iter()
        .map(|l| SymmetricEigen::new(w.hessian(l)).eigenvalues.min())
        .fold(f64::INFINITY, f64::min);
    let c_d = (gamma > 0.0).then(|| {
        rows.iter()
            .filter(|&&(r, _)| r > 0.0)
            .map(|&(r, f)| f / (r * r + r.powf(p)))
            .fold(f64::INFINITY, f64::min)
    });

    Ok(ExcessBoundsReport {
        k,
        p,
        n_samples,
        c_lipschitz,
        c_v,
        r_of_delta,
        c_lower: (c, ct),
        gamma,
        c_d,
    })
}
