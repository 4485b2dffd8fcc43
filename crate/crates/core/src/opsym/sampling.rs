//! Direction sampling on the unit sphere.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const DEFAULT_SEED: u64 = 0x5eed_a11e;

/// Deterministic quasi-uniform points on `S^{d-1}`.
///
/// Evenly spaced angles on the circle, a Fibonacci spiral on `S^2`; for
/// `d > 3` no lattice is produced and callers rely on random samples.
pub fn fibonacci_sphere(d: usize, n: usize) -> Vec<Vec<f64>> {
    match d {
        1 => (0..n)
            .map(|k| vec![if k % 2 == 0 { 1.0 } else { -1.0 }])
            .collect(),
        2 => (0..n)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / n as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
            (0..n)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let phi = golden * k as f64;
                    vec![r * phi.cos(), r * phi.sin(), z]
                })
                .collect()
        }
        _ => Vec::new(),
    }
}

/// Uniform random points on `S^{d-1}` from normalised Gaussians.
pub fn random_sphere(d: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            out.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    out
}

/// Normalised nonzero integer vectors in `[-radius, radius]^d`, axes included.
pub fn lattice_directions(d: usize, radius: i64) -> Vec<Vec<f64>> {
    let side = (2 * radius + 1) as usize;
    let total = side.pow(d as u32);
    let mut out = Vec::new();
    for idx in 0..total {
        let mut rem = idx;
        let mut v = vec![0.0; d];
        for c in v.iter_mut() {
            *c = (rem % side) as f64 - radius as f64;
            rem /= side;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            out.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    out
}

/// Lattice directions, then a Fibonacci lattice, then seeded random points.
///
/// `n` counts the quasi-uniform plus random samples; lattice directions of
/// radius 2 come on top.
pub fn sphere_samples(d: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut out = lattice_directions(d, if d <= 3 { 2 } else { 1 });
    let quasi = fibonacci_sphere(d, n / 2);
    let n_random = n - quasi.len();
    out.extend(quasi);
    out.extend(random_sphere(d, n_random, seed));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_unit(v: &[f64]) -> bool {
        (v.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() < 1e-12
    }

    #[test]
    fn samples_are_unit_vectors() {
        for d in 1..=4 {
            let s = sphere_samples(d, 50, 7);
            assert!(s.len() >= 50);
            assert!(s.iter().all(|v| v.len() == d && is_unit(v)));
        }
    }

    #[test]
    fn lattice_contains_axes() {
        let s = lattice_directions(3, 1);
        assert_eq!(s.len(), 26);
        assert!(s.iter().any(|v| v == &vec![0.0, 0.0, 1.0]));
    }

    #[test]
    fn random_samples_are_seeded() {
        assert_eq!(random_sphere(3, 10, 1), random_sphere(3, 10, 1));
        assert_ne!(random_sphere(3, 10, 1), random_sphere(3, 10, 2));
    }
}
