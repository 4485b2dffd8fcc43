use std::f64::consts::PI;

use super::*;
use crate::convexity::{make_density, DensitySpec};
use crate::opsym::{make_operator, OperatorSpec};
use crate::spectral::random_afree_field;

fn curl(m: usize) -> DiffOp {
    make_operator(&OperatorSpec::builtin("curl", 2, Some(m))).unwrap()
}

fn half_norm2(n: usize) -> EnergyDensity {
    make_density(&DensitySpec::Isotropic { n, c: 1.0 }).unwrap()
}

fn quadratic(rows: Vec<Vec<f64>>) -> EnergyDensity {
    make_density(&DensitySpec::Quadratic { matrix: rows }).unwrap()
}

fn constant(grid: Grid, a: &[f64]) -> PeriodicField {
    PeriodicField::from_fn(grid, a.len(), |_, out| out.copy_from_slice(a))
}

#[test]
fn constants_are_critical() {
    let grid = Grid::new(2, 9).unwrap();
    let w = make_density(&DensitySpec::Radial { n: 4, terms: vec![[0.5, 2.0], [0.25, 4.0]] }).unwrap();
    let r = euler_lagrange_residual(&w, &constant(grid, &[0.3, -0.2, 1.0, 0.5]), &curl(2)).unwrap();
    assert!(r < 1e-14, "{r}");
}

#[test]
fn identity_gradient_residual_is_the_norm() {
    let grid = Grid::new(2, 9).unwrap();
    let op = curl(2);
    let u = random_afree_field(&op, grid, 3, 5, 0.7).unwrap();
    let r = euler_lagrange_residual(&half_norm2(4), &u, &op).unwrap();
    assert!((r - u.l2_norm()).abs() < 1e-12);
    let shifted = u.shifted(&[1.0, 2.0, -1.0, 0.5]).unwrap();
    let r2 = euler_lagrange_residual(&half_norm2(4), &shifted, &op).unwrap();
    assert!((r - r2).abs() < 1e-12);
}

#[test]
fn block_form_has_zero_residual() {
    // gradient field on the mode (1, 0), M swaps the kernel direction out
    let grid = Grid::new(2, 9).unwrap();
    let u = PeriodicField::from_fn(grid, 2, |x, out| {
        out[0] = (2.0 * PI * x[0]).cos();
        out[1] = 0.0;
    });
    let w = quadratic(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    let r = euler_lagrange_residual(&w, &u, &curl(1)).unwrap();
    assert!(r < 1e-13, "{r}");
}

#[test]
fn rejects_constrained_violations() {
    let grid = Grid::new(2, 9).unwrap();
    let u = PeriodicField::from_fn(grid, 2, |x, out| {
        out[0] = 0.0;
        out[1] = (2.0 * PI * x[0]).cos();
    });
    assert!(matches!(euler_lagrange_residual(&half_norm2(2), &u, &curl(1)), Err(Error::NotAFree(_))));
    assert!(euler_lagrange_residual(&half_norm2(3), &u, &curl(1)).is_err());
}

#[test]
fn second_variation_of_identity_is_one() {
    let grid = Grid::new(2, 7).unwrap();
    let op = curl(2);
    let u = random_afree_field(&op, grid, 2, 1, 0.5).unwrap();
    let r = second_variation_min(&half_norm2(4), &u, &op, &SecondVariationOptions::default()).unwrap();
    assert!(r.converged);
    assert!((r.min_quotient - 1.0).abs() < 1e-12, "{r:?}");
}

#[test]
fn determinant_is_invisible_on_gradients() {
    let grid = Grid::new(2, 7).unwrap();
    let op = curl(2);
    let w = make_density(&DensitySpec::QuadraticDet { a: 0.5, gamma: 2.0 }).unwrap();
    let a = [0.2, -0.1, 0.4, 1.0];
    let r = second_variation_min(&w, &constant(grid, &a), &op, &SecondVariationOptions::default()).unwrap();
    let frozen = frozen_second_variation(&w, &a, &op, grid, grid.half()).unwrap();
    assert!((frozen - 1.0).abs() < 1e-12);
    assert!(r.converged && (r.min_quotient - frozen).abs() < 1e-8, "{r:?}");
}

#[test]
fn negative_cone_direction_is_detected() {
    let grid = Grid::new(2, 7).unwrap();
    let op = curl(2);
    let mut m = vec![vec![0.0; 4]; 4];
    for (i, d) in [-1.0, 1.0, 2.0, 1.0].into_iter().enumerate() {
        m[i][i] = d;
    }
    let w = quadratic(m);
    let a = [0.0; 4];
    let r = second_variation_min(&w, &constant(grid, &a), &op, &SecondVariationOptions::default()).unwrap();
    let frozen = frozen_second_variation(&w, &a, &op, grid, grid.half()).unwrap();
    assert!((frozen + 1.0).abs() < 1e-12);
    assert!(r.min_quotient < 0.0 && (r.min_quotient - frozen).abs() < 1e-6, "{r:?}");
}

#[test]
fn frozen_oracle_matches_iteration_for_constant_quartic() {
    let grid = Grid::new(2, 7).unwrap();
    let op = curl(2);
    let w = make_density(&DensitySpec::Radial { n: 4, terms: vec![[0.5, 2.0], [0.25, 4.0]] }).unwrap();
    let a = [0.5, -0.3, 0.2, 0.1];
    let r = second_variation_min(&w, &constant(grid, &a), &op, &SecondVariationOptions::default()).unwrap();
    let frozen = frozen_second_variation(&w, &a, &op, grid, grid.half()).unwrap();
    assert!(r.converged);
    assert!((r.min_quotient - frozen).abs() < 1e-6, "{} vs {frozen}", r.min_quotient);
}

#[test]
fn quadratic_minimality_constant_is_a_quarter() {
    let grid = Grid::new(2, 9).unwrap();
    let op = curl(2);
    let opts = MinimalityOptions {
        n_samples: 8,
        ..Default::default()
    };
    let r = minimality_check(&half_norm2(4), &constant(grid, &[1.0, 0.0, 0.0, 1.0]), &op, &opts).unwrap();
    assert!(r.pass, "{:?}", r.diagnostics);
    assert!((r.c_fit - 0.25).abs() < 1e-12, "{}", r.c_fit);
    assert!((r.epsilon0_used - 0.01).abs() < 1e-15);
    for row in &r.rows {
        assert!(row.wnorm <= r.epsilon0_used * (1.0 + 1e-12));
        assert!(row.energy_gap >= r.c_fit * row.v_distance * (1.0 - 1e-12));
    }
}

#[test]
fn convex_quartic_at_constant_passes() {
    let grid = Grid::new(2, 9).unwrap();
    let op = curl(2);
    let w = make_density(&DensitySpec::Radial { n: 4, terms: vec![[0.5, 2.0], [0.25, 4.0]] }).unwrap();
    let opts = MinimalityOptions {
        n_samples: 8,
        epsilon0: Some(0.2),
        ..Default::default()
    };
    let r = minimality_check(&w, &constant(grid, &[0.3, 0.0, -0.2, 0.4]), &op, &opts).unwrap();
    assert!(r.pass, "{:?}", r.diagnostics);
    assert!(r.c_fit > 0.0);
    for row in &r.rows {
        assert!((row.energy_gap - row.excess_integral).abs() < 1e-10);
    }
}

#[test]
fn non_critical_background_is_diagnosed() {
    let grid = Grid::new(2, 9).unwrap();
    let op = curl(2);
    let u = random_afree_field(&op, grid, 2, 3, 0.5).unwrap();
    let opts = MinimalityOptions {
        n_samples: 4,
        aqc_points: 2,
        aqc: AqcBudget {
            n_random: 4,
            n_descent_steps: 10,
            ..Default::default()
        },
        ..Default::default()
    };
    let r = minimality_check(&half_norm2(4), &u, &op, &opts).unwrap();
    assert!(!r.pass);
    assert!(r.el_residual > 0.1);
    assert!(r.diagnostics.iter().any(|d| d.contains("Euler-Lagrange")));
    assert_eq!(r.aqc_points_probed, 2);
}
