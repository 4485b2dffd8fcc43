//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use afree::convexity::{
    det2_hessian, excess_bounds_check, garding_adversarial_check, garding_verify, lambda_convexity_check,
    make_density, quadratic_aqc_value, DensitySpec, GardingSearchBudget,
};
use afree::dynamics::{evolve, evolve_with, make_system, weak_strong_monitor, EvolveOptions};
use afree::opsym::{constant_rank_check, make_operator, potential_compat_check, DiffOp, OperatorSpec};
use afree::projection::{afree_residual, fm_constant_fit, primitive, primitive_bounds_report, project_afree};
use afree::report::Tabular;
use afree::spectral::{
    apply_operator, random_afree_field, random_afree_field_with, random_band_limited_field, Grid,
    PeriodicField, ProjectorTable,
};
use afree::statics::{
    euler_lagrange_residual, frozen_second_variation, minimality_check, second_variation_min,
    MinimalityOptions, SecondVariationOptions,
};
use afree::{DMatrix, Result};
use serde_json::json;

type Outcome = Result<(bool, String)>;

fn op(tag: &str, d: usize, m: Option<usize>) -> DiffOp {
    make_operator(&OperatorSpec::builtin(tag, d, m)).expect("builtin")
}

/// `(constraint, potential, grid side used for field tests)`.
fn pairs() -> Vec<(&'static str, DiffOp, DiffOp, usize)> {
    [("curl/grad", op("curl", 2, Some(1)), 33), ("div3/curl", op("div", 3, None), 17), ("curlcurl/symgrad", op("curlcurl", 2, None), 33)]
        .into_iter()
        .map(|(name, a, n)| {
            let b = a.potential().expect("builtin pairs ship a potential");
            (name, a, b, n)
        })
        .collect()
}

fn c1_symbols() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    let extra = ("curl3/grad", op("curl", 3, Some(1)));
    let mut all: Vec<(&str, DiffOp)> = pairs().into_iter().map(|(n, a, _, _)| (n, a)).collect();
    all.push(extra);
    for (name, a) in all {
        let b = a.potential().expect("potential");
        let c = potential_compat_check(&a, &b, 10_000, 1e-10)?;
        let ra = constant_rank_check(&a, 10_000, 1e-10)?;
        let rb = constant_rank_check(&b, 10_000, 1e-10)?;
        let good = c.compatible && c.rank_defect_count == 0 && ra.is_constant_rank && rb.is_constant_rank;
        ok &= good;
        notes.push(format!("{name}: res {:.1e}, defects {}", c.max_product_residual, c.rank_defect_count));
    }
    Ok((ok, notes.join("; ")))
}

fn c2_primitives() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, a, b, n) in pairs() {
        let grid = Grid::new(a.dim(), n)?;
        let table = ProjectorTable::with_band(&a, grid, grid.half())?;
        let fields = 100;
        let mut worst = 0.0_f64;
        for s in 0..fields {
            let psi = random_afree_field_with(&table, 8, 100 + s, 1.0)?;
            let pair = primitive(&b, &psi)?;
            let back = apply_operator(&b, &pair.phi)?;
            worst = worst.max(back.sub(&psi)?.l2_norm() / psi.l2_norm());
        }
        ok &= worst <= 1e-9;
        let mut spread = Vec::new();
        for p in [2.0, 4.0] {
            let mut per_band: Vec<[f64; 3]> = Vec::new();
            for band in [4usize, 8, 12, 16] {
                let mut m = [0.0_f64; 3];
                for s in 0..5 {
                    let psi = random_afree_field_with(&table, band, 7000 + s, 1.0)?;
                    let r = primitive_bounds_report(&primitive(&b, &psi)?, p)?;
                    m[0] = m[0].max(r.c_ii);
                    m[1] = m[1].max(r.c_iii);
                    m[2] = m[2].max(r.c_iv);
                }
                per_band.push(m);
            }
            for c in 0..3 {
                let hi = per_band.iter().map(|m| m[c]).fold(0.0, f64::max);
                let lo = per_band.iter().map(|m| m[c]).fold(f64::INFINITY, f64::min);
                spread.push(hi / lo);
            }
        }
        let max_spread = spread.iter().cloned().fold(0.0, f64::max);
        ok &= max_spread <= 3.0;
        notes.push(format!("{name}: round-trip {worst:.1e}, band spread {max_spread:.2}"));
    }
    Ok((ok, notes.join("; ")))
}

fn c3_projection() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, a, _, n) in pairs() {
        let grid = Grid::new(a.dim(), n.min(17))?;
        let fiber = a.source_dim();
        let mut worst = 0.0_f64;
        for s in 0..10 {
            let v = random_band_limited_field(grid, fiber, grid.half(), 300 + s, 1.0)?;
            let pv = project_afree(&a, &v)?;
            let ppv = project_afree(&a, &pv)?;
            worst = worst.max(ppv.sub(&pv)?.l2_norm() / v.l2_norm()).max(afree_residual(&a, &pv)?);
        }
        ok &= worst <= 1e-9;
        let family = |base: u64| -> Result<Vec<PeriodicField>> {
            (0..200)
                .map(|s| random_band_limited_field(grid, fiber, 1 + (s as usize % grid.half()), base + s, 1.0))
                .collect()
        };
        let f1 = fm_constant_fit(&a, &family(10_000)?)?;
        let f2 = fm_constant_fit(&a, &family(20_000)?)?;
        let majorized = [&f1, &f2]
            .iter()
            .all(|f| f.rows.iter().all(|r| r.defect <= f.c_fit * r.constraint * (1.0 + 1e-12)));
        let stable = (f1.c_fit - f2.c_fit).abs() <= 0.1 * f1.c_fit.max(f2.c_fit);
        ok &= majorized && stable;
        notes.push(format!("{name}: proj {worst:.1e}, C {:.6}/{:.6}", f1.c_fit, f2.c_fit));
    }
    Ok((ok, notes.join("; ")))
}

fn c4_null_lagrangian() -> Outcome {
    let curl = op("curl", 2, Some(2));
    let m = DMatrix::identity(4, 4) * 2.0 + det2_hessian() * 4.0;
    let lc = lambda_convexity_check(&m, &curl, 2000)?;
    let grid = Grid::new(2, 9)?;
    let table = ProjectorTable::with_band(&curl, grid, grid.half())?;
    let (mut min_q, mut max_det) = (f64::INFINITY, 0.0_f64);
    for s in 0..1000 {
        let psi = random_afree_field_with(&table, 1 + (s as usize % 4), s, 1.0)?;
        let q = quadratic_aqc_value(&m, &curl, &psi)?;
        min_q = min_q.min(q / psi.mean_square());
        let det = psi.points().map(|z| z[0] * z[3] - z[1] * z[2]).sum::<f64>() / grid.len() as f64;
        max_det = max_det.max(det.abs());
    }
    let ok = lc.is_lambda_convex && (lc.min_eigenvalue + 2.0).abs() < 1e-12 && min_q >= -1e-9 && max_det <= 1e-9;
    Ok((
        ok,
        format!(
            "Lambda-convex {}, min eig {:.3}, min quadratic/|psi|^2 {min_q:.3e}, max |int det| {max_det:.1e}",
            lc.is_lambda_convex, lc.min_eigenvalue
        ),
    ))
}

fn c5_garding() -> Outcome {
    let curl = op("curl", 2, Some(2));
    let grid = Grid::new(2, 9)?;
    let half = make_density(&DensitySpec::Isotropic { n: 4, c: 1.0 })?;
    let mut ok = true;
    let mut notes = Vec::new();
    for (k, ubar) in [PeriodicField::zeros(grid, 4), random_afree_field(&curl, grid, 2, 5, 0.8)?].iter().enumerate() {
        let fields: Vec<PeriodicField> = (0..24)
            .map(|s| random_afree_field(&curl, grid, 1 + s % 4, 40 + s as u64 + 100 * k as u64, [0.05, 0.5, 2.0][s % 3]))
            .collect::<Result<_>>()?;
        let r = garding_verify(&half, ubar, &curl, &fields, 2.0)?;
        ok &= (r.c0_fit - 4.0).abs() <= 1e-8 && r.c1_fit == 0.0;
        notes.push(format!("1/2|z|^2 family {k}: C0 {:.10}, C1 {}", r.c0_fit, r.c1_fit));
    }
    let w = make_density(&DensitySpec::QuadraticDet { a: 0.5, gamma: 2.0 })?;
    let ubar = random_afree_field(&curl, grid, 2, 9, 0.5)?;
    let fields: Vec<PeriodicField> = (0..24)
        .map(|s| random_afree_field(&curl, grid, 1 + s % 4, 500 + s as u64, [0.1, 1.0][s % 2]))
        .collect::<Result<_>>()?;
    let r = garding_verify(&w, &ubar, &curl, &fields, 2.0)?;
    let finite = r.c0_fit.is_finite() && r.c1_fit.is_finite();
    let budget = GardingSearchBudget {
        n_ascent_steps: 250,
        n_refine: 4,
        seed: 0xfee1,
        ..Default::default()
    };
    let adv = garding_adversarial_check(&w, &ubar, &curl, r.c0_fit, r.c1_fit, 2.0, &budget)?;
    ok &= finite && !adv.violated;
    notes.push(format!(
        "|F|^2/2 + 2det: C0 {:.4}, C1 {:.4}, adversarial max ratio {:.6} over {} steps",
        r.c0_fit, r.c1_fit, adv.max_ratio, adv.steps_taken
    ));
    Ok((ok, notes.join("; ")))
}

fn c6_excess() -> Outcome {
    let dw = make_density(&DensitySpec::DoubleWell { n: 4 })?;
    let r = excess_bounds_check(&dw, 2.0, 10_000, 42)?;
    let monotone = r.r_of_delta.windows(2).all(|w| w[1].radius >= w[0].radius);
    let finite = r.c_lipschitz.is_finite() && r.c_lower.0.is_finite() && r.c_lower.1.is_finite() && r.c_lower.0 > 0.0;
    let mut ok = monotone && finite;
    let mut notes = vec![format!(
        "double well: C_a {:.3}, C_c ({:.3}, {:.3}), R monotone {monotone}",
        r.c_lipschitz, r.c_lower.0, r.c_lower.1
    )];
    for gamma in [0.5, 2.0, 3.0] {
        let q = make_density(&DensitySpec::Isotropic { n: 4, c: gamma })?;
        let rq = excess_bounds_check(&q, 2.0, 10_000, 43)?;
        let cd = rq.c_d.unwrap_or(f64::NAN);
        ok &= (cd - 0.25 * gamma).abs() <= 1e-6;
        notes.push(format!("gamma {gamma}: C_d {cd:.9}"));
    }
    Ok((ok, notes.join("; ")))
}

fn wave_data(n: usize, t: f64) -> Result<PeriodicField> {
    Ok(PeriodicField::from_fn(Grid::new(1, n)?, 2, |x, out| {
        let c = (2.0 * PI * (x[0] + t)).cos();
        out[0] = c;
        out[1] = c;
    }))
}

fn c7_dynamics() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    let wave = make_system("psystem1d", &json!({"sigma": [0.0, 1.0]}))?;
    let traj = evolve(&wave, &wave_data(65, 0.0)?, 1e-3, 1.0, 0.0)?;
    let err = traj.states.last().expect("state").sub(&wave_data(65, 1.0)?)?.sup_norm();
    ok &= err <= 1e-6 && !traj.blew_up;
    notes.push(format!("wave error {err:.1e}"));

    let el = make_system(
        "elasticity2d",
        &json!({"density": {"kind": "radial", "n": 4, "terms": [[0.5, 2.0], [0.1, 4.0]]}}),
    )?;
    let u0 = PeriodicField::from_fn(Grid::new(2, 17)?, 6, |x, out| {
        let (a, b) = (2.0 * PI * x[0], 2.0 * PI * x[1]);
        out[0] = 0.3 * a.sin() * b.cos();
        out[1] = -0.3 * (a + b).cos();
        out[2] = 0.3 * a.cos() * b.cos();
        out[3] = -0.3 * a.sin() * b.sin();
        out[4] = -0.15 * (a + 2.0 * b).sin();
        out[5] = -0.3 * (a + 2.0 * b).sin();
    });
    let t = evolve_with(&el, &u0, &EvolveOptions { dt: 2e-3, t_final: 1.0, viscosity: 0.0, stride: 25, seed: None })?;
    let drift = t.drift.iter().cloned().fold(0.0, f64::max);
    ok &= drift <= 1e-8 && !t.blew_up;
    notes.push(format!("elasticity drift {drift:.1e}"));

    let ub = wave_data(33, 0.0)?;
    let same = weak_strong_monitor(&wave, &ub, &ub, 1e-3, 1.0, 0.0, 50)?;
    let vmax = same.rows.iter().map(|r| r.vdist).fold(0.0, f64::max);
    ok &= vmax <= 1e-8;
    notes.push(format!("identical data vdist {vmax:.1e}"));

    let cubic = make_system("psystem1d", &json!({"sigma": [0.0, 1.0, 0.0, 1.0]}))?;
    let grid = Grid::new(1, 33)?;
    let ubar = PeriodicField::from_fn(grid, 2, |x, out| {
        out[0] = 0.2 * (2.0 * PI * x[0]).sin();
        out[1] = 0.3 * (2.0 * PI * x[0]).cos();
    });
    for seed in [1u64, 2] {
        let u0 = ubar.add(&random_band_limited_field(grid, 2, 4, seed, 0.05)?)?;
        let a = weak_strong_monitor(&cubic, &u0, &ubar, 2e-3, 1.0, 1e-3, 25)?;
        let b = weak_strong_monitor(&cubic, &u0, &ubar, 2e-3, 1.0, 1e-3, 25)?;
        let valid = a.bound_violations() == 0 && a.c1.is_finite() && a.c2.is_finite() && !a.blew_up;
        ok &= valid && a.table().to_csv_string()? == b.table().to_csv_string()?;
        notes.push(format!("p-system seed {seed}: C1 {:.4}, C2 {:.4}", a.c1, a.c2));
    }
    Ok((ok, notes.join("; ")))
}

fn c8_statics() -> Outcome {
    let curl = op("curl", 2, Some(2));
    let grid = Grid::new(2, 9)?;
    let a = [0.4, -0.2, 0.1, 0.7];
    let ubar = PeriodicField::from_fn(grid, 4, |_, out| out.copy_from_slice(&a));
    let half = make_density(&DensitySpec::Isotropic { n: 4, c: 1.0 })?;
    let el = euler_lagrange_residual(&half, &ubar, &curl)?;
    let sv_opts = SecondVariationOptions { tol: 1e-14, ..Default::default() };
    let sv = second_variation_min(&half, &ubar, &curl, &sv_opts)?;
    let mc = minimality_check(&half, &ubar, &curl, &MinimalityOptions { n_samples: 16, ..Default::default() })?;
    let mut ok = el <= 1e-12 && (sv.min_quotient - 1.0).abs() <= 1e-8 && (mc.c_fit - 0.25).abs() <= 1e-8;
    let mut notes = vec![format!("EL {el:.1e}, min quotient {:.10}, C_fit {:.10}", sv.min_quotient, mc.c_fit)];
    for spec in [
        DensitySpec::Isotropic { n: 4, c: 1.0 },
        DensitySpec::QuadraticDet { a: 0.5, gamma: 2.0 },
        DensitySpec::Radial { n: 4, terms: vec![[0.5, 2.0], [0.25, 4.0]] },
    ] {
        let w = make_density(&spec)?;
        let it = second_variation_min(&w, &ubar, &curl, &sv_opts)?;
        let fr = frozen_second_variation(&w, &a, &curl, grid, grid.half())?;
        ok &= it.converged && (it.min_quotient - fr).abs() <= 1e-7;
        notes.push(format!("{}: {:.3e} gap", w.name, (it.min_quotient - fr).abs()));
    }
    Ok((ok, notes.join("; ")))
}

fn c9_determinism() -> Outcome {
    let run = || -> Result<Vec<String>> {
        let curl = op("curl", 2, Some(2));
        let grid = Grid::new(2, 9)?;
        let w = make_density(&DensitySpec::QuadraticDet { a: 0.5, gamma: 2.0 })?;
        let ubar = random_afree_field(&curl, grid, 2, 9, 0.5)?;
        let fields: Vec<PeriodicField> = (0..8).map(|s| random_afree_field(&curl, grid, 2, s, 1.0)).collect::<Result<_>>()?;
        let g = garding_verify(&w, &ubar, &curl, &fields, 2.0)?;
        let fm = fm_constant_fit(&curl, &fields)?;
        let ex = excess_bounds_check(&make_density(&DensitySpec::DoubleWell { n: 4 })?, 2.0, 500, 3)?;
        let zero = PeriodicField::zeros(grid, 4);
        let mc = minimality_check(&w, &zero, &curl, &MinimalityOptions { n_samples: 4, ..Default::default() })?;
        let cubic = make_system("psystem1d", &json!({"sigma": [0.0, 1.0, 0.0, 1.0]}))?;
        let g1 = Grid::new(1, 17)?;
        let ub = random_band_limited_field(g1, 2, 2, 5, 0.3)?;
        let u0 = ub.add(&random_band_limited_field(g1, 2, 3, 6, 0.05)?)?;
        let st = weak_strong_monitor(&cubic, &u0, &ub, 5e-3, 0.5, 1e-3, 10)?;
        [g.table(), fm.table(), ex.table(), mc.table(), st.table()]
            .iter()
            .map(|t| t.to_csv_string())
            .collect()
    };
    let (a, b) = (run()?, run()?);
    let same = a == b;
    Ok((same, format!("{} tables, byte-identical {same}", a.len())))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("symbol/potential", c1_symbols),
        ("primitive round-trip", c2_primitives),
        ("projection", c3_projection),
        ("null-Lagrangian / Lambda-convexity", c4_null_lagrangian),
        ("Garding", c5_garding),
        ("excess bounds", c6_excess),
        ("dynamics", c7_dynamics),
        ("statics", c8_statics),
        ("determinism", c9_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let (ok, detail) = match f() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "[{}] {} {name} ({:.1}s): {detail}",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            t0.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
