use serde::{Deserialize, Serialize};

use super::solver::{evolve_with, total_entropy, EvolveOptions, Trajectory};
use super::systems::ConservationSystem;
use crate::convexity::excess;
use crate::report::{num, Table, Tabular};
use crate::spectral::{check_zero_mean, v_energy, PeriodicField};
use crate::{Error, Result};

fn check_pair(system: &ConservationSystem, u: &PeriodicField, ubar: &PeriodicField) -> Result<()> {
    if u.grid() != ubar.grid() {
        return Err(Error::DimensionMismatch("fields live on different grids".into()));
    }
    let n = system.state_dim();
    if u.fiber() != n || ubar.fiber() != n {
        return Err(Error::DimensionMismatch(format!(
            "system state in R^{n}, fields in R^{} and R^{}",
            u.fiber(),
            ubar.fiber()
        )));
    }
    Ok(())
}

/// `int eta(U | Ubar)`, the grid mean of the pointwise excess of the entropy.
pub fn relative_entropy(system: &ConservationSystem, u: &PeriodicField, ubar: &PeriodicField) -> Result<f64> {
    check_pair(system, u, ubar)?;
    let mut dz = vec![0.0; system.state_dim()];
    let s: f64 = u
        .points()
        .zip(ubar.points())
        .map(|(a, b)| {
            dz.iter_mut().zip(a.iter().zip(b)).for_each(|(o, (x, y))| *o = x - y);
            excess(&system.entropy, b, &dz)
        })
        .sum();
    Ok(s / u.grid().len() as f64)
}

/// `f(U) - f(Ubar) - Df(Ubar)(U - Ubar)` pointwise, fiber `N d` laid out as
/// `[j * d + alpha]`.
pub fn relative_flux(system: &ConservationSystem, u: &PeriodicField, ubar: &PeriodicField) -> Result<PeriodicField> {
    check_pair(system, u, ubar)?;
    let (n, d) = (system.state_dim(), system.dim());
    let mut data = Vec::with_capacity(u.grid().len() * n * d);
    let mut fu = vec![0.0; n * d];
    let mut fb = vec![0.0; n * d];
    for (a, b) in u.points().zip(ubar.points()) {
        system.model.flux(a, &mut fu);
        system.model.flux(b, &mut fb);
        let js = system.model.flux_jacobian(b);
        for j in 0..n {
            for al in 0..d {
                let lin: f64 = (0..n).map(|i| js[al][(j, i)] * (a[i] - b[i])).sum();
                data.push(fu[j * d + al] - fb[j * d + al] - lin);
            }
        }
    }
    PeriodicField::new(u.grid(), n * d, data)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissipationReport {
    pub t: f64,
    pub eps: f64,
    pub entropy_initial: f64,
    /// `(1/eps) int_t^{t+eps} int eta(U)`.
    pub window_mean: f64,
    pub margin: f64,
}

/// Tested against the ramp `theta = 1` on `[0, t]`, linear down to 0 on
/// `[t, t + eps]`: `margin = int eta(U0) - (1/eps) int_t^{t+eps} int eta(U)`.
///
/// The time integral is the trapezoid rule on the recorded states with linear
/// interpolation at the window ends.
pub fn dissipation_check(traj: &Trajectory, t: f64, eps: f64) -> Result<DissipationReport> {
    let span = traj.t_final();
    let slack = 1e-12 * span.max(1.0);
    if !(eps > 0.0) || !(t >= 0.0) || !(t + eps <= span + slack) || traj.times.len() < 2 {
        return Err(Error::OutsideSpan {
            start: t,
            end: t + eps,
            span,
        });
    }
    let e = traj.entropy();
    let ts = &traj.times;
    let interp = |s: f64| -> f64 {
        let k = ts.partition_point(|&x| x <= s).clamp(1, ts.len() - 1);
        let (t0, t1) = (ts[k - 1], ts[k]);
        let w = ((s - t0) / (t1 - t0)).clamp(0.0, 1.0);
        e[k - 1] * (1.0 - w) + e[k] * w
    };
    let end = (t + eps).min(span);
    let mut nodes = vec![(t, interp(t))];
    for (i, &ti) in ts.iter().enumerate() {
        if ti > t && ti < end {
            nodes.push((ti, e[i]));
        }
    }
    nodes.push((end, interp(end)));
    let integral: f64 = nodes
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum();
    let window_mean = integral / eps;
    Ok(DissipationReport {
        t,
        eps,
        entropy_initial: e[0],
        window_mean,
        margin: e[0] - window_mean,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub t: f64,
    pub relent: f64,
    pub vdist: f64,
    pub drift: f64,
    /// `int eta(U(0)) - int eta(U(t))` of the weak run.
    pub dissipation_margin: f64,
    pub bound_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub system: String,
    pub p: f64,
    pub viscosity_weak: f64,
    pub dt: f64,
    pub c1: f64,
    pub c2: f64,
    /// Set when the fit degenerates (`vdist(0) = 0` with later growth).
    pub fit_degenerate: bool,
    pub blew_up: bool,
    pub rows: Vec<StabilityRow>,
}

impl StabilityReport {
    /// Rows above the fitted majorant, up to a relative `1e-12`.
    pub fn bound_violations(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.vdist > r.bound_value * (1.0 + 1e-12) + f64::MIN_POSITIVE)
            .count()
    }
}

impl Tabular for StabilityReport {
    fn table(&self) -> Table {
        let mut t = Table::new(["t", "relent", "vdist", "drift", "bound_value"]);
        for r in &self.rows {
            t.push(vec![num(r.t), num(r.relent), num(r.vdist), num(r.drift), num(r.bound_value)]);
        }
        t
    }
}

/// Fits `v(t) <= C1 v(0) exp(C2 t)`.
///
/// `C2` is the least-squares slope of `log(v / v(0))` against `t`, clamped at
/// zero; `C1` is then the smallest constant that makes every row lie under
/// the curve. Returns `(C1, C2, degenerate)`.
pub fn fit_gronwall(times: &[f64], v: &[f64]) -> (f64, f64, bool) {
    let Some(&v0) = v.first() else {
        return (1.0, 0.0, false);
    };
    if !(v0 > 0.0) {
        let all_zero = v.iter().all(|&x| x == 0.0);
        return (if all_zero { 1.0 } else { f64::INFINITY }, 0.0, !all_zero);
    }
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(v)
        .filter(|(_, &x)| x > 0.0)
        .map(|(&t, &x)| (t, (x / v0).ln()))
        .collect();
    let m = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let stt: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let c2 = if stt > 0.0 { (sty / stt).max(0.0) } else { 0.0 };
    let shift = pts.iter().map(|p| p.1 - c2 * p.0).fold(0.0, f64::max);
    (shift.exp() * (1.0 + 1e-12), c2, false)
}

/// Runs the strong solution `Ubar` inviscidly and the weak one `U` with
/// `viscosity_weak`, then reports the relative entropy, the distance
/// `int |V(U - Ubar)|^2`, the involution drift of `U` and the fitted
/// Grönwall majorant at each recorded time.
pub fn weak_strong_monitor(
    system: &ConservationSystem,
    u0: &PeriodicField,
    ubar0: &PeriodicField,
    dt: f64,
    t_final: f64,
    viscosity_weak: f64,
    stride: usize,
) -> Result<StabilityReport> {
    weak_strong_runs(system, u0, ubar0, dt, t_final, viscosity_weak, stride).map(|r| r.report)
}

/// Output of [`weak_strong_runs`]: the report and both trajectories.
#[derive(Clone, Debug)]
pub struct MonitorRuns {
    pub report: StabilityReport,
    pub strong: Trajectory,
    pub weak: Trajectory,
}

/// As [`weak_strong_monitor`], keeping the trajectories.
pub fn weak_strong_runs(
    system: &ConservationSystem,
    u0: &PeriodicField,
    ubar0: &PeriodicField,
    dt: f64,
    t_final: f64,
    viscosity_weak: f64,
    stride: usize,
) -> Result<MonitorRuns> {
    check_pair(system, u0, ubar0)?;
    check_zero_mean(ubar0)?;
    let strong_opts = EvolveOptions {
        dt,
        t_final,
        viscosity: 0.0,
        stride,
        seed: None,
    };
    let weak_opts = EvolveOptions {
        viscosity: viscosity_weak,
        ..strong_opts.clone()
    };
    let (strong, weak) = std::thread::scope(|s| {
        let h = s.spawn(|| evolve_with(system, ubar0, &strong_opts));
        let weak = evolve_with(system, u0, &weak_opts);
        (h.join().expect("strong run panicked"), weak)
    });
    let (strong, weak) = (strong?, weak?);

    let p = system.entropy.p;
    let e0 = total_entropy(system, &weak.states[0]);
    let len = strong.states.len().min(weak.states.len());
    let mut rows = Vec::with_capacity(len);
    for k in 0..len {
        let (u, ub) = (&weak.states[k], &strong.states[k]);
        rows.push(StabilityRow {
            t: weak.times[k],
            relent: relative_entropy(system, u, ub)?,
            vdist: v_energy(&u.sub(ub)?, p)?,
            drift: weak.drift[k],
            dissipation_margin: e0 - total_entropy(system, u),
            bound_value: 0.0,
        });
    }
    let times: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let v: Vec<f64> = rows.iter().map(|r| r.vdist).collect();
    let (c1, c2, degenerate) = fit_gronwall(&times, &v);
    let v0 = v[0];
    for r in &mut rows {
        r.bound_value = match (v0 == 0.0, c1.is_finite()) {
            (true, true) => 0.0,
            (true, false) => f64::INFINITY,
            _ => c1 * v0 * (c2 * r.t).exp(),
        };
    }
    let report = StabilityReport {
        system: system.name.clone(),
        p,
        viscosity_weak,
        dt: weak.dt,
        c1,
        c2,
        fit_degenerate: degenerate,
        blew_up: strong.blew_up || weak.blew_up,
        rows,
    };
    Ok(MonitorRuns { report, strong, weak })
}
