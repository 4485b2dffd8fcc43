use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::systems::ConservationSystem;
use crate::projection::afree_residual;
use crate::spectral::{apply_operator, check_zero_mean, inverse_transform, transform, Grid, PeriodicField};
use crate::{Error, Result, C64};

pub const SCHEME: &str = "fourier-rk4-dealias23";

const AFREE_TOL: f64 = 1e-8;
const BLOWUP_FACTOR: f64 = 1e6;
/// RK4 stability limits along the imaginary and the negative real axis.
const RK4_IMAG: f64 = 2.8;
const RK4_REAL: f64 = 2.78;
const MAX_CFL_SAMPLES: usize = 256;

#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveOptions {
    pub dt: f64,
    pub t_final: f64,
    pub viscosity: f64,
    /// Record every `stride`-th step; the final state is always kept.
    pub stride: usize,
    /// Carried into the metadata only; the scheme is deterministic.
    pub seed: Option<u64>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_final: 1.0,
            viscosity: 0.0,
            stride: 1,
            seed: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub system: ConservationSystem,
    pub grid: Grid,
    pub times: Vec<f64>,
    pub states: Vec<PeriodicField>,
    /// `|A U(t)|_{L^2}` per recorded state.
    pub drift: Vec<f64>,
    pub viscosity: f64,
    /// Step actually used, `t_final / n_steps`.
    pub dt: f64,
    pub n_steps: usize,
    pub scheme: &'static str,
    pub seed: Option<u64>,
    /// Fraction of the step-size bound used at `U0`.
    pub cfl_ratio: f64,
    pub blew_up: bool,
}

impl Trajectory {
    pub fn t_final(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// `int eta(U(t))` per recorded state.
    pub fn entropy(&self) -> Vec<f64> {
        self.states.iter().map(|u| total_entropy(&self.system, u)).collect()
    }
}

pub(crate) fn total_entropy(system: &ConservationSystem, u: &PeriodicField) -> f64 {
    u.points().map(|z| system.entropy.value(z)).sum::<f64>() / u.grid().len() as f64
}

pub fn evolve(
    system: &ConservationSystem,
    u0: &PeriodicField,
    dt: f64,
    t_final: f64,
    viscosity: f64,
) -> Result<Trajectory> {
    evolve_with(
        system,
        u0,
        &EvolveOptions {
            dt,
            t_final,
            viscosity,
            ..Default::default()
        },
    )
}

fn dealias_limit(grid: Grid) -> usize {
    (grid.n() / 3).min(grid.half())
}

/// Spectral radius bound of the linearised symbol over a sample of `U0`.
fn cfl_ratio(system: &ConservationSystem, u0: &PeriodicField, dt: f64, nu: f64) -> f64 {
    let grid = u0.grid();
    let stride = grid.len().div_ceil(MAX_CFL_SAMPLES).max(1);
    let rho = (0..grid.len())
        .step_by(stride)
        .map(|p| system.wave_speed(u0.at(p)))
        .fold(0.0, f64::max);
    let kmax = dealias_limit(grid).max(1) as f64;
    let d = grid.dim() as f64;
    let advective = dt * 2.0 * PI * kmax * d.sqrt() * rho / RK4_IMAG;
    let viscous = dt * nu * 4.0 * PI * PI * kmax * kmax * d / RK4_REAL;
    advective + viscous
}

struct Rhs<'a> {
    system: &'a ConservationSystem,
    nu: f64,
    kmax: usize,
}

impl Rhs<'_> {
    /// `-div f(U) + nu Lap U` with the flux transform truncated to `|k|_inf <= n/3`.
    fn eval(&self, u: &PeriodicField) -> Result<PeriodicField> {
        let sys = self.system;
        let (n, d) = (sys.state_dim(), sys.dim());
        let flux = u.map_points(n * d, |z, out| sys.model.flux(z, out));
        let fh = transform(&flux)?;
        let uh = if self.nu > 0.0 { Some(transform(u)?) } else { None };
        let grid = u.grid();
        let kmax = self.kmax;
        let nu = self.nu;
        let out = fh.map_modes(n, |idx, f, o| {
            if idx == 0 {
                return;
            }
            let k = grid.freq_f64(idx);
            if grid.freq_inf(idx) <= kmax {
                for (j, oj) in o.iter_mut().enumerate() {
                    let mut acc = C64::new(0.0, 0.0);
                    for (a, ka) in k.iter().enumerate() {
                        acc += f[j * d + a] * *ka;
                    }
                    *oj = -acc * C64::new(0.0, 2.0 * PI);
                }
            }
            if let Some(uh) = &uh {
                let lap = 4.0 * PI * PI * grid.freq_norm2(idx);
                for (oj, c) in o.iter_mut().zip(uh.at(idx)) {
                    *oj -= c * (nu * lap);
                }
            }
        });
        Ok(inverse_transform(&out))
    }
}

/// One classical RK4 step; `None` once a stage turns non-finite.
fn rk4_step(rhs: &Rhs, u: &PeriodicField, dt: f64) -> Result<Option<PeriodicField>> {
    let stage = |x: Result<PeriodicField>| match x.and_then(|s| rhs.eval(&s)) {
        Ok(v) => Ok(Some(v)),
        Err(Error::NonFinite(_)) => Ok(None),
        Err(e) => Err(e),
    };
    let Some(k1) = stage(Ok(u.clone()))? else { return Ok(None) };
    let Some(k2) = stage(u.axpy(0.5 * dt, &k1))? else { return Ok(None) };
    let Some(k3) = stage(u.axpy(0.5 * dt, &k2))? else { return Ok(None) };
    let Some(k4) = stage(u.axpy(dt, &k3))? else { return Ok(None) };
    Ok(Some(
        u.axpy(dt / 6.0, &k1)?
            .axpy(dt / 3.0, &k2)?
            .axpy(dt / 3.0, &k3)?
            .axpy(dt / 6.0, &k4)?,
    ))
}

/// Explicit RK4 with Fourier derivatives on the torus.
///
/// Errors with `Cfl` when the step exceeds the stability heuristic at `U0`.
/// Blow-up (sup norm above `1e6` times the initial one, or non-finite
/// values) truncates the trajectory and sets `blew_up`.
pub fn evolve_with(
    system: &ConservationSystem,
    u0: &PeriodicField,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    let grid = u0.grid();
    if grid.dim() != system.dim() || u0.fiber() != system.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "system {} wants R^{}-valued fields in d = {}, got R^{} in d = {}",
            system.name,
            system.state_dim(),
            system.dim(),
            u0.fiber(),
            grid.dim()
        )));
    }
    if !(opts.dt > 0.0) || !(opts.t_final > 0.0) || !opts.dt.is_finite() || !opts.t_final.is_finite() {
        return Err(Error::InvalidParameter("dt and t_final must be positive".into()));
    }
    if !(opts.viscosity >= 0.0) || !opts.viscosity.is_finite() {
        return Err(Error::InvalidParameter("viscosity must be nonnegative".into()));
    }
    if opts.stride == 0 {
        return Err(Error::InvalidParameter("stride must be positive".into()));
    }
    check_zero_mean(u0)?;
    if let Some(op) = &system.involution {
        let r = afree_residual(op, u0)?;
        if r > AFREE_TOL {
            return Err(Error::NotAFree(r));
        }
    }
    let n_steps = (opts.t_final / opts.dt - 1e-9).ceil().max(1.0) as usize;
    let dt = opts.t_final / n_steps as f64;
    let cfl = cfl_ratio(system, u0, dt, opts.viscosity);
    if cfl > 1.0 {
        return Err(Error::Cfl(cfl));
    }

    let rhs = Rhs {
        system,
        nu: opts.viscosity,
        kmax: dealias_limit(grid),
    };
    let drift_of = |u: &PeriodicField| -> Result<f64> {
        match &system.involution {
            Some(op) => Ok(apply_operator(op, u)?.l2_norm()),
            None => Ok(0.0),
        }
    };
    let limit = BLOWUP_FACTOR * u0.sup_norm().max(1e-12);

    let mut u = u0.clone();
    let mut times = vec![0.0];
    let mut drift = vec![drift_of(&u)?];
    let mut states = vec![u.clone()];
    let mut blew_up = false;
    for step in 1..=n_steps {
        let Some(next) = rk4_step(&rhs, &u, dt)? else {
            blew_up = true;
            break;
        };
        let sup = next.sup_norm();
        if !sup.is_finite() || next.data().iter().any(|v| !v.is_finite()) || sup > limit {
            blew_up = true;
            break;
        }
        u = next;
        if step % opts.stride == 0 || step == n_steps {
            times.push(step as f64 * dt);
            drift.push(drift_of(&u)?);
            states.push(u.clone());
        }
    }
    Ok(Trajectory {
        system: system.clone(),
        grid,
        times,
        states,
        drift,
        viscosity: opts.viscosity,
        dt,
        n_steps,
        scheme: SCHEME,
        seed: opts.seed,
        cfl_ratio: cfl,
        blew_up,
    })
}
