//! Periodic fields on the discrete torus and their Fourier coefficients.
//!
//! A grid with `n` (odd) points per axis carries the symmetric frequency set
//! `{-(n-1)/2, ..., (n-1)/2}^d`. Coefficients are normalised so that
//! `coeffs(xi)` is the Fourier coefficient `int_Q psi e^{-2 pi i xi.x}`, and
//! every integral is a grid mean (`|Q| = 1`).

mod fft;
pub mod io;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::opsym::{self, DiffOp};
use crate::{Error, Result, C64};

/// Relative tolerance below which a mean counts as zero.
pub const ZERO_MEAN_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    d: usize,
    n: usize,
}

impl Grid {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidGrid(format!("d = {d} not in 1..=3")));
        }
        if n == 0 || n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!("n must be odd (got {n})")));
        }
        Ok(Self { d, n })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of grid points `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Largest frequency per axis, `(n - 1) / 2`.
    pub fn half(&self) -> usize {
        (self.n - 1) / 2
    }

    /// Per-axis indices of a flat index, first axis slowest.
    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.d];
        for a in (0..self.d).rev() {
            out[a] = idx % self.n;
            idx /= self.n;
        }
        out
    }

    /// Grid point `x = i / n` of a flat index.
    pub fn point(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx)
            .into_iter()
            .map(|i| i as f64 / self.n as f64)
            .collect()
    }

    /// Integer frequency stored at a flat coefficient index.
    pub fn freq(&self, idx: usize) -> Vec<i64> {
        let h = self.half();
        self.multi_index(idx)
            .into_iter()
            .map(|i| if i <= h { i as i64 } else { i as i64 - self.n as i64 })
            .collect()
    }

    pub fn freq_f64(&self, idx: usize) -> Vec<f64> {
        self.freq(idx).into_iter().map(|k| k as f64).collect()
    }

    /// Flat index of a frequency; components are reduced modulo `n`.
    pub fn index_of(&self, freq: &[i64]) -> usize {
        freq.iter().fold(0, |acc, &k| {
            acc * self.n + k.rem_euclid(self.n as i64) as usize
        })
    }

    /// Flat index of `-xi`.
    pub fn neg_index(&self, idx: usize) -> usize {
        let f: Vec<i64> = self.freq(idx).into_iter().map(|k| -k).collect();
        self.index_of(&f)
    }

    /// `|xi|^2` of the frequency at a flat index.
    pub fn freq_norm2(&self, idx: usize) -> f64 {
        self.freq(idx).iter().map(|&k| (k * k) as f64).sum()
    }

    /// `|xi|_inf` of the frequency at a flat index.
    pub fn freq_inf(&self, idx: usize) -> usize {
        self.freq(idx).iter().map(|k| k.unsigned_abs() as usize).max().unwrap_or(0)
    }

    /// True when `xi` is the representative of the pair `{xi, -xi}`:
    /// its first nonzero component is positive.
    pub fn is_half_space(&self, idx: usize) -> bool {
        self.freq(idx).into_iter().find(|&k| k != 0).is_some_and(|k| k > 0)
    }
}

/// An `R^N`-valued grid function; point `p`, component `c` at `data[p * N + c]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicField {
    grid: Grid,
    fiber: usize,
    data: Vec<f64>,
}

impl PeriodicField {
    pub fn new(grid: Grid, fiber: usize, data: Vec<f64>) -> Result<Self> {
        if fiber == 0 {
            return Err(Error::DimensionMismatch("fiber must be positive".into()));
        }
        if data.len() != grid.len() * fiber {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for {} points x {fiber} components",
                data.len(),
                grid.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field samples".into()));
        }
        Ok(Self { grid, fiber, data })
    }

    pub fn zeros(grid: Grid, fiber: usize) -> Self {
        Self {
            grid,
            fiber,
            data: vec![0.0; grid.len() * fiber],
        }
    }

    /// Samples `f(x, out)` at every grid point.
    pub fn from_fn(grid: Grid, fiber: usize, mut f: impl FnMut(&[f64], &mut [f64])) -> Self {
        let mut data = vec![0.0; grid.len() * fiber];
        for (p, chunk) in data.chunks_mut(fiber).enumerate() {
            f(&grid.point(p), chunk);
        }
        Self { grid, fiber, data }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn fiber(&self) -> usize {
        self.fiber
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn at(&self, p: usize) -> &[f64] {
        &self.data[p * self.fiber..(p + 1) * self.fiber]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.fiber)
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.fiber];
        for z in self.points() {
            for (a, b) in m.iter_mut().zip(z) {
                *a += b;
            }
        }
        let len = self.grid.len() as f64;
        m.iter_mut().for_each(|v| *v /= len);
        m
    }

    /// Grid mean of `|psi|^2`.
    pub fn mean_square(&self) -> f64 {
        self.points().map(norm2).sum::<f64>() / self.grid.len() as f64
    }

    pub fn l2_norm(&self) -> f64 {
        self.mean_square().sqrt()
    }

    /// Grid mean of `psi . phi`.
    pub fn inner(&self, other: &PeriodicField) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum::<f64>() / self.grid.len() as f64
    }

    pub fn sup_norm(&self) -> f64 {
        self.points().map(|z| norm2(z).sqrt()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, t: f64) -> Self {
        self.map_data(|v| v * t)
    }

    fn map_data(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            fiber: self.fiber,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn check_same(&self, other: &PeriodicField) -> Result<()> {
        if self.grid != other.grid || self.fiber != other.fiber {
            return Err(Error::DimensionMismatch(format!(
                "fields on {:?} x {} and {:?} x {}",
                self.grid, self.fiber, other.grid, other.fiber
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &PeriodicField) -> Result<Self> {
        self.check_same(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &PeriodicField) -> Result<Self> {
        self.check_same(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    /// `self + t * other`.
    pub fn axpy(&self, t: f64, other: &PeriodicField) -> Result<Self> {
        self.check_same(other)?;
        Ok(self.zip_with(other, |a, b| a + t * b))
    }

    fn zip_with(&self, other: &PeriodicField, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            fiber: self.fiber,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// Adds the constant vector `c` at every point.
    pub fn shifted(&self, c: &[f64]) -> Result<Self> {
        if c.len() != self.fiber {
            return Err(Error::DimensionMismatch("shift length differs from fiber".into()));
        }
        let mut out = self.clone();
        for z in out.data.chunks_mut(self.fiber) {
            z.iter_mut().zip(c).for_each(|(a, b)| *a += b);
        }
        Ok(out)
    }

    /// Pointwise map into a field with fiber `out_fiber`.
    pub fn map_points(
        &self,
        out_fiber: usize,
        mut f: impl FnMut(&[f64], &mut [f64]),
    ) -> Self {
        let mut data = vec![0.0; self.grid.len() * out_fiber];
        for (z, out) in self.points().zip(data.chunks_mut(out_fiber)) {
            f(z, out);
        }
        Self {
            grid: self.grid,
            fiber: out_fiber,
            data,
        }
    }

    /// Components `offset..offset + len` as a field of fiber `len`.
    pub fn block(&self, offset: usize, len: usize) -> Self {
        self.map_points(len, |z, out| out.copy_from_slice(&z[offset..offset + len]))
    }

    /// Concatenates fibers of fields on the same grid.
    pub fn stack(parts: &[&PeriodicField]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::Empty("no blocks to stack".into()))?;
        if parts.iter().any(|f| f.grid != first.grid) {
            return Err(Error::DimensionMismatch("blocks live on different grids".into()));
        }
        let fiber: usize = parts.iter().map(|f| f.fiber).sum();
        let mut data = Vec::with_capacity(first.grid.len() * fiber);
        for p in 0..first.grid.len() {
            for f in parts {
                data.extend_from_slice(f.at(p));
            }
        }
        Ok(Self {
            grid: first.grid,
            fiber,
            data,
        })
    }
}

fn norm2(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum()
}

/// Fourier coefficients of an `R^N`- or `C^N`-valued field, in FFT order.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    fiber: usize,
    coeffs: Vec<C64>,
}

impl SpectralField {
    pub fn new(grid: Grid, fiber: usize, coeffs: Vec<C64>) -> Result<Self> {
        if fiber == 0 || coeffs.len() != grid.len() * fiber {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for {} modes x {fiber} components",
                coeffs.len(),
                grid.len()
            )));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("coefficients".into()));
        }
        Ok(Self { grid, fiber, coeffs })
    }

    pub fn zeros(grid: Grid, fiber: usize) -> Self {
        Self {
            grid,
            fiber,
            coeffs: vec![C64::new(0.0, 0.0); grid.len() * fiber],
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn fiber(&self) -> usize {
        self.fiber
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.coeffs
    }

    pub fn at(&self, idx: usize) -> &[C64] {
        &self.coeffs[idx * self.fiber..(idx + 1) * self.fiber]
    }

    pub fn at_mut(&mut self, idx: usize) -> &mut [C64] {
        &mut self.coeffs[idx * self.fiber..(idx + 1) * self.fiber]
    }

    pub fn modes(&self) -> std::slice::ChunksExact<'_, C64> {
        self.coeffs.chunks_exact(self.fiber)
    }

    /// `sum_xi |c(xi)|^2`, equal to the grid mean of `|psi|^2`.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Largest `|c(-xi) - conj c(xi)|`.
    pub fn conjugate_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for idx in 0..self.grid.len() {
            let neg = self.grid.neg_index(idx);
            for (a, b) in self.at(idx).iter().zip(self.at(neg)) {
                worst = worst.max((a.conj() - b).norm());
            }
        }
        worst
    }

    pub fn zero_mean(&self) -> Self {
        let mut out = self.clone();
        out.at_mut(0).iter_mut().for_each(|c| *c = C64::new(0.0, 0.0));
        out
    }

    /// Mode-wise map `c(xi) -> f(idx, c(xi))` with output fiber `out_fiber`.
    pub fn map_modes(
        &self,
        out_fiber: usize,
        mut f: impl FnMut(usize, &[C64], &mut [C64]),
    ) -> Self {
        let mut coeffs = vec![C64::new(0.0, 0.0); self.grid.len() * out_fiber];
        for (idx, (c, out)) in self.modes().zip(coeffs.chunks_mut(out_fiber)).enumerate() {
            f(idx, c, out);
        }
        Self {
            grid: self.grid,
            fiber: out_fiber,
            coeffs,
        }
    }

    /// Multiplies each mode by the scalar `m(idx)`.
    pub fn scale_modes(&self, m: impl Fn(usize) -> f64) -> Self {
        self.map_modes(self.fiber, |idx, c, out| {
            let s = m(idx);
            out.iter_mut().zip(c).for_each(|(o, v)| *o = v * s);
        })
    }

    pub fn add(&self, other: &SpectralField) -> Result<Self> {
        if self.grid != other.grid || self.fiber != other.fiber {
            return Err(Error::DimensionMismatch("spectral fields differ in shape".into()));
        }
        Ok(Self {
            grid: self.grid,
            fiber: self.fiber,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self {
            grid: self.grid,
            fiber: self.fiber,
            coeffs: self.coeffs.iter().map(|c| c * t).collect(),
        }
    }
}

pub fn transform(field: &PeriodicField) -> Result<SpectralField> {
    if field.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("field samples".into()));
    }
    let grid = field.grid;
    let (len, fiber) = (grid.len(), field.fiber);
    let scale = 1.0 / len as f64;
    let mut coeffs = vec![C64::new(0.0, 0.0); len * fiber];
    let mut buf = vec![C64::new(0.0, 0.0); len];
    for c in 0..fiber {
        for (p, b) in buf.iter_mut().enumerate() {
            *b = C64::new(field.data[p * fiber + c], 0.0);
        }
        fft::fft_nd(grid, &mut buf, false);
        for (p, b) in buf.iter().enumerate() {
            coeffs[p * fiber + c] = b * scale;
        }
    }
    Ok(SpectralField {
        grid,
        fiber,
        coeffs,
    })
}

/// Real part of `sum_xi c(xi) e^{2 pi i xi.x}`.
pub fn inverse_transform(spec: &SpectralField) -> PeriodicField {
    let grid = spec.grid;
    let (len, fiber) = (grid.len(), spec.fiber);
    let mut data = vec![0.0; len * fiber];
    let mut buf = vec![C64::new(0.0, 0.0); len];
    for c in 0..fiber {
        for (p, b) in buf.iter_mut().enumerate() {
            *b = spec.coeffs[p * fiber + c];
        }
        fft::fft_nd(grid, &mut buf, true);
        for (p, b) in buf.iter().enumerate() {
            data[p * fiber + c] = b.re;
        }
    }
    PeriodicField { grid, fiber, data }
}

/// Applies the real mode matrices `m(idx)` (or zero where `None`) to every
/// coefficient vector, with an extra complex factor.
pub fn apply_mode_matrices(
    spec: &SpectralField,
    out_fiber: usize,
    factor: C64,
    m: impl Fn(usize) -> Option<DMatrix<f64>>,
) -> SpectralField {
    spec.map_modes(out_fiber, |idx, c, out| {
        if let Some(mat) = m(idx) {
            for (r, o) in out.iter_mut().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (k, v) in c.iter().enumerate() {
                    acc += v * mat[(r, k)];
                }
                *o = acc * factor;
            }
        }
    })
}

fn check_op(op: &DiffOp, grid: Grid, fiber: usize) -> Result<()> {
    if op.dim() != grid.dim() || op.source_dim() != fiber {
        return Err(Error::DimensionMismatch(format!(
            "operator on R^{} in d = {} applied to R^{fiber}-valued field in d = {}",
            op.source_dim(),
            op.dim(),
            grid.dim()
        )));
    }
    Ok(())
}

/// `c(xi) -> A(xi) c(xi)` at integer frequencies.
pub fn apply_operator_spectral(op: &DiffOp, spec: &SpectralField) -> Result<SpectralField> {
    check_op(op, spec.grid, spec.fiber)?;
    let grid = spec.grid;
    Ok(apply_mode_matrices(
        spec,
        op.target_dim(),
        op.symbol_factor(),
        |idx| (idx != 0).then(|| op.real_symbol(&grid.freq_f64(idx))),
    ))
}

pub fn apply_operator(op: &DiffOp, field: &PeriodicField) -> Result<PeriodicField> {
    check_op(op, field.grid, field.fiber)?;
    Ok(inverse_transform(&apply_operator_spectral(op, &transform(field)?)?))
}

/// Removes the mean; the zero mode of the result vanishes.
pub fn zero_mean(field: &PeriodicField) -> PeriodicField {
    let m: Vec<f64> = field.mean().into_iter().map(|v| -v).collect();
    field.shifted(&m).expect("mean has fiber length")
}

/// Errors unless `|mean| <= ZERO_MEAN_TOL * max(rms, 1e-300)` or the field vanishes.
pub fn check_zero_mean(field: &PeriodicField) -> Result<()> {
    let m = norm2(&field.mean()).sqrt();
    let rms = field.l2_norm();
    if m > ZERO_MEAN_TOL * rms.max(1.0e-300) && m > 1e-14 {
        return Err(Error::NonZeroMean(m));
    }
    Ok(())
}

/// Sobolev multiplier `(2 pi |xi|)^s` at a flat index; zero at `xi = 0` for `s != 0`.
pub fn sobolev_multiplier(grid: Grid, idx: usize, s: i32) -> f64 {
    if s == 0 {
        return 1.0;
    }
    let k2 = grid.freq_norm2(idx);
    if k2 == 0.0 {
        return 0.0;
    }
    (2.0 * std::f64::consts::PI * k2.sqrt()).powi(s)
}

fn lp_of(field: &PeriodicField, p: f64) -> f64 {
    let len = field.grid.len() as f64;
    if p == 2.0 {
        return field.l2_norm();
    }
    let s: f64 = field.points().map(|z| norm2(z).powf(p / 2.0)).sum();
    (s / len).powf(1.0 / p)
}

fn check_p(p: f64, min: f64) -> Result<()> {
    if !p.is_finite() || p < min {
        return Err(Error::InvalidParameter(format!("exponent p = {p} must be >= {min}")));
    }
    Ok(())
}

/// Homogeneous Sobolev norm `|| F^{-1}[(2 pi |xi|)^s psi^] ||_{L^p}`.
///
/// `s = 0` is the discrete `L^p` norm; `s > 0` gives the seminorm of order
/// `s`; `s < 0` requires a zero-mean field.
pub fn sobolev_norm(field: &PeriodicField, s: i32, p: f64) -> Result<f64> {
    check_p(p, 1.0)?;
    if s == 0 {
        return Ok(lp_of(field, p));
    }
    if s < 0 {
        check_zero_mean(field)?;
    }
    let spec = transform(field)?;
    let grid = field.grid;
    let weighted = spec.scale_modes(|idx| sobolev_multiplier(grid, idx, s));
    if p == 2.0 {
        return Ok(weighted.energy().sqrt());
    }
    Ok(lp_of(&inverse_transform(&weighted), p))
}

/// `W^{s,p}` norm for `s >= 0` assembled as `(sum_{j <= s} |psi|^p_{j,p})^{1/p}`;
/// for `s < 0` the homogeneous norm.
pub fn full_sobolev_norm(field: &PeriodicField, s: i32, p: f64) -> Result<f64> {
    if s <= 0 {
        return sobolev_norm(field, s, p);
    }
    let mut acc = 0.0;
    for j in 0..=s {
        acc += sobolev_norm(field, j, p)?.powf(p);
    }
    Ok(acc.powf(1.0 / p))
}

/// Grid mean of `|V(psi)|^2 = |psi|^2 + |psi|^p`.
pub fn v_energy(field: &PeriodicField, p: f64) -> Result<f64> {
    check_p(p, 2.0)?;
    let s: f64 = field
        .points()
        .map(|z| {
            let a = norm2(z);
            a + if p == 2.0 { a } else { a.powf(p / 2.0) }
        })
        .sum();
    Ok(s / field.grid.len() as f64)
}

/// `(|u|^2_{-1,2} + |u|^p_{-1,p})^{1/2}`.
pub fn mixed_negative_norm(field: &PeriodicField, p: f64) -> Result<f64> {
    check_p(p, 2.0)?;
    let n2 = sobolev_norm(field, -1, 2.0)?;
    let np = if p == 2.0 { n2 } else { sobolev_norm(field, -1, p)? };
    Ok((n2 * n2 + np.powf(p)).sqrt())
}

/// Per-frequency real kernel projectors of an operator over a grid.
#[derive(Clone, Debug)]
pub struct ProjectorTable {
    grid: Grid,
    projectors: Vec<Option<DMatrix<f64>>>,
}

impl ProjectorTable {
    pub fn new(op: &DiffOp, grid: Grid) -> Result<Self> {
        Self::with_band(op, grid, grid.half())
    }

    /// Only modes with `|xi|_inf <= band` get a projector.
    pub fn with_band(op: &DiffOp, grid: Grid, band: usize) -> Result<Self> {
        check_op(op, grid, op.source_dim())?;
        let mut projectors = vec![None; grid.len()];
        for (idx, slot) in projectors.iter_mut().enumerate() {
            if idx == 0 || grid.freq_inf(idx) > band {
                continue;
            }
            let neg = grid.neg_index(idx);
            if neg < idx {
                continue;
            }
            *slot = Some(opsym::real_projector(op, &grid.freq_f64(idx))?);
        }
        for idx in 0..grid.len() {
            let neg = grid.neg_index(idx);
            if neg < idx {
                projectors[idx] = projectors[neg].clone();
            }
        }
        Ok(Self { grid, projectors })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn get(&self, idx: usize) -> Option<&DMatrix<f64>> {
        self.projectors[idx].as_ref()
    }

    /// `c(xi) -> P(xi) c(xi)`, zero at `xi = 0` and outside the band.
    pub fn project(&self, spec: &SpectralField) -> SpectralField {
        apply_mode_matrices(spec, spec.fiber, C64::new(1.0, 0.0), |idx| {
            self.projectors[idx].clone()
        })
    }
}

fn complex_normal(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

fn seeded_band_field(
    grid: Grid,
    fiber: usize,
    band: usize,
    seed: u64,
    amplitude: f64,
    project: impl Fn(usize, Vec<C64>) -> Vec<C64>,
) -> Result<PeriodicField> {
    if band == 0 {
        return Err(Error::InvalidParameter("band must be at least 1".into()));
    }
    let band = band.min(grid.half());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = SpectralField::zeros(grid, fiber);
    for idx in 0..grid.len() {
        if !grid.is_half_space(idx) || grid.freq_inf(idx) > band {
            continue;
        }
        let g: Vec<C64> = (0..fiber).map(|_| complex_normal(&mut rng)).collect();
        let v = project(idx, g);
        let neg = grid.neg_index(idx);
        spec.at_mut(idx).copy_from_slice(&v);
        for (o, c) in spec.at_mut(neg).iter_mut().zip(&v) {
            *o = c.conj();
        }
    }
    let energy = spec.energy();
    if energy == 0.0 {
        return Err(Error::Elliptic);
    }
    Ok(inverse_transform(&spec.scaled(amplitude / energy.sqrt())))
}

/// Seeded real zero-mean field with coefficients supported in `|xi|_inf <= band`
/// and L² norm `amplitude`.
pub fn random_band_limited_field(
    grid: Grid,
    fiber: usize,
    band: usize,
    seed: u64,
    amplitude: f64,
) -> Result<PeriodicField> {
    seeded_band_field(grid, fiber, band, seed, amplitude, |_, g| g)
}

/// Seeded real zero-mean A-free field `psi^(xi) = P(xi) g^(xi)` with L² norm
/// `amplitude`.
pub fn random_afree_field(
    op: &DiffOp,
    grid: Grid,
    band: usize,
    seed: u64,
    amplitude: f64,
) -> Result<PeriodicField> {
    if band == 0 {
        return Err(Error::InvalidParameter("band must be at least 1".into()));
    }
    let table = ProjectorTable::with_band(op, grid, band)?;
    random_afree_field_with(&table, band, seed, amplitude)
}

/// As [`random_afree_field`], reusing a projector table.
pub fn random_afree_field_with(
    table: &ProjectorTable,
    band: usize,
    seed: u64,
    amplitude: f64,
) -> Result<PeriodicField> {
    let grid = table.grid;
    let fiber = table
        .projectors
        .iter()
        .flatten()
        .next()
        .map(|p| p.nrows())
        .ok_or(Error::Elliptic)?;
    seeded_band_field(grid, fiber, band, seed, amplitude, |idx, g| match table.get(idx) {
        Some(p) => (0..fiber)
            .map(|r| (0..fiber).map(|k| g[k] * p[(r, k)]).sum())
            .collect(),
        None => vec![C64::new(0.0, 0.0); fiber],
    })
}

#[cfg(test)]
mod tests;
