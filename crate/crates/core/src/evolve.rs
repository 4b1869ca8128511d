//! Time integration of the generalized KdV equation.
//!
//! The dispersive part is advanced exactly by the Airy group; the flux
//! `μ ∂_x(|u|^{2α} u)` is handled by classical RK4 in the frame conjugated by
//! that group (integrating-factor RK4). The flux is evaluated on a grid
//! oversampled by zero-padding and then truncated back.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{RealField, SpectralField};
use crate::grid::GridSpec;
use crate::model::ModelParams;
use crate::spectral::{
    boundary_mass_fraction, forward_transform, inverse_transform, spatial_derivative,
};

pub const DEFAULT_OVERSAMPLE: usize = 2;
pub const DEFAULT_CFL_SAFETY: f64 = 0.5;
/// Target number of stored slices for [`StoreStride::Auto`].
pub const AUTO_SLICES: usize = 200;
/// Amplitude growth over the initial maximum treated as blow-up.
pub const BLOWUP_AMPLIFICATION: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    pub dt: f64,
    pub oversample: usize,
    pub cfl_safety: f64,
    /// Drop the flux entirely; the step then reduces to the Airy group.
    #[serde(default)]
    pub suppress_flux: bool,
}

impl StepperConfig {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            oversample: DEFAULT_OVERSAMPLE,
            cfl_safety: DEFAULT_CFL_SAFETY,
            suppress_flux: false,
        }
    }

    /// Step size from [`stable_dt`] for the initial data.
    pub fn auto(u0: &RealField, params: &ModelParams, cfl_safety: f64) -> Self {
        Self {
            dt: stable_dt(u0, params, cfl_safety),
            oversample: DEFAULT_OVERSAMPLE,
            cfl_safety,
            suppress_flux: false,
        }
    }

    pub fn with_oversample(mut self, oversample: usize) -> Self {
        self.oversample = oversample;
        self
    }

    pub fn linear(mut self) -> Self {
        self.suppress_flux = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParams(format!("dt = {} must be positive", self.dt)));
        }
        if self.oversample < 1 {
            return Err(Error::InvalidParams("oversample must be >= 1".into()));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "cfl_safety = {} must lie in (0, 1]",
                self.cfl_safety
            )));
        }
        Ok(())
    }
}

/// Nonlinear CFL proxy `cfl_safety · dx / max(1, (2α+1)|μ| max|u|^{2α})`.
///
/// The factor `(2α+1)|μ|` is the advection speed of the linearized flux; it
/// keeps `dt·ξ_max·speed` inside the stability interval of RK4 on the
/// imaginary axis.
pub fn stable_dt(u: &RealField, params: &ModelParams, cfl_safety: f64) -> f64 {
    let speed = (2.0 * params.alpha + 1.0) * params.mu.abs() * params.weight(u.max_abs());
    cfl_safety * u.grid().dx() / speed.max(1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub u: RealField,
    pub boundary_mass_fraction: f64,
}

impl SimState {
    pub fn new(t: f64, u: RealField) -> Self {
        let boundary_mass_fraction = boundary_mass_fraction(&u);
        Self {
            t,
            u,
            boundary_mass_fraction,
        }
    }
}

/// `Π(|u|^{2α} u)`: the power evaluated on the oversampled grid and projected
/// back onto the modes of `u_hat`.
pub fn projected_power_spectral(
    u_hat: &SpectralField,
    params: &ModelParams,
    oversample: usize,
) -> Result<SpectralField> {
    let n = u_hat.grid().n();
    let fine = inverse_transform(&u_hat.resample(n * oversample.max(1))?)?;
    forward_transform(&params.power_field(&fine))?.resample(n)
}

/// [`projected_power_spectral`] in physical space, default oversampling.
pub fn projected_power(u: &RealField, params: &ModelParams) -> Result<RealField> {
    inverse_transform(&projected_power_spectral(&forward_transform(u)?, params, DEFAULT_OVERSAMPLE)?)
}

/// Spectral coefficients of `μ ∂_x Π(|u|^{2α} u)`.
pub fn flux_spectral(
    u_hat: &SpectralField,
    params: &ModelParams,
    oversample: usize,
) -> Result<SpectralField> {
    let coarse = projected_power_spectral(u_hat, params, oversample)?;
    let mut out = spatial_derivative(&coarse, 1)?;
    for c in out.coeffs_mut() {
        *c *= params.mu;
    }
    Ok(out)
}

pub fn nonlinear_flux(u: &RealField, params: &ModelParams) -> Result<RealField> {
    nonlinear_flux_with(u, params, DEFAULT_OVERSAMPLE)
}

pub fn nonlinear_flux_with(
    u: &RealField,
    params: &ModelParams,
    oversample: usize,
) -> Result<RealField> {
    inverse_transform(&flux_spectral(&forward_transform(u)?, params, oversample)?)
}

/// `∂_t u = -∂_x³ u + μ ∂_x(|u|^{2α} u)` for the semidiscrete system.
pub fn rhs_time_derivative(u: &RealField, params: &ModelParams) -> Result<RealField> {
    rhs_time_derivative_with(u, params, DEFAULT_OVERSAMPLE)
}

pub fn rhs_time_derivative_with(
    u: &RealField,
    params: &ModelParams,
    oversample: usize,
) -> Result<RealField> {
    let u_hat = forward_transform(u)?;
    let dispersive = spatial_derivative(&u_hat, 3)?;
    let flux = flux_spectral(&u_hat, params, oversample)?;
    let one = Complex64::new(1.0, 0.0);
    inverse_transform(&dispersive.axpby(-one, &flux, one))
}

/// One integrating-factor RK4 step of fixed size, in spectral variables.
pub(crate) struct Stepper {
    params: ModelParams,
    dt: f64,
    oversample: usize,
    suppress_flux: bool,
    half: Vec<Complex64>,
    full: Vec<Complex64>,
}

impl Stepper {
    pub(crate) fn new(grid: &GridSpec, params: ModelParams, cfg: &StepperConfig) -> Self {
        let phases = |tau: f64| -> Vec<Complex64> {
            (0..grid.n())
                .map(|idx| {
                    if idx == grid.nyquist_index() {
                        Complex64::new(0.0, 0.0)
                    } else {
                        let xi = grid.wavenumber(idx);
                        Complex64::from_polar(1.0, tau * xi * xi * xi)
                    }
                })
                .collect()
        };
        Self {
            params,
            dt: cfg.dt,
            oversample: cfg.oversample,
            suppress_flux: cfg.suppress_flux,
            half: phases(0.5 * cfg.dt),
            full: phases(cfg.dt),
        }
    }

    fn flux(&self, u_hat: &SpectralField) -> Result<SpectralField> {
        flux_spectral(u_hat, &self.params, self.oversample)
    }

    fn mul(phase: &[Complex64], f: &SpectralField) -> SpectralField {
        let mut out = f.clone();
        for (c, p) in out.coeffs_mut().iter_mut().zip(phase) {
            *c *= p;
        }
        out
    }

    pub(crate) fn advance(&self, u_hat: &SpectralField) -> Result<SpectralField> {
        let e1u = Self::mul(&self.full, u_hat);
        if self.suppress_flux {
            return Ok(e1u);
        }
        let h = self.dt;
        let one = Complex64::new(1.0, 0.0);
        let c = |x: f64| Complex64::new(x, 0.0);

        let k1 = self.flux(u_hat)?;
        let ehu = Self::mul(&self.half, u_hat);
        let k2 = self.flux(&Self::mul(&self.half, &u_hat.axpby(one, &k1, c(0.5 * h))))?;
        let k3 = self.flux(&ehu.axpby(one, &k2, c(0.5 * h)))?;
        let k4 = self.flux(&e1u.axpby(one, &Self::mul(&self.half, &k3), c(h)))?;

        let mut out = e1u;
        let w = h / 6.0;
        for idx in 0..out.coeffs().len() {
            let incr = self.full[idx] * k1.coeffs()[idx]
                + 2.0 * self.half[idx] * (k2.coeffs()[idx] + k3.coeffs()[idx])
                + k4.coeffs()[idx];
            out.coeffs_mut()[idx] += w * incr;
        }
        Ok(out)
    }
}

fn check_state(u: &RealField, ceiling: Option<f64>) -> std::result::Result<(), String> {
    if !u.is_finite() {
        return Err("non-finite values".into());
    }
    if let Some(c) = ceiling {
        let m = u.max_abs();
        if m > c {
            return Err(format!("max|u| = {m:e} exceeds {c:e}"));
        }
    }
    Ok(())
}

/// Advance one step of size `cfg.dt`.
pub fn step(s: &SimState, params: &ModelParams, cfg: &StepperConfig) -> Result<SimState> {
    params.validate()?;
    cfg.validate()?;
    let stepper = Stepper::new(s.u.grid(), *params, cfg);
    let u_hat = forward_transform(&s.u)?;
    let t = s.t + cfg.dt;
    let blowup = |reason: String| Error::BlowUp {
        t,
        reason,
        last_good: Box::new(s.clone()),
    };
    let next = match stepper.advance(&u_hat) {
        Ok(next) => next,
        Err(Error::InvalidField(reason)) => return Err(blowup(reason)),
        Err(e) => return Err(e),
    };
    if next.coeffs().iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(blowup("non-finite coefficients".into()));
    }
    let u = inverse_transform(&next)?;
    let ceiling = (s.u.max_abs() > 0.0).then(|| BLOWUP_AMPLIFICATION * s.u.max_abs());
    check_state(&u, ceiling).map_err(blowup)?;
    Ok(SimState::new(t, u))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoreStride {
    /// Enough slices that at least [`AUTO_SLICES`] intervals span `[0, T]`.
    Auto,
    /// Store every `k` steps.
    Every(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupInfo {
    pub t: f64,
    pub reason: String,
}

/// Stored slices of one run at uniform spacing.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub params: ModelParams,
    pub grid: GridSpec,
    pub slices: Vec<SimState>,
    /// Steps between stored slices.
    pub store_stride: usize,
    /// Step size actually used.
    pub dt: f64,
    pub blowup: Option<BlowupInfo>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.slices.iter().map(|s| s.t).collect()
    }

    /// Time between consecutive stored slices.
    pub fn stored_dt(&self) -> f64 {
        self.dt * self.store_stride as f64
    }

    pub fn final_state(&self) -> &SimState {
        self.slices.last().expect("trajectory has at least one slice")
    }

    pub fn is_blowup(&self) -> bool {
        self.blowup.is_some()
    }

    /// Whether stored times are uniformly spaced to within rounding.
    pub fn is_uniform(&self) -> bool {
        let times = self.times();
        if times.len() < 3 {
            return true;
        }
        let h = times[1] - times[0];
        times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1e-300))
    }

    /// Trapezoid weights over all stored times.
    pub fn time_weights(&self) -> Vec<f64> {
        trapezoid_weights(&self.times())
    }

    /// Indices of stored slices with `start <= t <= end` (rounding-tolerant).
    pub fn window(&self, start: f64, end: f64) -> std::ops::Range<usize> {
        let tol = 1e-9 * self.stored_dt().max(1e-300);
        let lo = self.slices.iter().position(|s| s.t >= start - tol).unwrap_or(self.len());
        let hi = self
            .slices
            .iter()
            .rposition(|s| s.t <= end + tol)
            .map_or(lo, |i| i + 1);
        lo..hi.max(lo)
    }

    /// A copy keeping every `k`-th stored slice.
    pub fn thinned(&self, k: usize) -> Self {
        let k = k.max(1);
        Self {
            params: self.params,
            grid: self.grid,
            slices: self.slices.iter().step_by(k).cloned().collect(),
            store_stride: self.store_stride * k,
            dt: self.dt,
            blowup: self.blowup.clone(),
        }
    }
}

/// Trapezoid weights for sample points `times` (need not be uniform).
pub fn trapezoid_weights(times: &[f64]) -> Vec<f64> {
    let n = times.len();
    let mut w = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let h = times[i + 1] - times[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    w
}

/// Step count, storage stride and step size actually used for a run of
/// length `horizon > 0` requested at step `dt`.
pub fn plan_steps(dt: f64, horizon: f64, store_stride: StoreStride) -> (usize, usize, f64) {
    let nsteps = ((horizon / dt) - 1e-9).ceil().max(1.0) as usize;
    let stride = match store_stride {
        StoreStride::Every(k) => k.max(1),
        StoreStride::Auto => (nsteps / AUTO_SLICES).max(1),
    };
    let nsteps = nsteps.div_ceil(stride) * stride;
    (nsteps, stride, horizon / nsteps as f64)
}

/// Integrate from `t = 0` to `T`, storing slices every `store_stride` steps.
///
/// The step is shrunk so that `T` is an exact multiple of the stored spacing.
/// A detected blow-up ends the run early; the partial trajectory is returned
/// with [`Trajectory::blowup`] set.
pub fn evolve(
    u0: &RealField,
    params: &ModelParams,
    cfg: &StepperConfig,
    horizon: f64,
    store_stride: StoreStride,
) -> Result<Trajectory> {
    params.validate()?;
    cfg.validate()?;
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::InvalidParams(format!("horizon T = {horizon} must be >= 0")));
    }
    if !u0.is_finite() {
        return Err(Error::InvalidField("initial data is not finite".into()));
    }
    let grid = *u0.grid();
    let first = SimState::new(0.0, u0.clone());
    if horizon == 0.0 {
        return Ok(Trajectory {
            params: *params,
            grid,
            slices: vec![first],
            store_stride: 1,
            dt: cfg.dt,
            blowup: None,
        });
    }

    let (nsteps, stride, dt) = plan_steps(cfg.dt, horizon, store_stride);
    let run_cfg = StepperConfig { dt, ..*cfg };
    if dt > stable_dt(u0, params, cfg.cfl_safety) * (1.0 + 1e-12) {
        log::warn!("dt = {dt:e} exceeds the nonlinear CFL proxy for the initial data");
    }

    let stepper = Stepper::new(&grid, *params, &run_cfg);
    let ceiling = (u0.max_abs() > 0.0).then(|| BLOWUP_AMPLIFICATION * u0.max_abs());
    let mut slices = Vec::with_capacity(nsteps / stride + 1);
    slices.push(first);
    let mut u_hat = forward_transform(u0)?;
    let mut blowup = None;

    for i in 1..=nsteps {
        let t = i as f64 * dt;
        let next = match stepper.advance(&u_hat) {
            Ok(next) => next,
            Err(Error::InvalidField(reason)) => {
                blowup = Some(BlowupInfo { t, reason });
                break;
            }
            Err(e) => return Err(e),
        };
        if next.coeffs().iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            blowup = Some(BlowupInfo {
                t,
                reason: "non-finite coefficients".into(),
            });
            break;
        }
        let u = inverse_transform(&next)?;
        if let Err(reason) = check_state(&u, ceiling) {
            blowup = Some(BlowupInfo { t, reason });
            break;
        }
        u_hat = next;
        if i % stride == 0 {
            slices.push(SimState::new(t, u));
        }
    }

    Ok(Trajectory {
        params: *params,
        grid,
        slices,
        store_stride: stride,
        dt,
        blowup,
    })
}

/// Exact free (Airy) flow sampled at `slices + 1` uniform times on `[0, T]`.
pub fn free_flow(f: &RealField, params: &ModelParams, horizon: f64, intervals: usize) -> Result<Trajectory> {
    let intervals = intervals.max(1);
    let f_hat = forward_transform(f)?;
    let h = horizon / intervals as f64;
    let slices = (0..=intervals)
        .map(|i| {
            let t = i as f64 * h;
            Ok(SimState::new(t, inverse_transform(&crate::spectral::airy_propagate(&f_hat, t))?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        params: *params,
        grid: *f.grid(),
        slices,
        store_stride: 1,
        dt: h,
        blowup: None,
    })
}
