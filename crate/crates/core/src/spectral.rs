//! Fourier analysis on the periodic grid.
//!
//! Coefficients use the symmetric continuum normalization
//! `û(ξ) = (2π)^{-1/2} ∫ u(x) e^{-ixξ} dx`, discretized with the trapezoid
//! rule, so Fourier–Lebesgue norms and the Airy group need no extra factors.
//! All odd and fractional multipliers zero the unpaired Nyquist mode to keep
//! real fields real.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::{RealField, SpectralField};

/// Relative imaginary residue tolerated when returning to physical space.
pub const REALNESS_TOLERANCE: f64 = 1e-12;

/// Fraction of the box (on each side) counted as the boundary layer.
pub const BOUNDARY_LAYER_FRACTION: f64 = 0.1;

/// Boundary-mass level above which x-weighted quantities are flagged.
pub const BOUNDARY_MASS_ADVISORY: f64 = 1e-8;

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Arc<Plans> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Plans>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plans {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

// x_0 = -L/2 contributes e^{iπk} = (-1)^k to every coefficient.
#[inline]
fn parity_sign(idx: usize) -> f64 {
    if idx % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn forward_transform(u: &RealField) -> Result<SpectralField> {
    if !u.is_finite() {
        return Err(Error::InvalidField("non-finite samples".into()));
    }
    let grid = *u.grid();
    let mut buf: Vec<Complex64> = u.samples().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plans(grid.n()).forward.process(&mut buf);
    let scale = grid.dx() / (2.0 * PI).sqrt();
    for (idx, c) in buf.iter_mut().enumerate() {
        *c *= scale * parity_sign(idx);
    }
    // Real input: impose exact conjugate symmetry so that real multipliers
    // keep the inverse exactly real up to the inverse FFT's own rounding.
    let n = grid.n();
    buf[0].im = 0.0;
    buf[n / 2].im = 0.0;
    for idx in 1..n / 2 {
        let avg = 0.5 * (buf[idx] + buf[n - idx].conj());
        buf[idx] = avg;
        buf[n - idx] = avg.conj();
    }
    SpectralField::new(grid, buf)
}

pub fn inverse_transform(f: &SpectralField) -> Result<RealField> {
    let grid = *f.grid();
    let mut buf: Vec<Complex64> = f
        .coeffs()
        .iter()
        .enumerate()
        .map(|(idx, &c)| c * parity_sign(idx))
        .collect();
    plans(grid.n()).inverse.process(&mut buf);
    let scale = grid.dxi() / (2.0 * PI).sqrt();
    let mut re2 = 0.0;
    let mut im2 = 0.0;
    let samples: Vec<f64> = buf
        .iter()
        .map(|c| {
            let c = c * scale;
            re2 += c.re * c.re;
            im2 += c.im * c.im;
            c.re
        })
        .collect();
    let residue = im2.sqrt();
    let norm = re2.sqrt();
    if residue > REALNESS_TOLERANCE * norm {
        return Err(Error::SymmetryViolation { residue, norm });
    }
    RealField::new(grid, samples)
}

/// The Airy group `V(t)`: multiplication by `e^{itξ³}`.
pub fn airy_propagate(f: &SpectralField, t: f64) -> SpectralField {
    if t == 0.0 {
        return f.clone();
    }
    let mut out = f.apply_multiplier(|xi| Complex64::from_polar(1.0, t * xi * xi * xi));
    out.zero_nyquist();
    out
}

/// Multiplication by `(iξ)^k` for `k <= 4`.
pub fn spatial_derivative(f: &SpectralField, k: u32) -> Result<SpectralField> {
    if k > 4 {
        return Err(Error::UnsupportedOrder(k));
    }
    if k == 0 {
        return Ok(f.clone());
    }
    let mut out = f.apply_multiplier(|xi| Complex64::new(0.0, xi).powu(k));
    if k % 2 == 1 {
        out.zero_nyquist();
    }
    Ok(out)
}

/// The Riesz potential `|D_x|^s`: multiplication by `|ξ|^s`, `s >= 0`.
pub fn fractional_derivative(f: &SpectralField, s: f64) -> Result<SpectralField> {
    if !(s >= 0.0) {
        return Err(Error::UnsupportedFractionalOrder(s));
    }
    Ok(riesz_multiplier(f, s))
}

/// `|ξ|^s` for any real `s`; the `ξ = 0` mode is sent to zero when `s != 0`.
///
/// Negative orders are only meaningful on data whose zero mode is negligible
/// relative to the lattice spacing; the Strichartz sampler is the one caller.
pub(crate) fn riesz_multiplier(f: &SpectralField, s: f64) -> SpectralField {
    if s == 0.0 {
        return f.clone();
    }
    let mut out = f.apply_multiplier(|xi| {
        if xi == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(xi.abs().powf(s), 0.0)
        }
    });
    out.zero_nyquist();
    out
}

/// Physical-space convenience: `∂_x^k u`.
pub fn derivative(u: &RealField, k: u32) -> Result<RealField> {
    inverse_transform(&spatial_derivative(&forward_transform(u)?, k)?)
}

/// Physical-space convenience: `|D_x|^s u`.
pub fn fractional(u: &RealField, s: f64) -> Result<RealField> {
    inverse_transform(&fractional_derivative(&forward_transform(u)?, s)?)
}

/// Physical-space convenience: `V(t)u`.
pub fn propagate(u: &RealField, t: f64) -> Result<RealField> {
    inverse_transform(&airy_propagate(&forward_transform(u)?, t))
}

/// Spectral interpolation onto `factor·n` points of the same box.
pub fn refine(u: &RealField, factor: usize) -> Result<RealField> {
    let spec = forward_transform(u)?;
    inverse_transform(&spec.resample(u.grid().n() * factor.max(1))?)
}

/// Fraction of `‖u‖²` sitting in the outer 10% of the box on either side.
pub fn boundary_mass_fraction(u: &RealField) -> f64 {
    let grid = u.grid();
    let cut = (0.5 - BOUNDARY_LAYER_FRACTION) * grid.length();
    let (mut outer, mut total) = (0.0, 0.0);
    for (j, &v) in u.samples().iter().enumerate() {
        let w = v * v;
        total += w;
        if grid.x(j).abs() > cut {
            outer += w;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        outer / total
    }
}

/// Result of an x-weighting together with its wrap-around advisory.
#[derive(Clone, Debug)]
pub struct Weighted {
    pub field: RealField,
    pub boundary_mass: f64,
    pub boundary_flag: bool,
}

/// `x·u` using the physical coordinates of the truncated box.
pub fn multiply_by_x(u: &RealField) -> RealField {
    u.map_with_x(|x, v| x * v)
}

/// `x·u` plus the boundary-mass advisory.
pub fn multiply_by_x_flagged(u: &RealField) -> Weighted {
    let boundary_mass = boundary_mass_fraction(u);
    Weighted {
        field: multiply_by_x(u),
        boundary_mass,
        boundary_flag: boundary_mass > BOUNDARY_MASS_ADVISORY,
    }
}

/// Direct `O(n²)` evaluation of the inversion sum, without an FFT.
///
/// Slow; used to cross-check the fast path.
pub fn inverse_sum_at(f: &SpectralField, x: f64) -> f64 {
    let grid = f.grid();
    let mut acc = Complex64::new(0.0, 0.0);
    for (idx, c) in f.coeffs().iter().enumerate() {
        let xi = grid.wavenumber(idx);
        acc += c * Complex64::from_polar(1.0, xi * x);
    }
    (acc * grid.dxi() / (2.0 * PI).sqrt()).re
}
