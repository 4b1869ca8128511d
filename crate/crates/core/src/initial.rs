//! Initial-data families.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::RealField;
use crate::grid::GridSpec;
use crate::model::ModelParams;

/// `A·exp(-((x - x0)/w)²)`.
pub fn make_gaussian(grid: GridSpec, amplitude: f64, center: f64, width: f64) -> Result<RealField> {
    if !(width > 0.0) {
        return Err(Error::InvalidField(format!("gaussian width {width} must be positive")));
    }
    Ok(RealField::from_fn(grid, |x| {
        let z = (x - center) / width;
        amplitude * (-z * z).exp()
    }))
}

/// Modulated packet `A·exp(-((x - x0)/w)²)·cos(k(x - x0))`.
///
/// Stands in for a single Fourier mode: a bare mode is not localized, and
/// weighted norms of it only see the periodic sawtooth of `x`.
pub fn make_wave_packet(
    grid: GridSpec,
    amplitude: f64,
    center: f64,
    width: f64,
    wavenumber: f64,
) -> Result<RealField> {
    let envelope = make_gaussian(grid, amplitude, center, width)?;
    Ok(envelope.map_with_x(|x, e| e * (wavenumber * (x - center)).cos()))
}

/// Ranges for random Gaussian packets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSpec {
    pub members: usize,
    pub seed: u64,
    pub amplitude: (f64, f64),
    pub width: (f64, f64),
    /// Centers are drawn from `[-center, center]`.
    pub center: f64,
    pub wavenumber: (f64, f64),
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self {
            members: 50,
            seed: 20240917,
            amplitude: (0.5, 1.5),
            width: (0.5, 2.0),
            center: 5.0,
            wavenumber: (0.0, 2.0),
        }
    }
}

impl EnsembleSpec {
    fn validate(&self) -> Result<()> {
        let ordered = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && a <= b;
        if !ordered(self.amplitude) || !ordered(self.width) || !ordered(self.wavenumber) {
            return Err(Error::InvalidParams("ensemble ranges must be finite with lo <= hi".into()));
        }
        if !(self.width.0 > 0.0) || !(self.center >= 0.0) {
            return Err(Error::InvalidParams("ensemble widths must be positive".into()));
        }
        Ok(())
    }
}

/// Seeded ensemble of modulated Gaussians. The same settings always yield the
/// same members, in the same order.
pub fn gaussian_ensemble(grid: GridSpec, spec: &EnsembleSpec) -> Result<Vec<RealField>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut draw = |(lo, hi): (f64, f64)| if hi > lo { rng.gen_range(lo..hi) } else { lo };
    (0..spec.members)
        .map(|_| {
            let a = draw(spec.amplitude);
            let w = draw(spec.width);
            let x0 = draw((-spec.center, spec.center));
            let k = draw(spec.wavenumber);
            make_wave_packet(grid, a, x0, w, k)
        })
        .collect()
}

/// Traveling-wave profile of the focusing equation at speed `c`:
/// `Q(x) = (c(α+1)/|μ|)^{1/(2α)} sech^{1/α}(α√c x)`, solving
/// `Q'' = cQ - |μ| Q^{2α+1}`.
pub fn soliton_profile(x: f64, c: f64, params: &ModelParams) -> f64 {
    let a = params.alpha;
    let amp = (c * (a + 1.0) / params.mu.abs()).powf(1.0 / (2.0 * a));
    let arg = a * c.sqrt() * x;
    // sech(z) = 2e^{-|z|}/(1 + e^{-2|z|}) avoids overflow in cosh
    let e = (-arg.abs()).exp();
    let sech = 2.0 * e / (1.0 + e * e);
    amp * sech.powf(1.0 / a)
}

/// Soliton centered at the origin. Requires a focusing model.
pub fn make_soliton(grid: GridSpec, c: f64, params: &ModelParams) -> Result<RealField> {
    if !(c > 0.0) {
        return Err(Error::InvalidParams(format!("soliton speed c = {c} must be positive")));
    }
    if !params.is_focusing() {
        return Err(Error::InvalidParams(
            "solitons exist only for the focusing equation (mu < 0)".into(),
        ));
    }
    Ok(RealField::from_fn(grid, |x| soliton_profile(x, c, params)))
}
