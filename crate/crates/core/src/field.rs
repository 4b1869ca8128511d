//! Real profiles on the grid and their Fourier coefficients.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Samples `u(x_j)` of a real profile.
#[derive(Clone, Debug, PartialEq)]
pub struct RealField {
    grid: GridSpec,
    samples: Vec<f64>,
}

impl RealField {
    pub fn new(grid: GridSpec, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.n() {
            return Err(Error::InvalidField(format!(
                "expected {} samples, got {}",
                grid.n(),
                samples.len()
            )));
        }
        Ok(Self { grid, samples })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            samples: vec![0.0; grid.n()],
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64) -> f64) -> Self {
        let samples = (0..grid.n()).map(|j| f(grid.x(j))).collect();
        Self { grid, samples }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            samples: self.samples.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination with the physical coordinate available.
    pub fn map_with_x(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            samples: self
                .samples
                .iter()
                .enumerate()
                .map(|(j, &v)| f(self.grid.x(j), v))
                .collect(),
        }
    }

    pub fn zip_with(&self, other: &RealField, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &RealField) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &RealField) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `a·self + b·other`.
    pub fn axpby(&self, a: f64, other: &RealField, b: f64) -> Self {
        self.zip_with(other, |x, y| a * x + b * y)
    }

    /// Discrete L² norm with trapezoid (periodic) weights.
    pub fn l2_norm(&self) -> f64 {
        (self.samples.iter().map(|v| v * v).sum::<f64>() * self.grid.dx()).sqrt()
    }

    pub fn inner(&self, other: &RealField) -> f64 {
        self.samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.dx()
    }
}

/// Continuum-normalized Fourier coefficients `û(ξ_k)` in FFT order.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: GridSpec, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.n() {
            return Err(Error::InvalidField(format!(
                "expected {} coefficients, got {}",
                grid.n(),
                coeffs.len()
            )));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.n()],
        }
    }

    /// All coefficients equal to one: the identity multiplier.
    pub fn ones(grid: GridSpec) -> Self {
        Self {
            grid,
            coeffs: vec![Complex64::new(1.0, 0.0); grid.n()],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Mode-by-mode product, in place.
    pub fn mul_assign_pointwise(&mut self, other: &SpectralField) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a *= b;
        }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Multiply mode-by-mode by `m(ξ)`.
    pub fn apply_multiplier(&self, m: impl Fn(f64) -> Complex64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(idx, &c)| c * m(self.grid.wavenumber(idx)))
            .collect();
        Self {
            grid: self.grid,
            coeffs,
        }
    }

    pub fn zero_nyquist(&mut self) {
        let idx = self.grid.nyquist_index();
        self.coeffs[idx] = Complex64::new(0.0, 0.0);
    }

    /// L² norm over ξ with the lattice weight `2π/L`.
    pub fn l2_norm(&self) -> f64 {
        (self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.dxi()).sqrt()
    }

    pub fn axpby(&self, a: Complex64, other: &SpectralField, b: Complex64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&x, &y)| a * x + b * y)
                .collect(),
        }
    }

    /// Largest violation of `û(-ξ) = conj(û(ξ))`, Nyquist mode required real.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.grid.n();
        let mut worst = self.coeffs[0].im.abs().max(self.coeffs[n / 2].im.abs());
        for idx in 1..n / 2 {
            let d = (self.coeffs[idx] - self.coeffs[n - idx].conj()).norm();
            worst = worst.max(d);
        }
        worst
    }

    /// Zero-pad (or truncate) onto a grid with the same box and `m` points.
    ///
    /// The unpaired Nyquist coefficient of the source is dropped.
    pub fn resample(&self, m: usize) -> Result<Self> {
        let target = GridSpec::new(m, self.grid.length())?;
        let mut out = vec![Complex64::new(0.0, 0.0); m];
        let half = (self.grid.n().min(m) / 2) as i64;
        for k in (-half + 1)..half {
            let src = self.grid.index_of_mode(k).expect("mode in range");
            let dst = target.index_of_mode(k).expect("mode in range");
            out[dst] = self.coeffs[src];
        }
        Ok(Self {
            grid: target,
            coeffs: out,
        })
    }
}
