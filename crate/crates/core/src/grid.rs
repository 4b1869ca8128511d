//! Uniform periodic grid standing in for the real line.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Periodic box `[-L/2, L/2)` sampled at `n` equispaced points.
///
/// Wavenumbers are stored in FFT order: `k = 0, 1, ..., n/2 - 1, -n/2, ..., -1`,
/// so index `n/2` is the unpaired Nyquist mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n: usize,
    length: f64,
}

impl GridSpec {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 2 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!("n = {n} must be a positive even integer")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("length = {length} must be positive")));
        }
        Ok(Self { n, length })
    }

    /// n = 1024, L = 64.
    pub fn test_default() -> Self {
        Self { n: 1024, length: 64.0 }
    }

    /// n = 4096, L = 256.
    pub fn production_default() -> Self {
        Self { n: 4096, length: 256.0 }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Spacing of the wavenumber lattice, `2π/L`.
    pub fn dxi(&self) -> f64 {
        2.0 * PI / self.length
    }

    pub fn x(&self, j: usize) -> f64 {
        -0.5 * self.length + j as f64 * self.dx()
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Signed integer mode number for FFT-order index `idx`.
    pub fn mode(&self, idx: usize) -> i64 {
        if idx < self.n / 2 {
            idx as i64
        } else {
            idx as i64 - self.n as i64
        }
    }

    pub fn wavenumber(&self, idx: usize) -> f64 {
        self.mode(idx) as f64 * self.dxi()
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n).map(|idx| self.wavenumber(idx)).collect()
    }

    pub fn nyquist_index(&self) -> usize {
        self.n / 2
    }

    /// FFT-order index of signed mode `k`, if it is representable.
    pub fn index_of_mode(&self, k: i64) -> Option<usize> {
        let half = (self.n / 2) as i64;
        if k >= -half && k < half {
            Some(if k >= 0 { k as usize } else { (k + self.n as i64) as usize })
        } else {
            None
        }
    }

    /// Same box, `factor` times as many points.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            n: self.n * factor.max(1),
            length: self.length,
        }
    }

    /// Same number of points on a box scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            length: self.length * factor,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_odd_or_empty() {
        assert!(GridSpec::new(1023, 64.0).is_err());
        assert!(GridSpec::new(0, 64.0).is_err());
        assert!(GridSpec::new(16, 0.0).is_err());
        assert!(GridSpec::new(16, f64::NAN).is_err());
    }

    #[test]
    fn layout_invariants() {
        let g = GridSpec::test_default();
        assert_eq!(g.dx() * g.n() as f64, g.length());
        let xs = g.coordinates();
        assert_eq!(xs[0], -32.0);
        assert!(xs.windows(2).all(|w| w[1] > w[0]));
        let ks = g.wavenumbers();
        // every mode except the Nyquist one has its mirror image
        for idx in 0..g.n() {
            if idx == g.nyquist_index() {
                assert!(ks[idx] < 0.0);
                continue;
            }
            let mirror = g.index_of_mode(-g.mode(idx)).unwrap();
            assert_eq!(ks[mirror], -ks[idx]);
        }
    }

    #[test]
    fn mode_index_round_trip() {
        let g = GridSpec::new(16, 1.0).unwrap();
        for idx in 0..16 {
            assert_eq!(g.index_of_mode(g.mode(idx)), Some(idx));
        }
        assert_eq!(g.index_of_mode(8), None);
        assert_eq!(g.index_of_mode(-8), Some(8));
    }
}
