//! Scalar functionals: Lebesgue, Sobolev, weighted and Fourier–Lebesgue
//! norms, conserved quantities, mixed space-time norms, Strichartz sampling,
//! the Klainerman–Sobolev ratio and power-law fits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::Trajectory;
use crate::field::{RealField, SpectralField};
use crate::model::ModelParams;
use crate::spectral::{
    airy_propagate, forward_transform, fractional_derivative, inverse_transform, riesz_multiplier,
    spatial_derivative,
};

/// Floor used in every ratio to avoid `0/0`.
pub const RATIO_FLOOR: f64 = 1e-14;
/// Minimum number of stored slices inside a window for a mixed norm.
pub const MIN_WINDOW_SLICES: usize = 8;
/// Minimum number of points for [`decay_fit`].
pub const MIN_FIT_POINTS: usize = 10;

fn check_exponent(p: f64) -> Result<()> {
    if p >= 1.0 || p == f64::INFINITY {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}

fn lebesgue_slice(values: &[f64], dx: f64, p: f64) -> f64 {
    if p.is_infinite() {
        values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    } else if p == 2.0 {
        (values.iter().map(|v| v * v).sum::<f64>() * dx).sqrt()
    } else {
        (values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * dx).powf(1.0 / p)
    }
}

/// `‖u‖_{L^p}`; `p = ∞` is the grid maximum.
pub fn lebesgue(u: &RealField, p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(lebesgue_slice(u.samples(), u.grid().dx(), p))
}

/// `(‖u‖² + ‖∂_x u‖²)^{1/2}`.
pub fn sobolev_h1(u: &RealField) -> Result<f64> {
    let spec = forward_transform(u)?;
    let d = spatial_derivative(&spec, 1)?;
    Ok((spec.l2_norm().powi(2) + d.l2_norm().powi(2)).sqrt())
}

/// `‖⟨x⟩u‖_{L²}` with `⟨x⟩ = (1 + x²)^{1/2}`.
pub fn weighted_h01(u: &RealField) -> f64 {
    let g = u.grid();
    (u.samples()
        .iter()
        .enumerate()
        .map(|(j, v)| (1.0 + g.x(j).powi(2)) * v * v)
        .sum::<f64>()
        * g.dx())
    .sqrt()
}

/// `½‖u‖²`.
pub fn mass(u: &RealField) -> Result<f64> {
    Ok(0.5 * u.l2_norm().powi(2))
}

/// `½‖∂_x u‖² + μ/(2α+2) ‖u‖_{2α+2}^{2α+2}`.
pub fn energy(u: &RealField, params: &ModelParams) -> Result<f64> {
    let d = spatial_derivative(&forward_transform(u)?, 1)?;
    let p = 2.0 * params.alpha + 2.0;
    let potential: f64 = u.samples().iter().map(|v| v.abs().powf(p)).sum::<f64>() * u.grid().dx();
    Ok(0.5 * d.l2_norm().powi(2) + params.mu / p * potential)
}

/// Hölder conjugate `r' = r/(r-1)`.
pub fn conjugate_exponent(r: f64) -> f64 {
    if r == 1.0 {
        f64::INFINITY
    } else if r.is_infinite() {
        1.0
    } else {
        r / (r - 1.0)
    }
}

/// `‖û‖_{L^{r'}(dξ)}`.
pub fn fourier_lebesgue(u: &RealField, r: f64) -> Result<f64> {
    check_exponent(r)?;
    let spec = forward_transform(u)?;
    let moduli: Vec<f64> = spec.coeffs().iter().map(|c| c.norm()).collect();
    Ok(lebesgue_slice(&moduli, u.grid().dxi(), conjugate_exponent(r)))
}

/// `L^p_x L^q_t` with `p` outer, optionally after applying `|D_x|^s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixedNormSpec {
    pub p_outer_x: f64,
    pub q_inner_t: f64,
    pub s: Option<f64>,
}

impl MixedNormSpec {
    pub fn new(p_outer_x: f64, q_inner_t: f64) -> Self {
        Self {
            p_outer_x,
            q_inner_t,
            s: None,
        }
    }

    pub fn with_derivative(mut self, s: f64) -> Self {
        self.s = Some(s);
        self
    }

    /// `L_x^{5α/2} L_t^{5α}`.
    pub fn s_norm(alpha: f64) -> Self {
        Self::new(2.5 * alpha, 5.0 * alpha)
    }

    /// `|D_x|^{3/4 - 1/(2α)}` in `L_x^{20α/(10-3α)} L_t^{10/3}`.
    pub fn x_norm(alpha: f64) -> Self {
        Self::new(20.0 * alpha / (10.0 - 3.0 * alpha), 10.0 / 3.0)
            .with_derivative(0.75 - 0.5 / alpha)
    }

    pub fn validate(&self) -> Result<()> {
        check_exponent(self.p_outer_x)?;
        check_exponent(self.q_inner_t)?;
        if let Some(s) = self.s {
            if !(s >= 0.0) {
                return Err(Error::UnsupportedFractionalOrder(s));
            }
        }
        Ok(())
    }
}

/// Streaming time quadrature at each grid point.
///
/// Slices are pushed in time order with their trapezoid weights; `finish`
/// applies the outer spatial norm.
pub struct TimeAccumulator {
    q: f64,
    dx: f64,
    acc: Vec<f64>,
}

impl TimeAccumulator {
    pub fn new(n: usize, dx: f64, q: f64) -> Self {
        Self {
            q,
            dx,
            acc: vec![0.0; n],
        }
    }

    pub fn push(&mut self, values: &[f64], weight: f64) {
        if self.q.is_infinite() {
            for (a, v) in self.acc.iter_mut().zip(values) {
                *a = a.max(v.abs());
            }
        } else if self.q == 2.0 {
            for (a, v) in self.acc.iter_mut().zip(values) {
                *a += weight * v * v;
            }
        } else {
            for (a, v) in self.acc.iter_mut().zip(values) {
                *a += weight * v.abs().powf(self.q);
            }
        }
    }

    pub fn finish(self, p: f64) -> f64 {
        let inner: Vec<f64> = if self.q.is_infinite() {
            self.acc
        } else {
            let e = 1.0 / self.q;
            self.acc.into_iter().map(|a| a.powf(e)).collect()
        };
        lebesgue_slice(&inner, self.dx, p)
    }
}

fn window_slices(traj: &Trajectory, interval: (f64, f64)) -> Result<std::ops::Range<usize>> {
    if !traj.is_uniform() {
        return Err(Error::NonuniformStride);
    }
    let range = traj.window(interval.0, interval.1);
    if range.len() < MIN_WINDOW_SLICES {
        return Err(Error::Resolution(format!(
            "{} stored slices in [{}, {}], need at least {MIN_WINDOW_SLICES}",
            range.len(),
            interval.0,
            interval.1
        )));
    }
    Ok(range)
}

/// Mixed norm of the trajectory over the stored slices inside `interval`.
pub fn mixed_norm(traj: &Trajectory, spec: &MixedNormSpec, interval: (f64, f64)) -> Result<f64> {
    spec.validate()?;
    let range = window_slices(traj, interval)?;
    let slices = &traj.slices[range];
    let times: Vec<f64> = slices.iter().map(|s| s.t).collect();
    let weights = crate::evolve::trapezoid_weights(&times);
    let mut acc = TimeAccumulator::new(traj.grid.n(), traj.grid.dx(), spec.q_inner_t);
    for (s, w) in slices.iter().zip(&weights) {
        match spec.s {
            Some(order) if order != 0.0 => {
                let d = inverse_transform(&fractional_derivative(&forward_transform(&s.u)?, order)?)?;
                acc.push(d.samples(), *w);
            }
            _ => acc.push(s.u.samples(), *w),
        }
    }
    Ok(acc.finish(spec.p_outer_x))
}

/// `‖u‖_{S(I)}`.
pub fn s_norm(traj: &Trajectory, interval: (f64, f64)) -> Result<f64> {
    mixed_norm(traj, &MixedNormSpec::s_norm(traj.params.alpha), interval)
}

/// `‖u‖_{X(I)}`.
pub fn x_norm(traj: &Trajectory, params: &ModelParams, interval: (f64, f64)) -> Result<f64> {
    mixed_norm(traj, &MixedNormSpec::x_norm(params.alpha), interval)
}

/// An admissible pair with its derivative index and data exponent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Admissible {
    pub p: f64,
    pub q: f64,
    pub s: f64,
    pub r: f64,
    /// `1/p = 1/4` or `1/q = 1/2 - 1/p`: endpoint pairs used directly in the
    /// linear estimates but outside the open region.
    pub boundary: bool,
}

fn recip(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        1.0 / x
    }
}

/// Admissibility of `(p, q)`: `0 ≤ 1/p < 1/4`, `0 ≤ 1/q < 1/2 − 1/p`, with
/// `1/r = 2/p + 1/q` and `s = −1/p + 2/q`. Endpoints are accepted and flagged.
/// Returns `None` for rejected pairs.
pub fn strichartz_admissible(p: f64, q: f64) -> Option<Admissible> {
    if !(p > 0.0 && q > 0.0) {
        return None;
    }
    let (ip, iq) = (recip(p), recip(q));
    const EPS: f64 = 1e-15;
    let ip_ok = ip < 0.25 - EPS;
    let ip_edge = (ip - 0.25).abs() <= EPS;
    let iq_ok = iq < 0.5 - ip - EPS;
    let iq_edge = (iq - (0.5 - ip)).abs() <= EPS;
    if !(ip_ok || ip_edge) || !(iq_ok || iq_edge) {
        return None;
    }
    let ir = 2.0 * ip + iq;
    Some(Admissible {
        p,
        q,
        s: -ip + 2.0 * iq,
        r: 1.0 / ir,
        boundary: ip_edge || iq_edge,
    })
}

/// `‖|D_x|^s V(t) f‖_{L^p_x L^q_t(I)} / max(‖f‖_{L̂^r}, ε)` with the time
/// integral sampled at `intervals + 1` uniform points of `I`.
pub fn strichartz_ratio(
    f: &RealField,
    pair: &Admissible,
    window: (f64, f64),
    intervals: usize,
) -> Result<f64> {
    let intervals = intervals.max(MIN_WINDOW_SLICES);
    let f_hat = forward_transform(f)?;
    let base = riesz_multiplier(&f_hat, pair.s);
    let h = (window.1 - window.0) / intervals as f64;
    let mut acc = TimeAccumulator::new(f.grid().n(), f.grid().dx(), pair.q);
    // step the phase by e^{ihξ³} instead of re-evaluating e^{itξ³} per slice;
    // the drift after a few hundred products stays at roundoff level
    let stepper = airy_propagate(&SpectralField::ones(*f.grid()), h);
    let mut current = airy_propagate(&base, window.0);
    for i in 0..=intervals {
        let w = if i == 0 || i == intervals { 0.5 * h } else { h };
        let slice = inverse_transform(&current)?;
        acc.push(slice.samples(), w);
        current.mul_assign_pointwise(&stepper);
    }
    let lhs = acc.finish(pair.p);
    let rhs = fourier_lebesgue(f, pair.r)?;
    Ok(lhs / rhs.max(RATIO_FLOOR))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrichartzSample {
    pub pair: Admissible,
    pub window: (f64, f64),
    pub ratios: Vec<f64>,
    pub max: f64,
    pub median: f64,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Ratios over an ensemble, computed in parallel; order follows the input.
pub fn strichartz_ratio_sample(
    ensemble: &[RealField],
    p: f64,
    q: f64,
    window: (f64, f64),
    intervals: usize,
) -> Result<StrichartzSample> {
    let pair = strichartz_admissible(p, q)
        .ok_or_else(|| Error::Domain(format!("(p, q) = ({p}, {q}) is not admissible")))?;
    let ratios = ensemble
        .par_iter()
        .map(|f| strichartz_ratio(f, &pair, window, intervals))
        .collect::<Result<Vec<_>>>()?;
    let max = ratios.iter().copied().fold(0.0, f64::max);
    Ok(StrichartzSample {
        pair,
        window,
        median: median(&ratios),
        max,
        ratios,
    })
}

/// `‖u‖_{L^p} / (|t|^{−1/3+2/(3p)} ‖u‖_{L²}^{1/2+1/p} ‖Ju‖_{L²}^{1/2−1/p})`.
pub fn klainerman_sobolev_ratio(u: &RealField, ju: &RealField, t: f64, p: f64) -> Result<f64> {
    if t == 0.0 {
        return Err(Error::SingularTime);
    }
    if !(p >= 2.0) {
        return Err(Error::InvalidExponent(p));
    }
    let ip = recip(p);
    let lhs = lebesgue(u, p)?;
    let l2 = u.l2_norm();
    let rhs = t.abs().powf(-1.0 / 3.0 + 2.0 / 3.0 * ip)
        * l2.powf(0.5 + ip)
        * ju.l2_norm().powf(0.5 - ip);
    if p == 2.0 {
        // both sides are ‖u‖_{L²}
        return Ok(if l2 == 0.0 { 1.0 } else { lhs / rhs });
    }
    Ok(lhs / rhs.max(RATIO_FLOOR))
}

/// Time series of a scalar diagnostic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSeries {
    pub label: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl NormSeries {
    pub fn new(label: impl Into<String>, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidField(format!(
                "series has {} times and {} values",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidField("series times must increase".into()));
        }
        Ok(Self {
            label: label.into(),
            times,
            values,
        })
    }

    /// Evaluate `f` on every slice of a trajectory.
    pub fn from_trajectory(
        label: impl Into<String>,
        traj: &Trajectory,
        f: impl Fn(&crate::evolve::SimState) -> Result<f64>,
    ) -> Result<Self> {
        let values = traj.slices.iter().map(f).collect::<Result<Vec<_>>>()?;
        Self::new(label, traj.times(), values)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Least-squares fit of `log value = intercept + exponent·log t` over the
/// points with `t` in `window` and both `t` and the value positive.
pub fn decay_fit(series: &NormSeries, window: (f64, f64)) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = series
        .times
        .iter()
        .zip(&series.values)
        .filter(|(&t, &v)| t >= window.0 && t <= window.1 && t > 0.0 && v > 0.0)
        .map(|(&t, &v)| (t.ln(), v.ln()))
        .collect();
    let n = pts.len();
    if n < MIN_FIT_POINTS {
        return Err(Error::InsufficientPoints(n));
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientPoints(1));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(DecayFit {
        exponent: slope,
        intercept: my - slope * mx,
        r_squared,
        points: n,
    })
}
