//! Finite-horizon surrogates for the scattering criteria, the κ bootstrap
//! arithmetic, asymptotic states and amplitude sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{evolve, SimState, StepperConfig, StoreStride, Trajectory};
use crate::field::RealField;
use crate::model::ModelParams;
use crate::norms::{decay_fit, lebesgue, s_norm, DecayFit, NormSeries};
use crate::spectral::{airy_propagate, forward_transform, inverse_transform, multiply_by_x, spatial_derivative};
use crate::vector_fields::apply_j_local;

/// `α / (3(α−1)(2α+1))`; criterion (iii) needs `κ` above this.
pub fn kappa_threshold(alpha: f64) -> Result<f64> {
    if !(alpha > 1.0) {
        return Err(Error::Domain(format!(
            "kappa threshold needs alpha > 1, got {alpha}"
        )));
    }
    Ok(alpha / (3.0 * (alpha - 1.0) * (2.0 * alpha + 1.0)))
}

/// `2α / (3(2α+1))`, the decay rate of `‖u(t)‖_{L^{2(2α+1)}}` for scattering
/// solutions.
pub fn scattering_kappa(alpha: f64) -> f64 {
    2.0 * alpha / (3.0 * (2.0 * alpha + 1.0))
}

/// Default `κ`: midpoint of the threshold and [`scattering_kappa`] when that
/// interval is nonempty (`α > 3/2`).
///
/// For `1 < α ≤ 3/2` the interval is empty and `1.1 × threshold` is used; for
/// `α ≤ 1` there is no threshold and [`scattering_kappa`] is used.
pub fn default_kappa(alpha: f64) -> f64 {
    match kappa_threshold(alpha) {
        Ok(th) if alpha > 1.5 => 0.5 * (th + scattering_kappa(alpha)),
        Ok(th) => 1.1 * th,
        Err(_) => scattering_kappa(alpha),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaIteration {
    pub alpha: f64,
    pub kappa0: f64,
    /// `α / (3(2α+1))`.
    pub step_constant: f64,
    pub sequence: Vec<f64>,
    /// Index of the first iterate above `1/(2α+1)`.
    pub j0: usize,
    pub replacement_applied: bool,
}

impl KappaIteration {
    pub fn target(&self) -> f64 {
        1.0 / (2.0 * self.alpha + 1.0)
    }

    /// `ceil((1/(2α+1) − κ₀)/(κ₁ − κ₀)) + 2`.
    pub fn j0_bound(&self) -> usize {
        let k1 = self.alpha * self.kappa0 - self.step_constant;
        let gap = k1 - self.kappa0;
        ((self.target() - self.kappa0) / gap).ceil().max(0.0) as usize + 2
    }
}

const KAPPA_MAX_ITERATIONS: usize = 100_000;

/// Iterate `κ_{j+1} = ακ_j − α/(3(2α+1))` until `κ_j > 1/(2α+1)`.
///
/// An iterate landing exactly on `1/(2α+1)` is replaced by
/// `½(1/(2α+1) + (α+3)/(3α(2α+1)))` and the iteration continues from there.
pub fn kappa_iterate(alpha: f64, kappa0: f64) -> Result<KappaIteration> {
    let threshold = kappa_threshold(alpha)?;
    if !(kappa0 > threshold) {
        return Err(Error::NonConvergent { kappa0, threshold });
    }
    let step_constant = alpha / (3.0 * (2.0 * alpha + 1.0));
    let target = 1.0 / (2.0 * alpha + 1.0);
    let replacement = 0.5 * (target + (alpha + 3.0) / (3.0 * alpha * (2.0 * alpha + 1.0)));

    let mut replacement_applied = false;
    let mut current = kappa0;
    if current == target {
        current = replacement;
        replacement_applied = true;
    }
    let mut sequence = vec![current];
    while current <= target {
        if sequence.len() > KAPPA_MAX_ITERATIONS {
            return Err(Error::NonConvergent { kappa0, threshold });
        }
        current = alpha * current - step_constant;
        if current == target {
            current = replacement;
            replacement_applied = true;
        }
        sequence.push(current);
    }
    Ok(KappaIteration {
        alpha,
        kappa0,
        step_constant,
        j0: sequence.len() - 1,
        sequence,
        replacement_applied,
    })
}

/// Tunables of the finite-horizon verdicts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CriteriaThresholds {
    /// Allowed ratio between the running maximum over `[t₀, T]` and over
    /// `[t₀, T/2]`.
    pub theta: f64,
    /// Allowed deviation of the fitted `L^∞` decay exponent from `−1/3`.
    pub decay_tolerance: f64,
    /// Largest log-log slope of `⟨t⟩^κ ‖u‖_{L^{2(2α+1)}}` over the second half
    /// of the run, as a fraction of `κ`, still counted as bounded.
    pub growth_slope_fraction: f64,
    /// Start of the decay-fit window.
    pub fit_start: f64,
}

impl Default for CriteriaThresholds {
    fn default() -> Self {
        Self {
            theta: 1.5,
            decay_tolerance: 0.07,
            growth_slope_fraction: 0.5,
            fit_start: 5.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriteriaReport {
    /// `max_t (‖u‖² + ‖J(t)u‖²)^{1/2}`.
    pub sup_weighted: f64,
    /// The same quantity at the first slice.
    pub initial_weighted: f64,
    /// `max_t (‖u‖² + ‖x V(−t)u‖²)^{1/2}`, computed by conjugation.
    pub sup_weighted_conjugated: f64,
    pub s_norm_total: f64,
    pub s_norm_half: f64,
    pub kappa_used: f64,
    /// `max_t ⟨t⟩^κ ‖u‖_{L^{2(2α+1)}}`.
    pub sup_kappa_weighted: f64,
    /// Log-log slope of `⟨t⟩^κ ‖u‖_{L^{2(2α+1)}}` over the second half.
    pub kappa_growth_slope: Option<f64>,
    pub linf_decay: Option<DecayFit>,
    pub verdict_i: bool,
    pub verdict_ii: bool,
    pub verdict_iii: bool,
    pub thresholds: CriteriaThresholds,
    pub blowup_flag: bool,
    pub max_boundary_mass: f64,
    pub horizon: f64,
}

impl CriteriaReport {
    pub fn linf_decay_exponent(&self) -> Option<f64> {
        self.linf_decay.map(|f| f.exponent)
    }
}

fn japanese(t: f64) -> f64 {
    (1.0 + t * t).sqrt()
}

/// `max over [t₀, T] ≤ θ · max over [t₀, T/2]`.
fn bounded_growth(series: &NormSeries, theta: f64) -> bool {
    let (Some(&t0), Some(&t1)) = (series.times.first(), series.times.last()) else {
        return true;
    };
    let mid = 0.5 * (t0 + t1);
    let early = series
        .times
        .iter()
        .zip(&series.values)
        .filter(|(t, _)| **t <= mid)
        .map(|(_, v)| *v)
        .fold(0.0, f64::max);
    series.max() <= theta * early
}

fn log_slope(times: &[f64], values: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, v)| **v > 0.0)
        .map(|(t, v)| (japanese(*t).ln(), v.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `(‖u‖² + ‖x V(−t)u‖²)^{1/2}` by explicit conjugation.
pub fn weighted_conjugated(s: &SimState) -> Result<f64> {
    let back = inverse_transform(&airy_propagate(&forward_transform(&s.u)?, -s.t))?;
    Ok((s.u.l2_norm().powi(2) + multiply_by_x(&back).l2_norm().powi(2)).sqrt())
}

/// `(‖u‖² + ‖J(t)u‖²)^{1/2}`.
pub fn weighted_local(s: &SimState) -> Result<f64> {
    let ju = apply_j_local(&s.u, s.t)?;
    Ok((s.u.l2_norm().powi(2) + ju.l2_norm().powi(2)).sqrt())
}

/// Evaluate criteria (i)–(iii) on a stored trajectory.
pub fn evaluate_criteria(
    traj: &Trajectory,
    kappa: Option<f64>,
    thresholds: &CriteriaThresholds,
) -> Result<CriteriaReport> {
    let params = &traj.params;
    let kappa_used = kappa.unwrap_or_else(|| default_kappa(params.alpha));
    let horizon = traj.final_state().t;
    let max_boundary_mass = traj
        .slices
        .iter()
        .map(|s| s.boundary_mass_fraction)
        .fold(0.0, f64::max);

    let weighted = NormSeries::from_trajectory("weighted", traj, weighted_local)?;
    let conjugated = NormSeries::from_trajectory("weighted_conjugated", traj, weighted_conjugated)?;
    let p = params.decay_exponent_p();
    let kappa_weighted = NormSeries::from_trajectory("kappa_weighted", traj, |s| {
        Ok(japanese(s.t).powf(kappa_used) * lebesgue(&s.u, p)?)
    })?;
    let linf = NormSeries::from_trajectory("linf", traj, |s| lebesgue(&s.u, f64::INFINITY))?;

    let (s_norm_total, s_norm_half) = if traj.len() >= 2 * crate::norms::MIN_WINDOW_SLICES {
        (
            s_norm(traj, (0.0, horizon))?,
            s_norm(traj, (0.0, 0.5 * horizon))?,
        )
    } else {
        (f64::NAN, f64::NAN)
    };

    let mid = traj.window(0.5 * horizon, horizon);
    let kappa_growth_slope = log_slope(
        &kappa_weighted.times[mid.clone()],
        &kappa_weighted.values[mid],
    );

    let fit_window = (thresholds.fit_start.min(0.5 * horizon), horizon);
    let linf_decay = decay_fit(&linf, fit_window).ok();

    let trivial = linf.max() == 0.0;
    let blowup_flag = traj.is_blowup();

    let (verdict_i, verdict_ii, verdict_iii) = if blowup_flag {
        (false, false, false)
    } else if trivial {
        (true, true, true)
    } else {
        let decays = linf_decay
            .map(|f| (f.exponent + 1.0 / 3.0).abs() <= thresholds.decay_tolerance)
            .unwrap_or(false);
        let s_bounded = s_norm_total.is_finite() && s_norm_total <= thresholds.theta * s_norm_half;
        let v_ii = bounded_growth(&weighted, thresholds.theta);
        let slope_ok = kappa_growth_slope
            .map(|s| s <= thresholds.growth_slope_fraction * kappa_used)
            .unwrap_or(true);
        let v_iii = bounded_growth(&kappa_weighted, thresholds.theta) && slope_ok;
        (decays && s_bounded, v_ii, v_iii)
    };

    Ok(CriteriaReport {
        sup_weighted: weighted.max(),
        initial_weighted: weighted.values[0],
        sup_weighted_conjugated: conjugated.max(),
        s_norm_total,
        s_norm_half,
        kappa_used,
        sup_kappa_weighted: kappa_weighted.max(),
        kappa_growth_slope,
        linf_decay,
        verdict_i,
        verdict_ii,
        verdict_iii,
        thresholds: *thresholds,
        blowup_flag,
        max_boundary_mass,
        horizon,
    })
}

/// Profile `u₊ = V(−T)u(T)` and distances of `V(−t)u(t)` to it.
#[derive(Clone, Debug)]
pub struct AsymptoticState {
    pub u_plus: RealField,
    /// `‖V(−t)u(t) − u₊‖` in the `H¹ ∩ H^{0,1}` surrogate norm.
    pub convergence: NormSeries,
    /// `‖V(−t)u(t) − V(−t/2)u(t/2)‖` in the same norm, from the first slice
    /// at or after `t/2`. Tends to zero for scattering solutions.
    pub cauchy: NormSeries,
}

impl AsymptoticState {
    /// `d(T/10) / d(T/2)` for the convergence series `d`.
    pub fn last_decade_ratio(&self) -> f64 {
        let t_end = *self.convergence.times.last().unwrap_or(&0.0);
        let at = |t: f64| -> f64 {
            let idx = self
                .convergence
                .times
                .iter()
                .position(|&s| s >= t - 1e-12)
                .unwrap_or(0);
            self.convergence.values[idx]
        };
        at(0.1 * t_end) / at(0.5 * t_end).max(f64::MIN_POSITIVE)
    }
}

/// `(‖f‖² + ‖∂_x f‖² + ‖x f‖²)^{1/2}`.
pub fn surrogate_norm(f: &RealField) -> Result<f64> {
    let spec = forward_transform(f)?;
    let d = spatial_derivative(&spec, 1)?;
    Ok((spec.l2_norm().powi(2) + d.l2_norm().powi(2) + multiply_by_x(f).l2_norm().powi(2)).sqrt())
}

pub fn extract_asymptotic_state(traj: &Trajectory) -> Result<AsymptoticState> {
    if let Some(info) = &traj.blowup {
        return Err(Error::Domain(format!(
            "trajectory blew up at t = {}; no asymptotic state",
            info.t
        )));
    }
    let pulled: Vec<RealField> = traj
        .slices
        .par_iter()
        .map(|s| inverse_transform(&airy_propagate(&forward_transform(&s.u)?, -s.t)))
        .collect::<Result<_>>()?;
    let u_plus = pulled.last().expect("nonempty trajectory").clone();
    let values = pulled
        .par_iter()
        .map(|w| surrogate_norm(&w.sub(&u_plus)))
        .collect::<Result<Vec<_>>>()?;
    let times = traj.times();
    let cauchy_values = (0..pulled.len())
        .into_par_iter()
        .map(|k| {
            let half = 0.5 * times[k];
            let m = times.iter().position(|&s| s >= half - 1e-12).unwrap_or(0);
            surrogate_norm(&pulled[k].sub(&pulled[m]))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AsymptoticState {
        u_plus,
        convergence: NormSeries::new("asymptotic_distance", times.clone(), values)?,
        cauchy: NormSeries::new("cauchy_increment", times, cauchy_values)?,
    })
}

/// Integration settings shared by every member of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub horizon: f64,
    pub cfl_safety: f64,
    pub oversample: usize,
    /// Fixed step; `None` picks the CFL step for each amplitude.
    pub dt: Option<f64>,
    pub store_stride: StoreStride,
    pub kappa: Option<f64>,
    pub thresholds: CriteriaThresholds,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub amplitude: f64,
    pub report: CriteriaReport,
}

/// One run per amplitude, in parallel; rows come back in input order.
pub fn amplitude_sweep(
    family: impl Fn(f64) -> Result<RealField> + Sync,
    amplitudes: &[f64],
    params: &ModelParams,
    settings: &SweepSettings,
) -> Result<Vec<SweepRow>> {
    if amplitudes.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParams("sweep amplitudes must increase".into()));
    }
    amplitudes
        .par_iter()
        .map(|&amplitude| {
            let u0 = family(amplitude)?;
            let mut cfg = StepperConfig::auto(&u0, params, settings.cfl_safety)
                .with_oversample(settings.oversample);
            if let Some(dt) = settings.dt {
                cfg.dt = dt;
            }
            let traj = evolve(&u0, params, &cfg, settings.horizon, settings.store_stride)?;
            let report = evaluate_criteria(&traj, settings.kappa, &settings.thresholds)?;
            Ok(SweepRow { amplitude, report })
        })
        .collect()
}

/// First adjacent pair of rows whose verdicts or blow-up flags differ.
pub fn verdict_flip(rows: &[SweepRow]) -> Option<(f64, f64)> {
    let key = |r: &SweepRow| {
        (
            r.report.verdict_i,
            r.report.verdict_ii,
            r.report.verdict_iii,
            r.report.blowup_flag,
        )
    };
    rows.windows(2)
        .find(|w| key(&w[0]) != key(&w[1]))
        .map(|w| (w[0].amplitude, w[1].amplitude))
}
