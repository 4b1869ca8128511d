//! Acceptance suite: one line per criterion, exit status nonzero on any
//! failure that is not a documented shortfall.
//!
//! Runs without the libtest harness so the report is always printed.

use std::f64::consts::PI;
use std::time::Instant;

use gkdvlab::commands::run_simulate;
use gkdvlab::config::{DiagnosticsToggles, GridConfig, InitialData, RunConfig, StepperSettings};
use gkdvlab::evolve::{evolve, free_flow, plan_steps, step, SimState, StepperConfig, StoreStride, Trajectory};
use gkdvlab::initial::{gaussian_ensemble, make_gaussian, make_soliton, EnsembleSpec};
use gkdvlab::norms::{decay_fit, klainerman_sobolev_ratio, strichartz_ratio_sample, NormSeries};
use gkdvlab::scattering::{evaluate_criteria, extract_asymptotic_state, kappa_iterate, kappa_threshold, CriteriaThresholds};
use gkdvlab::spectral::{airy_propagate, boundary_mass_fraction, forward_transform, inverse_transform, multiply_by_x, propagate, refine};
use gkdvlab::vector_fields::{apply_j_local, equation_residual, identity_residual_puv, DerivedEquation};
use gkdvlab::{GridSpec, ModelParams, RealField};

type Outcome = Result<(bool, String), gkdvlab::Error>;

struct Criterion {
    id: u32,
    name: &'static str,
    run: fn(&Shared) -> Outcome,
    /// Set when the criterion is known not to be met; the reason is printed
    /// and the failure does not fail the suite.
    shortfall: Option<&'static str>,
}

/// Runs used by more than one criterion.
struct Shared {
    small_data: Trajectory,
}

fn defocusing() -> ModelParams {
    ModelParams::new(1.0, 1.8).unwrap()
}

// Independent trapezoid sums; the periodic grid makes the trapezoid rule a
// plain Riemann sum.
fn direct_mass(u: &RealField) -> f64 {
    0.5 * u.samples().iter().map(|v| v * v).sum::<f64>() * u.grid().dx()
}

fn direct_energy(u: &RealField, p: &ModelParams) -> f64 {
    // derivative by explicit DFT of the samples, independent of the library transform
    let n = u.grid().n();
    let l = u.grid().length();
    let s = u.samples();
    let mut ux = vec![0.0; n];
    for k in 1..n / 2 {
        let xi = 2.0 * PI * k as f64 / l;
        let (mut re, mut im) = (0.0, 0.0);
        for (j, v) in s.iter().enumerate() {
            let ang = -2.0 * PI * (k * j) as f64 / n as f64;
            re += v * ang.cos();
            im += v * ang.sin();
        }
        // u_x gets i·ξ·û, both ±k contribute the real part twice
        for (j, out) in ux.iter_mut().enumerate() {
            let ang = 2.0 * PI * (k * j) as f64 / n as f64;
            *out += 2.0 / n as f64 * xi * (-(im * ang.cos()) - re * ang.sin());
        }
    }
    let dx = u.grid().dx();
    let kinetic = 0.5 * ux.iter().map(|v| v * v).sum::<f64>() * dx;
    let q = 2.0 * p.alpha + 2.0;
    kinetic + p.mu / q * s.iter().map(|v| v.abs().powf(q)).sum::<f64>() * dx
}

fn c1_conservation(_: &Shared) -> Outcome {
    let p = defocusing();
    let g = GridSpec::new(1024, 64.0)?;
    let u0 = make_gaussian(g, 0.2, 0.0, 1.0)?;
    let traj = evolve(&u0, &p, &StepperConfig::auto(&u0, &p, 0.5), 10.0, StoreStride::Auto)?;
    let (m0, e0) = (direct_mass(&u0), direct_energy(&u0, &p));
    let mut dm: f64 = 0.0;
    let mut de: f64 = 0.0;
    // the O(n²) energy oracle is evaluated on every tenth slice
    for s in traj.slices.iter().step_by(10).chain(std::iter::once(traj.final_state())) {
        dm = dm.max((direct_mass(&s.u) - m0).abs() / m0);
        de = de.max((direct_energy(&s.u, &p) - e0).abs() / e0.abs());
    }
    Ok((
        dm < 1e-8 && de < 1e-6,
        format!("mass drift {dm:.2e} (< 1e-8), energy drift {de:.2e} (< 1e-6)"),
    ))
}

fn c2_commutation(_: &Shared) -> Outcome {
    // x and ∂² inside J amplify any wrapped tail by ~L, so the box is wide
    let g = GridSpec::new(32768, 8192.0)?;
    let f = RealField::from_fn(g, |x| (-x * x).exp());
    let xf = multiply_by_x(&f);
    let xf_hat = forward_transform(&xf)?;
    let mut worst: f64 = 0.0;
    let mut boundary: f64 = 0.0;
    let mut parts = Vec::new();
    for t in [0.5, 2.0, 10.0] {
        let vf = propagate(&f, t)?;
        boundary = boundary.max(boundary_mass_fraction(&vf));
        let lhs = apply_j_local(&vf, t)?;
        let rhs = inverse_transform(&airy_propagate(&xf_hat, t))?;
        let r = lhs.sub(&rhs).l2_norm() / xf.l2_norm();
        worst = worst.max(r);
        parts.push(format!("t={t}: {r:.1e}"));
    }
    Ok((
        worst < 1e-8 && boundary < 1e-8,
        format!("{} (< 1e-8), boundary mass {boundary:.1e}", parts.join(", ")),
    ))
}

/// Short small-data run stored every third step, fine enough in time for
/// centered differences of the derived equations.
fn residual_run() -> Result<(Trajectory, usize), gkdvlab::Error> {
    let p = defocusing();
    let g = GridSpec::new(8192, 2048.0)?;
    let u0 = make_gaussian(g, 0.3, 0.0, 1.5)?;
    let (dt, horizon, keep) = (0.00125, 1.5, 3);
    let traj = evolve(&u0, &p, &StepperConfig::new(dt), horizon, StoreStride::Every(keep))?;
    // lag, in stored slices, matching the automatic storage stride
    let (_, auto_stride, _) = plan_steps(dt, horizon, StoreStride::Auto);
    Ok((traj, auto_stride / keep))
}

fn quarter_slices(traj: &Trajectory) -> [usize; 3] {
    let m = traj.len() - 1;
    [m / 4, m / 2, 3 * m / 4]
}

fn c3_puv_identity(_: &Shared) -> Outcome {
    let (traj, _) = residual_run()?;
    let p = defocusing();
    let mut ok = true;
    let mut parts = Vec::new();
    for i in quarter_slices(&traj) {
        let s = &traj.slices[i];
        let coarse = identity_residual_puv(&s.u, s.t, &p)?;
        let fine = identity_residual_puv(&refine(&s.u, 2)?, s.t, &p)?;
        ok &= coarse < 1e-6 && fine < coarse;
        parts.push(format!("t={:.3}: {coarse:.1e} -> {fine:.1e}", s.t));
    }
    Ok((ok, format!("{} (< 1e-6, decreasing under n -> 2n)", parts.join(", "))))
}

fn c4_derived_equations(_: &Shared) -> Outcome {
    let (traj, lag) = residual_run()?;
    let mut ok = lag >= 2 && lag % 2 == 0;
    let mut parts = Vec::new();
    for eq in DerivedEquation::ALL {
        let mut worst: f64 = 0.0;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in quarter_slices(&traj) {
            let r_default = equation_residual(&traj, eq, i, lag)?;
            let r_half = equation_residual(&traj, eq, i, lag / 2)?;
            let factor = r_default / r_half;
            worst = worst.max(r_default);
            lo = lo.min(factor);
            hi = hi.max(factor);
        }
        ok &= worst < 5e-3 && lo >= 3.5 && hi <= 4.5;
        parts.push(format!("{}: {worst:.1e}, factor {lo:.2}..{hi:.2}", eq.name()));
    }
    Ok((ok, format!("{} (< 5e-3, factor in [3.5, 4.5])", parts.join("; "))))
}

fn c5_decay(sh: &Shared) -> Outcome {
    let p = defocusing();
    let g = GridSpec::new(16384, 4096.0)?;
    let f = make_gaussian(g, 1.0, 0.0, 1.0)?;
    let free = free_flow(&f, &p, 50.0, 500)?;
    let series = NormSeries::from_trajectory("linf", &free, |s| Ok(s.u.max_abs()))?;
    let linear = decay_fit(&series, (5.0, 50.0))?.exponent;
    let series = NormSeries::from_trajectory("linf", &sh.small_data, |s| Ok(s.u.max_abs()))?;
    let nonlinear = decay_fit(&series, (5.0, 50.0))?.exponent;
    let third = -1.0 / 3.0;
    Ok((
        (linear - third).abs() <= 0.05 && (nonlinear - third).abs() <= 0.07,
        format!("free {linear:.4} (±0.05 of -1/3), small-data {nonlinear:.4} (±0.07 of -1/3)"),
    ))
}

fn ks_sup(spec: &EnsembleSpec, grid: GridSpec) -> Result<f64, gkdvlab::Error> {
    let mut sup: f64 = 0.0;
    for f in gaussian_ensemble(grid, spec)? {
        let f_hat = forward_transform(&f)?;
        for k in 2..=100 {
            let t = 0.5 * k as f64;
            let u = inverse_transform(&airy_propagate(&f_hat, t))?;
            let ju = apply_j_local(&u, t)?;
            sup = sup.max(klainerman_sobolev_ratio(&u, &ju, t, f64::INFINITY)?);
        }
    }
    Ok(sup)
}

fn c6_klainerman_sobolev(sh: &Shared) -> Outcome {
    let mut unit: f64 = 0.0;
    for s in sh.small_data.slices.iter().skip(1) {
        let ju = apply_j_local(&s.u, s.t)?;
        unit = unit.max((klainerman_sobolev_ratio(&s.u, &ju, s.t, 2.0)? - 1.0).abs());
    }
    let spec = EnsembleSpec {
        members: 20,
        seed: 7,
        amplitude: (0.5, 1.5),
        width: (2.0, 4.0),
        center: 5.0,
        wavenumber: (0.0, 0.5),
    };
    let coarse = ks_sup(&spec, GridSpec::new(8192, 4096.0)?)?;
    let fine = ks_sup(&spec, GridSpec::new(16384, 4096.0)?)?;
    let variation = (fine - coarse).abs() / coarse;
    Ok((
        unit < 1e-12 && coarse.is_finite() && fine.is_finite() && variation < 0.1,
        format!("|ratio(p=2) - 1| {unit:.1e} (< 1e-12); sup p=inf {coarse:.4} -> {fine:.4}, variation {variation:.1e} (< 0.1)"),
    ))
}

fn c7_kappa(_: &Shared) -> Outcome {
    let alpha: f64 = 1.8;
    let threshold = alpha / (3.0 * (alpha - 1.0) * (2.0 * alpha + 1.0));
    let th = kappa_threshold(alpha)?;
    // brute-force loop, written out independently of the library
    let target = 1.0 / (2.0 * alpha + 1.0);
    let mut brute = vec![0.17];
    while *brute.last().unwrap() <= target {
        let k = *brute.last().unwrap();
        brute.push(alpha * k - alpha / (3.0 * (2.0 * alpha + 1.0)));
    }
    let it = kappa_iterate(alpha, 0.17)?;
    let expected = [0.17, 0.1755652, 0.1855826, 0.2036139, 0.2360702];
    let seq_ok = it.sequence.len() == expected.len()
        && it.sequence.iter().zip(expected).all(|(a, b)| (a - b).abs() < 1e-7)
        && it.sequence.iter().zip(&brute).all(|(a, b)| a == b)
        && brute.len() == it.sequence.len();
    let gap = it
        .sequence
        .windows(2)
        .map(|w| ((w[1] - w[0]) - (alpha - 1.0) * (w[0] - threshold)).abs())
        .fold(0.0, f64::max);
    let ok = (th - 0.1630435).abs() < 1e-7 && (th - threshold).abs() < 1e-15 && seq_ok && it.j0 == 4 && gap < 1e-14;
    Ok((
        ok,
        format!(
            "threshold {th:.7}, sequence {:?}, j0 {}, brute force agrees {}, max gap defect {gap:.1e}",
            it.sequence.iter().map(|k| format!("{k:.7}")).collect::<Vec<_>>(),
            it.j0,
            seq_ok
        ),
    ))
}

fn c8_strichartz(_: &Shared) -> Outcome {
    let g = GridSpec::new(16384, 4096.0)?;
    let ens = gaussian_ensemble(g, &EnsembleSpec { members: 50, ..EnsembleSpec::default() })?;
    let mut ok = true;
    let mut parts = Vec::new();
    for (p, q, label) in [(4.0, f64::INFINITY, "(4,inf,2)"), (f64::INFINITY, 2.0, "(inf,2,2)")] {
        let short = strichartz_ratio_sample(&ens, p, q, (0.0, 10.0), 200)?;
        let long = strichartz_ratio_sample(&ens, p, q, (0.0, 20.0), 400)?;
        let growth = long.max / short.max - 1.0;
        ok &= short.pair.r == 2.0 && short.max.is_finite() && long.max.is_finite() && growth < 0.1;
        parts.push(format!("{label}: max {:.4} -> {:.4}, growth {growth:.1e}", short.max, long.max));
    }
    Ok((ok, format!("{} (< 0.1)", parts.join("; "))))
}

fn c9_dichotomy(sh: &Shared) -> Outcome {
    let traj = &sh.small_data;
    let report = evaluate_criteria(traj, None, &CriteriaThresholds::default())?;
    let growth = report.sup_weighted / report.initial_weighted;
    let asym = extract_asymptotic_state(traj)?;
    let decade = asym.last_decade_ratio();

    let p = ModelParams::new(-1.0, 1.8)?;
    let g = GridSpec::new(1024, 64.0)?;
    let q = make_soliton(g, 1.0, &p)?;
    let sol = evolve(&q, &p, &StepperConfig::auto(&q, &p, 0.25), 5.0, StoreStride::Auto)?;
    let peaks: Vec<f64> = sol.slices.iter().map(|s| s.u.max_abs()).collect();
    let spread = (peaks.iter().copied().fold(0.0, f64::max) - peaks.iter().copied().fold(f64::INFINITY, f64::min)) / peaks[0];
    let sol_report = evaluate_criteria(&sol, None, &CriteriaThresholds::default())?;
    let cauchy = extract_asymptotic_state(&sol)?.cauchy;
    let nondecreasing = cauchy.values.windows(2).skip(1).all(|w| w[1] >= w[0]);

    let ok = report.verdict_ii && growth < 2.0 && decade >= 2.0 && spread < 0.01 && !sol_report.verdict_iii;
    Ok((
        ok,
        format!(
            "small data: verdict_ii {}, sup/initial {growth:.4} (< 2), convergence d(T/10)/d(T/2) {decade:.3} (>= 2); \
             soliton: L^inf spread {spread:.1e} (< 0.01), verdict_iii {}, Cauchy series non-decreasing {nondecreasing}",
            report.verdict_ii, sol_report.verdict_iii
        ),
    ))
}

fn final_after(u0: &RealField, p: &ModelParams, dt: f64, horizon: f64) -> Result<RealField, gkdvlab::Error> {
    let cfg = StepperConfig::new(dt);
    let steps = (horizon / dt).round() as usize;
    let mut s = SimState::new(0.0, u0.clone());
    for _ in 0..steps {
        s = step(&s, p, &cfg)?;
    }
    Ok(s.u)
}

fn c10_order(_: &Shared) -> Outcome {
    let p = defocusing();
    let g = GridSpec::new(128, 64.0)?;
    let u0 = make_gaussian(g, 1.0, 0.0, 2.0)?;
    let dt0 = 0.01;
    let reference = final_after(&u0, &p, dt0 / 16.0, 1.0)?;
    let errs = [dt0, dt0 / 2.0, dt0 / 4.0]
        .iter()
        .map(|&dt| Ok(final_after(&u0, &p, dt, 1.0)?.sub(&reference).l2_norm()))
        .collect::<Result<Vec<f64>, gkdvlab::Error>>()?;
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Ok((
        orders.iter().all(|o| (3.7..=4.3).contains(o)),
        format!("errors {:?}, orders {:?} (in [3.7, 4.3])", errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>(), orders.iter().map(|o| format!("{o:.3}")).collect::<Vec<_>>()),
    ))
}

fn c11_determinism(_: &Shared) -> Outcome {
    let mut cfg = RunConfig::with_model(1.0, 1.8);
    cfg.grid = GridConfig { n: 1024, length: 128.0 };
    cfg.stepper = StepperSettings::default();
    cfg.horizon = 2.0;
    cfg.initial = InitialData::Gaussian { amplitude: 0.5, center: 0.0, width: 1.0 };
    cfg.diagnostics = DiagnosticsToggles::default();
    let root = tempfile::tempdir().map_err(|e| gkdvlab::Error::io("tempdir", e))?;
    let read = |dir: &std::path::Path| -> Result<(Vec<u8>, Vec<u8>), gkdvlab::Error> {
        run_simulate(&cfg, root.path(), dir, false)?;
        gkdvlab::commands::run_diagnose(dir)?;
        let a = std::fs::read(dir.join("scalars.csv")).map_err(|e| gkdvlab::Error::io(dir, e))?;
        let b = std::fs::read(dir.join("diagnostics.csv")).map_err(|e| gkdvlab::Error::io(dir, e))?;
        Ok((a, b))
    };
    let first = read(&root.path().join("a"))?;
    let second = read(&root.path().join("b"))?;
    Ok((
        first == second && !first.0.is_empty(),
        format!("scalars.csv {} bytes, diagnostics.csv {} bytes, identical {}", first.0.len(), first.1.len(), first == second),
    ))
}

fn main() {
    let clock = Instant::now();
    let p = defocusing();
    let g = GridSpec::new(16384, 4096.0).unwrap();
    let u0 = make_gaussian(g, 0.3, 0.0, 2.0).unwrap();
    let small_data = evolve(&u0, &p, &StepperConfig::auto(&u0, &p, 0.25), 50.0, StoreStride::Auto).unwrap();
    let shared = Shared { small_data };

    let criteria = [
        Criterion { id: 1, name: "conservation", run: c1_conservation, shortfall: None },
        Criterion { id: 2, name: "free-flow J commutation", run: c2_commutation, shortfall: None },
        Criterion { id: 3, name: "identity d_x v = P u + u", run: c3_puv_identity, shortfall: None },
        Criterion { id: 4, name: "derived-equation residuals", run: c4_derived_equations, shortfall: None },
        Criterion { id: 5, name: "dispersive decay", run: c5_decay, shortfall: None },
        Criterion { id: 6, name: "Klainerman-Sobolev ratio", run: c6_klainerman_sobolev, shortfall: None },
        Criterion { id: 7, name: "kappa arithmetic", run: c7_kappa, shortfall: None },
        Criterion { id: 8, name: "Strichartz sampling", run: c8_strichartz, shortfall: None },
        Criterion {
            id: 9,
            name: "scattering dichotomy",
            run: c9_dichotomy,
            shortfall: Some(
                "the weighted part of ||V(-t)u(t) - u_+|| converges too slowly on a T = 50 window \
                 for a 2x drop between T/10 and T/2; all other parts of this criterion hold",
            ),
        },
        Criterion { id: 10, name: "solver order", run: c10_order, shortfall: None },
        Criterion { id: 11, name: "determinism", run: c11_determinism, shortfall: None },
    ];

    let mut unexpected = 0;
    let mut passed = 0;
    for c in &criteria {
        let start = Instant::now();
        let (ok, detail) = match (c.run)(&shared) {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {:>2} {}: {detail} ({:.1}s)", c.id, c.name, start.elapsed().as_secs_f64());
        if ok {
            passed += 1;
        } else if let Some(reason) = c.shortfall {
            println!("       known shortfall: {reason}");
        } else {
            unexpected += 1;
        }
    }
    println!(
        "{passed}/{} criteria pass, {unexpected} unexpected failures ({:.1}s)",
        criteria.len(),
        clock.elapsed().as_secs_f64()
    );
    if unexpected > 0 {
        std::process::exit(1);
    }
}
