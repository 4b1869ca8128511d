//! Run orchestration behind the command-line subcommands.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{InitialData, RunConfig};
use crate::error::{Error, Result};
use crate::evolve::{evolve, SimState, Trajectory};
use crate::io::{
    self, ensure_dir, format_cell, format_number, Column, DerivedValues, RunManifest, RunStatus, SliceRecord,
    CRITERIA_FILE, DIAGNOSTICS_FILE, MANIFEST_FILE, SCALARS_FILE, SLICE_DIR, SUMMARY_FILE, SWEEP_FILE,
};
use crate::model::ModelParams;
use crate::norms::{
    decay_fit, energy, klainerman_sobolev_ratio, lebesgue, mass, s_norm, sobolev_h1, x_norm, DecayFit, NormSeries,
    MIN_WINDOW_SLICES,
};
use crate::scattering::{amplitude_sweep, evaluate_criteria, verdict_flip, CriteriaReport, SweepRow, SweepSettings};
use crate::spectral::multiply_by_x;
use crate::vector_fields::{
    apply_j_local, compute_pu, compute_v, equation_residual, identity_residual_puv, DerivedEquation,
};

/// Environment variable naming the directory that relative run paths live under.
pub const OUTPUT_ROOT_ENV: &str = "GKDVLAB_OUTPUT_ROOT";
pub const DEFAULT_OUTPUT_ROOT: &str = "runs";

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT))
}

/// `path` itself when absolute, else joined onto the output root.
pub fn resolve_output(path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        output_root().join(path)
    }
}

#[derive(Clone, Debug)]
pub struct SimulateOutcome {
    pub dir: PathBuf,
    pub manifest: RunManifest,
}

impl SimulateOutcome {
    pub fn blew_up(&self) -> bool {
        matches!(self.manifest.status, RunStatus::BlowUp { .. })
    }
}

fn scalar_columns() -> Vec<Column> {
    vec![
        Column::new("t", "stored time"),
        Column::new("mass", "1/2 ||u||_2^2"),
        Column::new("energy", "1/2 ||u_x||_2^2 + mu/(2 alpha + 2) ||u||_{2 alpha + 2}^{2 alpha + 2}"),
        Column::new("linf", "max |u| over the grid"),
        Column::new("boundary_mass", "fraction of ||u||_2^2 in the outer 10% of the box on each side"),
    ]
}

fn scalar_row(s: &SimState, params: &ModelParams) -> Result<Vec<String>> {
    Ok(vec![
        format_number(s.t),
        format_number(mass(&s.u)?),
        format_number(energy(&s.u, params)?),
        format_number(s.u.max_abs()),
        format_number(s.boundary_mass_fraction),
    ])
}

/// Integrate a config and write a complete run directory.
///
/// `base` resolves relative `file` initial data. An existing run in `dir`
/// is only replaced when `force` is set.
pub fn run_simulate(cfg: &RunConfig, base: &Path, dir: &Path, force: bool) -> Result<SimulateOutcome> {
    cfg.validate()?;
    if dir.join(MANIFEST_FILE).exists() && !force {
        return Err(Error::Config {
            path: "output".into(),
            message: format!("{} already holds a run; pass --force to replace it", dir.display()),
        });
    }
    let mut cfg = cfg.clone();
    if let InitialData::File { path } = &cfg.initial {
        let abs = if path.is_absolute() { path.clone() } else { base.join(path) };
        cfg.initial = InitialData::File {
            path: abs.canonicalize().map_err(|e| Error::io(&abs, e))?,
        };
    }
    let grid = cfg.grid_spec()?;
    let params = cfg.params()?;
    let u0 = cfg.initial.build(grid, &params, base)?;
    let stepper = cfg.stepper_config(&u0)?;
    let derived = DerivedValues::compute(&cfg, &u0)?;

    let clock = Instant::now();
    let traj = evolve(&u0, &params, &stepper, cfg.horizon, cfg.store_stride)?;
    let elapsed = clock.elapsed().as_secs_f64();

    if dir.exists() && force {
        let slices = dir.join(SLICE_DIR);
        if slices.exists() {
            std::fs::remove_dir_all(&slices).map_err(|e| Error::io(&slices, e))?;
        }
    }
    let slice_dir = dir.join(SLICE_DIR);
    ensure_dir(&slice_dir)?;
    let records = traj
        .slices
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let stem = format!("slice_{i:06}");
            io::write_snapshot(&slice_dir, &stem, s, &params)?;
            Ok(SliceRecord {
                t: s.t,
                header: format!("{SLICE_DIR}/{stem}.json"),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let rows = traj
        .slices
        .par_iter()
        .map(|s| scalar_row(s, &params))
        .collect::<Result<Vec<_>>>()?;
    io::write_table(&dir.join(SCALARS_FILE), &scalar_columns(), &rows)?;

    let status = match &traj.blowup {
        None => RunStatus::Completed,
        Some(b) => RunStatus::BlowUp {
            t: b.t,
            reason: b.reason.clone(),
        },
    };
    let manifest = RunManifest {
        tool_version: io::TOOL_VERSION.into(),
        config: cfg,
        derived,
        status,
        wall_clock_seconds: elapsed,
        slices: records,
    };
    io::write_manifest(dir, &manifest)?;
    Ok(SimulateOutcome {
        dir: dir.to_path_buf(),
        manifest,
    })
}

/// Norms of a whole run, written to `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// Mixed norms use the stored slices only; the window is `[0, T]`.
    pub window: (f64, f64),
    pub s_norm: Option<f64>,
    pub x_norm: Option<f64>,
    pub linf_decay: Option<DecayFit>,
    pub relative_mass_drift: f64,
    pub relative_energy_drift: f64,
    pub max_boundary_mass: f64,
    pub max_puv_residual: Option<f64>,
    pub max_equation_residual: Option<f64>,
    pub blowup: bool,
}

fn diagnostic_columns(cfg: &RunConfig) -> Vec<Column> {
    let mut cols = vec![
        Column::new("t", "stored time"),
        Column::new("mass", "1/2 ||u||_2^2"),
        Column::new("energy", "1/2 ||u_x||_2^2 + mu/(2 alpha + 2) ||u||_{2 alpha + 2}^{2 alpha + 2}"),
        Column::new("l2", "||u||_2"),
        Column::new("linf", "||u||_inf"),
        Column::new("h1", "(||u||_2^2 + ||u_x||_2^2)^(1/2)"),
        Column::new("lp_criterion", "||u||_p with p = 2(2 alpha + 1)"),
        Column::new("x_weighted", "||x u||_2"),
        Column::new("boundary_mass", "fraction of ||u||_2^2 in the outer 10% of the box on each side"),
    ];
    if cfg.diagnostics.vector_fields {
        cols.extend([
            Column::new("ju_l2", "||J u||_2 with J = x - 3t d_x^2"),
            Column::new("v_l2", "||v||_2 with v = J u + 3 mu t |u|^(2 alpha) u"),
            Column::new("pu_l2", "||P u||_2 with P u = x u_x + 3t u_t"),
            Column::new("puv_residual", "||d_x v - P u - u||_2 / ||P u||_2"),
        ]);
    }
    if cfg.diagnostics.ks_ratio {
        cols.push(Column::new(
            "ks_ratio_inf",
            "||u||_inf / (|t|^(-1/3) ||u||_2^(1/2) ||J u||_2^(1/2)); empty at t = 0",
        ));
    }
    if cfg.diagnostics.equation_residuals {
        cols.extend([
            Column::new("v_eq_residual", "relative residual of the v equation; empty at the first and last slice"),
            Column::new("ju_eq_residual", "relative residual of the J u equation; empty at the first and last slice"),
            Column::new("pu_eq_residual", "relative residual of the P u equation; empty at the first and last slice"),
        ]);
    }
    cols
}

struct DiagnosticRow {
    cells: Vec<String>,
    puv: Option<f64>,
    eq_max: Option<f64>,
}

fn diagnostic_row(traj: &Trajectory, cfg: &RunConfig, i: usize) -> Result<DiagnosticRow> {
    let s = &traj.slices[i];
    let p = &traj.params;
    let mut cells = vec![
        format_number(s.t),
        format_number(mass(&s.u)?),
        format_number(energy(&s.u, p)?),
        format_number(s.u.l2_norm()),
        format_number(s.u.max_abs()),
        format_number(sobolev_h1(&s.u)?),
        format_number(lebesgue(&s.u, p.decay_exponent_p())?),
        format_number(multiply_by_x(&s.u).l2_norm()),
        format_number(s.boundary_mass_fraction),
    ];
    let (mut puv, mut eq_max) = (None, None);
    if cfg.diagnostics.vector_fields || cfg.diagnostics.ks_ratio {
        let ju = apply_j_local(&s.u, s.t)?;
        if cfg.diagnostics.vector_fields {
            let r = identity_residual_puv(&s.u, s.t, p)?;
            cells.extend([
                format_number(ju.l2_norm()),
                format_number(compute_v(&s.u, s.t, p)?.l2_norm()),
                format_number(compute_pu(&s.u, s.t, p)?.l2_norm()),
                format_number(r),
            ]);
            puv = Some(r);
        }
        if cfg.diagnostics.ks_ratio {
            let ks = (s.t != 0.0)
                .then(|| klainerman_sobolev_ratio(&s.u, &ju, s.t, f64::INFINITY))
                .transpose()?;
            cells.push(format_cell(ks));
        }
    }
    if cfg.diagnostics.equation_residuals {
        let interior = i > 0 && i + 1 < traj.len() && traj.is_uniform();
        let r = DerivedEquation::ALL
            .iter()
            .map(|&e| interior.then(|| equation_residual(traj, e, i, 1)).transpose())
            .collect::<Result<Vec<_>>>()?;
        cells.extend(r.iter().map(|v| format_cell(*v)));
        eq_max = r.iter().flatten().copied().reduce(f64::max);
    }
    Ok(DiagnosticRow { cells, puv, eq_max })
}

fn relative_drift(values: &[f64]) -> f64 {
    let v0 = values[0];
    let dev = values.iter().map(|v| (v - v0).abs()).fold(0.0, f64::max);
    dev / v0.abs().max(f64::MIN_POSITIVE)
}

/// Per-slice diagnostics and a run summary for an existing run directory.
pub fn run_diagnose(dir: &Path) -> Result<RunSummary> {
    let (manifest, traj) = io::load_trajectory(dir)?;
    let cfg = &manifest.config;
    let rows = (0..traj.len())
        .into_par_iter()
        .map(|i| diagnostic_row(&traj, cfg, i))
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<Vec<String>> = rows.iter().map(|r| r.cells.clone()).collect();
    io::write_table(&dir.join(DIAGNOSTICS_FILE), &diagnostic_columns(cfg), &cells)?;

    let horizon = traj.final_state().t;
    let masses = traj.slices.iter().map(|s| mass(&s.u)).collect::<Result<Vec<_>>>()?;
    let energies = traj
        .slices
        .iter()
        .map(|s| energy(&s.u, &traj.params))
        .collect::<Result<Vec<_>>>()?;
    let enough = traj.len() >= MIN_WINDOW_SLICES;
    let linf = NormSeries::from_trajectory("linf", &traj, |s| Ok(s.u.max_abs()))?;
    let summary = RunSummary {
        window: (0.0, horizon),
        s_norm: enough.then(|| s_norm(&traj, (0.0, horizon))).transpose()?,
        x_norm: enough.then(|| x_norm(&traj, &traj.params, (0.0, horizon))).transpose()?,
        linf_decay: decay_fit(&linf, (cfg.thresholds.fit_start.min(0.5 * horizon), horizon)).ok(),
        relative_mass_drift: relative_drift(&masses),
        relative_energy_drift: relative_drift(&energies),
        max_boundary_mass: traj.slices.iter().map(|s| s.boundary_mass_fraction).fold(0.0, f64::max),
        max_puv_residual: rows.iter().filter_map(|r| r.puv).reduce(f64::max),
        max_equation_residual: rows.iter().filter_map(|r| r.eq_max).reduce(f64::max),
        blowup: traj.is_blowup(),
    };
    io::write_json_file(&dir.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

/// Criteria report for a run directory; `kappa` overrides the config value.
pub fn run_criteria(dir: &Path, kappa: Option<f64>) -> Result<CriteriaReport> {
    let (manifest, traj) = io::load_trajectory(dir)?;
    if let Some(k) = kappa {
        if !k.is_finite() {
            return Err(Error::Config {
                path: "kappa".into(),
                message: format!("must be finite, got {k}"),
            });
        }
    }
    let kappa = kappa.or(manifest.config.kappa);
    let report = evaluate_criteria(&traj, kappa, &manifest.config.thresholds)?;
    io::write_json_file(&dir.join(CRITERIA_FILE), &report)?;
    Ok(report)
}

fn sweep_columns() -> Vec<Column> {
    vec![
        Column::new("amplitude", "initial-data amplitude"),
        Column::new("verdict_i", "1 if the decay and S-norm criterion holds on the run, else 0"),
        Column::new("verdict_ii", "1 if sup (||u||^2 + ||J u||^2)^(1/2) passes the growth test, else 0"),
        Column::new("verdict_iii", "1 if <t>^kappa ||u||_{2(2 alpha + 1)} passes the growth and slope tests, else 0"),
        Column::new("sup_weighted", "max over slices of (||u||^2 + ||J u||^2)^(1/2)"),
        Column::new("sup_kappa_weighted", "max over slices of <t>^kappa ||u||_{2(2 alpha + 1)}"),
        Column::new("s_norm", "S-norm over the stored window; empty when too few slices"),
        Column::new("linf_decay_exponent", "fitted exponent of ||u||_inf ~ t^e; empty when the fit fails"),
        Column::new("blowup", "1 if the run was flagged as blowing up, else 0"),
    ]
}

fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.into()
}

/// Sweep the amplitude of the config's initial data and write `sweep.csv`.
pub fn run_sweep(cfg: &RunConfig, amplitudes: &[f64], base: &Path, dir: &Path) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    if amplitudes.is_empty() {
        return Err(Error::Config {
            path: "amplitudes".into(),
            message: "at least one amplitude is required".into(),
        });
    }
    if amplitudes.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config {
            path: "amplitudes".into(),
            message: "amplitudes must be strictly increasing".into(),
        });
    }
    cfg.initial.with_amplitude(1.0)?;
    let grid = cfg.grid_spec()?;
    let params = cfg.params()?;
    let settings = SweepSettings {
        horizon: cfg.horizon,
        cfl_safety: cfg.stepper.cfl_safety,
        oversample: cfg.stepper.oversample,
        dt: cfg.stepper.dt,
        store_stride: cfg.store_stride,
        kappa: cfg.kappa,
        thresholds: cfg.thresholds,
    };
    let family = |a: f64| cfg.initial.with_amplitude(a)?.build(grid, &params, base);
    let rows = amplitude_sweep(family, amplitudes, &params, &settings)?;
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let rep = &r.report;
            vec![
                format_number(r.amplitude),
                flag(rep.verdict_i),
                flag(rep.verdict_ii),
                flag(rep.verdict_iii),
                format_number(rep.sup_weighted),
                format_number(rep.sup_kappa_weighted),
                format_cell(Some(rep.s_norm_total).filter(|v| v.is_finite())),
                format_cell(rep.linf_decay_exponent()),
                flag(rep.blowup_flag),
            ]
        })
        .collect();
    ensure_dir(dir)?;
    io::write_table(&dir.join(SWEEP_FILE), &sweep_columns(), &cells)?;
    if let Some((a, b)) = verdict_flip(&rows) {
        log::info!("verdicts change between amplitudes {a} and {b}");
    }
    Ok(rows)
}
