//! Run configuration: a single JSON document, every default written out.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{StepperConfig, StoreStride, DEFAULT_CFL_SAFETY, DEFAULT_OVERSAMPLE};
use crate::field::RealField;
use crate::grid::GridSpec;
use crate::initial::{make_gaussian, make_soliton, make_wave_packet, EnsembleSpec};
use crate::model::ModelParams;
use crate::scattering::CriteriaThresholds;

/// Largest grid accepted from a config file.
pub const MAX_GRID_POINTS: usize = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    #[serde(rename = "L")]
    pub length: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n: 4096, length: 1024.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub mu: f64,
    pub alpha: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepperSettings {
    /// Fixed step; `None` uses the CFL proxy on the initial data.
    pub dt: Option<f64>,
    pub cfl_safety: f64,
    pub oversample: usize,
}

impl Default for StepperSettings {
    fn default() -> Self {
        Self {
            dt: None,
            cfl_safety: DEFAULT_CFL_SAFETY,
            oversample: DEFAULT_OVERSAMPLE,
        }
    }
}

/// Initial data descriptor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    Gaussian {
        amplitude: f64,
        #[serde(default)]
        center: f64,
        width: f64,
    },
    /// Gaussian envelope times `cos(k(x - center))`.
    Packet {
        amplitude: f64,
        #[serde(default)]
        center: f64,
        width: f64,
        wavenumber: f64,
    },
    /// Traveling wave of the focusing equation, scaled by `amplitude`.
    Soliton {
        speed: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Snapshot header written by `simulate`; resolved relative to the config.
    File { path: PathBuf },
}

fn one() -> f64 {
    1.0
}

impl Default for InitialData {
    fn default() -> Self {
        InitialData::Gaussian {
            amplitude: 0.3,
            center: 0.0,
            width: 2.0,
        }
    }
}

impl InitialData {
    /// Same family with the amplitude replaced. File data cannot be rescaled.
    pub fn with_amplitude(&self, a: f64) -> Result<Self> {
        let mut out = self.clone();
        match &mut out {
            InitialData::Gaussian { amplitude, .. }
            | InitialData::Packet { amplitude, .. }
            | InitialData::Soliton { amplitude, .. } => *amplitude = a,
            InitialData::File { .. } => {
                return Err(config_error("initial.kind", "file data has no amplitude to sweep"))
            }
        }
        Ok(out)
    }

    pub fn build(&self, grid: GridSpec, params: &ModelParams, base: &Path) -> Result<RealField> {
        match self {
            InitialData::Gaussian {
                amplitude,
                center,
                width,
            } => make_gaussian(grid, *amplitude, *center, *width),
            InitialData::Packet {
                amplitude,
                center,
                width,
                wavenumber,
            } => make_wave_packet(grid, *amplitude, *center, *width, *wavenumber),
            InitialData::Soliton { speed, amplitude } => {
                Ok(make_soliton(grid, *speed, params)?.scale(*amplitude))
            }
            InitialData::File { path } => {
                let path = if path.is_absolute() { path.clone() } else { base.join(path) };
                let (header, u) = crate::io::read_snapshot(&path)?;
                if header.n != grid.n() || header.length != grid.length() {
                    return Err(config_error(
                        "initial.path",
                        &format!(
                            "snapshot grid (n = {}, L = {}) differs from the config grid",
                            header.n, header.length
                        ),
                    ));
                }
                Ok(u)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsToggles {
    /// `‖Ju‖`, `‖v‖` and the `∂v = Pu + u` identity residual.
    pub vector_fields: bool,
    /// Centered-difference residuals of the evolution equations of `v`, `Ju`, `Pu`.
    pub equation_residuals: bool,
    /// Klainerman–Sobolev ratio at `p = ∞`.
    pub ks_ratio: bool,
}

impl Default for DiagnosticsToggles {
    fn default() -> Self {
        Self {
            vector_fields: true,
            equation_residuals: false,
            ks_ratio: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub grid: GridConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub stepper: StepperSettings,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_stride")]
    pub store_stride: StoreStride,
    #[serde(default)]
    pub initial: InitialData,
    #[serde(default)]
    pub diagnostics: DiagnosticsToggles,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub thresholds: CriteriaThresholds,
    /// Random ensembles used by verification suites.
    #[serde(default)]
    pub ensemble: EnsembleSpec,
    /// Run directory, relative to the output root.
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_horizon() -> f64 {
    10.0
}

fn default_stride() -> StoreStride {
    StoreStride::Auto
}

fn default_output() -> PathBuf {
    PathBuf::from("run")
}

fn config_error(path: &str, message: &str) -> Error {
    Error::Config {
        path: path.to_string(),
        message: message.to_string(),
    }
}

impl RunConfig {
    /// Config with every default and the given model.
    pub fn with_model(mu: f64, alpha: f64) -> Self {
        Self {
            grid: GridConfig::default(),
            model: ModelConfig { mu, alpha },
            stepper: StepperSettings::default(),
            horizon: default_horizon(),
            store_stride: default_stride(),
            initial: InitialData::default(),
            diagnostics: DiagnosticsToggles::default(),
            kappa: None,
            thresholds: CriteriaThresholds::default(),
            ensemble: EnsembleSpec::default(),
            output: default_output(),
        }
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid.n, self.grid.length).map_err(|e| config_error("grid", &e.to_string()))
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.model.mu, self.model.alpha)
            .map_err(|e| config_error("model", &e.to_string()))
    }

    /// Stepper for the given initial data.
    pub fn stepper_config(&self, u0: &RealField) -> Result<StepperConfig> {
        let params = self.params()?;
        let base = match self.stepper.dt {
            Some(dt) => StepperConfig {
                cfl_safety: self.stepper.cfl_safety,
                ..StepperConfig::new(dt)
            },
            None => StepperConfig::auto(u0, &params, self.stepper.cfl_safety),
        };
        let cfg = base.with_oversample(self.stepper.oversample);
        cfg.validate().map_err(|e| config_error("stepper", &e.to_string()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid_spec()?;
        if self.grid.n > MAX_GRID_POINTS {
            return Err(config_error("grid.n", &format!("n exceeds {MAX_GRID_POINTS}")));
        }
        self.params()?;
        if let Some(dt) = self.stepper.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(config_error("stepper.dt", "dt must be positive"));
            }
        }
        if !(self.stepper.cfl_safety > 0.0 && self.stepper.cfl_safety <= 1.0) {
            return Err(config_error("stepper.cfl_safety", "must lie in (0, 1]"));
        }
        if self.stepper.oversample < 1 {
            return Err(config_error("stepper.oversample", "must be >= 1"));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(config_error("horizon", "must be a finite value >= 0"));
        }
        if self.store_stride == StoreStride::Every(0) {
            return Err(config_error("store_stride", "stride must be >= 1"));
        }
        if let Some(k) = self.kappa {
            if !k.is_finite() {
                return Err(config_error("kappa", "must be finite"));
            }
        }
        let t = &self.thresholds;
        if !(t.theta >= 1.0 && t.decay_tolerance > 0.0 && t.growth_slope_fraction > 0.0 && t.fit_start >= 0.0) {
            return Err(config_error("thresholds", "theta >= 1 and positive tolerances required"));
        }
        match &self.initial {
            InitialData::Gaussian { amplitude, center, width }
            | InitialData::Packet {
                amplitude,
                center,
                width,
                ..
            } => {
                if !(amplitude.is_finite() && center.is_finite() && *width > 0.0 && width.is_finite()) {
                    return Err(config_error("initial", "amplitude and center finite, width positive"));
                }
            }
            InitialData::Soliton { speed, amplitude } => {
                if !(*speed > 0.0 && amplitude.is_finite()) {
                    return Err(config_error("initial.speed", "speed must be positive"));
                }
                if self.model.mu >= 0.0 {
                    return Err(config_error("initial.kind", "solitons need a focusing model (mu < 0)"));
                }
            }
            InitialData::File { .. } => {}
        }
        Ok(())
    }

    /// Non-fatal remarks about the configuration.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Ok(p) = self.params() {
            if !p.in_theory_range() {
                out.push(format!(
                    "alpha = {} lies outside 8/5 < alpha < 2, where the scattering criteria are stated",
                    p.alpha
                ));
            }
        }
        out
    }
}

/// Parse and validate a config document.
pub fn parse_config(document: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Config {
            path,
            message: e.into_inner().to_string(),
        }
    })?;
    cfg.validate()?;
    for w in cfg.warnings() {
        log::warn!("{w}");
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}
