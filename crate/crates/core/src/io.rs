//! Run directories: manifest, binary snapshots and CSV tables.
//!
//! Layout of a run directory:
//!
//! ```text
//! manifest.json
//! slices/slice_000000.json   header
//! slices/slice_000000.bin    n little-endian f64 samples
//! scalars.csv                per-slice conserved quantities
//! diagnostics.csv            written by `diagnose`
//! summary.json               written by `diagnose`
//! criteria.json              written by `criteria`
//! ```
//!
//! Every CSV has a sibling `*.schema.json` describing its columns.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evolve::{plan_steps, BlowupInfo, SimState, Trajectory};
use crate::field::RealField;
use crate::grid::GridSpec;
use crate::model::ModelParams;
use crate::norms::MixedNormSpec;
use crate::scattering::kappa_threshold;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SLICE_DIR: &str = "slices";
pub const SCALARS_FILE: &str = "scalars.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CRITERIA_FILE: &str = "criteria.json";
pub const SWEEP_FILE: &str = "sweep.csv";
const LITTLE_ENDIAN: &str = "little";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotHeader {
    pub n: usize,
    #[serde(rename = "L")]
    pub length: f64,
    pub t: f64,
    pub model: ModelParams,
    pub endianness: String,
    /// Sample file name, relative to the header.
    pub samples: String,
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

fn to_pretty_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_bytes(path, to_pretty_json(value)?.as_bytes())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::integrity(path, e.to_string()))
}

/// Write `<dir>/<stem>.json` and `<dir>/<stem>.bin`; returns the header path.
pub fn write_snapshot(dir: &Path, stem: &str, state: &SimState, params: &ModelParams) -> Result<PathBuf> {
    let grid = state.u.grid();
    let bin_name = format!("{stem}.bin");
    let header = SnapshotHeader {
        n: grid.n(),
        length: grid.length(),
        t: state.t,
        model: *params,
        endianness: LITTLE_ENDIAN.into(),
        samples: bin_name.clone(),
    };
    let bytes: Vec<u8> = state.u.samples().iter().flat_map(|v| v.to_le_bytes()).collect();
    write_bytes(&dir.join(&bin_name), &bytes)?;
    let header_path = dir.join(format!("{stem}.json"));
    write_json(&header_path, &header)?;
    Ok(header_path)
}

pub fn read_snapshot(header_path: &Path) -> Result<(SnapshotHeader, RealField)> {
    let header: SnapshotHeader = read_json(header_path)?;
    if header.endianness != LITTLE_ENDIAN {
        return Err(Error::integrity(header_path, format!("unsupported endianness {:?}", header.endianness)));
    }
    let grid = GridSpec::new(header.n, header.length).map_err(|e| Error::integrity(header_path, e.to_string()))?;
    let bin = header_path.parent().unwrap_or(Path::new(".")).join(&header.samples);
    let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    if bytes.len() != 8 * header.n {
        return Err(Error::integrity(
            &bin,
            format!("expected {} bytes for n = {}, found {}", 8 * header.n, header.n, bytes.len()),
        ));
    }
    let samples: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let u = RealField::new(grid, samples).map_err(|e| Error::integrity(&bin, e.to_string()))?;
    Ok((header, u))
}

/// Values derived from the config, stored as shortest round-trip decimals.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivedValues {
    pub dx: String,
    pub dt: String,
    pub steps: usize,
    pub store_stride: usize,
    /// `α/(3(α−1)(2α+1))`, absent for `α ≤ 1`.
    pub kappa_threshold: Option<String>,
    /// S-norm `L_x^{5α/2} L_t^{5α}`.
    pub s_norm_p: String,
    pub s_norm_q: String,
    /// X-norm `|∂|^s L_x^p L_t^{10/3}`.
    pub x_norm_s: String,
    pub x_norm_p: String,
    pub x_norm_q: String,
}

fn dec(v: f64) -> String {
    format!("{v:?}")
}

impl DerivedValues {
    /// Recompute from a config and its initial data.
    pub fn compute(cfg: &RunConfig, u0: &RealField) -> Result<Self> {
        let grid = cfg.grid_spec()?;
        let alpha = cfg.model.alpha;
        let stepper = cfg.stepper_config(u0)?;
        let (steps, stride, dt) = if cfg.horizon > 0.0 {
            plan_steps(stepper.dt, cfg.horizon, cfg.store_stride)
        } else {
            (0, 1, stepper.dt)
        };
        let s = MixedNormSpec::s_norm(alpha);
        let x = MixedNormSpec::x_norm(alpha);
        Ok(Self {
            dx: dec(grid.dx()),
            dt: dec(dt),
            steps,
            store_stride: stride,
            kappa_threshold: kappa_threshold(alpha).ok().map(dec),
            s_norm_p: dec(s.p_outer_x),
            s_norm_q: dec(s.q_inner_t),
            x_norm_s: dec(x.s.unwrap_or(0.0)),
            x_norm_p: dec(x.p_outer_x),
            x_norm_q: dec(x.q_inner_t),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case", deny_unknown_fields)]
pub enum RunStatus {
    Completed,
    BlowUp { t: f64, reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceRecord {
    pub t: f64,
    /// Header path relative to the run directory.
    pub header: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: RunConfig,
    pub derived: DerivedValues,
    pub status: RunStatus,
    pub wall_clock_seconds: f64,
    pub slices: Vec<SliceRecord>,
}

impl RunManifest {
    pub fn to_json(&self) -> Result<String> {
        to_pretty_json(self)
    }

    pub fn blowup(&self) -> Option<BlowupInfo> {
        match &self.status {
            RunStatus::Completed => None,
            RunStatus::BlowUp { t, reason } => Some(BlowupInfo {
                t: *t,
                reason: reason.clone(),
            }),
        }
    }
}

pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    write_bytes(&dir.join(MANIFEST_FILE), manifest.to_json()?.as_bytes())
}

/// Read a manifest and check its derived values against a fresh computation.
pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let path = dir.join(MANIFEST_FILE);
    let manifest: RunManifest = read_json(&path)?;
    manifest
        .config
        .validate()
        .map_err(|e| Error::integrity(&path, format!("stored config is invalid: {e}")))?;
    let grid = manifest.config.grid_spec()?;
    let params = manifest.config.params()?;
    let u0 = manifest.config.initial.build(grid, &params, dir)?;
    let fresh = DerivedValues::compute(&manifest.config, &u0)?;
    if fresh != manifest.derived {
        return Err(Error::integrity(
            &path,
            format!("derived values do not match the config: stored {:?}, recomputed {:?}", manifest.derived, fresh),
        ));
    }
    Ok(manifest)
}

/// Load every stored slice of a run.
pub fn load_trajectory(dir: &Path) -> Result<(RunManifest, Trajectory)> {
    let manifest = read_manifest(dir)?;
    let grid = manifest.config.grid_spec()?;
    let params = manifest.config.params()?;
    let mut slices = Vec::with_capacity(manifest.slices.len());
    for rec in &manifest.slices {
        let path = dir.join(&rec.header);
        let (header, u) = read_snapshot(&path)?;
        if header.n != grid.n() || header.length != grid.length() || header.model != params {
            return Err(Error::integrity(&path, "snapshot header disagrees with the manifest"));
        }
        if header.t != rec.t {
            return Err(Error::integrity(
                &path,
                format!("snapshot time {} differs from manifest time {}", header.t, rec.t),
            ));
        }
        slices.push(SimState::new(header.t, u));
    }
    if slices.is_empty() {
        return Err(Error::integrity(dir.join(MANIFEST_FILE), "run has no slices"));
    }
    let dt: f64 = manifest
        .derived
        .dt
        .parse()
        .map_err(|_| Error::integrity(dir.join(MANIFEST_FILE), "unparsable dt"))?;
    let traj = Trajectory {
        params,
        grid,
        slices,
        store_stride: manifest.derived.store_stride,
        dt,
        blowup: manifest.blowup(),
    };
    Ok((manifest, traj))
}

/// One documented CSV column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub description: String,
}

impl Column {
    pub fn new(name: &str, description: &str) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub file: String,
    /// Numbers use 17 significant digits; an empty cell means "not computed".
    pub number_format: String,
    pub columns: Vec<Column>,
}

/// 17 significant digits, round-trip exact. Non-finite values are written
/// as `nan`, `inf` or `-inf`.
pub fn format_number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn format_cell(v: Option<f64>) -> String {
    v.map(format_number).unwrap_or_default()
}

pub fn schema_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("schema.json")
}

/// Write a CSV table and its schema file. Every row must have one cell per column.
pub fn write_table(path: &Path, columns: &[Column], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::integrity(path, format!("{other:?}")),
    })?;
    w.write_record(columns.iter().map(|c| c.name.as_str()))?;
    for row in rows {
        if row.len() != columns.len() {
            return Err(Error::integrity(path, format!("row has {} cells, expected {}", row.len(), columns.len())));
        }
        w.write_record(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    let schema = CsvSchema {
        file: path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
        number_format: "%.16e".into(),
        columns: columns.to_vec(),
    };
    write_json(&schema_path(path), &schema)
}

/// Header and rows of a CSV written by [`write_table`].
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::integrity(path, format!("{other:?}")),
    })?;
    let header = r.headers()?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(String::from).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
    Ok((header, rows))
}

pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_json(path, value)
}

pub fn read_json_file<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    read_json(path)
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridSpec::new(64, 8.0).unwrap();
        let u = RealField::from_fn(g, |x| (x * 1.3).sin() / 3.0);
        let p = ModelParams::new(1.0, 1.8).unwrap();
        let path = write_snapshot(dir.path(), "s", &SimState::new(0.1, u.clone()), &p).unwrap();
        let (h, v) = read_snapshot(&path).unwrap();
        assert_eq!(v, u);
        assert_eq!(h.t, 0.1);
    }

    #[test]
    fn truncated_snapshot_is_an_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridSpec::new(64, 8.0).unwrap();
        let p = ModelParams::new(1.0, 1.8).unwrap();
        let path = write_snapshot(dir.path(), "s", &SimState::new(0.0, RealField::zeros(g)), &p).unwrap();
        fs::write(dir.path().join("s.bin"), [0u8; 10]).unwrap();
        let err = read_snapshot(&path).unwrap_err();
        assert!(matches!(err, Error::Integrity { ref path, .. } if path.ends_with("s.bin")), "{err}");
        fs::remove_file(dir.path().join("s.bin")).unwrap();
        assert!(matches!(read_snapshot(&path).unwrap_err(), Error::Io { .. }));
    }

    #[test]
    fn number_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = format_number(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(format_number(f64::NAN), "nan");
        assert_eq!(format_cell(None), "");
    }

    #[test]
    fn table_and_schema() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let cols = [Column::new("a", "first"), Column::new("b", "second")];
        write_table(&path, &cols, &[vec!["1".into(), "".into()]]).unwrap();
        let (h, rows) = read_table(&path).unwrap();
        assert_eq!(h, ["a", "b"]);
        assert_eq!(rows, [["1", ""]]);
        let schema: CsvSchema = read_json(&schema_path(&path)).unwrap();
        assert_eq!(schema.columns, cols);
        assert!(write_table(&path, &cols, &[vec!["1".into()]]).is_err());
    }
}
