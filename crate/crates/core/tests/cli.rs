use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gkdvlab::commands::{run_criteria, run_diagnose, run_simulate, run_sweep};
use gkdvlab::io::{read_manifest, read_snapshot, read_table, write_manifest, MANIFEST_FILE, SCALARS_FILE, SWEEP_FILE};
use gkdvlab::{parse_config, Error};

const TINY: &str = r#"{
  "grid": { "n": 2048, "L": 512.0 },
  "model": { "mu": 1.0, "alpha": 1.8 },
  "horizon": 2.0,
  "initial": { "kind": "gaussian", "amplitude": 0.3, "width": 1.5 }
}"#;

fn bin(args: &[&str], root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gkdvlab"))
        .args(args)
        .env("GKDVLAB_OUTPUT_ROOT", root)
        .output()
        .expect("spawn gkdvlab")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.json");
    fs::write(&p, text).unwrap();
    p
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

#[test]
fn unknown_key_exits_with_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &TINY.replace("\"horizon\"", "\"horizn\""));
    let out = bin(&["simulate", "-c", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("horizn"));
}

#[test]
fn missing_config_exits_with_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin(&["simulate", "-c", "no/such/file.json"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_value_reports_path() {
    let err = parse_config(&TINY.replace("\"n\": 2048", "\"n\": 1")).unwrap_err();
    assert!(matches!(err, Error::Config { .. } | Error::InvalidGrid(_)), "{err}");
}

#[test]
fn simulate_diagnose_criteria_via_binary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), TINY);
    let cfg = cfg.to_str().unwrap();
    let out = bin(&["simulate", "-c", cfg, "-o", "tiny"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("tiny");
    assert!(dir.join(MANIFEST_FILE).exists());

    // a second run into the same directory needs --force
    let again = bin(&["simulate", "-c", cfg, "-o", "tiny"], tmp.path());
    assert_eq!(again.status.code(), Some(2));
    let forced = bin(&["simulate", "-c", cfg, "-o", "tiny", "--force"], tmp.path());
    assert_eq!(forced.status.code(), Some(0));

    let d = dir.to_str().unwrap();
    assert_eq!(bin(&["diagnose", d], tmp.path()).status.code(), Some(0));
    let crit = bin(&["criteria", d], tmp.path());
    assert_eq!(crit.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&crit.stdout).unwrap();
    assert!(report["verdict_i"].is_boolean());
}

#[test]
fn verify_kappa_and_unknown_suite() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(bin(&["verify", "kappa"], tmp.path()).status.code(), Some(0));
    assert_eq!(bin(&["verify", "everything"], tmp.path()).status.code(), Some(2));
}

#[test]
fn manifest_round_trip_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = parse_config(TINY).unwrap();
    let dir = tmp.path().join("run");
    run_simulate(&cfg, tmp.path(), &dir, false).unwrap();
    let before = fs::read(dir.join(MANIFEST_FILE)).unwrap();
    let m = read_manifest(&dir).unwrap();
    write_manifest(&dir, &m).unwrap();
    assert_eq!(before, fs::read(dir.join(MANIFEST_FILE)).unwrap());

    let (_, rows) = read_table(&dir.join(SCALARS_FILE)).unwrap();
    assert_eq!(rows.len(), m.slices.len());
}

#[test]
fn tampered_manifest_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = parse_config(TINY).unwrap();
    let dir = tmp.path().join("run");
    run_simulate(&cfg, tmp.path(), &dir, false).unwrap();
    let path = dir.join(MANIFEST_FILE);
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    v["derived"]["dx"] = serde_json::Value::String("0.5".into());
    fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    assert!(matches!(read_manifest(&dir), Err(Error::Integrity { .. })));
}

#[test]
fn truncated_snapshot_is_an_integrity_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = parse_config(TINY).unwrap();
    let dir = tmp.path().join("run");
    let outcome = run_simulate(&cfg, tmp.path(), &dir, false).unwrap();
    let header = dir.join(&outcome.manifest.slices[1].header);
    let (h, _) = read_snapshot(&header).unwrap();
    let bin = header.parent().unwrap().join(&h.samples);
    let bytes = fs::read(&bin).unwrap();
    fs::write(&bin, &bytes[..bytes.len() - 8]).unwrap();
    assert!(matches!(read_snapshot(&header), Err(Error::Integrity { .. })));
    assert!(run_diagnose(&dir).is_err());
}

#[test]
fn diagnose_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = parse_config(TINY).unwrap();
    let dir = tmp.path().join("run");
    run_simulate(&cfg, tmp.path(), &dir, false).unwrap();
    let a = run_diagnose(&dir).unwrap();
    let b = run_diagnose(&dir).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert!(a.max_puv_residual.unwrap() < 1e-2);
    assert!(a.max_boundary_mass < 1e-8);
}

#[test]
fn bundled_configs_parse() {
    for name in ["small_gaussian.json", "focusing_sweep.json"] {
        let text = fs::read_to_string(bundled(name)).unwrap();
        parse_config(&text).unwrap();
    }
}

#[test]
fn focusing_sweep_flips_verdicts() {
    let tmp = tempfile::tempdir().unwrap();
    let path = bundled("focusing_sweep.json");
    let cfg = parse_config(&fs::read_to_string(&path).unwrap()).unwrap();
    let dir = tmp.path().join("sweep");
    let rows = run_sweep(&cfg, &[0.5, 2.0], path.parent().unwrap(), &dir).unwrap();
    assert!(dir.join(SWEEP_FILE).exists());
    let (small, large) = (&rows[0].report, &rows[1].report);
    assert!(small.verdict_i && !large.verdict_i, "{small:?} {large:?}");
    assert!(small.verdict_iii && !large.verdict_iii, "{small:?} {large:?}");
}

#[test]
fn criteria_accepts_kappa_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = parse_config(TINY).unwrap();
    let dir = tmp.path().join("run");
    run_simulate(&cfg, tmp.path(), &dir, false).unwrap();
    let r = run_criteria(&dir, Some(0.19)).unwrap();
    assert_eq!(r.kappa_used, 0.19);
    assert!(matches!(run_criteria(&dir, Some(f64::NAN)), Err(Error::Config { .. })));
}
