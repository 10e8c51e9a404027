//! Persistence: `report.csv`, `manifest.json`, probe tables and `F2D1`
//! binary snapshots.
//!
//! `F2D1` layout, little-endian: the magic bytes `F2D1`, `u32 n`, `f64 L`,
//! then `n^2` complex values as `(re, im)` `f64` pairs in row-major order
//! (row index along `x1`).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde_json::json;

use crate::config::RunConfig;
use crate::error::{LabError, Result};
use crate::experiments::{ExperimentReport, ProbeRow, ReportRow, SelfTestReport};
use crate::grid::{make_grid, Field2D};

/// Header of `report.csv`, in column order.
pub const CSV_HEADER: &str = "lambda,eta,grid_n,box_length,dt,window,err_linf_l2,err_l4,defect_rel,low_term,high_term,dm_high_term,mass_drift_nls,mass_drift_dmnls,boundary_mass,runtime_sec";

const F2D_MAGIC: &[u8; 4] = b"F2D1";

fn format_err(path: &Path, reason: impl Into<String>) -> LabError {
    LabError::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Writes rows with shortest round-trip float formatting; absent values
/// become empty cells.
pub fn write_csv(rows: &[ReportRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(LabError::EmptyReport);
    }
    if rows.iter().flat_map(ReportRow::numbers).any(|v| !v.is_finite()) {
        return Err(LabError::NonFinite);
    }
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| LabError::io(path, e.into()))?;
    for row in rows {
        w.serialize(row).map_err(|e| LabError::io(path, e.into()))?;
    }
    w.flush().map_err(|e| LabError::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| LabError::io(path, e.into()))?;
    let header = r
        .headers()
        .map_err(|e| format_err(path, e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != CSV_HEADER {
        return Err(format_err(path, format!("unexpected header '{header}'")));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| format_err(path, e.to_string())))
        .collect()
}

pub fn write_probe_csv(rows: &[ProbeRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| LabError::io(path, e.into()))?;
    for row in rows {
        w.serialize(row).map_err(|e| LabError::io(path, e.into()))?;
    }
    w.flush().map_err(|e| LabError::io(path, e))
}

pub fn read_probe_csv(path: &Path) -> Result<Vec<ProbeRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| LabError::io(path, e.into()))?;
    r.deserialize()
        .map(|row| row.map_err(|e| format_err(path, e.to_string())))
        .collect()
}

pub fn write_f2d(field: &Field2D, path: &Path) -> Result<()> {
    let g = field.grid();
    let n = u32::try_from(g.n()).map_err(|_| LabError::InvalidArgument("grid too large".into()))?;
    let file = fs::File::create(path).map_err(|e| LabError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| LabError::io(path, e));
    put(F2D_MAGIC)?;
    put(&n.to_le_bytes())?;
    put(&g.box_length().to_le_bytes())?;
    for z in field.values() {
        put(&z.re.to_le_bytes())?;
        put(&z.im.to_le_bytes())?;
    }
    w.flush().map_err(|e| LabError::io(path, e))
}

pub fn read_f2d(path: &Path) -> Result<Field2D> {
    let bytes = fs::read(path).map_err(|e| LabError::io(path, e))?;
    if bytes.len() < 16 || &bytes[..4] != F2D_MAGIC {
        return Err(format_err(path, "missing F2D1 header"));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let l = f64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let expected = n
        .checked_mul(n)
        .and_then(|m| m.checked_mul(16))
        .and_then(|m| m.checked_add(16));
    if expected != Some(bytes.len()) {
        return Err(format_err(path, format!("length {} does not match n = {n}", bytes.len())));
    }
    let grid = make_grid(l, n).map_err(|e| format_err(path, e.to_string()))?;
    let values = bytes[16..]
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    Field2D::from_values(grid, values).map_err(|e| format_err(path, e.to_string()))
}

/// The manifest: configuration echo, seed, version and every derived
/// number that is not a CSV column. Contains nothing run-dependent beyond
/// the inputs, so equal inputs give equal manifests.
pub fn manifest(report: &ExperimentReport, cfg: &RunConfig) -> serde_json::Value {
    json!({
        "tool": env!("CARGO_PKG_NAME"),
        "code_version": env!("CARGO_PKG_VERSION"),
        "experiment": report.experiment.name(),
        "seed": cfg.seed,
        "config": cfg,
        "rows": report.rows.len(),
        "fitted_slopes": report.fitted_slopes,
        "checks": report.checks,
        "thresholds": report.thresholds,
        "flags": report.flags,
        "failures": report.failures,
        "snapshots": report.snapshots.iter().map(|(name, _)| format!("snapshots/{name}.f2d")).collect::<Vec<_>>(),
    })
}

fn write_json(value: &impl serde::Serialize, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| LabError::InvalidArgument(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| LabError::io(path, e))
}

/// Writes every artifact of `report` into `dir` and returns the paths.
pub fn write_report(report: &ExperimentReport, cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    if report.rows.is_empty() {
        return Err(LabError::EmptyReport);
    }
    fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    let mut written = Vec::new();

    let csv_path = dir.join("report.csv");
    write_csv(&report.rows, &csv_path)?;
    written.push(csv_path);

    let manifest_path = dir.join("manifest.json");
    write_json(&manifest(report, cfg), &manifest_path)?;
    written.push(manifest_path);

    if !report.probes.is_empty() {
        let p = dir.join("strichartz.csv");
        write_probe_csv(&report.probes, &p)?;
        written.push(p);
    }

    let timings = dir.join("timings.json");
    write_json(&json!({ "runtime_sec": report.runtimes }), &timings)?;
    written.push(timings);

    if !report.snapshots.is_empty() {
        let snap_dir = dir.join("snapshots");
        fs::create_dir_all(&snap_dir).map_err(|e| LabError::io(&snap_dir, e))?;
        for (name, field) in &report.snapshots {
            let p = snap_dir.join(format!("{name}.f2d"));
            write_f2d(field, &p)?;
            written.push(p);
        }
    }
    Ok(written)
}

pub fn write_selftest(report: &SelfTestReport, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    let p = dir.join("selftest.json");
    write_json(report, &p)?;
    Ok(p)
}
