//! Text file formats: mission files, plan files, validation reports and CSV
//! exports.

mod export;
mod mission;
mod plan_file;

pub use export::{ellipsoid_axes, export_ellipsoids, export_fov, export_mesh, export_trajectory, ELLIPSOID_PROB};
pub use mission::{spec_hash, MeshSource, MissionConfig, ObstacleDef, SolverSettings};
pub use plan_file::{configured, Overrides, PlanFile, PlanHeader, StepRecord, WaypointRecord};

use std::path::Path;

use crate::error::{Error, Result};

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `key = value` lines with comments (`#`) and blank lines dropped.
pub(crate) fn key_values(path: &Path, text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::parse(path, i + 1, format!("expected `key = value`, got {line:?}")));
        };
        out.push((i + 1, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub(crate) fn parse_f64(path: &Path, line: usize, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::parse(path, line, format!("bad number {s:?}")))
}

pub(crate) fn parse_list(path: &Path, line: usize, s: &str) -> Result<Vec<f64>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|x| parse_f64(path, line, x)).collect()
}

pub(crate) fn parse_fixed<const N: usize>(path: &Path, line: usize, s: &str) -> Result<[f64; N]> {
    let v = parse_list(path, line, s)?;
    v.try_into()
        .map_err(|v: Vec<f64>| Error::parse(path, line, format!("expected {N} values, got {}", v.len())))
}

pub(crate) fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}
