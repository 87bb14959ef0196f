//! CSV tables and JSON run metadata.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

/// Version string written into every sidecar.
pub const VERSION: &str = concat!("t2ta-", env!("CARGO_PKG_VERSION"));

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// `results.csv` -> `results.<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    path.with_file_name(format!("{stem}.{suffix}"))
}

#[derive(Debug, Serialize)]
pub struct Sidecar<'a, C: Serialize> {
    pub version: &'static str,
    pub verb: &'a str,
    pub config: &'a C,
    pub wall_time_s: f64,
    pub rows: usize,
    pub failures: &'a [crate::Failure],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extra: Option<serde_json::Value>,
}

pub fn write_sidecar<C: Serialize>(
    path: &Path,
    verb: &str,
    config: &C,
    wall: Duration,
    rows: usize,
    failures: &[crate::Failure],
    extra: Option<serde_json::Value>,
) -> anyhow::Result<()> {
    let sidecar = Sidecar {
        version: VERSION,
        verb,
        config,
        wall_time_s: wall.as_secs_f64(),
        rows,
        failures,
        extra,
    };
    std::fs::write(path, serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}
