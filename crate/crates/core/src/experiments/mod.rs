//! Experiment harness: the scaling study, WDC and landscape probes,
//! single-instance recovery and a quick self-test.
//!
//! Every entry point is deterministic for a fixed configuration; trials are
//! collected in grid order regardless of scheduling.

pub mod config;
pub mod probes;
pub mod recover;
pub mod scaling;
pub mod selftest;
pub mod stats;
pub mod svg;

pub use config::ExperimentConfig;
pub use probes::{run_landscape_probe, run_wdc_probe, LandscapeProbeConfig, WdcProbeConfig};
pub use recover::{run_recover, RecoverConfig};
pub use scaling::{run_scaling, ScalingOutput, ScalingRow};
pub use selftest::run_selftest;

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

/// Writes `rows` as CSV with a header row, optionally preceded by a comment line.
pub(crate) fn write_csv<T: Serialize>(
    path: &Path,
    comment: Option<&str>,
    rows: &[T],
) -> Result<()> {
    let mut buf = Vec::new();
    if let Some(c) = comment {
        writeln!(buf, "{c}")?;
    }
    let mut w = csv::Writer::from_writer(buf);
    for r in rows {
        w.serialize(r)?;
    }
    let buf = w.into_inner().map_err(|e| e.into_error())?;
    std::fs::write(path, buf)?;
    Ok(())
}
