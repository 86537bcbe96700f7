//! Deterministic file outputs. Floats are written with Rust's shortest
//! round-trip formatting so `ingest(write(x)) == x` bit-for-bit, and runs
//! with identical config + seed produce byte-identical files. Timings go
//! to stderr only, never into the manifest.

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use longmem_smc::forecast::ForecastResult;
use longmem_smc::sisr::FilterSnapshot;
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

pub fn ensure_out_dir(cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.out)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", cfg.out.display())))
}

fn open(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    let f = std::fs::File::create(path)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    Ok(std::io::BufWriter::new(f))
}

pub fn write_sim_csv(path: &Path, states: &[f64], returns: &[f64]) -> Result<()> {
    let mut w = open(path)?;
    writeln!(w, "t,return,state")?;
    for (i, (x, y)) in states.iter().zip(returns).enumerate() {
        writeln!(w, "{},{},{}", i + 1, y, x)?;
    }
    Ok(())
}

pub fn write_filter_csv(path: &Path, snapshots: &[FilterSnapshot], theta_dim: usize) -> Result<()> {
    let mut w = open(path)?;
    let mut header = String::from("t,state_mean,q02_5,q50,q97_5,ess");
    for c in 1..=theta_dim {
        header.push_str(&format!(",theta_bar_{c}"));
    }
    for c in 1..=theta_dim {
        header.push_str(&format!(",theta_var_{c}"));
    }
    writeln!(w, "{header}")?;
    for s in snapshots {
        let mut line = format!(
            "{},{},{},{},{},{}",
            s.t, s.state_mean, s.state_q025, s.state_q50, s.state_q975, s.ess
        );
        for v in &s.theta_bar {
            line.push_str(&format!(",{v}"));
        }
        for v in &s.theta_var {
            line.push_str(&format!(",{v}"));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn write_params_csv(path: &Path, snapshots: &[FilterSnapshot], theta_dim: usize) -> Result<()> {
    let mut w = open(path)?;
    let mut header = String::from("t");
    for c in 1..=theta_dim {
        header.push_str(&format!(",theta_bar_{c}"));
    }
    for c in 1..=theta_dim {
        header.push_str(&format!(",theta_var_{c}"));
    }
    writeln!(w, "{header}")?;
    for s in snapshots {
        let mut line = format!("{}", s.t);
        for v in &s.theta_bar {
            line.push_str(&format!(",{v}"));
        }
        for v in &s.theta_var {
            line.push_str(&format!(",{v}"));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn write_forecast_csv(path: &Path, forecasts: &[ForecastResult]) -> Result<()> {
    let mut w = open(path)?;
    writeln!(w, "h,point,lo,hi,realized")?;
    for f in forecasts {
        let realized = f.realized.map(|v| v.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{},{},{}", f.horizon, f.point_forecast, f.lo, f.hi, realized)?;
    }
    Ok(())
}

pub fn write_resid_csv(path: &Path, residuals: &[f64]) -> Result<()> {
    let mut w = open(path)?;
    writeln!(w, "t,residual")?;
    for (i, r) in residuals.iter().enumerate() {
        writeln!(w, "{},{}", i + 1, r)?;
    }
    Ok(())
}

/// Manifest echoing the resolved configuration plus per-command results.
/// Contains no wall-clock data so repeated runs stay byte-identical.
#[derive(Serialize)]
pub struct Manifest<'a> {
    pub command: &'a str,
    pub version: &'a str,
    pub seed: u64,
    pub n_particles: usize,
    pub delta: f64,
    pub outputs: Vec<String>,
    pub config: &'a BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<EstimateSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<DiagnosticsSummary>,
}

#[derive(Serialize)]
pub struct EstimateSummary {
    pub d_hat: f64,
    pub std_error: f64,
    pub bandwidth: usize,
    pub n: usize,
    pub proxy: String,
}

#[derive(Serialize)]
pub struct DiagnosticsSummary {
    pub acf: Vec<f64>,
    pub ljung_box_stat: Option<f64>,
}

pub fn write_manifest(cfg: &RunConfig, manifest: &Manifest) -> Result<PathBuf> {
    let path = cfg.out.join("run.json");
    let json = serde_json::to_string_pretty(manifest)
        .map_err(|e| CliError::Io(format!("manifest serialization: {e}")))?;
    std::fs::write(&path, json + "\n")
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}
