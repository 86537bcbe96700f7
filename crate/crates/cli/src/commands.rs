//! The five batch subcommands. Each reads the resolved config, runs the
//! library, and writes plot-ready CSV outputs plus a `run.json` manifest.

use crate::config::{ProxyKind, RunConfig};
use crate::error::{CliError, Result};
use crate::ingest::ingest;
use crate::output::{self, DiagnosticsSummary, EstimateSummary, Manifest};
use longmem_smc::forecast::{residual_diagnostics, rolling_forecast};
use longmem_smc::fracproc;
use longmem_smc::memest;
use longmem_smc::sisr;
use longmem_smc::ssm;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::time::Instant;

const VERSION: &str = env!("CARGO_PKG_VERSION");

fn manifest_base<'a>(cfg: &'a RunConfig, command: &'a str, outputs: Vec<String>) -> Manifest<'a> {
    Manifest {
        command,
        version: VERSION,
        seed: cfg.seed,
        n_particles: cfg.n_particles,
        delta: cfg.delta,
        outputs,
        config: &cfg.echo,
        estimate: None,
        diagnostics: None,
    }
}

fn load_returns(cfg: &RunConfig) -> Result<Vec<f64>> {
    let Some(path) = &cfg.data else {
        return Err(CliError::Config("this command needs 'data = <csv path>'".into()));
    };
    let ingested = ingest(path)?;
    eprintln!(
        "ingested {} returns from {} (column '{}')",
        ingested.returns.len(),
        path.display(),
        ingested.source_column
    );
    Ok(ingested.returns)
}

/// Simulates a latent path and matching observations; the `return` column
/// feeds straight back into `filter`/`forecast`/`diagnose`.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    let Some(len) = cfg.sim_len else {
        return Err(CliError::Config("simulate needs 'T = <length>'".into()));
    };
    if len == 0 {
        return Err(CliError::Config("T must be at least 1".into()));
    }
    let t0 = Instant::now();
    let spec = cfg.latent_spec()?;
    let model = cfg.model()?;
    let mut master = ChaCha12Rng::seed_from_u64(cfg.seed);
    let latent_seed = master.next_u64();
    let states = fracproc::simulate(&spec, len, latent_seed);
    let returns: Vec<f64> =
        states.iter().map(|&x| ssm::sample_observation(&model, x, &mut master)).collect();

    output::ensure_out_dir(cfg)?;
    output::write_sim_csv(&cfg.out.join("sim.csv"), &states, &returns)?;
    output::write_manifest(cfg, &manifest_base(cfg, "simulate", vec!["sim.csv".into()]))?;
    eprintln!("simulate: {len} rows -> {} in {:?}", cfg.out.join("sim.csv").display(), t0.elapsed());
    Ok(())
}

pub fn cmd_estimate_d(cfg: &RunConfig) -> Result<()> {
    let t0 = Instant::now();
    let returns = load_returns(cfg)?;
    if returns.len() < 64 {
        return Err(CliError::Config(format!(
            "estimate-d needs at least 64 observations, got {}",
            returns.len()
        )));
    }
    let (series, proxy_name) = match cfg.proxy {
        ProxyKind::LogSquared => (memest::volatility_proxy(&returns)?, "log-squared"),
        ProxyKind::None => (returns.clone(), "none"),
    };
    let est = memest::gph(&series, cfg.bandwidth_exponent)?;
    println!(
        "d_hat={} std_error={} bandwidth={} n={} proxy={proxy_name}",
        est.d_hat, est.std_error, est.bandwidth, est.n
    );

    output::ensure_out_dir(cfg)?;
    let mut manifest = manifest_base(cfg, "estimate-d", vec![]);
    manifest.estimate = Some(EstimateSummary {
        d_hat: est.d_hat,
        std_error: est.std_error,
        bandwidth: est.bandwidth,
        n: est.n,
        proxy: proxy_name.to_string(),
    });
    output::write_manifest(cfg, &manifest)?;
    eprintln!("estimate-d: n={} in {:?}", est.n, t0.elapsed());
    Ok(())
}

pub fn cmd_filter(cfg: &RunConfig) -> Result<()> {
    let t0 = Instant::now();
    let returns = load_returns(cfg)?;
    let model = cfg.model()?;
    let prior = cfg.prior()?;
    let settings = cfg.filter_settings()?;
    let (snapshots, _cloud) = sisr::run(
        &model,
        &prior,
        &returns,
        &settings,
        ChaCha12Rng::seed_from_u64(cfg.seed),
    )?;

    output::ensure_out_dir(cfg)?;
    let dim = model.theta_dim();
    output::write_filter_csv(&cfg.out.join("filter.csv"), &snapshots, dim)?;
    output::write_params_csv(&cfg.out.join("params.csv"), &snapshots, dim)?;
    output::write_manifest(
        cfg,
        &manifest_base(cfg, "filter", vec!["filter.csv".into(), "params.csv".into()]),
    )?;
    eprintln!("filter: T={} N={} in {:?}", returns.len(), cfg.n_particles, t0.elapsed());
    Ok(())
}

pub fn cmd_forecast(cfg: &RunConfig) -> Result<()> {
    let t0 = Instant::now();
    let returns = load_returns(cfg)?;
    let Some(split) = cfg.split else {
        return Err(CliError::Config("forecast needs 'split = <count>'".into()));
    };
    let Some(horizon) = cfg.horizon else {
        return Err(CliError::Config("forecast needs 'horizon = <count>'".into()));
    };
    let model = cfg.model()?;
    let prior = cfg.prior()?;
    let settings = cfg.filter_settings()?;
    let forecasts = rolling_forecast(
        &model,
        &prior,
        &returns,
        split,
        horizon,
        &settings,
        ChaCha12Rng::seed_from_u64(cfg.seed),
    )?;

    output::ensure_out_dir(cfg)?;
    output::write_forecast_csv(&cfg.out.join("forecast.csv"), &forecasts)?;
    output::write_manifest(cfg, &manifest_base(cfg, "forecast", vec!["forecast.csv".into()]))?;
    eprintln!("forecast: {horizon} steps from t={split} in {:?}", t0.elapsed());
    Ok(())
}

pub fn cmd_diagnose(cfg: &RunConfig) -> Result<()> {
    let t0 = Instant::now();
    let returns = load_returns(cfg)?;
    let model = cfg.model()?;
    let prior = cfg.prior()?;
    let settings = cfg.filter_settings()?;
    let (snapshots, _cloud) = sisr::run(
        &model,
        &prior,
        &returns,
        &settings,
        ChaCha12Rng::seed_from_u64(cfg.seed),
    )?;
    let diag = residual_diagnostics(&snapshots, &returns, cfg.acf_lags)?;

    output::ensure_out_dir(cfg)?;
    output::write_resid_csv(&cfg.out.join("resid.csv"), &diag.residuals)?;
    let mut manifest = manifest_base(cfg, "diagnose", vec!["resid.csv".into()]);
    manifest.diagnostics =
        Some(DiagnosticsSummary { acf: diag.acf.clone(), ljung_box_stat: diag.ljung_box_stat });
    output::write_manifest(cfg, &manifest)?;
    eprintln!("diagnose: {} residuals, {} acf lags in {:?}", diag.residuals.len(), cfg.acf_lags, t0.elapsed());
    Ok(())
}
