//! Flat key = value run configuration with command-line overrides.
//!
//! The file format is one `key = value` pair per line; `#` starts a
//! comment. Unknown keys are rejected so typos cannot silently change a
//! run. Flags win over file values.

use crate::error::{CliError, Result};
use longmem_smc::fracproc::{FarimaSpec, Truncation};
use longmem_smc::sisr::{FilterSettings, ResampleKind, ResamplePolicy, ThetaPrior};
use longmem_smc::ssm::{ModelSpec, ObservationLink, ParamId};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

const KNOWN_KEYS: &[&str] = &[
    "ar",
    "ma",
    "d",
    "sigma_eta",
    "link",
    "obs_sd",
    "learn",
    "n_particles",
    "delta",
    "resample",
    "resample_kind",
    "truncation",
    "seed",
    "threads",
    "out",
    "data",
    "T",
    "split",
    "horizon",
    "acf_lags",
    "bandwidth_exponent",
    "proxy",
];

/// Volatility-proxy choice for `estimate-d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxyKind {
    /// log(y^2 + floor), the LMSV transform (default).
    LogSquared,
    /// apply the estimator to the ingested series directly.
    None,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub d: f64,
    pub sigma_eta: f64,
    pub link: ObservationLink,
    pub obs_sd: f64,
    pub learn: Vec<ParamId>,
    pub prior_lo: Vec<f64>,
    pub prior_hi: Vec<f64>,
    pub n_particles: usize,
    pub delta: f64,
    pub resample_policy: ResamplePolicy,
    pub resample_kind: ResampleKind,
    pub truncation: Truncation,
    pub seed: u64,
    pub threads: usize,
    pub out: PathBuf,
    pub data: Option<PathBuf>,
    pub sim_len: Option<usize>,
    pub split: Option<usize>,
    pub horizon: Option<usize>,
    pub acf_lags: usize,
    pub bandwidth_exponent: f64,
    pub proxy: ProxyKind,
    /// Normalized key/value echo for the manifest.
    pub echo: BTreeMap<String, String>,
}

/// Command-line overrides (flags win over the file).
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n_particles: Option<usize>,
    pub delta: Option<f64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
}

fn parse_list(v: &str) -> Result<Vec<f64>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("malformed number '{}'", s.trim())))
        })
        .collect()
}

fn parse_scalar<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse::<T>()
            .map(Some)
            .map_err(|_| CliError::Config(format!("malformed value '{v}' for key '{key}'"))),
    }
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Config(format!(
                    "line {}: expected 'key = value', got '{raw}'",
                    lineno + 1
                )));
            };
            let key = k.trim().to_string();
            let known = KNOWN_KEYS.contains(&key.as_str()) || key.starts_with("prior.");
            if !known {
                return Err(CliError::Config(format!("line {}: unknown key '{key}'", lineno + 1)));
            }
            if map.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(CliError::Config(format!("line {}: duplicate key '{key}'", lineno + 1)));
            }
        }
        Self::from_map(map, overrides)
    }

    fn from_map(mut map: BTreeMap<String, String>, overrides: &Overrides) -> Result<Self> {
        if let Some(seed) = overrides.seed {
            map.insert("seed".into(), seed.to_string());
        }
        if let Some(n) = overrides.n_particles {
            map.insert("n_particles".into(), n.to_string());
        }
        if let Some(delta) = overrides.delta {
            map.insert("delta".into(), delta.to_string());
        }
        if let Some(threads) = overrides.threads {
            map.insert("threads".into(), threads.to_string());
        }
        if let Some(out) = &overrides.out {
            map.insert("out".into(), out.display().to_string());
        }

        let ar = parse_list(map.get("ar").map(String::as_str).unwrap_or(""))?;
        let ma = parse_list(map.get("ma").map(String::as_str).unwrap_or(""))?;
        let d = parse_scalar::<f64>(&map, "d")?.unwrap_or(0.0);
        let sigma_eta = parse_scalar::<f64>(&map, "sigma_eta")?.unwrap_or(1.0);
        let obs_sd = parse_scalar::<f64>(&map, "obs_sd")?.unwrap_or(1.0);
        let link = match map.get("link").map(String::as_str).unwrap_or("abs") {
            "abs" => ObservationLink::Abs,
            "exp-half" => ObservationLink::ExpHalf,
            other => {
                return Err(CliError::Config(format!(
                    "unknown link '{other}' (expected abs or exp-half)"
                )))
            }
        };

        let mut learn = Vec::new();
        let mut prior_lo = Vec::new();
        let mut prior_hi = Vec::new();
        if let Some(list) = map.get("learn") {
            for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let id = parse_param_id(name)?;
                let box_key = format!("prior.{name}");
                let Some(box_val) = map.get(&box_key) else {
                    return Err(CliError::Config(format!(
                        "learned parameter '{name}' needs a '{box_key} = lo,hi' prior box"
                    )));
                };
                let bounds = parse_list(box_val)?;
                if bounds.len() != 2 {
                    return Err(CliError::Config(format!("'{box_key}' must be 'lo,hi'")));
                }
                learn.push(id);
                prior_lo.push(bounds[0]);
                prior_hi.push(bounds[1]);
            }
        }
        for key in map.keys() {
            if let Some(name) = key.strip_prefix("prior.") {
                let id = parse_param_id(name)?;
                if !learn.contains(&id) {
                    return Err(CliError::Config(format!(
                        "prior box for '{name}' but it is not in 'learn'"
                    )));
                }
            }
        }

        let n_particles = parse_scalar::<usize>(&map, "n_particles")?.unwrap_or(500);
        let delta = parse_scalar::<f64>(&map, "delta")?.unwrap_or(1.0);
        let resample_policy = match map.get("resample").map(String::as_str).unwrap_or("always") {
            "always" => ResamplePolicy::Always,
            "ess" => ResamplePolicy::EssThreshold(0.5),
            other => match other.strip_prefix("ess:") {
                Some(kappa) => ResamplePolicy::EssThreshold(kappa.parse::<f64>().map_err(|_| {
                    CliError::Config(format!("malformed ESS threshold in 'resample = {other}'"))
                })?),
                None => {
                    return Err(CliError::Config(format!(
                        "unknown resample policy '{other}' (expected always, ess or ess:<kappa>)"
                    )))
                }
            },
        };
        let resample_kind = match map.get("resample_kind").map(String::as_str).unwrap_or("multinomial") {
            "multinomial" => ResampleKind::Multinomial,
            "systematic" => ResampleKind::Systematic,
            other => return Err(CliError::Config(format!("unknown resample kind '{other}'"))),
        };
        let truncation = match map.get("truncation").map(String::as_str).unwrap_or("full") {
            "full" => Truncation::Full,
            other => Truncation::Window(other.parse::<usize>().map_err(|_| {
                CliError::Config(format!("truncation must be 'full' or an integer, got '{other}'"))
            })?),
        };

        let Some(seed) = parse_scalar::<u64>(&map, "seed")? else {
            return Err(CliError::Config(
                "'seed' is mandatory (reproducible runs have no wall-clock default)".into(),
            ));
        };
        let threads = parse_scalar::<usize>(&map, "threads")?.unwrap_or(0);
        // outputs are independent of the thread count by construction, and
        // the manifest must stay byte-identical across --threads, so the
        // echo does not record it
        map.remove("threads");
        let out = PathBuf::from(map.get("out").map(String::as_str).unwrap_or("out"));
        let data = map.get("data").map(PathBuf::from);
        let sim_len = parse_scalar::<usize>(&map, "T")?;
        let split = parse_scalar::<usize>(&map, "split")?;
        let horizon = parse_scalar::<usize>(&map, "horizon")?;
        let acf_lags = parse_scalar::<usize>(&map, "acf_lags")?.unwrap_or(20);
        let bandwidth_exponent = parse_scalar::<f64>(&map, "bandwidth_exponent")?.unwrap_or(0.5);
        let proxy = match map.get("proxy").map(String::as_str).unwrap_or("log-squared") {
            "log-squared" => ProxyKind::LogSquared,
            "none" => ProxyKind::None,
            other => {
                return Err(CliError::Config(format!(
                    "unknown proxy '{other}' (expected log-squared or none)"
                )))
            }
        };

        Ok(Self {
            ar,
            ma,
            d,
            sigma_eta,
            link,
            obs_sd,
            learn,
            prior_lo,
            prior_hi,
            n_particles,
            delta,
            resample_policy,
            resample_kind,
            truncation,
            seed,
            threads,
            out,
            data,
            sim_len,
            split,
            horizon,
            acf_lags,
            bandwidth_exponent,
            proxy,
            echo: map,
        })
    }

    /// Latent spec built from the configured (template) coefficients.
    pub fn latent_spec(&self) -> Result<FarimaSpec> {
        Ok(FarimaSpec::new(self.ar.clone(), self.d, self.ma.clone(), self.sigma_eta)?)
    }

    pub fn model(&self) -> Result<ModelSpec> {
        let spec = self.latent_spec()?;
        let model = ModelSpec::new(spec, self.learn.clone(), self.link, self.obs_sd)?
            .with_truncation(self.truncation);
        Ok(model)
    }

    pub fn prior(&self) -> Result<ThetaPrior> {
        if self.learn.is_empty() {
            Ok(ThetaPrior::none())
        } else {
            Ok(ThetaPrior::uniform_box(self.prior_lo.clone(), self.prior_hi.clone())?)
        }
    }

    pub fn filter_settings(&self) -> Result<FilterSettings> {
        Ok(FilterSettings::new(self.n_particles, self.delta)?
            .with_resample_policy(self.resample_policy)?
            .with_resample_kind(self.resample_kind))
    }
}

fn parse_param_id(name: &str) -> Result<ParamId> {
    let parse_index = |rest: &str| -> Result<usize> {
        let idx: usize = rest
            .parse()
            .map_err(|_| CliError::Config(format!("malformed parameter name '{name}'")))?;
        if idx == 0 {
            return Err(CliError::Config(format!(
                "parameter indices are 1-based, got '{name}'"
            )));
        }
        Ok(idx - 1)
    };
    if let Some(rest) = name.strip_prefix("ar") {
        Ok(ParamId::Ar(parse_index(rest)?))
    } else if let Some(rest) = name.strip_prefix("ma") {
        Ok(ParamId::Ma(parse_index(rest)?))
    } else {
        Err(CliError::Config(format!(
            "unknown parameter '{name}' (expected ar<k> or ma<k>)"
        )))
    }
}
