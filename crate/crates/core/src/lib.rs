//! Sequential Monte Carlo filtering for state-space models whose latent
//! process is a long-memory (or antipersistent) fractional ARIMA process.
//!
//! The model class is
//!
//! ```text
//!   Y_t = sigma(X_t / 2) * eps_t                  (observation)
//!   phi(B) (1 - B)^d X_t = theta(B) eta_t         (latent fractional ARIMA)
//! ```
//!
//! with `eps_t`, `eta_t` independent Gaussian noise. Because `(1 - B)^d`
//! couples `X_t` to its entire past, the latent process is non-Markovian and
//! the filter carries whole trajectories rather than one-step states.
//!
//! Module map:
//!
//! * [`fracproc`] — fractional ARIMA mathematics: differencing/integration
//!   weights, AR(infinity) representation, autocovariances, simulation, and
//!   the Gaussian conditional law of `X_t` given its past.
//! * [`ssm`] — the state-space binding: observation links, parameter
//!   masking, transition and observation densities.
//! * [`paramlearn`] — kernel-shrinkage machinery for online parameter
//!   learning (discount factor, shrinkage locations, kernel sampling).
//! * [`sisr`] — the sequential importance sampling / resampling filter with
//!   full-trajectory storage and per-step posterior summaries.
//! * [`memest`] — periodogram and the log-periodogram (GPH) estimator of
//!   the memory parameter `d`.
//! * [`forecast`] — rolling one-step prediction with bootstrap intervals
//!   and residual diagnostics.
//!
//! ```
//! use longmem_smc::fracproc::{simulate, FarimaSpec};
//! use longmem_smc::sisr::{run, FilterSettings, ThetaPrior};
//! use longmem_smc::ssm::{sample_observation, ModelSpec, ObservationLink, ParamId};
//! use rand::SeedableRng;
//! use rand_chacha::ChaCha12Rng;
//!
//! // ARFIMA(1, 0.3, 0) latent volatility observed through Y_t = |X_t| eps_t
//! let spec = FarimaSpec::new(vec![0.8], 0.3, vec![], 1.0)?;
//! let model = ModelSpec::new(spec.clone(), vec![ParamId::Ar(0)], ObservationLink::Abs, 2.0)?;
//!
//! let states = simulate(&spec, 60, 7);
//! let mut rng = ChaCha12Rng::seed_from_u64(8);
//! let ys: Vec<f64> = states.iter().map(|&x| sample_observation(&model, x, &mut rng)).collect();
//!
//! // filter with the AR coefficient learned online
//! let prior = ThetaPrior::uniform_box(vec![-0.99], vec![0.99])?;
//! let settings = FilterSettings::new(200, 0.98)?;
//! let (snapshots, cloud) = run(&model, &prior, &ys, &settings, ChaCha12Rng::seed_from_u64(9))?;
//!
//! assert_eq!(snapshots.len(), 60);
//! assert_eq!(cloud.history(0).len(), 60);
//! let last = snapshots.last().unwrap();
//! assert!(last.theta_bar[0] > -0.99 && last.theta_bar[0] < 0.99);
//! # Ok::<(), longmem_smc::Error>(())
//! ```

pub mod error;
pub mod forecast;
pub mod fracproc;
pub mod memest;
pub mod paramlearn;
pub mod sisr;
pub mod ssm;
mod util;

pub use error::{Error, Result};
