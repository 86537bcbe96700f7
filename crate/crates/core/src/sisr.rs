//! Sequential importance sampling with resampling (SISR) over full
//! trajectories, with online parameter learning by kernel shrinkage.
//!
//! Because the latent process is non-Markovian, every particle carries its
//! whole history X_{1:t}; the per-step transition conditions on all of it,
//! so a run costs O(N T^2) in time. Each step:
//!
//! 1. shrink the parameter particles toward their weighted mean and jitter
//!    them through the Gaussian kernel (skipped entirely when delta = 1 or
//!    no parameter is learned),
//! 2. propagate every trajectory through the proposal (the model
//!    transition, by default),
//! 3. weight in the log domain — with the bootstrap proposal the weight
//!    reduces exactly to the observation likelihood,
//! 4. record the posterior summaries from the *pre-resampling* weighted
//!    particles,
//! 5. resample whole (trajectory, parameter) pairs from the weighted
//!    empirical measure.
//!
//! Weight arithmetic contract (mirrored by the reference bootstrap filter
//! in the test suite): raw log-weights accumulate as
//! `log W_{t-1} + log-likelihood`, are normalized by max-subtraction and a
//! Neumaier-compensated sum, and `TotalWeightUnderflow` is raised when the
//! max log-weight falls below -745 (where exp underflows in f64).
//!
//! RNG protocol: the cloud owns one master generator and one generator per
//! particle slot. Slot generators are created from the master in slot
//! order at init; afterwards the master is consumed only by resampling and
//! slot generators only by their slot's prior/kernel/proposal draws. Slot
//! streams stay attached to slots across resampling (ancestors do not
//! carry their generator), so duplicated particles diverge again and the
//! output is independent of how the per-slot work is scheduled across
//! threads.

use crate::error::{Error, Result};
use crate::fracproc;
use crate::paramlearn::{self, LiuWestConfig};
use crate::ssm::{self, ModelSpec, ParameterVector};
use crate::util::{kahan_sum, log_sum_exp, weighted_quantile};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

/// Raise `TotalWeightUnderflow` when every weight is this far down in logs.
pub const UNDERFLOW_LOG_WEIGHT: f64 = -745.0;

/// Attempts to draw a valid parameter vector from the prior at init.
const MAX_PRIOR_ATTEMPTS: usize = 1000;

/// When trajectories are resampled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResamplePolicy {
    /// Resample unconditionally at every step (the reference behavior).
    Always,
    /// Resample only when ESS < kappa * N.
    EssThreshold(f64),
}

/// How ancestor indices are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResampleKind {
    /// N iid draws from the weighted empirical measure.
    Multinomial,
    /// Low-variance systematic resampling (one uniform).
    Systematic,
}

/// Proposal for the state innovation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Proposal {
    /// The model transition; transition terms cancel and the weight is the
    /// observation likelihood.
    Bootstrap,
    /// Bootstrap with the innovation sd inflated by `factor`; the weight
    /// carries the exact transition/proposal density ratio.
    InflatedBootstrap { factor: f64 },
}

/// Everything the filter needs besides the model and the data.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSettings {
    pub n_particles: usize,
    pub liu_west: LiuWestConfig,
    pub resample_policy: ResamplePolicy,
    pub resample_kind: ResampleKind,
    pub proposal: Proposal,
}

impl FilterSettings {
    pub fn new(n_particles: usize, delta: f64) -> Result<Self> {
        if n_particles < 2 {
            return Err(Error::Domain(format!("need at least 2 particles, got {n_particles}")));
        }
        Ok(Self {
            n_particles,
            liu_west: LiuWestConfig::from_delta(delta)?,
            resample_policy: ResamplePolicy::Always,
            resample_kind: ResampleKind::Multinomial,
            proposal: Proposal::Bootstrap,
        })
    }

    pub fn with_resample_policy(mut self, policy: ResamplePolicy) -> Result<Self> {
        if let ResamplePolicy::EssThreshold(kappa) = policy {
            if !(kappa > 0.0 && kappa <= 1.0) {
                return Err(Error::Domain(format!("ESS threshold kappa={kappa} outside (0, 1]")));
            }
        }
        self.resample_policy = policy;
        Ok(self)
    }

    pub fn with_resample_kind(mut self, kind: ResampleKind) -> Self {
        self.resample_kind = kind;
        self
    }

    pub fn with_proposal(mut self, proposal: Proposal) -> Result<Self> {
        if let Proposal::InflatedBootstrap { factor } = proposal {
            if !(factor > 0.0 && factor.is_finite()) {
                return Err(Error::Domain(format!("proposal inflation factor {factor} must be positive")));
            }
        }
        self.proposal = proposal;
        Ok(self)
    }
}

/// Independent uniform prior box for the learned parameter components.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaPrior {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl ThetaPrior {
    pub fn uniform_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Domain("prior box bounds have different dimensions".into()));
        }
        for (l, h) in lo.iter().zip(&hi) {
            if !(l < h) || !l.is_finite() || !h.is_finite() {
                return Err(Error::Domain(format!("prior box [{l}, {h}] is empty or non-finite")));
            }
        }
        Ok(Self { lo, hi })
    }

    /// Prior for a model with no learned parameters.
    pub fn none() -> Self {
        Self { lo: Vec::new(), hi: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.lo.len()
            && theta
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&t, (&l, &h))| t > l && t < h)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| l + (h - l) * rng.random::<f64>())
            .collect()
    }
}

/// Per-time posterior summary computed from the pre-resampling weighted
/// particles.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSnapshot {
    pub t: usize,
    pub state_mean: f64,
    pub state_q025: f64,
    pub state_q50: f64,
    pub state_q975: f64,
    pub theta_bar: Vec<f64>,
    pub theta_var: Vec<f64>,
    pub ess: f64,
    pub log_likelihood_increment: f64,
    /// Posterior mean observation scale E[s(X_t) | y_{1:t}]; feeds the
    /// standardized residuals.
    pub obs_scale_mean: f64,
}

/// The filter's entire mutable state: N weighted trajectories with their
/// parameter particles and RNG streams.
#[derive(Debug, Clone)]
pub struct ParticleCloud {
    n: usize,
    t: usize,
    hist: Vec<Vec<f64>>,
    hist_spare: Vec<Vec<f64>>,
    thetas: Vec<ParameterVector>,
    theta_spare: Vec<ParameterVector>,
    log_weights: Vec<f64>,
    norm_weights: Vec<f64>,
    theta_bar: Vec<f64>,
    theta_var: Vec<f64>,
    slot_rngs: Vec<ChaCha12Rng>,
    master_rng: ChaCha12Rng,
    pi_cache: Vec<f64>,
    pi_cache_d: f64,
}

impl ParticleCloud {
    /// Initializes the filter at t = 1: draws parameters from the prior and
    /// states from the stationary law, weights by the first observation
    /// likelihood (proposal = initial density, so the densities cancel),
    /// records the snapshot, then resamples.
    pub fn init(
        model: &ModelSpec,
        prior: &ThetaPrior,
        settings: &FilterSettings,
        y1: f64,
        mut master_rng: ChaCha12Rng,
    ) -> Result<(Self, FilterSnapshot)> {
        let n = settings.n_particles;
        if n < 2 {
            return Err(Error::Domain(format!("need at least 2 particles, got {n}")));
        }
        let dim = model.theta_dim();
        if prior.dim() != dim {
            return Err(Error::Domain(format!(
                "prior dimension {} does not match the {} learned parameter(s)",
                prior.dim(),
                dim
            )));
        }
        if !y1.is_finite() {
            return Err(Error::Domain(format!("observation y_1={y1} is not finite")));
        }

        let mut slot_rngs: Vec<ChaCha12Rng> = Vec::with_capacity(n);
        for _ in 0..n {
            slot_rngs.push(ChaCha12Rng::from_rng(&mut master_rng));
        }

        // gamma(0) is shared when nothing is learned
        let shared_var =
            if dim == 0 { Some(fracproc::stationary_variance(model.latent())?) } else { None };

        let mut thetas: Vec<ParameterVector> = vec![ParameterVector::default(); n];
        let mut states = vec![0.0; n];
        let mut ll = vec![0.0; n];

        slot_rngs
            .par_iter_mut()
            .zip(thetas.par_iter_mut())
            .zip(states.par_iter_mut())
            .zip(ll.par_iter_mut())
            .try_for_each(|(((rng, theta), state), lw)| -> Result<()> {
                if dim > 0 {
                    let mut accepted = None;
                    for _ in 0..MAX_PRIOR_ATTEMPTS {
                        let draw = prior.sample(rng);
                        if model.theta_is_valid(&draw) {
                            accepted = Some(draw);
                            break;
                        }
                    }
                    let draw = accepted.ok_or_else(|| {
                        Error::Domain(format!(
                            "no valid parameter draw from the prior box in {MAX_PRIOR_ATTEMPTS} attempts"
                        ))
                    })?;
                    *theta = ParameterVector(draw);
                }
                let var = match shared_var {
                    Some(v) => v,
                    None => fracproc::stationary_variance(&model.embed(theta)?)?,
                };
                let z: f64 = StandardNormal.sample(rng);
                *state = var.sqrt() * z;
                *lw = ssm::obs_log_density(model, y1, *state);
                Ok(())
            })?;

        let ln_uniform = (1.0 / n as f64).ln();
        let log_weights: Vec<f64> = ll.iter().map(|&l| ln_uniform + l).collect();
        let norm_weights = normalized_weights_from_log(&log_weights)
            .map_err(|_| underflow_error(1, &log_weights))?;

        let hist: Vec<Vec<f64>> = states.iter().map(|&x| vec![x]).collect();
        let mut cloud = Self {
            n,
            t: 1,
            hist_spare: vec![Vec::new(); n],
            hist,
            theta_spare: vec![ParameterVector::default(); n],
            thetas,
            log_weights,
            norm_weights,
            theta_bar: Vec::new(),
            theta_var: Vec::new(),
            slot_rngs,
            master_rng,
            pi_cache: Vec::new(),
            pi_cache_d: model.latent().d(),
        };
        let snapshot = cloud.snapshot(model, &states);
        cloud.theta_bar = snapshot.theta_bar.clone();
        cloud.theta_var = snapshot.theta_var.clone();
        cloud.maybe_resample(settings, snapshot.ess);
        Ok((cloud, snapshot))
    }

    /// Advances the filter by one observation and returns the snapshot.
    /// Must be called with the same model the cloud was initialized with.
    pub fn step(&mut self, model: &ModelSpec, y_t: f64, settings: &FilterSettings) -> Result<FilterSnapshot> {
        if !y_t.is_finite() {
            return Err(Error::Domain(format!("observation y_{}={y_t} is not finite", self.t + 1)));
        }
        debug_assert_eq!(model.latent().d(), self.pi_cache_d, "model changed mid-run");
        let n = self.n;
        let dim = model.theta_dim();
        let cfg = settings.liu_west;
        let evolve = dim > 0 && cfg.h > 0.0;
        let theta_bar_prev = self.theta_bar.clone();
        let theta_var_prev = self.theta_var.clone();

        fracproc::extend_pi_weights(&mut self.pi_cache, self.pi_cache_d, self.t + 1);

        let mut x_new = vec![0.0; n];
        let mut ll = vec![0.0; n];
        let pi = &self.pi_cache;
        let proposal = settings.proposal;
        let truncation = model.truncation();

        self.slot_rngs
            .par_iter_mut()
            .zip(self.thetas.par_iter_mut())
            .zip(self.hist.par_iter())
            .zip(x_new.par_iter_mut())
            .zip(ll.par_iter_mut())
            .try_for_each_init(
                Vec::new,
                |scratch, ((((rng, theta), hist), x), lw)| -> Result<()> {
                    if evolve {
                        let m = ParameterVector(paramlearn::shrink_one(
                            theta.as_slice(),
                            &theta_bar_prev,
                            cfg.alpha,
                        ));
                        *theta = paramlearn::sample_kernel(
                            &m,
                            &cfg,
                            &theta_var_prev,
                            |t| model.theta_is_valid(t),
                            rng,
                        )?;
                    }
                    let spec_storage;
                    let spec = if dim == 0 {
                        model.latent()
                    } else {
                        spec_storage = model.embed(theta)?;
                        &spec_storage
                    };
                    let mean = fracproc::conditional_mean_with_scratch(
                        spec, hist, truncation, pi, scratch,
                    );
                    let sd = spec.sigma_eta();
                    let z: f64 = StandardNormal.sample(rng);
                    match proposal {
                        Proposal::Bootstrap => {
                            *x = mean + sd * z;
                            *lw = ssm::obs_log_density(model, y_t, *x);
                        }
                        Proposal::InflatedBootstrap { factor } => {
                            let prop_sd = factor * sd;
                            *x = mean + prop_sd * z;
                            *lw = ssm::obs_log_density(model, y_t, *x)
                                + crate::util::normal_log_pdf(*x, mean, sd)
                                - crate::util::normal_log_pdf(*x, mean, prop_sd);
                        }
                    }
                    Ok(())
                },
            )?;

        for i in 0..n {
            self.log_weights[i] = self.norm_weights[i].ln() + ll[i];
        }
        self.norm_weights = normalized_weights_from_log(&self.log_weights)
            .map_err(|_| underflow_error(self.t + 1, &self.log_weights))?;

        for (row, &x) in self.hist.iter_mut().zip(&x_new) {
            row.push(x);
        }
        self.t += 1;

        let snapshot = self.snapshot(model, &x_new);
        self.theta_bar = snapshot.theta_bar.clone();
        self.theta_var = snapshot.theta_var.clone();
        self.maybe_resample(settings, snapshot.ess);
        Ok(snapshot)
    }

    fn snapshot(&self, model: &ModelSpec, states: &[f64]) -> FilterSnapshot {
        let w = &self.norm_weights;
        let dim = model.theta_dim();
        let state_mean = kahan_sum(states.iter().zip(w).map(|(&x, &wi)| wi * x));
        let theta_bar: Vec<f64> = (0..dim)
            .map(|c| kahan_sum(self.thetas.iter().zip(w).map(|(th, &wi)| wi * th.0[c])))
            .collect();
        let theta_var: Vec<f64> = (0..dim)
            .map(|c| {
                kahan_sum(self.thetas.iter().zip(w).map(|(th, &wi)| {
                    let dev = th.0[c] - theta_bar[c];
                    wi * dev * dev
                }))
                .max(0.0)
            })
            .collect();
        FilterSnapshot {
            t: self.t,
            state_mean,
            state_q025: weighted_quantile(states, w, 0.025),
            state_q50: weighted_quantile(states, w, 0.5),
            state_q975: weighted_quantile(states, w, 0.975),
            theta_bar,
            theta_var,
            ess: ess(w),
            log_likelihood_increment: log_sum_exp(&self.log_weights),
            obs_scale_mean: kahan_sum(states.iter().zip(w).map(|(&x, &wi)| wi * model.obs_scale(x))),
        }
    }

    fn maybe_resample(&mut self, settings: &FilterSettings, current_ess: f64) {
        let do_it = match settings.resample_policy {
            ResamplePolicy::Always => true,
            ResamplePolicy::EssThreshold(kappa) => current_ess < kappa * self.n as f64,
        };
        if do_it {
            self.resample(settings.resample_kind);
        }
    }

    fn resample(&mut self, kind: ResampleKind) {
        let ancestors = match kind {
            ResampleKind::Multinomial => multinomial_resample(&self.norm_weights, &mut self.master_rng),
            ResampleKind::Systematic => systematic_resample(&self.norm_weights, &mut self.master_rng),
        };
        for (i, &a) in ancestors.iter().enumerate() {
            self.hist_spare[i].clone_from(&self.hist[a]);
            self.theta_spare[i].clone_from(&self.thetas[a]);
        }
        std::mem::swap(&mut self.hist, &mut self.hist_spare);
        std::mem::swap(&mut self.thetas, &mut self.theta_spare);
        let uniform = 1.0 / self.n as f64;
        let ln_uniform = uniform.ln();
        self.norm_weights.fill(uniform);
        self.log_weights.fill(ln_uniform);
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// Trajectory X_{1:t} of slot i.
    pub fn history(&self, i: usize) -> &[f64] {
        &self.hist[i]
    }

    /// Current state X_t of slot i.
    pub fn current_state(&self, i: usize) -> f64 {
        *self.hist[i].last().expect("initialized cloud")
    }

    pub fn theta(&self, i: usize) -> &ParameterVector {
        &self.thetas[i]
    }

    pub fn thetas(&self) -> &[ParameterVector] {
        &self.thetas
    }

    pub fn norm_weights(&self) -> &[f64] {
        &self.norm_weights
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Latest stored weighted parameter mean (pre-resampling values).
    pub fn theta_bar(&self) -> &[f64] {
        &self.theta_bar
    }

    /// Latest stored weighted parameter variance (pre-resampling values).
    pub fn theta_var(&self) -> &[f64] {
        &self.theta_var
    }

    /// Hand-built cloud for oracle tests: trajectories, parameters and
    /// normalized weights supplied directly.
    #[cfg(test)]
    pub(crate) fn from_test_parts(
        hist: Vec<Vec<f64>>,
        thetas: Vec<ParameterVector>,
        norm_weights: Vec<f64>,
        seed: u64,
    ) -> Self {
        let n = hist.len();
        assert!(n >= 2 && thetas.len() == n && norm_weights.len() == n);
        let t = hist[0].len();
        let mut master_rng = ChaCha12Rng::seed_from_u64(seed);
        let slot_rngs = (0..n).map(|_| ChaCha12Rng::from_rng(&mut master_rng)).collect();
        let log_weights = norm_weights.iter().map(|w| w.ln()).collect();
        Self {
            n,
            t,
            hist_spare: vec![Vec::new(); n],
            hist,
            theta_spare: vec![ParameterVector::default(); n],
            thetas,
            log_weights,
            norm_weights,
            theta_bar: Vec::new(),
            theta_var: Vec::new(),
            slot_rngs,
            master_rng,
            pi_cache: Vec::new(),
            pi_cache_d: 0.0,
        }
    }

    /// Structural invariants: equal trajectory lengths, normalized
    /// non-negative weights, constant parameter dimension.
    pub fn validate(&self) -> Result<()> {
        if self.hist.iter().any(|h| h.len() != self.t) {
            return Err(Error::Domain("trajectory length differs from t".into()));
        }
        if self.norm_weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::Domain("negative or NaN normalized weight".into()));
        }
        let total = kahan_sum(self.norm_weights.iter().cloned());
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("weights sum to {total}")));
        }
        let dim = self.thetas[0].dim();
        if self.thetas.iter().any(|th| th.dim() != dim) {
            return Err(Error::Domain("parameter dimension varies across particles".into()));
        }
        Ok(())
    }
}

fn underflow_error(t: usize, log_weights: &[f64]) -> Error {
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Error::TotalWeightUnderflow { t, max_log_weight: max }
}

/// Normalizes log-domain weights by max-subtraction. Fails when the max
/// log-weight is below [`UNDERFLOW_LOG_WEIGHT`].
pub fn normalized_weights_from_log(log_weights: &[f64]) -> Result<Vec<f64>> {
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max >= UNDERFLOW_LOG_WEIGHT) {
        return Err(Error::TotalWeightUnderflow { t: 0, max_log_weight: max });
    }
    let unnorm: Vec<f64> = log_weights.iter().map(|&lw| (lw - max).exp()).collect();
    let total = kahan_sum(unnorm.iter().cloned());
    Ok(unnorm.into_iter().map(|w| w / total).collect())
}

/// Effective sample size 1 / sum(W_i^2).
pub fn ess(weights: &[f64]) -> f64 {
    1.0 / kahan_sum(weights.iter().map(|&w| w * w))
}

/// N iid ancestor indices from the weighted empirical measure.
pub fn multinomial_resample<R: RngCore + ?Sized>(weights: &[f64], rng: &mut R) -> Vec<usize> {
    let cum = cumulative(weights);
    let n = weights.len();
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            pick(&cum, u)
        })
        .collect()
}

/// Systematic (stratified, single-uniform) ancestor indices.
pub fn systematic_resample<R: RngCore + ?Sized>(weights: &[f64], rng: &mut R) -> Vec<usize> {
    let cum = cumulative(weights);
    let n = weights.len();
    let u0: f64 = rng.random::<f64>() / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    for j in 0..n {
        let threshold = u0 + j as f64 / n as f64;
        while i < n - 1 && cum[i] < threshold {
            i += 1;
        }
        out.push(i);
    }
    out
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    let mut cum = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for &w in weights {
        acc += w;
        cum.push(acc);
    }
    cum
}

fn pick(cum: &[f64], u: f64) -> usize {
    cum.partition_point(|&c| c < u).min(cum.len() - 1)
}

/// Runs the filter over a whole observation record: init on y_1, then one
/// step per remaining observation. Deterministic given the RNG seed.
pub fn run(
    model: &ModelSpec,
    prior: &ThetaPrior,
    observations: &[f64],
    settings: &FilterSettings,
    master_rng: ChaCha12Rng,
) -> Result<(Vec<FilterSnapshot>, ParticleCloud)> {
    let Some((&y1, rest)) = observations.split_first() else {
        return Err(Error::Domain("need at least one observation".into()));
    };
    let (mut cloud, first) = ParticleCloud::init(model, prior, settings, y1, master_rng)?;
    let mut snapshots = Vec::with_capacity(observations.len());
    snapshots.push(first);
    for &y in rest {
        snapshots.push(cloud.step(model, y, settings)?);
    }
    Ok((snapshots, cloud))
}
