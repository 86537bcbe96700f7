//! Kernel-shrinkage machinery for online parameter learning.
//!
//! Parameter particles evolve artificially through a Gaussian mixture with
//! shrunk locations `m_i = alpha theta_i + (1 - alpha) theta_bar` and
//! componentwise variance `h^2 V`. With `alpha^2 + h^2 = 1` the mixture
//! reproduces the weighted mean and variance of the particle set exactly,
//! which is what keeps the artificial evolution from inflating the
//! posterior spread.
//!
//! The pair (alpha, h) comes from a single discount factor delta in
//! (1/3, 1]: alpha = (3 delta - 1) / (2 delta), h^2 = 1 - alpha^2.
//! delta = 1 gives (alpha, h) = (1, 0) and freezes the particles.

use crate::error::{Error, Result};
use crate::ssm::ParameterVector;
use crate::util::kahan_sum;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Attempts before kernel sampling gives up on the parameter domain.
pub const MAX_KERNEL_ATTEMPTS: usize = 100;

/// Discount factor and the derived shrinkage pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiuWestConfig {
    pub delta: f64,
    pub alpha: f64,
    pub h: f64,
}

impl LiuWestConfig {
    /// Builds the (alpha, h) pair from a discount factor in (1/3, 1].
    pub fn from_delta(delta: f64) -> Result<Self> {
        if !(delta > 1.0 / 3.0 && delta <= 1.0) {
            return Err(Error::Domain(format!(
                "discount factor delta={delta} outside (1/3, 1]"
            )));
        }
        let alpha = (3.0 * delta - 1.0) / (2.0 * delta);
        let h = (1.0 - alpha * alpha).max(0.0).sqrt();
        Ok(Self { delta, alpha, h })
    }
}

/// See [`LiuWestConfig::from_delta`].
pub fn config_from_delta(delta: f64) -> Result<LiuWestConfig> {
    LiuWestConfig::from_delta(delta)
}

/// A borrowed view over weighted parameter particles.
#[derive(Debug, Clone, Copy)]
pub struct WeightedParticles<'a> {
    values: &'a [ParameterVector],
    weights: &'a [f64],
}

impl<'a> WeightedParticles<'a> {
    /// Validates that weights are normalized (sum 1 within 1e-12) and
    /// non-negative, and that all particles share one dimension.
    pub fn new(values: &'a [ParameterVector], weights: &'a [f64]) -> Result<Self> {
        if values.len() != weights.len() || values.is_empty() {
            return Err(Error::Domain("particle values and weights must align and be non-empty".into()));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::Domain("negative or NaN particle weight".into()));
        }
        let total = kahan_sum(weights.iter().cloned());
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("weights sum to {total}, expected 1")));
        }
        let dim = values[0].dim();
        if values.iter().any(|v| v.dim() != dim) {
            return Err(Error::Domain("parameter particles have mixed dimensions".into()));
        }
        Ok(Self { values, weights })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values[0].dim()
    }

    pub fn values(&self) -> &[ParameterVector] {
        self.values
    }

    pub fn weights(&self) -> &[f64] {
        self.weights
    }
}

/// Weighted mean theta_bar = sum_i W_i theta_i, componentwise.
pub fn weighted_mean(p: &WeightedParticles) -> Vec<f64> {
    let dim = p.dim();
    (0..dim)
        .map(|c| kahan_sum(p.values.iter().zip(p.weights).map(|(v, &w)| w * v.0[c])))
        .collect()
}

/// Weighted variance sum_i W_i (theta_i - theta_bar)^2, componentwise.
/// Zero for a degenerate (constant) component.
pub fn weighted_variance(p: &WeightedParticles) -> Vec<f64> {
    let mean = weighted_mean(p);
    (0..p.dim())
        .map(|c| {
            kahan_sum(p.values.iter().zip(p.weights).map(|(v, &w)| {
                let dev = v.0[c] - mean[c];
                w * dev * dev
            }))
            .max(0.0)
        })
        .collect()
}

/// Shrinkage locations m_i = alpha theta_i + (1 - alpha) theta_bar.
/// Preserves the weighted mean exactly.
pub fn shrink_locations(p: &WeightedParticles, cfg: &LiuWestConfig) -> Vec<ParameterVector> {
    let mean = weighted_mean(p);
    p.values
        .iter()
        .map(|v| ParameterVector(shrink_one(v.as_slice(), &mean, cfg.alpha)))
        .collect()
}

/// Shrinks a single particle toward the mean (per-slot form used by the
/// filter's hot loop).
pub(crate) fn shrink_one(theta: &[f64], mean: &[f64], alpha: f64) -> Vec<f64> {
    theta
        .iter()
        .zip(mean)
        .map(|(&t, &m)| alpha * t + (1.0 - alpha) * m)
        .collect()
}

/// Draws theta ~ N(m, h^2 V) componentwise, redrawing until the result
/// satisfies `in_domain` (at most [`MAX_KERNEL_ATTEMPTS`] tries). With
/// h = 0 the location is returned exactly and no randomness is consumed.
pub fn sample_kernel<R, F>(
    m: &ParameterVector,
    cfg: &LiuWestConfig,
    variance: &[f64],
    in_domain: F,
    rng: &mut R,
) -> Result<ParameterVector>
where
    R: Rng + ?Sized,
    F: Fn(&[f64]) -> bool,
{
    if variance.len() != m.dim() {
        return Err(Error::Domain("kernel variance dimension mismatch".into()));
    }
    if variance.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::Domain("kernel variance must be non-negative".into()));
    }
    if cfg.h == 0.0 {
        if !in_domain(m.as_slice()) {
            return Err(Error::Domain(
                "shrinkage location violates the parameter domain with h=0".into(),
            ));
        }
        return Ok(m.clone());
    }
    let sds: Vec<f64> = variance.iter().map(|&v| cfg.h * v.sqrt()).collect();
    let mut draw = vec![0.0; m.dim()];
    for _ in 0..MAX_KERNEL_ATTEMPTS {
        for (c, d) in draw.iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(rng);
            *d = m.0[c] + sds[c] * z;
        }
        if in_domain(&draw) {
            return Ok(ParameterVector(draw));
        }
    }
    Err(Error::Domain(format!(
        "kernel sampling exhausted {MAX_KERNEL_ATTEMPTS} attempts; prior or parameter domain too tight"
    )))
}
