//! State-space binding: a latent fractional ARIMA law, an observation
//! density, and a parameter vector with a learned/fixed mask.
//!
//! Observations follow `Y_t = sigma(X_t / 2) * eps_t` with `eps_t` iid
//! N(0, obs_noise_sd^2) and `sigma` one of the supported links. The memory
//! parameter `d` and the innovation sd are fixed attributes of the model;
//! only AR/MA coefficients can be marked as learned.

use crate::error::{Error, Result};
use crate::fracproc::{self, ConditionalLaw, FarimaSpec, Truncation};
use crate::util::normal_log_pdf;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Observation scales below this are floored so the abs link keeps the
/// weights finite at a zero state.
pub const MIN_OBS_SCALE: f64 = 1e-6;

/// The observation link sigma(.) in Y_t = sigma(X_t / 2) * eps_t.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservationLink {
    /// sigma(u) = |u|: the scale is |x/2| times the noise sd.
    Abs,
    /// sigma(u) = exp(u): the scale is exp(x/2) times the noise sd
    /// (standard log-volatility form for real data).
    ExpHalf,
    /// Additive-observation test link: Y_t = X_t + noise. Used by the
    /// linear-Gaussian benchmark against the exact Kalman filter; not a
    /// volatility link.
    Linear,
}

/// Which latent coefficient a learned parameter component refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamId {
    /// AR coefficient phi_{i+1} (zero-based index into the AR vector).
    Ar(usize),
    /// MA coefficient theta_{i+1} (zero-based index into the MA vector).
    Ma(usize),
}

impl std::fmt::Display for ParamId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamId::Ar(i) => write!(f, "ar{}", i + 1),
            ParamId::Ma(i) => write!(f, "ma{}", i + 1),
        }
    }
}

/// Values of the learned parameter components, aligned with
/// [`ModelSpec::learned`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterVector(pub Vec<f64>);

impl ParameterVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// A complete state-space model specification.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    latent: FarimaSpec,
    learned: Vec<ParamId>,
    link: ObservationLink,
    obs_noise_sd: f64,
    truncation: Truncation,
}

impl ModelSpec {
    /// Builds a model. `latent` supplies the fixed structure and the fixed
    /// values of any non-learned coefficients (learned slots hold their
    /// initial/template values).
    pub fn new(
        latent: FarimaSpec,
        learned: Vec<ParamId>,
        link: ObservationLink,
        obs_noise_sd: f64,
    ) -> Result<Self> {
        if !(obs_noise_sd > 0.0) || !obs_noise_sd.is_finite() {
            return Err(Error::Domain(format!(
                "observation noise sd {obs_noise_sd} must be positive and finite"
            )));
        }
        for id in &learned {
            let ok = match *id {
                ParamId::Ar(i) => i < latent.ar().len(),
                ParamId::Ma(i) => i < latent.ma().len(),
            };
            if !ok {
                return Err(Error::Domain(format!(
                    "learned parameter {id} has no slot in the latent spec"
                )));
            }
        }
        for (i, a) in learned.iter().enumerate() {
            if learned[i + 1..].contains(a) {
                return Err(Error::Domain(format!("learned parameter {a} listed twice")));
            }
        }
        Ok(Self { latent, learned, link, obs_noise_sd, truncation: Truncation::Full })
    }

    /// Model with no learned parameters.
    pub fn with_known_params(latent: FarimaSpec, link: ObservationLink, obs_noise_sd: f64) -> Result<Self> {
        Self::new(latent, Vec::new(), link, obs_noise_sd)
    }

    /// Restricts transition conditioning to a finite window of the past.
    pub fn with_truncation(mut self, truncation: Truncation) -> Self {
        self.truncation = truncation;
        self
    }

    pub fn latent(&self) -> &FarimaSpec {
        &self.latent
    }

    pub fn learned(&self) -> &[ParamId] {
        &self.learned
    }

    pub fn link(&self) -> ObservationLink {
        self.link
    }

    pub fn obs_noise_sd(&self) -> f64 {
        self.obs_noise_sd
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn theta_dim(&self) -> usize {
        self.learned.len()
    }

    /// Substitutes the learned components into the latent template,
    /// validating stationarity/invertibility of the result.
    pub fn embed(&self, theta: &ParameterVector) -> Result<FarimaSpec> {
        if theta.dim() != self.learned.len() {
            return Err(Error::Domain(format!(
                "parameter vector has dim {} but the model learns {}",
                theta.dim(),
                self.learned.len()
            )));
        }
        let mut ar = self.latent.ar().to_vec();
        let mut ma = self.latent.ma().to_vec();
        for (id, &v) in self.learned.iter().zip(&theta.0) {
            match *id {
                ParamId::Ar(i) => ar[i] = v,
                ParamId::Ma(i) => ma[i] = v,
            }
        }
        FarimaSpec::new(ar, self.latent.d(), ma, self.latent.sigma_eta())
    }

    /// Reads the learned components back out of a full spec
    /// (the inverse of [`ModelSpec::embed`]).
    pub fn extract(&self, spec: &FarimaSpec) -> ParameterVector {
        let values = self
            .learned
            .iter()
            .map(|id| match *id {
                ParamId::Ar(i) => spec.ar()[i],
                ParamId::Ma(i) => spec.ma()[i],
            })
            .collect();
        ParameterVector(values)
    }

    /// True when the parameter values embed into a valid spec.
    pub fn theta_is_valid(&self, theta: &[f64]) -> bool {
        if theta.len() != self.learned.len() {
            return false;
        }
        self.embed(&ParameterVector(theta.to_vec())).is_ok()
    }

    /// Observation scale s(x) such that Y | X = x ~ N(center(x), s(x)^2),
    /// floored at [`MIN_OBS_SCALE`].
    pub fn obs_scale(&self, x: f64) -> f64 {
        let s = match self.link {
            ObservationLink::Abs => (x / 2.0).abs() * self.obs_noise_sd,
            ObservationLink::ExpHalf => (x / 2.0).exp() * self.obs_noise_sd,
            ObservationLink::Linear => self.obs_noise_sd,
        };
        s.max(MIN_OBS_SCALE)
    }

    fn obs_center(&self, x: f64) -> f64 {
        match self.link {
            ObservationLink::Linear => x,
            _ => 0.0,
        }
    }
}

/// Log-density of the observation y given state x. Never NaN; -inf only
/// when the density is exactly zero (e.g. infinite scale overflow).
pub fn obs_log_density(model: &ModelSpec, y: f64, x: f64) -> f64 {
    let s = model.obs_scale(x);
    if !s.is_finite() {
        return f64::NEG_INFINITY;
    }
    normal_log_pdf(y, model.obs_center(x), s)
}

/// Draws an observation from the observation law at state x.
pub fn sample_observation<R: Rng + ?Sized>(model: &ModelSpec, x: f64, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    model.obs_center(x) + model.obs_scale(x) * z
}

/// Conditional law of the next state given the history under parameters
/// theta, honoring the model's truncation setting.
pub fn transition_law(model: &ModelSpec, history: &[f64], theta: &ParameterVector) -> Result<ConditionalLaw> {
    let spec = model.embed(theta)?;
    fracproc::conditional_law(&spec, history, model.truncation())
}

/// Log-density of a proposed next state under the transition law.
pub fn transition_log_density(
    model: &ModelSpec,
    x_new: f64,
    history: &[f64],
    theta: &ParameterVector,
) -> Result<f64> {
    let law = transition_law(model, history, theta)?;
    Ok(normal_log_pdf(x_new, law.mean, law.sd))
}

/// Samples the next state from the transition law.
pub fn sample_transition<R: Rng + ?Sized>(
    model: &ModelSpec,
    history: &[f64],
    theta: &ParameterVector,
    rng: &mut R,
) -> Result<f64> {
    let law = transition_law(model, history, theta)?;
    Ok(fracproc::sample_law(&law, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::LN_2PI;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn abs_model() -> ModelSpec {
        let latent = FarimaSpec::new(vec![0.8], 0.3, vec![], 1.0).unwrap();
        ModelSpec::with_known_params(latent, ObservationLink::Abs, 1.0).unwrap()
    }

    #[test]
    fn obs_density_standard_normal_cases() {
        // abs link at x = 2: scale |2/2| = 1, y = 0 sits at the mode
        let m = abs_model();
        let v = obs_log_density(&m, 0.0, 2.0);
        assert!((v - (-0.5 * LN_2PI)).abs() < 1e-12, "{v}");
        assert!((v - (-0.9189385332046727)).abs() < 1e-10);

        // exp-half link at x = 0: exp(0) = 1
        let latent = FarimaSpec::new(vec![], 0.2, vec![], 1.0).unwrap();
        let m = ModelSpec::with_known_params(latent, ObservationLink::ExpHalf, 1.0).unwrap();
        let v = obs_log_density(&m, 0.0, 0.0);
        assert!((v - (-0.5 * LN_2PI)).abs() < 1e-12);
    }

    #[test]
    fn obs_density_floored_scale_at_zero_state() {
        let m = abs_model();
        let v = obs_log_density(&m, 1.0, 0.0);
        let s = MIN_OBS_SCALE;
        let expect = -0.5 * LN_2PI - s.ln() - 0.5 / (s * s);
        assert!((v - expect).abs() < 1e-6 * expect.abs(), "{v} vs {expect}");
        assert!(v.is_finite());
    }

    #[test]
    fn obs_density_never_nan() {
        let m = abs_model();
        for &x in &[0.0, -0.0, 1e-300, 1e300, -1e300, 800.0] {
            let v = obs_log_density(&m, 0.5, x);
            assert!(!v.is_nan(), "x={x}");
        }
        let latent = FarimaSpec::new(vec![], 0.2, vec![], 1.0).unwrap();
        let m = ModelSpec::with_known_params(latent, ObservationLink::ExpHalf, 1.0).unwrap();
        // exp(x/2) overflows: density 0, log -inf, not NaN
        let v = obs_log_density(&m, 0.5, 1500.0);
        assert!(v == f64::NEG_INFINITY || v.is_finite());
        assert!(!obs_log_density(&m, 0.5, -1500.0).is_nan());
    }

    #[test]
    fn obs_density_integrates_to_one() {
        // Simpson quadrature over y at fixed x
        let m = abs_model();
        for &x in &[2.0, 0.7, -1.3] {
            let s = m.obs_scale(x);
            let (lo, hi) = (-8.0 * s, 8.0 * s);
            let n = 20_000;
            let h = (hi - lo) / n as f64;
            let mut acc = 0.0;
            for i in 0..=n {
                let y = lo + i as f64 * h;
                let w = if i == 0 || i == n {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                acc += w * obs_log_density(&m, y, x).exp();
            }
            let integral = acc * h / 3.0;
            assert!((integral - 1.0).abs() < 1e-6, "x={x}: {integral}");
        }
    }

    #[test]
    fn transition_density_peaks_at_conditional_mean() {
        let m = abs_model();
        let theta = ParameterVector::default();
        let hist = [0.4, -0.2, 1.1];
        let law = transition_law(&m, &hist, &theta).unwrap();
        let at_mean = transition_log_density(&m, law.mean, &hist, &theta).unwrap();
        for &eps in &[1e-3, -1e-3, 0.1, -0.1] {
            let off = transition_log_density(&m, law.mean + eps, &hist, &theta).unwrap();
            assert!(off < at_mean, "eps={eps}");
        }
    }

    #[test]
    fn transition_examples_match_conditional_law() {
        // AR(1), phi = 0.8, history [1.0], x_new at the conditional mean
        let latent = FarimaSpec::new(vec![0.8], 0.0, vec![], 1.0).unwrap();
        let m = ModelSpec::with_known_params(latent, ObservationLink::Abs, 1.0).unwrap();
        let v = transition_log_density(&m, 0.8, &[1.0], &ParameterVector::default()).unwrap();
        assert!((v - (-0.5 * LN_2PI)).abs() < 1e-12);

        // d = 0.3 pure fractional, history [1.0]: mean 0.3
        let latent = FarimaSpec::new(vec![], 0.3, vec![], 1.0).unwrap();
        let m = ModelSpec::with_known_params(latent, ObservationLink::Abs, 1.0).unwrap();
        let v = transition_log_density(&m, 0.3, &[1.0], &ParameterVector::default()).unwrap();
        assert!((v - (-0.5 * LN_2PI)).abs() < 1e-12);

        // empty history: stationary N(0, gamma0)
        let g0 = fracproc::stationary_variance(m.latent()).unwrap();
        let v = transition_log_density(&m, 0.0, &[], &ParameterVector::default()).unwrap();
        assert!((v - (-0.5 * LN_2PI - 0.5 * g0.ln())).abs() < 1e-12);
    }

    #[test]
    fn parameter_mask_round_trip() {
        let latent = FarimaSpec::new(vec![0.5, 0.1], 0.2, vec![0.3], 1.0).unwrap();
        let m = ModelSpec::new(
            latent,
            vec![ParamId::Ar(1), ParamId::Ma(0)],
            ObservationLink::ExpHalf,
            1.0,
        )
        .unwrap();
        let theta = ParameterVector(vec![-0.2, 0.45]);
        let spec = m.embed(&theta).unwrap();
        assert_eq!(spec.ar(), &[0.5, -0.2]);
        assert_eq!(spec.ma(), &[0.45]);
        assert_eq!(m.extract(&spec), theta);
    }

    #[test]
    fn embed_rejects_invalid_theta() {
        let latent = FarimaSpec::new(vec![0.5], 0.2, vec![], 1.0).unwrap();
        let m = ModelSpec::new(latent, vec![ParamId::Ar(0)], ObservationLink::Abs, 1.0).unwrap();
        assert!(m.embed(&ParameterVector(vec![1.2])).is_err());
        assert!(!m.theta_is_valid(&[1.2]));
        assert!(m.theta_is_valid(&[0.95]));
        assert!(m.embed(&ParameterVector(vec![0.1, 0.1])).is_err());
    }

    #[test]
    fn learned_mask_validation() {
        let latent = FarimaSpec::new(vec![0.5], 0.2, vec![], 1.0).unwrap();
        assert!(ModelSpec::new(latent.clone(), vec![ParamId::Ma(0)], ObservationLink::Abs, 1.0).is_err());
        assert!(ModelSpec::new(
            latent.clone(),
            vec![ParamId::Ar(0), ParamId::Ar(0)],
            ObservationLink::Abs,
            1.0
        )
        .is_err());
        assert!(ModelSpec::new(latent, vec![], ObservationLink::Abs, 0.0).is_err());
    }

    #[test]
    fn sample_transition_moments_and_determinism() {
        let m = abs_model();
        let theta = ParameterVector::default();
        for hist in [&[][..], &[1.0][..], &[0.5, -0.3, 0.9][..]] {
            let law = transition_law(&m, hist, &theta).unwrap();
            let mut rng = ChaCha12Rng::seed_from_u64(9);
            let n = 100_000;
            let mut acc = 0.0;
            for _ in 0..n {
                acc += sample_transition(&m, hist, &theta, &mut rng).unwrap();
            }
            let mean = acc / n as f64;
            let se = law.sd / (n as f64).sqrt();
            assert!((mean - law.mean).abs() < 3.0 * se, "hist={hist:?}: {mean} vs {}", law.mean);
        }
        let mut r1 = ChaCha12Rng::seed_from_u64(4);
        let mut r2 = ChaCha12Rng::seed_from_u64(4);
        let a = sample_transition(&m, &[1.0], &theta, &mut r1).unwrap();
        let b = sample_transition(&m, &[1.0], &theta, &mut r2).unwrap();
        assert_eq!(a, b);
    }
}
