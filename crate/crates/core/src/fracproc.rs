//! Fractional ARIMA mathematics.
//!
//! A fractional ARIMA(p, d, q) process satisfies
//!
//! ```text
//!   phi(B) (1 - B)^d X_t = theta(B) eta_t,   eta_t ~ N(0, sigma_eta^2)
//! ```
//!
//! with `d` in (-1/2, 1/2). For d in (0, 1/2) the autocorrelations decay
//! hyperbolically, rho(k) ~ c k^(2d-1) (long memory, Hurst index
//! H = d + 1/2); for d in (-1/2, 0) the process is antipersistent.
//!
//! This module provides the power-series weights of `(1-B)^{±d}`, the
//! AR(infinity) representation (which yields the Gaussian conditional law
//! of `X_t` given its past — the transition density the filter weights
//! need), exact autocovariances for the pure fractional case, a seedable
//! path simulator, and the Durbin-Levinson finite-past law used as an
//! exact oracle for the truncated conditional law.

use crate::error::{Error, Result};
use crate::util::kahan_sum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

/// Truncation of the psi-weight convolution used by [`simulate`].
const SIM_PSI_TRUNCATION: usize = 1000;

/// Aggregate truncation cap for ARMA impulse weights in stationary-variance
/// sums; weights decay geometrically so this is only binding for AR roots
/// very close to the unit circle.
const ARMA_WEIGHT_CAP: usize = 2048;

/// Parameters of a fractional ARIMA(p, d, q) law.
#[derive(Debug, Clone, PartialEq)]
pub struct FarimaSpec {
    ar: Vec<f64>,
    d: f64,
    ma: Vec<f64>,
    sigma_eta: f64,
}

impl FarimaSpec {
    /// Builds a spec, enforcing stationarity (AR roots outside the unit
    /// circle), invertibility (MA roots outside the unit circle),
    /// d in (-1/2, 1/2), and sigma_eta > 0.
    pub fn new(ar: Vec<f64>, d: f64, ma: Vec<f64>, sigma_eta: f64) -> Result<Self> {
        if !(d > -0.5 && d < 0.5) {
            return Err(Error::Domain(format!(
                "memory parameter d={d} outside the stationary range (-0.5, 0.5)"
            )));
        }
        if !(sigma_eta > 0.0) || !sigma_eta.is_finite() {
            return Err(Error::Domain(format!(
                "innovation sd sigma_eta={sigma_eta} must be positive and finite"
            )));
        }
        if !ar_coeffs_stationary(&ar) {
            return Err(Error::Domain(format!(
                "AR coefficients {ar:?} have a root inside or on the unit circle"
            )));
        }
        let neg_ma: Vec<f64> = ma.iter().map(|&t| -t).collect();
        if !ar_coeffs_stationary(&neg_ma) {
            return Err(Error::Domain(format!(
                "MA coefficients {ma:?} have a root inside or on the unit circle"
            )));
        }
        Ok(Self { ar, d, ma, sigma_eta })
    }

    /// White-noise spec (p = q = 0, d = 0).
    pub fn white_noise(sigma_eta: f64) -> Result<Self> {
        Self::new(Vec::new(), 0.0, Vec::new(), sigma_eta)
    }

    pub fn ar(&self) -> &[f64] {
        &self.ar
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn ma(&self) -> &[f64] {
        &self.ma
    }

    pub fn sigma_eta(&self) -> f64 {
        self.sigma_eta
    }

    /// Hurst index H = d + 1/2.
    pub fn hurst(&self) -> f64 {
        self.d + 0.5
    }
}

/// Stationarity test for 1 - a_1 z - ... - a_m z^m: all roots strictly
/// outside the unit circle. Uses the reflection-coefficient step-down
/// recursion, so no root finding is required.
pub(crate) fn ar_coeffs_stationary(a: &[f64]) -> bool {
    let mut c: Vec<f64> = a.to_vec();
    while c.last() == Some(&0.0) {
        c.pop();
    }
    if c.iter().any(|v| !v.is_finite()) {
        return false;
    }
    while let Some(&k) = c.last() {
        if k.abs() >= 1.0 {
            return false;
        }
        let m = c.len();
        if m == 1 {
            return true;
        }
        let denom = 1.0 - k * k;
        let prev: Vec<f64> = (0..m - 1).map(|j| (c[j] + k * c[m - 2 - j]) / denom).collect();
        c = prev;
    }
    true
}

/// The kind of power-series expansion a [`WeightSequence`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    /// pi-weights of (1-B)^d (fractional differencing).
    FracDiff,
    /// psi-weights of (1-B)^{-d} (fractional integration).
    FracInt,
    /// AR(infinity) coefficients of phi(z) (1-z)^d / theta(z).
    ArInfinity,
}

/// A truncated power-series coefficient sequence c_0..c_L with c_0 = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSequence {
    pub kind: WeightKind,
    pub coeffs: Vec<f64>,
}

impl WeightSequence {
    /// Truncation order L (the sequence holds L + 1 coefficients).
    pub fn truncation(&self) -> usize {
        self.coeffs.len() - 1
    }
}

/// pi-weights of (1-B)^d, computed by the stable multiplicative recurrence
/// pi_0 = 1, pi_k = pi_{k-1} (k - 1 - d) / k.
///
/// d must lie in (-1/2, 1/2); the values 0 and 1 are also accepted so the
/// identity and plain first difference are expressible.
pub fn frac_diff_coeffs(d: f64, truncation: usize) -> Result<WeightSequence> {
    if !((d > -0.5 && d < 0.5) || d == 1.0) {
        return Err(Error::Domain(format!(
            "frac_diff_coeffs: d={d} outside (-0.5, 0.5) and not the test value 1"
        )));
    }
    Ok(WeightSequence { kind: WeightKind::FracDiff, coeffs: pi_weights(d, truncation) })
}

/// psi-weights of (1-B)^{-d}; the formal power-series inverse of the
/// pi-weights, i.e. `frac_diff_coeffs(-d, L)`.
pub fn frac_int_coeffs(d: f64, truncation: usize) -> Result<WeightSequence> {
    if !(d > -0.5 && d < 0.5) {
        return Err(Error::Domain(format!("frac_int_coeffs: d={d} outside (-0.5, 0.5)")));
    }
    Ok(WeightSequence { kind: WeightKind::FracInt, coeffs: pi_weights(-d, truncation) })
}

fn pi_weights(d: f64, truncation: usize) -> Vec<f64> {
    let mut c = Vec::with_capacity(truncation + 1);
    c.push(1.0);
    for k in 1..=truncation {
        let kf = k as f64;
        let next = c[k - 1] * (kf - 1.0 - d) / kf;
        c.push(next);
    }
    c
}

/// Extends a pi-weight buffer in place to `truncation + 1` coefficients.
/// Used by the filter to grow its cached weights as time advances.
pub(crate) fn extend_pi_weights(buf: &mut Vec<f64>, d: f64, truncation: usize) {
    if buf.is_empty() {
        buf.push(1.0);
    }
    for k in buf.len()..=truncation {
        let kf = k as f64;
        let next = buf[k - 1] * (kf - 1.0 - d) / kf;
        buf.push(next);
    }
}

/// Coefficients of the AR(infinity) representation
/// phi(z) (1-z)^d / theta(z) = sum c_k z^k, truncated at L.
///
/// The process satisfies X_t = -sum_{k>=1} c_k X_{t-k} + eta_t.
pub fn ar_infinity_coeffs(spec: &FarimaSpec, truncation: usize) -> Result<WeightSequence> {
    let pi = pi_weights(spec.d, truncation);
    let mut coeffs = Vec::with_capacity(truncation + 1);
    for k in 0..=truncation {
        // numerator a(z) = phi(z) pi(z) with phi(z) = 1 - sum phi_j z^j
        let mut a_k = pi[k];
        for (j, &phi_j) in spec.ar.iter().enumerate() {
            if j + 1 > k {
                break;
            }
            a_k -= phi_j * pi[k - j - 1];
        }
        // divide by theta(z) = 1 + sum theta_j z^j
        let mut c_k = a_k;
        for (j, &th_j) in spec.ma.iter().enumerate() {
            if j + 1 > k {
                break;
            }
            c_k -= th_j * coeffs[k - j - 1];
        }
        coeffs.push(c_k);
    }
    Ok(WeightSequence { kind: WeightKind::ArInfinity, coeffs })
}

/// Autocovariances gamma(0..K) of a pure fractional ARIMA(0, d, 0) process:
/// gamma(0) = sigma^2 Gamma(1-2d) / Gamma(1-d)^2,
/// gamma(k) = gamma(k-1) (k-1+d) / (k-d).
///
/// Gamma factors are evaluated through log-gamma so d near ±1/2 does not
/// overflow.
pub fn acvf_arfima_0d0(d: f64, sigma_eta: f64, max_lag: usize) -> Result<Vec<f64>> {
    if !(d > -0.5 && d < 0.5) {
        return Err(Error::Domain(format!("acvf_arfima_0d0: d={d} outside (-0.5, 0.5)")));
    }
    if !(sigma_eta > 0.0) {
        return Err(Error::Domain("acvf_arfima_0d0: sigma_eta must be > 0".into()));
    }
    let gamma0 = sigma_eta * sigma_eta * (ln_gamma(1.0 - 2.0 * d) - 2.0 * ln_gamma(1.0 - d)).exp();
    let mut acvf = Vec::with_capacity(max_lag + 1);
    acvf.push(gamma0);
    for k in 1..=max_lag {
        let kf = k as f64;
        let next = acvf[k - 1] * (kf - 1.0 + d) / (kf - d);
        acvf.push(next);
    }
    Ok(acvf)
}

/// Impulse-response weights a_0..a_L of the ARMA part theta(z) / phi(z)
/// (unit innovation). Stops early once the weights have decayed below
/// `tol` in absolute value.
fn arma_impulse_weights(ar: &[f64], ma: &[f64], tol: f64, cap: usize) -> Vec<f64> {
    let mut a = vec![1.0];
    // complex AR roots make individual weights oscillate through zero, so
    // require a whole trailing window below tolerance before stopping
    let window = ar.len() + ma.len() + 2;
    for k in 1..=cap {
        let mut v = if k <= ma.len() { ma[k - 1] } else { 0.0 };
        for (j, &phi_j) in ar.iter().enumerate() {
            if j + 1 > k {
                break;
            }
            v += phi_j * a[k - j - 1];
        }
        a.push(v);
        if k >= window && a[k + 1 - window..].iter().all(|w| w.abs() < tol) {
            break;
        }
    }
    a
}

/// Stationary variance gamma_X(0) of the full fractional ARIMA process.
///
/// Writes X as the ARMA filter applied to the pure fractional process U
/// (with exact autocovariances from [`acvf_arfima_0d0`]) and sums
/// gamma_X(0) = sum_{j,k} a_j a_k gamma_U(|j-k|). The ARMA weights decay
/// geometrically, so the truncation error does too — unlike a direct sum
/// of squared MA(infinity) weights, whose hyperbolic tail converges far
/// too slowly near |d| = 1/2.
pub fn stationary_variance(spec: &FarimaSpec) -> Result<f64> {
    let gamma_u = |lags: usize| acvf_arfima_0d0_or_wn(spec.d, spec.sigma_eta, lags);
    if spec.ar.is_empty() && spec.ma.is_empty() {
        return Ok(gamma_u(0)?[0]);
    }
    let a = arma_impulse_weights(&spec.ar, &spec.ma, 1e-12, ARMA_WEIGHT_CAP);
    let gu = gamma_u(a.len() - 1)?;
    let mut total = 0.0;
    for lag in 0..a.len() {
        let r = kahan_sum((0..a.len() - lag).map(|j| a[j] * a[j + lag]));
        total += if lag == 0 { r * gu[0] } else { 2.0 * r * gu[lag] };
    }
    if !(total > 0.0) {
        return Err(Error::DegenerateVariance(format!(
            "stationary variance evaluated to {total}"
        )));
    }
    Ok(total)
}

fn acvf_arfima_0d0_or_wn(d: f64, sigma_eta: f64, max_lag: usize) -> Result<Vec<f64>> {
    if d == 0.0 {
        let mut v = vec![0.0; max_lag + 1];
        v[0] = sigma_eta * sigma_eta;
        Ok(v)
    } else {
        acvf_arfima_0d0(d, sigma_eta, max_lag)
    }
}

/// Simulates a path x_1..x_T of the fractional ARIMA process.
///
/// The ARMA(p, q) recursion is driven by iid N(0, sigma_eta^2) innovations
/// and then fractionally integrated through truncated psi-weights; a
/// burn-in of max(2000, 10 L) samples is discarded so every retained value
/// sees a full convolution window. Deterministic given the seed.
pub fn simulate(spec: &FarimaSpec, len: usize, seed: u64) -> Vec<f64> {
    simulate_with_truncation(spec, len, SIM_PSI_TRUNCATION, seed)
}

/// [`simulate`] with an explicit psi-weight truncation.
pub fn simulate_with_truncation(spec: &FarimaSpec, len: usize, truncation: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let burn_in = 2000.max(10 * truncation);
    let total = burn_in + len;
    let p = spec.ar.len();
    let q = spec.ma.len();

    // ARMA(p, q) recursion, zero-initialized; burn-in washes the start out.
    let mut eta = Vec::with_capacity(total);
    let mut w = Vec::with_capacity(total);
    for t in 0..total {
        let e: f64 = StandardNormal.sample(&mut rng);
        eta.push(e * spec.sigma_eta);
        let mut v = eta[t];
        for j in 0..q.min(t) {
            v += spec.ma[j] * eta[t - j - 1];
        }
        for j in 0..p.min(t) {
            v += spec.ar[j] * w[t - j - 1];
        }
        w.push(v);
    }

    if spec.d == 0.0 {
        return w[burn_in..].to_vec();
    }

    let psi = pi_weights(-spec.d, truncation);
    let mut x = Vec::with_capacity(len);
    for t in burn_in..total {
        let window = truncation.min(t);
        let acc = kahan_sum((0..=window).map(|k| psi[k] * w[t - k]));
        x.push(acc);
    }
    x
}

/// Gaussian conditional law of X_t given a (possibly truncated) history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalLaw {
    pub mean: f64,
    pub sd: f64,
}

/// How much of the available history the conditional law conditions on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    /// Use the entire history (the default; cost grows with t).
    Full,
    /// Use only the most recent L values.
    Window(usize),
}

impl Truncation {
    fn effective(&self, history_len: usize) -> usize {
        match *self {
            Truncation::Full => history_len,
            Truncation::Window(l) => l.min(history_len),
        }
    }
}

/// Conditional law of X_t given history x_1..x_{t-1} (most recent last).
///
/// mean = -sum_{k=1}^{L} c_k x_{t-k} with c the AR(infinity) coefficients;
/// sd = sigma_eta (the exact innovation sd; the finite-past approximation
/// error is bounded in tests by [`durbin_levinson_law`]). An empty history
/// yields the stationary law N(0, gamma(0)).
pub fn conditional_law(spec: &FarimaSpec, history: &[f64], truncation: Truncation) -> Result<ConditionalLaw> {
    if history.is_empty() {
        return Ok(ConditionalLaw { mean: 0.0, sd: stationary_variance(spec)?.sqrt() });
    }
    let window = truncation.effective(history.len());
    let coeffs = ar_infinity_coeffs(spec, window)?;
    let t = history.len();
    let mean = -kahan_sum((1..=window).map(|k| coeffs.coeffs[k] * history[t - k]));
    Ok(ConditionalLaw { mean, sd: spec.sigma_eta })
}

/// Conditional mean given a history, writing the AR(infinity) coefficients
/// into a caller-provided scratch buffer. `pi` must hold the pi-weights of
/// the spec's d with length > window. Hot path for the filter: avoids
/// per-call allocation.
pub(crate) fn conditional_mean_with_scratch(
    spec: &FarimaSpec,
    history: &[f64],
    truncation: Truncation,
    pi: &[f64],
    scratch: &mut Vec<f64>,
) -> f64 {
    let t = history.len();
    let window = truncation.effective(t);
    debug_assert!(pi.len() > window);
    if spec.d == 0.0 && spec.ma.is_empty() {
        // plain AR(p): the pi tail is exactly zero, only p terms survive
        return kahan_sum(
            spec.ar.iter().enumerate().take(window).map(|(j, &phi_j)| phi_j * history[t - j - 1]),
        );
    }
    if spec.ma.is_empty() {
        // c_k = pi_k - sum_j phi_j pi_{k-j}; no division step needed
        let mut mean = -kahan_sum((1..=window).map(|k| pi[k] * history[t - k]));
        for (j, &phi_j) in spec.ar.iter().enumerate() {
            let shift = j + 1;
            if shift > window {
                break;
            }
            mean += phi_j * kahan_sum((shift..=window).map(|k| pi[k - shift] * history[t - k]));
        }
        return mean;
    }
    scratch.clear();
    scratch.push(1.0);
    for k in 1..=window {
        let mut a_k = pi[k];
        for (j, &phi_j) in spec.ar.iter().enumerate() {
            if j + 1 > k {
                break;
            }
            a_k -= phi_j * pi[k - j - 1];
        }
        let mut c_k = a_k;
        for (j, &th_j) in spec.ma.iter().enumerate() {
            if j + 1 > k {
                break;
            }
            c_k -= th_j * scratch[k - j - 1];
        }
        scratch.push(c_k);
    }
    -kahan_sum((1..=window).map(|k| scratch[k] * history[t - k]))
}

/// Exact Gaussian conditional law of a stationary process given a finite
/// past, from the Durbin-Levinson recursion on a Toeplitz autocovariance.
///
/// `acvf` must cover lags 0..=history.len(). This is the finite-past
/// oracle used to validate [`conditional_law`].
pub fn durbin_levinson_law(acvf: &[f64], history: &[f64]) -> Result<ConditionalLaw> {
    let n = history.len();
    if acvf.len() < n + 1 {
        return Err(Error::Domain(format!(
            "durbin_levinson_law: need acvf to lag {n}, got {}",
            acvf.len().saturating_sub(1)
        )));
    }
    if !(acvf[0] > 0.0) {
        return Err(Error::NotPositiveDefinite { order: 0 });
    }
    if n == 0 {
        return Ok(ConditionalLaw { mean: 0.0, sd: acvf[0].sqrt() });
    }
    // phi[j] = coefficient on x_{t-(j+1)} in the best linear predictor.
    let mut phi = vec![0.0; n];
    let mut prev = vec![0.0; n];
    let mut v = acvf[0];
    for m in 1..=n {
        let mut k = acvf[m];
        for j in 1..m {
            k -= prev[j - 1] * acvf[m - j];
        }
        k /= v;
        if !k.is_finite() || k.abs() >= 1.0 {
            return Err(Error::NotPositiveDefinite { order: m });
        }
        phi[m - 1] = k;
        for j in 1..m {
            phi[j - 1] = prev[j - 1] - k * prev[m - 1 - j];
        }
        v *= 1.0 - k * k;
        if !(v > 0.0) {
            return Err(Error::NotPositiveDefinite { order: m });
        }
        prev[..m].copy_from_slice(&phi[..m]);
    }
    let mean = kahan_sum((1..=n).map(|j| phi[j - 1] * history[n - j]));
    Ok(ConditionalLaw { mean, sd: v.sqrt() })
}

/// Draws from a [`ConditionalLaw`].
pub fn sample_law<R: Rng + ?Sized>(law: &ConditionalLaw, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    law.mean + law.sd * z
}
