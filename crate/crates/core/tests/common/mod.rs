//! Shared oracles for the integration and acceptance suites. Everything
//! here is independent of the library's filtering path.

/// Exact Kalman filter for the scalar linear-Gaussian benchmark
///   x_t = phi x_{t-1} + eta_t,  eta ~ N(0, sigma_eta^2)
///   y_t = x_t + eps_t,          eps ~ N(0, obs_sd^2)
/// started from the stationary law. Returns the filtered means E[x_t|y_{1:t}].
pub fn scalar_kalman_ar1(phi: f64, sigma_eta: f64, obs_sd: f64, ys: &[f64]) -> Vec<f64> {
    let q = sigma_eta * sigma_eta;
    let r = obs_sd * obs_sd;
    let mut m = 0.0;
    let mut p = q / (1.0 - phi * phi);
    let mut out = Vec::with_capacity(ys.len());
    for (t, &y) in ys.iter().enumerate() {
        let (m_pred, p_pred) = if t == 0 { (m, p) } else { (phi * m, phi * phi * p + q) };
        let f = p_pred + r;
        let k = p_pred / f;
        m = m_pred + k * (y - m_pred);
        p = p_pred * (1.0 - k);
        out.push(m);
    }
    out
}

/// Exact marginal log-likelihood log p(y_{1:T}) of the same scalar model,
/// from the Kalman prediction-error decomposition.
#[allow(dead_code)]
pub fn scalar_kalman_ar1_log_likelihood(phi: f64, sigma_eta: f64, obs_sd: f64, ys: &[f64]) -> f64 {
    let q = sigma_eta * sigma_eta;
    let r = obs_sd * obs_sd;
    let mut m = 0.0;
    let mut p = q / (1.0 - phi * phi);
    let mut ll = 0.0;
    for (t, &y) in ys.iter().enumerate() {
        let (m_pred, p_pred) = if t == 0 { (m, p) } else { (phi * m, phi * phi * p + q) };
        let f = p_pred + r;
        let resid = y - m_pred;
        ll += -0.5 * (2.0 * std::f64::consts::PI * f).ln() - 0.5 * resid * resid / f;
        let k = p_pred / f;
        m = m_pred + k * resid;
        p = p_pred * (1.0 - k);
    }
    ll
}

/// Sample variance (unbiased) of a slice.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}
