//! Memory-parameter estimation from the periodogram.
//!
//! The log-periodogram regression estimates d from the low-frequency
//! spectral slope: regress log I(lambda_j) on -log(4 sin^2(lambda_j / 2))
//! over the first m Fourier frequencies. The slope is d_hat and the
//! asymptotic standard error is pi / sqrt(24 m).

use crate::error::{Error, Result};
use crate::util::kahan_sum;
use rustfft::{num_complex::Complex, FftPlanner};

/// Floor applied to squared returns before taking logs in
/// [`volatility_proxy`], so exact zeros stay finite.
pub const PROXY_FLOOR: f64 = 1e-10;

/// Zero periodogram ordinates are replaced by this before the log
/// transform (they only arise for degenerate input such as a constant
/// series).
const ORDINATE_FLOOR: f64 = 1e-300;

/// A memory-parameter estimate with its bandwidth and asymptotic error.
#[derive(Debug, Clone, PartialEq)]
pub struct GphEstimate {
    pub d_hat: f64,
    pub std_error: f64,
    pub bandwidth: usize,
    pub n: usize,
}

/// Periodogram I(lambda_j) = |sum_t x_t e^{-i t lambda_j}|^2 / (2 pi n) at
/// the Fourier frequencies lambda_j = 2 pi j / n, j = 1..floor((n-1)/2).
/// The series mean is removed first.
pub fn periodogram(series: &[f64]) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 8 {
        return Err(Error::Domain(format!("periodogram needs n >= 8, got {n}")));
    }
    let mean = kahan_sum(series.iter().cloned()) / n as f64;
    let mut buf: Vec<Complex<f64>> =
        series.iter().map(|&x| Complex::new(x - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / (2.0 * std::f64::consts::PI * n as f64);
    Ok((1..=(n - 1) / 2).map(|j| buf[j].norm_sqr() * scale).collect())
}

/// Log-periodogram regression over the first m = floor(n^bandwidth_exponent)
/// Fourier frequencies. Scale-invariant: multiplying the series by c > 0
/// shifts the log-periodogram by a constant and leaves the slope unchanged.
pub fn gph(series: &[f64], bandwidth_exponent: f64) -> Result<GphEstimate> {
    let n = series.len();
    if n < 64 {
        return Err(Error::Domain(format!("gph needs n >= 64, got {n}")));
    }
    if !(bandwidth_exponent > 0.0 && bandwidth_exponent < 1.0) {
        return Err(Error::Domain(format!(
            "bandwidth exponent {bandwidth_exponent} outside (0, 1)"
        )));
    }
    let ordinates = periodogram(series)?;
    let m = ((n as f64).powf(bandwidth_exponent).floor() as usize).clamp(2, ordinates.len());

    let mut regressor = Vec::with_capacity(m);
    let mut response = Vec::with_capacity(m);
    for j in 1..=m {
        let lambda = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
        let s = (lambda / 2.0).sin();
        regressor.push(-(4.0 * s * s).ln());
        response.push(ordinates[j - 1].max(ORDINATE_FLOOR).ln());
    }
    let mf = m as f64;
    let rx = kahan_sum(regressor.iter().cloned()) / mf;
    let ry = kahan_sum(response.iter().cloned()) / mf;
    let sxx = kahan_sum(regressor.iter().map(|&x| (x - rx) * (x - rx)));
    let sxy = kahan_sum(regressor.iter().zip(&response).map(|(&x, &y)| (x - rx) * (y - ry)));
    let d_hat = sxy / sxx;
    let std_error = std::f64::consts::PI / (24.0 * mf).sqrt();
    Ok(GphEstimate { d_hat, std_error, bandwidth: m, n })
}

/// LMSV volatility proxy: log(y_t^2 + floor), mean-removed. Makes the
/// latent log-volatility additive so the spectral slope of the latent
/// process shows up in the proxy.
pub fn volatility_proxy(returns: &[f64]) -> Result<Vec<f64>> {
    let n = returns.len();
    if n < 64 {
        return Err(Error::Domain(format!("volatility_proxy needs n >= 64, got {n}")));
    }
    let mut out: Vec<f64> = returns.iter().map(|&y| (y * y + PROXY_FLOOR).ln()).collect();
    let mean = kahan_sum(out.iter().cloned()) / n as f64;
    for v in &mut out {
        *v -= mean;
    }
    Ok(out)
}
