//! Small numeric helpers shared across modules.

pub const LN_2PI: f64 = 1.8378770664093453;

/// Log-density of N(mean, sd^2) at x.
#[inline]
pub fn normal_log_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * LN_2PI - sd.ln() - 0.5 * z * z
}

/// Neumaier-compensated sum; order-insensitive to ~1e-12 relative.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Quantile of a weighted sample: smallest x with cumulative weight >= q.
/// Weights must be normalized; q in [0, 1].
pub fn weighted_quantile(values: &[f64], weights: &[f64], q: f64) -> f64 {
    debug_assert_eq!(values.len(), weights.len());
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_unstable_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut cum = 0.0;
    for &i in &idx {
        cum += weights[i];
        if cum >= q {
            return values[i];
        }
    }
    values[*idx.last().expect("non-empty sample")]
}

/// Quantile of an unweighted sample by order statistic (sorted copy).
pub fn sample_quantile(values: &[f64], q: f64) -> f64 {
    let mut xs = values.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    let rank = ((q * xs.len() as f64).ceil() as usize).clamp(1, xs.len());
    xs[rank - 1]
}

/// log(sum(exp(x_i))) with max-subtraction.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let s = kahan_sum(xs.iter().map(|&x| (x - max).exp()));
    max + s.ln()
}

/// Sample autocorrelation function at lags 0..=max_lag (acf[0] = 1).
pub fn sample_acf(xs: &[f64], max_lag: usize) -> Option<Vec<f64>> {
    let n = xs.len();
    if n == 0 || max_lag >= n {
        return None;
    }
    let mean = kahan_sum(xs.iter().cloned()) / n as f64;
    let var = kahan_sum(xs.iter().map(|&x| (x - mean) * (x - mean)));
    if var <= 0.0 {
        return None;
    }
    let mut acf = Vec::with_capacity(max_lag + 1);
    for k in 0..=max_lag {
        let cov = kahan_sum((0..n - k).map(|t| (xs[t] - mean) * (xs[t + k] - mean)));
        acf.push(cov / var);
    }
    Some(acf)
}
