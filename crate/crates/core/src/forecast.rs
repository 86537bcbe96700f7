//! Rolling one-step prediction and residual diagnostics.
//!
//! Forecasts are bootstrap draws from the particle predictive law: pick a
//! particle by weight, advance its trajectory through the transition law,
//! then draw an observation. Rolling forecasts assimilate each realized
//! value before predicting the next step (teacher forcing).

use crate::error::{Error, Result};
use crate::sisr::{FilterSettings, FilterSnapshot, ParticleCloud, ThetaPrior};
use crate::ssm::{self, ModelSpec};
use crate::util::{kahan_sum, sample_acf, sample_quantile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Bootstrap sample size behind the prediction intervals.
pub const BOOTSTRAP_DRAWS: usize = 2000;

/// A one-step-ahead prediction. The interval brackets the predictive
/// distribution of Y; for symmetric zero-mean observation laws the point
/// forecast sits near zero and need not lie inside (lo, hi) conceptually,
/// though lo < hi always.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastResult {
    pub horizon: usize,
    pub point_forecast: f64,
    pub lo: f64,
    pub hi: f64,
    pub realized: Option<f64>,
}

/// Standardized residuals and their sample autocorrelations.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualDiagnostics {
    pub residuals: Vec<f64>,
    /// `acf[0]` = 1, lags 0..=max_lag.
    pub acf: Vec<f64>,
    pub ljung_box_stat: Option<f64>,
}

/// Draws from the one-step predictive law of Y_{t+1} given the current
/// cloud: particle index ~ W, X_{t+1} from its transition law, Y from the
/// observation law.
pub fn predictive_draws<R: Rng + ?Sized>(
    cloud: &ParticleCloud,
    model: &ModelSpec,
    n_draws: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let weights = cloud.norm_weights();
    let mut cum = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for &w in weights {
        acc += w;
        cum.push(acc);
    }
    let mut out = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        let u: f64 = rng.random();
        let i = cum.partition_point(|&c| c < u).min(weights.len() - 1);
        let x_next = ssm::sample_transition(model, cloud.history(i), cloud.theta(i), rng)?;
        out.push(ssm::sample_observation(model, x_next, rng));
    }
    Ok(out)
}

/// Central interval of a draw sample at the given coverage level.
pub fn bootstrap_interval(draws: &[f64], level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("interval level {level} outside (0, 1)")));
    }
    if draws.len() < 2 {
        return Err(Error::Domain("need at least 2 draws for an interval".into()));
    }
    let tail = (1.0 - level) / 2.0;
    Ok((sample_quantile(draws, tail), sample_quantile(draws, 1.0 - tail)))
}

/// Fits the filter on `data[..split]`, then produces `horizon` successive
/// one-step forecasts with 95% bootstrap intervals, assimilating each
/// realized observation before the next step.
pub fn rolling_forecast(
    model: &ModelSpec,
    prior: &ThetaPrior,
    data: &[f64],
    split: usize,
    horizon: usize,
    settings: &FilterSettings,
    mut rng: ChaCha12Rng,
) -> Result<Vec<ForecastResult>> {
    if split == 0 || split + horizon > data.len() {
        return Err(Error::Domain(format!(
            "split {split} + horizon {horizon} exceeds data length {}",
            data.len()
        )));
    }
    if horizon == 0 {
        return Ok(Vec::new());
    }
    let filter_rng = ChaCha12Rng::from_rng(&mut rng);
    let (_snaps, mut cloud) = crate::sisr::run(model, prior, &data[..split], settings, filter_rng)?;
    let mut out = Vec::with_capacity(horizon);
    for h in 1..=horizon {
        let draws = predictive_draws(&cloud, model, BOOTSTRAP_DRAWS, &mut rng)?;
        let point = kahan_sum(draws.iter().cloned()) / draws.len() as f64;
        let (lo, hi) = bootstrap_interval(&draws, 0.95)?;
        let realized = data[split + h - 1];
        out.push(ForecastResult { horizon: h, point_forecast: point, lo, hi, realized: Some(realized) });
        cloud.step(model, realized, settings)?;
    }
    Ok(out)
}

/// Standardized residuals e_t = y_t / shat_t with shat_t the posterior
/// mean observation scale, plus their sample ACF to `max_lag` and the
/// Ljung-Box statistic over those lags.
pub fn residual_diagnostics(
    snapshots: &[FilterSnapshot],
    data: &[f64],
    max_lag: usize,
) -> Result<ResidualDiagnostics> {
    if snapshots.len() != data.len() {
        return Err(Error::Domain(format!(
            "{} snapshots vs {} observations",
            snapshots.len(),
            data.len()
        )));
    }
    if max_lag >= data.len() {
        return Err(Error::Domain(format!(
            "max_lag {max_lag} must be below the series length {}",
            data.len()
        )));
    }
    let residuals: Vec<f64> = snapshots
        .iter()
        .zip(data)
        .map(|(s, &y)| y / s.obs_scale_mean)
        .collect();
    let acf = sample_acf(&residuals, max_lag)
        .ok_or_else(|| Error::DegenerateVariance("residuals have zero variance".into()))?;
    let n = residuals.len() as f64;
    let ljung_box = if max_lag >= 1 {
        let q = n
            * (n + 2.0)
            * kahan_sum((1..=max_lag).map(|k| acf[k] * acf[k] / (n - k as f64)));
        Some(q)
    } else {
        None
    };
    Ok(ResidualDiagnostics { residuals, acf, ljung_box_stat: ljung_box })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fracproc::{simulate, FarimaSpec};
    use crate::sisr::run;
    use crate::ssm::{sample_observation, ObservationLink};
    use rand::SeedableRng;

    fn known_model(phi: f64, d: f64, sigma_eta: f64, link: ObservationLink) -> ModelSpec {
        let latent = FarimaSpec::new(vec![phi], d, vec![], sigma_eta).unwrap();
        ModelSpec::with_known_params(latent, link, 1.0).unwrap()
    }

    fn observe(model: &ModelSpec, xs: &[f64], seed: u64) -> Vec<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        xs.iter().map(|&x| sample_observation(model, x, &mut rng)).collect()
    }

    #[test]
    fn degenerate_transition_draws_track_the_conditional_mean() {
        // sigma_eta -> 0 makes the transition deterministic, so from x = 1
        // every predictive draw centers on X' = 0.8 with only the additive
        // observation noise around it
        use crate::ssm::ParameterVector;
        let latent = FarimaSpec::new(vec![0.8], 0.0, vec![], 1e-9).unwrap();
        let model = ModelSpec::with_known_params(latent, ObservationLink::Linear, 0.5).unwrap();
        let cloud = ParticleCloud::from_test_parts(
            vec![vec![1.0]; 4],
            vec![ParameterVector::default(); 4],
            vec![0.25; 4],
            31,
        );
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let n = 100_000;
        let draws = predictive_draws(&cloud, &model, n, &mut rng).unwrap();
        let mean = kahan_sum(draws.iter().cloned()) / n as f64;
        let se = 0.5 / (n as f64).sqrt();
        assert!((mean - 0.8).abs() < 3.0 * se, "mean={mean}");
    }

    #[test]
    fn predictive_mean_is_zero_for_symmetric_links() {
        let model = known_model(0.6, 0.2, 1.0, ObservationLink::Abs);
        let settings = FilterSettings::new(300, 1.0).unwrap();
        let spec = model.latent().clone();
        let xs = simulate(&spec, 40, 5);
        let ys = observe(&model, &xs, 6);
        let (_s, cloud) =
            run(&model, &ThetaPrior::none(), &ys, &settings, ChaCha12Rng::seed_from_u64(7)).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let draws = predictive_draws(&cloud, &model, 100_000, &mut rng).unwrap();
        let n = draws.len() as f64;
        let mean = kahan_sum(draws.iter().cloned()) / n;
        let var = kahan_sum(draws.iter().map(|&d| (d - mean) * (d - mean))) / n;
        let se = (var / n).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean={mean} se={se}");
    }

    #[test]
    fn predictive_variance_matches_total_variance_oracle() {
        // hand-built 2-particle cloud with near-deterministic transitions:
        // X' = 0.8 x_i, E[Y | i] = 0, so by the law of total variance
        // Var(Y) = sum_i w_i s(0.8 x_i)^2 with s(x) = |x/2|.
        use crate::ssm::ParameterVector;
        let latent = FarimaSpec::new(vec![0.8], 0.0, vec![], 1e-9).unwrap();
        let model = ModelSpec::with_known_params(latent, ObservationLink::Abs, 1.0).unwrap();
        let cloud = ParticleCloud::from_test_parts(
            vec![vec![1.0], vec![-2.0]],
            vec![ParameterVector::default(); 2],
            vec![0.3, 0.7],
            32,
        );
        // hand arithmetic: 0.3 (0.8/2)^2 + 0.7 (1.6/2)^2 = 0.048 + 0.448
        let oracle_var = 0.496;

        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let draws = predictive_draws(&cloud, &model, 200_000, &mut rng).unwrap();
        let n = draws.len() as f64;
        let mean = kahan_sum(draws.iter().cloned()) / n;
        let var = kahan_sum(draws.iter().map(|&d| (d - mean) * (d - mean))) / n;
        // the mixture has excess kurtosis; a 5x-of-Gaussian-se band is ample
        assert!(
            (var - oracle_var).abs() < 5.0 * oracle_var * (2.0 / n).sqrt(),
            "{var} vs {oracle_var}"
        );
        assert!(mean.abs() < 3.0 * (oracle_var / n).sqrt());
    }

    #[test]
    fn all_weight_on_one_particle_equals_direct_simulation() {
        // a needle-sharp first observation collapses resampling onto a
        // single ancestor, so every slot carries the same (history, theta)
        // and the predictive law is that particle's one-step law.
        // Two-sample Kolmogorov-Smirnov at the 1% level, 1e4 draws each.
        let latent = FarimaSpec::new(vec![0.7], 0.1, vec![], 1.0).unwrap();
        let model = ModelSpec::with_known_params(latent, ObservationLink::Linear, 0.02).unwrap();
        let settings = FilterSettings::new(16, 1.0).unwrap();
        let (_s, cloud) = run(
            &model,
            &ThetaPrior::none(),
            &[0.4],
            &settings,
            ChaCha12Rng::seed_from_u64(14),
        )
        .unwrap();
        let h0 = cloud.history(0).to_vec();
        for i in 1..cloud.n() {
            assert_eq!(cloud.history(i), &h0[..], "resampling did not collapse for this seed");
        }

        let n_draws = 10_000;
        let theta = cloud.theta(0).clone();
        let mut rng_a = ChaCha12Rng::seed_from_u64(15);
        let mut direct = Vec::with_capacity(n_draws);
        for _ in 0..n_draws {
            let x = ssm::sample_transition(&model, &h0, &theta, &mut rng_a).unwrap();
            direct.push(sample_observation(&model, x, &mut rng_a));
        }
        let mut rng_b = ChaCha12Rng::seed_from_u64(16);
        let pred = predictive_draws(&cloud, &model, n_draws, &mut rng_b).unwrap();
        let d = ks_statistic(&direct, &pred);
        // two-sample KS 1% critical value: 1.628 sqrt((n+m)/(n m))
        let crit = 1.628 * ((2.0 * n_draws as f64) / (n_draws as f64 * n_draws as f64)).sqrt();
        assert!(d < crit, "KS d={d} crit={crit}");
    }

    fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
        let mut xa = a.to_vec();
        let mut xb = b.to_vec();
        xa.sort_unstable_by(f64::total_cmp);
        xb.sort_unstable_by(f64::total_cmp);
        let (mut i, mut j) = (0usize, 0usize);
        let mut d: f64 = 0.0;
        while i < xa.len() && j < xb.len() {
            if xa[i] <= xb[j] {
                i += 1;
            } else {
                j += 1;
            }
            let fa = i as f64 / xa.len() as f64;
            let fb = j as f64 / xb.len() as f64;
            d = d.max((fa - fb).abs());
        }
        d
    }

    #[test]
    fn interval_levels_nest() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let draws: Vec<f64> = (0..5000)
            .map(|_| {
                let z: f64 =
                    rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
                z
            })
            .collect();
        let (lo90, hi90) = bootstrap_interval(&draws, 0.90).unwrap();
        let (lo95, hi95) = bootstrap_interval(&draws, 0.95).unwrap();
        let (lo99, hi99) = bootstrap_interval(&draws, 0.99).unwrap();
        assert!(lo99 <= lo95 && lo95 <= lo90);
        assert!(hi90 <= hi95 && hi95 <= hi99);
        assert!(lo90 < hi90);
    }

    #[test]
    fn rolling_forecast_empty_horizon() {
        let model = known_model(0.6, 0.2, 1.0, ObservationLink::Abs);
        let settings = FilterSettings::new(50, 1.0).unwrap();
        let spec = model.latent().clone();
        let xs = simulate(&spec, 30, 18);
        let ys = observe(&model, &xs, 19);
        let out = rolling_forecast(
            &model,
            &ThetaPrior::none(),
            &ys,
            20,
            0,
            &settings,
            ChaCha12Rng::seed_from_u64(20),
        )
        .unwrap();
        assert!(out.is_empty());
        assert!(rolling_forecast(
            &model,
            &ThetaPrior::none(),
            &ys,
            25,
            10,
            &settings,
            ChaCha12Rng::seed_from_u64(20),
        )
        .is_err());
    }

    #[test]
    fn intervals_widen_with_observation_noise() {
        let latent = FarimaSpec::new(vec![0.6], 0.2, vec![], 1.0).unwrap();
        let quiet = ModelSpec::with_known_params(latent.clone(), ObservationLink::Abs, 1.0).unwrap();
        let loud = ModelSpec::with_known_params(latent.clone(), ObservationLink::Abs, 2.0).unwrap();
        let settings = FilterSettings::new(200, 1.0).unwrap();
        let xs = simulate(&latent, 50, 21);
        let ys = observe(&quiet, &xs, 22);
        let f_quiet = rolling_forecast(
            &quiet,
            &ThetaPrior::none(),
            &ys,
            40,
            5,
            &settings,
            ChaCha12Rng::seed_from_u64(23),
        )
        .unwrap();
        let f_loud = rolling_forecast(
            &loud,
            &ThetaPrior::none(),
            &ys,
            40,
            5,
            &settings,
            ChaCha12Rng::seed_from_u64(23),
        )
        .unwrap();
        let width = |f: &[ForecastResult]| f.iter().map(|r| r.hi - r.lo).sum::<f64>();
        assert!(width(&f_loud) > width(&f_quiet), "{} vs {}", width(&f_loud), width(&f_quiet));
        for r in &f_quiet {
            assert!(r.lo < r.hi);
            assert!(r.realized.is_some());
        }
        assert_eq!(f_quiet.len(), 5);
        assert_eq!(f_quiet[0].horizon, 1);
        assert_eq!(f_quiet[4].horizon, 5);
    }

    #[test]
    fn residuals_of_well_specified_model_look_white() {
        // Monte Carlo over replications: on average >= 90% of ACF lags sit
        // inside the +-2/sqrt(T) white-noise band (a single run leaves ~5%
        // outside by construction, plus filtering error)
        let model = known_model(0.7, 0.2, 1.0, ObservationLink::ExpHalf);
        let settings = FilterSettings::new(300, 1.0).unwrap();
        let spec = model.latent().clone();
        let mut inside = 0usize;
        let mut total = 0usize;
        for seed in 0..8u64 {
            let xs = simulate(&spec, 400, 240 + seed);
            let ys = observe(&model, &xs, 250 + seed);
            let (snaps, _cloud) = run(
                &model,
                &ThetaPrior::none(),
                &ys,
                &settings,
                ChaCha12Rng::seed_from_u64(260 + seed),
            )
            .unwrap();
            let diag = residual_diagnostics(&snaps, &ys, 20).unwrap();
            assert!((diag.acf[0] - 1.0).abs() < 1e-12);
            assert!(diag.acf.iter().all(|&a| a.abs() <= 1.0 + 1e-12));
            assert!(diag.ljung_box_stat.unwrap() > 0.0);
            let band = 2.0 / (ys.len() as f64).sqrt();
            inside += diag.acf[1..].iter().filter(|a| a.abs() <= band).count();
            total += 20;
        }
        assert!(
            inside as f64 >= 0.9 * total as f64,
            "only {inside}/{total} lags inside the white-noise band"
        );
    }

    #[test]
    fn constant_residuals_are_a_degenerate_variance_error() {
        let model = known_model(0.6, 0.2, 1.0, ObservationLink::Abs);
        let settings = FilterSettings::new(50, 1.0).unwrap();
        let spec = model.latent().clone();
        let xs = simulate(&spec, 70, 27);
        let ys = observe(&model, &xs, 28);
        let (snaps, _c) =
            run(&model, &ThetaPrior::none(), &ys, &settings, ChaCha12Rng::seed_from_u64(29)).unwrap();
        // zero observations make every standardized residual exactly zero
        let zeros = vec![0.0; ys.len()];
        let err = residual_diagnostics(&snaps, &zeros, 10).unwrap_err();
        assert!(matches!(err, Error::DegenerateVariance(_)));
    }

    #[test]
    fn theta_dimension_matches_prior_requirement() {
        // rolling_forecast propagates filter errors
        let latent = FarimaSpec::new(vec![0.6], 0.2, vec![], 1.0).unwrap();
        let model = ModelSpec::new(
            latent,
            vec![crate::ssm::ParamId::Ar(0)],
            ObservationLink::Abs,
            1.0,
        )
        .unwrap();
        let settings = FilterSettings::new(50, 0.98).unwrap();
        let ys = vec![0.1; 30];
        let err = rolling_forecast(
            &model,
            &ThetaPrior::none(),
            &ys,
            20,
            5,
            &settings,
            ChaCha12Rng::seed_from_u64(30),
        );
        assert!(err.is_err());
    }
}
