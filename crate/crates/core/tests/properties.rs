//! Property tests for the algebraic invariants.

use longmem_smc::fracproc::{frac_diff_coeffs, frac_int_coeffs, FarimaSpec};
use longmem_smc::paramlearn::{shrink_locations, weighted_mean, LiuWestConfig, WeightedParticles};
use longmem_smc::sisr::normalized_weights_from_log;
use longmem_smc::ssm::{ModelSpec, ObservationLink, ParamId, ParameterVector};
use proptest::prelude::*;

proptest! {
    #[test]
    fn pi_psi_weights_are_formal_inverses(d in -0.49f64..0.49, l in 1usize..96) {
        let pi = frac_diff_coeffs(d, l).unwrap().coeffs;
        let psi = frac_int_coeffs(d, l).unwrap().coeffs;
        for k in 0..=l {
            let s: f64 = (0..=k).map(|j| pi[j] * psi[k - j]).sum();
            let target = if k == 0 { 1.0 } else { 0.0 };
            prop_assert!((s - target).abs() < 1e-12, "k={} sum={}", k, s);
        }
    }

    #[test]
    fn shrinkage_preserves_weighted_mean(
        raw_values in prop::collection::vec(-3.0f64..3.0, 2..40),
        raw_weights in prop::collection::vec(0.01f64..1.0, 2..40),
        delta in 0.34f64..1.0,
    ) {
        let n = raw_values.len().min(raw_weights.len());
        let values: Vec<ParameterVector> =
            raw_values[..n].iter().map(|&v| ParameterVector(vec![v])).collect();
        let total: f64 = raw_weights[..n].iter().sum();
        let weights: Vec<f64> = raw_weights[..n].iter().map(|w| w / total).collect();
        let p = WeightedParticles::new(&values, &weights).unwrap();
        let cfg = LiuWestConfig::from_delta(delta).unwrap();
        let mean = weighted_mean(&p)[0];
        let locs = shrink_locations(&p, &cfg);
        let loc_mean: f64 = locs.iter().zip(&weights).map(|(l, &w)| w * l.0[0]).sum();
        prop_assert!((loc_mean - mean).abs() < 1e-12);
    }

    #[test]
    fn weight_normalization_is_shift_invariant(
        lw in prop::collection::vec(-30.0f64..30.0, 2..50),
        shift in -500.0f64..500.0,
    ) {
        let base = normalized_weights_from_log(&lw).unwrap();
        let shifted: Vec<f64> = lw.iter().map(|l| l + shift).collect();
        let moved = normalized_weights_from_log(&shifted).unwrap();
        for (a, b) in base.iter().zip(&moved) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        let total: f64 = base.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parameter_embed_extract_round_trip(phi in -0.98f64..0.98, theta in -0.98f64..0.98) {
        let latent = FarimaSpec::new(vec![0.1], 0.2, vec![0.0], 1.0).unwrap();
        let model = ModelSpec::new(
            latent,
            vec![ParamId::Ar(0), ParamId::Ma(0)],
            ObservationLink::Abs,
            1.0,
        )
        .unwrap();
        let v = ParameterVector(vec![phi, theta]);
        if let Ok(spec) = model.embed(&v) {
            prop_assert_eq!(model.extract(&spec), v);
        }
    }
}
