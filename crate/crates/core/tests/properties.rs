//! Invariants of the historical-simulation estimators on arbitrary samples.

use proptest::prelude::*;
use sdr_core::axioms::{acceptance_identity, es_dual_lp};
use sdr_core::measures::penalty_weight;
use sdr_core::{EstimatorMode, ReturnSeries, RiskConfig, RiskReport, SortedSample};

fn report(x: &[f64], config: &RiskConfig) -> RiskReport {
    SortedSample::new(&ReturnSeries::new(x.to_vec()).unwrap())
        .report(config)
        .unwrap()
}

fn scale(x: &[f64], extra: f64) -> f64 {
    x.iter()
        .fold(extra.abs(), |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE)
}

/// Values drawn partly from a coarse grid so that ties are common.
fn sample() -> impl Strategy<Value = Vec<f64>> {
    let value = prop_oneof![
        3 => -1.0e3..1.0e3_f64,
        1 => (-8i32..8).prop_map(|k| f64::from(k) * 0.25),
    ];
    prop::collection::vec(value, 2..200)
}

/// A sample with a valid `(alpha, beta, p)` for its length.
fn case(mode: EstimatorMode) -> impl Strategy<Value = (Vec<f64>, RiskConfig)> {
    sample().prop_flat_map(move |x| {
        let n = x.len() as f64;
        let alpha = 1.0 / n..0.999_f64;
        let beta = prop_oneof![Just(0.0), 0.0..25.0_f64, Just(1e6)];
        let p = prop_oneof![Just(1.0), Just(2.0), 1.0..4.0_f64];
        (Just(x), alpha, beta, p)
            .prop_map(move |(x, a, b, p)| (x, RiskConfig::new(a, b, p, mode).unwrap()))
    })
}

fn coherent() -> impl Strategy<Value = (Vec<f64>, RiskConfig)> {
    case(EstimatorMode::Coherent)
}

fn either_mode() -> impl Strategy<Value = (Vec<f64>, RiskConfig)> {
    prop_oneof![case(EstimatorMode::Coherent), case(EstimatorMode::Literal)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn translation((x, config) in either_mode(), c in -1.0e3..1.0e3_f64) {
        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        let a = report(&x, &config);
        let b = report(&shifted, &config);
        let tol = 1e-9 * scale(&shifted, c).max(scale(&x, 0.0));
        prop_assert!((b.var - (a.var - c)).abs() <= tol);
        // the strict-indicator tail sum moves by c * count / (N alpha)
        if config.mode == EstimatorMode::Coherent {
            prop_assert!((b.sd - a.sd).abs() <= tol);
            prop_assert!((b.es - (a.es - c)).abs() <= tol);
            prop_assert!((b.sdr - (a.sdr - c)).abs() <= tol);
        }
    }

    #[test]
    fn positive_homogeneity((x, config) in either_mode(), log_lambda in -5.0..5.0_f64) {
        let lambda = log_lambda.exp();
        let scaled: Vec<f64> = x.iter().map(|v| v * lambda).collect();
        let a = report(&x, &config);
        let b = report(&scaled, &config);
        let tol = 1e-12 * lambda * scale(&x, 0.0);
        for (u, v) in [(a.var, b.var), (a.es, b.es), (a.sd, b.sd), (a.sdr, b.sdr)] {
            prop_assert!((v - lambda * u).abs() <= tol, "{} vs {}", v, lambda * u);
        }
    }

    #[test]
    fn ordering_chain((x, config) in coherent()) {
        let r = report(&x, &config);
        let worst = -x.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(worst >= r.sdr && r.sdr >= r.es && r.es >= r.var, "{r:?}");
    }

    #[test]
    fn non_negativity_and_range((x, config) in either_mode()) {
        let r = report(&x, &config);
        prop_assert!(r.sd >= 0.0);
        if x.iter().any(|&v| v < r.e_alpha) {
            prop_assert!(r.sd > 0.0);
        }
        if config.mode == EstimatorMode::Coherent {
            let mean = x.iter().sum::<f64>() / x.len() as f64;
            let min = x.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert!(r.sd <= mean - min + 1e-9 * scale(&x, 0.0));
        }
    }

    #[test]
    fn strictness((x, config) in coherent()) {
        let r = report(&x, &config);
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        prop_assert!(r.sdr >= -mean - 1e-9 * scale(&x, 0.0));
    }

    #[test]
    fn permutation_is_bit_identical((x, config) in either_mode(), seed in any::<u64>()) {
        let mut y = x.clone();
        // Fisher-Yates driven by a splitmix sequence
        let mut s = seed;
        for i in (1..y.len()).rev() {
            s = s.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = s;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            y.swap(i, (z % (i as u64 + 1)) as usize);
        }
        let a = report(&x, &config);
        let b = report(&y, &config);
        prop_assert_eq!(a.var.to_bits(), b.var.to_bits());
        prop_assert_eq!(a.es.to_bits(), b.es.to_bits());
        prop_assert_eq!(a.sd.to_bits(), b.sd.to_bits());
        prop_assert_eq!(a.sdr.to_bits(), b.sdr.to_bits());
    }

    #[test]
    fn beta_monotone((x, config) in either_mode(), b1 in 0.0..30.0_f64, b2 in 0.0..30.0_f64) {
        let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
        let a = report(&x, &config.with_beta(lo).unwrap());
        let b = report(&x, &config.with_beta(hi).unwrap());
        prop_assert!(b.sdr <= a.sdr);
    }

    #[test]
    fn internal_identity((x, config) in either_mode()) {
        let r = report(&x, &config);
        let penalty = penalty_weight(config.alpha, config.beta) * r.sd;
        prop_assert_eq!(r.sdr.to_bits(), (r.es + penalty).to_bits());
        // the subtraction itself rounds once
        let ulp = f64::EPSILON * r.sdr.abs().max(r.es.abs());
        prop_assert!((r.sdr - r.es - penalty).abs() <= ulp);
    }

    #[test]
    fn acceptance_set_identity((x, config) in coherent()) {
        let series = ReturnSeries::new(x.clone()).unwrap();
        let residual = acceptance_identity(&series, &config).unwrap();
        let capital = report(&x, &config).sdr;
        prop_assert!(residual <= 1e-9 * scale(&x, capital));
    }

    #[test]
    fn es_dual_agrees((x, config) in coherent()) {
        let series = ReturnSeries::new(x.clone()).unwrap();
        let lp = es_dual_lp(&series, config.alpha).unwrap();
        let es = report(&x, &config).es;
        prop_assert_eq!(lp.to_bits(), es.to_bits(), "{} vs {}", lp, es);
    }
}
