use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sdr_core::axioms::{
    acceptance_identity, check_coherence, check_deviation, check_duality,
    check_ordering_and_parameters, dilation_check, random_densities, sd_envelope_bound,
    CheckConfig, Partition,
};
use sdr_core::simulation::DEFAULT_BURN_IN;
use sdr_core::{simulate_path, EstimatorMode, ReturnSeries, RiskConfig, Scenario, SortedSample};

fn student_low(n: usize, seed: u64) -> ReturnSeries {
    simulate_path(&Scenario::StudentLow.params(), n, DEFAULT_BURN_IN, seed).unwrap()
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn coherence_suite_is_clean() {
    let report = check_coherence(&CheckConfig::default()).unwrap();
    for e in &report.entries {
        assert_eq!(e.trials + e.skipped, 1000, "{}", e.name);
        assert_eq!(
            e.failures, 0,
            "{}: max violation {}",
            e.name, e.max_violation
        );
    }
    assert!(report.passed());
}

#[test]
fn deviation_suite_apart_from_subadditivity() {
    let report = check_deviation(&CheckConfig::default()).unwrap();
    for e in report.entries.iter().filter(|e| e.name != "subadditivity") {
        assert_eq!(
            e.failures, 0,
            "{}: max violation {}",
            e.name, e.max_violation
        );
    }
}

#[test]
fn duality_suite_is_clean() {
    let report = check_duality(&CheckConfig::default()).unwrap();
    assert!(report.passed(), "{report:?}");
    let envelope = report.entry("sd envelope bound").unwrap();
    assert_eq!((envelope.trials, envelope.skipped), (1000, 0));
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let cfg = CheckConfig {
        trials: 200,
        seed: 77,
        ..CheckConfig::default()
    };
    let run = || {
        (
            check_coherence(&cfg).unwrap(),
            check_deviation(&cfg).unwrap(),
            check_duality(&cfg).unwrap(),
        )
    };
    let one = in_pool(1, run);
    let eight = in_pool(8, run);
    assert_eq!(one, eight);
    for (a, b) in one.1.entries.iter().zip(&eight.1.entries) {
        assert_eq!(a.max_violation.to_bits(), b.max_violation.to_bits());
    }
}

#[test]
fn seeds_change_the_trials() {
    let a = check_deviation(&CheckConfig {
        trials: 300,
        seed: 1,
        ..CheckConfig::default()
    })
    .unwrap();
    let b = check_deviation(&CheckConfig {
        trials: 300,
        seed: 2,
        ..CheckConfig::default()
    })
    .unwrap();
    let va: Vec<u64> = a
        .entries
        .iter()
        .map(|e| e.max_violation.to_bits())
        .collect();
    let vb: Vec<u64> = b
        .entries
        .iter()
        .map(|e| e.max_violation.to_bits())
        .collect();
    assert_ne!(va, vb);
}

#[test]
fn ordering_chain_on_a_long_student_path() {
    let path = student_low(1_000_000, 4);
    let alphas = [0.001, 0.005, 0.01, 0.025, 0.05, 0.1, 0.25, 0.5];
    let betas = [0.0, 1.0, 2.0, 5.0, 20.0];
    let report = check_ordering_and_parameters(&path, &alphas, &betas, 2.0).unwrap();
    assert!(report.passed(), "{report:?}");
    assert_eq!(report.entry("ordering chain").unwrap().trials, 40);
    assert_eq!(report.entry("beta monotonicity").unwrap().trials, 32);
    assert!(!report.entry("alpha monotonicity").unwrap().gating);
}

#[test]
fn sdr_approaches_the_worst_loss_from_below() {
    let path = student_low(1_000_000, 4);
    let worst = -path.min();
    let sample = SortedSample::new(&path);
    let n = path.len() as f64;
    let mut previous_gap = f64::INFINITY;
    for alpha in [0.5, 0.1, 0.01, 0.001, 1e-4, 1e-5, 1.0 / n] {
        let config = RiskConfig::new(alpha, 1.0, 2.0, EstimatorMode::Coherent).unwrap();
        let sdr = sample.report(&config).unwrap().sdr;
        let gap = worst - sdr;
        assert!(
            gap >= 0.0 && gap <= previous_gap,
            "alpha {alpha}: gap {gap}"
        );
        previous_gap = gap;
    }
    assert_eq!(previous_gap, 0.0);
}

#[test]
fn envelope_bound_over_random_densities() {
    let path = student_low(2_000, 8);
    let densities = random_densities(path.len(), 1000, 9).unwrap();
    let report = sd_envelope_bound(&path, 0.05, 2.0, &densities).unwrap();
    let e = &report.entries[0];
    assert_eq!(e.trials + e.skipped, 1000);
    assert!(e.trials > 0 && e.skipped > 0, "{e:?}");
    assert_eq!(e.failures, 0);
}

#[test]
fn acceptance_identity_for_extreme_betas() {
    let path = student_low(2_000, 12);
    for beta in [0.0, 20.0] {
        let config = RiskConfig::new(0.01, beta, 2.0, EstimatorMode::Coherent).unwrap();
        let residual = acceptance_identity(&path, &config).unwrap();
        assert!(residual <= 1e-9 * path.max_abs(), "beta {beta}: {residual}");
    }
}

#[test]
fn dilation_over_random_partitions() {
    let path = student_low(2_000, 15);
    let config = RiskConfig::new(0.05, 1.0, 2.0, EstimatorMode::Coherent).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for groups in (1..=100).map(|i| i * 20) {
        let partition = Partition::random(path.len(), groups, &mut rng);
        let report = dilation_check(&path, &partition, &config, 1e-9).unwrap();
        assert!(report.passed(), "{groups} groups: {report:?}");
    }
}
