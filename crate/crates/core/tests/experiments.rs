use sdr_core::experiments::{
    alpha_beta_surface, measure_curves, rolling_measures, run_replication, Measure, ReplicationSpec,
};
use sdr_core::measures::penalty_weight;
use sdr_core::simulation::{iid_sample, Innovation, DEFAULT_BURN_IN};
use sdr_core::table::Tabular;
use sdr_core::{simulate_path, EstimatorMode, ReturnSeries, RiskConfig, Scenario, SortedSample};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

fn spec(scenario: Scenario, replicates: usize, mode: EstimatorMode) -> ReplicationSpec {
    ReplicationSpec {
        replicates,
        mode,
        ..ReplicationSpec::desk(scenario)
    }
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn aggregation_is_linear() {
    for mode in [EstimatorMode::Literal, EstimatorMode::Coherent] {
        let t = run_replication(&spec(Scenario::StudentHigh, 200, mode)).unwrap();
        for alpha in [0.01, 0.05] {
            let es = t.row(Measure::Es, alpha).unwrap().mean;
            let sd = t.row(Measure::Sd, alpha).unwrap().mean;
            let sdr = t.row(Measure::Sdr, alpha).unwrap().mean;
            let affine = es + penalty_weight(alpha, 1.0) * sd;
            // both sides sum 200 rounded terms
            assert!(
                (sdr - affine).abs() <= 8.0 * f64::EPSILON * sdr,
                "{sdr} vs {affine}"
            );
        }
    }
}

#[test]
fn sdr_row_is_its_own_reference() {
    let t = run_replication(&spec(Scenario::NormalHigh, 50, EstimatorMode::Literal)).unwrap();
    for alpha in [0.01, 0.05] {
        let row = t.row(Measure::Sdr, alpha).unwrap();
        assert_eq!(row.ratio, 1.0);
        assert_eq!(row.pearson, Some(1.0));
    }
}

#[test]
fn coherent_ratios_lie_in_unit_interval() {
    let t = run_replication(&spec(Scenario::StudentLow, 100, EstimatorMode::Coherent)).unwrap();
    for row in &t.rows {
        assert!((0.0..=1.0).contains(&row.ratio), "{row:?}");
    }
}

#[test]
fn replication_is_independent_of_thread_count() {
    let s = spec(Scenario::StudentLow, 120, EstimatorMode::Literal);
    let one = in_pool(1, || run_replication(&s).unwrap());
    let eight = in_pool(8, || run_replication(&s).unwrap());
    assert_eq!(one.to_csv(), eight.to_csv());
    let again = run_replication(&s).unwrap();
    assert_eq!(one, again);
}

#[test]
fn single_replicate_means_equal_the_replicate() {
    let s = spec(Scenario::NormalLow, 1, EstimatorMode::Literal);
    let t = run_replication(&s).unwrap();
    let mut rng = sdr_core::rng::stream_rng(s.seed, 0);
    let path = sdr_core::simulation::simulate_path_with_rng(
        &Scenario::NormalLow.params(),
        s.sample_size,
        s.burn_in,
        &mut rng,
    )
    .unwrap();
    let config = RiskConfig::new(0.01, 1.0, 2.0, EstimatorMode::Literal).unwrap();
    let r = SortedSample::new(&path).report(&config).unwrap();
    assert_eq!(t.row(Measure::Var, 0.01).unwrap().mean, r.var);
    assert_eq!(t.row(Measure::Sdr, 0.01).unwrap().mean, r.sdr);
    assert_eq!(t.row(Measure::Var, 0.01).unwrap().st_dev, None);
}

#[test]
fn rolling_has_no_look_ahead() {
    let path = simulate_path(&Scenario::StudentLow.params(), 600, DEFAULT_BURN_IN, 3).unwrap();
    let config = RiskConfig::new(0.05, 1.0, 2.0, EstimatorMode::Coherent).unwrap();
    let base = rolling_measures(&path, 200, &config).unwrap();
    assert_eq!(base.len(), 400);
    for t in [200, 333, 598] {
        let mut values = path.values().to_vec();
        values[t + 1] = -1.0;
        let bumped = rolling_measures(&ReturnSeries::new(values).unwrap(), 200, &config).unwrap();
        let upto = t - 200 + 1;
        assert_eq!(base.sdr[..upto], bumped.sdr[..upto]);
        assert_eq!(base.var[..upto], bumped.var[..upto]);
        assert_ne!(base.sdr[upto..], bumped.sdr[upto..]);
    }
}

#[test]
fn rolling_sdr_exceeds_es_on_student_high() {
    let path = simulate_path(&Scenario::StudentHigh.params(), 12_000, DEFAULT_BURN_IN, 5).unwrap();
    let config = RiskConfig::new(0.01, 1.0, 2.0, EstimatorMode::Coherent).unwrap();
    let r = rolling_measures(&path, 2_000, &config).unwrap();
    assert_eq!(r.len(), 10_000);
    for i in 0..r.len() {
        assert!(r.sdr[i] > r.es[i], "row {i}: {} vs {}", r.sdr[i], r.es[i]);
    }
    let signed = r.clone().signed();
    assert_eq!(signed.sdr[0], -r.sdr[0]);
    assert_eq!(signed.sd[0], r.sd[0]);
}

#[test]
fn tail_measures_grow_toward_small_alpha() {
    let x = iid_sample(Innovation::Student { dof: 6.0 }, 200_000, 8).unwrap();
    let c = measure_curves(&x, &[0.5, 0.01], 1.0, 2.0).unwrap();
    let tol = 1e-9 * x.max_abs();
    assert!(c[1].var + tol >= c[0].var);
    assert!(c[1].es + tol >= c[0].es);
    assert!(c[1].sdr + tol >= c[0].sdr);
}

/// With the full-sample divisor, `SD_α` of a standard normal is
/// `[(e² + 1)Φ(e) + eφ(e)]^{1/2}` at `e = -φ(z_α)/α`, which is smaller at
/// α = 1% than at α = 50%: SD does not grow toward the tail.
#[test]
fn sd_shrinks_toward_small_alpha() {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let oracle = |alpha: f64| {
        let e = -normal.pdf(normal.inverse_cdf(alpha)) / alpha;
        ((e * e + 1.0) * normal.cdf(e) + e * normal.pdf(e)).sqrt()
    };
    assert!(oracle(0.01) < oracle(0.5));
    let x = iid_sample(Innovation::Normal, 1_000_000, 8).unwrap();
    let c = measure_curves(&x, &[0.5, 0.01], 1.0, 2.0).unwrap();
    for (point, alpha) in c.iter().zip([0.5, 0.01]) {
        assert!((point.sd / oracle(alpha) - 1.0).abs() < 0.05, "{point:?}");
    }
    assert!(c[1].sd < c[0].sd);
}

#[test]
fn gaussian_gap_shrinks_toward_small_alpha() {
    let x = iid_sample(Innovation::Normal, 1_000_000, 10).unwrap();
    let grid = [0.1, 0.05, 0.01, 0.005, 0.001];
    let c = measure_curves(&x, &grid, 1.0, 2.0).unwrap();
    let gaps: Vec<f64> = c.iter().map(|p| p.sdr - p.es).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
}

#[test]
fn surface_edges_and_maximum() {
    let x = iid_sample(Innovation::Student { dof: 6.0 }, 200_000, 12).unwrap();
    let alphas: Vec<f64> = (1..=50).map(|i| i as f64 / 100.0).collect();
    let betas: Vec<f64> = (0..=20).map(f64::from).collect();
    let grid = alpha_beta_surface(&x, &alphas, &betas, 2.0).unwrap();
    assert_eq!(grid.sdr.len(), alphas.len());
    assert!(grid.sdr.iter().all(|row| row.len() == betas.len()));
    assert!(grid
        .sdr
        .iter()
        .all(|row| row.windows(2).all(|w| w[1] <= w[0])));

    let sample = SortedSample::new(&x);
    let at = |alpha: f64| {
        let r = sample
            .report(&RiskConfig::new(alpha, 0.0, 2.0, EstimatorMode::Coherent).unwrap())
            .unwrap();
        (r.es, r.sd)
    };
    let (es, sd) = at(0.5);
    let last = grid.sdr[49][20];
    assert!((last - es).abs() <= 0.5_f64.powi(20) * sd * (1.0 + 1e-12));
    assert!((0.5_f64.powi(20) - 9.5e-7).abs() < 1e-8);
    for (i, &alpha) in alphas.iter().enumerate() {
        let (es, sd) = at(alpha);
        assert_eq!(grid.sdr[i][0], es + sd);
    }
    let (alpha, beta, _) = grid.argmax();
    assert_eq!((alpha, beta), (0.01, 0.0));
}
