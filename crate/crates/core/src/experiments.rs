//! Monte Carlo replication, rolling-window estimation, α-curves and the
//! (α, β) surface.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, RiskError};
use crate::measures::{
    validate_p, EstimatorMode, ReturnSeries, RiskConfig, RiskReport, SdScale, SortedSample,
    TailSize,
};
use crate::rng::{stream_rng, DEFAULT_SEED};
use crate::simulation::{simulate_path_with_rng, Scenario, DEFAULT_BURN_IN};

pub const FULL_REPLICATES: usize = 10_000;
pub const DESK_REPLICATES: usize = 500;
pub const DEFAULT_SAMPLE_SIZE: usize = 2_000;
pub const DEFAULT_WINDOW: usize = 2_000;
pub const DEFAULT_ALPHAS: [f64; 2] = [0.01, 0.05];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Measure {
    #[serde(rename = "VaR")]
    Var,
    #[serde(rename = "ES")]
    Es,
    #[serde(rename = "SD")]
    Sd,
    #[serde(rename = "SDR")]
    Sdr,
}

impl Measure {
    pub const ALL: [Measure; 4] = [Measure::Var, Measure::Es, Measure::Sd, Measure::Sdr];

    pub fn name(self) -> &'static str {
        match self {
            Measure::Var => "VaR",
            Measure::Es => "ES",
            Measure::Sd => "SD",
            Measure::Sdr => "SDR",
        }
    }

    pub fn of(self, r: &RiskReport) -> f64 {
        match self {
            Measure::Var => r.var,
            Measure::Es => r.es,
            Measure::Sd => r.sd,
            Measure::Sdr => r.sdr,
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationSpec {
    pub scenario: Scenario,
    pub replicates: usize,
    pub sample_size: usize,
    pub alphas: Vec<f64>,
    pub beta: f64,
    pub p: f64,
    pub mode: EstimatorMode,
    pub sd_scale: SdScale,
    pub burn_in: usize,
    pub seed: u64,
}

impl ReplicationSpec {
    /// 500 replicates of 2,000 observations, α ∈ {1%, 5%}, β = 1, p = 2,
    /// literal estimator.
    pub fn desk(scenario: Scenario) -> Self {
        Self {
            scenario,
            replicates: DESK_REPLICATES,
            sample_size: DEFAULT_SAMPLE_SIZE,
            alphas: DEFAULT_ALPHAS.to_vec(),
            beta: 1.0,
            p: 2.0,
            mode: EstimatorMode::Literal,
            sd_scale: SdScale::Sample,
            burn_in: DEFAULT_BURN_IN,
            seed: DEFAULT_SEED,
        }
    }

    /// As [`ReplicationSpec::desk`] with 10,000 replicates.
    pub fn full(scenario: Scenario) -> Self {
        Self {
            replicates: FULL_REPLICATES,
            ..Self::desk(scenario)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(RiskError::param("replicates", 0.0, "must be >= 1"));
        }
        if self.alphas.is_empty() {
            return Err(RiskError::InsufficientData {
                what: "alpha list",
                needed: 1,
                got: 0,
            });
        }
        for &alpha in &self.alphas {
            self.config(alpha)?;
            TailSize::new(self.sample_size, alpha)?;
        }
        Ok(())
    }

    fn config(&self, alpha: f64) -> Result<RiskConfig> {
        Ok(RiskConfig::new(alpha, self.beta, self.p, self.mode)?.with_sd_scale(self.sd_scale))
    }
}

/// Aggregates of one measure at one α across replicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryRow {
    pub measure: Measure,
    pub alpha: f64,
    pub mean: f64,
    /// Sample standard deviation across replicates; `None` for one replicate.
    pub st_dev: Option<f64>,
    /// Mean of the per-replicate ratios `measure / SDR`.
    pub ratio: f64,
    /// Pearson correlation with SDR; `None` when either side is constant.
    pub pearson: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryTable {
    pub scenario: Scenario,
    pub replicates: usize,
    pub sample_size: usize,
    pub beta: f64,
    pub p: f64,
    pub mode: EstimatorMode,
    pub seed: u64,
    /// Replicate estimates whose literal tail was empty.
    pub degenerate_tails: usize,
    pub rows: Vec<SummaryRow>,
}

impl SummaryTable {
    pub fn row(&self, measure: Measure, alpha: f64) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.measure == measure && r.alpha == alpha)
    }

    /// Negates the means of VaR, ES and SDR.
    pub fn signed(mut self) -> Self {
        for row in &mut self.rows {
            if row.measure != Measure::Sd {
                row.mean = -row.mean;
            }
        }
        self
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation, divisor `n - 1`.
pub fn sample_std(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Some((ss / (values.len() - 1) as f64).sqrt())
}

pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Simulates `replicates` paths and summarizes VaR, ES, SD and SDR at each α.
///
/// Replicate `r` draws from stream `r` of the master seed and the summary
/// is reduced in replicate order, so the table does not depend on the
/// number of worker threads.
pub fn run_replication(spec: &ReplicationSpec) -> Result<SummaryTable> {
    spec.validate()?;
    let params = spec.scenario.params();
    let configs = spec
        .alphas
        .iter()
        .map(|&a| spec.config(a))
        .collect::<Result<Vec<_>>>()?;

    let per_replicate: Vec<Vec<RiskReport>> = (0..spec.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(spec.seed, r as u64);
            let path = simulate_path_with_rng(&params, spec.sample_size, spec.burn_in, &mut rng)?;
            let sample = SortedSample::new(&path);
            configs.iter().map(|c| sample.report(c)).collect()
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(4 * configs.len());
    let mut degenerate_tails = 0;
    for (j, config) in configs.iter().enumerate() {
        let reports: Vec<&RiskReport> = per_replicate.iter().map(|reps| &reps[j]).collect();
        degenerate_tails += reports.iter().filter(|r| r.degenerate_tail).count();
        let sdr: Vec<f64> = reports.iter().map(|r| r.sdr).collect();
        for measure in Measure::ALL {
            let values: Vec<f64> = reports.iter().map(|r| measure.of(r)).collect();
            let (ratio, corr) = if measure == Measure::Sdr {
                (1.0, Some(1.0))
            } else {
                let ratios: Vec<f64> = values
                    .iter()
                    .zip(&sdr)
                    .filter(|(_, s)| **s != 0.0)
                    .map(|(v, s)| v / s)
                    .collect();
                let ratio = if ratios.is_empty() {
                    f64::NAN
                } else {
                    mean(&ratios)
                };
                (ratio, pearson(&values, &sdr))
            };
            rows.push(SummaryRow {
                measure,
                alpha: config.alpha,
                mean: mean(&values),
                st_dev: sample_std(&values),
                ratio,
                pearson: corr,
            });
        }
    }

    Ok(SummaryTable {
        scenario: spec.scenario,
        replicates: spec.replicates,
        sample_size: spec.sample_size,
        beta: spec.beta,
        p: spec.p,
        mode: spec.mode,
        seed: spec.seed,
        degenerate_tails,
        rows,
    })
}

/// Measures estimated over a trailing window.
///
/// Row `i` belongs to observation `index[i] = t` and is estimated from the
/// `window` observations ending at `t`, i.e. indices `t - window + 1 ..= t`.
/// `returns[i]` is the observation at `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RollingResult {
    pub window: usize,
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
    pub mode: EstimatorMode,
    pub index: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub returns: Vec<f64>,
    pub var: Vec<f64>,
    pub es: Vec<f64>,
    pub sd: Vec<f64>,
    pub sdr: Vec<f64>,
}

impl RollingResult {
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Attaches one label per input observation (e.g. dates); rows keep the
    /// label of the observation they belong to.
    pub fn with_labels(mut self, labels: &[String]) -> Result<Self> {
        let needed = self.index.last().map_or(0, |&t| t + 1);
        if labels.len() < needed {
            return Err(RiskError::LengthMismatch {
                what: "labels",
                expected: needed,
                got: labels.len(),
            });
        }
        self.labels = Some(self.index.iter().map(|&t| labels[t].clone()).collect());
        Ok(self)
    }

    pub fn signed(mut self) -> Self {
        for v in self.var.iter_mut().chain(&mut self.es).chain(&mut self.sdr) {
            *v = -*v;
        }
        self
    }
}

pub fn rolling_measures(
    series: &ReturnSeries,
    window: usize,
    config: &RiskConfig,
) -> Result<RollingResult> {
    let n = series.len();
    if window == 0 || n <= window {
        return Err(RiskError::InsufficientData {
            what: "rolling window",
            needed: window + 1,
            got: n,
        });
    }
    TailSize::new(window, config.alpha)?;
    let x = series.values();
    let reports = (window..n)
        .into_par_iter()
        .map(|t| SortedSample::from_values(&x[t + 1 - window..=t]).report(config))
        .collect::<Result<Vec<_>>>()?;
    Ok(RollingResult {
        window,
        alpha: config.alpha,
        beta: config.beta,
        p: config.p,
        mode: config.mode,
        index: (window..n).collect(),
        labels: None,
        returns: x[window..].to_vec(),
        var: reports.iter().map(|r| r.var).collect(),
        es: reports.iter().map(|r| r.es).collect(),
        sd: reports.iter().map(|r| r.sd).collect(),
        sdr: reports.iter().map(|r| r.sdr).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub alpha: f64,
    pub var: f64,
    pub es: f64,
    pub sd: f64,
    pub sdr: f64,
}

impl CurvePoint {
    pub fn signed(self) -> Self {
        Self {
            var: -self.var,
            es: -self.es,
            sdr: -self.sdr,
            ..self
        }
    }
}

/// VaR, ES, SD and SDR at every α of the grid, coherent estimator.
pub fn measure_curves(
    series: &ReturnSeries,
    alpha_grid: &[f64],
    beta: f64,
    p: f64,
) -> Result<Vec<CurvePoint>> {
    let base = RiskConfig::new(0.5, beta, p, EstimatorMode::Coherent)?;
    measure_curves_with(series, alpha_grid, &base)
}

/// As [`measure_curves`], taking β, p, mode and SD scale from `base`.
pub fn measure_curves_with(
    series: &ReturnSeries,
    alpha_grid: &[f64],
    base: &RiskConfig,
) -> Result<Vec<CurvePoint>> {
    check_grid(series, alpha_grid)?;
    let sample = SortedSample::new(series);
    alpha_grid
        .iter()
        .map(|&alpha| {
            let r = sample.report(&base.with_alpha(alpha)?)?;
            Ok(CurvePoint {
                alpha,
                var: r.var,
                es: r.es,
                sd: r.sd,
                sdr: r.sdr,
            })
        })
        .collect()
}

fn check_grid(series: &ReturnSeries, alpha_grid: &[f64]) -> Result<()> {
    if alpha_grid.is_empty() {
        return Err(RiskError::InsufficientData {
            what: "alpha grid",
            needed: 1,
            got: 0,
        });
    }
    for &alpha in alpha_grid {
        TailSize::new(series.len(), alpha)?;
    }
    Ok(())
}

/// SDR over an α × β grid; `sdr[i][j]` is evaluated at `alphas[i]`, `betas[j]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceGrid {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub p: f64,
    pub sdr: Vec<Vec<f64>>,
}

impl SurfaceGrid {
    pub fn signed(mut self) -> Self {
        for v in self.sdr.iter_mut().flatten() {
            *v = -*v;
        }
        self
    }

    /// Largest SDR and the `(alpha, beta)` where it occurs.
    pub fn argmax(&self) -> (f64, f64, f64) {
        let mut best = (self.alphas[0], self.betas[0], f64::NEG_INFINITY);
        for (i, row) in self.sdr.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v > best.2 {
                    best = (self.alphas[i], self.betas[j], v);
                }
            }
        }
        best
    }
}

pub fn alpha_beta_surface(
    series: &ReturnSeries,
    alpha_grid: &[f64],
    beta_grid: &[f64],
    p: f64,
) -> Result<SurfaceGrid> {
    let base = RiskConfig::new(0.5, 0.0, p, EstimatorMode::Coherent)?;
    alpha_beta_surface_with(series, alpha_grid, beta_grid, &base)
}

/// As [`alpha_beta_surface`], taking p, mode and SD scale from `base`.
pub fn alpha_beta_surface_with(
    series: &ReturnSeries,
    alpha_grid: &[f64],
    beta_grid: &[f64],
    base: &RiskConfig,
) -> Result<SurfaceGrid> {
    validate_p(base.p)?;
    check_grid(series, alpha_grid)?;
    if beta_grid.is_empty() {
        return Err(RiskError::InsufficientData {
            what: "beta grid",
            needed: 1,
            got: 0,
        });
    }
    let sample = SortedSample::new(series);
    let mut sdr = Vec::with_capacity(alpha_grid.len());
    for &alpha in alpha_grid {
        let row = beta_grid
            .iter()
            .map(|&beta| {
                let config = base.with_alpha(alpha)?.with_beta(beta)?;
                Ok(sample.report(&config)?.sdr)
            })
            .collect::<Result<Vec<_>>>()?;
        sdr.push(row);
    }
    Ok(SurfaceGrid {
        alphas: alpha_grid.to_vec(),
        betas: beta_grid.to_vec(),
        p: base.p,
        sdr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::var_hs;

    fn coherent(alpha: f64) -> RiskConfig {
        RiskConfig::new(alpha, 1.0, 2.0, EstimatorMode::Coherent).unwrap()
    }

    #[test]
    fn pearson_and_std_helpers() {
        assert!(
            (pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 7.0]).unwrap() - 0.993_399_267_798_783).abs()
                < 1e-14
        );
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(pearson(&[1.0, 1.0], &[1.0, 2.0]), None);
        assert_eq!(pearson(&[1.0], &[1.0]), None);
        assert_eq!(sample_std(&[1.0]), None);
        assert_eq!(sample_std(&[1.0, 3.0]), Some(2.0_f64.sqrt()));
    }

    #[test]
    fn rolling_constant_series() {
        let c = 0.004;
        let x = ReturnSeries::new(vec![c; 130]).unwrap();
        let r = rolling_measures(&x, 100, &coherent(0.05)).unwrap();
        assert_eq!(r.len(), 30);
        for i in 0..r.len() {
            assert_eq!(r.var[i], -c);
            assert!((r.es[i] + c).abs() < 1e-17);
            assert_eq!(r.sd[i], 0.0);
            assert!((r.sdr[i] + c).abs() < 1e-17);
        }
    }

    #[test]
    fn rolling_boundary_and_errors() {
        let x = ReturnSeries::new((0..101).map(|i| (i as f64).sin()).collect()).unwrap();
        let r = rolling_measures(&x, 100, &coherent(0.05)).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r.index, vec![100]);
        assert_eq!(r.returns, vec![x.values()[100]]);
        let last = ReturnSeries::new(x.values()[1..].to_vec()).unwrap();
        assert_eq!(r.var[0], var_hs(&last, 0.05).unwrap());
        assert!(rolling_measures(&x, 101, &coherent(0.05)).is_err());
        assert!(rolling_measures(&x, 50, &coherent(0.01)).is_err());
    }

    #[test]
    fn rolling_labels_follow_rows() {
        let x = ReturnSeries::new(vec![0.1, -0.2, 0.3, -0.1, 0.05]).unwrap();
        let labels: Vec<String> = (0..5).map(|i| format!("d{i}")).collect();
        let r = rolling_measures(&x, 3, &coherent(0.5))
            .unwrap()
            .with_labels(&labels)
            .unwrap();
        assert_eq!(r.labels.unwrap(), vec!["d3".to_string(), "d4".to_string()]);
    }

    #[test]
    fn single_replicate_summary() {
        let spec = ReplicationSpec {
            replicates: 1,
            ..ReplicationSpec::desk(Scenario::NormalLow)
        };
        let t = run_replication(&spec).unwrap();
        assert_eq!(t.rows.len(), 8);
        for row in &t.rows {
            assert_eq!(row.st_dev, None);
            assert_eq!(row.pearson.is_none(), row.measure != Measure::Sdr);
        }
        let params = Scenario::NormalLow.params();
        let mut rng = stream_rng(spec.seed, 0);
        let path = simulate_path_with_rng(&params, 2000, DEFAULT_BURN_IN, &mut rng).unwrap();
        let cfg = RiskConfig::new(0.01, 1.0, 2.0, EstimatorMode::Literal).unwrap();
        let direct = SortedSample::new(&path).report(&cfg).unwrap();
        assert_eq!(t.row(Measure::Var, 0.01).unwrap().mean, direct.var);
        assert_eq!(t.row(Measure::Sdr, 0.01).unwrap().mean, direct.sdr);
    }

    #[test]
    fn replication_spec_validation() {
        let mut spec = ReplicationSpec::desk(Scenario::NormalLow);
        spec.replicates = 0;
        assert!(run_replication(&spec).is_err());
        let mut spec = ReplicationSpec::desk(Scenario::NormalLow);
        spec.sample_size = 50;
        assert!(matches!(
            run_replication(&spec),
            Err(RiskError::InsufficientTail { .. })
        ));
        let mut spec = ReplicationSpec::desk(Scenario::NormalLow);
        spec.alphas.clear();
        assert!(run_replication(&spec).is_err());
    }

    #[test]
    fn surface_edges() {
        let x = ReturnSeries::new(
            (0..400)
                .map(|i| ((i * 37 % 101) as f64 - 50.0) / 10.0)
                .collect(),
        )
        .unwrap();
        let g = alpha_beta_surface(&x, &[0.01, 0.1, 0.5], &[0.0, 1.0, 20.0], 2.0).unwrap();
        let sample = SortedSample::new(&x);
        for (i, &alpha) in g.alphas.iter().enumerate() {
            let r = sample.report(&coherent(alpha)).unwrap();
            assert_eq!(g.sdr[i][0], r.es + r.sd);
            for j in 1..g.betas.len() {
                assert!(g.sdr[i][j] <= g.sdr[i][j - 1]);
            }
        }
        let r = sample.report(&coherent(0.5)).unwrap();
        assert!((g.sdr[2][2] - r.es).abs() <= 0.5_f64.powi(20) * r.sd * (1.0 + 1e-12));
        assert!(alpha_beta_surface(&x, &[0.001], &[1.0], 2.0).is_err());
        assert!(alpha_beta_surface(&x, &[0.1], &[], 2.0).is_err());
    }

    #[test]
    fn curves_reject_thin_grid() {
        let x = ReturnSeries::new(vec![0.0; 50]).unwrap();
        assert!(measure_curves(&x, &[0.1, 0.01], 1.0, 2.0).is_err());
        assert!(measure_curves(&x, &[], 1.0, 2.0).is_err());
    }
}
