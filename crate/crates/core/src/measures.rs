//! Historical-simulation estimators of VaR, ES, SD and SDR.
//!
//! All estimators work on the ascending order statistics `X_(1) <= ... <= X_(N)`
//! of the sample. With `k = ceil(N * alpha)`:
//!
//! - `VaR = -X_(k)`, the empirical quantile taken as `inf{x : F(x) >= alpha}`.
//! - `ES` has two modes. [`EstimatorMode::Literal`] averages the observations
//!   strictly below `-VaR` and divides by `N * alpha`. [`EstimatorMode::Coherent`]
//!   averages the `k - 1` smallest observations plus a fractional share of
//!   `X_(k)`, which is the expected shortfall of the empirical distribution.
//! - `SD` is the `p`-norm of `max(e - X, 0)` with `e = -ES`.
//! - `SDR = ES + (1 - alpha)^beta * SD`.
//!
//! Every quantity is computed from the sorted sample in a fixed order, so any
//! permutation of the input produces bit-identical results.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RiskError};

/// Ordered sequence of finite log-returns.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ReturnSeries {
    values: Vec<f64>,
}

impl ReturnSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(RiskError::InsufficientData {
                what: "return series",
                needed: 1,
                got: 0,
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(RiskError::NonFinite { index, value });
        }
        Ok(Self { values })
    }

    /// Log-returns of a price path.
    pub fn from_prices(prices: &[f64]) -> Result<Self> {
        log_returns(prices)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; a series holds at least one value.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest absolute value, used to scale numerical tolerances.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Population standard deviation (divisor N).
    pub fn population_std(&self) -> f64 {
        let mean = self.mean();
        let ss: f64 = self.values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / self.len() as f64).sqrt()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.values.iter().map(|&v| f(v)).collect())
    }

    /// The position `X + c`.
    pub fn shifted(&self, c: f64) -> Result<Self> {
        self.map(|v| v + c)
    }

    /// The position `lambda * X`.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        self.map(|v| lambda * v)
    }

    /// Pointwise sum of two positions on the same sample space.
    pub fn add(&self, other: &ReturnSeries) -> Result<Self> {
        if other.len() != self.len() {
            return Err(RiskError::LengthMismatch {
                what: "second position",
                expected: self.len(),
                got: other.len(),
            });
        }
        Self::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }
}

impl TryFrom<Vec<f64>> for ReturnSeries {
    type Error = RiskError;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

/// `value_t = ln(price_t) - ln(price_{t-1})`.
pub fn log_returns(prices: &[f64]) -> Result<ReturnSeries> {
    if prices.len() < 2 {
        return Err(RiskError::InsufficientData {
            what: "log returns",
            needed: 2,
            got: prices.len(),
        });
    }
    if let Some((index, &value)) = prices
        .iter()
        .enumerate()
        .find(|(_, p)| !(p.is_finite() && **p > 0.0))
    {
        return Err(RiskError::NonPositivePrice { index, value });
    }
    // ln(b) - ln(a) computed as ln(1 + (b - a) / a) to avoid cancellation
    ReturnSeries::new(
        prices
            .windows(2)
            .map(|w| ((w[1] - w[0]) / w[0]).ln_1p())
            .collect(),
    )
}

/// Which ES estimator to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorMode {
    /// Strict-indicator tail mean with divisor `N * alpha`.
    Literal,
    /// Fractional tail average of the empirical distribution.
    Coherent,
}

impl EstimatorMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorMode::Literal => "literal",
            EstimatorMode::Coherent => "coherent",
        }
    }
}

impl fmt::Display for EstimatorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "literal" => Ok(EstimatorMode::Literal),
            "coherent" => Ok(EstimatorMode::Coherent),
            other => Err(format!(
                "unknown estimator mode {other:?}; expected literal or coherent"
            )),
        }
    }
}

/// Normalization of the SD sum.
///
/// `Sample` divides by the full sample size `N`, the plug-in of an
/// unconditional expectation. `Tail` divides by `N * alpha`, which rescales
/// `Sample` by `alpha^(-1/p)` and reports the dispersion per unit of tail
/// probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SdScale {
    #[default]
    Sample,
    Tail,
}

impl SdScale {
    pub fn as_str(self) -> &'static str {
        match self {
            SdScale::Sample => "sample",
            SdScale::Tail => "tail",
        }
    }
}

impl fmt::Display for SdScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SdScale {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "sample" => Ok(SdScale::Sample),
            "tail" => Ok(SdScale::Tail),
            other => Err(format!(
                "unknown SD scale {other:?}; expected sample or tail"
            )),
        }
    }
}

/// Significance level, penalty exponent, norm power and estimator mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskConfig {
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
    pub mode: EstimatorMode,
    #[serde(default)]
    pub sd_scale: SdScale,
}

impl RiskConfig {
    pub fn new(alpha: f64, beta: f64, p: f64, mode: EstimatorMode) -> Result<Self> {
        validate_alpha(alpha)?;
        if !(beta >= 0.0) || beta.is_infinite() {
            return Err(RiskError::param("beta", beta, "must be finite and >= 0"));
        }
        validate_p(p)?;
        Ok(Self {
            alpha,
            beta,
            p,
            mode,
            sd_scale: SdScale::Sample,
        })
    }

    pub fn with_sd_scale(mut self, sd_scale: SdScale) -> Self {
        self.sd_scale = sd_scale;
        self
    }

    pub fn with_alpha(self, alpha: f64) -> Result<Self> {
        Self::new(alpha, self.beta, self.p, self.mode).map(|c| c.with_sd_scale(self.sd_scale))
    }

    pub fn with_beta(self, beta: f64) -> Result<Self> {
        Self::new(self.alpha, beta, self.p, self.mode).map(|c| c.with_sd_scale(self.sd_scale))
    }

    /// Weight `(1 - alpha)^beta` applied to SD.
    pub fn penalty(&self) -> f64 {
        penalty_weight(self.alpha, self.beta)
    }
}

pub(crate) fn validate_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(RiskError::param(
            "alpha",
            alpha,
            "must lie in the open interval (0, 1)",
        ))
    }
}

pub(crate) fn validate_p(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(RiskError::param("p", p, "must be finite and >= 1"))
    }
}

/// `(1 - alpha)^beta`.
pub fn penalty_weight(alpha: f64, beta: f64) -> f64 {
    (1.0 - alpha).powf(beta)
}

/// Tail mass `N * alpha` and quantile rank `k = ceil(N * alpha)`.
///
/// Products within `1e-9` (relative) of an integer are snapped to it so that
/// e.g. `N = 100, alpha = 0.07` gives `k = 7` rather than 8.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailSize {
    pub n_alpha: f64,
    pub k: usize,
}

impl TailSize {
    pub fn new(n: usize, alpha: f64) -> Result<Self> {
        validate_alpha(alpha)?;
        let raw = n as f64 * alpha;
        let nearest = raw.round();
        let n_alpha = if (raw - nearest).abs() <= 1e-9 * nearest.max(1.0) {
            nearest
        } else {
            raw
        };
        if n_alpha < 1.0 {
            return Err(RiskError::InsufficientTail { n, alpha, n_alpha });
        }
        Ok(Self {
            n_alpha,
            k: (n_alpha.ceil() as usize).min(n),
        })
    }
}

/// Outcome of an ES estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EsEstimate {
    pub value: f64,
    pub tail_count: usize,
    /// Literal mode found no observation strictly below the quantile.
    pub degenerate: bool,
}

/// A sample sorted ascending, shared by all estimators so that one sort
/// serves any number of `(alpha, beta, p)` evaluations.
#[derive(Debug, Clone)]
pub struct SortedSample {
    sorted: Vec<f64>,
}

impl SortedSample {
    pub fn new(series: &ReturnSeries) -> Self {
        Self::from_values(series.values())
    }

    pub(crate) fn from_values(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        Self { sorted }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    pub fn var(&self, alpha: f64) -> Result<f64> {
        let tail = TailSize::new(self.len(), alpha)?;
        Ok(-self.sorted[tail.k - 1])
    }

    pub fn es(&self, alpha: f64, mode: EstimatorMode) -> Result<EsEstimate> {
        let tail = TailSize::new(self.len(), alpha)?;
        Ok(self.es_with(tail, mode))
    }

    fn es_with(&self, tail: TailSize, mode: EstimatorMode) -> EsEstimate {
        let quantile = self.sorted[tail.k - 1];
        match mode {
            EstimatorMode::Literal => {
                let below = self.sorted.partition_point(|&x| x < quantile);
                if below == 0 {
                    return EsEstimate {
                        value: 0.0,
                        tail_count: 0,
                        degenerate: true,
                    };
                }
                let sum: f64 = self.sorted[..below].iter().sum();
                EsEstimate {
                    value: -sum / tail.n_alpha,
                    tail_count: below,
                    degenerate: false,
                }
            }
            EstimatorMode::Coherent => {
                // -(sum_{i<k} X_(i) + (N*alpha - k + 1) X_(k)) / (N*alpha), centered on
                // X_(k): exact for ties and never below VaR.
                let excess: f64 = self.sorted[..tail.k - 1].iter().map(|x| x - quantile).sum();
                EsEstimate {
                    value: -(quantile + excess / tail.n_alpha),
                    tail_count: tail.k,
                    degenerate: false,
                }
            }
        }
    }

    pub fn sd(&self, alpha: f64, p: f64, mode: EstimatorMode, scale: SdScale) -> Result<f64> {
        validate_p(p)?;
        let tail = TailSize::new(self.len(), alpha)?;
        let es = self.es_with(tail, mode);
        Ok(self.sd_with(tail, -es.value, p, scale))
    }

    fn sd_with(&self, tail: TailSize, e_alpha: f64, p: f64, scale: SdScale) -> f64 {
        let mut sum = 0.0;
        for &x in &self.sorted {
            if x >= e_alpha {
                break;
            }
            let gap = e_alpha - x;
            sum += if p == 1.0 {
                gap
            } else if p == 2.0 {
                gap * gap
            } else {
                gap.powf(p)
            };
        }
        let divisor = match scale {
            SdScale::Sample => self.len() as f64,
            SdScale::Tail => tail.n_alpha,
        };
        let mean = sum / divisor;
        if p == 1.0 {
            mean
        } else if p == 2.0 {
            mean.sqrt()
        } else {
            mean.powf(1.0 / p)
        }
    }

    pub fn report(&self, config: &RiskConfig) -> Result<RiskReport> {
        let tail = TailSize::new(self.len(), config.alpha)?;
        let var = -self.sorted[tail.k - 1];
        let es = self.es_with(tail, config.mode);
        let sd = self.sd_with(tail, -es.value, config.p, config.sd_scale);
        let sdr = es.value + config.penalty() * sd;
        Ok(RiskReport {
            alpha: config.alpha,
            beta: config.beta,
            p: config.p,
            mode: config.mode,
            n: self.len(),
            var,
            es: es.value,
            sd,
            sdr,
            q_alpha: -var,
            e_alpha: -es.value,
            tail_count: es.tail_count,
            degenerate_tail: es.degenerate,
        })
    }
}

/// VaR, ES, SD and SDR of one series under one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskReport {
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
    pub mode: EstimatorMode,
    pub n: usize,
    pub var: f64,
    pub es: f64,
    pub sd: f64,
    pub sdr: f64,
    pub q_alpha: f64,
    pub e_alpha: f64,
    pub tail_count: usize,
    pub degenerate_tail: bool,
}

impl RiskReport {
    /// Negates VaR, ES and SDR so they sit on the return axis. SD stays a
    /// non-negative dispersion.
    pub fn signed(self) -> Self {
        Self {
            var: -self.var,
            es: -self.es,
            sdr: -self.sdr,
            ..self
        }
    }
}

pub fn var_hs(series: &ReturnSeries, alpha: f64) -> Result<f64> {
    SortedSample::new(series).var(alpha)
}

pub fn es_hs(series: &ReturnSeries, alpha: f64, mode: EstimatorMode) -> Result<f64> {
    Ok(SortedSample::new(series).es(alpha, mode)?.value)
}

/// SD with the full-sample divisor.
pub fn sd_hs(series: &ReturnSeries, alpha: f64, p: f64, mode: EstimatorMode) -> Result<f64> {
    SortedSample::new(series).sd(alpha, p, mode, SdScale::Sample)
}

pub fn sdr_hs(series: &ReturnSeries, config: &RiskConfig) -> Result<RiskReport> {
    SortedSample::new(series).report(config)
}

/// Sample moments. Skewness and kurtosis are `None` for a zero-variance sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DescriptiveStats {
    pub n: usize,
    pub mean: f64,
    /// Divisor `N - 1`.
    pub st_dev: f64,
    /// Third standardized central moment.
    pub skewness: Option<f64>,
    /// Raw fourth standardized central moment (3 for a normal law).
    pub kurtosis: Option<f64>,
    pub min: f64,
    pub max: f64,
}

pub fn descriptive_stats(series: &ReturnSeries) -> Result<DescriptiveStats> {
    let n = series.len();
    if n < 2 {
        return Err(RiskError::InsufficientData {
            what: "standard deviation",
            needed: 2,
            got: n,
        });
    }
    if n < 4 {
        return Err(RiskError::InsufficientData {
            what: "kurtosis",
            needed: 4,
            got: n,
        });
    }
    let nf = n as f64;
    let mean = series.mean();
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in series.values() {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let st_dev = (m2 / (nf - 1.0)).sqrt();
    let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
    let (skewness, kurtosis) = if m2 > 0.0 {
        (Some(m3 / m2.powf(1.5)), Some(m4 / (m2 * m2)))
    } else {
        (None, None)
    };
    Ok(DescriptiveStats {
        n,
        mean: mean.clamp(series.min(), series.max()),
        st_dev,
        skewness,
        kurtosis,
        min: series.min(),
        max: series.max(),
    })
}
