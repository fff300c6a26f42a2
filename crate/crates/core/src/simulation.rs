//! AR(1)-GARCH(1,1) return paths.
//!
//! ```text
//! X_t       = ar1 * X_{t-1} + eps_t
//! eps_t     = sigma_t * z_t,   E[z] = 0, E[z^2] = 1
//! sigma_t^2 = sigma^2 (1 - arch - garch) + arch * eps_{t-1}^2 + garch * sigma_{t-1}^2
//! ```
//!
//! `sigma` is the unconditional innovation volatility. Paths start from
//! `X_0 = eps_0 = 0`, `sigma_0^2 = sigma^2` and discard a burn-in prefix.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::Serialize;

use crate::error::{Result, RiskError};
use crate::measures::ReturnSeries;
use crate::rng::{stream_rng, StreamRng};

/// Steps discarded before a path is recorded.
pub const DEFAULT_BURN_IN: usize = 1000;

/// Law of the standardized innovation `z_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum Innovation {
    Normal,
    Student { dof: f64 },
}

impl Innovation {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Innovation::Normal => Ok(()),
            Innovation::Student { dof } if dof > 2.0 && dof.is_finite() => Ok(()),
            Innovation::Student { dof } => Err(RiskError::param(
                "dof",
                dof,
                "must be finite and > 2 for a unit-variance innovation",
            )),
        }
    }
}

/// `sqrt((dof - 2) / dof)`, the factor that gives a Student-t variate unit variance.
pub fn student_scale(dof: f64) -> f64 {
    ((dof - 2.0) / dof).sqrt()
}

/// Draws unit-variance innovations for one law.
#[derive(Debug, Clone, Copy)]
pub struct InnovationSampler {
    student: Option<(StudentT<f64>, f64)>,
}

impl InnovationSampler {
    pub fn new(law: Innovation) -> Result<Self> {
        law.validate()?;
        let student = match law {
            Innovation::Normal => None,
            Innovation::Student { dof } => {
                let dist = StudentT::new(dof).map_err(|_| {
                    RiskError::param("dof", dof, "rejected by the Student-t sampler")
                })?;
                Some((dist, student_scale(dof)))
            }
        };
        Ok(Self { student })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.student {
            None => StandardNormal.sample(rng),
            Some((dist, scale)) => scale * dist.sample(rng),
        }
    }
}

/// One draw with mean 0 and variance 1.
pub fn standardized_innovation<R: Rng + ?Sized>(law: Innovation, rng: &mut R) -> Result<f64> {
    Ok(InnovationSampler::new(law)?.sample(rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GarchParams {
    pub ar1: f64,
    pub arch: f64,
    pub garch: f64,
    pub sigma_uncond: f64,
    pub innovation: Innovation,
}

impl GarchParams {
    pub fn new(
        ar1: f64,
        arch: f64,
        garch: f64,
        sigma_uncond: f64,
        innovation: Innovation,
    ) -> Result<Self> {
        let params = Self {
            ar1,
            arch,
            garch,
            sigma_uncond,
            innovation,
        };
        params.validate()?;
        Ok(params)
    }

    /// Coefficients used in every named scenario.
    pub fn standard(sigma_uncond: f64, innovation: Innovation) -> Result<Self> {
        Self::new(0.10, 0.10, 0.85, sigma_uncond, innovation)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ar1.abs() < 1.0) {
            return Err(RiskError::param("ar1", self.ar1, "must satisfy |ar1| < 1"));
        }
        if !(self.arch >= 0.0) {
            return Err(RiskError::param("arch", self.arch, "must be >= 0"));
        }
        if !(self.garch >= 0.0) {
            return Err(RiskError::param("garch", self.garch, "must be >= 0"));
        }
        if !(self.arch + self.garch < 1.0) {
            return Err(RiskError::param(
                "arch + garch",
                self.arch + self.garch,
                "must be < 1 for a stationary variance",
            ));
        }
        if !(self.sigma_uncond > 0.0 && self.sigma_uncond.is_finite()) {
            return Err(RiskError::param(
                "sigma",
                self.sigma_uncond,
                "must be finite and > 0",
            ));
        }
        self.innovation.validate()
    }

    /// Variance intercept `sigma^2 (1 - arch - garch)`.
    pub fn omega(&self) -> f64 {
        self.sigma_uncond * self.sigma_uncond * (1.0 - self.arch - self.garch)
    }

    /// Stationary variance of `X_t`, `sigma^2 / (1 - ar1^2)`.
    pub fn return_variance(&self) -> f64 {
        self.sigma_uncond * self.sigma_uncond / (1.0 - self.ar1 * self.ar1)
    }
}

/// Recursion state carried between steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState {
    pub x_prev: f64,
    pub sigma2_prev: f64,
    pub eps_prev: f64,
}

impl SimState {
    pub fn initial(params: &GarchParams) -> Self {
        Self {
            x_prev: 0.0,
            sigma2_prev: params.sigma_uncond * params.sigma_uncond,
            eps_prev: 0.0,
        }
    }

    /// Advances one period with standardized innovation `z`, returning `X_t`.
    pub fn step(&mut self, params: &GarchParams, z: f64) -> f64 {
        let sigma2 = params.omega()
            + params.arch * self.eps_prev * self.eps_prev
            + params.garch * self.sigma2_prev;
        let eps = sigma2.sqrt() * z;
        let x = params.ar1 * self.x_prev + eps;
        *self = Self {
            x_prev: x,
            sigma2_prev: sigma2,
            eps_prev: eps,
        };
        x
    }
}

/// The four named parameterizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Scenario {
    #[serde(rename = "normal-low")]
    NormalLow,
    #[serde(rename = "normal-high")]
    NormalHigh,
    #[serde(rename = "student-low")]
    StudentLow,
    #[serde(rename = "student-high")]
    StudentHigh,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::NormalLow,
        Scenario::NormalHigh,
        Scenario::StudentLow,
        Scenario::StudentHigh,
    ];

    pub const LOW_SIGMA: f64 = 0.0125;
    pub const HIGH_SIGMA: f64 = 0.022;
    pub const STUDENT_DOF: f64 = 6.0;

    pub fn name(self) -> &'static str {
        match self {
            Scenario::NormalLow => "normal-low",
            Scenario::NormalHigh => "normal-high",
            Scenario::StudentLow => "student-low",
            Scenario::StudentHigh => "student-high",
        }
    }

    pub fn params(self) -> GarchParams {
        let sigma = match self {
            Scenario::NormalLow | Scenario::StudentLow => Self::LOW_SIGMA,
            Scenario::NormalHigh | Scenario::StudentHigh => Self::HIGH_SIGMA,
        };
        let innovation = match self {
            Scenario::NormalLow | Scenario::NormalHigh => Innovation::Normal,
            Scenario::StudentLow | Scenario::StudentHigh => Innovation::Student {
                dof: Self::STUDENT_DOF,
            },
        };
        GarchParams::standard(sigma, innovation).expect("scenario constants are valid")
    }

    fn valid_names() -> String {
        Self::ALL.map(Scenario::name).join(", ")
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = RiskError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| RiskError::UnknownScenario {
                name: s.to_string(),
                valid: Self::valid_names(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub params: GarchParams,
}

pub fn scenario_params(name: &str) -> Result<ScenarioSpec> {
    let scenario: Scenario = name.parse()?;
    Ok(ScenarioSpec {
        scenario,
        params: scenario.params(),
    })
}

/// Runs the recursion with innovations supplied by `draw`.
pub fn simulate_path_with(
    params: &GarchParams,
    n: usize,
    burn_in: usize,
    mut draw: impl FnMut() -> f64,
) -> Result<ReturnSeries> {
    params.validate()?;
    if n == 0 {
        return Err(RiskError::InsufficientData {
            what: "simulated path",
            needed: 1,
            got: 0,
        });
    }
    let mut state = SimState::initial(params);
    for _ in 0..burn_in {
        state.step(params, draw());
    }
    let path = (0..n).map(|_| state.step(params, draw())).collect();
    ReturnSeries::new(path)
}

pub fn simulate_path_with_rng<R: Rng + ?Sized>(
    params: &GarchParams,
    n: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<ReturnSeries> {
    let sampler = InnovationSampler::new(params.innovation)?;
    simulate_path_with(params, n, burn_in, || sampler.sample(rng))
}

/// Path of length `n` after `burn_in` discarded steps; bit-identical for
/// identical arguments.
pub fn simulate_path(
    params: &GarchParams,
    n: usize,
    burn_in: usize,
    seed: u64,
) -> Result<ReturnSeries> {
    let mut rng: StreamRng = stream_rng(seed, 0);
    simulate_path_with_rng(params, n, burn_in, &mut rng)
}

/// i.i.d. draws from a standard normal or an unscaled Student-t law.
pub fn iid_sample(law: Innovation, n: usize, seed: u64) -> Result<ReturnSeries> {
    law.validate()?;
    let mut rng = stream_rng(seed, 0);
    let values = match law {
        Innovation::Normal => (0..n).map(|_| StandardNormal.sample(&mut rng)).collect(),
        Innovation::Student { dof } => {
            let dist = StudentT::new(dof)
                .map_err(|_| RiskError::param("dof", dof, "rejected by the Student-t sampler"))?;
            (0..n).map(|_| dist.sample(&mut rng)).collect()
        }
    };
    ReturnSeries::new(values)
}
