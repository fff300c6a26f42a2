//! Tail-risk measurement with the Shortfall Deviation Risk (SDR) measure.
//!
//! SDR penalizes Expected Shortfall by the dispersion of outcomes below it:
//! `SDR = ES + (1 - alpha)^beta * SD`. The crate provides:
//!
//! - [`measures`]: historical-simulation estimators of VaR, ES, SD and SDR.
//! - [`simulation`]: AR(1)-GARCH(1,1) paths with normal or Student-t innovations.
//! - [`axioms`]: randomized verification of coherence and deviation axioms.
//! - [`experiments`]: Monte Carlo replication, rolling windows, curves and surfaces.
//! - [`table`]: CSV rendering of every result type.

// `!(x < bound)` deliberately rejects NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod axioms;
pub mod error;
pub mod experiments;
pub mod measures;
pub mod rng;
pub mod simulation;
pub mod table;

pub use error::{Result, RiskError};
pub use measures::{
    descriptive_stats, es_hs, log_returns, sd_hs, sdr_hs, var_hs, DescriptiveStats, EstimatorMode,
    ReturnSeries, RiskConfig, RiskReport, SdScale, SortedSample,
};
pub use simulation::{scenario_params, simulate_path, GarchParams, Innovation, Scenario};
