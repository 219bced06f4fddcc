//! Differentially private e-values via biased multiplicative noise.
//!
//! An e-value is a nonnegative statistic with expectation at most one under a
//! null hypothesis. This crate privatizes e-values by multiplying them with
//! `exp(-xi)` where `xi` is noise whose distribution is deliberately shifted
//! upward so that `E[exp(-xi)] <= 1`: the release stays a valid e-value while
//! the noise grants Rényi or approximate differential privacy, calibrated to
//! the log-sensitivity of the underlying statistic.
//!
//! The crate is organized bottom-up:
//!
//! * [`privacy`] — budget types, Rényi divergences of the noise families, a
//!   composition ledger, and the Rényi-to-approximate-DP conversion.
//! * [`mechanisms`] — biased Gaussian and biased Laplace noise calibration,
//!   sampling, and validity (MGF) checks.
//! * [`evalue`] — the e-value algebra: privatization, products over
//!   independent data, convex averaging, the e-to-p conversion, and the
//!   growth-rate penalty paid for privacy.
//! * [`mean`] — betting-style e-values for the mean of bounded observations,
//!   with closed-form log-sensitivity and Lipschitz bounds.
//! * [`confidence`] — private confidence sets for a bounded mean built by
//!   testing each cell of a partition.
//! * [`monitor`] — anytime-valid private risk monitoring over loss batches.
//! * [`conformal`] — private e-conformal prediction sets over quantized
//!   nonconformity scores.
//! * [`validation`] — the registry of Monte Carlo and deterministic checks
//!   behind the `validate` subcommand of the companion CLI.

pub mod conformal;
pub mod confidence;
mod error;
pub mod evalue;
pub mod mean;
pub mod mechanisms;
pub mod monitor;
mod numeric;
pub mod privacy;
pub mod validation;

pub use error::{Error, Result};

pub use conformal::{
    exch_evalue, exch_sensitivity, predict_set, privatize_levels, CalibrationScores,
    PredictionSet, PrivateLevelEValues, ScoreQuantizer,
};
pub use confidence::{build_ci, deflate, private_ci, CellEValue, CiConfig, ConfidenceSet, Partition};
pub use evalue::{
    average, continue_product, e_to_p, privatize, CombineRecord, EValue, PValue, PrivateEValue,
};
pub use mean::{BettingPrior, BoundedSample, MeanEValueState, PriorConfig};
pub use mechanisms::{
    calibrate_gaussian_approx_dp, calibrate_gaussian_rdp, calibrate_laplace_pure_dp,
    calibrate_laplace_rdp, h_alpha, invert_h_alpha, CalibratedNoise, GaussianNoiseSpec,
    LaplaceNoiseSpec, MechanismKind, NoiseSpec,
};
pub use monitor::{alarm_threshold, BatchRecord, Monitor, MonitorConfig};
pub use privacy::{
    renyi_divergence_gaussian, renyi_divergence_laplace, ApproxDPBudget, BudgetLedger,
    LogSensitivity, PrivacyBudget, RenyiBudget,
};
pub use validation::{run_all, CheckConfig, CheckReport, CORE_CHECK_COUNT};
