use thiserror::Error;

/// Errors produced by budget construction, mechanism calibration, and the
/// downstream e-value procedures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A scalar parameter fell outside its domain.
    #[error("{name} must be {requirement}, got {value}")]
    Domain {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },

    /// Two releases were combined although their privacy budgets disagree.
    #[error("privacy budgets do not match: {left} vs {right}")]
    BudgetMismatch { left: String, right: String },

    /// A ledger at one Rényi order was asked to absorb a release at another.
    #[error("ledger tracks Rényi order {ledger_alpha}, release has order {release_alpha}")]
    LedgerOrderMismatch {
        ledger_alpha: f64,
        release_alpha: f64,
    },

    /// The biased Laplace mechanism has no valid scale at this budget: the
    /// calibration equation only has solutions with scale >= 1. The biased
    /// Gaussian mechanism is defined for every budget and is the usual fallback.
    #[error(
        "biased Laplace mechanism undefined at (alpha={alpha}, epsilon={epsilon}) for \
         log-sensitivity {sensitivity}; the biased Gaussian mechanism handles this budget"
    )]
    LaplaceUndefined {
        alpha: f64,
        epsilon: f64,
        sensitivity: f64,
    },

    /// Pure-DP Laplace noise on the log scale needs epsilon strictly above the
    /// log-sensitivity, otherwise its scale reaches 1 and no bias restores
    /// e-value validity.
    #[error("pure-DP Laplace requires epsilon > log-sensitivity, got epsilon={epsilon}, sensitivity={sensitivity}")]
    PureDpUndefined { epsilon: f64, sensitivity: f64 },

    /// `E[exp(-xi)]` diverges for Laplace noise with scale >= 1.
    #[error("MGF at -1 undefined for Laplace scale {scale} (requires scale < 1)")]
    MgfUndefined { scale: f64 },

    /// A noise spec fails the e-value validity bound `E[exp(-xi)] <= 1`.
    #[error("noise spec violates e-value validity: mean {mean} below required minimum {min_mean}")]
    InvalidSpec { mean: f64, min_mean: f64 },

    /// An observation, loss, or score at `index` fell outside the accepted range.
    #[error("value {value} at index {index} out of range ({expected})")]
    OutOfRange {
        index: usize,
        value: f64,
        expected: &'static str,
    },

    /// A betting support is incompatible with the target mean: some bet could
    /// drive the wealth factor `1 + lambda (y - theta)` to zero or below.
    #[error("betting support [{lambda_inf}, {lambda_sup}] incompatible with theta {theta}")]
    SupportIncompatible {
        lambda_inf: f64,
        lambda_sup: f64,
        theta: f64,
    },

    /// Cell e-values handed to CI assembly must cover each partition cell
    /// exactly once.
    #[error("cell e-values malformed: {0}")]
    MalformedCells(String),

    /// `invert_h_alpha` was asked for a target below the range of `h_alpha`.
    #[error("target {target} below the minimum {minimum} of h_alpha")]
    TargetBelowRange { target: f64, minimum: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(name: &'static str, requirement: &'static str, value: f64) -> Self {
        Error::Domain {
            name,
            requirement,
            value,
        }
    }
}

/// Rejects non-finite and out-of-domain scalars with a uniform error shape.
pub(crate) fn require(
    cond: bool,
    name: &'static str,
    requirement: &'static str,
    value: f64,
) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::domain(name, requirement, value))
    }
}
