//! Betting e-values for the mean of bounded observations.
//!
//! To test `H0: E[Y] = theta` for observations in `[0, 1]`, a bettor stakes a
//! fraction `lambda` of current wealth on each observation; the wealth factor
//! is `1 + lambda (y - theta)`, which has expectation one under the null, so
//! wealth is an e-value. Instead of one bet, a discrete prior over betting
//! fractions is maintained and the e-value is the prior-weighted mixture of
//! per-atom wealth:
//!
//! ```text
//! E_n = sum_k w_k prod_{i<=n} (1 + lambda_k (Y_i - theta))
//! ```
//!
//! The mixture equals the product of per-step bets at the *predictable*
//! fraction (the wealth-weighted prior mean of `lambda` over observations
//! seen so far), which is what [`MeanEValueState::betting_fraction`] exposes.
//! All wealth is kept in the log domain; at `n = 100_000` the spread across
//! atoms reaches hundreds of nats.
//!
//! Two closed-form bounds drive privatization: the worst-case change of
//! `log E_n` when one observation is replaced ([`BettingPrior::log_sensitivity_bound`])
//! and the Lipschitz constant of `theta -> log E_n(theta)` over a theta range
//! ([`BettingPrior::lipschitz_bound`]), used to deflate neighboring cells in
//! confidence-set construction.

use crate::error::{require, Error, Result};
use crate::evalue::EValue;
use crate::numeric::weighted_log_sum_exp;
use crate::privacy::LogSensitivity;

/// Default number of prior atoms used by the higher-level procedures.
pub const DEFAULT_ATOMS: usize = 101;

/// Relative margin by which atom construction stays away from the open
/// support endpoints `-1/(1-theta)` and `1/theta`.
pub const SUPPORT_MARGIN: f64 = 1e-6;

/// One observation in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundedSample(f64);

impl BoundedSample {
    pub fn new(y: f64) -> Result<Self> {
        require(
            y.is_finite() && (0.0..=1.0).contains(&y),
            "observation",
            "within [0, 1]",
            y,
        )?;
        Ok(BoundedSample(y))
    }

    /// Validates a whole slice, reporting the index of the first offender.
    pub fn many(ys: &[f64]) -> Result<Vec<Self>> {
        ys.iter()
            .enumerate()
            .map(|(index, &value)| {
                BoundedSample::new(value).map_err(|_| Error::OutOfRange {
                    index,
                    value,
                    expected: "within [0, 1]",
                })
            })
            .collect()
    }

    pub fn get(&self) -> f64 {
        self.0
    }
}

/// A discrete prior over betting fractions, tied to the target mean `theta`
/// it was validated against.
#[derive(Debug, Clone, PartialEq)]
pub struct BettingPrior {
    atoms: Vec<f64>,
    weights: Vec<f64>,
    lambda_inf: f64,
    lambda_sup: f64,
    theta: f64,
}

impl BettingPrior {
    /// Equal-weight atoms at the midpoints of `k` equal subintervals of
    /// `[lambda_inf, lambda_sup]`, clipped into the open interval
    /// `(-1/(1-theta), 1/theta)` by the relative [`SUPPORT_MARGIN`] so every
    /// wealth factor stays strictly positive.
    pub fn uniform(lambda_inf: f64, lambda_sup: f64, k: usize, theta: f64) -> Result<Self> {
        require(
            theta.is_finite() && theta > 0.0 && theta < 1.0,
            "theta",
            "strictly inside (0, 1)",
            theta,
        )?;
        require(k >= 1, "k", "a positive integer", k as f64)?;
        require(
            lambda_inf.is_finite() && lambda_sup.is_finite() && lambda_inf <= lambda_sup,
            "betting support",
            "finite with lambda_inf <= lambda_sup",
            lambda_sup - lambda_inf,
        )?;
        let lo_limit = -(1.0 - SUPPORT_MARGIN) / (1.0 - theta);
        let hi_limit = (1.0 - SUPPORT_MARGIN) / theta;
        let lo = lambda_inf.max(lo_limit);
        let hi = lambda_sup.min(hi_limit);
        if lo > hi {
            return Err(Error::SupportIncompatible {
                lambda_inf,
                lambda_sup,
                theta,
            });
        }
        let width = hi - lo;
        let atoms: Vec<f64> = (0..k)
            .map(|i| lo + (i as f64 + 0.5) * width / k as f64)
            .collect();
        let weights = vec![1.0 / k as f64; k];
        Ok(BettingPrior {
            atoms,
            weights,
            lambda_inf: lo,
            lambda_sup: hi,
            theta,
        })
    }

    /// One-sided prior on `[0, c/theta)` for detecting upward drift above
    /// `theta`: equal-weight atoms at the midpoints of `k` equal subintervals.
    /// `c < 1` keeps every wealth factor above `1 - c`.
    pub fn one_sided(c: f64, theta: f64, k: usize) -> Result<Self> {
        require(
            c.is_finite() && c > 0.0 && c < 1.0,
            "c",
            "strictly inside (0, 1)",
            c,
        )?;
        require(
            theta.is_finite() && theta > 0.0 && theta < 1.0,
            "theta",
            "strictly inside (0, 1)",
            theta,
        )?;
        require(k >= 1, "k", "a positive integer", k as f64)?;
        let sup = c / theta;
        let atoms: Vec<f64> = (0..k).map(|i| (i as f64 + 0.5) * sup / k as f64).collect();
        let weights = vec![1.0 / k as f64; k];
        Ok(BettingPrior {
            atoms,
            weights,
            lambda_inf: 0.0,
            lambda_sup: sup,
            theta,
        })
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lambda_inf, self.lambda_sup)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Worst-case change of `log E_n` when a single observation is replaced:
    ///
    /// ```text
    /// max{ log(1 + max{lambda_sup (1-theta), -lambda_inf theta}),
    ///     -log(1 + min{lambda_inf (1-theta), -lambda_sup theta}) }
    /// ```
    ///
    /// Every per-atom wealth ratio between neighbors lies inside these two
    /// extremes, and a mixture of ratios inherits the bound.
    pub fn log_sensitivity_bound(&self, theta: f64) -> Result<LogSensitivity> {
        require(
            theta.is_finite() && theta > 0.0 && theta < 1.0,
            "theta",
            "strictly inside (0, 1)",
            theta,
        )?;
        let up = 1.0 + (self.lambda_sup * (1.0 - theta)).max(-self.lambda_inf * theta);
        let down = 1.0 + (self.lambda_inf * (1.0 - theta)).min(-self.lambda_sup * theta);
        if down <= 0.0 {
            return Err(Error::SupportIncompatible {
                lambda_inf: self.lambda_inf,
                lambda_sup: self.lambda_sup,
                theta,
            });
        }
        LogSensitivity::new(up.ln().max(-down.ln()))
    }

    /// Lipschitz constant of `theta -> log E_n(theta)`, per observation, over
    /// `[theta_inf, theta_sup]` with this prior's support held fixed:
    ///
    /// ```text
    /// max{ |lambda_sup / (1 - lambda_sup theta_sup)|,
    ///      |lambda_inf / (1 + lambda_inf (1 - theta_inf))| }
    /// ```
    pub fn lipschitz_bound(&self, theta_inf: f64, theta_sup: f64) -> Result<f64> {
        require(
            theta_inf.is_finite() && theta_inf > 0.0 && theta_inf < 1.0,
            "theta_inf",
            "strictly inside (0, 1)",
            theta_inf,
        )?;
        require(
            theta_sup.is_finite() && theta_sup >= theta_inf && theta_sup < 1.0,
            "theta_sup",
            "within [theta_inf, 1)",
            theta_sup,
        )?;
        let den_hi = 1.0 - self.lambda_sup * theta_sup;
        let den_lo = 1.0 + self.lambda_inf * (1.0 - theta_inf);
        if den_hi <= 0.0 || den_lo <= 0.0 {
            return Err(Error::SupportIncompatible {
                lambda_inf: self.lambda_inf,
                lambda_sup: self.lambda_sup,
                theta: if den_hi <= 0.0 { theta_sup } else { theta_inf },
            });
        }
        Ok((self.lambda_sup / den_hi)
            .abs()
            .max((self.lambda_inf / den_lo).abs()))
    }
}

/// Prior shape plus resolution, instantiable at any target mean. The
/// confidence-set procedure instantiates one per partition cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorConfig {
    /// Two-sided uniform support, clipped per theta.
    Uniform {
        lambda_inf: f64,
        lambda_sup: f64,
        atoms: usize,
    },
    /// One-sided support `[0, c/theta)`.
    OneSided { c: f64, atoms: usize },
}

impl PriorConfig {
    pub fn instantiate(&self, theta: f64) -> Result<BettingPrior> {
        match *self {
            PriorConfig::Uniform {
                lambda_inf,
                lambda_sup,
                atoms,
            } => BettingPrior::uniform(lambda_inf, lambda_sup, atoms, theta),
            PriorConfig::OneSided { c, atoms } => BettingPrior::one_sided(c, theta, atoms),
        }
    }
}

/// Accumulated per-atom log-wealth for one target mean.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanEValueState {
    prior: BettingPrior,
    log_wealth: Vec<f64>,
    count: u64,
}

impl MeanEValueState {
    pub fn new(prior: BettingPrior) -> Self {
        let atoms = prior.atoms.len();
        MeanEValueState {
            prior,
            log_wealth: vec![0.0; atoms],
            count: 0,
        }
    }

    pub fn prior(&self) -> &BettingPrior {
        &self.prior
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Folds one observation into every atom's wealth.
    pub fn observe(&mut self, y: BoundedSample) -> Result<()> {
        let centered = y.get() - self.prior.theta;
        for (lw, &lambda) in self.log_wealth.iter_mut().zip(&self.prior.atoms) {
            let step = lambda * centered;
            if step <= -1.0 {
                return Err(Error::Domain {
                    name: "wealth factor",
                    requirement: "strictly positive",
                    value: 1.0 + step,
                });
            }
            *lw += step.ln_1p();
        }
        self.count += 1;
        Ok(())
    }

    pub fn observe_all(&mut self, ys: &[BoundedSample]) -> Result<()> {
        for &y in ys {
            self.observe(y)?;
        }
        Ok(())
    }

    /// The mixture e-value `sum_k w_k exp(log_wealth_k)`, via shifted
    /// log-sum-exp. A fresh state evaluates to one.
    pub fn evalue(&self) -> EValue {
        if self.count == 0 {
            return EValue::one();
        }
        let log = weighted_log_sum_exp(&self.log_wealth, &self.prior.weights);
        EValue::from_log(log).expect("finite weights and wealth yield a valid log e-value")
    }

    /// The predictable betting fraction implied by current wealth: the
    /// wealth-weighted prior mean of `lambda`. Before any observation this is
    /// the prior mean.
    pub fn betting_fraction(&self) -> f64 {
        let mut shift = f64::NEG_INFINITY;
        for (&lw, &w) in self.log_wealth.iter().zip(&self.prior.weights) {
            if w > 0.0 && lw > shift {
                shift = lw;
            }
        }
        let mut numerator = 0.0;
        let mut denominator = 0.0;
        for ((&lw, &w), &lambda) in self
            .log_wealth
            .iter()
            .zip(&self.prior.weights)
            .zip(&self.prior.atoms)
        {
            let scaled = w * (lw - shift).exp();
            numerator += scaled * lambda;
            denominator += scaled;
        }
        numerator / denominator
    }
}
