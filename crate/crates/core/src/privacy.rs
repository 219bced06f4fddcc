//! Privacy budgets, noise-family Rényi divergences, and composition.
//!
//! Rényi differential privacy of order `alpha > 1` composes additively: two
//! releases at `(alpha, eps1)` and `(alpha, eps2)` jointly satisfy
//! `(alpha, eps1 + eps2)`. A [`BudgetLedger`] tracks that arithmetic for a
//! fixed order. [`RenyiBudget::to_approx_dp`] converts a Rényi guarantee to an
//! `(epsilon, delta)` one via `eps' = eps + log(1/delta) / (alpha - 1)`.

use crate::error::{require, Error, Result};

/// A Rényi differential privacy budget `(alpha, epsilon)` with `alpha > 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenyiBudget {
    alpha: f64,
    epsilon: f64,
}

impl RenyiBudget {
    pub fn new(alpha: f64, epsilon: f64) -> Result<Self> {
        require(
            alpha.is_finite() && alpha > 1.0,
            "alpha",
            "finite and > 1",
            alpha,
        )?;
        require(
            epsilon.is_finite() && epsilon > 0.0,
            "epsilon",
            "finite and > 0",
            epsilon,
        )?;
        Ok(RenyiBudget { alpha, epsilon })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Divides the budget evenly across `k` releases: `(alpha, epsilon / k)`.
    ///
    /// Useful when a procedure must publish `k` values under a joint budget;
    /// recombining the `k` parts in a ledger restores the original `epsilon`
    /// up to rounding.
    pub fn split(&self, k: usize) -> Result<Self> {
        require(k >= 1, "k", "a positive integer", k as f64)?;
        RenyiBudget::new(self.alpha, self.epsilon / k as f64)
    }

    /// Converts `(alpha, epsilon)`-RDP to `(epsilon', delta)`-approximate DP
    /// with `epsilon' = epsilon + log(1/delta) / (alpha - 1)`.
    pub fn to_approx_dp(&self, delta: f64) -> Result<ApproxDPBudget> {
        require(
            delta > 0.0 && delta < 1.0,
            "delta",
            "strictly inside (0, 1)",
            delta,
        )?;
        ApproxDPBudget::new(self.epsilon + (1.0 / delta).ln() / (self.alpha - 1.0), delta)
    }
}

/// An approximate differential privacy budget `(epsilon, delta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxDPBudget {
    epsilon: f64,
    delta: f64,
}

impl ApproxDPBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        require(
            epsilon.is_finite() && epsilon > 0.0,
            "epsilon",
            "finite and > 0",
            epsilon,
        )?;
        require(
            (0.0..1.0).contains(&delta),
            "delta",
            "within [0, 1)",
            delta,
        )?;
        Ok(ApproxDPBudget { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// Either flavor of privacy guarantee carried by a released value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrivacyBudget {
    Renyi(RenyiBudget),
    Approx(ApproxDPBudget),
}

impl std::fmt::Display for PrivacyBudget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PrivacyBudget::Renyi(b) => write!(f, "RDP(alpha={}, eps={})", b.alpha, b.epsilon),
            PrivacyBudget::Approx(b) => write!(f, "DP(eps={}, delta={})", b.epsilon, b.delta),
        }
    }
}

/// The worst-case absolute change of a statistic's logarithm across
/// neighboring datasets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSensitivity(f64);

impl LogSensitivity {
    pub fn new(value: f64) -> Result<Self> {
        require(
            value.is_finite() && value >= 0.0,
            "log-sensitivity",
            "finite and >= 0",
            value,
        )?;
        Ok(LogSensitivity(value))
    }

    pub fn get(&self) -> f64 {
        self.0
    }
}

/// Rényi divergence of order `alpha` between `N(shift, variance)` and
/// `N(0, variance)`: `alpha * shift^2 / (2 * variance)`.
pub fn renyi_divergence_gaussian(shift: f64, variance: f64, alpha: f64) -> Result<f64> {
    require(shift.is_finite(), "shift", "finite", shift)?;
    require(
        variance.is_finite() && variance > 0.0,
        "variance",
        "finite and > 0",
        variance,
    )?;
    require(
        alpha.is_finite() && alpha > 1.0,
        "alpha",
        "finite and > 1",
        alpha,
    )?;
    Ok(alpha * shift * shift / (2.0 * variance))
}

/// Rényi divergence of order `alpha` between `Laplace(shift, scale)` and
/// `Laplace(0, scale)`:
///
/// ```text
/// 1/(alpha-1) * log( alpha/(2 alpha - 1) * exp((alpha-1)|shift|/scale)
///                  + (alpha-1)/(2 alpha - 1) * exp(-alpha |shift|/scale) )
/// ```
///
/// Evaluated in the log domain so large `|shift|/scale` never overflows.
pub fn renyi_divergence_laplace(shift: f64, scale: f64, alpha: f64) -> Result<f64> {
    require(shift.is_finite(), "shift", "finite", shift)?;
    require(
        scale.is_finite() && scale > 0.0,
        "scale",
        "finite and > 0",
        scale,
    )?;
    require(
        alpha.is_finite() && alpha > 1.0,
        "alpha",
        "finite and > 1",
        alpha,
    )?;
    let r = shift.abs() / scale;
    let log_a = (alpha / (2.0 * alpha - 1.0)).ln() + (alpha - 1.0) * r;
    let log_b = ((alpha - 1.0) / (2.0 * alpha - 1.0)).ln() - alpha * r;
    Ok(crate::numeric::log_add_exp(log_a, log_b) / (alpha - 1.0))
}

/// An append-only record of Rényi releases at a fixed order, with additive
/// composition of their epsilons.
///
/// The ledger is a value: [`BudgetLedger::record`] consumes it and returns the
/// extended ledger, so concurrent writers cannot race on partial state.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetLedger {
    alpha: f64,
    entries: Vec<(String, f64)>,
}

impl BudgetLedger {
    pub fn new(alpha: f64) -> Result<Self> {
        require(
            alpha.is_finite() && alpha > 1.0,
            "alpha",
            "finite and > 1",
            alpha,
        )?;
        Ok(BudgetLedger {
            alpha,
            entries: Vec::new(),
        })
    }

    /// Appends a labeled release. The release must carry the ledger's order;
    /// mixing orders has no additive composition rule and is rejected.
    pub fn record(mut self, label: impl Into<String>, release: RenyiBudget) -> Result<Self> {
        if release.alpha() != self.alpha {
            return Err(Error::LedgerOrderMismatch {
                ledger_alpha: self.alpha,
                release_alpha: release.alpha(),
            });
        }
        self.entries.push((label.into(), release.epsilon()));
        Ok(self)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Total epsilon spent across all recorded releases.
    pub fn spent(&self) -> f64 {
        self.entries.iter().map(|(_, e)| e).sum()
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_divergence_frozen_values() {
        assert_eq!(renyi_divergence_gaussian(1.0, 1.0, 2.0).unwrap(), 1.0);
        let got = renyi_divergence_gaussian(0.1, 0.02, 2.0).unwrap();
        assert!((got - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gaussian_divergence_rejects_bad_variance() {
        assert!(renyi_divergence_gaussian(1.0, 0.0, 2.0).is_err());
        assert!(renyi_divergence_gaussian(1.0, -1.0, 2.0).is_err());
        assert!(renyi_divergence_gaussian(1.0, f64::NAN, 2.0).is_err());
    }

    #[test]
    fn laplace_divergence_frozen_value() {
        // log((2/3) e + (1/3) e^{-2}) evaluated independently at high precision.
        let got = renyi_divergence_laplace(1.0, 1.0, 2.0).unwrap();
        assert!((got - 0.619123629998593).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn laplace_divergence_zero_shift_is_zero() {
        let got = renyi_divergence_laplace(0.0, 0.5, 3.0).unwrap();
        // At zero shift the argument is alpha/(2a-1) + (a-1)/(2a-1) = 1.
        assert!(got.abs() < 1e-15);
    }

    #[test]
    fn laplace_divergence_monotone_in_shift_magnitude() {
        for &(scale, alpha) in &[(0.3, 1.5), (1.0, 2.0), (2.0, 10.0)] {
            let mut last = -1.0;
            for i in 0..60 {
                let shift = i as f64 * 0.25;
                let d = renyi_divergence_laplace(shift, scale, alpha).unwrap();
                assert!(d >= last, "divergence decreased at shift {shift}");
                let d_neg = renyi_divergence_laplace(-shift, scale, alpha).unwrap();
                assert_eq!(d, d_neg, "divergence not symmetric at shift {shift}");
                last = d;
            }
        }
    }

    #[test]
    fn gaussian_divergence_scales_exactly() {
        // Linear in alpha and quadratic in the shift; with power-of-two factors
        // both identities are exact in floating point.
        let base = renyi_divergence_gaussian(0.3, 0.7, 2.0).unwrap();
        assert_eq!(renyi_divergence_gaussian(0.3, 0.7, 4.0).unwrap(), 2.0 * base);
        assert_eq!(renyi_divergence_gaussian(0.6, 0.7, 2.0).unwrap(), 4.0 * base);
    }

    #[test]
    fn rdp_to_approx_dp_frozen_values() {
        let b = RenyiBudget::new(1001.0, 1.0).unwrap();
        let approx = b.to_approx_dp(0.5).unwrap();
        assert!((approx.epsilon() - 1.000_693_147_180_56).abs() < 1e-12);
        assert_eq!(approx.delta(), 0.5);
        // delta = 1 is rejected: the conversion needs log(1/delta) > 0.
        assert!(RenyiBudget::new(2.0, 1.0).unwrap().to_approx_dp(1.0).is_err());
        assert!(RenyiBudget::new(2.0, 1.0).unwrap().to_approx_dp(0.0).is_err());
    }

    #[test]
    fn rdp_to_approx_dp_approaches_epsilon_as_delta_grows() {
        let b = RenyiBudget::new(4.0, 0.8).unwrap();
        let mut last = f64::INFINITY;
        for &delta in &[1e-9, 1e-6, 1e-3, 0.1, 0.5, 0.999, 1.0 - 1e-12] {
            let eps = b.to_approx_dp(delta).unwrap().epsilon();
            assert!(eps >= b.epsilon(), "conversion dipped below epsilon");
            assert!(eps <= last, "epsilon' not decreasing in delta");
            last = eps;
        }
        assert!((last - b.epsilon()).abs() < 1e-11);
    }

    #[test]
    fn split_budget_divides_epsilon() {
        let b = RenyiBudget::new(2.0, 1.0).unwrap();
        let part = b.split(20).unwrap();
        assert_eq!(part.alpha(), 2.0);
        assert_eq!(part.epsilon(), 0.05);
        assert!(b.split(0).is_err());
    }

    #[test]
    fn ledger_composes_additively_and_rejects_mixed_orders() {
        let ledger = BudgetLedger::new(2.0).unwrap();
        let ledger = ledger
            .record("first", RenyiBudget::new(2.0, 0.3).unwrap())
            .unwrap()
            .record("second", RenyiBudget::new(2.0, 0.7).unwrap())
            .unwrap();
        assert_eq!(ledger.len(), 2);
        assert!((ledger.spent() - 1.0).abs() < 1e-15);

        let err = ledger
            .clone()
            .record("third", RenyiBudget::new(3.0, 0.1).unwrap())
            .unwrap_err();
        assert!(matches!(err, Error::LedgerOrderMismatch { .. }));
    }

    #[test]
    fn ledger_spent_is_order_independent() {
        let parts = [0.11, 0.2, 0.05, 0.31, 0.17];
        let forward = parts.iter().enumerate().fold(
            BudgetLedger::new(2.0).unwrap(),
            |ledger, (i, &e)| {
                ledger
                    .record(format!("r{i}"), RenyiBudget::new(2.0, e).unwrap())
                    .unwrap()
            },
        );
        let backward = parts.iter().rev().enumerate().fold(
            BudgetLedger::new(2.0).unwrap(),
            |ledger, (i, &e)| {
                ledger
                    .record(format!("r{i}"), RenyiBudget::new(2.0, e).unwrap())
                    .unwrap()
            },
        );
        assert!((forward.spent() - backward.spent()).abs() < 1e-12 * forward.spent());
    }

    #[test]
    fn budget_types_reject_bad_parameters() {
        assert!(RenyiBudget::new(1.0, 1.0).is_err());
        assert!(RenyiBudget::new(2.0, 0.0).is_err());
        assert!(RenyiBudget::new(f64::INFINITY, 1.0).is_err());
        assert!(ApproxDPBudget::new(1.0, 1.0).is_err());
        assert!(ApproxDPBudget::new(1.0, -0.1).is_err());
        assert!(ApproxDPBudget::new(0.0, 0.5).is_err());
        assert!(LogSensitivity::new(-0.1).is_err());
        assert!(LogSensitivity::new(f64::NAN).is_err());
        assert_eq!(LogSensitivity::new(0.0).unwrap().get(), 0.0);
    }
}
