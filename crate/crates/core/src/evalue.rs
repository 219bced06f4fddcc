//! The private e-value algebra.
//!
//! Values live in the log domain throughout: betting e-values over long
//! streams span hundreds of nats, and privatization, products, and threshold
//! comparisons are all log-linear. [`EValue::value`] exponentiates on demand
//! and may round to infinity for extreme magnitudes even though the abstract
//! value is finite.
//!
//! Operations on released values are post-processing and never touch the
//! budget, with two exceptions spelled out on [`continue_product`] (products
//! over independent data keep the per-release budget) and [`average`] (same
//! data doubles it).

use crate::error::{require, Error, Result};
use crate::mechanisms::{CalibratedNoise, NoiseSpec};
use crate::numeric::log_add_exp;
use crate::privacy::PrivacyBudget;
use rand::Rng;

/// A nonnegative test statistic with expectation at most one under the null,
/// stored as its logarithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EValue {
    log_value: f64,
}

impl EValue {
    /// Wraps a nonnegative finite value. Zero is allowed (log is negative
    /// infinity); infinity and NaN are not.
    pub fn new(value: f64) -> Result<Self> {
        require(
            value.is_finite() && value >= 0.0,
            "e-value",
            "finite and >= 0",
            value,
        )?;
        Ok(EValue {
            log_value: value.ln(),
        })
    }

    /// Wraps a log-domain value; `-inf` encodes an e-value of zero.
    pub fn from_log(log_value: f64) -> Result<Self> {
        require(
            !log_value.is_nan() && log_value < f64::INFINITY,
            "log e-value",
            "not NaN and < +inf",
            log_value,
        )?;
        Ok(EValue { log_value })
    }

    /// The trivial e-value 1.
    pub fn one() -> Self {
        EValue { log_value: 0.0 }
    }

    /// May overflow to `+inf` when the log value exceeds ~709.
    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }

    pub fn log_value(&self) -> f64 {
        self.log_value
    }
}

/// A p-value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PValue {
    value: f64,
}

impl PValue {
    pub fn new(value: f64) -> Result<Self> {
        require(
            (0.0..=1.0).contains(&value),
            "p-value",
            "within [0, 1]",
            value,
        )?;
        Ok(PValue { value })
    }

    pub fn get(&self) -> f64 {
        self.value
    }
}

/// One combination applied to a released value after its initial
/// privatization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CombineRecord {
    /// Multiplied with another release over independent data.
    Product,
    /// Convex-averaged with another release.
    Average { eta: f64, same_data: bool },
}

/// A privatized e-value: the noised statistic, the privacy budget it was
/// released under, the noise spec of its root release, and one lineage record
/// per combination applied since.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivateEValue {
    log_value: f64,
    budget: PrivacyBudget,
    mechanism: NoiseSpec,
    lineage: Vec<CombineRecord>,
}

impl PrivateEValue {
    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }

    pub fn log_value(&self) -> f64 {
        self.log_value
    }

    pub fn budget(&self) -> PrivacyBudget {
        self.budget
    }

    /// Noise spec of the root release; combinations keep the left operand's.
    pub fn mechanism(&self) -> NoiseSpec {
        self.mechanism
    }

    pub fn lineage(&self) -> &[CombineRecord] {
        &self.lineage
    }
}

/// Releases `e * exp(-xi)` for one fresh noise draw, attaching the budget the
/// noise was calibrated for. Identity noise passes the value through and is
/// the non-private baseline.
pub fn privatize<R: Rng + ?Sized>(
    e: &EValue,
    noise: &CalibratedNoise,
    rng: &mut R,
) -> PrivateEValue {
    let xi = noise.sample(rng);
    PrivateEValue {
        log_value: e.log_value() - xi,
        budget: noise.budget(),
        mechanism: noise.spec(),
        lineage: Vec::new(),
    }
}

/// Multiplies two releases computed from independent datasets. The product is
/// again a valid private e-value under the *common* per-release budget —
/// which is why equal budgets are required — so repeated folding tracks an
/// experiment that continues across batches without spending more.
pub fn continue_product(a: &PrivateEValue, b: &PrivateEValue) -> Result<PrivateEValue> {
    if a.budget != b.budget {
        return Err(Error::BudgetMismatch {
            left: a.budget.to_string(),
            right: b.budget.to_string(),
        });
    }
    let mut lineage = a.lineage.clone();
    lineage.push(CombineRecord::Product);
    Ok(PrivateEValue {
        log_value: a.log_value + b.log_value,
        budget: a.budget,
        mechanism: a.mechanism,
        lineage,
    })
}

/// Convex combination `eta * a + (1 - eta) * b` of two releases.
///
/// Over independent data the average is private at the (common) per-release
/// budget; over the same data sequential composition applies and the epsilons
/// add. Rényi budgets must share their order; approximate budgets combine
/// elementwise.
pub fn average(
    a: &PrivateEValue,
    b: &PrivateEValue,
    eta: f64,
    same_data: bool,
) -> Result<PrivateEValue> {
    require(
        (0.0..=1.0).contains(&eta),
        "eta",
        "within [0, 1]",
        eta,
    )?;
    let budget = combine_average_budgets(&a.budget, &b.budget, same_data)?;
    let log_value = if eta == 1.0 {
        a.log_value
    } else if eta == 0.0 {
        b.log_value
    } else {
        log_add_exp(eta.ln() + a.log_value, (1.0 - eta).ln() + b.log_value)
    };
    let mut lineage = a.lineage.clone();
    lineage.push(CombineRecord::Average { eta, same_data });
    Ok(PrivateEValue {
        log_value,
        budget,
        mechanism: a.mechanism,
        lineage,
    })
}

fn combine_average_budgets(
    a: &PrivacyBudget,
    b: &PrivacyBudget,
    same_data: bool,
) -> Result<PrivacyBudget> {
    match (a, b) {
        (PrivacyBudget::Renyi(x), PrivacyBudget::Renyi(y)) => {
            if x.alpha() != y.alpha() {
                return Err(Error::BudgetMismatch {
                    left: a.to_string(),
                    right: b.to_string(),
                });
            }
            let epsilon = if same_data {
                x.epsilon() + y.epsilon()
            } else {
                x.epsilon().max(y.epsilon())
            };
            Ok(PrivacyBudget::Renyi(crate::privacy::RenyiBudget::new(
                x.alpha(),
                epsilon,
            )?))
        }
        (PrivacyBudget::Approx(x), PrivacyBudget::Approx(y)) => {
            let (epsilon, delta) = if same_data {
                (x.epsilon() + y.epsilon(), x.delta() + y.delta())
            } else {
                (x.epsilon().max(y.epsilon()), x.delta().max(y.delta()))
            };
            Ok(PrivacyBudget::Approx(crate::privacy::ApproxDPBudget::new(
                epsilon, delta,
            )?))
        }
        _ => Err(Error::BudgetMismatch {
            left: a.to_string(),
            right: b.to_string(),
        }),
    }
}

/// Converts a private e-value to a conservative p-value: `min(1, 1/e)`, with
/// an e-value of zero mapping to one. Pure post-processing.
pub fn e_to_p(pe: &PrivateEValue) -> PValue {
    let value = if pe.log_value <= 0.0 {
        1.0
    } else {
        (-pe.log_value).exp()
    };
    PValue { value }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{calibrate_gaussian_rdp, MechanismKind};
    use crate::privacy::{LogSensitivity, RenyiBudget};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rdp(alpha: f64, eps: f64) -> RenyiBudget {
        RenyiBudget::new(alpha, eps).unwrap()
    }

    fn released(value: f64, alpha: f64, eps: f64) -> PrivateEValue {
        let noise = MechanismKind::Identity
            .calibrate_rdp(LogSensitivity::new(1.0).unwrap(), rdp(alpha, eps))
            .unwrap();
        privatize(
            &EValue::new(value).unwrap(),
            &noise,
            &mut ChaCha8Rng::seed_from_u64(0),
        )
    }

    #[test]
    fn evalue_construction_rules() {
        assert_eq!(EValue::new(2.5).unwrap().value(), 2.5);
        assert_eq!(EValue::new(0.0).unwrap().log_value(), f64::NEG_INFINITY);
        assert_eq!(EValue::one().value(), 1.0);
        assert!(EValue::new(-0.1).is_err());
        assert!(EValue::new(f64::INFINITY).is_err());
        assert!(EValue::from_log(f64::INFINITY).is_err());
        assert!(EValue::from_log(f64::NAN).is_err());
        assert_eq!(EValue::from_log(800.0).unwrap().log_value(), 800.0);
    }

    #[test]
    fn identity_privatization_is_lossless() {
        let pe = released(2.5, 2.0, 1.0);
        assert_eq!(pe.value(), 2.5);
        assert_eq!(pe.mechanism(), NoiseSpec::Identity);
        assert!(pe.lineage().is_empty());
    }

    #[test]
    fn privatize_subtracts_the_sampled_noise_exactly() {
        let noise = calibrate_gaussian_rdp(LogSensitivity::new(0.5).unwrap(), rdp(2.0, 1.0));
        let e = EValue::new(3.0).unwrap();
        let pe = privatize(&e, &noise, &mut ChaCha8Rng::seed_from_u64(42));
        let xi = noise.spec().sample(&mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(pe.log_value(), e.log_value() - xi);
        assert_eq!(pe.budget(), noise.budget());
    }

    #[test]
    fn growth_identity_holds_exactly() {
        // (1/n) log private = (1/n) log e - xi / n, bit for bit.
        let noise = calibrate_gaussian_rdp(LogSensitivity::new(0.3).unwrap(), rdp(2.0, 0.7));
        let e = EValue::new(7.25).unwrap();
        for seed in 0..50u64 {
            let pe = privatize(&e, &noise, &mut ChaCha8Rng::seed_from_u64(seed));
            let xi = noise.spec().sample(&mut ChaCha8Rng::seed_from_u64(seed));
            let n = 16.0;
            assert_eq!(pe.log_value() / n, (e.log_value() - xi) / n);
        }
    }

    #[test]
    fn product_multiplies_values_and_keeps_budget() {
        let a = released(2.0, 2.0, 0.5);
        let b = released(3.0, 2.0, 0.5);
        let ab = continue_product(&a, &b).unwrap();
        assert!((ab.value() - 6.0).abs() < 1e-12);
        assert_eq!(ab.budget(), a.budget());
        assert_eq!(ab.lineage().len(), 1);

        let c = released(1.5, 2.0, 0.5);
        let abc = continue_product(&ab, &c).unwrap();
        assert_eq!(abc.lineage().len(), 2);
        assert!((abc.value() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn product_rejects_mismatched_budgets() {
        let a = released(2.0, 2.0, 0.5);
        let b = released(3.0, 2.0, 0.6);
        assert!(matches!(
            continue_product(&a, &b),
            Err(Error::BudgetMismatch { .. })
        ));
        let c = released(3.0, 3.0, 0.5);
        assert!(continue_product(&a, &c).is_err());
    }

    #[test]
    fn product_is_commutative_and_associative_in_value() {
        let a = released(2.0, 2.0, 0.5);
        let b = released(5.0, 2.0, 0.5);
        let c = released(0.25, 2.0, 0.5);
        let ab_c = continue_product(&continue_product(&a, &b).unwrap(), &c).unwrap();
        let a_bc = continue_product(&a, &continue_product(&b, &c).unwrap()).unwrap();
        assert!((ab_c.log_value() - a_bc.log_value()).abs() < 1e-14);
        let ba = continue_product(&b, &a).unwrap();
        assert_eq!(ba.log_value(), continue_product(&a, &b).unwrap().log_value());
    }

    #[test]
    fn average_frozen_values_and_budget_rules() {
        let a = released(2.0, 2.0, 0.5);
        let b = released(4.0, 2.0, 0.5);

        let mid = average(&a, &b, 0.5, false).unwrap();
        assert!((mid.value() - 3.0).abs() < 1e-12);
        assert_eq!(mid.budget(), PrivacyBudget::Renyi(rdp(2.0, 0.5)));

        let left = average(&a, &b, 1.0, false).unwrap();
        assert_eq!(left.log_value(), a.log_value());

        let shared = average(&a, &b, 0.5, true).unwrap();
        assert_eq!(shared.budget(), PrivacyBudget::Renyi(rdp(2.0, 1.0)));

        assert!(average(&a, &b, 1.5, false).is_err());
        let other_order = released(4.0, 3.0, 0.5);
        assert!(average(&a, &other_order, 0.5, false).is_err());
    }

    #[test]
    fn average_stays_between_its_inputs() {
        let a = released(0.5, 2.0, 0.5);
        let b = released(40.0, 2.0, 0.5);
        for i in 0..=10 {
            let eta = i as f64 / 10.0;
            let avg = average(&a, &b, eta, false).unwrap();
            assert!(avg.value() >= 0.5 - 1e-12 && avg.value() <= 40.0 + 1e-12);
        }
    }

    #[test]
    fn average_is_stable_for_huge_log_values() {
        let noise = MechanismKind::Identity
            .calibrate_rdp(LogSensitivity::new(1.0).unwrap(), rdp(2.0, 0.5))
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = privatize(&EValue::from_log(900.0).unwrap(), &noise, &mut rng);
        let b = privatize(&EValue::from_log(905.0).unwrap(), &noise, &mut rng);
        let avg = average(&a, &b, 0.5, false).unwrap();
        let expect = 905.0 + (0.5 + 0.5 * (-5.0f64).exp()).ln();
        assert!((avg.log_value() - expect).abs() < 1e-12);
    }

    #[test]
    fn e_to_p_frozen_values() {
        let twenty = e_to_p(&released(20.0, 2.0, 0.5)).get();
        assert!((twenty - 0.05).abs() < 1e-15, "got {twenty}");
        assert_eq!(e_to_p(&released(0.5, 2.0, 0.5)).get(), 1.0);
        assert_eq!(e_to_p(&released(0.0, 2.0, 0.5)).get(), 1.0);
        assert_eq!(e_to_p(&released(1.0, 2.0, 0.5)).get(), 1.0);
    }

    #[test]
    fn e_to_p_is_monotone() {
        let mut last = 1.0;
        for i in 1..100 {
            let p = e_to_p(&released(i as f64 * 0.7, 2.0, 0.5)).get();
            assert!(p <= last + 1e-15);
            last = p;
        }
    }

    #[test]
    fn pvalue_bounds_enforced() {
        assert!(PValue::new(0.0).is_ok());
        assert!(PValue::new(1.0).is_ok());
        assert!(PValue::new(1.0001).is_err());
        assert!(PValue::new(-0.0001).is_err());
    }
}
