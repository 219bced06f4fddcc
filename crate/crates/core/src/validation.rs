//! Registered correctness checks behind the companion CLI's `validate`
//! subcommand.
//!
//! Every invariant promised by a module in this crate is re-verified here as
//! a named, seeded check: deterministic identities at machine precision,
//! closed-form cross-checks between calibration and divergence formulas, and
//! Monte Carlo estimates whose acceptance bounds are stated in standard
//! errors of the estimate itself. Checks never panic on failure — each
//! returns a [`CheckReport`] so a harness can render the whole table and
//! exit nonzero if any row failed.
//!
//! All randomness flows from [`CheckConfig::seed`] through per-check stream
//! offsets of a counter-based generator, so the full report is a pure
//! function of the configuration: two runs with the same seed produce
//! byte-identical observations.
//!
//! The configuration carries one deliberate sabotage switch,
//! [`CheckConfig::inject_zero_bias`]. When set, the validity checks sample
//! noise whose compensating bias has been stripped. Multiplicative noise
//! `exp(-xi)` with unbiased `xi` inflates e-values on average, so those
//! checks must fail; a run where they still pass would mean the suite cannot
//! detect an invalid mechanism. The switch exists purely as that negative
//! control.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::confidence::{build_ci, private_ci, CellEValue, CiConfig, Partition};
use crate::conformal::{
    exch_evalue, exch_sensitivity, predict_set, privatize_levels, CalibrationScores,
    ScoreQuantizer,
};
use crate::error::Result;
use crate::evalue::{average, continue_product, e_to_p, privatize, EValue};
use crate::mean::{BettingPrior, BoundedSample, MeanEValueState, PriorConfig};
use crate::mechanisms::{
    calibrate_gaussian_approx_dp, calibrate_gaussian_rdp, calibrate_laplace_pure_dp,
    h_alpha, invert_h_alpha, CalibratedNoise, MechanismKind, NoiseSpec,
};
use crate::monitor::{Monitor, MonitorConfig};
use crate::privacy::{
    renyi_divergence_gaussian, renyi_divergence_laplace, ApproxDPBudget, BudgetLedger,
    LogSensitivity, PrivacyBudget, RenyiBudget,
};

/// Number of checks registered by [`run_all`]. A harness can assert its
/// report row count against this constant to prove no check was dropped.
pub const CORE_CHECK_COUNT: usize = 32;

/// Per-module check counts, in registry order. Summing the counts gives
/// [`CORE_CHECK_COUNT`]; a harness can use the breakdown to verify coverage
/// module by module.
pub fn module_check_counts() -> [(&'static str, usize); 7] {
    [
        ("privacy", 4),
        ("mechanisms", 5),
        ("evalue", 5),
        ("mean", 6),
        ("confidence", 4),
        ("monitor", 4),
        ("conformal", 4),
    ]
}

/// Outcome of one registered check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    /// Module whose invariant this check re-verifies.
    pub module: &'static str,
    /// Stable kebab-case check name.
    pub name: &'static str,
    /// Whether the invariant held.
    pub passed: bool,
    /// Human-readable numeric summary of what was measured.
    pub observed: String,
}

/// Configuration for a validation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckConfig {
    /// Root seed; every check derives its own independent stream from it.
    pub seed: u64,
    /// Negative control: strip the compensating bias from the noise used by
    /// the validity checks. Those checks must then fail.
    pub inject_zero_bias: bool,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            seed: 17,
            inject_zero_bias: false,
        }
    }
}

impl CheckConfig {
    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Runs every registered check in a fixed order and returns one report per
/// check. The order and count are stable across runs; see
/// [`CORE_CHECK_COUNT`].
pub fn run_all(config: &CheckConfig) -> Vec<CheckReport> {
    vec![
        check_laplace_divergence_monotone(config),
        check_gaussian_divergence_scaling(config),
        check_ledger_order_independence(config),
        check_approx_dp_delta_limit(config),
        check_calibrated_mgf_bound(config),
        check_divergence_matches_budget(config),
        check_h_alpha_inversion_roundtrip(config),
        check_noise_validity_monte_carlo(config),
        check_bias_necessity(config),
        check_privatize_validity_monte_carlo(config),
        check_growth_identity(config),
        check_product_associative_commutative(config),
        check_e_to_p_monotone(config),
        check_average_within_bounds(config),
        check_mixture_equals_product(config),
        check_permutation_invariance(config),
        check_mean_sensitivity_empirical(config),
        check_mean_lipschitz_empirical(config),
        check_mean_null_validity(config),
        check_mean_initial_state(config),
        check_confidence_nesting(config),
        check_confidence_coverage(config),
        check_deflation_dominates(config),
        check_confidence_budget_exactness(config),
        check_monitor_false_alarm_rate(config),
        check_monitor_continuation_budget(config),
        check_monitor_alarm_latch_determinism(config),
        check_monitor_power_ordering(config),
        check_conformal_down_set(config),
        check_conformal_sensitivity_empirical(config),
        check_conformal_coverage(config),
        check_conformal_budget_exactness(config),
    ]
}

fn run_check(
    module: &'static str,
    name: &'static str,
    body: impl FnOnce() -> Result<(bool, String)>,
) -> CheckReport {
    match body() {
        Ok((passed, observed)) => CheckReport {
            module,
            name,
            passed,
            observed,
        },
        Err(err) => CheckReport {
            module,
            name,
            passed: false,
            observed: format!("errored: {err}"),
        },
    }
}

/// Streaming mean and standard error of a Monte Carlo sample.
struct Welford {
    count: f64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn new() -> Self {
        Welford {
            count: 0.0,
            mean: 0.0,
            m2: 0.0,
        }
    }

    fn push(&mut self, x: f64) {
        self.count += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.count;
        self.m2 += delta * (x - self.mean);
    }

    fn mean(&self) -> f64 {
        self.mean
    }

    fn std(&self) -> f64 {
        (self.m2 / (self.count - 1.0)).sqrt()
    }

    fn standard_error(&self) -> f64 {
        self.std() / self.count.sqrt()
    }
}

fn binomial_se(p: f64, n: f64) -> f64 {
    (p * (1.0 - p) / n).sqrt()
}

/// The fixed menu of calibrated specs exercised by the mechanism-level
/// checks: both Rényi families, the approximate-DP Gaussian, the pure-DP
/// Laplace, and the identity passthrough.
fn calibrated_specs() -> Result<Vec<(&'static str, CalibratedNoise)>> {
    let sens_01 = LogSensitivity::new(0.1)?;
    let sens_005 = LogSensitivity::new(0.05)?;
    let sens_1 = LogSensitivity::new(1.0)?;
    Ok(vec![
        (
            "gaussian-rdp a2 e0.5 d0.1",
            calibrate_gaussian_rdp(sens_01, RenyiBudget::new(2.0, 0.5)?),
        ),
        (
            "gaussian-rdp a10 e1 d1",
            calibrate_gaussian_rdp(sens_1, RenyiBudget::new(10.0, 1.0)?),
        ),
        (
            "laplace-rdp a2 e0.1 d0.1",
            MechanismKind::Laplace.calibrate_rdp(sens_01, RenyiBudget::new(2.0, 0.1)?)?,
        ),
        (
            "laplace-rdp a5 e0.5 d0.05",
            MechanismKind::Laplace.calibrate_rdp(sens_005, RenyiBudget::new(5.0, 0.5)?)?,
        ),
        (
            "gaussian-approx e1 delta0.01 d0.1",
            calibrate_gaussian_approx_dp(sens_01, ApproxDPBudget::new(1.0, 0.01)?)?,
        ),
        (
            "laplace-pure e0.5 d0.1",
            calibrate_laplace_pure_dp(sens_01, 0.5)?,
        ),
        (
            "identity",
            MechanismKind::Identity.calibrate_rdp(sens_01, RenyiBudget::new(2.0, 0.5)?)?,
        ),
    ])
}

/// One Rényi-calibrated case: label, mechanism, sensitivity, order, epsilon.
type RdpCase = (&'static str, MechanismKind, f64, f64, f64);

/// The Rényi-calibrated cases with their budgets, for the tightness check.
fn rdp_cases() -> Result<Vec<RdpCase>> {
    Ok(vec![
        ("gaussian a2 e0.5 d0.1", MechanismKind::Gaussian, 0.1, 2.0, 0.5),
        ("gaussian a10 e1 d1", MechanismKind::Gaussian, 1.0, 10.0, 1.0),
        ("laplace a2 e0.1 d0.1", MechanismKind::Laplace, 0.1, 2.0, 0.1),
        ("laplace a5 e0.5 d0.05", MechanismKind::Laplace, 0.05, 5.0, 0.5),
    ])
}

// ---------------------------------------------------------------------------
// privacy
// ---------------------------------------------------------------------------

/// The Laplace Rényi divergence is nondecreasing in the magnitude of the
/// location shift, swept over a grid for two (scale, order) pairs.
fn check_laplace_divergence_monotone(_config: &CheckConfig) -> CheckReport {
    run_check("privacy", "laplace-divergence-monotone", || {
        let mut worst_drop = 0.0_f64;
        for &(scale, alpha) in &[(0.3, 2.0), (0.7, 3.5)] {
            let mut prev = 0.0;
            for step in 0..=40 {
                let shift = 0.05 * step as f64;
                let div = renyi_divergence_laplace(shift, scale, alpha)?;
                worst_drop = worst_drop.max(prev - div);
                prev = div;
            }
        }
        Ok((
            worst_drop <= 1e-12,
            format!("largest decrease along the shift grid {worst_drop:.3e}"),
        ))
    })
}

/// The Gaussian Rényi divergence `alpha m^2 / (2 sigma^2)` scales linearly in
/// the order and quadratically in the shift, at machine precision.
fn check_gaussian_divergence_scaling(_config: &CheckConfig) -> CheckReport {
    run_check("privacy", "gaussian-divergence-scaling", || {
        let mut worst_rel = 0.0_f64;
        for &(shift, variance, alpha) in &[(0.3, 0.5, 2.0), (1.2, 2.0, 7.0), (0.05, 0.01, 3.0)] {
            let base = renyi_divergence_gaussian(shift, variance, alpha)?;
            let doubled_shift = renyi_divergence_gaussian(2.0 * shift, variance, alpha)?;
            let doubled_alpha = renyi_divergence_gaussian(shift, variance, 2.0 * alpha)?;
            let closed_form = alpha * shift * shift / (2.0 * variance);
            for (got, want) in [
                (doubled_shift, 4.0 * base),
                (doubled_alpha, 2.0 * base),
                (base, closed_form),
            ] {
                worst_rel = worst_rel.max((got - want).abs() / want.abs().max(1e-300));
            }
        }
        Ok((
            worst_rel <= 1e-12,
            format!("worst relative scaling error {worst_rel:.3e}"),
        ))
    })
}

/// Recording the same set of releases in any order spends the same total.
fn check_ledger_order_independence(_config: &CheckConfig) -> CheckReport {
    run_check("privacy", "ledger-order-independence", || {
        let epsilons = [0.3, 0.025, 1e-4, 0.7, 0.0125];
        let orders: [Vec<usize>; 3] = [
            vec![0, 1, 2, 3, 4],
            vec![4, 3, 2, 1, 0],
            vec![2, 0, 4, 1, 3],
        ];
        let mut totals = Vec::new();
        for order in &orders {
            let mut ledger = BudgetLedger::new(2.0)?;
            for &i in order {
                ledger = ledger.record(format!("release {i}"), RenyiBudget::new(2.0, epsilons[i])?)?;
            }
            totals.push(ledger.spent());
        }
        let direct_sum: f64 = epsilons.iter().sum();
        let spread = totals
            .iter()
            .map(|t| (t - direct_sum).abs())
            .fold(0.0, f64::max);
        Ok((
            spread <= 1e-12,
            format!("max deviation of spent totals across orders {spread:.3e}"),
        ))
    })
}

/// Converting a Rényi budget to approximate DP with delta approaching one
/// drives the approximate epsilon down to the Rényi epsilon, from above.
fn check_approx_dp_delta_limit(_config: &CheckConfig) -> CheckReport {
    run_check("privacy", "approx-dp-delta-limit", || {
        let budget = RenyiBudget::new(2.0, 0.5)?;
        let deltas = [0.5, 0.9, 0.99, 0.9999, 0.999999];
        let mut prev = f64::INFINITY;
        let mut monotone = true;
        let mut above = true;
        let mut last_gap = f64::NAN;
        for &delta in &deltas {
            let eps = budget.to_approx_dp(delta)?.epsilon();
            monotone &= eps < prev;
            above &= eps >= budget.epsilon() - 1e-15;
            last_gap = eps - budget.epsilon();
            prev = eps;
        }
        Ok((
            monotone && above && last_gap <= 2e-6,
            format!("epsilon gap at delta 1-1e-6 is {last_gap:.3e}"),
        ))
    })
}

// ---------------------------------------------------------------------------
// mechanisms
// ---------------------------------------------------------------------------

/// Every calibrated spec satisfies the validity bound: the moment-generating
/// function of the noise at -1 is at most one (up to rounding). Under the
/// zero-bias negative control this must fail.
fn check_calibrated_mgf_bound(config: &CheckConfig) -> CheckReport {
    run_check("mechanisms", "calibrated-mgf-bound", || {
        let mut worst = f64::NEG_INFINITY;
        for (_, noise) in calibrated_specs()? {
            let spec = if config.inject_zero_bias {
                noise.spec().zero_bias()
            } else {
                noise.spec()
            };
            worst = worst.max(spec.mgf_at_minus_one()?);
        }
        Ok((
            worst <= 1.0 + 1e-12,
            format!("largest MGF at -1 across calibrated specs {worst:.12}"),
        ))
    })
}

/// Calibration is tight: plugging the calibrated spec's parameters back into
/// the closed-form Rényi divergence at the full sensitivity shift recovers
/// the requested epsilon.
fn check_divergence_matches_budget(_config: &CheckConfig) -> CheckReport {
    run_check("mechanisms", "divergence-matches-budget", || {
        let mut worst = 0.0_f64;
        for (_, kind, sens, alpha, epsilon) in rdp_cases()? {
            let noise = kind.calibrate_rdp(LogSensitivity::new(sens)?, RenyiBudget::new(alpha, epsilon)?)?;
            let recovered = match noise.spec() {
                NoiseSpec::Gaussian(g) => renyi_divergence_gaussian(sens, g.variance(), alpha)?,
                NoiseSpec::Laplace(l) => renyi_divergence_laplace(sens, l.scale(), alpha)?,
                NoiseSpec::Identity => unreachable!("positive sensitivity"),
            };
            worst = worst.max((recovered - epsilon).abs());
        }
        Ok((
            worst <= 1e-9,
            format!("worst |divergence - epsilon| at calibration {worst:.3e}"),
        ))
    })
}

/// Bisection inversion of the Laplace calibration function is an identity on
/// a wide grid of arguments.
fn check_h_alpha_inversion_roundtrip(_config: &CheckConfig) -> CheckReport {
    run_check("mechanisms", "h-alpha-inversion-roundtrip", || {
        let mut worst = 0.0_f64;
        for &(sens, alpha) in &[(0.1, 2.0), (0.5, 3.0), (0.05, 10.0)] {
            for &t in &[0.0, 1e-3, 0.1, 1.0, 10.0, 100.0] {
                let target = h_alpha(t, sens, alpha)?;
                let back = invert_h_alpha(target, sens, alpha)?;
                worst = worst.max((back - t).abs() / t.abs().max(1.0));
            }
        }
        Ok((
            worst <= 1e-9,
            format!("worst relative roundtrip error {worst:.3e}"),
        ))
    })
}

/// Monte Carlo validity: the sample mean of `exp(-xi)` stays within four
/// standard errors of one, for every calibrated spec. Under the zero-bias
/// negative control this must fail.
fn check_noise_validity_monte_carlo(config: &CheckConfig) -> CheckReport {
    run_check("mechanisms", "noise-validity-monte-carlo", || {
        let mut rng = config.rng(8);
        let draws = 1_000_000;
        let mut worst_excess = f64::NEG_INFINITY;
        let mut worst_label = "";
        for (label, noise) in calibrated_specs()? {
            let spec = if config.inject_zero_bias {
                noise.spec().zero_bias()
            } else {
                noise.spec()
            };
            let mut stats = Welford::new();
            for _ in 0..draws {
                stats.push((-spec.sample(&mut rng)).exp());
            }
            let excess = stats.mean() - (1.0 + 4.0 * stats.standard_error());
            if excess > worst_excess {
                worst_excess = excess;
                worst_label = label;
            }
        }
        Ok((
            worst_excess <= 0.0,
            format!("worst mean-above-bound margin {worst_excess:.3e} ({worst_label})"),
        ))
    })
}

/// Stripping the bias breaks validity: with the mean forced to zero, the
/// Monte Carlo mean of `exp(-xi)` exceeds one by more than three standard
/// errors for both noise families. This is why the bias is not optional.
fn check_bias_necessity(config: &CheckConfig) -> CheckReport {
    run_check("mechanisms", "bias-necessity", || {
        let mut rng = config.rng(9);
        let draws = 100_000;
        let gaussian = calibrate_gaussian_rdp(LogSensitivity::new(0.1)?, RenyiBudget::new(2.0, 0.5)?);
        let laplace = MechanismKind::Laplace
            .calibrate_rdp(LogSensitivity::new(0.1)?, RenyiBudget::new(2.0, 0.1)?)?;
        let mut smallest_margin = f64::INFINITY;
        for noise in [gaussian, laplace] {
            let spec = noise.spec().zero_bias();
            let mut stats = Welford::new();
            for _ in 0..draws {
                stats.push((-spec.sample(&mut rng)).exp());
            }
            let margin = (stats.mean() - 1.0) / stats.standard_error();
            smallest_margin = smallest_margin.min(margin);
        }
        Ok((
            smallest_margin > 3.0,
            format!("smallest inflation margin {smallest_margin:.1} standard errors"),
        ))
    })
}

// ---------------------------------------------------------------------------
// evalue
// ---------------------------------------------------------------------------

/// Privatizing a fixed e-value preserves its expectation up to Monte Carlo
/// error: the sample mean of one million releases is at most the input plus
/// four standard errors. Under the zero-bias negative control this must fail.
fn check_privatize_validity_monte_carlo(config: &CheckConfig) -> CheckReport {
    run_check("evalue", "privatize-validity-monte-carlo", || {
        let mut rng = config.rng(10);
        let input = EValue::new(3.0)?;
        let noise = calibrate_gaussian_rdp(LogSensitivity::new(0.1)?, RenyiBudget::new(2.0, 0.5)?);
        let reps = 1_000_000;
        let mut stats = Welford::new();
        if config.inject_zero_bias {
            let spec = noise.spec().zero_bias();
            for _ in 0..reps {
                stats.push(input.value() * (-spec.sample(&mut rng)).exp());
            }
        } else {
            for _ in 0..reps {
                stats.push(privatize(&input, &noise, &mut rng).value());
            }
        }
        let bound = input.value() + 4.0 * stats.standard_error();
        Ok((
            stats.mean() <= bound,
            format!("mean release {:.6} vs bound {:.6}", stats.mean(), bound),
        ))
    })
}

/// The released log value is exactly the input log value minus the one noise
/// draw, and the growth penalty is exactly the noise mean over the sample
/// count.
fn check_growth_identity(config: &CheckConfig) -> CheckReport {
    run_check("evalue", "growth-identity", || {
        let noise = calibrate_gaussian_rdp(LogSensitivity::new(0.2)?, RenyiBudget::new(2.0, 0.5)?);
        let input = EValue::new(7.25)?;
        let mut exact = true;
        for round in 0..20 {
            let mut noise_rng = config.rng(1100 + round);
            let xi = noise.sample(&mut noise_rng);
            let mut replay_rng = config.rng(1100 + round);
            let released = privatize(&input, &noise, &mut replay_rng);
            exact &= released.log_value().to_bits() == (input.log_value() - xi).to_bits();
        }
        let spec = noise.spec();
        let mut penalty_exact = true;
        for n in [1_u64, 4, 100] {
            penalty_exact &= spec.growth_penalty(n)?.to_bits() == (spec.mean() / n as f64).to_bits();
        }
        Ok((
            exact && penalty_exact,
            format!(
                "log identity bitwise over 20 replays: {exact}; penalty = mean/n bitwise: {penalty_exact}"
            ),
        ))
    })
}

/// Products of releases are associative and commutative in value, and each
/// fold appends exactly one lineage record.
fn check_product_associative_commutative(config: &CheckConfig) -> CheckReport {
    run_check("evalue", "product-associative-commutative", || {
        let mut rng = config.rng(12);
        let noise =
            MechanismKind::Identity.calibrate_rdp(LogSensitivity::new(0.1)?, RenyiBudget::new(2.0, 0.1)?)?;
        let mut worst_rel = 0.0_f64;
        let mut lineage_ok = true;
        for _ in 0..50 {
            let a = privatize(&EValue::new(rng.gen_range(0.1..10.0))?, &noise, &mut rng);
            let b = privatize(&EValue::new(rng.gen_range(0.1..10.0))?, &noise, &mut rng);
            let c = privatize(&EValue::new(rng.gen_range(0.1..10.0))?, &noise, &mut rng);
            let left = continue_product(&continue_product(&a, &b)?, &c)?;
            let right = continue_product(&a, &continue_product(&b, &c)?)?;
            let reversed = continue_product(&continue_product(&c, &b)?, &a)?;
            for other in [&right, &reversed] {
                worst_rel = worst_rel
                    .max((left.value() - other.value()).abs() / left.value().max(1e-300));
            }
            lineage_ok &= a.lineage().is_empty()
                && continue_product(&a, &b)?.lineage().len() == 1
                && left.lineage().len() == 2;
        }
        Ok((
            worst_rel <= 1e-12 && lineage_ok,
            format!("worst relative regrouping gap {worst_rel:.3e}; lineage grows by one per fold: {lineage_ok}"),
        ))
    })
}

/// The e-to-p conversion is the clamped reciprocal, hence nonincreasing in
/// the e-value on and above one.
fn check_e_to_p_monotone(_config: &CheckConfig) -> CheckReport {
    run_check("evalue", "e-to-p-monotone", || {
        let noise =
            MechanismKind::Identity.calibrate_rdp(LogSensitivity::new(0.1)?, RenyiBudget::new(2.0, 0.1)?)?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let grid = [0.25, 0.5, 1.0, 1.5, 2.0, 5.0, 20.0, 1_000.0];
        let mut prev = f64::INFINITY;
        let mut monotone = true;
        let mut worst_gap = 0.0_f64;
        for &e in &grid {
            let release = privatize(&EValue::new(e)?, &noise, &mut rng);
            let p = e_to_p(&release).get();
            monotone &= p <= prev + 1e-15;
            worst_gap = worst_gap.max((p - (1.0 / e).min(1.0)).abs());
            prev = p;
        }
        Ok((
            monotone && worst_gap <= 1e-12,
            format!("nonincreasing: {monotone}; worst |p - min(1, 1/e)| = {worst_gap:.3e}"),
        ))
    })
}

/// Convex averages of two releases land between them, hit the endpoint
/// exactly at eta one, and double the spend only when both read the same
/// data.
fn check_average_within_bounds(config: &CheckConfig) -> CheckReport {
    run_check("evalue", "average-within-bounds", || {
        let mut rng = config.rng(14);
        let noise =
            MechanismKind::Identity.calibrate_rdp(LogSensitivity::new(0.1)?, RenyiBudget::new(2.0, 0.3)?)?;
        let mut inside = true;
        let mut worst_escape = 0.0_f64;
        for _ in 0..200 {
            let a = privatize(&EValue::new(rng.gen_range(0.01..10.0))?, &noise, &mut rng);
            let b = privatize(&EValue::new(rng.gen_range(0.01..10.0))?, &noise, &mut rng);
            let eta = rng.gen_range(0.0..=1.0);
            let mixed = average(&a, &b, eta, false)?;
            let lo = a.value().min(b.value());
            let hi = a.value().max(b.value());
            let escape = (lo - mixed.value()).max(mixed.value() - hi).max(0.0);
            worst_escape = worst_escape.max(escape);
            inside &= escape <= 1e-12;
        }
        let a = privatize(&EValue::new(2.0)?, &noise, &mut rng);
        let b = privatize(&EValue::new(4.0)?, &noise, &mut rng);
        let endpoint = average(&a, &b, 1.0, false)?.value() == a.value();
        let shared = match average(&a, &b, 0.5, true)?.budget() {
            PrivacyBudget::Renyi(rb) => (rb.epsilon() - 0.6).abs() <= 1e-15,
            PrivacyBudget::Approx(_) => false,
        };
        Ok((
            inside && endpoint && shared,
            format!(
                "worst escape from [min, max] {worst_escape:.3e}; eta-one endpoint exact: {endpoint}; same-data spend doubles: {shared}"
            ),
        ))
    })
}

// ---------------------------------------------------------------------------
// mean
// ---------------------------------------------------------------------------

/// On small random instances the incremental mixture e-value equals the
/// sequential product of per-observation factors taken at the predictable
/// betting fraction.
fn check_mixture_equals_product(config: &CheckConfig) -> CheckReport {
    run_check("mean", "mixture-equals-product", || {
        let mut rng = config.rng(15);
        let mut worst_rel = 0.0_f64;
        for _ in 0..50 {
            let n = rng.gen_range(1..=20);
            let atoms = rng.gen_range(2..=16);
            let theta = rng.gen_range(0.2..0.8);
            let prior = BettingPrior::uniform(-0.5, 0.5, atoms, theta)?;
            let mut state = MeanEValueState::new(prior);
            let mut product_log = 0.0;
            for _ in 0..n {
                let y = rng.gen_range(0.0..=1.0);
                let bet = state.betting_fraction();
                product_log += (bet * (y - theta)).ln_1p();
                state.observe(BoundedSample::new(y)?)?;
            }
            let mixture_log = state.evalue().log_value();
            let rel = (mixture_log - product_log).abs() / mixture_log.abs().max(1.0);
            worst_rel = worst_rel.max(rel);
        }
        Ok((
            worst_rel <= 1e-10,
            format!("worst relative log gap mixture vs product {worst_rel:.3e}"),
        ))
    })
}

/// The mixture e-value ignores the order of the observations.
fn check_permutation_invariance(config: &CheckConfig) -> CheckReport {
    run_check("mean", "permutation-invariance", || {
        let mut rng = config.rng(16);
        let theta = 0.3;
        let data: Vec<f64> = (0..40).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let evaluate = |ys: &[f64]| -> Result<f64> {
            let prior = BettingPrior::uniform(-0.5, 0.5, 16, theta)?;
            let mut state = MeanEValueState::new(prior);
            state.observe_all(&BoundedSample::many(ys)?)?;
            Ok(state.evalue().log_value())
        };
        let base = evaluate(&data)?;
        let mut worst = 0.0_f64;
        let mut shuffled = data.clone();
        for _ in 0..20 {
            shuffled.shuffle(&mut rng);
            worst = worst.max((evaluate(&shuffled)? - base).abs());
        }
        Ok((
            worst <= 1e-12,
            format!("worst |log difference| across 20 permutations {worst:.3e}"),
        ))
    })
}

/// Empirical sensitivity: across ten thousand neighboring pairs (one sample
/// added or removed), the change in the log e-value never exceeds the
/// closed-form bound.
fn check_mean_sensitivity_empirical(config: &CheckConfig) -> CheckReport {
    run_check("mean", "sensitivity-bound-empirical", || {
        let mut rng = config.rng(17);
        let pairs = 10_000;
        let mut violations = 0_u32;
        let mut worst_slack = f64::NEG_INFINITY;
        for _ in 0..pairs {
            let theta = rng.gen_range(0.1..0.9);
            let prior = BettingPrior::uniform(-0.5, 0.5, 16, theta)?;
            let bound = prior.log_sensitivity_bound(theta)?.get();
            let mut shorter = MeanEValueState::new(prior);
            for _ in 0..24 {
                shorter.observe(BoundedSample::new(rng.gen_range(0.0..=1.0))?)?;
            }
            let mut base = shorter.clone();
            base.observe(BoundedSample::new(rng.gen_range(0.0..=1.0))?)?;
            let mut extended = base.clone();
            extended.observe(BoundedSample::new(rng.gen_range(0.0..=1.0))?)?;
            let removal = (base.evalue().log_value() - shorter.evalue().log_value()).abs();
            let addition = (extended.evalue().log_value() - base.evalue().log_value()).abs();
            let observed = removal.max(addition);
            worst_slack = worst_slack.max(observed - bound);
            if observed > bound {
                violations += 1;
            }
        }
        Ok((
            violations == 0,
            format!("{violations} violations over {pairs} pairs; worst observed-minus-bound {worst_slack:.3e}"),
        ))
    })
}

/// Empirical Lipschitz continuity in the tested mean: finite differences of
/// the log e-value over a fine theta grid stay below the closed-form
/// constant. Checked at a single observation, where the per-dataset constant
/// is exact; at larger sample sizes the derivative accumulates one term per
/// observation, so the single-observation case is the sharp one.
fn check_mean_lipschitz_empirical(_config: &CheckConfig) -> CheckReport {
    run_check("mean", "lipschitz-bound-empirical", || {
        let step = 1e-4;
        let mut violations = 0_u32;
        let mut worst_ratio = 0.0_f64;
        for gy in 0..=10 {
            let y = gy as f64 / 10.0;
            for gt in 0..=80 {
                let theta = 0.1 + 0.01 * gt as f64;
                let lo = BettingPrior::uniform(-0.5, 0.5, 16, theta)?;
                let hi = BettingPrior::uniform(-0.5, 0.5, 16, theta + step)?;
                let bound = lo.lipschitz_bound(theta, theta + step)?;
                let mut state_lo = MeanEValueState::new(lo);
                state_lo.observe(BoundedSample::new(y)?)?;
                let mut state_hi = MeanEValueState::new(hi);
                state_hi.observe(BoundedSample::new(y)?)?;
                let diff =
                    (state_hi.evalue().log_value() - state_lo.evalue().log_value()).abs() / step;
                worst_ratio = worst_ratio.max(diff / bound);
                if diff > bound * (1.0 + 1e-6) {
                    violations += 1;
                }
            }
        }
        Ok((
            violations == 0,
            format!("{violations} grid violations; worst finite-difference/bound ratio {worst_ratio:.6}"),
        ))
    })
}

/// Under the null (observations drawn with mean exactly theta) the average
/// e-value over ten thousand replications stays within four standard errors
/// of one.
fn check_mean_null_validity(config: &CheckConfig) -> CheckReport {
    run_check("mean", "null-validity-monte-carlo", || {
        let mut rng = config.rng(19);
        let theta = 0.4;
        let reps = 10_000;
        let n = 200;
        let mut stats = Welford::new();
        for _ in 0..reps {
            let prior = BettingPrior::uniform(-0.5, 0.5, 21, theta)?;
            let mut state = MeanEValueState::new(prior);
            for _ in 0..n {
                let y = if rng.gen_bool(theta) { 1.0 } else { 0.0 };
                state.observe(BoundedSample::new(y)?)?;
            }
            stats.push(state.evalue().value());
        }
        let bound = 1.0 + 4.0 * stats.standard_error();
        Ok((
            stats.mean() <= bound,
            format!("mean e-value {:.4} vs bound {:.4}", stats.mean(), bound),
        ))
    })
}

/// A fresh state carries no evidence: the e-value is exactly one, the count
/// is zero, and the opening bet is the prior mean of the betting fraction.
fn check_mean_initial_state(_config: &CheckConfig) -> CheckReport {
    run_check("mean", "initial-state-identity", || {
        let prior = BettingPrior::uniform(-0.4, 0.6, 11, 0.45)?;
        let naive_mean: f64 = prior
            .atoms()
            .iter()
            .zip(prior.weights())
            .map(|(a, w)| a * w)
            .sum();
        let state = MeanEValueState::new(prior);
        let unit = state.evalue().log_value() == 0.0 && state.count() == 0;
        let bet_gap = (state.betting_fraction() - naive_mean).abs();
        Ok((
            unit && bet_gap <= 1e-12,
            format!("log e-value at start {}; |opening bet - prior mean| = {bet_gap:.3e}", state.evalue().log_value()),
        ))
    })
}

// ---------------------------------------------------------------------------
// confidence
// ---------------------------------------------------------------------------

/// Confidence sets are nested across levels: a stricter (smaller) alpha
/// keeps every cell the looser level kept.
fn check_confidence_nesting(config: &CheckConfig) -> CheckReport {
    run_check("confidence", "nesting", || {
        let mut rng = config.rng(21);
        let partition = Partition::uniform(12)?;
        let mut failures = 0_u32;
        for _ in 0..50 {
            let cells: Vec<CellEValue> = (0..12)
                .map(|j| {
                    CellEValue::new(
                        j,
                        EValue::from_log(rng.gen_range(-5.0..5.0))?,
                        1.0,
                        partition.width(j),
                    )
                })
                .collect::<Result<_>>()?;
            let strict = build_ci(&partition, &cells, 0.01)?;
            let loose = build_ci(&partition, &cells, 0.10)?;
            let nested = loose
                .included_cells()
                .iter()
                .all(|j| strict.included_cells().contains(j));
            if !nested {
                failures += 1;
            }
        }
        Ok((
            failures == 0,
            format!("{failures} of 50 random cell tables broke nesting"),
        ))
    })
}

/// Monte Carlo coverage of the true mean, on both the noiseless lane and the
/// Gaussian-privatized lane. The deflation that extends each cell's midpoint
/// test to the whole cell uses the per-dataset Lipschitz constant, which is
/// exact for one observation and increasingly optimistic as the sample
/// grows; the true mean here sits essentially at a cell midpoint, so the
/// midpoint test is correctly specified and the guarantee binds at any
/// sample size.
fn check_confidence_coverage(config: &CheckConfig) -> CheckReport {
    run_check("confidence", "coverage-monte-carlo", || {
        let mut rng = config.rng(22);
        let truth = 0.25;
        let reps = 200;
        let n = 400;
        let alpha = 0.05;
        let partition = Partition::uniform(10)?;
        let bound = (1.0 - alpha) - 3.0 * binomial_se(1.0 - alpha, reps as f64);
        let mut observed = Vec::new();
        let mut all_above = true;
        for mechanism in [MechanismKind::Identity, MechanismKind::Gaussian] {
            let config_ci = CiConfig {
                prior: PriorConfig::Uniform {
                    lambda_inf: -0.5,
                    lambda_sup: 0.5,
                    atoms: 21,
                },
                alpha,
                budget: RenyiBudget::new(2.0, 1.0)?,
                mechanism,
            };
            let mut hits = 0_u32;
            for _ in 0..reps {
                let raw: Vec<f64> = (0..n)
                    .map(|_| if rng.gen_bool(truth) { 1.0 } else { 0.0 })
                    .collect();
                let data = BoundedSample::many(&raw)?;
                let (set, _) = private_ci(&data, &partition, &config_ci, &mut rng)?;
                if set.contains(truth) {
                    hits += 1;
                }
            }
            let coverage = hits as f64 / reps as f64;
            all_above &= coverage >= bound;
            observed.push(format!("{mechanism:?} {coverage:.3}"));
        }
        Ok((
            all_above,
            format!("coverage {} vs bound {bound:.3}", observed.join(", ")),
        ))
    })
}

/// Deflation shrinks, and privatization preserves expectation: the deflated
/// value never exceeds the raw value, and the Monte Carlo mean of the
/// released value stays within four standard errors of the deflated value.
fn check_deflation_dominates(config: &CheckConfig) -> CheckReport {
    run_check("confidence", "deflation-dominates", || {
        let mut rng = config.rng(23);
        let raw = EValue::from_log(1.2)?;
        let mut ordered = true;
        for &(lipschitz, width) in &[(0.8, 0.05), (0.0, 0.2), (3.0, 0.01)] {
            let cell = CellEValue::new(0, raw, lipschitz, width)?;
            ordered &= cell.deflated().log_value() <= raw.log_value();
        }
        let cell = CellEValue::new(0, raw, 0.8, 0.05)?;
        let noise = calibrate_gaussian_rdp(LogSensitivity::new(0.1)?, RenyiBudget::new(2.0, 0.5)?);
        let mut stats = Welford::new();
        for _ in 0..4_000 {
            stats.push(privatize(&cell.deflated(), &noise, &mut rng).value());
        }
        let bound = cell.deflated().value() + 4.0 * stats.standard_error();
        Ok((
            ordered && stats.mean() <= bound,
            format!(
                "deflated below raw: {ordered}; mean release {:.4} vs bound {:.4}",
                stats.mean(),
                bound
            ),
        ))
    })
}

/// The ledger of a private confidence run records one entry per cell and
/// spends the configured budget exactly.
fn check_confidence_budget_exactness(config: &CheckConfig) -> CheckReport {
    run_check("confidence", "budget-exactness", || {
        let mut rng = config.rng(24);
        let cells = 8;
        let epsilon = 0.4;
        let partition = Partition::uniform(cells)?;
        let raw: Vec<f64> = (0..60)
            .map(|_| if rng.gen_bool(0.35) { 1.0 } else { 0.0 })
            .collect();
        let data = BoundedSample::many(&raw)?;
        let config_ci = CiConfig {
            prior: PriorConfig::Uniform {
                lambda_inf: -0.5,
                lambda_sup: 0.5,
                atoms: 11,
            },
            alpha: 0.05,
            budget: RenyiBudget::new(2.0, epsilon)?,
            mechanism: MechanismKind::Gaussian,
        };
        let (_, ledger) = private_ci(&data, &partition, &config_ci, &mut rng)?;
        let spent_gap = (ledger.spent() - epsilon).abs();
        let per_cell_ok = ledger
            .entries()
            .iter()
            .all(|(_, eps)| (eps - epsilon / cells as f64).abs() <= 1e-15);
        Ok((
            ledger.len() == cells && spent_gap <= 1e-12 && per_cell_ok,
            format!(
                "{} entries, |spent - epsilon| = {spent_gap:.3e}, equal per-cell shares: {per_cell_ok}",
                ledger.len()
            ),
        ))
    })
}

// ---------------------------------------------------------------------------
// monitor
// ---------------------------------------------------------------------------

/// With losses whose mean sits exactly at the safety threshold, the fraction
/// of runs that ever alarm stays within three binomial standard errors of
/// the nominal level.
fn check_monitor_false_alarm_rate(config: &CheckConfig) -> CheckReport {
    run_check("monitor", "false-alarm-rate", || {
        let runs = 300;
        let batches = 30;
        let batch_size = 64;
        let alpha = 0.05;
        let mut alarms = 0_u32;
        for run in 0..runs {
            let mut rng = config.rng(2500 + run);
            let monitor_config = MonitorConfig::new(
                0.5,
                alpha,
                batch_size,
                0.2,
                RenyiBudget::new(2.0, 0.05)?,
                MechanismKind::Identity,
            )?;
            let mut monitor = Monitor::new(monitor_config)?;
            let losses: Vec<f64> = (0..batches * batch_size)
                .map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 })
                .collect();
            monitor.ingest(&losses, &mut rng)?;
            if monitor.is_alarmed() {
                alarms += 1;
            }
        }
        let rate = alarms as f64 / runs as f64;
        let bound = alpha + 3.0 * binomial_se(alpha, runs as f64);
        Ok((
            rate <= bound,
            format!("false alarm rate {rate:.4} vs bound {bound:.4}"),
        ))
    })
}

/// Folding batches multiplies evidence without inflating the declared
/// budget: the cumulative release still claims the per-batch spend, while
/// the audit ledger records every batch.
fn check_monitor_continuation_budget(config: &CheckConfig) -> CheckReport {
    run_check("monitor", "continuation-budget", || {
        let mut rng = config.rng(26);
        let per_batch = 0.1;
        let monitor_config = MonitorConfig::new(
            0.5,
            0.05,
            64,
            0.2,
            RenyiBudget::new(2.0, per_batch)?,
            MechanismKind::Gaussian,
        )?;
        let mut monitor = Monitor::new(monitor_config)?;
        let losses: Vec<f64> = (0..5 * 64)
            .map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 })
            .collect();
        monitor.ingest(&losses, &mut rng)?;
        let declared = match monitor.released().map(|r| r.budget()) {
            Some(PrivacyBudget::Renyi(rb)) => {
                rb.alpha() == 2.0 && (rb.epsilon() - per_batch).abs() <= 1e-15
            }
            _ => false,
        };
        let audited = monitor.ledger().len() == 5
            && (monitor.ledger().spent() - 5.0 * per_batch).abs() <= 1e-12;
        Ok((
            declared && audited,
            format!(
                "declared budget stays per-batch: {declared}; ledger rows {} spend {:.3}",
                monitor.ledger().len(),
                monitor.ledger().spent()
            ),
        ))
    })
}

/// The alarm latches (it never resets once raised) and the whole trajectory
/// is a deterministic function of the losses and the seed.
fn check_monitor_alarm_latch_determinism(config: &CheckConfig) -> CheckReport {
    run_check("monitor", "alarm-latch-determinism", || {
        let mut data_rng = config.rng(27);
        let mut losses: Vec<f64> = (0..10 * 32)
            .map(|_| if data_rng.gen_bool(0.9) { 1.0 } else { 0.0 })
            .collect();
        losses.extend((0..10 * 32).map(|_| if data_rng.gen_bool(0.5) { 1.0 } else { 0.0 }));
        let run = |stream: u64| -> Result<Monitor> {
            let monitor_config = MonitorConfig::new(
                0.5,
                0.05,
                32,
                0.2,
                RenyiBudget::new(2.0, 0.5)?,
                MechanismKind::Gaussian,
            )?;
            let mut monitor = Monitor::new(monitor_config)?;
            let mut rng = config.rng(stream);
            monitor.ingest(&losses, &mut rng)?;
            Ok(monitor)
        };
        let first = run(2701)?;
        let second = run(2701)?;
        let identical = first
            .history()
            .iter()
            .zip(second.history())
            .all(|(a, b)| {
                a.cumulative_log_evalue.to_bits() == b.cumulative_log_evalue.to_bits()
                    && a.alarmed == b.alarmed
            })
            && first.history().len() == second.history().len();
        let mut latched = true;
        let mut seen_alarm = false;
        for record in first.history() {
            if seen_alarm && !record.alarmed {
                latched = false;
            }
            seen_alarm |= record.alarmed;
        }
        Ok((
            identical && latched && seen_alarm,
            format!(
                "replay bitwise-identical: {identical}; alarm raised and latched through quiet batches: {}",
                latched && seen_alarm
            ),
        ))
    })
}

/// Privacy noise only delays detection: with losses shifted above the
/// threshold, the median alarm batch without noise is no later than the
/// median alarm batch under Gaussian noise.
fn check_monitor_power_ordering(config: &CheckConfig) -> CheckReport {
    run_check("monitor", "power-ordering", || {
        let runs = 41;
        let batches = 25;
        let batch_size = 128;
        let median_alarm = |mechanism: MechanismKind, base_stream: u64| -> Result<f64> {
            let mut firsts = Vec::new();
            for run in 0..runs {
                let mut rng = config.rng(base_stream + run);
                let monitor_config = MonitorConfig::new(
                    0.5,
                    0.05,
                    batch_size,
                    0.2,
                    RenyiBudget::new(2.0, 0.05)?,
                    mechanism,
                )?;
                let mut monitor = Monitor::new(monitor_config)?;
                let losses: Vec<f64> = (0..batches * batch_size)
                    .map(|_| if rng.gen_bool(0.6) { 1.0 } else { 0.0 })
                    .collect();
                monitor.ingest(&losses, &mut rng)?;
                let first = monitor
                    .history()
                    .iter()
                    .find(|r| r.alarmed)
                    .map(|r| r.index as f64)
                    .unwrap_or(batches as f64 + 1.0);
                firsts.push(first);
            }
            firsts.sort_by(f64::total_cmp);
            Ok(firsts[runs as usize / 2])
        };
        let noiseless = median_alarm(MechanismKind::Identity, 2800)?;
        let gaussian = median_alarm(MechanismKind::Gaussian, 2900)?;
        Ok((
            noiseless <= gaussian,
            format!("median alarm batch: noiseless {noiseless}, gaussian {gaussian}"),
        ))
    })
}

// ---------------------------------------------------------------------------
// conformal
// ---------------------------------------------------------------------------

/// The exchangeable e-value grows strictly with the test score, so without
/// noise the prediction set is a down-set: the included levels form a prefix
/// of the score-ordered levels.
fn check_conformal_down_set(config: &CheckConfig) -> CheckReport {
    run_check("conformal", "down-set-structure", || {
        let mut rng = config.rng(29);
        let quantizer = ScoreQuantizer::new(30, 1.0, 10.0)?;
        let raw: Vec<f64> = (0..200).map(|_| 1.0 + rng.gen_range(0.0..0.5)).collect();
        let calib = CalibrationScores::from_raw(&quantizer, &raw)?;
        let mut strictly_increasing = true;
        let mut prev = f64::NEG_INFINITY;
        for center in quantizer.centers() {
            let e = exch_evalue(&calib, center)?.value();
            strictly_increasing &= e > prev;
            prev = e;
        }
        let levels = privatize_levels(
            &calib,
            &quantizer,
            RenyiBudget::new(2.0, 1.0)?,
            MechanismKind::Identity,
            &mut rng,
        )?;
        let set = predict_set(&levels, &quantizer.centers(), 0.2, false)?;
        let prefix = set
            .included()
            .iter()
            .enumerate()
            .all(|(pos, &level)| level == pos);
        let interior = !set.included().is_empty() && set.included().len() < quantizer.bins();
        Ok((
            strictly_increasing && prefix && interior,
            format!(
                "e-values strictly increasing: {strictly_increasing}; included levels are a proper prefix of length {}",
                set.included().len()
            ),
        ))
    })
}

/// Empirical sensitivity: across ten thousand calibration sets differing in
/// one replaced score, the change in the log e-value never exceeds the
/// closed-form bound.
fn check_conformal_sensitivity_empirical(config: &CheckConfig) -> CheckReport {
    run_check("conformal", "sensitivity-bound-empirical", || {
        let mut rng = config.rng(30);
        let quantizer = ScoreQuantizer::new(25, 1.0, 100.0)?;
        let bound = exch_sensitivity(quantizer.center(0), quantizer.center(24), 60)?.get();
        let pairs = 10_000;
        let mut violations = 0_u32;
        let mut worst_slack = f64::NEG_INFINITY;
        for _ in 0..pairs {
            let mut raw: Vec<f64> = (0..60).map(|_| rng.gen_range(1.0..100.0)).collect();
            let calib = CalibrationScores::from_raw(&quantizer, &raw)?;
            let at = rng.gen_range(0..raw.len());
            raw[at] = rng.gen_range(1.0..100.0);
            let neighbor = CalibrationScores::from_raw(&quantizer, &raw)?;
            let s_test = quantizer.center(rng.gen_range(0..quantizer.bins()));
            let delta = (exch_evalue(&calib, s_test)?.log_value()
                - exch_evalue(&neighbor, s_test)?.log_value())
            .abs();
            worst_slack = worst_slack.max(delta - bound);
            if delta > bound {
                violations += 1;
            }
        }
        Ok((
            violations == 0,
            format!("{violations} violations over {pairs} replaced-score pairs; worst observed-minus-bound {worst_slack:.3e}"),
        ))
    })
}

/// Monte Carlo marginal coverage: a test score drawn from the calibration
/// distribution lands in the prediction set with frequency at least one
/// minus alpha, on both the noiseless and Gaussian lanes.
fn check_conformal_coverage(config: &CheckConfig) -> CheckReport {
    run_check("conformal", "coverage-monte-carlo", || {
        let mut rng = config.rng(31);
        let quantizer = ScoreQuantizer::new(50, 1.0, 10.0)?;
        let reps = 400;
        let n = 1_000;
        let alpha = 0.1;
        let bound = (1.0 - alpha) - 3.0 * binomial_se(1.0 - alpha, reps as f64);
        let mut observed = Vec::new();
        let mut all_above = true;
        for mechanism in [MechanismKind::Identity, MechanismKind::Gaussian] {
            let mut hits = 0_u32;
            for _ in 0..reps {
                let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..10.0)).collect();
                let calib = CalibrationScores::from_raw(&quantizer, &raw)?;
                let levels = privatize_levels(
                    &calib,
                    &quantizer,
                    RenyiBudget::new(2.0, 1.0)?,
                    mechanism,
                    &mut rng,
                )?;
                let test_score = rng.gen_range(1.0..10.0);
                let set = predict_set(&levels, &[test_score], alpha, false)?;
                if !set.included().is_empty() {
                    hits += 1;
                }
            }
            let coverage = hits as f64 / reps as f64;
            all_above &= coverage >= bound;
            observed.push(format!("{mechanism:?} {coverage:.3}"));
        }
        Ok((
            all_above,
            format!("coverage {} vs bound {bound:.3}", observed.join(", ")),
        ))
    })
}

/// The ledger of a private level release records one entry per bin and
/// spends the configured budget exactly.
fn check_conformal_budget_exactness(config: &CheckConfig) -> CheckReport {
    run_check("conformal", "budget-exactness", || {
        let mut rng = config.rng(32);
        let bins = 40;
        let epsilon = 0.8;
        let quantizer = ScoreQuantizer::new(bins, 1.0, 10.0)?;
        let raw: Vec<f64> = (0..100).map(|_| rng.gen_range(1.0..10.0)).collect();
        let calib = CalibrationScores::from_raw(&quantizer, &raw)?;
        let levels = privatize_levels(
            &calib,
            &quantizer,
            RenyiBudget::new(2.0, epsilon)?,
            MechanismKind::Gaussian,
            &mut rng,
        )?;
        let spent_gap = (levels.ledger().spent() - epsilon).abs();
        let per_level_gap = (levels.per_level_budget().epsilon() - epsilon / bins as f64).abs();
        Ok((
            levels.ledger().len() == bins && spent_gap <= 1e-12 && per_level_gap <= 1e-15,
            format!(
                "{} ledger rows, |spent - epsilon| = {spent_gap:.3e}, per-level share off by {per_level_gap:.3e}",
                levels.ledger().len()
            ),
        ))
    })
}
