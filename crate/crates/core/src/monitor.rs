//! Anytime-valid private risk monitoring.
//!
//! Losses in `[0, 1]` arrive as a stream and are scored in fixed-size
//! batches. Each completed batch gets a fresh one-sided betting e-value
//! against the null "mean loss <= safety threshold", privatized with one
//! noise draw at the per-batch budget. Because the batches are disjoint, the
//! private e-values multiply into a single running e-process whose declared
//! budget stays the per-batch budget, and by Ville's inequality the
//! probability that the running product ever reaches `1/alpha` under the
//! null is at most `alpha` — so the alarm rule "latch when the cumulative
//! e-value reaches `1/alpha`" is an anytime-valid sequential test.
//!
//! The alarm is latched: once set it never clears, while ingestion continues
//! so trajectories remain plottable. Partial batches are buffered, never
//! scored, because the noise calibration is tied to the sensitivity of a
//! full batch.

use rand::Rng;

use crate::error::{require, Result};
use crate::evalue::{continue_product, privatize, PrivateEValue};
use crate::mean::{BettingPrior, BoundedSample, MeanEValueState, DEFAULT_ATOMS};
use crate::mechanisms::{CalibratedNoise, MechanismKind};
use crate::privacy::{BudgetLedger, RenyiBudget};

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_BATCH_SIZE: usize = 128;
pub const DEFAULT_BETTING_C: f64 = 0.2;

/// The rejection boundary `1/alpha` for the cumulative e-value.
pub fn alarm_threshold(alpha: f64) -> Result<f64> {
    require(
        alpha.is_finite() && alpha > 0.0 && alpha < 1.0,
        "alpha",
        "strictly inside (0, 1)",
        alpha,
    )?;
    Ok(1.0 / alpha)
}

/// Static configuration of one monitor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorConfig {
    pub safety_threshold: f64,
    pub alpha: f64,
    pub batch_size: usize,
    pub betting_c: f64,
    pub batch_budget: RenyiBudget,
    pub mechanism: MechanismKind,
}

impl MonitorConfig {
    pub fn new(
        safety_threshold: f64,
        alpha: f64,
        batch_size: usize,
        betting_c: f64,
        batch_budget: RenyiBudget,
        mechanism: MechanismKind,
    ) -> Result<Self> {
        require(
            safety_threshold.is_finite() && safety_threshold > 0.0 && safety_threshold < 1.0,
            "safety threshold",
            "strictly inside (0, 1)",
            safety_threshold,
        )?;
        require(
            alpha.is_finite() && alpha > 0.0 && alpha < 1.0,
            "alpha",
            "strictly inside (0, 1)",
            alpha,
        )?;
        require(
            batch_size >= 1,
            "batch size",
            "a positive integer",
            batch_size as f64,
        )?;
        require(
            betting_c.is_finite() && betting_c > 0.0 && betting_c < 1.0,
            "betting c",
            "strictly inside (0, 1)",
            betting_c,
        )?;
        Ok(MonitorConfig {
            safety_threshold,
            alpha,
            batch_size,
            betting_c,
            batch_budget,
            mechanism,
        })
    }

    /// The stock configuration: alpha 0.05, batches of 128, betting span 0.2.
    pub fn standard(
        safety_threshold: f64,
        batch_budget: RenyiBudget,
        mechanism: MechanismKind,
    ) -> Result<Self> {
        MonitorConfig::new(
            safety_threshold,
            DEFAULT_ALPHA,
            DEFAULT_BATCH_SIZE,
            DEFAULT_BETTING_C,
            batch_budget,
            mechanism,
        )
    }
}

/// Snapshot of one scored batch, in arrival order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchRecord {
    pub index: u64,
    pub log_evalue: f64,
    pub cumulative_log_evalue: f64,
    pub alarmed: bool,
}

/// The monitoring state machine. One `ingest` call at a time; snapshots can
/// be read at any point between calls.
#[derive(Debug, Clone)]
pub struct Monitor {
    config: MonitorConfig,
    prior: BettingPrior,
    noise: CalibratedNoise,
    pending: Vec<BoundedSample>,
    cumulative: Option<PrivateEValue>,
    batches_seen: u64,
    alarmed: bool,
    ledger: BudgetLedger,
    history: Vec<BatchRecord>,
}

impl Monitor {
    /// Builds the per-batch prior and calibrates the noise once up front;
    /// an unattainable Laplace budget fails here, before any data arrives.
    pub fn new(config: MonitorConfig) -> Result<Self> {
        let prior = BettingPrior::one_sided(
            config.betting_c,
            config.safety_threshold,
            DEFAULT_ATOMS,
        )?;
        let sens = prior.log_sensitivity_bound(config.safety_threshold)?;
        let noise = config.mechanism.calibrate_rdp(sens, config.batch_budget)?;
        let ledger = BudgetLedger::new(config.batch_budget.alpha())?;
        Ok(Monitor {
            config,
            prior,
            noise,
            pending: Vec::new(),
            cumulative: None,
            batches_seen: 0,
            alarmed: false,
            ledger,
            history: Vec::new(),
        })
    }

    pub fn config(&self) -> &MonitorConfig {
        &self.config
    }

    pub fn batches_seen(&self) -> u64 {
        self.batches_seen
    }

    pub fn is_alarmed(&self) -> bool {
        self.alarmed
    }

    /// Losses buffered but not yet scored (always < batch_size after ingest).
    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// Log of the running product; zero before the first scored batch.
    pub fn cumulative_log_evalue(&self) -> f64 {
        self.cumulative.as_ref().map_or(0.0, |pe| pe.log_value())
    }

    /// The running product as a releasable private e-value, if any batch has
    /// been scored. Its budget stays the per-batch budget: multiplying
    /// e-values from disjoint batches is optional continuation, not
    /// composition.
    pub fn released(&self) -> Option<&PrivateEValue> {
        self.cumulative.as_ref()
    }

    pub fn ledger(&self) -> &BudgetLedger {
        &self.ledger
    }

    pub fn history(&self) -> &[BatchRecord] {
        &self.history
    }

    /// Validates and buffers `losses`, scoring every completed batch. On a
    /// range error (reported with the offending index into `losses`) no
    /// state changes at all.
    pub fn ingest<R: Rng + ?Sized>(&mut self, losses: &[f64], rng: &mut R) -> Result<()> {
        let samples = BoundedSample::many(losses)?;
        self.pending.extend(samples);
        while self.pending.len() >= self.config.batch_size {
            let batch: Vec<BoundedSample> =
                self.pending.drain(..self.config.batch_size).collect();
            let mut state = MeanEValueState::new(self.prior.clone());
            state.observe_all(&batch)?;
            let released = privatize(&state.evalue(), &self.noise, rng);
            self.absorb_release(released)?;
        }
        Ok(())
    }

    /// Folds one per-batch release into the running product, advances the
    /// ledger, latches the alarm, and records the snapshot.
    fn absorb_release(&mut self, released: PrivateEValue) -> Result<()> {
        let combined = match &self.cumulative {
            Some(current) => continue_product(current, &released)?,
            None => released.clone(),
        };
        let log_cumulative = combined.log_value();
        self.cumulative = Some(combined);
        let index = self.batches_seen;
        self.batches_seen += 1;
        let ledger = std::mem::replace(
            &mut self.ledger,
            BudgetLedger::new(self.config.batch_budget.alpha())?,
        );
        self.ledger = ledger.record(format!("batch {index}"), self.config.batch_budget)?;
        if log_cumulative >= -self.config.alpha.ln() {
            self.alarmed = true;
        }
        self.history.push(BatchRecord {
            index,
            log_evalue: released.log_value(),
            cumulative_log_evalue: log_cumulative,
            alarmed: self.alarmed,
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalue::EValue;
    use crate::mechanisms::NoiseSpec;
    use crate::privacy::PrivacyBudget;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn budget() -> RenyiBudget {
        RenyiBudget::new(2.0, 0.05).unwrap()
    }

    fn identity_monitor(batch_size: usize) -> Monitor {
        let config =
            MonitorConfig::new(0.5, 0.05, batch_size, 0.2, budget(), MechanismKind::Identity)
                .unwrap();
        Monitor::new(config).unwrap()
    }

    fn release_of(value: f64) -> PrivateEValue {
        let noise = CalibratedNoise::new(NoiseSpec::Identity, PrivacyBudget::Renyi(budget()))
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        privatize(&EValue::new(value).unwrap(), &noise, &mut rng)
    }

    #[test]
    fn alarm_threshold_frozen_values() {
        assert_eq!(alarm_threshold(0.05).unwrap(), 20.0);
        assert_eq!(alarm_threshold(0.5).unwrap(), 2.0);
        assert_eq!(alarm_threshold(0.01).unwrap(), 100.0);
        assert!(alarm_threshold(0.0).is_err());
        assert!(alarm_threshold(1.0).is_err());
        assert!(alarm_threshold(-0.3).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(MonitorConfig::new(0.0, 0.05, 128, 0.2, budget(), MechanismKind::Identity)
            .is_err());
        assert!(MonitorConfig::new(0.5, 1.0, 128, 0.2, budget(), MechanismKind::Identity)
            .is_err());
        assert!(MonitorConfig::new(0.5, 0.05, 0, 0.2, budget(), MechanismKind::Identity)
            .is_err());
        assert!(MonitorConfig::new(0.5, 0.05, 128, 1.0, budget(), MechanismKind::Identity)
            .is_err());
        let standard =
            MonitorConfig::standard(0.2, budget(), MechanismKind::Gaussian).unwrap();
        assert_eq!(standard.batch_size, 128);
        assert_eq!(standard.betting_c, 0.2);
        assert_eq!(standard.alpha, 0.05);
    }

    #[test]
    fn short_ingest_only_buffers() {
        let mut monitor = identity_monitor(8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        monitor.ingest(&[0.2, 0.4, 0.6], &mut rng).unwrap();
        assert_eq!(monitor.batches_seen(), 0);
        assert_eq!(monitor.pending_len(), 3);
        assert_eq!(monitor.cumulative_log_evalue(), 0.0);
        assert!(monitor.history().is_empty());
        assert!(monitor.ledger().is_empty());
        assert!(!monitor.is_alarmed());
    }

    #[test]
    fn partial_batches_survive_across_ingests() {
        let mut monitor = identity_monitor(4);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        monitor.ingest(&[0.5, 0.5, 0.5], &mut rng).unwrap();
        monitor.ingest(&[0.5, 0.5, 0.5], &mut rng).unwrap();
        // Six losses: one full batch scored, two left pending.
        assert_eq!(monitor.batches_seen(), 1);
        assert_eq!(monitor.pending_len(), 2);
    }

    #[test]
    fn frozen_three_batch_alarm_sequence() {
        // Private batch e-values {1.5, 2.0, 8.0} at alpha = 0.05: the
        // cumulative products are 1.5, 3.0, 24 against threshold 20, so the
        // alarm fires exactly at the third batch.
        let mut monitor = identity_monitor(4);
        monitor.absorb_release(release_of(1.5)).unwrap();
        assert!(!monitor.is_alarmed());
        monitor.absorb_release(release_of(2.0)).unwrap();
        assert!(!monitor.is_alarmed());
        assert!((monitor.cumulative_log_evalue() - 3.0f64.ln()).abs() < 1e-12);
        monitor.absorb_release(release_of(8.0)).unwrap();
        assert!(monitor.is_alarmed());
        assert!((monitor.cumulative_log_evalue() - 24.0f64.ln()).abs() < 1e-12);
        let records = monitor.history();
        assert_eq!(records.len(), 3);
        assert_eq!(
            records.iter().map(|r| r.alarmed).collect::<Vec<_>>(),
            vec![false, false, true]
        );
        assert_eq!(records[2].index, 2);
    }

    #[test]
    fn alarm_stays_latched_when_evidence_recedes() {
        let mut monitor = identity_monitor(4);
        monitor.absorb_release(release_of(25.0)).unwrap();
        assert!(monitor.is_alarmed());
        monitor.absorb_release(release_of(0.01)).unwrap();
        assert!(monitor.cumulative_log_evalue() < alarm_threshold(0.05).unwrap().ln());
        assert!(monitor.is_alarmed(), "alarm must never clear");
        assert!(monitor.history().last().unwrap().alarmed);
    }

    #[test]
    fn identity_mechanism_matches_non_private_product_exactly() {
        let mut monitor = identity_monitor(16);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let losses: Vec<f64> = (0..48).map(|i| (i % 10) as f64 / 10.0).collect();
        monitor.ingest(&losses, &mut rng).unwrap();
        assert_eq!(monitor.batches_seen(), 3);

        let mut expected = 0.0;
        for chunk in losses.chunks(16) {
            let prior = BettingPrior::one_sided(0.2, 0.5, DEFAULT_ATOMS).unwrap();
            let mut state = MeanEValueState::new(prior);
            state
                .observe_all(&BoundedSample::many(chunk).unwrap())
                .unwrap();
            expected += state.evalue().log_value();
        }
        assert_eq!(monitor.cumulative_log_evalue(), expected);
    }

    #[test]
    fn out_of_range_loss_rejects_without_mutating() {
        let mut monitor = identity_monitor(4);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        monitor.ingest(&[0.1, 0.2], &mut rng).unwrap();
        let err = monitor
            .ingest(&[0.3, 0.4, 1.5, 0.6], &mut rng)
            .unwrap_err();
        assert!(matches!(
            err,
            crate::error::Error::OutOfRange { index: 2, .. }
        ));
        // Nothing from the failed call was buffered or scored.
        assert_eq!(monitor.pending_len(), 2);
        assert_eq!(monitor.batches_seen(), 0);
    }

    #[test]
    fn running_product_keeps_the_per_batch_budget() {
        let config =
            MonitorConfig::new(0.5, 0.05, 8, 0.2, budget(), MechanismKind::Gaussian).unwrap();
        let mut monitor = Monitor::new(config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        monitor.ingest(&[0.5; 24], &mut rng).unwrap();
        assert_eq!(monitor.batches_seen(), 3);
        let released = monitor.released().unwrap();
        match released.budget() {
            PrivacyBudget::Renyi(b) => {
                assert_eq!(b.alpha(), 2.0);
                assert_eq!(b.epsilon(), 0.05);
            }
            other => panic!("expected a Renyi budget, got {other}"),
        }
        // Two continuation folds after the first release.
        assert_eq!(released.lineage().len(), 2);
        // The audit ledger still records every batch.
        assert_eq!(monitor.ledger().len(), 3);
        assert!((monitor.ledger().spent() - 0.15).abs() < 1e-12);
    }

    #[test]
    fn ingestion_is_deterministic_per_seed() {
        let config =
            MonitorConfig::new(0.3, 0.05, 8, 0.2, budget(), MechanismKind::Gaussian).unwrap();
        let losses: Vec<f64> = (0..64).map(|i| ((i * 7) % 11) as f64 / 11.0).collect();

        let run = |seed: u64| {
            let mut monitor = Monitor::new(config).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            monitor.ingest(&losses, &mut rng).unwrap();
            monitor.cumulative_log_evalue()
        };
        assert_eq!(run(42), run(42));
        assert_ne!(run(42), run(43));
    }

    #[test]
    fn laplace_calibration_failure_surfaces_at_construction() {
        // Tiny per-batch budget with the standard sensitivity leaves the
        // Laplace family undefined; the monitor refuses to build.
        let tight = RenyiBudget::new(2.0, 1e-4).unwrap();
        let config = MonitorConfig::new(0.5, 0.05, 128, 0.2, tight, MechanismKind::Laplace)
            .unwrap();
        assert!(matches!(
            Monitor::new(config),
            Err(crate::error::Error::LaplaceUndefined { .. })
        ));
    }
}
