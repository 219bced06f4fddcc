//! Private conformal prediction through exchangeability e-values.
//!
//! A test score `s` is compared against `n` calibration scores via
//!
//! ```text
//! E(D; s) = (n + 1) s / (S_1 + … + S_n + s)
//! ```
//!
//! which has expectation at most one when `s` is exchangeable with the
//! calibration scores, and grows toward `n + 1` when `s` is unusually large.
//! Scores are quantized to `B` bin centers, so only `B` distinct e-values
//! exist — one per level. [`privatize_levels`] releases all of them in one
//! shot, each with fresh noise at the per-level budget `epsilon / B` and with
//! the sensitivity bound `2 (b/a) / (n + 1)` (scores in `[a, b]`, `a > 0`).
//! Prediction is pure post-processing of that release: a candidate enters
//! the prediction set when its level's private e-value stays strictly below
//! `1/alpha`, so any number of test points can be served without touching
//! the budget again.

use rand::Rng;

use crate::error::{require, Error, Result};
use crate::evalue::{privatize, EValue, PrivateEValue};
use crate::mechanisms::MechanismKind;
use crate::privacy::{BudgetLedger, LogSensitivity, RenyiBudget};

/// Uniform quantizer: `bins` equal-width bins spanning `[lo, hi]` with
/// `lo > 0`, each represented by its center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreQuantizer {
    bins: usize,
    lo: f64,
    hi: f64,
}

impl ScoreQuantizer {
    pub fn new(bins: usize, lo: f64, hi: f64) -> Result<Self> {
        require(bins >= 1, "bin count", "a positive integer", bins as f64)?;
        require(
            lo.is_finite() && lo > 0.0,
            "score range low end",
            "strictly positive (sensitivity needs a > 0)",
            lo,
        )?;
        require(
            hi.is_finite() && hi > lo,
            "score range high end",
            "strictly above the low end",
            hi,
        )?;
        Ok(ScoreQuantizer { bins, lo, hi })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    pub fn center(&self, bin: usize) -> f64 {
        self.lo + (bin as f64 + 0.5) * self.width()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.bins).map(|b| self.center(b)).collect()
    }

    /// Bin containing `score`; an interior bin edge belongs to the lower bin
    /// so quantization is deterministic and the smallest center stays `> 0`.
    pub fn bin_index(&self, score: f64) -> Result<usize> {
        require(
            score.is_finite() && score >= self.lo && score <= self.hi,
            "score",
            "within the quantizer range",
            score,
        )?;
        let position = (score - self.lo) / self.width();
        let mut bin = position.floor();
        if position == bin && bin > 0.0 {
            bin -= 1.0;
        }
        Ok((bin as usize).min(self.bins - 1))
    }

    /// The center of the bin containing `score`.
    pub fn quantize(&self, score: f64) -> Result<f64> {
        Ok(self.center(self.bin_index(score)?))
    }
}

/// Calibration scores already snapped to bin centers, with their sum cached.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationScores {
    scores: Vec<f64>,
    sum: f64,
}

impl CalibrationScores {
    /// Quantizes raw scores; a score outside the quantizer range is rejected
    /// with its index.
    pub fn from_raw(quantizer: &ScoreQuantizer, raw: &[f64]) -> Result<Self> {
        require(
            !raw.is_empty(),
            "calibration size",
            "at least one score",
            0.0,
        )?;
        let mut scores = Vec::with_capacity(raw.len());
        for (index, &value) in raw.iter().enumerate() {
            let center = quantizer.quantize(value).map_err(|_| Error::OutOfRange {
                index,
                value,
                expected: "within the quantizer range",
            })?;
            scores.push(center);
        }
        let sum = scores.iter().sum();
        Ok(CalibrationScores { scores, sum })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn sum(&self) -> f64 {
        self.sum
    }

    pub fn n(&self) -> usize {
        self.scores.len()
    }
}

/// The exchangeability e-value `(n+1) s / (sum + s)`, strictly increasing in
/// the test score and bounded by `n + 1`.
pub fn exch_evalue(calib: &CalibrationScores, s_test: f64) -> Result<EValue> {
    require(
        s_test.is_finite() && s_test > 0.0,
        "test score",
        "strictly positive",
        s_test,
    )?;
    let n = calib.n() as f64;
    EValue::new((n + 1.0) * s_test / (calib.sum() + s_test))
}

/// Worst-case change of the log e-value when one calibration score is
/// replaced: `2 (b/a) / (n + 1)` for scores within `[a, b]`, `a > 0`.
pub fn exch_sensitivity(a: f64, b: f64, n: usize) -> Result<LogSensitivity> {
    require(
        a.is_finite() && a > 0.0,
        "score lower bound",
        "strictly positive",
        a,
    )?;
    require(
        b.is_finite() && b >= a,
        "score upper bound",
        "at least the lower bound",
        b,
    )?;
    require(n >= 1, "calibration size", "a positive integer", n as f64)?;
    LogSensitivity::new(2.0 * (b / a) / (n as f64 + 1.0))
}

/// One private release of all level e-values: for every bin center, the
/// exchangeability e-value privatized with fresh noise at `epsilon / B`.
#[derive(Debug, Clone)]
pub struct PrivateLevelEValues {
    levels: Vec<PrivateEValue>,
    per_level: RenyiBudget,
    ledger: BudgetLedger,
    quantizer: ScoreQuantizer,
}

impl PrivateLevelEValues {
    pub fn levels(&self) -> &[PrivateEValue] {
        &self.levels
    }

    pub fn per_level_budget(&self) -> RenyiBudget {
        self.per_level
    }

    pub fn ledger(&self) -> &BudgetLedger {
        &self.ledger
    }

    pub fn quantizer(&self) -> ScoreQuantizer {
        self.quantizer
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// Releases the `B` level e-values. The sensitivity bound uses the first and
/// last bin centers (every quantized score lies between them), the noise is
/// calibrated once at `(alpha_R, epsilon / B)`, and each level draws its own
/// noise. The ledger totals exactly the requested epsilon.
pub fn privatize_levels<R: Rng + ?Sized>(
    calib: &CalibrationScores,
    quantizer: &ScoreQuantizer,
    budget: RenyiBudget,
    mechanism: MechanismKind,
    rng: &mut R,
) -> Result<PrivateLevelEValues> {
    let bins = quantizer.bins();
    let per_level = budget.split(bins)?;
    let sens = exch_sensitivity(
        quantizer.center(0),
        quantizer.center(bins - 1),
        calib.n(),
    )?;
    let noise = mechanism.calibrate_rdp(sens, per_level)?;
    let mut ledger = BudgetLedger::new(budget.alpha())?;
    let mut levels = Vec::with_capacity(bins);
    for bin in 0..bins {
        let raw = exch_evalue(calib, quantizer.center(bin))?;
        levels.push(privatize(&raw, &noise, rng));
        ledger = ledger.record(format!("level {bin}"), per_level)?;
    }
    Ok(PrivateLevelEValues {
        levels,
        per_level,
        ledger,
        quantizer: *quantizer,
    })
}

/// A prediction set over the offered candidates, by index.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    included: Vec<usize>,
    was_empty: bool,
}

impl PredictionSet {
    /// Indices into the candidate slice given to [`predict_set`], ascending.
    pub fn included(&self) -> &[usize] {
        &self.included
    }

    /// Whether the raw set was empty before any singleton conversion.
    pub fn was_empty(&self) -> bool {
        self.was_empty
    }

    pub fn len(&self) -> usize {
        self.included.len()
    }

    pub fn is_empty(&self) -> bool {
        self.included.is_empty()
    }
}

/// Post-processing of a release: include candidate `i` iff the private
/// e-value of its score's level stays strictly below `1/alpha`. An empty set
/// with `empty_to_singleton` set becomes the single most conforming
/// candidate (smallest level e-value).
pub fn predict_set(
    levels: &PrivateLevelEValues,
    candidate_scores: &[f64],
    alpha: f64,
    empty_to_singleton: bool,
) -> Result<PredictionSet> {
    require(
        alpha.is_finite() && alpha > 0.0 && alpha < 1.0,
        "alpha",
        "strictly inside (0, 1)",
        alpha,
    )?;
    let quantizer = levels.quantizer();
    let threshold = -alpha.ln();
    let mut logs = Vec::with_capacity(candidate_scores.len());
    for (index, &value) in candidate_scores.iter().enumerate() {
        let bin = quantizer.bin_index(value).map_err(|_| Error::OutOfRange {
            index,
            value,
            expected: "within the quantizer range",
        })?;
        logs.push(levels.levels()[bin].log_value());
    }
    let included: Vec<usize> = logs
        .iter()
        .enumerate()
        .filter(|(_, &log_e)| log_e < threshold)
        .map(|(i, _)| i)
        .collect();
    if !included.is_empty() {
        return Ok(PredictionSet {
            included,
            was_empty: false,
        });
    }
    let fallback = logs
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.partial_cmp(b).expect("log e-values are never NaN"))
        .map(|(i, _)| i);
    Ok(PredictionSet {
        included: match (empty_to_singleton, fallback) {
            (true, Some(best)) => vec![best],
            _ => Vec::new(),
        },
        was_empty: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{CalibratedNoise, NoiseSpec};
    use crate::privacy::PrivacyBudget;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_quantizer() -> ScoreQuantizer {
        ScoreQuantizer::new(2, 1.0, 3.0).unwrap()
    }

    fn calib_of(quantizer: &ScoreQuantizer, raw: &[f64]) -> CalibrationScores {
        CalibrationScores::from_raw(quantizer, raw).unwrap()
    }

    #[test]
    fn quantizer_centers_and_edges() {
        let q = unit_quantizer();
        assert_eq!(q.width(), 1.0);
        assert_eq!(q.centers(), vec![1.5, 2.5]);
        assert_eq!(q.bin_index(1.0).unwrap(), 0);
        assert_eq!(q.bin_index(1.99).unwrap(), 0);
        // Interior edge belongs to the lower bin.
        assert_eq!(q.bin_index(2.0).unwrap(), 0);
        assert_eq!(q.bin_index(2.01).unwrap(), 1);
        assert_eq!(q.bin_index(3.0).unwrap(), 1);
        assert!(q.bin_index(0.99).is_err());
        assert!(q.bin_index(3.01).is_err());

        let wide = ScoreQuantizer::new(50, 1.0, 100.0).unwrap();
        assert!((wide.center(0) - 1.99).abs() < 1e-12);
        assert!((wide.center(49) - 99.01).abs() < 1e-12);

        let single = ScoreQuantizer::new(1, 0.5, 2.0).unwrap();
        assert_eq!(single.bin_index(0.5).unwrap(), 0);
        assert_eq!(single.bin_index(2.0).unwrap(), 0);

        assert!(ScoreQuantizer::new(0, 1.0, 2.0).is_err());
        assert!(ScoreQuantizer::new(5, 0.0, 2.0).is_err());
        assert!(ScoreQuantizer::new(5, 2.0, 2.0).is_err());
    }

    #[test]
    fn calibration_scores_quantize_and_cache_the_sum() {
        let q = unit_quantizer();
        let calib = calib_of(&q, &[1.2, 2.9, 2.0]);
        assert_eq!(calib.scores(), &[1.5, 2.5, 1.5]);
        assert_eq!(calib.sum(), 5.5);
        assert_eq!(calib.n(), 3);

        assert!(CalibrationScores::from_raw(&q, &[]).is_err());
        let err = CalibrationScores::from_raw(&q, &[1.5, 9.0]).unwrap_err();
        assert!(matches!(err, Error::OutOfRange { index: 1, .. }));
    }

    #[test]
    fn exch_evalue_frozen_values() {
        let q = ScoreQuantizer::new(3, 0.5, 3.5).unwrap();
        // Centers are {1, 2, 3}.
        let calib = calib_of(&q, &[1.0, 2.0, 3.0]);
        let e = exch_evalue(&calib, 3.0).unwrap();
        assert!((e.value() - 12.0 / 9.0).abs() < 1e-15);

        let flat = calib_of(&q, &[2.0, 2.0, 2.0, 2.0]);
        assert_eq!(exch_evalue(&flat, 2.0).unwrap().value(), 1.0);

        assert!(exch_evalue(&calib, 0.0).is_err());
        assert!(exch_evalue(&calib, -1.0).is_err());
    }

    #[test]
    fn exch_evalue_is_monotone_and_bounded() {
        let q = ScoreQuantizer::new(10, 1.0, 100.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let raw: Vec<f64> = (0..200).map(|_| rng.gen_range(1.0..100.0)).collect();
        let calib = calib_of(&q, &raw);
        let mut last = 0.0;
        for i in 1..=1000 {
            let s = i as f64 * 0.1;
            let e = exch_evalue(&calib, s).unwrap().value();
            assert!(e > last, "must increase strictly in the test score");
            assert!(e < calib.n() as f64 + 1.0);
            last = e;
        }
        // Value sinks toward zero with the test score.
        assert!(exch_evalue(&calib, 1e-9).unwrap().value() < 1e-9);
    }

    #[test]
    fn exch_sensitivity_frozen_values() {
        assert_eq!(exch_sensitivity(1.0, 100.0, 9).unwrap().get(), 20.0);
        assert!((exch_sensitivity(2.5, 2.5, 3).unwrap().get() - 0.5).abs() < 1e-15);
        assert!((exch_sensitivity(1.0, 100.0, 9999).unwrap().get() - 0.02).abs() < 1e-15);
        // Decreasing in n.
        let wide = exch_sensitivity(1.0, 100.0, 10).unwrap().get();
        let narrow = exch_sensitivity(1.0, 100.0, 1000).unwrap().get();
        assert!(narrow < wide);

        assert!(exch_sensitivity(0.0, 1.0, 5).is_err());
        assert!(exch_sensitivity(-1.0, 1.0, 5).is_err());
        assert!(exch_sensitivity(2.0, 1.0, 5).is_err());
        assert!(exch_sensitivity(1.0, 2.0, 0).is_err());
    }

    #[test]
    fn exch_sensitivity_holds_over_neighboring_sets() {
        let q = ScoreQuantizer::new(25, 1.0, 100.0).unwrap();
        let (a, b) = (q.center(0), q.center(24));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.gen_range(2..100);
            let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..100.0)).collect();
            let calib = calib_of(&q, &raw);
            let bound = exch_sensitivity(a, b, n).unwrap().get();

            let mut neighbor_raw = raw.clone();
            let at = rng.gen_range(0..n);
            neighbor_raw[at] = rng.gen_range(1.0..100.0);
            let neighbor = calib_of(&q, &neighbor_raw);

            let s_test = q.center(rng.gen_range(0..25));
            let delta = (exch_evalue(&calib, s_test).unwrap().log_value()
                - exch_evalue(&neighbor, s_test).unwrap().log_value())
            .abs();
            assert!(delta <= bound + 1e-12, "|{delta}| > {bound}");
        }
    }

    #[test]
    fn privatize_levels_identity_reproduces_raw_levels() {
        let q = ScoreQuantizer::new(4, 1.0, 9.0).unwrap();
        let calib = calib_of(&q, &[2.0, 4.0, 6.0, 8.0, 3.0]);
        let budget = RenyiBudget::new(2.0, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let levels =
            privatize_levels(&calib, &q, budget, MechanismKind::Identity, &mut rng).unwrap();
        assert_eq!(levels.len(), 4);
        for (bin, level) in levels.levels().iter().enumerate() {
            let raw = exch_evalue(&calib, q.center(bin)).unwrap();
            assert_eq!(level.log_value(), raw.log_value());
        }
        assert_eq!(levels.per_level_budget().epsilon(), 0.125);
        assert_eq!(levels.ledger().len(), 4);
        assert!((levels.ledger().spent() - 0.5).abs() <= 4.0 * 1e-12);
    }

    #[test]
    fn privatize_levels_is_deterministic_and_single_bin_degenerates() {
        let q = ScoreQuantizer::new(1, 1.0, 9.0).unwrap();
        let calib = calib_of(&q, &[2.0, 5.0]);
        let budget = RenyiBudget::new(2.0, 0.7).unwrap();

        let run = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            privatize_levels(&calib, &q, budget, MechanismKind::Gaussian, &mut rng)
                .unwrap()
                .levels()[0]
                .log_value()
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let single =
            privatize_levels(&calib, &q, budget, MechanismKind::Gaussian, &mut rng).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single.per_level_budget().epsilon(), 0.7);
    }

    #[test]
    fn privatize_levels_surfaces_undefined_laplace() {
        // At 500 levels the per-level budget epsilon/500 is far below what
        // the Laplace family can absorb for this sensitivity.
        let q = ScoreQuantizer::new(500, 1.0, 100.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let raw: Vec<f64> = (0..1000).map(|_| rng.gen_range(1.0..100.0)).collect();
        let calib = calib_of(&q, &raw);
        let budget = RenyiBudget::new(2.0, 0.5).unwrap();
        let err =
            privatize_levels(&calib, &q, budget, MechanismKind::Laplace, &mut rng).unwrap_err();
        assert!(matches!(err, Error::LaplaceUndefined { .. }));
    }

    fn synthetic_levels_from_logs(logs: &[f64]) -> PrivateLevelEValues {
        let q = ScoreQuantizer::new(logs.len(), 1.0, 1.0 + logs.len() as f64).unwrap();
        let budget = RenyiBudget::new(2.0, 1.0).unwrap();
        let per_level = budget.split(logs.len()).unwrap();
        let noise =
            CalibratedNoise::new(NoiseSpec::Identity, PrivacyBudget::Renyi(per_level)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ledger = BudgetLedger::new(2.0).unwrap();
        let mut levels = Vec::new();
        for (bin, &log) in logs.iter().enumerate() {
            levels.push(privatize(&EValue::from_log(log).unwrap(), &noise, &mut rng));
            ledger = ledger.record(format!("level {bin}"), per_level).unwrap();
        }
        PrivateLevelEValues {
            levels,
            per_level,
            ledger,
            quantizer: q,
        }
    }

    fn synthetic_levels(values: &[f64]) -> PrivateLevelEValues {
        let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        synthetic_levels_from_logs(&logs)
    }

    #[test]
    fn predict_set_frozen_two_level_example() {
        // Levels {25, 10} against threshold 20: only the second level's
        // candidates survive the strict comparison.
        let levels = synthetic_levels(&[25.0, 10.0]);
        let q = levels.quantizer();
        let candidates = [q.center(0), q.center(1)];
        let set = predict_set(&levels, &candidates, 0.05, false).unwrap();
        assert_eq!(set.included(), &[1]);
        assert!(!set.was_empty());
    }

    #[test]
    fn predict_set_keeps_everything_below_threshold() {
        let levels = synthetic_levels(&[0.5, 0.5, 0.5]);
        let q = levels.quantizer();
        let candidates: Vec<f64> = (0..3).map(|b| q.center(b)).collect();
        let set = predict_set(&levels, &candidates, 0.05, false).unwrap();
        assert_eq!(set.included(), &[0, 1, 2]);
    }

    #[test]
    fn predict_set_boundary_is_strict() {
        // The level log equals the threshold expression bit for bit, so the
        // strict comparison must drop it.
        let levels = synthetic_levels_from_logs(&[-(0.05f64).ln()]);
        let candidates = [levels.quantizer().center(0)];
        let set = predict_set(&levels, &candidates, 0.05, false).unwrap();
        assert!(set.is_empty(), "exactly 1/alpha must be excluded");
    }

    #[test]
    fn empty_sets_convert_to_the_most_conforming_singleton() {
        let levels = synthetic_levels(&[25.0, 30.0]);
        let q = levels.quantizer();
        let candidates = [q.center(0), q.center(1)];

        let plain = predict_set(&levels, &candidates, 0.05, false).unwrap();
        assert!(plain.is_empty());
        assert!(plain.was_empty());

        let fixed = predict_set(&levels, &candidates, 0.05, true).unwrap();
        assert_eq!(fixed.included(), &[0], "level 25 is the smaller e-value");
        assert!(fixed.was_empty(), "flag reports the pre-conversion state");

        let none = predict_set(&levels, &[], 0.05, true).unwrap();
        assert!(none.is_empty());
        assert!(none.was_empty());
    }

    #[test]
    fn predict_set_rejects_unquantizable_candidates_by_index() {
        let levels = synthetic_levels(&[0.5, 0.5]);
        let q = levels.quantizer();
        let err = predict_set(&levels, &[q.center(0), 500.0], 0.05, false).unwrap_err();
        assert!(matches!(err, Error::OutOfRange { index: 1, .. }));
        assert!(predict_set(&levels, &[q.center(0)], 1.0, false).is_err());
    }

    #[test]
    fn identity_prediction_sets_are_down_sets_in_score() {
        let q = ScoreQuantizer::new(20, 1.0, 100.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        // Low-score calibration keeps the sum small enough that the top
        // levels cross 1/alpha while the bottom levels stay below it.
        let raw: Vec<f64> = (0..100).map(|_| rng.gen_range(1.0..10.0)).collect();
        let calib = calib_of(&q, &raw);
        let budget = RenyiBudget::new(2.0, 1.0).unwrap();
        let levels =
            privatize_levels(&calib, &q, budget, MechanismKind::Identity, &mut rng).unwrap();

        // Level e-values are nondecreasing in the bin center.
        let logs: Vec<f64> = levels.levels().iter().map(|l| l.log_value()).collect();
        for pair in logs.windows(2) {
            assert!(pair[0] <= pair[1]);
        }
        // So the included candidates form a strict prefix of the
        // score-sorted list.
        let candidates: Vec<f64> = (0..20).map(|b| q.center(b)).collect();
        let set = predict_set(&levels, &candidates, 0.1, false).unwrap();
        let included = set.included();
        assert!(!included.is_empty() && included.len() < 20);
        for (rank, &i) in included.iter().enumerate() {
            assert_eq!(rank, i, "down-set must be a prefix");
        }
    }
}
