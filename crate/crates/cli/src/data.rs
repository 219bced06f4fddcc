//! Synthetic data generators standing in for real datasets: a Bernoulli
//! prevalence sample, a change-point loss stream, and a score mixture over
//! quantizer bins. Each takes its own RNG substream so generated data is
//! independent of how many repetitions or lanes surround it.

use rand::Rng;

/// `n` draws from Bernoulli(`p`), as 0.0/1.0 losses.
pub fn bernoulli<R: Rng + ?Sized>(p: f64, n: usize, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| if rng.gen_bool(p) { 1.0 } else { 0.0 })
        .collect()
}

/// A Bernoulli loss stream of `batches * batch_size` values whose mean jumps
/// from `mean_before` to `mean_after` at the start of batch `change_batch`
/// (1-based; a change batch beyond the stream never triggers).
pub fn changepoint<R: Rng + ?Sized>(
    mean_before: f64,
    mean_after: f64,
    change_batch: usize,
    batch_size: usize,
    batches: usize,
    rng: &mut R,
) -> Vec<f64> {
    (0..batches * batch_size)
        .map(|i| {
            let batch = i / batch_size + 1;
            let mean = if batch >= change_batch {
                mean_after
            } else {
                mean_before
            };
            if rng.gen_bool(mean) {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// `n` scores from a mixture over `weights.len()` equal-width bins spanning
/// `[lo, hi]`: a bin is chosen with probability proportional to its weight,
/// then the score is uniform inside that bin.
pub fn score_mixture<R: Rng + ?Sized>(
    lo: f64,
    hi: f64,
    weights: &[f64],
    n: usize,
    rng: &mut R,
) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    let width = (hi - lo) / weights.len() as f64;
    (0..n)
        .map(|_| {
            let mut pick = rng.gen_range(0.0..total);
            let mut bin = weights.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                if pick < *w {
                    bin = i;
                    break;
                }
                pick -= w;
            }
            let start = lo + bin as f64 * width;
            rng.gen_range(start..start + width)
        })
        .collect()
}

/// The default score-mixture weights: exponential decay across `bins` bins
/// plus a small uniform floor. The decay concentrates mass at low scores so
/// the score mean stays well below the range midpoint; the floor keeps a
/// thin tail of large scores alive, so conformal level e-values straddle
/// their decision threshold instead of all landing on one side.
pub fn decayed_weights(bins: usize, decay: f64) -> Vec<f64> {
    let floor = 0.1 / bins as f64;
    (0..bins)
        .map(|i| (-decay * i as f64 / (bins.max(2) - 1) as f64).exp() + floor)
        .collect()
}
