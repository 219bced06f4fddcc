//! Shared fixtures for the criterion benchmarks: deterministic data streams
//! and ready-made configurations sized like typical interactive runs. The
//! benchmarks themselves live in `benches/pipelines.rs`.

use evdp_core::{BoundedSample, PriorConfig};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Every benchmark derives its randomness from this seed so timings compare
/// like for like across runs.
pub const BENCH_SEED: u64 = 97;

/// A deterministic RNG on its own stream, so fixtures never share draws.
pub fn rng(stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(BENCH_SEED);
    rng.set_stream(stream);
    rng
}

/// Bernoulli(p) observations as bounded samples in `[0, 1]`.
pub fn bernoulli_samples(p: f64, n: usize, stream: u64) -> Vec<BoundedSample> {
    let mut rng = rng(stream);
    let unit = Uniform::new(0.0, 1.0);
    (0..n)
        .map(|_| BoundedSample::new(if unit.sample(&mut rng) < p { 1.0 } else { 0.0 }).unwrap())
        .collect()
}

/// Uniform scores on `[lo, hi)` for conformal calibration.
pub fn uniform_scores(lo: f64, hi: f64, n: usize, stream: u64) -> Vec<f64> {
    let mut rng = rng(stream);
    let span = Uniform::new(lo, hi);
    (0..n).map(|_| span.sample(&mut rng)).collect()
}

/// The two-sided betting prior used throughout the benchmarks.
pub fn standard_prior() -> PriorConfig {
    PriorConfig::Uniform {
        lambda_inf: -1.0,
        lambda_sup: 1.0,
        atoms: 51,
    }
}
