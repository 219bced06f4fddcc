//! Deterministic randomness for the harness: one root seed, one ChaCha
//! substream per unit of work.
//!
//! The 64-bit stream tag composes as
//!
//! ```text
//! (command << 56) | (lane << 40) | (rep << 16) | unit
//! ```
//!
//! with `command` identifying the subcommand, `lane` a configuration slot
//! inside it (a grid position, a mechanism index), `rep` the repetition, and
//! `unit` the draw purpose (data, noise, test point). Substreams of one seed
//! never overlap, so adding repetitions or reordering work cannot change any
//! other stream's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const COMMAND_CI: u64 = 1;
pub const COMMAND_MONITOR: u64 = 2;
pub const COMMAND_CONFORMAL: u64 = 3;

pub const UNIT_DATA: u64 = 0;
pub const UNIT_NOISE: u64 = 1;
pub const UNIT_TEST: u64 = 2;

pub fn substream(seed: u64, command: u64, lane: u64, rep: u64, unit: u64) -> ChaCha8Rng {
    debug_assert!(command < (1 << 8) && lane < (1 << 16) && rep < (1 << 24) && unit < (1 << 16));
    let tag = (command << 56) | (lane << 40) | (rep << 16) | unit;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag);
    rng
}
