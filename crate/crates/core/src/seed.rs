//! Deterministic seed derivation for parallel Monte Carlo trials.
//!
//! Every random stream in a campaign is keyed by
//! `(master_seed, trial_index, stream tag, lane)` through repeated
//! splitmix64 finalizer mixing. Trials can therefore run on any number of
//! worker threads, in any order, and still draw identical randomness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags; `lane` further separates per-user substreams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Channel realizations for all users of a trial.
    Channel,
    /// The shared BS training matrix P.
    TrainingBs,
    /// Per-user MS combining matrices Q_u (lane = user).
    TrainingMs,
    /// Per-user measurement noise (lane = user).
    Noise,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Channel => 0x01,
            Stream::TrainingBs => 0x02,
            Stream::TrainingMs => 0x03,
            Stream::Noise => 0x04,
        }
    }
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit seed for one `(trial, stream, lane)` substream.
pub fn stream_seed(master_seed: u64, trial_index: u64, stream: Stream, lane: u64) -> u64 {
    let a = mix(master_seed);
    let b = mix(a ^ trial_index);
    let c = mix(b ^ stream.tag());
    mix(c ^ lane)
}

/// ChaCha8 generator for one substream.
pub fn stream_rng(master_seed: u64, trial_index: u64, stream: Stream, lane: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master_seed, trial_index, stream, lane))
}
