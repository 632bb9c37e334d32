//! Deterministic random streams.
//!
//! Every Monte Carlo task (one frame, one batch of channel draws) gets its own
//! ChaCha stream addressed by `(seed, purpose, index)`. Results therefore do
//! not depend on how tasks are scheduled across worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream tags, so that e.g. the SNR calibration pass and the BER loop never
/// share random draws even when given the same user seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Frames = 1,
    Calibration = 2,
    FadingPopulation = 3,
    BimodalSampling = 4,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream number `index` for the given seed and purpose.
pub fn stream(seed: u64, purpose: Purpose, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(purpose as u64)));
    rng.set_stream(index);
    rng
}
