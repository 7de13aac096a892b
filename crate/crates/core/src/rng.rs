//! Seedable, platform-independent random sub-streams.
//!
//! Every consumer derives its generator from a root seed plus a channel id, so
//! channels never share state: toggling label noise leaves feature draws untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named sub-stream ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Channel {
    Concept = 1,
    Labels = 2,
    ConceptMix = 3,
    Features = 4,
    LabelNoise = 5,
    Resampling = 6,
}

/// ChaCha8 generator for `(seed, channel)`.
pub fn sub_stream(seed: u64, channel: Channel) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(channel as u64);
    rng
}
