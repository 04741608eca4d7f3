//! Named random streams derived from one run seed.
//!
//! Each component draws from its own ChaCha stream so that, for example,
//! changing the number of quantizer draws does not perturb the channel
//! sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Channel = 1,
    Arrivals = 2,
    QuantizerNoise = 3,
    NetworkInit = 4,
    BatchSampling = 5,
    /// Instance generation for oracle checks and property tests.
    Instances = 6,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

/// All per-run streams, created together.
#[derive(Debug, Clone)]
pub struct RunStreams {
    pub channel: ChaCha8Rng,
    pub arrivals: ChaCha8Rng,
    pub quantizer: ChaCha8Rng,
    pub init: ChaCha8Rng,
    pub batch: ChaCha8Rng,
}

impl RunStreams {
    pub fn new(seed: u64) -> Self {
        Self {
            channel: stream(seed, Stream::Channel),
            arrivals: stream(seed, Stream::Arrivals),
            quantizer: stream(seed, Stream::QuantizerNoise),
            init: stream(seed, Stream::NetworkInit),
            batch: stream(seed, Stream::BatchSampling),
        }
    }
}
