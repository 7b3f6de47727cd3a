//! Seed substreams.
//!
//! Every run owns one master seed. Each consumer of randomness draws from its
//! own ChaCha stream so that, for example, swapping the agent never changes
//! the fault or mobility realisation seen by the environment.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the simulator.
pub type SimRng = ChaCha8Rng;

/// Named consumers of randomness. Per-episode streams carry the episode index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Geometry,
    Shadowing,
    Policy,
    NetworkInit,
    Replay,
    FaultKind(u32),
    FaultTarget(u32),
    Mobility(u32),
}

impl Stream {
    fn id(self) -> u64 {
        let (tag, index) = match self {
            Stream::Geometry => (1, 0),
            Stream::Shadowing => (2, 0),
            Stream::Policy => (3, 0),
            Stream::NetworkInit => (4, 0),
            Stream::Replay => (5, 0),
            Stream::FaultKind(z) => (6, z),
            Stream::FaultTarget(z) => (7, z),
            Stream::Mobility(z) => (8, z),
        };
        (tag << 32) | u64::from(index)
    }
}

/// Splits a master seed into independent, reproducible generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStreams {
    master: u64,
}

impl SeedStreams {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn rng(&self, stream: Stream) -> SimRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(stream.id());
        rng
    }
}
