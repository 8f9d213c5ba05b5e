//! Named, index-addressable random streams derived from one master seed.
//!
//! Every concern (cascades, RR sampling, exploration, initialization, ...) gets
//! its own stream, and parallel work is keyed by a work-item index rather than
//! by worker, so results do not depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Streams {
    master: u64,
}

impl Streams {
    pub fn new(master: u64) -> Self {
        Streams { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Seed of stream `(name, index)`.
    pub fn seed_of(&self, name: &str, index: u64) -> u64 {
        derive_seed(self.master, name, index)
    }

    pub fn rng(&self, name: &str, index: u64) -> StreamRng {
        StreamRng::seed_from_u64(self.seed_of(name, index))
    }

    /// A child family rooted at `(name, index)`.
    pub fn child(&self, name: &str, index: u64) -> Streams {
        Streams::new(self.seed_of(name, index))
    }

    /// Draws a fresh family from an existing generator.
    pub fn from_rng<R: Rng + ?Sized>(rng: &mut R) -> Streams {
        Streams::new(rng.random())
    }
}

pub fn derive_seed(master: u64, name: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update((name.len() as u64).to_le_bytes());
    h.update(name.as_bytes());
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}
