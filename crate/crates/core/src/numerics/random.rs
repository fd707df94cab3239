use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

/// Offset between sibling streams produced by [`RandomStream::split`].
pub const SPLIT_SPACING: u64 = 1 << 40;

/// Counter-based random stream: the draw at position `counter` depends only on
/// `(seed, counter)`.
///
/// Backed by ChaCha8 with random access through the block counter, so any draw
/// can be regenerated without replaying its predecessors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomStream {
    pub seed: u64,
    pub counter: u64,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, counter: 0 }
    }

    /// Child stream `index`, disjoint from its siblings for `2^40` draws.
    pub fn split(&self, index: u64) -> Self {
        Self {
            seed: self.seed,
            counter: self
                .counter
                .wrapping_add(index.wrapping_add(1).wrapping_mul(SPLIT_SPACING)),
        }
    }

    /// Uniform draw in `[0, 1)` at `counter + offset`.
    pub fn uniform_at(&self, offset: u64) -> f64 {
        let mut c = self.cursor_at(offset);
        c.next_f64()
    }

    /// Sequential reader starting at `counter`.
    pub fn cursor(&self) -> StreamCursor {
        self.cursor_at(0)
    }

    fn cursor_at(&self, offset: u64) -> StreamCursor {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        // Each draw consumes one u64, i.e. two 32-bit words.
        rng.set_word_pos(u128::from(self.counter.wrapping_add(offset)) * 2);
        StreamCursor { rng }
    }
}

/// Sequential reader over a [`RandomStream`].
#[derive(Clone, Debug)]
pub struct StreamCursor {
    rng: ChaCha8Rng,
}

impl StreamCursor {
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
