//! Counter-based random streams for replications.
//!
//! A stream is a ChaCha8 keystream whose key is derived from the master seed
//! and whose 64-bit stream id packs `(cell, replication)`. Distinct
//! `(cell, rep)` pairs therefore never share keystream blocks, and a
//! replication's draws do not depend on which worker runs it.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Owned random stream for one replication.
#[derive(Debug, Clone)]
pub struct RngStream(ChaCha8Rng);

impl RngStream {
    /// Stream keyed by `(master_seed, cell, rep)`. `cell` must fit in 24 bits
    /// and `rep` in 40 bits.
    pub fn new(master_seed: u64, cell: u64, rep: u64) -> Self {
        assert!(cell < (1 << 24), "cell id {cell} exceeds 24 bits");
        assert!(rep < (1 << 40), "replication index {rep} exceeds 40 bits");
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream((cell << 40) | rep);
        RngStream(rng)
    }

    /// Plain seeded stream, for one-off use outside a replication grid.
    pub fn from_seed(seed: u64) -> Self {
        RngStream(ChaCha8Rng::seed_from_u64(seed))
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}
