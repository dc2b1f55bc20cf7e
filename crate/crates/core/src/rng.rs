//! Seeded randomness.
//!
//! Every randomized routine derives its generator from a 64-bit seed via
//! ChaCha8; parallel work is split into fixed-size blocks and block `b`
//! reads stream `b`, so results do not depend on the worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Name recorded in reports.
pub const GENERATOR_NAME: &str = "chacha8/seed_from_u64/stream=block";

/// Samples per parallel block.
pub const BLOCK: u64 = 4096;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for block `stream` of a computation seeded with `seed`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Splits `n` samples into `(block, len)` pieces of at most [`BLOCK`].
pub fn blocks(n: u64) -> Vec<(u64, u64)> {
    let mut out = vec![];
    let mut start = 0;
    let mut b = 0;
    while start < n {
        let len = BLOCK.min(n - start);
        out.push((b, len));
        start += len;
        b += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn streams_differ_and_repeat() {
        let a: u64 = stream(7, 0).gen();
        let b: u64 = stream(7, 1).gen();
        assert_ne!(a, b);
        assert_eq!(a, stream(7, 0).gen::<u64>());
    }

    #[test]
    fn blocks_cover() {
        let bl = blocks(10_000);
        assert_eq!(bl.iter().map(|b| b.1).sum::<u64>(), 10_000);
        assert_eq!(bl.len(), 3);
        assert!(blocks(0).is_empty());
    }
}
