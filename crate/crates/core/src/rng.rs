//! Seed splitting.
//!
//! Every parallel computation in the crate derives its random streams from a
//! master seed with [`stream`]: the ChaCha8 key comes from the seed and the
//! stream index selects an independent keystream. Work is always cut into a
//! fixed number of chunks ([`CHUNKS`]) before being handed to the thread pool,
//! so results do not depend on how many workers run them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Number of chunks Monte Carlo loops are split into.
pub const CHUNKS: usize = 64;

/// Independent stream `index` of master `seed`.
pub fn stream(seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Stream for a two-level index, e.g. (grid position, replicate).
pub fn stream2(seed: u64, a: u64, b: u64) -> Stream {
    stream(seed, (a << 32) ^ b)
}

/// Split `n` items into [`CHUNKS`] nearly equal contiguous counts.
pub fn chunk_sizes(n: usize) -> Vec<usize> {
    let base = n / CHUNKS;
    let extra = n % CHUNKS;
    (0..CHUNKS).map(|i| base + usize::from(i < extra)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_differ_and_repeat() {
        let a: u64 = stream(7, 0).random();
        let b: u64 = stream(7, 1).random();
        let a2: u64 = stream(7, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, a2);
    }

    #[test]
    fn chunks_cover() {
        for n in [0, 1, 63, 64, 65, 1_000_003] {
            let c = chunk_sizes(n);
            assert_eq!(c.len(), CHUNKS);
            assert_eq!(c.iter().sum::<usize>(), n);
        }
    }
}
