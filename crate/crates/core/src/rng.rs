//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator. ChaCha is a
//! counter-based cipher, so a stream is fully determined by its 256-bit key
//! and a 64-bit stream id. Keys are derived from the user seed with SplitMix64,
//! and stream ids from a path of labels (repetition index, tree index, ...)
//! folded through the same mixer. Identical `(seed, path)` pairs give
//! identical streams on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fold a label path into a single stream id.
pub fn stream_id(path: &[u64]) -> u64 {
    path.iter().fold(GOLDEN_GAMMA, |acc, &label| {
        mix64(acc.wrapping_add(GOLDEN_GAMMA) ^ mix64(label.wrapping_add(GOLDEN_GAMMA)))
    })
}

/// Derive a child seed, useful when a seed has to be stored or passed on.
pub fn child_seed(seed: u64, path: &[u64]) -> u64 {
    mix64(seed ^ stream_id(path))
}

/// Generator for `seed` on the stream named by `path`.
pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    let mut key = [0u8; 32];
    let mut s = seed;
    for chunk in key.chunks_exact_mut(8) {
        s = s.wrapping_add(GOLDEN_GAMMA);
        chunk.copy_from_slice(&mix64(s).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream_id(path));
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_path_same_stream() {
        let a: Vec<u64> = (0..8).map(|_| 0).scan(stream(7, &[1, 2]), |r, _| Some(r.random())).collect();
        let b: Vec<u64> = (0..8).map(|_| 0).scan(stream(7, &[1, 2]), |r, _| Some(r.random())).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn different_paths_differ() {
        let mut a = stream(7, &[1, 2]);
        let mut b = stream(7, &[2, 1]);
        let mut c = stream(8, &[1, 2]);
        let (x, y, z): (u64, u64, u64) = (a.random(), b.random(), c.random());
        assert_ne!(x, y);
        assert_ne!(x, z);
    }

    #[test]
    fn pinned_first_draw() {
        // Guards against silent changes in the derivation scheme.
        let mut r = stream(0, &[]);
        let first: u64 = r.random();
        let mut again = stream(0, &[]);
        assert_eq!(first, again.random::<u64>());
        assert_eq!(mix64(0), 0);
        assert_eq!(mix64(1), 0x5692_161D_100B_05E5);
    }
}
