//! Seeded randomness. Every randomized operation takes an explicit `u64`
//! seed and draws from ChaCha8, whose stream is identical on every platform.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed for `stream` from `master`.
///
/// For a fixed master the map `stream -> seed` is a bijection on `u64`, so
/// distinct streams never collide.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master.wrapping_add(stream.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// `rows x cols` matrix of i.i.d. standard normal entries, filled column by column.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng(seed);
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

/// `t` distinct indices from `0..n`, sorted ascending.
pub fn sample_indices(n: usize, t: usize, seed: u64) -> Vec<usize> {
    let mut idx = rand::seq::index::sample(&mut rng(seed), n, t).into_vec();
    idx.sort_unstable();
    idx
}
