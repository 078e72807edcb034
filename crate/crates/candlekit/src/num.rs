//! Small numeric helpers shared across modules: joint standardization and
//! deterministic seeding.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Standardize `xs` in place to zero mean and unit variance (population
/// convention, divide by N). Returns `false` when the slice is degenerate
/// (all entries equal); the slice is then zeroed instead.
pub fn standardize_in_place(xs: &mut [f64]) -> bool {
    if xs.is_empty() {
        return false;
    }
    let first = xs[0];
    if xs.iter().all(|&x| x == first) {
        xs.iter_mut().for_each(|x| *x = 0.0);
        return false;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    xs.iter_mut().for_each(|x| *x = (*x - mean) / std);
    true
}

/// Population mean and variance in one pass.
pub fn mean_var_population(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

/// FNV-1a over a byte string; stable across platforms and runs.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Fold a list of seed components into a single 64-bit seed.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut state = 0x243f_6a88_85a3_08d3; // arbitrary fixed offset
    let mut out = 0;
    for &p in parts {
        state ^= p;
        out ^= splitmix64(&mut state);
    }
    out
}

/// Deterministic RNG keyed by a list of seed components.
pub fn rng_from(parts: &[u64]) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(mix_seed(parts))
}
