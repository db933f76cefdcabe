//! Crate-internal numeric and RNG helpers.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Pairwise (cascade) summation; error grows like O(log n) rather than O(n).
pub(crate) fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 32 {
        return x.iter().sum();
    }
    let mid = x.len() / 2;
    pairwise_sum(&x[..mid]) + pairwise_sum(&x[mid..])
}

/// Sample mean and standard error (sample stdev over sqrt(n)).
pub(crate) fn mean_and_se(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = pairwise_sum(x) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = x.iter().map(|&v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Deterministic per-block generator: the key mixes the master seed with a
/// purpose tag, the ChaCha stream id is the block index. Parallel workers
/// reproduce identical draws for a given `(seed, purpose, block)` no matter
/// how blocks are scheduled.
pub(crate) fn block_rng(seed: u64, purpose: u64, block: u64) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&purpose.to_le_bytes());
    let mut rng = ChaCha12Rng::from_seed(key);
    rng.set_stream(block);
    rng
}

/// FNV-1a over raw f64 bit patterns, for draw-log fingerprints.
pub(crate) fn fnv1a_f64(acc: u64, x: f64) -> u64 {
    let mut h = acc;
    for byte in x.to_bits().to_le_bytes() {
        h ^= byte as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

pub(crate) const FNV_OFFSET: u64 = 0xcbf29ce484222325;
