//! Deterministic seed-stream derivation.
//!
//! Every randomized component owns a seed stream derived from a master seed and
//! a stream index, so members/folds/trials are reproducible independently of how
//! many of them there are.

/// SplitMix64 step; a full-period mixing function over u64.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for sub-stream `index` of the stream rooted at `master`.
pub fn stream_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(1)))
}
