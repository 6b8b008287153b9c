use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream reserved for drawing a fixed design shared by all replicates.
pub(crate) const DESIGN_STREAM: u64 = u64::MAX;

/// ChaCha8 keyed by `seed`, positioned on an independent `stream`.
///
/// ChaCha is counter based: the output for (seed, stream, word position) is
/// a pure function of those three values, so replicate `i` always sees the
/// same numbers no matter which thread runs it or in what order.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finaliser, used to derive per-study seeds.
pub(crate) fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
