//! Seed derivation so every random draw in a campaign traces back to one
//! master seed.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream seed from a parent seed, a purpose tag and
/// an index.
pub fn derive(parent: u64, tag: &str, index: u64) -> u64 {
    let mut h = mix(parent);
    for b in tag.bytes() {
        h = mix(h ^ u64::from(b));
    }
    mix(h ^ index.wrapping_mul(GOLDEN))
}
