//! Seed derivation.
//!
//! All randomness in the toolkit funnels through one master 64-bit seed.
//! Each randomized stage derives its own seed as
//! `splitmix64(master ^ fnv1a64(label))`, so stages are statistically
//! independent, stable across versions, and insensitive to the order in
//! which stages run.

/// FNV-1a 64-bit hash of a label.
fn fnv1a64(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// One round of the splitmix64 output function.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the seed for a named stage from the master seed.
pub fn stage_seed(master: u64, label: &str) -> u64 {
    splitmix64(master ^ fnv1a64(label))
}
