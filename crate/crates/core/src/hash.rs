//! Stable 64-bit hashing primitives.
//!
//! All hashed features in this crate (token ids, n-gram buckets, context
//! features) go through these functions so that artifacts are reproducible
//! across platforms and releases. `std::hash` is deliberately avoided: its
//! output is not guaranteed stable.

/// FNV-1a 64-bit offset basis.
pub const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
/// FNV-1a 64-bit prime.
pub const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a hash of a byte slice.
#[inline]
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Continue an FNV-1a hash with more bytes.
#[inline]
pub fn fnv1a64_extend(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// SplitMix64 finalizer; used to decorrelate seeds and hash outputs.
#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a base seed and a stream index.
///
/// Used wherever one user-facing seed has to drive several independent
/// random streams (per-document decisions, per-replicate training runs).
#[inline]
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(base ^ splitmix64(stream))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv1a_matches_reference_vectors() {
        // Reference values for the 64-bit FNV-1a test vectors.
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn fnv1a_extend_is_concatenation() {
        let whole = fnv1a64(b"hello world");
        let part = fnv1a64_extend(fnv1a64(b"hello "), b"world");
        assert_eq!(whole, part);
    }

    #[test]
    fn splitmix_is_deterministic_and_spreads_bits() {
        assert_eq!(splitmix64(0), splitmix64(0));
        // Consecutive inputs should map far apart.
        let a = splitmix64(1);
        let b = splitmix64(2);
        assert_ne!(a, b);
        assert!((a ^ b).count_ones() > 8);
    }

    #[test]
    fn derive_seed_separates_streams() {
        let s0 = derive_seed(42, 0);
        let s1 = derive_seed(42, 1);
        let t0 = derive_seed(43, 0);
        assert_ne!(s0, s1);
        assert_ne!(s0, t0);
    }
}
