// Copyright (c) The ConflictSync Authors
// SPDX-License-Identifier: Apache-2.0

//! 64-bit digests of decompositions and the keyed hash family behind Bloom
//! filters, bucket digests and coded-symbol checksums.

use std::fmt;

use xxhash_rust::xxh3::xxh3_64_with_seed;

use crate::lattice::Lattice;

/// Seed of the checksum hash stored in `hashSum` of coded symbols.
pub const CHECK_SEED: u64 = 0x9e37_79b9_7f4a_7c15;
/// Seed for hashing the concatenated member digests of a bucket.
pub const BUCKET_SEED: u64 = 0xc2b2_ae3d_27d4_eb4f;
/// Seed for turning (bucket index, bucket digest) into a reconcilable element.
pub const ELEM_SEED: u64 = 0x1656_67b1_9e37_79f9;
/// Base seed of the Bloom filter hash family.
pub const BLOOM_SEED: u64 = 0x27d4_eb2f_1656_67c5;

/// Digest width on the wire, in bytes.
pub const DIGEST_BYTES: usize = 8;

/// Seeded 64-bit hash. Distinct seeds behave as independent functions.
#[inline]
pub fn keyed_hash(bytes: &[u8], seed: u64) -> u64 {
    xxh3_64_with_seed(bytes, seed)
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Fixed-size stand-in for a variable-sized decomposition.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest64(pub u64);

impl Digest64 {
    pub fn to_le_bytes(self) -> [u8; 8] {
        self.0.to_le_bytes()
    }

    /// Checksum used to recognise pure coded-symbol cells.
    #[inline]
    pub fn check_hash(self) -> u64 {
        keyed_hash(&self.0.to_le_bytes(), CHECK_SEED)
    }
}

impl fmt::Debug for Digest64 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest64({:016x})", self.0)
    }
}

impl From<u64> for Digest64 {
    fn from(v: u64) -> Self {
        Digest64(v)
    }
}

/// Hashes decompositions under one session-wide seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Digester {
    seed: u64,
    key: u64,
}

impl Digester {
    pub fn new(seed: u64) -> Self {
        // small user seeds must not land next to the fixed seeds above
        Digester { seed, key: mix64(seed ^ 0x6a09_e667_f3bc_c909) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn digest_bytes(&self, bytes: &[u8]) -> Digest64 {
        Digest64(keyed_hash(bytes, self.key))
    }

    pub fn digest<S: Lattice>(&self, d: &S::Irreducible) -> Digest64 {
        self.digest_bytes(S::canonical_bytes(d))
    }
}

impl Default for Digester {
    fn default() -> Self {
        Digester::new(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{GSet, Item};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    #[test]
    fn equal_decompositions_equal_digests() {
        let dg = Digester::new(42);
        let a = Item::from("some item");
        let b = Item::new(b"some item");
        assert_eq!(dg.digest::<GSet>(&a), dg.digest::<GSet>(&b));
        assert_eq!(keyed_hash(b"x", 9), keyed_hash(b"x", 9));
        assert_ne!(Digester::new(1).digest::<GSet>(&a), Digester::new(2).digest::<GSet>(&a));
    }

    #[test]
    fn digest_depends_on_bytes_only() {
        let dg = Digester::new(7);
        let s1: GSet = ["a", "b", "c"].into_iter().collect();
        let s2: GSet = ["c", "a", "b", "zz"].into_iter().collect();
        let h1: HashSet<_> = s1.decompose().iter().map(|d| dg.digest::<GSet>(d)).collect();
        let h2: HashSet<_> = s2.decompose().iter().map(|d| dg.digest::<GSet>(d)).collect();
        assert!(h1.is_subset(&h2));
    }

    #[test]
    fn no_collisions_in_a_million_items() {
        // Birthday bound: 10^12 / 2^65 ≈ 2.7e-8.
        let dg = Digester::new(0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen = HashSet::with_capacity(1_000_000);
        let mut buf = [0u8; 24];
        for _ in 0..1_000_000 {
            rng.fill(&mut buf[..]);
            assert!(seen.insert(dg.digest_bytes(&buf)));
        }
    }

    #[test]
    fn keyed_hash_chi_square_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut counts = [0u64; 256];
        let n = 100_000u64;
        for _ in 0..n {
            // Long enough that the input space dwarfs the sample count.
            let len = rng.random_range(8..40);
            let bytes: Vec<u8> = (0..len).map(|_| rng.random()).collect();
            counts[(keyed_hash(&bytes, 5) >> 56) as usize] += 1;
        }
        let expected = n as f64 / 256.0;
        let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // Upper 0.1% point of chi-square with 255 degrees of freedom.
        const CRITICAL: f64 = 330.52;
        assert!(stat < CRITICAL, "chi-square statistic {stat}");
    }

    #[test]
    fn distinct_seeds_uncorrelated() {
        let n = 100_000;
        let (mut sx, mut sy, mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..n as u64 {
            let b = i.to_le_bytes();
            let x = (keyed_hash(&b, 11) >> 11) as f64 / (1u64 << 53) as f64;
            let y = (keyed_hash(&b, 12) >> 11) as f64 / (1u64 << 53) as f64;
            sx += x;
            sy += y;
            sxy += x * y;
            sxx += x * x;
            syy += y * y;
        }
        let nf = n as f64;
        let cov = sxy / nf - (sx / nf) * (sy / nf);
        let r = cov / ((sxx / nf - (sx / nf).powi(2)) * (syy / nf - (sy / nf).powi(2))).sqrt();
        // 5 standard errors of a null correlation at n = 10^5.
        assert!(r.abs() < 5.0 / nf.sqrt(), "r = {r}");
    }
}
