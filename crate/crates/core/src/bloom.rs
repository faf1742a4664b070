// Copyright (c) The ConflictSync Authors
// SPDX-License-Identifier: Apache-2.0

//! Classic Bloom filter over canonical decomposition bytes, used to split a
//! state into its definitely-exclusive and potentially-common parts.

use std::f64::consts::LN_2;

use crate::digest::{keyed_hash, mix64, BLOOM_SEED};
use crate::error::{Error, Result};
use crate::lattice::Lattice;

/// Bytes of the `m` (u64) and `k` (u32) header preceding the bit array.
pub const HEADER_BYTES: usize = 12;

const MIN_BITS: u64 = 8;

/// Seed of hash function `j`. Adjacent xxh3 seeds give correlated outputs on
/// short inputs, so the seeds are spread with a 64-bit finalizer.
#[inline]
fn hash_seed(j: u64) -> u64 {
    mix64(BLOOM_SEED.wrapping_add(j.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

#[derive(Clone, PartialEq, Eq)]
pub struct BloomFilter {
    words: Vec<u64>,
    num_bits: u64,
    num_hashes: u32,
}

impl std::fmt::Debug for BloomFilter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BloomFilter")
            .field("num_bits", &self.num_bits)
            .field("num_hashes", &self.num_hashes)
            .finish()
    }
}

/// Optimal `(m, k)` for `n` elements at false-positive rate `epsilon`:
/// `m = ⌈−n·ln ε / (ln 2)²⌉` (at least 8), `k = max(1, round(m/n · ln 2))`.
pub fn optimal_params(n: usize, epsilon: f64) -> Result<(u64, u32)> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "Bloom false-positive rate must lie in (0, 1), got {epsilon}"
        )));
    }
    if n == 0 {
        return Ok((MIN_BITS, 1));
    }
    let m = (-(n as f64) * epsilon.ln() / (LN_2 * LN_2)).ceil() as u64;
    let m = m.max(MIN_BITS);
    let k = ((m as f64 / n as f64) * LN_2).round().max(1.0) as u32;
    Ok((m, k))
}

impl BloomFilter {
    pub fn with_params(num_bits: u64, num_hashes: u32) -> Result<Self> {
        if num_bits == 0 || num_hashes == 0 {
            return Err(Error::InvalidParameter(format!(
                "Bloom filter needs m > 0 and k > 0, got m={num_bits} k={num_hashes}"
            )));
        }
        Ok(BloomFilter {
            words: vec![0; num_bits.div_ceil(64) as usize],
            num_bits,
            num_hashes,
        })
    }

    pub fn for_capacity(n: usize, epsilon: f64) -> Result<Self> {
        let (m, k) = optimal_params(n, epsilon)?;
        Self::with_params(m, k)
    }

    pub fn num_bits(&self) -> u64 {
        self.num_bits
    }

    pub fn num_hashes(&self) -> u32 {
        self.num_hashes
    }

    #[inline]
    fn positions<'a>(&self, bytes: &'a [u8]) -> impl Iterator<Item = u64> + 'a {
        let m = self.num_bits;
        (0..self.num_hashes as u64).map(move |j| keyed_hash(bytes, hash_seed(j)) % m)
    }

    pub fn insert_bytes(&mut self, bytes: &[u8]) {
        for p in self.positions(bytes).collect::<Vec<_>>() {
            self.words[(p / 64) as usize] |= 1 << (p % 64);
        }
    }

    pub fn contains_bytes(&self, bytes: &[u8]) -> bool {
        self.positions(bytes)
            .all(|p| self.words[(p / 64) as usize] & (1 << (p % 64)) != 0)
    }

    pub fn query<S: Lattice>(&self, d: &S::Irreducible) -> bool {
        self.contains_bytes(S::canonical_bytes(d))
    }

    /// Wire size: header plus `⌈m/8⌉` bytes of bits.
    pub fn wire_len(&self) -> usize {
        HEADER_BYTES + self.num_bits.div_ceil(8) as usize
    }

    /// Header (`m` as u64, `k` as u32, little-endian) followed by the bit
    /// array packed LSB-first.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.wire_len());
        out.extend_from_slice(&self.num_bits.to_le_bytes());
        out.extend_from_slice(&self.num_hashes.to_le_bytes());
        let body = self.num_bits.div_ceil(8) as usize;
        out.extend(self.words.iter().flat_map(|w| w.to_le_bytes()).take(body));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_BYTES {
            return Err(Error::Wire("truncated Bloom filter header".into()));
        }
        let num_bits = u64::from_le_bytes(bytes[0..8].try_into().unwrap());
        let num_hashes = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        let mut filter = Self::with_params(num_bits, num_hashes)
            .map_err(|e| Error::Wire(e.to_string()))?;
        let body = &bytes[HEADER_BYTES..];
        if body.len() != num_bits.div_ceil(8) as usize {
            return Err(Error::Wire(format!(
                "Bloom body is {} bytes, expected {}",
                body.len(),
                num_bits.div_ceil(8)
            )));
        }
        for (i, chunk) in body.chunks(8).enumerate() {
            let mut word = [0u8; 8];
            word[..chunk.len()].copy_from_slice(chunk);
            filter.words[i] = u64::from_le_bytes(word);
        }
        Ok(filter)
    }
}

/// Build a filter sized for `items` at false-positive rate `epsilon`.
pub fn build_filter<'a, S, I>(items: I, epsilon: f64) -> Result<BloomFilter>
where
    S: Lattice + 'a,
    I: IntoIterator<Item = &'a S::Irreducible>,
    I::IntoIter: ExactSizeIterator,
{
    let items = items.into_iter();
    let mut filter = BloomFilter::for_capacity(items.len(), epsilon)?;
    for d in items {
        filter.insert_bytes(S::canonical_bytes(d));
    }
    Ok(filter)
}

/// Split `x` into `(common, exclusive)`: the join of the decompositions the
/// filter reports present, and the join of those it definitely lacks.
pub fn partition<S: Lattice>(x: &S, filter: &BloomFilter) -> (S, S) {
    let (com, excl): (Vec<_>, Vec<_>) = x.decompose().into_iter().partition(|d| filter.query::<S>(d));
    (S::from_irreducibles(com), S::from_irreducibles(excl))
}
