// Copyright (c) The ConflictSync Authors
// SPDX-License-Identifier: Apache-2.0

//! Hash partitioning of decompositions into buckets with order-independent
//! bucket digests.
//!
//! A decomposition with digest `h` lives in bucket `h mod B`. Each bucket is
//! summarized by hashing the concatenation of its members' digests in sorted
//! order, so two replicas holding the same bucket content always agree on
//! the bucket digest regardless of insertion order. Empty buckets carry the
//! digest of the empty concatenation.

use crate::digest::{keyed_hash, Digest64, Digester, BUCKET_SEED, DIGEST_BYTES, ELEM_SEED};
use crate::error::{Error, Result};
use crate::lattice::Lattice;

/// Largest bucket count whose indices fit in the top half of a reconcilable
/// element.
pub const MAX_BUCKETS: usize = 1 << 32;

/// `max(1, ⌊n · load_factor⌋)`.
pub fn bucket_count(n: usize, load_factor: f64) -> Result<usize> {
    if load_factor.is_nan() || load_factor <= 0.0 || !load_factor.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "load factor must be positive and finite, got {load_factor}"
        )));
    }
    Ok(((n as f64 * load_factor).floor() as usize).max(1))
}

/// Bucket index encoded in the top 32 bits of a digest element.
pub fn element_index(element: Digest64) -> u64 {
    element.0 >> 32
}

pub struct BucketTable<S: Lattice> {
    buckets: Vec<Vec<(Digest64, S::Irreducible)>>,
    digests: Vec<Digest64>,
}

impl<S: Lattice> std::fmt::Debug for BucketTable<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BucketTable").field("buckets", &self.buckets.len()).finish()
    }
}

impl<S: Lattice> BucketTable<S> {
    pub fn build(x: &S, digester: &Digester, count: usize) -> Result<Self> {
        let entries = x.decompose().into_iter().map(|d| (digester.digest::<S>(&d), d));
        Self::from_digested(entries, count)
    }

    /// Build from decompositions whose digests are already known.
    pub fn from_digested<I>(entries: I, count: usize) -> Result<Self>
    where
        I: IntoIterator<Item = (Digest64, S::Irreducible)>,
    {
        if count == 0 {
            return Err(Error::InvalidParameter("bucket count must be at least 1".into()));
        }
        let mut buckets: Vec<Vec<(Digest64, S::Irreducible)>> = vec![Vec::new(); count];
        for (h, d) in entries {
            buckets[(h.0 % count as u64) as usize].push((h, d));
        }
        let mut scratch = Vec::new();
        let digests = buckets
            .iter_mut()
            .map(|b| {
                b.sort_unstable();
                scratch.clear();
                scratch.extend(b.iter().flat_map(|(h, _)| h.to_le_bytes()));
                Digest64(keyed_hash(&scratch, BUCKET_SEED))
            })
            .collect();
        Ok(BucketTable { buckets, digests })
    }

    pub fn len(&self) -> usize {
        self.buckets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    pub fn digests(&self) -> &[Digest64] {
        &self.digests
    }

    pub fn bucket(&self, index: usize) -> &[(Digest64, S::Irreducible)] {
        &self.buckets[index]
    }

    /// Total number of decompositions across all buckets.
    pub fn population(&self) -> usize {
        self.buckets.iter().map(Vec::len).sum()
    }

    /// Indices whose digest differs from `remote`, which must have the same length.
    pub fn differing(&self, remote: &[Digest64]) -> Result<Vec<u64>> {
        if remote.len() != self.digests.len() {
            return Err(Error::InvalidParameter(format!(
                "digest vector has {} buckets, local table has {}",
                remote.len(),
                self.digests.len()
            )));
        }
        Ok(self
            .digests
            .iter()
            .zip(remote)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, _)| i as u64)
            .collect())
    }

    /// Join of the given buckets' contents.
    pub fn contents(&self, indices: &[u64]) -> Result<S> {
        let mut out = Vec::new();
        for &i in indices {
            let bucket = self.buckets.get(i as usize).ok_or_else(|| {
                Error::InvalidParameter(format!("bucket {i} out of range ({})", self.buckets.len()))
            })?;
            out.extend(bucket.iter().map(|(_, d)| d.clone()));
        }
        Ok(S::from_irreducibles(out))
    }

    /// Join of the decompositions in the given buckets that `remote` lacks.
    pub fn delta_over(&self, indices: &[u64], remote: &S) -> Result<S> {
        let mut out = Vec::new();
        for &i in indices {
            let bucket = self.buckets.get(i as usize).ok_or_else(|| {
                Error::InvalidParameter(format!("bucket {i} out of range ({})", self.buckets.len()))
            })?;
            out.extend(bucket.iter().filter(|(_, d)| !remote.contains(d)).map(|(_, d)| d.clone()));
        }
        Ok(S::from_irreducibles(out))
    }

    /// One element per bucket, empty buckets included: the bucket index in
    /// the top 32 bits and a truncated hash of (index, bucket digest) below.
    pub fn digest_elements(&self) -> Result<Vec<Digest64>> {
        if self.buckets.len() > MAX_BUCKETS {
            return Err(Error::InvalidParameter(format!(
                "{} buckets cannot be indexed in 32 bits",
                self.buckets.len()
            )));
        }
        Ok(self
            .digests
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let mut buf = [0u8; 2 * DIGEST_BYTES];
                buf[..8].copy_from_slice(&(i as u64).to_le_bytes());
                buf[8..].copy_from_slice(&d.to_le_bytes());
                let low = keyed_hash(&buf, ELEM_SEED) & 0xffff_ffff;
                Digest64(((i as u64) << 32) | low)
            })
            .collect())
    }
}
