// Copyright (c) The ConflictSync Authors
// SPDX-License-Identifier: Apache-2.0

//! Synthetic replica pairs with a chosen Jaccard similarity.

use std::collections::HashSet;

use rand::distr::{Alphanumeric, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lattice::{GSet, Item, Lattice};

pub const DEFAULT_CARDINALITY: usize = 100_000;
pub const DEFAULT_ITEM_LEN: (usize, usize) = (5, 80);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairSpec {
    /// Items per replica.
    pub cardinality: usize,
    pub similarity: f64,
    pub min_len: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl PairSpec {
    pub fn new(cardinality: usize, similarity: f64, seed: u64) -> Self {
        let (min_len, max_len) = DEFAULT_ITEM_LEN;
        PairSpec { cardinality, similarity, min_len, max_len, seed }
    }

    pub fn with_item_len(mut self, min_len: usize, max_len: usize) -> Self {
        self.min_len = min_len;
        self.max_len = max_len;
        self
    }

    pub fn shared(&self) -> usize {
        shared_count(self.cardinality, self.similarity)
    }

    pub fn unique(&self) -> usize {
        self.cardinality - self.shared()
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.similarity) {
            return Err(Error::InvalidParameter(format!("similarity must lie in [0, 1], got {}", self.similarity)));
        }
        if self.cardinality == 0 {
            return Err(Error::InvalidParameter("cardinality must be at least 1".into()));
        }
        if self.min_len == 0 || self.min_len > self.max_len || self.max_len > u32::MAX as usize {
            return Err(Error::InvalidParameter(format!("bad item length range {}..={}", self.min_len, self.max_len)));
        }
        let needed = (self.shared() + 2 * self.unique()) as f64;
        let available: f64 = (self.min_len..=self.max_len.min(self.min_len + 16)).map(|l| 62f64.powi(l as i32)).sum();
        if needed * 2.0 > available {
            return Err(Error::InvalidParameter(format!(
                "{needed} distinct items do not fit lengths {}..={}",
                self.min_len, self.max_len
            )));
        }
        Ok(())
    }
}

/// Items both replicas hold: round(2sc / (1 + s)).
pub fn shared_count(cardinality: usize, similarity: f64) -> usize {
    let exact = 2.0 * similarity * cardinality as f64 / (1.0 + similarity);
    (exact.round() as usize).min(cardinality)
}

/// Two replicas of `cardinality` items each, sharing [`shared_count`] of them.
/// Item lengths are uniform over the spec's range and every item is distinct.
pub fn generate_pair(spec: &PairSpec) -> Result<(GSet, GSet)> {
    spec.validate()?;
    let (shared, unique) = (spec.shared(), spec.unique());
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut seen: HashSet<Vec<u8>> = HashSet::with_capacity(shared + 2 * unique);
    let mut draw = |rng: &mut ChaCha8Rng| loop {
        let len = rng.random_range(spec.min_len..=spec.max_len);
        let bytes: Vec<u8> = Alphanumeric.sample_iter(&mut *rng).take(len).collect();
        if seen.insert(bytes.clone()) {
            return Item::from(bytes);
        }
    };
    let common: Vec<Item> = (0..shared).map(|_| draw(&mut rng)).collect();
    let only_a: Vec<Item> = (0..unique).map(|_| draw(&mut rng)).collect();
    let only_b: Vec<Item> = (0..unique).map(|_| draw(&mut rng)).collect();
    let a = common.iter().cloned().chain(only_a).collect();
    let b = common.into_iter().chain(only_b).collect();
    Ok((a, b))
}

/// Jaccard index over decompositions; two bottoms count as identical.
pub fn jaccard<S: Lattice>(a: &S, b: &S) -> f64 {
    let (small, large) = if a.decomposition_len() <= b.decomposition_len() { (a, b) } else { (b, a) };
    let inter = small.decompose().iter().filter(|d| large.contains(d)).count();
    let union = a.decomposition_len() + b.decomposition_len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shared_counts() {
        assert_eq!(shared_count(100_000, 0.0), 0);
        assert_eq!(shared_count(100_000, 1.0), 100_000);
        assert_eq!(shared_count(100_000, 0.95), 97_436);
        assert_eq!(shared_count(100_000, 0.5), 66_667);
    }

    #[test]
    fn generated_pair_has_requested_shape() {
        let spec = PairSpec::new(10_000, 0.5, 3);
        let (a, b) = generate_pair(&spec).unwrap();
        assert_eq!(a.len(), 10_000);
        assert_eq!(b.len(), 10_000);
        let shared = a.iter().filter(|i| b.contains_item(i)).count();
        assert_eq!(shared, spec.shared());
        assert!(a.iter().chain(b.iter()).all(|i| (5..=80).contains(&i.len())));
        assert!(a.iter().all(|i| i.as_bytes().iter().all(u8::is_ascii_alphanumeric)));
        assert!((jaccard(&a, &b) - 0.5).abs() < 2.0 / 10_000.0);
    }

    #[test]
    fn generation_is_seeded() {
        let spec = PairSpec::new(500, 0.3, 11);
        assert_eq!(generate_pair(&spec).unwrap(), generate_pair(&spec).unwrap());
        let other = PairSpec { seed: 12, ..spec };
        assert_ne!(generate_pair(&spec).unwrap(), generate_pair(&other).unwrap());
    }

    #[test]
    fn jaccard_examples() {
        let x: GSet = ["a", "b"].into_iter().collect();
        let y: GSet = ["c"].into_iter().collect();
        assert_eq!(jaccard(&x, &x), 1.0);
        assert_eq!(jaccard(&x, &y), 0.0);
        assert_eq!(jaccard(&GSet::new(), &GSet::new()), 1.0);
        let z: GSet = ["a", "c"].into_iter().collect();
        assert!((jaccard(&x, &z) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(generate_pair(&PairSpec::new(10, 1.5, 0)).is_err());
        assert!(generate_pair(&PairSpec::new(10, -0.1, 0)).is_err());
        assert!(generate_pair(&PairSpec::new(0, 0.5, 0)).is_err());
        assert!(generate_pair(&PairSpec::new(10, 0.5, 0).with_item_len(3, 2)).is_err());
        assert!(generate_pair(&PairSpec::new(1000, 0.0, 0).with_item_len(1, 1)).is_err());
    }

    #[test]
    fn mean_length_matches_range_midpoint() {
        let (a, _) = generate_pair(&PairSpec::new(100_000, 1.0, 5)).unwrap();
        let mean = a.payload_bytes() as f64 / a.len() as f64;
        assert!((mean - 42.5).abs() < 42.5 * 0.005, "mean {mean}");
    }
}
