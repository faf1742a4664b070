// Copyright (c) The ConflictSync Authors
// SPDX-License-Identifier: Apache-2.0

//! Join-semilattice contract and the grow-only set instance.
//!
//! Synchronization never looks inside a state: it only needs to split a state
//! into its irredundant join decomposition, test whether a join-irreducible
//! piece is already dominated by a state, and join pieces back in. Anything
//! implementing [`Lattice`] can therefore be reconciled by the protocols in
//! [`crate::protocol`].

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

/// A join-semilattice whose states have a unique irredundant join
/// decomposition into join-irreducible states.
///
/// Laws expected of implementors:
/// - `join` is associative, commutative and idempotent, with `bottom()` as
///   its neutral element;
/// - `a.leq(b)` holds iff `a.join(b) == b`;
/// - joining every element of `decompose()` gives back the state, and
///   dropping any one of them does not.
pub trait Lattice: Clone + PartialEq + fmt::Debug {
    /// A join-irreducible state, kept in a compact form.
    type Irreducible: Clone + Eq + Ord + std::hash::Hash + fmt::Debug;

    fn bottom() -> Self;

    fn join_assign(&mut self, other: &Self);

    fn join(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.join_assign(other);
        out
    }

    fn leq(&self, other: &Self) -> bool;

    fn decompose(&self) -> Vec<Self::Irreducible>;

    /// Number of elements in the irredundant join decomposition.
    fn decomposition_len(&self) -> usize {
        self.decompose().len()
    }

    /// `d ⊑ self`.
    fn contains(&self, d: &Self::Irreducible) -> bool;

    /// Join a single irreducible into the state.
    fn insert(&mut self, d: Self::Irreducible);

    /// Deterministic serialization of an irreducible. Equal irreducibles
    /// always serialize to equal bytes.
    fn canonical_bytes(d: &Self::Irreducible) -> &[u8];

    /// Inverse of [`Lattice::canonical_bytes`].
    fn irreducible_from_bytes(bytes: &[u8]) -> Option<Self::Irreducible>;

    fn from_irreducibles<I: IntoIterator<Item = Self::Irreducible>>(items: I) -> Self {
        let mut s = Self::bottom();
        for d in items {
            s.insert(d);
        }
        s
    }

    fn is_bottom(&self) -> bool {
        self.decomposition_len() == 0
    }

    /// Sum of the canonical byte lengths of the decomposition.
    fn payload_len(&self) -> usize {
        self.decompose().iter().map(|d| Self::canonical_bytes(d).len()).sum()
    }
}

/// The minimal delta: the join of every irreducible of `a` not dominated by
/// `b`. It is the smallest state with `delta(a, b) ⊔ b = a ⊔ b`.
pub fn delta<S: Lattice>(a: &S, b: &S) -> S {
    S::from_irreducibles(a.decompose().into_iter().filter(|y| !b.contains(y)))
}

/// A single grow-only set element; also the singleton GSet state `{e}`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Item(Arc<[u8]>);

impl Item {
    pub fn new(bytes: impl AsRef<[u8]>) -> Self {
        Item(Arc::from(bytes.as_ref()))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match std::str::from_utf8(&self.0) {
            Ok(s) => write!(f, "{s:?}"),
            Err(_) => write!(f, "{:02x?}", &self.0[..]),
        }
    }
}

impl From<&str> for Item {
    fn from(s: &str) -> Self {
        Item::new(s.as_bytes())
    }
}

impl From<&[u8]> for Item {
    fn from(s: &[u8]) -> Self {
        Item::new(s)
    }
}

impl From<Vec<u8>> for Item {
    fn from(v: Vec<u8>) -> Self {
        Item(Arc::from(v))
    }
}

/// State-based grow-only set: `⊥ = ∅`, `s ⊔ s' = s ∪ s'`.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct GSet {
    items: BTreeSet<Item>,
}

impl GSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, item: impl Into<Item>) {
        self.items.insert(item.into());
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Item> + '_ {
        self.items.iter()
    }

    pub fn contains_item(&self, item: &Item) -> bool {
        self.items.contains(item)
    }

    /// Sum of raw item lengths: the wire payload of this state.
    pub fn payload_bytes(&self) -> usize {
        self.items.iter().map(Item::len).sum()
    }
}

impl fmt::Debug for GSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.items.iter()).finish()
    }
}

impl<T: Into<Item>> FromIterator<T> for GSet {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        GSet {
            items: iter.into_iter().map(Into::into).collect(),
        }
    }
}

impl Lattice for GSet {
    type Irreducible = Item;

    fn bottom() -> Self {
        GSet::default()
    }

    fn join_assign(&mut self, other: &Self) {
        if self.items.is_empty() {
            self.items = other.items.clone();
            return;
        }
        self.items.extend(other.items.iter().cloned());
    }

    fn leq(&self, other: &Self) -> bool {
        self.items.is_subset(&other.items)
    }

    fn decompose(&self) -> Vec<Item> {
        self.items.iter().cloned().collect()
    }

    fn decomposition_len(&self) -> usize {
        self.items.len()
    }

    fn contains(&self, d: &Item) -> bool {
        self.items.contains(d)
    }

    fn insert(&mut self, d: Item) {
        self.items.insert(d);
    }

    fn canonical_bytes(d: &Item) -> &[u8] {
        d.as_bytes()
    }

    fn irreducible_from_bytes(bytes: &[u8]) -> Option<Item> {
        Some(Item::new(bytes))
    }

    fn from_irreducibles<I: IntoIterator<Item = Item>>(items: I) -> Self {
        GSet {
            items: items.into_iter().collect(),
        }
    }

    fn is_bottom(&self) -> bool {
        self.items.is_empty()
    }

    fn payload_len(&self) -> usize {
        self.payload_bytes()
    }
}
