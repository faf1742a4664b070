// Copyright (c) The ConflictSync Authors
// SPDX-License-Identifier: Apache-2.0

//! Rateless invertible Bloom lookup tables over 64-bit digests.
//!
//! Every digest maps to an unbounded, increasing sequence of symbol indices
//! that always starts at 0 and thins out with density ≈ 2/(i+2). A
//! [`SymbolStream`] emits the coded symbols of a digest set one index at a
//! time; because each digest's mapping is a pure function of the digest, the
//! symbol at index `i` never depends on how far the stream has been driven.
//!
//! The receiving side subtracts the remote stream from its own, cell by
//! cell, and feeds the result to a [`DifferenceDecoder`], which peels pure
//! cells as they appear. Decoding is complete once every received cell has
//! been peeled back to zero.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::digest::{mix64, Digest64};
use crate::error::{Error, Result};

/// Wire size of one coded symbol: three little-endian 64-bit words.
pub const SYMBOL_BYTES: usize = 24;

/// One IBLT cell: XOR of member digests, XOR of their check hashes, and a
/// signed member count.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct CodedSymbol {
    pub id_sum: u64,
    pub hash_sum: u64,
    pub count: i64,
}

impl CodedSymbol {
    pub const ZERO: CodedSymbol = CodedSymbol { id_sum: 0, hash_sum: 0, count: 0 };

    #[inline]
    fn apply(&mut self, digest: Digest64, check: u64, direction: i64) {
        self.id_sum ^= digest.0;
        self.hash_sum ^= check;
        self.count += direction;
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::ZERO
    }

    /// `Some(±1)` when the cell holds exactly one digest whose check hash
    /// matches.
    pub fn pure_sign(&self) -> Option<i64> {
        if (self.count == 1 || self.count == -1) && Digest64(self.id_sum).check_hash() == self.hash_sum {
            Some(self.count)
        } else {
            None
        }
    }

    pub fn to_bytes(&self) -> [u8; SYMBOL_BYTES] {
        let mut out = [0u8; SYMBOL_BYTES];
        out[0..8].copy_from_slice(&self.id_sum.to_le_bytes());
        out[8..16].copy_from_slice(&self.hash_sum.to_le_bytes());
        out[16..24].copy_from_slice(&self.count.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != SYMBOL_BYTES {
            return Err(Error::Wire(format!("coded symbol is {} bytes, expected 24", bytes.len())));
        }
        Ok(CodedSymbol {
            id_sum: u64::from_le_bytes(bytes[0..8].try_into().unwrap()),
            hash_sum: u64::from_le_bytes(bytes[8..16].try_into().unwrap()),
            count: i64::from_le_bytes(bytes[16..24].try_into().unwrap()),
        })
    }
}

/// Cell-wise difference of two symbols at the same index: sums are XORed and
/// counts subtracted, so members common to both sides cancel.
pub fn combine(a: CodedSymbol, b: CodedSymbol) -> CodedSymbol {
    CodedSymbol {
        id_sum: a.id_sum ^ b.id_sum,
        hash_sum: a.hash_sum ^ b.hash_sum,
        count: a.count - b.count,
    }
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    mix64(*state)
}

/// The symbol indices a digest participates in: 0, then gaps drawn so that
/// the chance of landing on index `i` is about 2/(i+2).
#[derive(Clone, Debug)]
pub struct IndexMapping {
    prng: u64,
    current: Option<u64>,
}

impl IndexMapping {
    pub fn new(digest: Digest64) -> Self {
        IndexMapping { prng: digest.0, current: None }
    }

    fn advance(&mut self) -> u64 {
        let Some(last) = self.current else {
            self.current = Some(0);
            return 0;
        };
        // u uniform in (0, 1]
        let u = ((splitmix64(&mut self.prng) >> 32) + 1) as f64 / (1u64 << 32) as f64;
        let gap = ((last as f64 + 1.5) * (1.0 / u.sqrt() - 1.0)).ceil();
        let gap = if gap >= u64::MAX as f64 { u64::MAX } else { (gap as u64).max(1) };
        let next = last.saturating_add(gap);
        self.current = Some(next);
        next
    }
}

impl Iterator for IndexMapping {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        Some(self.advance())
    }
}

pub fn mapping_indices(digest: Digest64) -> IndexMapping {
    IndexMapping::new(digest)
}

/// Symbol `index` of `set`, computed directly from each digest's mapping.
pub fn generate_coded_symbol(set: &[Digest64], index: u64) -> CodedSymbol {
    let mut sym = CodedSymbol::ZERO;
    for &d in set {
        if mapping_indices(d).take_while(|&i| i <= index).any(|i| i == index) {
            sym.apply(d, d.check_hash(), 1);
        }
    }
    sym
}

#[derive(Clone, Debug)]
struct Member {
    digest: Digest64,
    check: u64,
    mapping: IndexMapping,
}

const NIL: u32 = u32::MAX;

/// Calendar queue of (next index, member) pairs, shared by the encoder and
/// by the decoder's bookkeeping for recovered digests. Indices inside the
/// calendar are chained through `next`; far-future ones wait in a heap until
/// the calendar grows past them.
#[derive(Clone, Debug, Default)]
struct Schedule {
    heads: Vec<u32>,
    next: Vec<u32>,
    far: BinaryHeap<Reverse<(u64, u32)>>,
}

impl Schedule {
    fn push(&mut self, index: u64, member: usize) {
        let member = u32::try_from(member).expect("schedule holds fewer than 2^32 members");
        if self.next.len() <= member as usize {
            self.next.resize(member as usize + 1, NIL);
        }
        self.link(index, member);
    }

    fn link(&mut self, index: u64, member: u32) {
        if index < self.heads.len() as u64 {
            self.next[member as usize] = self.heads[index as usize];
            self.heads[index as usize] = member;
        } else {
            self.far.push(Reverse((index, member)));
        }
    }

    fn grow_past(&mut self, index: u64) {
        if index < (self.heads.len() / 2) as u64 {
            return;
        }
        let len = usize::try_from(4 * index + 4096).expect("symbol index fits in memory");
        self.heads.resize(len, NIL);
        while let Some(&Reverse((i, m))) = self.far.peek() {
            if i >= len as u64 {
                break;
            }
            self.far.pop();
            self.link(i, m);
        }
    }

    /// Call `f` on every member scheduled at `index`, which must not be
    /// below any earlier drained index. `f` returns the member's next index.
    fn drain_at(&mut self, index: u64, mut f: impl FnMut(usize) -> u64) {
        self.grow_past(index);
        let mut m = std::mem::replace(&mut self.heads[index as usize], NIL);
        while m != NIL {
            let following = self.next[m as usize];
            let to = f(m as usize);
            debug_assert!(to > index);
            self.link(to, m);
            m = following;
        }
    }
}

/// The unbounded coded-symbol sequence of a digest set.
#[derive(Clone, Debug)]
pub struct SymbolStream {
    members: Vec<Member>,
    schedule: Schedule,
    next_index: u64,
}

impl SymbolStream {
    pub fn new<I: IntoIterator<Item = Digest64>>(digests: I) -> Self {
        let mut digests: Vec<Digest64> = digests.into_iter().collect();
        digests.sort_unstable();
        digests.dedup();
        let mut schedule = Schedule::default();
        let members = digests
            .into_iter()
            .enumerate()
            .map(|(slot, digest)| {
                let mut mapping = IndexMapping::new(digest);
                schedule.push(mapping.advance(), slot);
                Member { digest, check: digest.check_hash(), mapping }
            })
            .collect();
        SymbolStream { members, schedule, next_index: 0 }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Index of the symbol the next call to [`SymbolStream::next_symbol`] returns.
    pub fn next_index(&self) -> u64 {
        self.next_index
    }

    pub fn next_symbol(&mut self) -> CodedSymbol {
        let index = self.next_index;
        let mut sym = CodedSymbol::ZERO;
        let members = &mut self.members;
        self.schedule.drain_at(index, |slot| {
            let m = &mut members[slot];
            sym.apply(m.digest, m.check, 1);
            m.mapping.advance()
        });
        self.next_index += 1;
        sym
    }
}

/// Outcome of a decode attempt.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DecodeStatus {
    NeedMore,
    /// `remote_only` holds digests present only in the subtracted (remote)
    /// stream; `local_only` those present only in the local one.
    Done { remote_only: Vec<Digest64>, local_only: Vec<Digest64> },
}

impl DecodeStatus {
    pub fn is_done(&self) -> bool {
        matches!(self, DecodeStatus::Done { .. })
    }
}

#[derive(Clone, Debug)]
struct Recovered {
    member: Member,
    sign: i64,
}

/// Peeling decoder over a prefix of combined (local ⊖ remote) symbols.
#[derive(Clone, Debug, Default)]
pub struct DifferenceDecoder {
    cells: Vec<CodedSymbol>,
    nonzero: usize,
    recovered: Vec<Recovered>,
    schedule: Schedule,
    pending: Vec<usize>,
    local_only: Vec<Digest64>,
    remote_only: Vec<Digest64>,
}

impl DifferenceDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn symbols_received(&self) -> usize {
        self.cells.len()
    }

    pub fn is_done(&self) -> bool {
        !self.cells.is_empty() && self.nonzero == 0
    }

    pub fn local_only(&self) -> &[Digest64] {
        &self.local_only
    }

    pub fn remote_only(&self) -> &[Digest64] {
        &self.remote_only
    }

    /// Append the combined symbol for the next index and peel whatever
    /// becomes decodable.
    pub fn push(&mut self, mut combined: CodedSymbol) {
        let index = self.cells.len() as u64;
        let recovered = &mut self.recovered;
        self.schedule.drain_at(index, |slot| {
            let r = &mut recovered[slot];
            combined.apply(r.member.digest, r.member.check, -r.sign);
            r.member.mapping.advance()
        });
        if !combined.is_zero() {
            self.nonzero += 1;
        }
        self.cells.push(combined);
        self.pending.push(index as usize);
        self.peel();
    }

    fn peel(&mut self) {
        while let Some(j) = self.pending.pop() {
            let cell = self.cells[j];
            let Some(sign) = cell.pure_sign() else { continue };
            let digest = Digest64(cell.id_sum);
            if sign > 0 {
                self.local_only.push(digest);
            } else {
                self.remote_only.push(digest);
            }
            let mut member = Member { digest, check: cell.hash_sum, mapping: IndexMapping::new(digest) };
            let received = self.cells.len() as u64;
            loop {
                let idx = member.mapping.advance();
                if idx >= received {
                    let slot = self.recovered.len();
                    self.recovered.push(Recovered { member, sign });
                    self.schedule.push(idx, slot);
                    break;
                }
                let c = &mut self.cells[idx as usize];
                let was_zero = c.is_zero();
                c.apply(digest, member.check, -sign);
                match (was_zero, c.is_zero()) {
                    (true, false) => self.nonzero += 1,
                    (false, true) => self.nonzero -= 1,
                    _ => {}
                }
                if c.pure_sign().is_some() {
                    self.pending.push(idx as usize);
                }
            }
        }
    }

    pub fn try_decode(&self) -> DecodeStatus {
        if self.is_done() {
            DecodeStatus::Done {
                remote_only: self.remote_only.clone(),
                local_only: self.local_only.clone(),
            }
        } else {
            DecodeStatus::NeedMore
        }
    }
}

/// Receiving end of a rateless session: owns the local stream and decodes
/// remote symbols against it.
#[derive(Clone, Debug)]
pub struct Reconciler {
    local: SymbolStream,
    decoder: DifferenceDecoder,
}

impl Reconciler {
    pub fn new<I: IntoIterator<Item = Digest64>>(local: I) -> Self {
        Reconciler { local: SymbolStream::new(local), decoder: DifferenceDecoder::new() }
    }

    /// Feed the remote symbol at `index`, which must be the next expected one.
    pub fn receive(&mut self, index: u64, remote: CodedSymbol) -> Result<DecodeStatus> {
        if index != self.local.next_index() {
            return Err(Error::Wire(format!(
                "symbol {index} out of order, expected {}",
                self.local.next_index()
            )));
        }
        let local = self.local.next_symbol();
        self.decoder.push(combine(local, remote));
        Ok(self.decoder.try_decode())
    }

    pub fn symbols_received(&self) -> usize {
        self.decoder.symbols_received()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn random_digests(rng: &mut impl Rng, n: usize) -> Vec<Digest64> {
        (0..n).map(|_| Digest64(rng.random())).collect()
    }

    /// Drive a reconciliation to completion; returns (symbols used, status).
    fn reconcile(local: &[Digest64], remote: &[Digest64], limit: usize) -> (usize, DecodeStatus) {
        let mut remote_stream = SymbolStream::new(remote.iter().copied());
        let mut rec = Reconciler::new(local.iter().copied());
        for i in 0..limit {
            let st = rec.receive(i as u64, remote_stream.next_symbol()).unwrap();
            if st.is_done() {
                return (i + 1, st);
            }
        }
        (limit, DecodeStatus::NeedMore)
    }

    #[test]
    fn symbol_wire_layout() {
        let s = CodedSymbol { id_sum: 1, hash_sum: 2, count: -1 };
        let b = s.to_bytes();
        assert_eq!(b.len(), 24);
        assert_eq!(&b[0..8], &1u64.to_le_bytes());
        assert_eq!(&b[16..24], &(-1i64).to_le_bytes());
        assert_eq!(CodedSymbol::from_bytes(&b).unwrap(), s);
        assert!(CodedSymbol::from_bytes(&b[..23]).is_err());
    }

    #[test]
    fn mapping_starts_at_zero_and_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let d = Digest64(rng.random());
            let a: Vec<u64> = mapping_indices(d).take(50).collect();
            let b: Vec<u64> = mapping_indices(d).take(50).collect();
            assert_eq!(a[0], 0);
            assert_eq!(a, b);
            assert!(a.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn mapping_density() {
        const N: usize = 1_000_000;
        const MAX: u64 = 64;
        let mut hits = [0u64; MAX as usize + 1];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..N {
            for i in mapping_indices(Digest64(rng.random())).take_while(|&i| i <= MAX) {
                hits[i as usize] += 1;
            }
        }
        for (i, &h) in hits.iter().enumerate() {
            let observed = h as f64 / N as f64;
            let target = 2.0 / (i as f64 + 2.0);
            assert!(
                (observed - target).abs() <= 0.1 * target,
                "index {i}: observed {observed:.4}, target {target:.4}"
            );
        }
    }

    #[test]
    fn symbol_examples() {
        let empty = SymbolStream::new(Vec::new());
        assert!(empty.is_empty());
        let mut empty = empty;
        for _ in 0..10 {
            assert_eq!(empty.next_symbol(), CodedSymbol::ZERO);
        }
        let d = Digest64(0xdead_beef);
        let mut single = SymbolStream::new([d]);
        assert_eq!(single.next_symbol(), CodedSymbol { id_sum: d.0, hash_sum: d.check_hash(), count: 1 });
    }

    #[test]
    fn stream_matches_direct_generation_and_is_prefix_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let set = random_digests(&mut rng, 200);
        let mut stream = SymbolStream::new(set.iter().copied());
        let streamed: Vec<CodedSymbol> = (0..300).map(|_| stream.next_symbol()).collect();
        for i in [0u64, 1, 2, 7, 50, 299] {
            assert_eq!(streamed[i as usize], generate_coded_symbol(&set, i));
        }
        let mut longer = SymbolStream::new(set.iter().copied());
        let extended: Vec<CodedSymbol> = (0..1_300).map(|_| longer.next_symbol()).collect();
        assert_eq!(&extended[..300], &streamed[..]);
        assert_eq!(streamed[0].count, 200);
    }

    #[test]
    fn combine_examples() {
        let x = CodedSymbol { id_sum: 17, hash_sum: 99, count: 3 };
        assert_eq!(combine(x, x), CodedSymbol::ZERO);
        assert_eq!(combine(x, CodedSymbol::ZERO), x);
    }

    #[test]
    fn combine_equals_symmetric_difference_symbol() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let n = rng.random_range(0..32);
            let shared = random_digests(&mut rng, n);
            let n = rng.random_range(0..16);
            let only_a = random_digests(&mut rng, n);
            let n = rng.random_range(0..16);
            let only_b = random_digests(&mut rng, n);
            let a: Vec<_> = shared.iter().chain(&only_a).copied().collect();
            let b: Vec<_> = shared.iter().chain(&only_b).copied().collect();
            for i in 0..40u64 {
                let got = combine(generate_coded_symbol(&a, i), generate_coded_symbol(&b, i));
                let plus = generate_coded_symbol(&only_a, i);
                let minus = generate_coded_symbol(&only_b, i);
                let want = CodedSymbol {
                    id_sum: plus.id_sum ^ minus.id_sum,
                    hash_sum: plus.hash_sum ^ minus.hash_sum,
                    count: plus.count - minus.count,
                };
                assert_eq!(got, want);
            }
        }
    }

    #[test]
    fn identical_sets_decode_after_one_symbol() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let set = random_digests(&mut rng, 500);
        let (used, st) = reconcile(&set, &set, 10);
        assert_eq!(used, 1);
        assert_eq!(st, DecodeStatus::Done { remote_only: vec![], local_only: vec![] });
        let (used, st) = reconcile(&[], &[], 10);
        assert_eq!(used, 1);
        assert!(st.is_done());
    }

    #[test]
    fn single_difference_needs_one_or_two_symbols() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for trial in 0..200 {
            let shared = random_digests(&mut rng, 100);
            let extra = Digest64(rng.random());
            let mut with_extra = shared.clone();
            with_extra.push(extra);
            let (local, remote) = if trial % 2 == 0 { (&with_extra, &shared) } else { (&shared, &with_extra) };
            let (used, st) = reconcile(local, remote, 10);
            assert!(used <= 2, "used {used}");
            let DecodeStatus::Done { remote_only, local_only } = st else { panic!() };
            if trial % 2 == 0 {
                assert_eq!((local_only, remote_only), (vec![extra], vec![]));
            } else {
                assert_eq!((local_only, remote_only), (vec![], vec![extra]));
            }
        }
    }

    #[test]
    fn decoder_matches_set_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut failures = 0;
        for _ in 0..1_000 {
            let pool = random_digests(&mut rng, 400);
            let a: BTreeSet<Digest64> = pool.iter().filter(|_| rng.random_bool(0.5)).take(256).copied().collect();
            let b: BTreeSet<Digest64> = pool.iter().filter(|_| rng.random_bool(0.5)).take(256).copied().collect();
            let a_vec: Vec<_> = a.iter().copied().collect();
            let b_vec: Vec<_> = b.iter().copied().collect();
            let d = a.symmetric_difference(&b).count();
            let (_, st) = reconcile(&a_vec, &b_vec, 20 * d + 20);
            match st {
                DecodeStatus::Done { remote_only, local_only } => {
                    let remote_only: BTreeSet<_> = remote_only.into_iter().collect();
                    let local_only: BTreeSet<_> = local_only.into_iter().collect();
                    assert_eq!(remote_only, b.difference(&a).copied().collect());
                    assert_eq!(local_only, a.difference(&b).copied().collect());
                }
                DecodeStatus::NeedMore => failures += 1,
            }
        }
        assert!(failures <= 1, "{failures} sessions failed to decode");
    }

    #[test]
    fn out_of_order_symbol_rejected() {
        let mut rec = Reconciler::new([Digest64(1)]);
        assert!(rec.receive(3, CodedSymbol::ZERO).is_err());
    }

    proptest! {
        #[test]
        fn symbol_round_trip(id in any::<u64>(), h in any::<u64>(), c in any::<i64>()) {
            let s = CodedSymbol { id_sum: id, hash_sum: h, count: c };
            prop_assert_eq!(CodedSymbol::from_bytes(&s.to_bytes()).unwrap(), s);
        }

        #[test]
        fn decode_never_returns_wrong_sets(
            shared in proptest::collection::btree_set(any::<u64>(), 0..64),
            only_a in proptest::collection::btree_set(any::<u64>(), 0..32),
            only_b in proptest::collection::btree_set(any::<u64>(), 0..32),
        ) {
            let a: BTreeSet<Digest64> = shared.iter().chain(&only_a).map(|&x| Digest64(x)).collect();
            let b: BTreeSet<Digest64> = shared.iter().chain(&only_b).map(|&x| Digest64(x)).collect();
            let a_vec: Vec<_> = a.iter().copied().collect();
            let b_vec: Vec<_> = b.iter().copied().collect();
            let (_, st) = reconcile(&a_vec, &b_vec, 2_000);
            if let DecodeStatus::Done { remote_only, local_only } = st {
                let r: BTreeSet<_> = remote_only.into_iter().collect();
                let l: BTreeSet<_> = local_only.into_iter().collect();
                prop_assert_eq!(r, b.difference(&a).copied().collect::<BTreeSet<_>>());
                prop_assert_eq!(l, a.difference(&b).copied().collect::<BTreeSet<_>>());
            }
        }
    }
}
