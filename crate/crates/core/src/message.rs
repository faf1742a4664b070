// Copyright (c) The ConflictSync Authors
// SPDX-License-Identifier: Apache-2.0

//! The message vocabulary shared by every synchronization algorithm, its
//! wire encoding, and per-message byte accounting.
//!
//! Accounting splits every encoded message into three parts:
//! - state payload: the canonical bytes of transmitted decompositions;
//! - metadata: Bloom filters, digests, bucket indices and coded symbols;
//! - framing: message tags, length prefixes, per-decomposition lengths,
//!   option flags, stream indices and the announced bucket count.
//!
//! Only the first two enter the transmission metrics; framing is tracked on
//! its own so that `encode().len()` always equals the sum of all three.

use crate::bloom::BloomFilter;
use crate::digest::{Digest64, DIGEST_BYTES};
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::riblt::{CodedSymbol, SYMBOL_BYTES};

/// Wire size of one bucket index.
pub const INDEX_BYTES: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub enum Message<S: Lattice> {
    /// Full state of the initiator.
    Sync(S),
    /// A state the receiver is missing.
    MissingState(S),
    /// One digest per bucket; the vector length is the bucket count.
    Digests(Vec<Digest64>),
    /// Indices of differing buckets, the sender's contents of those buckets
    /// and, after Bloom prefiltering, the sender's exclusive state.
    MismatchUpload { indices: Vec<u64>, contents: S, exclusive: Option<S> },
    /// Minimal deltas answering a [`Message::MismatchUpload`].
    MismatchDeltas(S),
    Bloom(BloomFilter),
    /// Responder's filter over its common part, its exclusive state, and
    /// either bucket digests or the bucket count of the stream to follow.
    InitStream {
        filter: BloomFilter,
        exclusive: S,
        digests: Option<Vec<Digest64>>,
        bucket_count: Option<u64>,
    },
    /// One coded symbol; the first symbol of a bucketed stream announces
    /// the bucket count.
    SymStream { index: u64, symbol: CodedSymbol, bucket_count: Option<u64> },
    /// End of stream: digests the decoder wants, plus its own missing state
    /// and (after Bloom prefiltering) its exclusive state.
    Eos { hashes: Vec<Digest64>, state: S, exclusive: Option<S> },
    MissingFp(S),
}

mod tag {
    pub const SYNC: u8 = 1;
    pub const MISSING_STATE: u8 = 2;
    pub const DIGESTS: u8 = 3;
    pub const MISMATCH_UPLOAD: u8 = 4;
    pub const MISMATCH_DELTAS: u8 = 5;
    pub const BLOOM: u8 = 6;
    pub const INIT_STREAM: u8 = 7;
    pub const SYM_STREAM: u8 = 8;
    pub const EOS: u8 = 9;
    pub const MISSING_FP: u8 = 10;
}

impl<S: Lattice> Message<S> {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Sync(_) => "Sync",
            Message::MissingState(_) => "MissingState",
            Message::Digests(_) => "Digests",
            Message::MismatchUpload { .. } => "MismatchUpload",
            Message::MismatchDeltas(_) => "MismatchDeltas",
            Message::Bloom(_) => "Bloom",
            Message::InitStream { .. } => "InitStream",
            Message::SymStream { .. } => "SymStream",
            Message::Eos { .. } => "EOS",
            Message::MissingFp(_) => "MissingFP",
        }
    }

    pub fn is_symbol(&self) -> bool {
        matches!(self, Message::SymStream { .. })
    }

    /// Every state payload carried by the message.
    pub fn states(&self) -> Vec<&S> {
        match self {
            Message::Sync(s) | Message::MissingState(s) | Message::MismatchDeltas(s) | Message::MissingFp(s) => {
                vec![s]
            }
            Message::MismatchUpload { contents, exclusive, .. } => {
                std::iter::once(contents).chain(exclusive.as_ref()).collect()
            }
            Message::InitStream { exclusive, .. } => vec![exclusive],
            Message::Eos { state, exclusive, .. } => std::iter::once(state).chain(exclusive.as_ref()).collect(),
            Message::Digests(_) | Message::Bloom(_) | Message::SymStream { .. } => Vec::new(),
        }
    }

    pub fn state_bytes(&self) -> usize {
        self.states().iter().map(|s| s.payload_len()).sum()
    }

    pub fn metadata_bytes(&self) -> usize {
        match self {
            Message::Sync(_) | Message::MissingState(_) | Message::MismatchDeltas(_) | Message::MissingFp(_) => 0,
            Message::Digests(d) => d.len() * DIGEST_BYTES,
            Message::MismatchUpload { indices, .. } => indices.len() * INDEX_BYTES,
            Message::Bloom(f) => f.wire_len(),
            Message::InitStream { filter, digests, .. } => {
                filter.wire_len() + digests.as_ref().map_or(0, |d| d.len() * DIGEST_BYTES)
            }
            Message::SymStream { .. } => SYMBOL_BYTES,
            Message::Eos { hashes, .. } => hashes.len() * DIGEST_BYTES,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Vec::new();
        match self {
            Message::Sync(s) => {
                w.push(tag::SYNC);
                put_state(&mut w, s);
            }
            Message::MissingState(s) => {
                w.push(tag::MISSING_STATE);
                put_state(&mut w, s);
            }
            Message::Digests(d) => {
                w.push(tag::DIGESTS);
                put_words(&mut w, d.iter().map(|x| x.0), d.len());
            }
            Message::MismatchUpload { indices, contents, exclusive } => {
                w.push(tag::MISMATCH_UPLOAD);
                put_words(&mut w, indices.iter().copied(), indices.len());
                put_state(&mut w, contents);
                put_opt_state(&mut w, exclusive.as_ref());
            }
            Message::MismatchDeltas(s) => {
                w.push(tag::MISMATCH_DELTAS);
                put_state(&mut w, s);
            }
            Message::Bloom(f) => {
                w.push(tag::BLOOM);
                w.extend_from_slice(&f.to_bytes());
            }
            Message::InitStream { filter, exclusive, digests, bucket_count } => {
                w.push(tag::INIT_STREAM);
                w.extend_from_slice(&filter.to_bytes());
                put_state(&mut w, exclusive);
                match digests {
                    Some(d) => {
                        w.push(1);
                        put_words(&mut w, d.iter().map(|x| x.0), d.len());
                    }
                    None => w.push(0),
                }
                put_opt_u64(&mut w, *bucket_count);
            }
            Message::SymStream { index, symbol, bucket_count } => {
                w.push(tag::SYM_STREAM);
                w.extend_from_slice(&index.to_le_bytes());
                w.extend_from_slice(&symbol.to_bytes());
                put_opt_u64(&mut w, *bucket_count);
            }
            Message::Eos { hashes, state, exclusive } => {
                w.push(tag::EOS);
                put_words(&mut w, hashes.iter().map(|x| x.0), hashes.len());
                put_state(&mut w, state);
                put_opt_state(&mut w, exclusive.as_ref());
            }
            Message::MissingFp(s) => {
                w.push(tag::MISSING_FP);
                put_state(&mut w, s);
            }
        }
        w
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        let msg = match r.u8()? {
            tag::SYNC => Message::Sync(r.state()?),
            tag::MISSING_STATE => Message::MissingState(r.state()?),
            tag::DIGESTS => Message::Digests(r.digests()?),
            tag::MISMATCH_UPLOAD => Message::MismatchUpload {
                indices: r.words()?,
                contents: r.state()?,
                exclusive: r.opt_state()?,
            },
            tag::MISMATCH_DELTAS => Message::MismatchDeltas(r.state()?),
            tag::BLOOM => Message::Bloom(r.bloom()?),
            tag::INIT_STREAM => Message::InitStream {
                filter: r.bloom()?,
                exclusive: r.state()?,
                digests: if r.flag()? { Some(r.digests()?) } else { None },
                bucket_count: r.opt_u64()?,
            },
            tag::SYM_STREAM => Message::SymStream {
                index: r.u64()?,
                symbol: CodedSymbol::from_bytes(r.take(SYMBOL_BYTES)?)?,
                bucket_count: r.opt_u64()?,
            },
            tag::EOS => Message::Eos {
                hashes: r.digests()?,
                state: r.state()?,
                exclusive: r.opt_state()?,
            },
            tag::MISSING_FP => Message::MissingFp(r.state()?),
            other => return Err(Error::Wire(format!("unknown message tag {other}"))),
        };
        if r.pos != bytes.len() {
            return Err(Error::Wire(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(msg)
    }
}

fn put_words(w: &mut Vec<u8>, words: impl Iterator<Item = u64>, len: usize) {
    w.extend_from_slice(&(len as u64).to_le_bytes());
    for x in words {
        w.extend_from_slice(&x.to_le_bytes());
    }
}

fn put_state<S: Lattice>(w: &mut Vec<u8>, s: &S) {
    let parts = s.decompose();
    w.extend_from_slice(&(parts.len() as u64).to_le_bytes());
    for d in &parts {
        let bytes = S::canonical_bytes(d);
        w.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
        w.extend_from_slice(bytes);
    }
}

fn put_opt_state<S: Lattice>(w: &mut Vec<u8>, s: Option<&S>) {
    match s {
        Some(s) => {
            w.push(1);
            put_state(w, s);
        }
        None => w.push(0),
    }
}

fn put_opt_u64(w: &mut Vec<u8>, v: Option<u64>) {
    match v {
        Some(v) => {
            w.push(1);
            w.extend_from_slice(&v.to_le_bytes());
        }
        None => w.push(0),
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::Wire(format!("truncated message: need {n} bytes at offset {}", self.pos))
        })?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn flag(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            f => Err(Error::Wire(format!("bad option flag {f}"))),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len_prefix(&mut self, unit: usize) -> Result<usize> {
        let n = self.u64()? as usize;
        if n.saturating_mul(unit) > self.buf.len() - self.pos {
            return Err(Error::Wire(format!("length prefix {n} exceeds message")));
        }
        Ok(n)
    }

    fn words(&mut self) -> Result<Vec<u64>> {
        let n = self.len_prefix(8)?;
        (0..n).map(|_| self.u64()).collect()
    }

    fn digests(&mut self) -> Result<Vec<Digest64>> {
        Ok(self.words()?.into_iter().map(Digest64).collect())
    }

    fn opt_u64(&mut self) -> Result<Option<u64>> {
        Ok(if self.flag()? { Some(self.u64()?) } else { None })
    }

    fn state<S: Lattice>(&mut self) -> Result<S> {
        let n = self.len_prefix(4)?;
        let mut parts = Vec::with_capacity(n);
        for _ in 0..n {
            let len = self.u32()? as usize;
            let bytes = self.take(len)?;
            parts.push(
                S::irreducible_from_bytes(bytes).ok_or_else(|| Error::Wire("invalid decomposition bytes".into()))?,
            );
        }
        Ok(S::from_irreducibles(parts))
    }

    fn opt_state<S: Lattice>(&mut self) -> Result<Option<S>> {
        Ok(if self.flag()? { Some(self.state()?) } else { None })
    }

    fn bloom(&mut self) -> Result<BloomFilter> {
        let start = self.pos;
        self.take(crate::bloom::HEADER_BYTES)?;
        let bits = u64::from_le_bytes(self.buf[start..start + 8].try_into().unwrap());
        let body = usize::try_from(bits.div_ceil(8)).map_err(|_| Error::Wire("Bloom filter too large".into()))?;
        self.take(body)?;
        BloomFilter::from_bytes(&self.buf[start..self.pos])
    }
}
