// Copyright (c) The ConflictSync Authors
// SPDX-License-Identifier: Apache-2.0

//! Algorithm selection and the per-replica protocol state machines.
//!
//! A [`Replica`] is driven by its host: the initiator calls
//! [`Replica::start`], both sides feed received messages to
//! [`Replica::handle`], and whichever side is streaming coded symbols is
//! polled through [`Replica::poll_stream`] whenever the channel is idle.

use std::collections::HashMap;
use std::fmt;

use crate::bloom::{build_filter, partition, BloomFilter};
use crate::bucket::{bucket_count, element_index, BucketTable};
use crate::digest::{Digest64, Digester};
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::message::Message;
use crate::riblt::{DecodeStatus, Reconciler, SymbolStream};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Algorithm {
    /// Ship the whole state, receive the missing part back.
    Baseline,
    Bucketing { load_factor: f64 },
    Rateless,
    BloomBucketing { epsilon: f64, load_factor: f64 },
    BloomRateless { epsilon: f64 },
    BucketingRateless { load_factor: f64 },
    BloomBucketingRateless { epsilon: f64, load_factor: f64 },
}

/// Message count (coded symbols excluded) and round trips of a session.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Latency {
    pub messages: usize,
    pub round_trips: f64,
    /// Whether a symbol stream precedes the final messages.
    pub streamed: bool,
}

impl Algorithm {
    pub const NAMES: [&'static str; 7] = ["Baseline", "Bu", "Ra", "BlBu", "BlRa", "BuRa", "BlBuRa"];

    /// Build from a short name plus whichever parameters that name takes.
    pub fn from_parts(name: &str, epsilon: Option<f64>, load_factor: Option<f64>) -> Result<Self> {
        let need_eps = || epsilon.ok_or_else(|| Error::InvalidParameter(format!("{name} needs eps")));
        let need_lf = || load_factor.ok_or_else(|| Error::InvalidParameter(format!("{name} needs a load factor")));
        let algo = match name.to_ascii_lowercase().as_str() {
            "baseline" => Algorithm::Baseline,
            "bu" => Algorithm::Bucketing { load_factor: need_lf()? },
            "ra" => Algorithm::Rateless,
            "blbu" => Algorithm::BloomBucketing { epsilon: need_eps()?, load_factor: need_lf()? },
            "blra" => Algorithm::BloomRateless { epsilon: need_eps()? },
            "bura" => Algorithm::BucketingRateless { load_factor: need_lf()? },
            "blbura" => Algorithm::BloomBucketingRateless { epsilon: need_eps()?, load_factor: need_lf()? },
            _ => return Err(Error::InvalidParameter(format!("unknown algorithm {name:?}"))),
        };
        algo.validate()?;
        Ok(algo)
    }

    /// The nineteen configurations of the standard benchmark grid.
    pub fn standard_grid() -> Vec<Algorithm> {
        let mut grid = vec![Algorithm::Baseline];
        for lf in [0.2, 1.0, 5.0] {
            grid.push(Algorithm::Bucketing { load_factor: lf });
        }
        grid.push(Algorithm::Rateless);
        for eps in [0.01, 0.25] {
            for lf in [1.0, 0.2] {
                grid.push(Algorithm::BloomBucketing { epsilon: eps, load_factor: lf });
            }
        }
        for eps in [0.01, 0.1, 0.25] {
            grid.push(Algorithm::BloomRateless { epsilon: eps });
        }
        for lf in [0.2, 1.0, 5.0] {
            grid.push(Algorithm::BucketingRateless { load_factor: lf });
        }
        for eps in [0.01, 0.25] {
            for lf in [1.0, 0.2] {
                grid.push(Algorithm::BloomBucketingRateless { epsilon: eps, load_factor: lf });
            }
        }
        grid
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(eps) = self.epsilon() {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(Error::InvalidParameter(format!("eps must lie in (0, 1), got {eps}")));
            }
        }
        if let Some(lf) = self.load_factor() {
            if !(lf > 0.0 && lf.is_finite()) {
                return Err(Error::InvalidParameter(format!("load factor must be positive, got {lf}")));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Baseline => "Baseline",
            Algorithm::Bucketing { .. } => "Bu",
            Algorithm::Rateless => "Ra",
            Algorithm::BloomBucketing { .. } => "BlBu",
            Algorithm::BloomRateless { .. } => "BlRa",
            Algorithm::BucketingRateless { .. } => "BuRa",
            Algorithm::BloomBucketingRateless { .. } => "BlBuRa",
        }
    }

    pub fn epsilon(&self) -> Option<f64> {
        match *self {
            Algorithm::BloomBucketing { epsilon, .. }
            | Algorithm::BloomRateless { epsilon }
            | Algorithm::BloomBucketingRateless { epsilon, .. } => Some(epsilon),
            _ => None,
        }
    }

    pub fn load_factor(&self) -> Option<f64> {
        match *self {
            Algorithm::Bucketing { load_factor }
            | Algorithm::BloomBucketing { load_factor, .. }
            | Algorithm::BucketingRateless { load_factor }
            | Algorithm::BloomBucketingRateless { load_factor, .. } => Some(load_factor),
            _ => None,
        }
    }

    /// Parameters as `key=value` pairs joined by `;`, empty when there are none.
    pub fn params(&self) -> String {
        let mut parts = Vec::new();
        if let Some(eps) = self.epsilon() {
            parts.push(format!("eps={eps}"));
        }
        if let Some(lf) = self.load_factor() {
            parts.push(format!("f_ld={lf}"));
        }
        parts.join(";")
    }

    fn streams(&self) -> bool {
        matches!(
            self,
            Algorithm::Rateless
                | Algorithm::BloomRateless { .. }
                | Algorithm::BucketingRateless { .. }
                | Algorithm::BloomBucketingRateless { .. }
        )
    }

    pub fn latency(&self) -> Latency {
        let (messages, round_trips) = match self {
            Algorithm::Baseline => (2, 1.0),
            Algorithm::Bucketing { .. } => (3, 1.5),
            Algorithm::Rateless | Algorithm::BucketingRateless { .. } => (2, 1.5),
            Algorithm::BloomBucketing { .. }
            | Algorithm::BloomRateless { .. }
            | Algorithm::BloomBucketingRateless { .. } => (4, 2.0),
        };
        Latency { messages, round_trips, streamed: self.streams() }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let params = self.params();
        if params.is_empty() {
            f.write_str(self.name())
        } else {
            write!(f, "{}[{}]", self.name(), params.replace(';', ", "))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Initiator,
    Responder,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Idle,
    ExpectSync,
    ExpectMissingState,
    ExpectDigests,
    ExpectUpload,
    ExpectDeltas,
    ExpectBloom,
    ExpectInitStream,
    ExpectSymbols,
    ExpectEos,
    ExpectMissingFp,
    Done,
}

impl Phase {
    fn name(self) -> &'static str {
        match self {
            Phase::Idle => "idle",
            Phase::ExpectSync => "awaiting Sync",
            Phase::ExpectMissingState => "awaiting MissingState",
            Phase::ExpectDigests => "awaiting Digests",
            Phase::ExpectUpload => "awaiting MismatchUpload",
            Phase::ExpectDeltas => "awaiting MismatchDeltas",
            Phase::ExpectBloom => "awaiting Bloom",
            Phase::ExpectInitStream => "awaiting InitStream",
            Phase::ExpectSymbols => "awaiting SymStream",
            Phase::ExpectEos => "awaiting EOS",
            Phase::ExpectMissingFp => "awaiting MissingFP",
            Phase::Done => "done",
        }
    }
}

struct Outgoing {
    stream: SymbolStream,
    bucket_count: Option<u64>,
}

/// One side of a synchronization session.
pub struct Replica<S: Lattice> {
    role: Role,
    algorithm: Algorithm,
    state: S,
    digester: Digester,
    phase: Phase,
    outgoing: Option<Outgoing>,
    decoder: Option<Reconciler>,
    /// Digest lookup over the part of the state being reconciled.
    by_digest: HashMap<Digest64, S::Irreducible>,
    table: Option<BucketTable<S>>,
    /// Own exclusive part after Bloom partitioning, awaiting upload.
    exclusive: Option<S>,
}

impl<S: Lattice> fmt::Debug for Replica<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Replica")
            .field("role", &self.role)
            .field("algorithm", &self.algorithm)
            .field("phase", &self.phase)
            .field("streaming", &self.outgoing.is_some())
            .finish()
    }
}

impl<S: Lattice> Replica<S> {
    /// `seed` keys the digest function and must match on both sides.
    pub fn new(role: Role, algorithm: Algorithm, state: S, seed: u64) -> Result<Self> {
        algorithm.validate()?;
        let phase = match role {
            Role::Initiator => Phase::Idle,
            Role::Responder => match algorithm {
                Algorithm::Baseline => Phase::ExpectSync,
                Algorithm::Bucketing { .. } => Phase::ExpectDigests,
                Algorithm::Rateless | Algorithm::BucketingRateless { .. } => Phase::ExpectSymbols,
                _ => Phase::ExpectBloom,
            },
        };
        Ok(Replica {
            role,
            algorithm,
            state,
            digester: Digester::new(seed),
            phase,
            outgoing: None,
            decoder: None,
            by_digest: HashMap::new(),
            table: None,
            exclusive: None,
        })
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn state(&self) -> &S {
        &self.state
    }

    pub fn into_state(self) -> S {
        self.state
    }

    pub fn is_done(&self) -> bool {
        self.phase == Phase::Done
    }

    pub fn is_streaming(&self) -> bool {
        self.outgoing.is_some()
    }

    /// Symbols consumed by this side's decoder so far.
    pub fn symbols_received(&self) -> usize {
        self.decoder.as_ref().map_or(0, Reconciler::symbols_received)
    }

    /// Open the session. Streaming algorithms return no message and start
    /// producing symbols through [`Replica::poll_stream`] instead.
    pub fn start(&mut self) -> Result<Vec<Message<S>>> {
        if self.role != Role::Initiator {
            return Err(Error::NotInitiator);
        }
        if self.phase != Phase::Idle {
            return Err(Error::UnexpectedMessage { phase: self.phase.name(), message: "start" });
        }
        let out = match self.algorithm {
            Algorithm::Baseline => {
                self.phase = Phase::ExpectMissingState;
                Message::Sync(self.state.clone())
            }
            Algorithm::Bucketing { load_factor } => {
                let count = bucket_count(self.state.decomposition_len(), load_factor)?;
                let table = BucketTable::build(&self.state, &self.digester, count)?;
                let digests = table.digests().to_vec();
                self.table = Some(table);
                self.phase = Phase::ExpectUpload;
                Message::Digests(digests)
            }
            Algorithm::Rateless => {
                let state = self.state.clone();
                let digests = self.index_digests(&state);
                self.outgoing = Some(Outgoing { stream: SymbolStream::new(digests), bucket_count: None });
                self.phase = Phase::ExpectEos;
                return Ok(Vec::new());
            }
            Algorithm::BucketingRateless { load_factor } => {
                let count = bucket_count(self.state.decomposition_len(), load_factor)?;
                let table = BucketTable::build(&self.state, &self.digester, count)?;
                let elements = table.digest_elements()?;
                self.table = Some(table);
                self.outgoing =
                    Some(Outgoing { stream: SymbolStream::new(elements), bucket_count: Some(count as u64) });
                self.phase = Phase::ExpectUpload;
                return Ok(Vec::new());
            }
            Algorithm::BloomBucketing { epsilon, .. }
            | Algorithm::BloomRateless { epsilon }
            | Algorithm::BloomBucketingRateless { epsilon, .. } => {
                let parts = self.state.decompose();
                let filter = build_filter::<S, _>(parts.iter(), epsilon)?;
                self.phase = Phase::ExpectInitStream;
                Message::Bloom(filter)
            }
        };
        Ok(vec![out])
    }

    /// Next coded symbol, if this side is currently streaming.
    pub fn poll_stream(&mut self) -> Option<Message<S>> {
        let out = self.outgoing.as_mut()?;
        let index = out.stream.next_index();
        let symbol = out.stream.next_symbol();
        let bucket_count = if index == 0 { out.bucket_count } else { None };
        Some(Message::SymStream { index, symbol, bucket_count })
    }

    /// Process one incoming message and return the replies it triggers.
    pub fn handle(&mut self, msg: Message<S>) -> Result<Vec<Message<S>>> {
        let reply = match (self.phase, msg) {
            (Phase::ExpectSync, Message::Sync(remote)) => {
                let missing = crate::lattice::delta(&self.state, &remote);
                self.state.join_assign(&remote);
                self.phase = Phase::Done;
                Some(Message::MissingState(missing))
            }
            (Phase::ExpectMissingState, Message::MissingState(s))
            | (Phase::ExpectDeltas, Message::MismatchDeltas(s))
            | (Phase::ExpectMissingFp, Message::MissingFp(s)) => {
                self.state.join_assign(&s);
                self.finish();
                None
            }
            (Phase::ExpectDigests, Message::Digests(remote)) => {
                let table = BucketTable::build(&self.state, &self.digester, remote.len())?;
                let indices = table.differing(&remote)?;
                let contents = table.contents(&indices)?;
                self.table = Some(table);
                self.phase = Phase::ExpectDeltas;
                Some(Message::MismatchUpload { indices, contents, exclusive: None })
            }
            (Phase::ExpectUpload, Message::MismatchUpload { indices, contents, exclusive }) => {
                let table = self.table.take().ok_or(Error::UnexpectedMessage {
                    phase: self.phase.name(),
                    message: "MismatchUpload",
                })?;
                let deltas = table.delta_over(&indices, &contents)?;
                self.state.join_assign(&contents);
                if let Some(x) = exclusive {
                    self.state.join_assign(&x);
                }
                self.finish();
                Some(Message::MismatchDeltas(deltas))
            }
            (Phase::ExpectBloom, Message::Bloom(remote)) => Some(self.on_bloom(&remote)?),
            (Phase::ExpectInitStream, Message::InitStream { filter, exclusive, digests, bucket_count }) => {
                self.on_init_stream(&filter, exclusive, digests, bucket_count)?
            }
            (Phase::ExpectSymbols, Message::SymStream { index, symbol, bucket_count }) => {
                if self.decoder.is_none() {
                    self.open_decoder(index, bucket_count)?;
                }
                let status = self.decoder.as_mut().expect("decoder opened above").receive(index, symbol)?;
                match status {
                    DecodeStatus::NeedMore => None,
                    DecodeStatus::Done { remote_only, local_only } => Some(self.on_decoded(remote_only, local_only)?),
                }
            }
            (Phase::ExpectEos, Message::Eos { hashes, state, exclusive }) => {
                let mut missing = Vec::with_capacity(hashes.len());
                for h in &hashes {
                    let d = self
                        .by_digest
                        .get(h)
                        .ok_or_else(|| Error::Wire(format!("requested digest {h:?} is not held locally")))?;
                    missing.push(d.clone());
                }
                self.state.join_assign(&state);
                if let Some(x) = exclusive {
                    self.state.join_assign(&x);
                }
                let missing = S::from_irreducibles(missing);
                let reply = match self.algorithm {
                    Algorithm::Rateless => Message::MissingState(missing),
                    _ => Message::MissingFp(missing),
                };
                self.finish();
                Some(reply)
            }
            // Symbols still in flight when the stream was cut off.
            (Phase::Done, Message::SymStream { .. }) if self.algorithm.streams() => None,
            (phase, msg) => {
                return Err(Error::UnexpectedMessage { phase: phase.name(), message: msg.kind() });
            }
        };
        Ok(reply.into_iter().collect())
    }

    fn finish(&mut self) {
        self.phase = Phase::Done;
        self.outgoing = None;
        self.decoder = None;
        self.table = None;
        self.by_digest = HashMap::new();
        self.exclusive = None;
    }

    fn digested(&self, x: &S) -> Vec<(Digest64, S::Irreducible)> {
        x.decompose().into_iter().map(|d| (self.digester.digest::<S>(&d), d)).collect()
    }

    /// Index `x` by digest and return the digests.
    fn index_digests(&mut self, x: &S) -> Vec<Digest64> {
        let entries = self.digested(x);
        let digests = entries.iter().map(|(h, _)| *h).collect();
        self.by_digest = entries.into_iter().collect();
        digests
    }

    /// Responder side of every Bloom-prefiltered algorithm.
    fn on_bloom(&mut self, remote: &BloomFilter) -> Result<Message<S>> {
        let total = self.state.decomposition_len();
        let (common, exclusive) = partition(&self.state, remote);
        let common_parts = common.decompose();
        let epsilon = self.algorithm.epsilon().expect("Bloom phase implies eps");
        let filter = build_filter::<S, _>(common_parts.iter(), epsilon)?;
        let (digests, bucket_count) = match self.algorithm {
            Algorithm::BloomRateless { .. } => {
                let digests = self.index_digests(&common);
                self.outgoing = Some(Outgoing { stream: SymbolStream::new(digests), bucket_count: None });
                self.phase = Phase::ExpectEos;
                (None, None)
            }
            Algorithm::BloomBucketing { load_factor, .. } => {
                let count = bucket_count(total, load_factor)?;
                let table = BucketTable::build(&common, &self.digester, count)?;
                let digests = table.digests().to_vec();
                self.table = Some(table);
                self.phase = Phase::ExpectUpload;
                (Some(digests), None)
            }
            Algorithm::BloomBucketingRateless { load_factor, .. } => {
                let count = bucket_count(total, load_factor)?;
                let table = BucketTable::build(&common, &self.digester, count)?;
                let elements = table.digest_elements()?;
                self.table = Some(table);
                self.outgoing = Some(Outgoing { stream: SymbolStream::new(elements), bucket_count: None });
                self.phase = Phase::ExpectUpload;
                (None, Some(count as u64))
            }
            _ => unreachable!("only Bloom algorithms expect a Bloom message"),
        };
        Ok(Message::InitStream { filter, exclusive, digests, bucket_count })
    }

    /// Initiator side after the responder's filter arrives.
    fn on_init_stream(
        &mut self,
        remote: &BloomFilter,
        remote_exclusive: S,
        digests: Option<Vec<Digest64>>,
        count: Option<u64>,
    ) -> Result<Option<Message<S>>> {
        // Partition before merging so the remote exclusive part never
        // lands in our own upload.
        let (common, exclusive) = partition(&self.state, remote);
        self.state.join_assign(&remote_exclusive);
        let malformed = |what: &str| Error::Wire(format!("InitStream for {} lacks {what}", self.algorithm));
        match self.algorithm {
            Algorithm::BloomRateless { .. } => {
                let digests = self.index_digests(&common);
                self.decoder = Some(Reconciler::new(digests));
                self.exclusive = Some(exclusive);
                self.phase = Phase::ExpectSymbols;
                Ok(None)
            }
            Algorithm::BloomBucketing { .. } => {
                let remote_digests = digests.ok_or_else(|| malformed("bucket digests"))?;
                if remote_digests.is_empty() {
                    return Err(malformed("bucket digests"));
                }
                let table = BucketTable::build(&common, &self.digester, remote_digests.len())?;
                let indices = table.differing(&remote_digests)?;
                let contents = table.contents(&indices)?;
                self.phase = Phase::ExpectDeltas;
                Ok(Some(Message::MismatchUpload { indices, contents, exclusive: Some(exclusive) }))
            }
            Algorithm::BloomBucketingRateless { .. } => {
                let count = count.ok_or_else(|| malformed("bucket count"))?;
                let table = BucketTable::build(&common, &self.digester, checked_count(count)?)?;
                self.decoder = Some(Reconciler::new(table.digest_elements()?));
                self.table = Some(table);
                self.exclusive = Some(exclusive);
                self.phase = Phase::ExpectSymbols;
                Ok(None)
            }
            _ => unreachable!("only Bloom algorithms expect InitStream"),
        }
    }

    /// Responder of an unfiltered stream: set up the decoder on the first symbol.
    fn open_decoder(&mut self, index: u64, count: Option<u64>) -> Result<()> {
        if index != 0 {
            return Err(Error::Wire(format!("stream opened at symbol {index}")));
        }
        let local = match self.algorithm {
            Algorithm::Rateless => {
                let state = self.state.clone();
                self.index_digests(&state)
            }
            Algorithm::BucketingRateless { .. } => {
                let count = count.ok_or_else(|| Error::Wire("first symbol lacks the bucket count".into()))?;
                let table = BucketTable::build(&self.state, &self.digester, checked_count(count)?)?;
                let elements = table.digest_elements()?;
                self.table = Some(table);
                elements
            }
            _ => unreachable!("Bloom algorithms open the decoder on InitStream"),
        };
        self.decoder = Some(Reconciler::new(local));
        Ok(())
    }

    fn on_decoded(&mut self, remote_only: Vec<Digest64>, local_only: Vec<Digest64>) -> Result<Message<S>> {
        let lookup = |by_digest: &HashMap<Digest64, S::Irreducible>| -> Result<S> {
            let parts = local_only
                .iter()
                .map(|h| by_digest.get(h).cloned().ok_or_else(|| Error::Wire(format!("decoded unknown digest {h:?}"))))
                .collect::<Result<Vec<_>>>()?;
            Ok(S::from_irreducibles(parts))
        };
        let msg = match self.algorithm {
            Algorithm::Rateless => {
                let state = lookup(&self.by_digest)?;
                self.phase = Phase::ExpectMissingState;
                Message::Eos { hashes: remote_only, state, exclusive: None }
            }
            Algorithm::BloomRateless { .. } => {
                let state = lookup(&self.by_digest)?;
                self.phase = Phase::ExpectMissingFp;
                Message::Eos { hashes: remote_only, state, exclusive: self.exclusive.take() }
            }
            Algorithm::BucketingRateless { .. } | Algorithm::BloomBucketingRateless { .. } => {
                let mut indices: Vec<u64> = remote_only.iter().chain(&local_only).map(|e| element_index(*e)).collect();
                indices.sort_unstable();
                indices.dedup();
                let table = self.table.as_ref().expect("bucketed decoder keeps its table");
                if let Some(&bad) = indices.iter().find(|&&i| i >= table.len() as u64) {
                    return Err(Error::Wire(format!("decoded bucket index {bad} out of range")));
                }
                let contents = table.contents(&indices)?;
                self.phase = Phase::ExpectDeltas;
                Message::MismatchUpload { indices, contents, exclusive: self.exclusive.take() }
            }
            _ => unreachable!("only streaming algorithms decode"),
        };
        self.decoder = None;
        self.by_digest = HashMap::new();
        Ok(msg)
    }
}

fn checked_count(count: u64) -> Result<usize> {
    usize::try_from(count)
        .ok()
        .filter(|c| (1..=crate::bucket::MAX_BUCKETS).contains(c))
        .ok_or_else(|| Error::Wire(format!("announced bucket count {count} out of range")))
}
