// Copyright (c) The ConflictSync Authors
// SPDX-License-Identifier: Apache-2.0

//! Deterministic two-replica channel with per-byte accounting.
//!
//! Messages travel encoded, so every accounted byte has actually been
//! serialized and parsed. Delivery alternates between the two FIFO queues
//! (initiator to responder first); when both queues are empty the side that
//! is streaming emits one more coded symbol.

use std::collections::VecDeque;

use crate::digest::keyed_hash;
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::message::Message;
use crate::protocol::{Algorithm, Replica, Role};

/// Byte and message counts of one session. Framing bytes are kept apart and
/// are not part of `total_bytes`.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionReport {
    pub algorithm: Algorithm,
    pub cardinality: usize,
    pub similarity_measured: f64,
    pub metadata_bytes: u64,
    pub redundant_bytes: u64,
    pub necessary_bytes: u64,
    pub framing_bytes: u64,
    /// Messages other than coded symbols.
    pub messages: usize,
    pub symbols: u64,
    pub converged: bool,
    /// Hash over every encoded message in delivery order.
    pub transcript_hash: u64,
}

impl SessionReport {
    pub fn total_bytes(&self) -> u64 {
        self.metadata_bytes + self.redundant_bytes + self.necessary_bytes
    }

    pub fn state_bytes(&self) -> u64 {
        self.redundant_bytes + self.necessary_bytes
    }
}

#[derive(Clone, Debug)]
pub struct SessionOutcome<S> {
    pub report: SessionReport,
    pub initiator: S,
    pub responder: S,
}

/// Split a payload into bytes the receiver already holds and bytes it lacks.
pub fn classify<S: Lattice>(receiver: &S, payload: &S) -> (u64, u64) {
    payload.decompose().iter().fold((0, 0), |(redundant, necessary), d| {
        let len = S::canonical_bytes(d).len() as u64;
        if receiver.contains(d) {
            (redundant + len, necessary)
        } else {
            (redundant, necessary + len)
        }
    })
}

/// Decimal byte units with four significant digits: `24 B`, `405.1 kB`, `8.482 MB`.
pub fn human_bytes(bytes: u64) -> String {
    const UNITS: [(&str, f64); 3] = [("GB", 1e9), ("MB", 1e6), ("kB", 1e3)];
    let Some(&(unit, scale)) = UNITS.iter().find(|(_, scale)| bytes as f64 >= *scale) else {
        return format!("{bytes} B");
    };
    let value = bytes as f64 / scale;
    let decimals = 3usize.saturating_sub(value.log10().floor() as usize);
    let text = format!("{value:.decimals$}");
    let text = if text.contains('.') { text.trim_end_matches('0').trim_end_matches('.') } else { &text };
    format!("{text} {unit}")
}

/// Symbols allowed before a session is declared non-terminating.
pub fn symbol_budget(union_len: usize) -> u64 {
    100 * union_len as u64 + 1000
}

#[derive(Default)]
struct Tally {
    metadata: u64,
    redundant: u64,
    necessary: u64,
    framing: u64,
    messages: usize,
    symbols: u64,
    transcript: u64,
}

impl Tally {
    /// Account for `wire`, decoded as `msg`, arriving at a replica in `receiver`.
    fn record<S: Lattice>(&mut self, wire: &[u8], msg: &Message<S>, receiver: &S) -> Result<()> {
        let metadata = msg.metadata_bytes() as u64;
        let (mut redundant, mut necessary) = (0, 0);
        for s in msg.states() {
            let (r, n) = classify(receiver, s);
            redundant += r;
            necessary += n;
        }
        let accounted = metadata + redundant + necessary;
        let framing = (wire.len() as u64).checked_sub(accounted).ok_or_else(|| {
            Error::Wire(format!("{} message of {} bytes accounts for {accounted}", msg.kind(), wire.len()))
        })?;
        self.metadata += metadata;
        self.redundant += redundant;
        self.necessary += necessary;
        self.framing += framing;
        if msg.is_symbol() {
            self.symbols += 1;
        } else {
            self.messages += 1;
        }
        self.transcript = keyed_hash(wire, self.transcript);
        Ok(())
    }
}

fn deliver<S: Lattice>(
    wire: Vec<u8>,
    to: &mut Replica<S>,
    replies: &mut VecDeque<Vec<u8>>,
    tally: &mut Tally,
) -> Result<()> {
    let msg = Message::<S>::decode(&wire)?;
    tally.record(&wire, &msg, to.state())?;
    replies.extend(to.handle(msg)?.iter().map(Message::encode));
    Ok(())
}

/// Synchronize copies of `a` (initiator) and `b` (responder) under `algorithm`.
pub fn run_session<S: Lattice>(algorithm: Algorithm, a: &S, b: &S, seed: u64) -> Result<SessionOutcome<S>> {
    let mut initiator = Replica::new(Role::Initiator, algorithm, a.clone(), seed)?;
    let mut responder = Replica::new(Role::Responder, algorithm, b.clone(), seed)?;
    let union = a.join(b);
    let budget = symbol_budget(union.decomposition_len());

    let mut tally = Tally::default();
    let mut to_responder: VecDeque<Vec<u8>> = initiator.start()?.iter().map(Message::encode).collect();
    let mut to_initiator: VecDeque<Vec<u8>> = VecDeque::new();
    loop {
        let mut progressed = false;
        if let Some(wire) = to_responder.pop_front() {
            deliver(wire, &mut responder, &mut to_initiator, &mut tally)?;
            progressed = true;
        }
        if let Some(wire) = to_initiator.pop_front() {
            deliver(wire, &mut initiator, &mut to_responder, &mut tally)?;
            progressed = true;
        }
        if progressed {
            continue;
        }
        if let Some(sym) = initiator.poll_stream() {
            to_responder.push_back(sym.encode());
        } else if let Some(sym) = responder.poll_stream() {
            to_initiator.push_back(sym.encode());
        } else if initiator.is_done() && responder.is_done() {
            break;
        } else {
            return Err(Error::Stalled);
        }
        if tally.symbols >= budget {
            return Err(Error::SymbolBudgetExceeded { budget });
        }
    }

    let initiator = initiator.into_state();
    let responder = responder.into_state();
    let report = SessionReport {
        algorithm,
        cardinality: a.decomposition_len().max(b.decomposition_len()),
        similarity_measured: crate::workload::jaccard(a, b),
        metadata_bytes: tally.metadata,
        redundant_bytes: tally.redundant,
        necessary_bytes: tally.necessary,
        framing_bytes: tally.framing,
        messages: tally.messages,
        symbols: tally.symbols,
        converged: initiator == responder && initiator == union,
        transcript_hash: tally.transcript,
    };
    Ok(SessionOutcome { report, initiator, responder })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::GSet;

    #[test]
    fn classify_examples() {
        let have: GSet = ["aa", "bbb"].into_iter().collect();
        let disjoint: GSet = ["x", "yy"].into_iter().collect();
        assert_eq!(classify(&have, &disjoint), (0, 3));
        assert_eq!(classify(&have, &have), (5, 0));
        let mixed: GSet = ["aa", "zzzz"].into_iter().collect();
        assert_eq!(classify(&have, &mixed), (2, 4));
    }

    #[test]
    fn human_units() {
        assert_eq!(human_bytes(0), "0 B");
        assert_eq!(human_bytes(24), "24 B");
        assert_eq!(human_bytes(405_100), "405.1 kB");
        assert_eq!(human_bytes(72_240), "72.24 kB");
        assert_eq!(human_bytes(8_500_000), "8.5 MB");
        assert_eq!(human_bytes(15_772_709), "15.77 MB");
        assert_eq!(human_bytes(800_000), "800 kB");
    }

    #[test]
    fn bottoms_converge_without_redundancy() {
        for algo in Algorithm::standard_grid() {
            let out = run_session(algo, &GSet::new(), &GSet::new(), 1).unwrap();
            assert!(out.report.converged, "{algo}");
            assert_eq!(out.report.redundant_bytes, 0, "{algo}");
        }
    }

    #[test]
    fn identical_small_sets_under_rateless_cost_one_symbol() {
        let x: GSet = ["one", "two", "three"].into_iter().collect();
        let r = run_session(Algorithm::Rateless, &x, &x, 9).unwrap().report;
        assert_eq!(r.total_bytes(), 24);
        assert_eq!(r.symbols, 1);
        assert!(r.converged);
    }

    #[test]
    fn baseline_ships_state_and_minimal_delta() {
        let a: GSet = ["abc", "shared"].into_iter().collect();
        let b: GSet = ["xy", "shared"].into_iter().collect();
        let r = run_session(Algorithm::Baseline, &a, &b, 0).unwrap().report;
        assert_eq!(r.metadata_bytes, 0);
        assert_eq!(r.redundant_bytes, 6);
        assert_eq!(r.necessary_bytes, 5);
        assert_eq!(r.messages, 2);
    }
}
