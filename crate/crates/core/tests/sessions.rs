// Copyright (c) The ConflictSync Authors
// SPDX-License-Identifier: Apache-2.0

use conflictsync::lattice::{GSet, Lattice};
use conflictsync::message::Message;
use conflictsync::protocol::{Algorithm, Replica, Role};
use conflictsync::simnet::run_session;
use conflictsync::workload::{generate_pair, PairSpec};
use conflictsync::Error;

fn pair(c: usize, s: f64, seed: u64) -> (GSet, GSet) {
    generate_pair(&PairSpec::new(c, s, seed)).unwrap()
}

fn assert_close(measured: u64, target: f64, rel: f64, what: &str) {
    let m = measured as f64;
    assert!((m - target).abs() <= rel * target, "{what}: {m} not within {rel} of {target}");
}

#[test]
fn bucketing_redundancy_at_half_similarity() {
    let (a, b) = pair(100_000, 0.5, 21);
    let r = run_session(Algorithm::Bucketing { load_factor: 1.0 }, &a, &b, 3).unwrap().report;
    assert!(r.converged);
    assert_close(r.redundant_bytes, 1.39e6, 0.05, "Bu[f_ld=1] redundancy");
}

#[test]
fn bloom_bucketing_variants_at_zero_similarity() {
    let (a, b) = pair(100_000, 0.0, 22);
    let blbu = run_session(Algorithm::BloomBucketing { epsilon: 0.01, load_factor: 0.2 }, &a, &b, 1).unwrap().report;
    assert_close(blbu.metadata_bytes, 296.2e3, 0.02, "BlBu[1%, 0.2] metadata");
    let blbura =
        run_session(Algorithm::BloomBucketingRateless { epsilon: 0.01, load_factor: 1.0 }, &a, &b, 1).unwrap().report;
    assert_close(blbura.metadata_bytes, 267.3e3, 0.03, "BlBuRa[1%, 1] metadata");
    assert_eq!(blbu.redundant_bytes + blbura.redundant_bytes, 0);
}

#[test]
fn identical_replicas_cost_one_symbol_at_any_size() {
    for c in [1, 10, 1000, 20_000] {
        let (a, _) = pair(c, 1.0, c as u64);
        for algo in [
            Algorithm::Rateless,
            Algorithm::BucketingRateless { load_factor: 0.2 },
            Algorithm::BucketingRateless { load_factor: 5.0 },
        ] {
            let r = run_session(algo, &a, &a, 0).unwrap().report;
            assert_eq!(r.total_bytes(), 24, "{algo} c={c}");
            assert_eq!(r.symbols, 1);
        }
    }
}

#[test]
fn sessions_replay_identically() {
    let (a, b) = pair(5_000, 0.7, 5);
    for algo in Algorithm::standard_grid() {
        let first = run_session(algo, &a, &b, 99).unwrap();
        let second = run_session(algo, &a, &b, 99).unwrap();
        assert_eq!(first.report, second.report, "{algo}");
        assert_eq!(first.initiator, second.initiator);
    }
}

#[test]
fn digest_seed_changes_transcript_not_outcome() {
    let (a, b) = pair(2_000, 0.9, 6);
    let x = run_session(Algorithm::Rateless, &a, &b, 1).unwrap();
    let y = run_session(Algorithm::Rateless, &a, &b, 2).unwrap();
    assert_ne!(x.report.transcript_hash, y.report.transcript_hash);
    assert_eq!(x.initiator, y.initiator);
    assert_eq!(x.report.necessary_bytes, y.report.necessary_bytes);
}

#[test]
fn one_sided_states_converge() {
    let (a, _) = pair(3_000, 1.0, 8);
    for algo in Algorithm::standard_grid() {
        for (x, y) in [(&a, &GSet::new()), (&GSet::new(), &a)] {
            let out = run_session(algo, x, y, 4).unwrap();
            assert!(out.report.converged, "{algo}");
            assert_eq!(out.initiator, a);
            assert_eq!(out.report.necessary_bytes as usize, a.payload_len());
        }
    }
}

#[test]
fn replicas_talk_over_encoded_bytes() {
    let a: GSet = ["alpha", "beta", "gamma"].into_iter().collect();
    let b: GSet = ["beta", "delta"].into_iter().collect();
    let algo = Algorithm::BloomBucketing { epsilon: 0.01, load_factor: 1.0 };
    let mut left = Replica::new(Role::Initiator, algo, a.clone(), 5).unwrap();
    let mut right = Replica::new(Role::Responder, algo, b.clone(), 5).unwrap();
    let mut inflight: Vec<Vec<u8>> = left.start().unwrap().iter().map(Message::encode).collect();
    let mut towards_right = true;
    while !inflight.is_empty() {
        let target = if towards_right { &mut right } else { &mut left };
        let mut replies = Vec::new();
        for wire in inflight.drain(..) {
            replies.extend(target.handle(Message::decode(&wire).unwrap()).unwrap().iter().map(Message::encode));
        }
        inflight = replies;
        towards_right = !towards_right;
    }
    assert!(left.is_done() && right.is_done());
    assert_eq!(left.state(), &a.join(&b));
    assert_eq!(right.state(), &a.join(&b));
}

#[test]
fn protocol_misuse_is_reported() {
    let mut r = Replica::new(Role::Responder, Algorithm::Rateless, GSet::new(), 0).unwrap();
    assert_eq!(r.start().unwrap_err(), Error::NotInitiator);
    let err = r.handle(Message::Digests(Vec::new())).unwrap_err();
    assert!(matches!(err, Error::UnexpectedMessage { .. }), "{err}");
    assert!(Replica::new(Role::Initiator, Algorithm::BloomRateless { epsilon: 2.0 }, GSet::new(), 0).is_err());
}
