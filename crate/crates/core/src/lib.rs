// Copyright (c) The ConflictSync Authors
// SPDX-License-Identifier: Apache-2.0

//! Digest-driven synchronization of state-based CRDTs.
//!
//! States are split into their join-irreducible parts, each part is reduced
//! to a 64-bit digest, and replicas reconcile the digest sets with Bloom
//! filters, bucket digests and rateless invertible Bloom lookup tables before
//! shipping only the state the other side lacks.
//!
//! [`simnet::run_session`] runs one two-replica session in memory and
//! reports every transmitted byte by class:
//!
//! ```
//! use conflictsync::{run_session, Algorithm, GSet};
//!
//! let a: GSet = ["apple", "pear"].into_iter().collect();
//! let b: GSet = ["pear", "plum"].into_iter().collect();
//! let out = run_session(Algorithm::Rateless, &a, &b, 0).unwrap();
//! assert!(out.report.converged);
//! assert_eq!(out.report.redundant_bytes, 0);
//! ```

pub mod bloom;
pub mod bucket;
pub mod digest;
pub mod error;
pub mod lattice;
pub mod message;
pub mod protocol;
pub mod riblt;
pub mod simnet;
pub mod workload;

pub use error::{Error, Result};
pub use lattice::{GSet, Item, Lattice};
pub use protocol::{Algorithm, Replica, Role};
pub use simnet::{run_session, SessionOutcome, SessionReport};
pub use workload::{generate_pair, jaccard, PairSpec};
