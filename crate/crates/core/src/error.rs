// Copyright (c) The ConflictSync Authors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("protocol violation in {phase}: unexpected {message} message")]
    UnexpectedMessage { phase: &'static str, message: &'static str },

    #[error("only the initiator can start a session")]
    NotInitiator,

    #[error("malformed wire data: {0}")]
    Wire(String),

    #[error("symbol budget of {budget} exhausted without decoding")]
    SymbolBudgetExceeded { budget: u64 },

    #[error("session stalled: no queued messages and no active stream")]
    Stalled,
}
