// Copyright 2026 The tiersim Authors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

use crate::memmodel::TierId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("unknown tier {0}")]
    UnknownTier(TierId),

    #[error("page {0} is not mapped")]
    Unmapped(u64),

    #[error("page {0} is already mapped")]
    AlreadyMapped(u64),

    #[error("insufficient space on tier {tier}: need {need} bytes, {free} free")]
    InsufficientSpace { tier: TierId, need: u64, free: u64 },

    #[error("range [{start}, {end}) is not a whole huge page")]
    Misaligned { start: u64, end: u64 },

    #[error("constraint infeasible: {0}")]
    ConstraintInfeasible(String),

    #[error("memory exhausted: {0}")]
    MemoryExhausted(String),

    #[error("invalid workload: {0}")]
    Workload(String),

    #[error("interval {index} out of range ({len} intervals)")]
    IntervalOutOfRange { index: usize, len: usize },

    #[error("invalid cost model: {0}")]
    CostModel(String),

    #[error("invalid profiler config: {0}")]
    Profiler(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("migration aborted after {completed} of {total} moves: {source}")]
    PlanAborted {
        completed: usize,
        total: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// The innermost error, looking through aborted plans.
    pub fn root(&self) -> &Error {
        match self {
            Error::PlanAborted { source, .. } => source.root(),
            other => other,
        }
    }
}
