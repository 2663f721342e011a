// Copyright 2026 The tiersim Authors
// SPDX-License-Identifier: Apache-2.0

pub mod error;
pub mod memmodel;
pub mod workload;

pub use error::{Error, Result};
pub mod baselines;
pub mod config;
pub mod metrics;
pub mod migrator;
pub mod policy;
pub mod profiler;
pub mod sim;
