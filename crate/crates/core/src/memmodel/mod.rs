// Copyright 2026 The tiersim Authors
// SPDX-License-Identifier: Apache-2.0

//! Tier topology, virtual address space and the abstract cost model.

pub mod bytesize;
mod cost;
mod space;
mod topology;

pub use cost::{CostLedger, CostModel};
pub use space::{AddressSpace, PagePlacement};
pub use topology::{
    NodeId, TierDesc, TierId, TierSpec, TierTopology, TopologySpec, DEFAULT_FOUR_TIER_COSTS,
};
