// Copyright 2026 The tiersim Authors
// SPDX-License-Identifier: Apache-2.0

//! Comparison systems run under the same simulator contract as MTM.

mod autonuma;
mod damon;
mod thermostat;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use autonuma::{autonuma_policy_step, AutoNuma, AutoNumaConfig};
pub use damon::{Damon, DamonConfig, DamonStep};
pub use thermostat::{Thermostat, ThermostatConfig};

use crate::error::{Error, Result};
use crate::memmodel::{AddressSpace, NodeId, TierId, TierTopology};
use crate::profiler::ProfilerConfig;

/// Which system manages the tiers.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "kebab-case")]
pub enum System {
    #[default]
    Mtm,
    MtmNoPebs,
    FirstTouch,
    #[serde(alias = "tiered-autonuma")]
    Autonuma,
    Thermostat,
    Damon,
}

impl System {
    pub const ALL: [System; 6] = [
        System::Mtm,
        System::MtmNoPebs,
        System::FirstTouch,
        System::Autonuma,
        System::Thermostat,
        System::Damon,
    ];

    pub fn name(self) -> &'static str {
        match self {
            System::Mtm => "mtm",
            System::MtmNoPebs => "mtm-no-pebs",
            System::FirstTouch => "first-touch",
            System::Autonuma => "autonuma",
            System::Thermostat => "thermostat",
            System::Damon => "damon",
        }
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for System {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        match norm.as_str() {
            "mtm" => Ok(System::Mtm),
            "mtm-no-pebs" => Ok(System::MtmNoPebs),
            "first-touch" => Ok(System::FirstTouch),
            "autonuma" | "tiered-autonuma" => Ok(System::Autonuma),
            "thermostat" | "thermostat-prof" => Ok(System::Thermostat),
            "damon" | "damon-prof" => Ok(System::Damon),
            _ => Err(Error::Config(format!(
                "unknown system `{s}`; expected one of mtm, mtm-no-pebs, first-touch, autonuma, thermostat, damon"
            ))),
        }
    }
}

/// MTM with counter assistance turned off: the slowest tier is profiled
/// like every other tier.
pub fn mtm_no_pebs_variant(cfg: &ProfilerConfig) -> ProfilerConfig {
    ProfilerConfig {
        pebs_assist: false,
        ..cfg.clone()
    }
}

/// Tiers local to `node` (cheapest from it among all nodes) by cost, then
/// the remote ones by cost: local fast, local slow, remote fast, remote slow.
pub fn first_touch_order(topology: &TierTopology, node: NodeId) -> Vec<TierId> {
    let view = topology.view(node);
    let is_local = |t: TierId| {
        let mine = topology.access_cost(t, node);
        (0..topology.num_nodes()).all(|n| mine <= topology.access_cost(t, NodeId(n)))
    };
    let mut order: Vec<TierId> = view.iter().copied().filter(|&t| is_local(t)).collect();
    order.extend(view.iter().copied().filter(|&t| !is_local(t)));
    order
}

/// Maps the unit holding `vpage` on the first tier in `order` with room.
/// A huge page is used when `huge` is set and the aligned unit fits the
/// footprint.
pub fn first_touch_alloc(
    topology: &mut TierTopology,
    space: &mut AddressSpace,
    vpage: u64,
    order: &[TierId],
    huge: bool,
) -> Result<TierId> {
    let hp = space.huge_page_pages();
    let head = vpage - vpage % hp;
    let as_huge = huge
        && head + hp <= space.footprint_pages()
        && (head..head + hp).all(|p| !space.is_mapped(p));
    let bytes = if as_huge { hp } else { 1 } * space.base_page_bytes();
    for &t in order {
        if topology.free_bytes(t)? >= bytes {
            if as_huge {
                space.map_huge(head, t, topology)?;
            } else {
                space.map_base(vpage, t, topology)?;
            }
            return Ok(t);
        }
    }
    Err(Error::MemoryExhausted(format!(
        "no tier can hold page {vpage}"
    )))
}

/// Touches every page once in address order from `node`, as an
/// initialisation pass over the working set would.
pub fn place_sequential(
    topology: &mut TierTopology,
    space: &mut AddressSpace,
    node: NodeId,
    order: Option<&[TierId]>,
    huge: bool,
) -> Result<()> {
    let order = match order {
        Some(o) => o.to_vec(),
        None => first_touch_order(topology, node),
    };
    for p in 0..space.footprint_pages() {
        if !space.is_mapped(p) {
            first_touch_alloc(topology, space, p, &order, huge)?;
        }
    }
    Ok(())
}
