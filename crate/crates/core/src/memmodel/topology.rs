// Copyright 2026 The tiersim Authors
// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memmodel::bytesize;

/// Index of a memory tier. Tier ids are dense, starting at 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TierId(pub usize);

impl fmt::Display for TierId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Index of an accessor node (a socket / processor).
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One tier as described in a configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TierDesc {
    pub id: usize,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(deserialize_with = "bytesize::deserialize")]
    pub capacity_bytes: u64,
    /// Access cost per node. A single value applies to every node.
    pub access_cost: Vec<f64>,
}

/// Structured topology description accepted by [`TierTopology::build`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    #[serde(default = "default_base_page_bytes")]
    pub base_page_bytes: u64,
    #[serde(default = "default_huge_page_pages")]
    pub huge_page_pages: u64,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    pub tiers: Vec<TierDesc>,
    /// Optional explicit per-node tier order, fastest first. Derived from
    /// access costs when absent.
    #[serde(default)]
    pub views: Option<Vec<Vec<usize>>>,
}

fn default_base_page_bytes() -> u64 {
    4096
}

fn default_huge_page_pages() -> u64 {
    512
}

fn default_nodes() -> usize {
    1
}

/// Default per-tier access costs as seen from node 0 of the four-tier shape.
pub const DEFAULT_FOUR_TIER_COSTS: [f64; 4] = [1.0, 1.8, 3.0, 5.4];

impl TopologySpec {
    /// Two-socket shape with local DRAM, remote DRAM, local PM and remote PM
    /// (tiers 0..4 from node 0's perspective). Node 1 sees the DRAMs and the
    /// PMs swapped.
    pub fn four_tier(capacities: [u64; 4]) -> Self {
        let [ld, rd, lp, rp] = DEFAULT_FOUR_TIER_COSTS;
        let node1 = [rd, ld, rp, lp];
        let names = ["dram0", "dram1", "pm0", "pm1"];
        let tiers = (0..4)
            .map(|i| TierDesc {
                id: i,
                name: Some(names[i].to_string()),
                capacity_bytes: capacities[i],
                access_cost: vec![DEFAULT_FOUR_TIER_COSTS[i], node1[i]],
            })
            .collect();
        TopologySpec {
            base_page_bytes: default_base_page_bytes(),
            huge_page_pages: default_huge_page_pages(),
            nodes: 2,
            tiers,
            views: None,
        }
    }

    /// Single-socket fast/slow pair.
    pub fn two_tier(fast_bytes: u64, slow_bytes: u64) -> Self {
        TopologySpec {
            base_page_bytes: default_base_page_bytes(),
            huge_page_pages: default_huge_page_pages(),
            nodes: 1,
            tiers: vec![
                TierDesc {
                    id: 0,
                    name: Some("dram".into()),
                    capacity_bytes: fast_bytes,
                    access_cost: vec![1.0],
                },
                TierDesc {
                    id: 1,
                    name: Some("pm".into()),
                    capacity_bytes: slow_bytes,
                    access_cost: vec![3.0],
                },
            ],
            views: None,
        }
    }

    pub fn with_page_sizes(mut self, base_page_bytes: u64, huge_page_pages: u64) -> Self {
        self.base_page_bytes = base_page_bytes;
        self.huge_page_pages = huge_page_pages;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TierSpec {
    pub id: TierId,
    pub name: String,
    pub capacity_bytes: u64,
    /// Cost of one page access, indexed by node.
    pub access_cost: Vec<f64>,
    free_bytes: u64,
}

impl TierSpec {
    pub fn free_bytes(&self) -> u64 {
        self.free_bytes
    }

    fn mean_cost(&self) -> f64 {
        self.access_cost.iter().sum::<f64>() / self.access_cost.len() as f64
    }
}

/// Tiers, accessor nodes, and each node's fastest-to-slowest ordering.
#[derive(Clone, Debug, PartialEq)]
pub struct TierTopology {
    tiers: Vec<TierSpec>,
    views: Vec<Vec<TierId>>,
    global_order: Vec<TierId>,
    slowest: TierId,
    base_page_bytes: u64,
    huge_page_pages: u64,
}

impl TierTopology {
    pub fn build(spec: &TopologySpec) -> Result<Self> {
        let bad = |msg: String| Err(Error::Topology(msg));
        if spec.tiers.len() < 2 {
            return bad(format!("need at least 2 tiers, got {}", spec.tiers.len()));
        }
        if spec.nodes == 0 {
            return bad("need at least one accessor node".into());
        }
        if spec.base_page_bytes == 0 || spec.huge_page_pages == 0 {
            return bad("page sizes must be positive".into());
        }
        let n = spec.tiers.len();
        let mut slots: Vec<Option<TierSpec>> = vec![None; n];
        for desc in &spec.tiers {
            if desc.id >= n {
                return bad(format!(
                    "tier id {} out of range; ids must be 0..{}",
                    desc.id, n
                ));
            }
            if slots[desc.id].is_some() {
                return bad(format!("duplicate tier id {}", desc.id));
            }
            if desc.capacity_bytes == 0 {
                return bad(format!("tier {} has zero capacity", desc.id));
            }
            if desc.capacity_bytes % spec.base_page_bytes != 0 {
                return bad(format!(
                    "tier {} capacity {} is not a multiple of the base page size {}",
                    desc.id, desc.capacity_bytes, spec.base_page_bytes
                ));
            }
            let access_cost = match desc.access_cost.len() {
                1 => vec![desc.access_cost[0]; spec.nodes],
                l if l == spec.nodes => desc.access_cost.clone(),
                l => {
                    return bad(format!(
                        "tier {} lists {} access costs for {} nodes",
                        desc.id, l, spec.nodes
                    ))
                }
            };
            if access_cost.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
                return bad(format!("tier {} access costs must be positive", desc.id));
            }
            slots[desc.id] = Some(TierSpec {
                id: TierId(desc.id),
                name: desc
                    .name
                    .clone()
                    .unwrap_or_else(|| format!("tier{}", desc.id)),
                capacity_bytes: desc.capacity_bytes,
                access_cost,
                free_bytes: desc.capacity_bytes,
            });
        }
        let tiers: Vec<TierSpec> = slots
            .into_iter()
            .map(|s| s.expect("dense ids checked"))
            .collect();

        let views = match &spec.views {
            Some(views) => {
                if views.len() != spec.nodes {
                    return bad(format!(
                        "{} views given for {} nodes",
                        views.len(),
                        spec.nodes
                    ));
                }
                let mut out = Vec::with_capacity(views.len());
                for (node, view) in views.iter().enumerate() {
                    let mut seen = vec![false; n];
                    for &t in view {
                        if t >= n || seen[t] {
                            return bad(format!(
                                "view of node {node} is not a permutation of tier ids"
                            ));
                        }
                        seen[t] = true;
                    }
                    if view.len() != n {
                        return bad(format!(
                            "view of node {node} is not a permutation of tier ids"
                        ));
                    }
                    out.push(view.iter().map(|&t| TierId(t)).collect());
                }
                out
            }
            None => (0..spec.nodes)
                .map(|node| {
                    let mut ids: Vec<TierId> = tiers.iter().map(|t| t.id).collect();
                    ids.sort_by(|a, b| {
                        tiers[a.0].access_cost[node]
                            .total_cmp(&tiers[b.0].access_cost[node])
                            .then(a.cmp(b))
                    });
                    ids
                })
                .collect(),
        };

        // Largest mean cost; ties go to the larger tier, then the higher id.
        let slowest = tiers
            .iter()
            .max_by(|a, b| {
                a.mean_cost()
                    .total_cmp(&b.mean_cost())
                    .then(a.capacity_bytes.cmp(&b.capacity_bytes))
                    .then(a.id.cmp(&b.id))
            })
            .map(|t| t.id)
            .expect("at least two tiers");

        let mut global_order: Vec<TierId> = tiers.iter().map(|t| t.id).collect();
        global_order.sort_by(|a, b| {
            let (ta, tb) = (&tiers[a.0], &tiers[b.0]);
            ta.mean_cost()
                .total_cmp(&tb.mean_cost())
                .then(ta.capacity_bytes.cmp(&tb.capacity_bytes))
                .then(a.cmp(b))
        });

        Ok(TierTopology {
            tiers,
            views,
            global_order,
            slowest,
            base_page_bytes: spec.base_page_bytes,
            huge_page_pages: spec.huge_page_pages,
        })
    }

    pub fn num_tiers(&self) -> usize {
        self.tiers.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.views.len()
    }

    pub fn tiers(&self) -> &[TierSpec] {
        &self.tiers
    }

    pub fn tier(&self, id: TierId) -> Result<&TierSpec> {
        self.tiers.get(id.0).ok_or(Error::UnknownTier(id))
    }

    pub fn tier_ids(&self) -> impl Iterator<Item = TierId> + '_ {
        self.tiers.iter().map(|t| t.id)
    }

    /// Tiers ordered fastest to slowest from `node`'s perspective.
    pub fn view(&self, node: NodeId) -> &[TierId] {
        &self.views[node.0.min(self.views.len() - 1)]
    }

    /// Machine-wide hierarchy by mean access cost, fastest first.
    pub fn global_order(&self) -> &[TierId] {
        &self.global_order
    }

    pub fn slowest(&self) -> TierId {
        self.slowest
    }

    pub fn access_cost(&self, tier: TierId, node: NodeId) -> f64 {
        let costs = &self.tiers[tier.0].access_cost;
        costs[node.0.min(costs.len() - 1)]
    }

    /// Cheapest access cost anywhere in the machine.
    pub fn min_access_cost(&self) -> f64 {
        self.tiers
            .iter()
            .flat_map(|t| t.access_cost.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn free_bytes(&self, tier: TierId) -> Result<u64> {
        self.tier(tier).map(|t| t.free_bytes)
    }

    pub fn free_bytes_all(&self) -> Vec<u64> {
        self.tiers.iter().map(|t| t.free_bytes).collect()
    }

    pub fn total_capacity(&self) -> u64 {
        self.tiers.iter().map(|t| t.capacity_bytes).sum()
    }

    pub fn base_page_bytes(&self) -> u64 {
        self.base_page_bytes
    }

    pub fn huge_page_pages(&self) -> u64 {
        self.huge_page_pages
    }

    pub(crate) fn reserve(&mut self, tier: TierId, bytes: u64) -> Result<()> {
        let t = self.tiers.get_mut(tier.0).ok_or(Error::UnknownTier(tier))?;
        if t.free_bytes < bytes {
            return Err(Error::InsufficientSpace {
                tier,
                need: bytes,
                free: t.free_bytes,
            });
        }
        t.free_bytes -= bytes;
        Ok(())
    }

    pub(crate) fn release(&mut self, tier: TierId, bytes: u64) {
        let t = &mut self.tiers[tier.0];
        t.free_bytes = (t.free_bytes + bytes).min(t.capacity_bytes);
    }
}
