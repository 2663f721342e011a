// Copyright 2026 The tiersim Authors
// SPDX-License-Identifier: Apache-2.0

//! Random machines, region sets and plans shared by the property and
//! acceptance suites.

#![allow(dead_code)]

use rand::seq::index;
use rand::{Rng, RngExt};
use tiersim_core::memmodel::{AddressSpace, NodeId, TierId, TierTopology, TopologySpec};
use tiersim_core::policy::Candidate;
use tiersim_core::profiler::{
    enforce_budget, merge_pass, redistribute_quota, split_pass, Region, RegionSet,
};

pub const PAGE: u64 = 4096;
pub const NUM_SCANS: u32 = 3;

/// Two-tier machine with huge pages of `huge` base pages, a random mix of
/// huge and base mappings, and random tier placement.
pub fn random_space<R: Rng>(
    rng: &mut R,
    footprint: u64,
    huge: u64,
) -> (TierTopology, AddressSpace) {
    let spec =
        TopologySpec::two_tier(footprint * PAGE, footprint * PAGE).with_page_sizes(PAGE, huge);
    let mut topo = TierTopology::build(&spec).unwrap();
    let mut space = AddressSpace::new(footprint, &topo);
    let mut p = 0;
    while p < footprint {
        let tier = TierId(rng.random_range(0..2));
        if p % huge == 0 && p + huge <= footprint && rng.random_bool(0.3) {
            space.map_huge(p, tier, &mut topo).unwrap();
            p += huge;
        } else {
            space.map_base(p, tier, &mut topo).unwrap();
            p += 1;
        }
    }
    (topo, space)
}

fn unit_heads(space: &AddressSpace, start: u64, len: u64) -> Vec<u64> {
    if space.has_huge_pages() {
        space.unit_heads(start, len)
    } else {
        (start..start + len).collect()
    }
}

/// Draws fresh per-sample counts and sets `hi` to their mean.
pub fn randomize_counts<R: Rng>(set: &mut RegionSet, rng: &mut R) {
    for r in &mut set.regions {
        r.counts = r
            .samples
            .iter()
            .map(|_| rng.random_range(0..=NUM_SCANS))
            .collect();
        r.hi_prev = r.hi;
        r.hi = r.counts.iter().map(|&c| c as f64).sum::<f64>() / r.counts.len() as f64;
        r.whi = if r.has_whi {
            0.5 * r.hi + 0.5 * r.whi
        } else {
            r.hi
        };
        r.has_whi = true;
        r.fresh = false;
    }
}

/// Partitions the footprint into unit-aligned regions with one to three
/// samples each, plus some spare budget.
pub fn random_regions<R: Rng>(rng: &mut R, space: &AddressSpace) -> RegionSet {
    let footprint = space.footprint_pages();
    let mut regions = Vec::new();
    let mut start = 0;
    while start < footprint {
        let mut end = (start + rng.random_range(1..=32)).min(footprint);
        while !space.is_unit_aligned(start, end) {
            end += 1;
        }
        let mut r = Region::new(start, end - start, space.tier_of(start).unwrap(), 1);
        let units = unit_heads(space, start, end - start);
        let q = rng.random_range(1..=units.len().min(3));
        r.samples = index::sample(rng, units.len(), q)
            .into_iter()
            .map(|i| units[i])
            .collect();
        r.counts = vec![0; q];
        r.quota = q as u64;
        regions.push(r);
        start = end;
    }
    let quota: u64 = regions.iter().map(|r| r.quota).sum();
    let spare = rng.random_range(0..=8);
    let mut set = RegionSet {
        regions,
        spare,
        num_ps: quota + spare,
        num_scans: NUM_SCANS,
    };
    randomize_counts(&mut set, rng);
    set
}

/// One randomized profiler step: new counts, merge, split, redistribute or
/// budget enforcement. Returns the step name and whether it dropped regions.
pub fn region_step<R: Rng>(
    rng: &mut R,
    set: &mut RegionSet,
    space: &AddressSpace,
    topo: &TierTopology,
) -> (&'static str, bool) {
    match rng.random_range(0..5) {
        0 => {
            randomize_counts(set, rng);
            ("counts", false)
        }
        1 => {
            merge_pass(set, rng.random_range(0.0..2.0));
            ("merge", false)
        }
        2 => {
            split_pass(set, rng.random_range(0.0..2.0), space, rng);
            ("split", false)
        }
        3 => {
            redistribute_quota(set, 5, space, rng);
            ("redistribute", false)
        }
        _ => {
            let target = rng
                .random_range(set.len() as u64 / 2..=set.len() as u64 + 4)
                .max(1);
            // An infeasible target may still have dropped regions on the way.
            match enforce_budget(set, target, 1.0, 2.0, space, topo) {
                Ok(out) => ("enforce", out.dropped > 0),
                Err(_) => ("enforce-infeasible", true),
            }
        }
    }
}

pub fn covered_pages(set: &RegionSet) -> u64 {
    set.regions.iter().map(|r| r.len_pages).sum()
}

/// Candidates for `n` regions of `1..=max_len` pages with whi drawn from a
/// grid of step 0.01, some duplicated to exercise id tie-breaks.
pub fn grid_candidates<R: Rng>(
    rng: &mut R,
    n: usize,
    max_len: u64,
    tiers: &[TierId],
) -> Vec<Candidate> {
    let mut start = 0;
    (0..n)
        .map(|_| {
            let len = rng.random_range(1..=max_len);
            let tier = tiers[rng.random_range(0..tiers.len())];
            let c = Candidate {
                id: start,
                start_page: start,
                len_pages: len,
                whi: rng.random_range(0..=300u32) as f64 / 100.0,
                tier,
                pages: vec![(tier, len)],
                node: NodeId(0),
            };
            start += len;
            c
        })
        .collect()
}

/// A four-tier, two-node machine filled to a random level with mixed huge
/// and base mappings, carved into regions with random hotness and origin.
pub struct PlanCase {
    pub topo: TierTopology,
    pub space: AddressSpace,
    pub candidates: Vec<Candidate>,
    pub n_bytes: u64,
}

pub fn random_plan_case<R: Rng>(rng: &mut R) -> PlanCase {
    let huge = 8;
    let caps: [u64; 4] = std::array::from_fn(|_| rng.random_range(4..=16) * huge * PAGE);
    let spec = TopologySpec::four_tier(caps).with_page_sizes(PAGE, huge);
    let mut topo = TierTopology::build(&spec).unwrap();
    let total_units = caps.iter().sum::<u64>() / PAGE / huge;
    let footprint = rng.random_range(total_units / 4..=total_units * 9 / 10) * huge;
    let mut space = AddressSpace::new(footprint, &topo);
    let mut p = 0;
    while p < footprint {
        let huge_map = p % huge == 0 && rng.random_bool(0.3);
        let need = if huge_map { huge * PAGE } else { PAGE };
        let fits: Vec<TierId> = topo
            .tier_ids()
            .filter(|&t| topo.free_bytes(t).unwrap() >= need)
            .collect();
        let tier = fits[rng.random_range(0..fits.len())];
        if huge_map {
            space.map_huge(p, tier, &mut topo).unwrap();
            p += huge;
        } else {
            space.map_base(p, tier, &mut topo).unwrap();
            p += 1;
        }
    }
    let mut candidates = Vec::new();
    let mut start = 0;
    while start < footprint {
        let mut end = (start + rng.random_range(1..=24)).min(footprint);
        while !space.is_unit_aligned(start, end) {
            end += 1;
        }
        let mut r = Region::new(start, end - start, space.tier_of(start).unwrap(), 2);
        r.whi = rng.random_range(0.0..=NUM_SCANS as f64);
        r.has_whi = true;
        r.origin_counts = vec![rng.random_range(0..10), rng.random_range(0..10)];
        candidates.push(Candidate::from_region(&r, &space));
        start = end;
    }
    let n_bytes = rng.random_range(1..=footprint / 2) * PAGE;
    PlanCase {
        topo,
        space,
        candidates,
        n_bytes,
    }
}
