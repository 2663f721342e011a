// Copyright 2026 The tiersim Authors
// SPDX-License-Identifier: Apache-2.0

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memmodel::{AddressSpace, CostLedger, TierId, TierTopology};
use crate::profiler::{replay_with_scans, Region, RegionSet, ScanCharge};
use crate::workload::AccessEvent;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DamonConfig {
    /// Adjacent regions merge when their results differ by less than this
    /// fraction of the largest possible result.
    pub merge_threshold: f64,
    /// Upper bound on regions; 0 derives it from the profiling budget.
    pub max_regions: usize,
}

impl Default for DamonConfig {
    fn default() -> Self {
        DamonConfig {
            merge_threshold: 0.1,
            max_regions: 0,
        }
    }
}

impl DamonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.merge_threshold) {
            return Err(Error::Config(format!(
                "damon.merge_threshold must be in [0, 1], got {}",
                self.merge_threshold
            )));
        }
        Ok(())
    }
}

/// Adaptive regions with one sampled page each: merge similar neighbours,
/// then split everything in two while under half the region limit.
#[derive(Clone, Debug)]
pub struct Damon {
    cfg: DamonConfig,
    num_scans: u32,
    scan_cost: f64,
    max_regions: usize,
    regions: RegionSet,
    rng: ChaCha8Rng,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DamonStep {
    pub merges: usize,
    pub splits: usize,
}

impl Damon {
    pub fn new(
        cfg: DamonConfig,
        num_scans: u32,
        scan_cost: f64,
        budget: f64,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        let by_budget = (budget / (num_scans as f64 * scan_cost)).floor() as usize;
        let max_regions = if cfg.max_regions == 0 {
            by_budget
        } else {
            cfg.max_regions.min(by_budget)
        };
        if max_regions == 0 {
            return Err(Error::ConstraintInfeasible(
                "budget too small to profile a single region".into(),
            ));
        }
        Ok(Damon {
            cfg,
            num_scans,
            scan_cost,
            max_regions,
            regions: RegionSet::new(0, num_scans),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn max_regions(&self) -> usize {
        self.max_regions
    }

    pub fn regions(&self) -> &RegionSet {
        &self.regions
    }

    pub fn regions_mut(&mut self) -> &mut RegionSet {
        &mut self.regions
    }

    pub fn run_interval(
        &mut self,
        space: &mut AddressSpace,
        topology: &TierTopology,
        slice: &[AccessEvent],
        ledger: &mut CostLedger,
    ) -> Result<usize> {
        if self.regions.is_empty() {
            let footprint = space.footprint_pages();
            self.regions.regions.push(Region::new(
                0,
                footprint,
                dominant(space, 0, footprint),
                topology.num_nodes(),
            ));
        }
        let mut pages = Vec::with_capacity(self.regions.len());
        for r in &mut self.regions.regions {
            r.tier = dominant(space, r.start_page, r.len_pages);
            r.fresh = false;
            let p = r.start_page + self.rng.random_range(0..r.len_pages);
            r.samples = vec![p];
            pages.push(p);
        }
        let counts = replay_with_scans(
            space,
            topology,
            slice,
            self.num_scans,
            &pages,
            ScanCharge::PerScan(self.scan_cost),
            ledger,
        )?;
        for (r, &c) in self.regions.regions.iter_mut().zip(&counts) {
            r.counts = vec![c];
            r.hi_prev = r.hi;
            r.hi = c as f64;
        }
        Ok(pages.len())
    }

    /// Merge then split; run after the smoothed hotness has been updated.
    pub fn adjust(&mut self, space: &AddressSpace) -> DamonStep {
        let merges = self.merge();
        let splits = self.split(space);
        DamonStep { merges, splits }
    }

    fn merge(&mut self) -> usize {
        let limit = self.cfg.merge_threshold * self.num_scans as f64;
        let old = std::mem::take(&mut self.regions.regions);
        let mut out: Vec<Region> = Vec::with_capacity(old.len());
        let mut merges = 0;
        for r in old {
            if let Some(last) = out.last_mut() {
                if (last.hi - r.hi).abs() < limit && last.end_page() == r.start_page {
                    absorb(last, &r);
                    merges += 1;
                    continue;
                }
            }
            out.push(r);
        }
        self.regions.regions = out;
        merges
    }

    fn split(&mut self, space: &AddressSpace) -> usize {
        if self.regions.len() >= self.max_regions / 2 {
            return 0;
        }
        let old = std::mem::take(&mut self.regions.regions);
        let mut room = self.max_regions - old.len();
        let mut out = Vec::with_capacity(old.len() * 2);
        let mut splits = 0;
        for r in old {
            if room == 0 || r.len_pages < 2 {
                out.push(r);
                continue;
            }
            let cut = self.rng.random_range(1..r.len_pages);
            let (a, b) = split_at(&r, cut, space);
            out.push(a);
            out.push(b);
            room -= 1;
            splits += 1;
        }
        self.regions.regions = out;
        splits
    }
}

fn dominant(space: &AddressSpace, start: u64, len: u64) -> TierId {
    space
        .tier_pages(start, len)
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map_or(TierId(0), |p| p.0)
}

fn absorb(a: &mut Region, b: &Region) {
    let (wa, wb) = (a.len_pages as f64, b.len_pages as f64);
    let mix = |x: f64, y: f64| (x * wa + y * wb) / (wa + wb);
    a.hi = mix(a.hi, b.hi);
    a.hi_prev = mix(a.hi_prev, b.hi_prev);
    a.whi = match (a.has_whi, b.has_whi) {
        (true, true) => mix(a.whi, b.whi),
        (false, true) => b.whi,
        _ => a.whi,
    };
    a.has_whi |= b.has_whi;
    a.len_pages += b.len_pages;
    a.samples.clear();
    a.counts.clear();
    for (x, y) in a.origin_counts.iter_mut().zip(&b.origin_counts) {
        *x += y;
    }
    a.fresh = true;
}

fn split_at(r: &Region, cut: u64, space: &AddressSpace) -> (Region, Region) {
    let mut a = r.clone();
    a.len_pages = cut;
    a.samples.clear();
    a.counts.clear();
    a.fresh = true;
    a.tier = dominant(space, a.start_page, a.len_pages);
    let mut b = a.clone();
    b.start_page = r.start_page + cut;
    b.id = b.start_page;
    b.len_pages = r.len_pages - cut;
    b.tier = dominant(space, b.start_page, b.len_pages);
    (a, b)
}
