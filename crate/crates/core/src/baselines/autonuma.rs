// Copyright 2026 The tiersim Authors
// SPDX-License-Identifier: Apache-2.0

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memmodel::{AddressSpace, CostLedger, TierTopology};
use crate::policy::{self, build_histogram, Candidate, MigrationPlan, PlanState};
use crate::profiler::{replay_with_scans, Region, RegionSet, ScanCharge};
use crate::workload::AccessEvent;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutoNumaConfig {
    /// Scan window as a fraction of the footprint.
    pub window_fraction: f64,
    /// Smallest smoothed fault count that marks a page hot.
    pub hot_threshold: f64,
}

impl Default for AutoNumaConfig {
    fn default() -> Self {
        AutoNumaConfig {
            window_fraction: 1.0 / 16.0,
            hot_threshold: 1.5,
        }
    }
}

impl AutoNumaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_fraction > 0.0 && self.window_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "autonuma.window_fraction must be in (0, 1], got {}",
                self.window_fraction
            )));
        }
        if self.hot_threshold.is_nan() || self.hot_threshold < 0.0 {
            return Err(Error::Config(
                "autonuma.hot_threshold must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Hint-fault sampling over one random window per interval. Each page is
/// its own region; pages outside the window keep last interval's view.
#[derive(Clone, Debug)]
pub struct AutoNuma {
    cfg: AutoNumaConfig,
    num_scans: u32,
    fault_cost: f64,
    window_pages: u64,
    regions: RegionSet,
    rng: ChaCha8Rng,
}

impl AutoNuma {
    /// `budget` caps the window so that faulting on every page of it in
    /// every scan stays within the profiling budget.
    pub fn new(
        cfg: AutoNumaConfig,
        footprint_pages: u64,
        num_scans: u32,
        scan_cost: f64,
        budget: f64,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        let want = ((footprint_pages as f64 * cfg.window_fraction).round() as u64).max(1);
        let cap = (budget / (num_scans as f64 * scan_cost)).floor() as u64;
        if cap == 0 {
            return Err(Error::ConstraintInfeasible(
                "budget too small to scan a single page".into(),
            ));
        }
        Ok(AutoNuma {
            cfg,
            num_scans,
            fault_cost: scan_cost,
            window_pages: want.min(cap).min(footprint_pages),
            regions: RegionSet::new(0, num_scans),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn window_pages(&self) -> u64 {
        self.window_pages
    }

    pub fn regions(&self) -> &RegionSet {
        &self.regions
    }

    pub fn regions_mut(&mut self) -> &mut RegionSet {
        &mut self.regions
    }

    pub fn hot_threshold(&self) -> f64 {
        self.cfg.hot_threshold
    }

    /// Replays `slice` with the window armed; returns the window start.
    pub fn run_interval(
        &mut self,
        space: &mut AddressSpace,
        topology: &TierTopology,
        slice: &[AccessEvent],
        ledger: &mut CostLedger,
    ) -> Result<u64> {
        let footprint = space.footprint_pages();
        if self.regions.is_empty() {
            for p in 0..footprint {
                let mut r = Region::new(p, 1, space.tier_of(p)?, topology.num_nodes());
                r.skipped = true;
                self.regions.regions.push(r);
            }
        }
        let start = self.rng.random_range(0..=footprint - self.window_pages);
        let pages: Vec<u64> = (start..start + self.window_pages).collect();
        for r in &mut self.regions.regions {
            r.tier = space.tier_of(r.start_page)?;
            r.skipped = !(start..start + self.window_pages).contains(&r.start_page);
        }
        let counts = replay_with_scans(
            space,
            topology,
            slice,
            self.num_scans,
            &pages,
            ScanCharge::PerHit(self.fault_cost),
            ledger,
        )?;
        for (&p, &c) in pages.iter().zip(&counts) {
            let r = &mut self.regions.regions[p as usize];
            r.hi_prev = r.hi;
            r.hi = c as f64;
        }
        Ok(start)
    }
}

/// Moves each hot page one level up the global hierarchy, hottest first,
/// demoting colder pages when the next level is full.
pub fn autonuma_policy_step(
    candidates: &[Candidate],
    topology: &TierTopology,
    hot_threshold: f64,
    bucket_width: f64,
    num_scans: u32,
    n_bytes: u64,
) -> MigrationPlan {
    let hist = build_histogram(candidates, bucket_width, num_scans);
    let mut state = PlanState::new(topology);
    let mut plan = MigrationPlan::default();
    let order = topology.global_order();
    let mut hot: Vec<&Candidate> = candidates
        .iter()
        .filter(|c| c.whi >= hot_threshold)
        .collect();
    hot.sort_by(|a, b| b.whi.total_cmp(&a.whi).then(a.id.cmp(&b.id)));
    for c in hot {
        if state.locked.contains(&c.id) {
            continue;
        }
        let here = state.current_tier(c);
        let Some(rank) = order.iter().position(|&t| t == here) else {
            continue;
        };
        if rank == 0 {
            continue;
        }
        let dst = order[rank - 1];
        let bytes = c.pages_outside(dst) * state.page_bytes;
        if plan.promoted_bytes + bytes > n_bytes {
            continue;
        }
        policy::try_promote(
            c, dst, bytes, candidates, &hist, topology, &mut state, &mut plan,
        );
    }
    plan
}
