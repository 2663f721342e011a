// Copyright 2026 The tiersim Authors
// SPDX-License-Identifier: Apache-2.0

use rand::seq::index;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memmodel::{AddressSpace, CostLedger, TierTopology};
use crate::profiler::{replay_with_scans, Region, RegionSet, ScanCharge};
use crate::workload::AccessEvent;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermostatConfig {
    /// Pages per fixed region; 0 uses the huge page size.
    pub region_pages: u64,
    /// Protection-fault cost relative to one page table scan.
    pub cost_multiplier: f64,
}

impl Default for ThermostatConfig {
    fn default() -> Self {
        ThermostatConfig {
            region_pages: 0,
            cost_multiplier: 2.5,
        }
    }
}

impl ThermostatConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cost_multiplier.is_nan() || self.cost_multiplier <= 0.0 {
            return Err(Error::Config(
                "thermostat.cost_multiplier must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One random page per fixed-size region. When the budget cannot cover
/// every region, a random subset is profiled each interval.
#[derive(Clone, Debug)]
pub struct Thermostat {
    num_scans: u32,
    scan_charge: f64,
    per_interval: usize,
    region_pages: u64,
    regions: RegionSet,
    rng: ChaCha8Rng,
}

impl Thermostat {
    pub fn new(
        cfg: ThermostatConfig,
        num_scans: u32,
        scan_cost: f64,
        budget: f64,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        let scan_charge = scan_cost * cfg.cost_multiplier;
        let per_interval = (budget / (scan_charge * num_scans as f64)).floor() as usize;
        if per_interval == 0 {
            return Err(Error::ConstraintInfeasible(
                "budget too small to profile a single region".into(),
            ));
        }
        Ok(Thermostat {
            num_scans,
            scan_charge,
            per_interval,
            region_pages: cfg.region_pages,
            regions: RegionSet::new(0, num_scans),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Regions profiled per interval.
    pub fn per_interval(&self) -> usize {
        self.per_interval
    }

    pub fn regions(&self) -> &RegionSet {
        &self.regions
    }

    pub fn regions_mut(&mut self) -> &mut RegionSet {
        &mut self.regions
    }

    fn init(&mut self, space: &AddressSpace, topology: &TierTopology) -> Result<()> {
        let size = if self.region_pages == 0 {
            space.huge_page_pages()
        } else {
            self.region_pages
        }
        .max(1);
        let footprint = space.footprint_pages();
        let mut start = 0;
        while start < footprint {
            let len = size.min(footprint - start);
            self.regions.regions.push(Region::new(
                start,
                len,
                space.tier_of(start)?,
                topology.num_nodes(),
            ));
            start += len;
        }
        Ok(())
    }

    pub fn run_interval(
        &mut self,
        space: &mut AddressSpace,
        topology: &TierTopology,
        slice: &[AccessEvent],
        ledger: &mut CostLedger,
    ) -> Result<usize> {
        if self.regions.is_empty() {
            self.init(space, topology)?;
        }
        let n = self.regions.len();
        let chosen: Vec<usize> = if self.per_interval >= n {
            (0..n).collect()
        } else {
            let mut v = index::sample(&mut self.rng, n, self.per_interval).into_vec();
            v.sort_unstable();
            v
        };
        for r in &mut self.regions.regions {
            r.skipped = true;
            r.tier = space.tier_of(r.start_page)?;
        }
        let mut pages = Vec::with_capacity(chosen.len());
        for &i in &chosen {
            let r = &mut self.regions.regions[i];
            r.skipped = false;
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
            ScanCharge::PerScan(self.scan_charge),
            ledger,
        )?;
        for (&i, &c) in chosen.iter().zip(&counts) {
            let r = &mut self.regions.regions[i];
            r.counts = vec![c];
            r.hi_prev = r.hi;
            r.hi = c as f64;
        }
        Ok(chosen.len())
    }
}
