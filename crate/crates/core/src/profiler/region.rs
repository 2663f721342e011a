// Copyright 2026 The tiersim Authors
// SPDX-License-Identifier: Apache-2.0

use rand::seq::index;
use rand::Rng;

use crate::memmodel::{AddressSpace, NodeId, TierId};

/// A contiguous range of virtual pages profiled as one unit.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    /// Equal to the start page at creation; stable while the start is.
    pub id: u64,
    pub start_page: u64,
    pub len_pages: u64,
    pub tier: TierId,
    /// Heads of the sampled PTE units.
    pub samples: Vec<u64>,
    /// Per-sample scan hits from the most recent profiling.
    pub counts: Vec<u32>,
    pub quota: u64,
    pub hi: f64,
    pub hi_prev: f64,
    pub whi: f64,
    /// False until the first EMA update, which takes hi as is.
    pub has_whi: bool,
    pub origin_counts: Vec<u64>,
    pub(crate) origin_carry: u64,
    /// Created by a merge or split this interval.
    pub fresh: bool,
    /// Slowest-tier region with no counter sample this interval.
    pub skipped: bool,
}

impl Region {
    pub fn new(start_page: u64, len_pages: u64, tier: TierId, num_nodes: usize) -> Self {
        Region {
            id: start_page,
            start_page,
            len_pages,
            tier,
            samples: Vec::new(),
            counts: Vec::new(),
            quota: 0,
            hi: 0.0,
            hi_prev: 0.0,
            whi: 0.0,
            has_whi: false,
            origin_counts: vec![0; num_nodes],
            origin_carry: 0,
            fresh: false,
            skipped: false,
        }
    }

    pub fn end_page(&self) -> u64 {
        self.start_page + self.len_pages
    }

    pub fn contains(&self, vpage: u64) -> bool {
        (self.start_page..self.end_page()).contains(&vpage)
    }

    pub fn bytes(&self, base_page_bytes: u64) -> u64 {
        self.len_pages * base_page_bytes
    }

    /// Node with the most captured accesses; ties and no data go to the
    /// lower node id.
    pub fn dominant_node(&self) -> NodeId {
        let mut best = 0;
        for (i, &c) in self.origin_counts.iter().enumerate() {
            if c > self.origin_counts[best] {
                best = i;
            }
        }
        NodeId(best)
    }

    /// Replaces the sample set with `quota` distinct units, keeping `keep`
    /// (with its count) first when given.
    pub(crate) fn resample<R: Rng>(
        &mut self,
        space: &AddressSpace,
        rng: &mut R,
        keep: Option<u64>,
    ) {
        let units = unit_heads(space, self.start_page, self.len_pages);
        let k = (self.quota as usize).min(units.len());
        let mut picked: Vec<u64> = Vec::with_capacity(k);
        if let Some(p) = keep {
            if let Ok((head, _)) = space.unit_of(p) {
                if self.contains(head) && k > 0 {
                    picked.push(head);
                }
            }
        }
        if picked.len() < k {
            let need = k - picked.len();
            let pool: Vec<u64> = units.into_iter().filter(|u| !picked.contains(u)).collect();
            for i in index::sample(rng, pool.len(), need.min(pool.len())).into_iter() {
                picked.push(pool[i]);
            }
        }
        self.samples = picked;
        self.counts = vec![0; self.samples.len()];
    }

    /// Adds `extra` new random samples not already present.
    pub(crate) fn add_samples<R: Rng>(
        &mut self,
        space: &AddressSpace,
        rng: &mut R,
        extra: usize,
    ) -> usize {
        if extra == 0 {
            return 0;
        }
        let pool: Vec<u64> = unit_heads(space, self.start_page, self.len_pages)
            .into_iter()
            .filter(|u| !self.samples.contains(u))
            .collect();
        let n = extra.min(pool.len());
        for i in index::sample(rng, pool.len(), n).into_iter() {
            self.samples.push(pool[i]);
            self.counts.push(0);
        }
        n
    }

    pub(crate) fn capacity(&self, space: &AddressSpace) -> u64 {
        space.unit_count(self.start_page, self.len_pages)
    }

    pub(crate) fn mean_count(&self) -> Option<f64> {
        (!self.counts.is_empty())
            .then(|| self.counts.iter().map(|&c| c as f64).sum::<f64>() / self.counts.len() as f64)
    }
}

pub(crate) fn unit_heads(space: &AddressSpace, start: u64, len: u64) -> Vec<u64> {
    if space.has_huge_pages() {
        space.unit_heads(start, len)
    } else {
        (start..start + len).collect()
    }
}

/// All profiled regions, sorted by start page, plus the unassigned part of
/// the sample budget.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionSet {
    pub regions: Vec<Region>,
    /// Samples not assigned to any region; `Σ quota + spare == num_ps`.
    pub spare: u64,
    pub num_ps: u64,
    pub num_scans: u32,
}

impl RegionSet {
    pub fn new(num_ps: u64, num_scans: u32) -> Self {
        RegionSet {
            regions: Vec::new(),
            spare: num_ps,
            num_ps,
            num_scans,
        }
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn total_quota(&self) -> u64 {
        self.regions.iter().map(|r| r.quota).sum()
    }

    pub fn get(&self, id: u64) -> Option<&Region> {
        self.index_of(id).map(|i| &self.regions[i])
    }

    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.regions.iter().position(|r| r.id == id)
    }

    /// Index of the region containing `vpage`.
    pub fn find(&self, vpage: u64) -> Option<usize> {
        let i = self.regions.partition_point(|r| r.start_page <= vpage);
        (i > 0 && self.regions[i - 1].contains(vpage)).then(|| i - 1)
    }

    pub fn sort(&mut self) {
        self.regions.sort_by_key(|r| r.start_page);
    }

    /// Per-page region index (`u32::MAX` where no region covers the page).
    pub(crate) fn page_index(&self, footprint: u64) -> Vec<u32> {
        let mut map = vec![u32::MAX; footprint as usize];
        for (i, r) in self.regions.iter().enumerate() {
            let end = r.end_page().min(footprint);
            for p in r.start_page..end {
                map[p as usize] = i as u32;
            }
        }
        map
    }

    /// Checks every structural invariant; returns the first violation.
    pub fn check_invariants(&self, space: &AddressSpace) -> Result<(), String> {
        if self.total_quota() + self.spare != self.num_ps {
            return Err(format!(
                "sample conservation: quotas {} + spare {} != {}",
                self.total_quota(),
                self.spare,
                self.num_ps
            ));
        }
        let max_hi = self.num_scans as f64 + 1e-9;
        for (i, r) in self.regions.iter().enumerate() {
            if r.len_pages == 0 {
                return Err(format!("region {} is empty", r.id));
            }
            if i > 0 && self.regions[i - 1].end_page() > r.start_page {
                return Err(format!(
                    "regions {} and {} overlap",
                    self.regions[i - 1].id,
                    r.id
                ));
            }
            if r.quota < 1 || r.samples.len() as u64 != r.quota || r.counts.len() != r.samples.len()
            {
                return Err(format!(
                    "region {} has quota {} with {} samples",
                    r.id,
                    r.quota,
                    r.samples.len()
                ));
            }
            let mut seen = r.samples.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != r.samples.len() {
                return Err(format!("region {} samples a unit twice", r.id));
            }
            if let Some(s) = r.samples.iter().find(|&&s| !r.contains(s)) {
                return Err(format!("region {} samples page {} outside itself", r.id, s));
            }
            if !(0.0..=max_hi).contains(&r.hi) || !(0.0..=max_hi).contains(&r.whi) {
                return Err(format!(
                    "region {} hi {} whi {} out of bounds",
                    r.id, r.hi, r.whi
                ));
            }
            if !space.is_unit_aligned(r.start_page, r.end_page()) {
                return Err(format!("region {} bisects a huge page", r.id));
            }
        }
        Ok(())
    }
}
