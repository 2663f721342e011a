// Copyright 2026 The tiersim Authors
// SPDX-License-Identifier: Apache-2.0

//! Region formation, counter-assisted selection in the slowest tier, and
//! multi-scan profiling of one interval.

use rand::Rng;

use crate::error::{Error, Result};
use crate::memmodel::{AddressSpace, CostLedger, TierId, TierTopology};
use crate::profiler::region::{Region, RegionSet};
use crate::profiler::ProfilerConfig;
use crate::workload::AccessEvent;

/// Maximal same-tier runs of `[start, end)` as `(start, len, tier)`.
pub(crate) fn tier_runs(space: &AddressSpace, start: u64, end: u64) -> Vec<(u64, u64, TierId)> {
    let mut runs = Vec::new();
    let mut p = start;
    while p < end {
        let Ok(t) = space.tier_of(p) else {
            p += 1;
            continue;
        };
        let s = p;
        while p < end && space.tier_of(p).ok() == Some(t) {
            p += 1;
        }
        runs.push((s, p - s, t));
    }
    runs
}

/// Pages picked by the access-sampling counters: every `period`-th access
/// landing in the slowest tier during the first `window_fraction` of the
/// slice.
pub fn counter_samples(
    space: &AddressSpace,
    topology: &TierTopology,
    slice: &[AccessEvent],
    window_fraction: f64,
    period: u64,
) -> Vec<u64> {
    let window = ((slice.len() as f64 * window_fraction).ceil() as usize).min(slice.len());
    let slowest = topology.slowest();
    let mut seen = 0u64;
    let mut out = Vec::new();
    for e in &slice[..window] {
        if space.tier_of(e.vpage).ok() == Some(slowest) {
            seen += 1;
            if seen % period == 0 {
                out.push(e.vpage);
            }
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NewWindow {
    pub start: u64,
    pub len: u64,
    /// The counter-sampled page; it becomes the window's first sample.
    pub page: u64,
}

/// Outcome of counter-assisted selection for one interval.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PebsSelection {
    pub sampled_pages: Vec<u64>,
    /// Existing slowest-tier regions that keep scanning, with their sampled page.
    pub selected: Vec<(u64, u64)>,
    pub new_windows: Vec<NewWindow>,
    /// Existing slowest-tier regions without a sample this interval.
    pub skipped: Vec<u64>,
}

/// The `window_pages`-aligned window around `page`, cut down to the run
/// of slowest-tier pages not already covered by a region.
fn new_window(
    set: &RegionSet,
    space: &AddressSpace,
    tier: TierId,
    page: u64,
    window_pages: u64,
) -> NewWindow {
    let w0 = page - page % window_pages;
    let w1 = (w0 + window_pages).min(space.footprint_pages());
    let free = |p: u64| space.tier_of(p).ok() == Some(tier) && set.find(p).is_none();
    let mut s = page;
    while s > w0 && free(s - 1) {
        s -= 1;
    }
    let mut e = page + 1;
    while e < w1 && free(e) {
        e += 1;
    }
    NewWindow {
        start: s,
        len: e - s,
        page,
    }
}

/// Decides which slowest-tier regions are profiled this interval.
pub fn pebs_assist(
    set: &RegionSet,
    space: &AddressSpace,
    topology: &TierTopology,
    slice: &[AccessEvent],
    cfg: &ProfilerConfig,
    pebs_sample_period: u64,
    window_pages: u64,
) -> PebsSelection {
    let slowest = topology.slowest();
    let sampled = counter_samples(
        space,
        topology,
        slice,
        cfg.pebs_window_fraction,
        pebs_sample_period,
    );
    let mut sel = PebsSelection {
        sampled_pages: sampled.clone(),
        ..Default::default()
    };
    for p in sampled {
        match set.find(p) {
            Some(i) => {
                let id = set.regions[i].id;
                if !sel.selected.iter().any(|&(r, _)| r == id) {
                    sel.selected.push((id, p));
                }
            }
            None => {
                if !sel
                    .new_windows
                    .iter()
                    .any(|w| (w.start..w.start + w.len).contains(&p))
                {
                    sel.new_windows
                        .push(new_window(set, space, slowest, p, window_pages));
                }
            }
        }
    }
    sel.skipped = set
        .regions
        .iter()
        .filter(|r| r.tier == slowest && !sel.selected.iter().any(|&(id, _)| id == r.id))
        .map(|r| r.id)
        .collect();
    sel
}

/// Regions for the non-slowest tiers (all tiers when `include_slowest`),
/// one per `window_pages` window and tier run, plus one region per
/// counter-identified window of the slowest tier.
fn form_regions(
    space: &AddressSpace,
    topology: &TierTopology,
    window_pages: u64,
    include_slowest: bool,
    counter_pages: &[u64],
) -> Vec<(u64, u64, TierId, Option<u64>)> {
    let slowest = topology.slowest();
    let fp = space.footprint_pages();
    let mut out = Vec::new();
    let mut w = 0;
    while w < fp {
        let end = (w + window_pages).min(fp);
        for (s, len, t) in tier_runs(space, w, end) {
            if include_slowest || t != slowest {
                out.push((s, len, t, None));
            } else if let Some(&p) = counter_pages.iter().find(|&&p| (s..s + len).contains(&p)) {
                out.push((s, len, t, Some(p)));
            }
        }
        w = end;
    }
    out
}

/// Initial regions, each with one sample. The window doubles until the
/// region count fits the budget; each doubling is reported as a warning.
#[allow(clippy::too_many_arguments)]
pub fn init_regions<R: Rng>(
    space: &mut AddressSpace,
    topology: &TierTopology,
    slice: &[AccessEvent],
    cfg: &ProfilerConfig,
    pebs_sample_period: u64,
    num_ps: u64,
    rng: &mut R,
    warnings: &mut Vec<String>,
) -> Result<(RegionSet, u64)> {
    let counter_pages = if cfg.pebs_assist {
        counter_samples(
            space,
            topology,
            slice,
            cfg.pebs_window_fraction,
            pebs_sample_period,
        )
    } else {
        Vec::new()
    };
    let mut window = cfg.default_region_pages;
    loop {
        let formed = form_regions(space, topology, window, !cfg.pebs_assist, &counter_pages);
        if formed.len() as u64 <= num_ps {
            let mut set = RegionSet::new(num_ps, cfg.num_scans);
            for (s, len, t, page) in formed {
                let mut r = Region::new(s, len, t, topology.num_nodes());
                r.quota = 1;
                r.resample(space, rng, page);
                for &u in &r.samples {
                    space.clear_access_bit(u)?;
                }
                set.regions.push(r);
            }
            set.spare = num_ps - set.total_quota();
            return Ok((set, window));
        }
        if window >= space.footprint_pages() {
            return Err(Error::ConstraintInfeasible(format!(
                "{} regions remain at the coarsest granularity but the budget allows {} samples",
                formed.len(),
                num_ps
            )));
        }
        warnings.push(format!(
            "{} initial regions exceed the {} sample budget; region window raised to {} pages",
            formed.len(),
            num_ps,
            window * 2
        ));
        window *= 2;
    }
}

/// Captures of access origin: one per `hint_fault_period` scheduled scans,
/// taken from the next accesses to each region.
#[derive(Clone, Debug)]
pub struct OriginSampler {
    left: Vec<u64>,
    pub captured: u64,
}

impl OriginSampler {
    /// Schedules captures for every profiled region, carrying remainders.
    pub fn schedule(set: &mut RegionSet, cfg: &ProfilerConfig) -> Self {
        let period = cfg.hint_fault_period.max(1);
        let left = set
            .regions
            .iter_mut()
            .map(|r| {
                if r.skipped {
                    return 0;
                }
                let total = r.origin_carry + r.quota * cfg.num_scans as u64;
                r.origin_carry = total % period;
                total / period
            })
            .collect();
        OriginSampler { left, captured: 0 }
    }

    pub fn observe(&mut self, set: &mut RegionSet, region: usize, e: &AccessEvent) {
        if self.left[region] > 0 {
            self.left[region] -= 1;
            self.captured += 1;
            let counts = &mut set.regions[region].origin_counts;
            if e.node.0 >= counts.len() {
                counts.resize(e.node.0 + 1, 0);
            }
            counts[e.node.0] += 1;
        }
    }
}

/// Records accessor nodes for the captures scheduled on each region.
pub fn sample_origin(set: &mut RegionSet, slice: &[AccessEvent], cfg: &ProfilerConfig) -> u64 {
    let mut sampler = OriginSampler::schedule(set, cfg);
    for e in slice {
        if let Some(i) = set.find(e.vpage) {
            sampler.observe(set, i, e);
        }
    }
    sampler.captured
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ProfileStats {
    pub scans: u64,
    pub origin_captures: u64,
    pub profiled_regions: usize,
}

/// Replays `slice` in `num_scans` equal sub-windows, scanning every sample
/// of every non-skipped region after each one. Application cost goes to
/// `ledger.app`; each scan charges `effective_scan_cost` to
/// `ledger.profiling`.
pub fn profile_interval(
    set: &mut RegionSet,
    space: &mut AddressSpace,
    topology: &TierTopology,
    slice: &[AccessEvent],
    cfg: &ProfilerConfig,
    effective_scan_cost: f64,
    ledger: &mut CostLedger,
) -> Result<ProfileStats> {
    let index = set.page_index(space.footprint_pages());
    let mut origin = cfg
        .origin_sampling
        .then(|| OriginSampler::schedule(set, cfg));
    let mut stats = ProfileStats::default();
    for r in set.regions.iter_mut().filter(|r| !r.skipped) {
        r.counts = vec![0; r.samples.len()];
        for &s in &r.samples {
            space.clear_access_bit(s)?;
        }
        stats.profiled_regions += 1;
    }
    let n = cfg.num_scans as usize;
    let mut pos = 0;
    for k in 0..n {
        let end = (k + 1) * slice.len() / n;
        for e in &slice[pos..end] {
            ledger.app += space.apply_access(topology, e)?;
            if let Some(o) = origin.as_mut() {
                let r = index[e.vpage as usize];
                if r != u32::MAX {
                    o.observe(set, r as usize, e);
                }
            }
        }
        pos = end;
        for r in set.regions.iter_mut().filter(|r| !r.skipped) {
            for (s, c) in r.samples.iter().zip(r.counts.iter_mut()) {
                if space.scan_pte(*s, ledger, effective_scan_cost)? {
                    *c += 1;
                }
                stats.scans += 1;
            }
        }
    }
    for r in set.regions.iter_mut().filter(|r| !r.skipped) {
        r.hi_prev = r.hi;
        r.hi = r.mean_count().unwrap_or(0.0);
    }
    stats.origin_captures = origin.map_or(0, |o| o.captured);
    Ok(stats)
}

/// How scans of a fixed page set are charged.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScanCharge {
    /// Every scan costs this much.
    PerScan(f64),
    /// Only scans that observe an access cost this much (fault counting).
    PerHit(f64),
}

/// Replays `slice` in `num_scans` sub-windows and scans `pages` after each,
/// returning per-page hit counts. Bits of `pages` are cleared first
/// without charge.
pub fn replay_with_scans(
    space: &mut AddressSpace,
    topology: &TierTopology,
    slice: &[AccessEvent],
    num_scans: u32,
    pages: &[u64],
    charge: ScanCharge,
    ledger: &mut CostLedger,
) -> Result<Vec<u32>> {
    for &p in pages {
        space.clear_access_bit(p)?;
    }
    let mut counts = vec![0u32; pages.len()];
    let n = num_scans as usize;
    let mut pos = 0;
    for k in 0..n {
        let end = (k + 1) * slice.len() / n;
        for e in &slice[pos..end] {
            ledger.app += space.apply_access(topology, e)?;
        }
        pos = end;
        for (p, c) in pages.iter().zip(counts.iter_mut()) {
            let hit = match charge {
                ScanCharge::PerScan(cost) => space.scan_pte(*p, ledger, cost)?,
                ScanCharge::PerHit(cost) => {
                    let hit = space.scan_pte(*p, ledger, 0.0)?;
                    if hit {
                        ledger.profiling += cost;
                    }
                    hit
                }
            };
            if hit {
                *c += 1;
            }
        }
    }
    Ok(counts)
}
