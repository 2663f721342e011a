// Copyright 2026 The tiersim Authors
// SPDX-License-Identifier: Apache-2.0

//! Adaptive region-based profiling under a hard per-interval cost budget.

mod ops;
mod region;
mod sampling;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use ops::{
    enforce_budget, merge_pass, redistribute_quota, split_pass, variance_score, EnforceOutcome,
    MergeOutcome, TAU1_EPSILON,
};
pub use region::{Region, RegionSet};
pub use sampling::{
    counter_samples, init_regions, pebs_assist, profile_interval, replay_with_scans, sample_origin,
    NewWindow, OriginSampler, PebsSelection, ProfileStats, ScanCharge,
};

use crate::error::{Error, Result};
use crate::memmodel::{AddressSpace, CostLedger, CostModel, TierTopology};
use crate::workload::AccessEvent;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfilerConfig {
    /// Cost units per profiling interval. Derived from the interval length
    /// when absent.
    pub t_mi: Option<f64>,
    pub overhead_constraint: f64,
    pub num_scans: u32,
    /// Merge threshold; `num_scans / 3` when absent.
    pub tau1: Option<f64>,
    /// Split threshold; `2 * num_scans / 3` when absent.
    pub tau2: Option<f64>,
    pub pebs_window_fraction: f64,
    /// Scans per hint-fault capture of the access origin.
    pub hint_fault_period: u64,
    pub default_region_pages: u64,
    pub top_k_variance: usize,
    pub origin_sampling: bool,
    pub pebs_assist: bool,
    /// Draw fresh sample pages every interval instead of keeping them.
    pub resample_each_interval: bool,
}

impl Default for ProfilerConfig {
    fn default() -> Self {
        ProfilerConfig {
            t_mi: None,
            overhead_constraint: 0.05,
            num_scans: 3,
            tau1: None,
            tau2: None,
            pebs_window_fraction: 0.10,
            hint_fault_period: 12,
            default_region_pages: 512,
            top_k_variance: 5,
            origin_sampling: true,
            pebs_assist: true,
            resample_each_interval: true,
        }
    }
}

impl ProfilerConfig {
    pub fn tau1(&self) -> f64 {
        self.tau1.unwrap_or(self.num_scans as f64 / 3.0)
    }

    pub fn tau2(&self) -> f64 {
        self.tau2.unwrap_or(2.0 * self.num_scans as f64 / 3.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Profiler(m));
        if !(self.overhead_constraint > 0.0 && self.overhead_constraint < 1.0) {
            return bad(format!(
                "overhead_constraint must be in (0, 1), got {}",
                self.overhead_constraint
            ));
        }
        if self.num_scans == 0 {
            return bad("num_scans must be at least 1".into());
        }
        let (t1, t2) = (self.tau1(), self.tau2());
        if !(0.0 <= t1 && t1 < t2 && t2 <= self.num_scans as f64) {
            return bad(format!(
                "need 0 <= tau1 < tau2 <= num_scans, got tau1={t1}, tau2={t2}"
            ));
        }
        if !(self.pebs_window_fraction > 0.0 && self.pebs_window_fraction <= 1.0) {
            return bad(format!(
                "pebs_window_fraction must be in (0, 1], got {}",
                self.pebs_window_fraction
            ));
        }
        if self.hint_fault_period == 0 {
            return bad("hint_fault_period must be at least 1".into());
        }
        if self.default_region_pages == 0 {
            return bad("default_region_pages must be at least 1".into());
        }
        if self.top_k_variance == 0 {
            return bad("top_k_variance must be at least 1".into());
        }
        if let Some(t) = self.t_mi {
            if !(t.is_finite() && t > 0.0) {
                return bad(format!("t_mi must be positive, got {t}"));
            }
        }
        Ok(())
    }
}

/// Page samples affordable per interval:
/// `floor(t_mi * constraint / (effective_scan_cost * num_scans))`.
pub fn compute_budget(t_mi: f64, cfg: &ProfilerConfig, cost: &CostModel) -> Result<u64> {
    if cost.scan_cost.is_nan() || cost.scan_cost <= 0.0 {
        return Err(Error::CostModel("scan_cost must be positive".into()));
    }
    let eff = cost.effective_scan_cost(cfg.origin_sampling, cfg.hint_fault_period);
    let x = t_mi * cfg.overhead_constraint / (eff * cfg.num_scans as f64);
    let mut n = x.floor();
    // Quotients that are whole numbers can land a hair below after rounding.
    if x - n > 1.0 - 1e-9 {
        n += 1.0;
    }
    if n.is_nan() || n < 1.0 {
        return Err(Error::ConstraintInfeasible(format!(
            "budget of {x:.3} page samples per interval is below one"
        )));
    }
    Ok(n as u64)
}

/// What one interval of profiling did.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IntervalReport {
    pub stats: ProfileStats,
    pub merges: usize,
    pub splits: usize,
    pub created: usize,
    pub skipped: usize,
    pub lent: u64,
    pub enforce: EnforceOutcome,
    pub warnings: Vec<String>,
}

/// The full per-interval profiling pipeline.
#[derive(Clone, Debug)]
pub struct Profiler {
    cfg: ProfilerConfig,
    cost: CostModel,
    t_mi: f64,
    num_ps: u64,
    effective_scan_cost: f64,
    window_pages: u64,
    set: Option<RegionSet>,
    rng: ChaCha8Rng,
}

impl Profiler {
    /// `t_mi` applies when the config leaves it unset.
    pub fn new(cfg: ProfilerConfig, cost: CostModel, t_mi: f64, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let t_mi = cfg.t_mi.unwrap_or(t_mi);
        let num_ps = compute_budget(t_mi, &cfg, &cost)?;
        let effective_scan_cost =
            cost.effective_scan_cost(cfg.origin_sampling, cfg.hint_fault_period);
        Ok(Profiler {
            window_pages: cfg.default_region_pages,
            cfg,
            cost,
            t_mi,
            num_ps,
            effective_scan_cost,
            set: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn config(&self) -> &ProfilerConfig {
        &self.cfg
    }

    pub fn num_ps(&self) -> u64 {
        self.num_ps
    }

    pub fn t_mi(&self) -> f64 {
        self.t_mi
    }

    /// Profiling cost allowed per interval.
    pub fn budget(&self) -> f64 {
        self.t_mi * self.cfg.overhead_constraint
    }

    pub fn effective_scan_cost(&self) -> f64 {
        self.effective_scan_cost
    }

    pub fn window_pages(&self) -> u64 {
        self.window_pages
    }

    /// Regions after the most recent interval (empty before the first).
    pub fn regions(&self) -> Option<&RegionSet> {
        self.set.as_ref()
    }

    pub fn regions_mut(&mut self) -> Option<&mut RegionSet> {
        self.set.as_mut()
    }

    pub fn run_interval(
        &mut self,
        space: &mut AddressSpace,
        topology: &TierTopology,
        slice: &[AccessEvent],
        ledger: &mut CostLedger,
    ) -> Result<IntervalReport> {
        let mut rep = IntervalReport::default();
        let mut set = match self.set.take() {
            None => {
                let (mut set, window) = init_regions(
                    space,
                    topology,
                    slice,
                    &self.cfg,
                    self.cost.pebs_sample_period,
                    self.num_ps,
                    &mut self.rng,
                    &mut rep.warnings,
                )?;
                self.window_pages = window;
                self.spread_spare(&mut set, space);
                set
            }
            Some(mut set) => {
                self.prepare(&mut set, space, topology, slice, &mut rep);
                set
            }
        };
        rep.skipped = set.regions.iter().filter(|r| r.skipped).count();

        let loans = self.lend(&mut set, space);
        rep.lent = loans.iter().map(|l| l.1).sum();
        rep.stats = profile_interval(
            &mut set,
            space,
            topology,
            slice,
            &self.cfg,
            self.effective_scan_cost,
            ledger,
        )?;
        for (i, _) in loans {
            let r = &mut set.regions[i];
            r.samples.truncate(r.quota as usize);
            r.counts.truncate(r.quota as usize);
        }

        rep.merges = merge_pass(&mut set, self.cfg.tau1()).merges;
        rep.splits = split_pass(&mut set, self.cfg.tau2(), space, &mut self.rng);
        redistribute_quota(&mut set, self.cfg.top_k_variance, space, &mut self.rng);
        rep.enforce = enforce_budget(
            &mut set,
            self.num_ps,
            self.cfg.tau1(),
            self.cfg.tau2(),
            space,
            topology,
        )?;
        rep.merges += rep.enforce.merges + rep.enforce.forced_merges;
        rep.warnings.extend(rep.enforce.warnings.iter().cloned());
        self.set = Some(set);
        Ok(rep)
    }

    /// Refreshes tiers, applies counter-assisted selection and draws this
    /// interval's samples.
    fn prepare(
        &mut self,
        set: &mut RegionSet,
        space: &mut AddressSpace,
        topology: &TierTopology,
        slice: &[AccessEvent],
        rep: &mut IntervalReport,
    ) {
        for r in &mut set.regions {
            r.fresh = false;
            r.skipped = false;
            if let Ok(t) = space.tier_of(r.start_page) {
                r.tier = t;
            }
        }
        let mut keep: Vec<(u64, u64)> = Vec::new();
        if self.cfg.pebs_assist {
            let sel = pebs_assist(
                set,
                space,
                topology,
                slice,
                &self.cfg,
                self.cost.pebs_sample_period,
                self.window_pages,
            );
            for r in &mut set.regions {
                r.skipped = sel.skipped.contains(&r.id);
            }
            keep = sel.selected.clone();
            for w in sel.new_windows {
                if !self.fund_one(set) {
                    break;
                }
                let mut r = Region::new(w.start, w.len, topology.slowest(), topology.num_nodes());
                r.quota = 1;
                r.resample(space, &mut self.rng, Some(w.page));
                set.regions.push(r);
                rep.created += 1;
            }
            set.sort();
        }
        if self.cfg.resample_each_interval {
            for r in set.regions.iter_mut().filter(|r| !r.skipped) {
                let page = keep.iter().find(|k| k.0 == r.id).map(|k| k.1);
                r.resample(space, &mut self.rng, page);
            }
        }
    }

    /// Takes one sample from the spare pool, or from the region holding
    /// the most samples.
    fn fund_one(&self, set: &mut RegionSet) -> bool {
        if set.spare > 0 {
            set.spare -= 1;
            return true;
        }
        let donor = (0..set.regions.len())
            .filter(|&i| set.regions[i].quota > 1)
            .max_by_key(|&i| (set.regions[i].quota, std::cmp::Reverse(i)));
        match donor {
            Some(i) => {
                let r = &mut set.regions[i];
                r.quota -= 1;
                r.samples.pop();
                r.counts.pop();
                true
            }
            None => false,
        }
    }

    fn spread_spare(&mut self, set: &mut RegionSet, space: &AddressSpace) {
        loop {
            let mut progressed = false;
            for r in &mut set.regions {
                if set.spare == 0 {
                    return;
                }
                if r.add_samples(space, &mut self.rng, 1) == 1 {
                    r.quota += 1;
                    set.spare -= 1;
                    progressed = true;
                }
            }
            if !progressed {
                return;
            }
        }
    }

    /// Lends the quota of skipped regions (and any unassigned samples) to
    /// the most variable profiled regions for this interval only. Returns
    /// `(region index, extra samples)`.
    fn lend(&mut self, set: &mut RegionSet, space: &AddressSpace) -> Vec<(usize, u64)> {
        let lendable: u64 = set
            .regions
            .iter()
            .filter(|r| r.skipped)
            .map(|r| r.quota)
            .sum::<u64>()
            + set.spare;
        if lendable == 0 {
            return Vec::new();
        }
        let picks = ops::top_variance(set, self.cfg.top_k_variance, |r| {
            !r.skipped && r.capacity(space) > r.quota
        });
        let shares = ops::even_shares(lendable, picks.len());
        let mut loans = Vec::new();
        for (i, share) in picks.into_iter().zip(shares) {
            let added = set.regions[i].add_samples(space, &mut self.rng, share as usize) as u64;
            if added > 0 {
                loans.push((i, added));
            }
        }
        loans
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memmodel::{NodeId, TierId, TopologySpec};

    fn cost(scan: f64) -> CostModel {
        CostModel {
            scan_cost: scan,
            ..Default::default()
        }
    }

    #[test]
    fn budget_direct_substitution() {
        let cfg = ProfilerConfig {
            origin_sampling: false,
            ..Default::default()
        };
        assert_eq!(compute_budget(1e6, &cfg, &cost(2.0)).unwrap(), 8333);
    }

    #[test]
    fn budget_with_origin_sampling() {
        let cfg = ProfilerConfig::default();
        assert_eq!(compute_budget(1e6, &cfg, &cost(2.0)).unwrap(), 4166);
    }

    #[test]
    fn budget_below_one_is_infeasible() {
        let cfg = ProfilerConfig {
            overhead_constraint: 1e-9,
            ..Default::default()
        };
        let err = compute_budget(1e6, &cfg, &cost(2.0)).unwrap_err();
        assert!(err.to_string().contains("constraint infeasible"));
    }

    #[test]
    fn default_thresholds_split_scan_range() {
        let cfg = ProfilerConfig::default();
        assert_eq!((cfg.tau1(), cfg.tau2()), (1.0, 2.0));
        let bad = ProfilerConfig {
            tau1: Some(2.5),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    struct World {
        topo: TierTopology,
        space: AddressSpace,
    }

    /// 64 pages: 0..48 on tier 0, 48..64 on the slowest tier 1.
    fn world() -> World {
        let spec = TopologySpec::two_tier(48 * 4096, 64 * 4096).with_page_sizes(4096, 8);
        let mut topo = TierTopology::build(&spec).unwrap();
        let mut space = AddressSpace::new(64, &topo);
        for p in 0..64 {
            space
                .map_base(p, TierId(if p < 48 { 0 } else { 1 }), &mut topo)
                .unwrap();
        }
        World { topo, space }
    }

    fn ev(seq: u64, vpage: u64, node: usize) -> AccessEvent {
        AccessEvent {
            seq,
            vpage,
            is_write: false,
            node: NodeId(node),
        }
    }

    fn small_cfg() -> ProfilerConfig {
        ProfilerConfig {
            default_region_pages: 8,
            ..Default::default()
        }
    }

    #[test]
    fn init_fast_tier_windows_get_one_sample() {
        let mut w = world();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut warn = Vec::new();
        let (set, window) = init_regions(
            &mut w.space,
            &w.topo,
            &[],
            &small_cfg(),
            1,
            20,
            &mut rng,
            &mut warn,
        )
        .unwrap();
        assert_eq!(window, 8);
        assert_eq!(set.len(), 6);
        assert!(set
            .regions
            .iter()
            .all(|r| r.quota == 1 && r.tier == TierId(0)));
        assert!(warn.is_empty());
        set.check_invariants(&w.space).unwrap();
    }

    #[test]
    fn init_counter_sample_becomes_region_sample() {
        let mut w = world();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let slice: Vec<_> = (0..10).map(|i| ev(i, 53, 0)).collect();
        let (set, _) = init_regions(
            &mut w.space,
            &w.topo,
            &slice,
            &small_cfg(),
            1,
            20,
            &mut rng,
            &mut Vec::new(),
        )
        .unwrap();
        let slow: Vec<_> = set.regions.iter().filter(|r| r.tier == TierId(1)).collect();
        assert_eq!(slow.len(), 1);
        assert_eq!((slow[0].start_page, slow[0].len_pages), (48, 8));
        assert_eq!(slow[0].samples, vec![53]);
    }

    #[test]
    fn init_coarsens_when_budget_is_short() {
        let mut w = world();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut warn = Vec::new();
        let (set, window) = init_regions(
            &mut w.space,
            &w.topo,
            &[],
            &small_cfg(),
            1,
            3,
            &mut rng,
            &mut warn,
        )
        .unwrap();
        assert_eq!(window, 16);
        assert_eq!(set.len(), 3);
        assert_eq!(warn.len(), 1);
        let err = init_regions(
            &mut w.space,
            &w.topo,
            &[],
            &small_cfg(),
            1,
            0,
            &mut rng,
            &mut Vec::new(),
        );
        assert!(matches!(err, Err(Error::ConstraintInfeasible(_))));
    }

    #[test]
    fn pebs_selection_rules() {
        let mut w = world();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let first: Vec<_> = (0..10).map(|i| ev(i, 50, 0)).collect();
        let cfg = small_cfg();
        let (set, _) = init_regions(
            &mut w.space,
            &w.topo,
            &first,
            &cfg,
            1,
            20,
            &mut rng,
            &mut Vec::new(),
        )
        .unwrap();

        let none = pebs_assist(&set, &w.space, &w.topo, &[ev(0, 3, 0)], &cfg, 1, 8);
        assert_eq!(none.skipped, vec![48]);
        assert!(none.new_windows.is_empty());

        let same = pebs_assist(&set, &w.space, &w.topo, &first, &cfg, 1, 8);
        assert_eq!(same.selected, vec![(48, 50)]);
        assert!(same.skipped.is_empty() && same.new_windows.is_empty());

        let fresh: Vec<_> = (0..10).map(|i| ev(i, 61, 0)).collect();
        let sel = pebs_assist(&set, &w.space, &w.topo, &fresh, &cfg, 1, 8);
        assert_eq!(
            sel.new_windows,
            vec![NewWindow {
                start: 56,
                len: 8,
                page: 61
            }]
        );
        assert_eq!(sel.skipped, vec![48]);
    }

    #[test]
    fn counter_window_and_period() {
        let w = world();
        // 20 events, window 10% = 2 events; only the first two count.
        let slice: Vec<_> = (0..20).map(|i| ev(i, 48 + i % 4, 0)).collect();
        assert_eq!(
            counter_samples(&w.space, &w.topo, &slice, 0.1, 1),
            vec![48, 49]
        );
        assert_eq!(
            counter_samples(&w.space, &w.topo, &slice, 1.0, 5),
            vec![48, 49, 50, 51]
        );
    }

    #[test]
    fn profile_counts_hits_per_sub_window() {
        let mut w = world();
        let mut r = Region::new(0, 8, TierId(0), 1);
        r.quota = 2;
        r.samples = vec![2, 5];
        r.counts = vec![0, 0];
        let mut set = RegionSet {
            regions: vec![r],
            spare: 0,
            num_ps: 2,
            num_scans: 3,
        };
        // Page 2 touched in every third; page 5 never.
        let slice = vec![ev(0, 2, 0), ev(1, 2, 0), ev(2, 2, 0)];
        let cfg = ProfilerConfig {
            origin_sampling: false,
            ..small_cfg()
        };
        let mut ledger = CostLedger::default();
        let stats = profile_interval(
            &mut set,
            &mut w.space,
            &w.topo,
            &slice,
            &cfg,
            0.5,
            &mut ledger,
        )
        .unwrap();
        assert_eq!(set.regions[0].counts, vec![3, 0]);
        assert_eq!(set.regions[0].hi, 1.5);
        assert_eq!(stats.scans, 6);
        assert_eq!(ledger.profiling, 3.0);
        assert_eq!(ledger.app, 3.0);
    }

    #[test]
    fn origin_period_and_untouched_regions() {
        let mut r = Region::new(0, 8, TierId(0), 2);
        r.quota = 8;
        r.samples = (0..8).collect();
        r.counts = vec![0; 8];
        let untouched = {
            let mut u = Region::new(8, 8, TierId(0), 2);
            u.quota = 1;
            u.samples = vec![8];
            u.counts = vec![0];
            u
        };
        let mut set = RegionSet {
            regions: vec![r, untouched],
            spare: 0,
            num_ps: 9,
            num_scans: 3,
        };
        let slice: Vec<_> = (0..10).map(|i| ev(i, 1, 1)).collect();
        let got = sample_origin(&mut set, &slice, &ProfilerConfig::default());
        assert_eq!(got, 2);
        assert_eq!(set.regions[0].origin_counts, vec![0, 2]);
        assert_eq!(set.regions[1].origin_counts, vec![0, 0]);
    }

    #[test]
    fn pipeline_keeps_budget_and_invariants() {
        let mut w = world();
        let cfg = ProfilerConfig {
            default_region_pages: 8,
            origin_sampling: true,
            ..Default::default()
        };
        let c = CostModel {
            scan_cost: 0.1,
            pebs_sample_period: 1,
            ..Default::default()
        };
        let mut p = Profiler::new(cfg, c, 200.0, 3).unwrap();
        let budget = p.budget();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        use rand::RngExt;
        for i in 0..30u64 {
            let slice: Vec<_> = (0..200)
                .map(|k| ev(i * 200 + k, rng.random_range(0..64), 0))
                .collect();
            let mut ledger = CostLedger::default();
            p.run_interval(&mut w.space, &w.topo, &slice, &mut ledger)
                .unwrap();
            assert!(
                ledger.profiling <= budget + 1e-9,
                "interval {i}: {} > {budget}",
                ledger.profiling
            );
            p.regions().unwrap().check_invariants(&w.space).unwrap();
        }
    }
}
