// Copyright 2026 The tiersim Authors
// SPDX-License-Identifier: Apache-2.0

//! The interval loop and its reports: single runs, side-by-side
//! comparisons, parameter sweeps and the migration microbenchmarks.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{
    autonuma_policy_step, mtm_no_pebs_variant, place_sequential, AutoNuma, Damon, System,
    Thermostat,
};
use crate::config::{RunConfig, WorkloadConfig};
use crate::error::{Error, Result};
use crate::memmodel::{
    AddressSpace, CostLedger, CostModel, NodeId, TierId, TierTopology, TopologySpec,
};
use crate::metrics::{
    detect_hot_pages, recall_precision, time_breakdown, write_metrics_csv, IntervalMetrics,
    TimeBreakdown,
};
use crate::migrator::{execute_plan, ConcurrentSlice, MigrationMode, MigrationReport};
use crate::policy::{
    build_histogram, plan_promotions, update_region_ema, Candidate, MigrationPlan, PlanState,
};
use crate::profiler::{compute_budget, Profiler, ProfilerConfig, RegionSet};
use crate::workload::{
    gen_gups, gen_phase_change, gen_seq_microbench, AccessTrace, HotOracle, MicrobenchKind,
};

/// Builds the trace and its oracle from the workload section.
pub fn build_workload(cfg: &RunConfig) -> Result<(AccessTrace, HotOracle)> {
    let api = cfg.accesses_per_interval;
    match &cfg.workload {
        WorkloadConfig::Gups(p) => gen_gups(p, api, cfg.seed),
        WorkloadConfig::PhaseChange(p) => gen_phase_change(&p.blocks()?, api, cfg.seed),
        WorkloadConfig::Microbench(p) => {
            let t = gen_seq_microbench(p.bench, p.array_pages, p.passes, p.node)?;
            let o = HotOracle::build(&t, api)?;
            Ok((t, o))
        }
        WorkloadConfig::Trace(p) => {
            let f = File::open(&p.path).map_err(|e| {
                Error::Workload(format!("cannot open trace {}: {e}", p.path.display()))
            })?;
            let t = AccessTrace::read_csv(std::io::BufReader::new(f), p.footprint_pages)?;
            let o = HotOracle::build(&t, api)?;
            Ok((t, o))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub interval: usize,
    pub region_id: u64,
    pub start_page: u64,
    pub len_pages: u64,
    pub tier: usize,
    pub quota: u64,
    pub hi: f64,
    pub whi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanRow {
    pub interval: usize,
    pub region_id: u64,
    pub src_tier: usize,
    pub dst_tier: usize,
    pub reason: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MigrationRow {
    pub interval: usize,
    pub region_id: u64,
    pub src: usize,
    pub dst: usize,
    pub mechanism: String,
    pub exposed_cost: f64,
    pub background_cost: f64,
    pub recopied_pages: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub system: System,
    pub seed: u64,
    pub intervals: usize,
    pub accesses_per_interval: usize,
    pub t_mi: f64,
    pub profiling_budget: f64,
    /// Page samples per interval (MTM variants only).
    pub num_ps: Option<u64>,
    pub budget_violations: usize,
    pub costs: TimeBreakdown,
    pub total_cost: f64,
    pub mean_recall: f64,
    pub mean_precision: f64,
    pub final_recall: f64,
    pub final_precision: f64,
    /// First interval whose recall reaches 0.8.
    pub first_recall_80: Option<usize>,
    pub tier_accesses: Vec<u64>,
    pub migrated_pages: u64,
    pub merges: usize,
    pub splits: usize,
    pub warnings: Vec<String>,
}

/// Everything one run produces.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub metrics: Vec<IntervalMetrics>,
    pub ledgers: Vec<CostLedger>,
    pub profile: Vec<ProfileRow>,
    pub plans: Vec<PlanRow>,
    pub migrations: Vec<MigrationRow>,
    pub summary: RunSummary,
    num_tiers: usize,
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    if rows.is_empty() {
        w.write_record(header)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

impl RunOutput {
    pub fn write_metrics_csv<W: Write>(&self, out: W) -> Result<()> {
        write_metrics_csv(out, &self.metrics, self.num_tiers)
    }

    /// Writes `metrics.csv`, `profiler.csv`, `plans.csv`, `migrations.csv`
    /// and `summary.json` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.write_metrics_csv(BufWriter::new(File::create(dir.join("metrics.csv"))?))?;
        write_rows(
            &dir.join("profiler.csv"),
            &self.profile,
            &[
                "interval",
                "region_id",
                "start_page",
                "len_pages",
                "tier",
                "quota",
                "hi",
                "whi",
            ],
        )?;
        write_rows(
            &dir.join("plans.csv"),
            &self.plans,
            &[
                "interval",
                "region_id",
                "src_tier",
                "dst_tier",
                "reason",
                "bytes",
            ],
        )?;
        write_rows(
            &dir.join("migrations.csv"),
            &self.migrations,
            &[
                "interval",
                "region_id",
                "src",
                "dst",
                "mechanism",
                "exposed_cost",
                "background_cost",
                "recopied_pages",
            ],
        )?;
        let mut f = BufWriter::new(File::create(dir.join("summary.json"))?);
        serde_json::to_writer_pretty(&mut f, &self.summary)?;
        writeln!(f)?;
        f.flush()?;
        Ok(())
    }
}

enum Engine {
    Mtm(Box<Profiler>),
    FirstTouch,
    AutoNuma(AutoNuma),
    Thermostat(Thermostat),
    Damon(Damon),
}

impl Engine {
    fn regions(&self) -> Option<&RegionSet> {
        match self {
            Engine::Mtm(p) => p.regions(),
            Engine::FirstTouch => None,
            Engine::AutoNuma(a) => Some(a.regions()),
            Engine::Thermostat(t) => Some(t.regions()),
            Engine::Damon(d) => Some(d.regions()),
        }
    }

    fn regions_mut(&mut self) -> Option<&mut RegionSet> {
        match self {
            Engine::Mtm(p) => p.regions_mut(),
            Engine::FirstTouch => None,
            Engine::AutoNuma(a) => Some(a.regions_mut()),
            Engine::Thermostat(t) => Some(t.regions_mut()),
            Engine::Damon(d) => Some(d.regions_mut()),
        }
    }
}

/// Mutable state of one simulated machine.
pub struct Simulation<'t> {
    cfg: RunConfig,
    trace: &'t AccessTrace,
    oracle: &'t HotOracle,
    topology: TierTopology,
    space: AddressSpace,
    engine: Engine,
    t_mi: f64,
    budget: f64,
    n_bytes: u64,
    intervals: usize,
    next: usize,
    out: RunOutput,
}

impl<'t> Simulation<'t> {
    pub fn new(cfg: &RunConfig, trace: &'t AccessTrace, oracle: &'t HotOracle) -> Result<Self> {
        cfg.validate()?;
        if oracle.accesses_per_interval() != cfg.accesses_per_interval {
            return Err(Error::Config(
                "oracle was built for a different interval length".into(),
            ));
        }
        let spec = cfg.topology.build_spec()?;
        let mut topology = TierTopology::build(&spec)?;
        let mut space = AddressSpace::new(trace.footprint_pages(), &topology);
        place_sequential(
            &mut topology,
            &mut space,
            NodeId(0),
            None,
            cfg.topology.map_huge,
        )?;

        let t_mi = cfg
            .profiler
            .t_mi
            .unwrap_or(cfg.accesses_per_interval as f64 * topology.min_access_cost());
        let budget = t_mi * cfg.profiler.overhead_constraint;
        let scan = cfg.cost.scan_cost;
        let num_scans = cfg.profiler.num_scans;
        // Each system gets its own stream derived from the run seed.
        let seed = cfg.seed ^ 0x7469_6572_7369_6d00;
        let engine = match cfg.system {
            System::Mtm => Engine::Mtm(Box::new(Profiler::new(
                cfg.profiler.clone(),
                cfg.cost.clone(),
                t_mi,
                seed,
            )?)),
            System::MtmNoPebs => Engine::Mtm(Box::new(Profiler::new(
                mtm_no_pebs_variant(&cfg.profiler),
                cfg.cost.clone(),
                t_mi,
                seed,
            )?)),
            System::FirstTouch => Engine::FirstTouch,
            System::Autonuma => Engine::AutoNuma(AutoNuma::new(
                cfg.autonuma.clone(),
                trace.footprint_pages(),
                num_scans,
                scan,
                budget,
                seed,
            )?),
            System::Thermostat => Engine::Thermostat(Thermostat::new(
                cfg.thermostat.clone(),
                num_scans,
                scan,
                budget,
                seed,
            )?),
            System::Damon => Engine::Damon(Damon::new(
                cfg.damon.clone(),
                num_scans,
                scan,
                budget,
                seed,
            )?),
        };
        let available = trace.num_intervals(cfg.accesses_per_interval);
        let intervals = cfg.intervals.map_or(available, |n| n.min(available));
        let n_bytes = cfg.policy.migration_bytes(&topology);
        let num_ps = match &engine {
            Engine::Mtm(p) => Some(p.num_ps()),
            _ => None,
        };
        let summary = RunSummary {
            system: cfg.system,
            seed: cfg.seed,
            intervals: 0,
            accesses_per_interval: cfg.accesses_per_interval,
            t_mi,
            profiling_budget: budget,
            num_ps,
            budget_violations: 0,
            costs: TimeBreakdown::default(),
            total_cost: 0.0,
            mean_recall: 0.0,
            mean_precision: 0.0,
            final_recall: 0.0,
            final_precision: 0.0,
            first_recall_80: None,
            tier_accesses: vec![0; topology.num_tiers()],
            migrated_pages: 0,
            merges: 0,
            splits: 0,
            warnings: Vec::new(),
        };
        Ok(Simulation {
            cfg: cfg.clone(),
            trace,
            oracle,
            out: RunOutput {
                metrics: Vec::new(),
                ledgers: Vec::new(),
                profile: Vec::new(),
                plans: Vec::new(),
                migrations: Vec::new(),
                summary,
                num_tiers: topology.num_tiers(),
            },
            topology,
            space,
            engine,
            t_mi,
            budget,
            n_bytes,
            intervals,
            next: 0,
        })
    }

    pub fn topology(&self) -> &TierTopology {
        &self.topology
    }

    pub fn space(&self) -> &AddressSpace {
        &self.space
    }

    pub fn regions(&self) -> Option<&RegionSet> {
        self.engine.regions()
    }

    pub fn t_mi(&self) -> f64 {
        self.t_mi
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn metrics(&self) -> &[IntervalMetrics] {
        &self.out.metrics
    }

    pub fn ledgers(&self) -> &[CostLedger] {
        &self.out.ledgers
    }

    pub fn is_done(&self) -> bool {
        self.next >= self.intervals
    }

    /// Runs one interval: replay and profile, smooth, detect, plan, then
    /// migrate while the next interval's accesses run.
    pub fn step(&mut self) -> Result<&IntervalMetrics> {
        let i = self.next;
        if i >= self.intervals {
            return Err(Error::IntervalOutOfRange {
                index: i,
                len: self.intervals,
            });
        }
        let api = self.cfg.accesses_per_interval;
        let slice = self.trace.interval(i, api);
        let mut ledger = CostLedger::default();
        let before = self.space.tier_access_counts().to_vec();
        let (mut merges, mut splits) = (0, 0);
        let alpha = self.cfg.policy.alpha;

        match &mut self.engine {
            Engine::Mtm(p) => {
                let rep = p.run_interval(&mut self.space, &self.topology, slice, &mut ledger)?;
                merges = rep.merges;
                splits = rep.splits;
                for w in rep.warnings {
                    self.out.summary.warnings.push(format!("interval {i}: {w}"));
                }
            }
            Engine::FirstTouch => {
                for e in slice {
                    ledger.app += self.space.apply_access(&self.topology, e)?;
                }
            }
            Engine::AutoNuma(a) => {
                a.run_interval(&mut self.space, &self.topology, slice, &mut ledger)?;
            }
            Engine::Thermostat(t) => {
                t.run_interval(&mut self.space, &self.topology, slice, &mut ledger)?;
            }
            Engine::Damon(d) => {
                d.run_interval(&mut self.space, &self.topology, slice, &mut ledger)?;
            }
        }
        if let Some(set) = self.engine.regions_mut() {
            for r in set.regions.iter_mut().filter(|r| !r.skipped) {
                update_region_ema(r, alpha);
            }
        }
        if let Engine::Damon(d) = &mut self.engine {
            let s = d.adjust(&self.space);
            merges = s.merges;
            splits = s.splits;
        }

        let detected = self
            .engine
            .regions()
            .map_or_else(Vec::new, |s| detect_hot_pages(s, self.cfg.detect_threshold));
        let (recall, precision) = recall_precision(&detected, self.oracle.hot_pages(i)?);

        let plan = self.plan()?;
        let next_slice = if i + 1 < self.intervals {
            self.trace.interval(i + 1, api)
        } else {
            &[]
        };
        let concurrent = ConcurrentSlice::new(next_slice, &self.space, &self.topology);
        let report = execute_plan(
            &plan,
            self.cfg.migrator.mode,
            &mut self.space,
            &mut self.topology,
            &self.cfg.cost,
            &concurrent,
        )?;
        ledger.migration_exposed += report.exposed_cost;
        ledger.migration_background += report.background_cost;

        self.record(i, &plan, &report);
        if ledger.profiling > self.budget * (1.0 + 1e-9) {
            self.out.summary.budget_violations += 1;
        }
        let after = self.space.tier_access_counts();
        let tier_accesses = after.iter().zip(&before).map(|(a, b)| a - b).collect();
        self.out.ledgers.push(ledger);
        self.out.metrics.push(IntervalMetrics {
            interval: i,
            recall,
            precision,
            app_cost: ledger.app,
            prof_cost: ledger.profiling,
            mig_cost: ledger.migration_exposed,
            tier_accesses,
            merges,
            splits,
        });
        self.next += 1;
        Ok(self.out.metrics.last().expect("just pushed"))
    }

    fn plan(&self) -> Result<MigrationPlan> {
        let Some(set) = self.engine.regions() else {
            return Ok(MigrationPlan::default());
        };
        let cands: Vec<Candidate> = set
            .regions
            .iter()
            .map(|r| Candidate::from_region(r, &self.space))
            .collect();
        let policy = &self.cfg.policy;
        let num_scans = self.cfg.profiler.num_scans;
        Ok(match &self.engine {
            Engine::AutoNuma(a) => autonuma_policy_step(
                &cands,
                &self.topology,
                a.hot_threshold(),
                policy.bucket_width,
                num_scans,
                self.n_bytes,
            ),
            _ => {
                let hist = build_histogram(&cands, policy.bucket_width, num_scans);
                let mut state = PlanState::new(&self.topology);
                plan_promotions(&hist, &cands, &self.topology, self.n_bytes, &mut state)
            }
        })
    }

    fn record(&mut self, i: usize, plan: &MigrationPlan, report: &MigrationReport) {
        if let Some(set) = self.engine.regions() {
            // Per-page regions of the fault-driven baseline are only
            // reported where something was learned.
            let sparse = matches!(self.engine, Engine::AutoNuma(_));
            for r in set.regions.iter().filter(|r| !sparse || r.has_whi) {
                self.out.profile.push(ProfileRow {
                    interval: i,
                    region_id: r.id,
                    start_page: r.start_page,
                    len_pages: r.len_pages,
                    tier: r.tier.0,
                    quota: r.quota,
                    hi: r.hi,
                    whi: r.whi,
                });
            }
        }
        for m in &plan.moves {
            self.out.plans.push(PlanRow {
                interval: i,
                region_id: m.region_id,
                src_tier: m.src.0,
                dst_tier: m.dst.0,
                reason: m.reason.to_string(),
                bytes: m.bytes,
            });
        }
        for m in &report.moves {
            self.out.migrations.push(MigrationRow {
                interval: i,
                region_id: m.region_id,
                src: m.src.0,
                dst: m.dst.0,
                mechanism: m.mechanism.to_string(),
                exposed_cost: m.exposed_cost,
                background_cost: m.background_cost,
                recopied_pages: m.recopied_pages,
            });
            self.out.summary.migrated_pages += m.pages;
        }
    }

    /// Runs the remaining intervals and closes the summary.
    pub fn finish(mut self) -> Result<RunOutput> {
        while !self.is_done() {
            self.step()?;
        }
        let m = &self.out.metrics;
        let s = &mut self.out.summary;
        s.intervals = m.len();
        s.costs = time_breakdown(&self.out.ledgers);
        s.total_cost = s.costs.total();
        if !m.is_empty() {
            let n = m.len() as f64;
            s.mean_recall = m.iter().map(|r| r.recall).sum::<f64>() / n;
            s.mean_precision = m.iter().map(|r| r.precision).sum::<f64>() / n;
            s.final_recall = m[m.len() - 1].recall;
            s.final_precision = m[m.len() - 1].precision;
        }
        s.first_recall_80 = m.iter().find(|r| r.recall >= 0.8).map(|r| r.interval);
        s.tier_accesses = self.space.tier_access_counts().to_vec();
        s.merges = m.iter().map(|r| r.merges).sum();
        s.splits = m.iter().map(|r| r.splits).sum();
        Ok(self.out)
    }
}

/// Runs `cfg` on an already generated trace.
pub fn run_with(cfg: &RunConfig, trace: &AccessTrace, oracle: &HotOracle) -> Result<RunOutput> {
    Simulation::new(cfg, trace, oracle)?.finish()
}

pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    let (trace, oracle) = build_workload(cfg)?;
    run_with(cfg, &trace, &oracle)
}

/// One system's line in a comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub system: System,
    pub app_cost: f64,
    pub prof_cost: f64,
    pub mig_cost: f64,
    pub total_cost: f64,
    /// Total cost over the reference member's.
    pub normalized: f64,
    pub normalized_app: f64,
    pub mean_recall: f64,
    pub mean_precision: f64,
    pub fast_tier_accesses: u64,
}

fn without_system(cfg: &RunConfig) -> Result<serde_json::Value> {
    let mut v = serde_json::to_value(cfg)?;
    if let Some(o) = v.as_object_mut() {
        o.remove("system");
    }
    Ok(v)
}

fn run_all(cfgs: &[RunConfig], trace: &AccessTrace, oracle: &HotOracle) -> Vec<Result<RunOutput>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = cfgs
            .iter()
            .map(|c| s.spawn(move || run_with(c, trace, oracle)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("run thread panicked"))
            .collect()
    })
}

/// Runs configs that differ only in `system` on one shared trace and
/// normalizes costs to the first-touch member (or the first member when
/// there is none).
pub fn compare(cfgs: &[RunConfig]) -> Result<(Vec<CompareRow>, Vec<RunOutput>)> {
    let first = cfgs
        .first()
        .ok_or_else(|| Error::Config("compare needs at least one config".into()))?;
    let base = without_system(first)?;
    for c in &cfgs[1..] {
        if c.seed != first.seed {
            return Err(Error::Config(format!(
                "compare: seeds differ ({} vs {})",
                first.seed, c.seed
            )));
        }
        if without_system(c)? != base {
            return Err(Error::Config(
                "compare: configs may differ only in `system`".into(),
            ));
        }
    }
    let (trace, oracle) = build_workload(first)?;
    let outs = run_all(cfgs, &trace, &oracle)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let reference = cfgs
        .iter()
        .position(|c| c.system == System::FirstTouch)
        .unwrap_or(0);
    let ref_total = outs[reference].summary.total_cost;
    let ref_app = outs[reference].summary.costs.app;
    let fast = first
        .topology
        .build_spec()
        .map(|s| TierTopology::build(&s))??
        .global_order()[0];
    let rows = outs
        .iter()
        .map(|o| {
            let s = &o.summary;
            CompareRow {
                system: s.system,
                app_cost: s.costs.app,
                prof_cost: s.costs.profiling,
                mig_cost: s.costs.migration_exposed,
                total_cost: s.total_cost,
                normalized: s.total_cost / ref_total,
                normalized_app: s.costs.app / ref_app,
                mean_recall: s.mean_recall,
                mean_precision: s.mean_precision,
                fast_tier_accesses: s.tier_accesses[fast.0],
            }
        })
        .collect();
    Ok((rows, outs))
}

/// One value's line in a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: String,
    pub value: String,
    pub system: System,
    pub num_ps: Option<u64>,
    pub app_cost: f64,
    pub prof_cost: f64,
    pub mig_cost: f64,
    pub total_cost: f64,
    pub mean_recall: f64,
    pub mean_precision: f64,
    pub budget_violations: usize,
}

/// One run per value of `param`, all on the trace of `cfg`.
pub fn sweep(cfg: &RunConfig, param: &str, values: &[String]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let cfgs = values
        .iter()
        .map(|v| {
            let mut c = cfg.clone();
            c.set_param(param, v)?;
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    let (trace, oracle) = build_workload(cfg)?;
    let outs = run_all(&cfgs, &trace, &oracle);
    values
        .iter()
        .zip(outs)
        .map(|(v, o)| {
            let o = o?;
            let s = &o.summary;
            Ok(SweepRow {
                param: param.to_string(),
                value: v.clone(),
                system: s.system,
                num_ps: s.num_ps,
                app_cost: s.costs.app,
                prof_cost: s.costs.profiling,
                mig_cost: s.costs.migration_exposed,
                total_cost: s.total_cost,
                mean_recall: s.mean_recall,
                mean_precision: s.mean_precision,
                budget_violations: s.budget_violations,
            })
        })
        .collect()
}

pub fn write_csv<T: Serialize, W: Write>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Exposed and background cost of moving a microbenchmark's array from
/// the slow to the fast tier while the benchmark runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicrobenchResult {
    pub kind: MicrobenchKind,
    pub mode: MigrationMode,
    pub pages: u64,
    pub exposed_cost: f64,
    pub background_cost: f64,
    pub recopied_pages: u64,
}

pub fn run_microbench(
    kind: MicrobenchKind,
    array_pages: u64,
    passes: u64,
    mode: MigrationMode,
    cost: &CostModel,
) -> Result<MicrobenchResult> {
    let trace = gen_seq_microbench(kind, array_pages, passes, NodeId(0))?;
    let bytes = array_pages * 4096;
    let spec = TopologySpec::two_tier(bytes, bytes).with_page_sizes(4096, 512);
    let mut topo = TierTopology::build(&spec)?;
    let mut space = AddressSpace::new(array_pages, &topo);
    place_sequential(&mut topo, &mut space, NodeId(0), Some(&[TierId(1)]), false)?;
    let slice = ConcurrentSlice::new(trace.events(), &space, &topo);
    let plan = MigrationPlan {
        moves: vec![crate::policy::Move {
            region_id: 0,
            start_page: 0,
            len_pages: array_pages,
            src: TierId(1),
            dst: TierId(0),
            reason: crate::policy::MoveReason::Promote,
            bytes,
        }],
        promoted_bytes: bytes,
        demoted_bytes: 0,
    };
    let rep = execute_plan(&plan, mode, &mut space, &mut topo, cost, &slice)?;
    Ok(MicrobenchResult {
        kind,
        mode,
        pages: rep.moved_pages(),
        exposed_cost: rep.exposed_cost,
        background_cost: rep.background_cost,
        recopied_pages: rep.moves.iter().map(|m| m.recopied_pages).sum(),
    })
}

/// Profiling budget in page samples for `cfg`, as the MTM profiler would
/// compute it.
pub fn budget_samples(cfg: &RunConfig) -> Result<u64> {
    let spec = cfg.topology.build_spec()?;
    let topo = TierTopology::build(&spec)?;
    let t_mi = cfg
        .profiler
        .t_mi
        .unwrap_or(cfg.accesses_per_interval as f64 * topo.min_access_cost());
    let pcfg: ProfilerConfig = cfg.profiler.clone();
    compute_budget(t_mi, &pcfg, &cfg.cost)
}
