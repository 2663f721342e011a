// Copyright 2026 The tiersim Authors
// SPDX-License-Identifier: Apache-2.0

//! Plan execution under the four-step migration cost model.
//!
//! Background copies run on their own agent clock starting at the beginning
//! of the concurrent slice; moves are copied back to back, one unit (base
//! page or huge page) after another in address order. A write dirties a
//! unit when it lands after that unit's copy started and before the move's
//! copy window closes.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memmodel::{AddressSpace, CostModel, TierId, TierTopology};
use crate::policy::{MigrationPlan, MoveReason};
use crate::workload::AccessEvent;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MigrationMode {
    Sync,
    Async,
    #[default]
    Adaptive,
}

impl std::str::FromStr for MigrationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sync" => Ok(MigrationMode::Sync),
            "async" => Ok(MigrationMode::Async),
            "adaptive" => Ok(MigrationMode::Adaptive),
            other => Err(Error::Config(format!("unknown migration mode `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    Sync,
    Async,
    AsyncFallback,
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mechanism::Sync => "sync",
            Mechanism::Async => "async",
            Mechanism::AsyncFallback => "async_fallback",
        })
    }
}

/// Application accesses running while migrations copy, with the time each
/// one starts on the application's clock.
#[derive(Clone, Debug, Default)]
pub struct ConcurrentSlice<'a> {
    events: &'a [AccessEvent],
    times: Vec<f64>,
}

impl<'a> ConcurrentSlice<'a> {
    /// Timestamps are cumulative access costs under the current placement.
    pub fn new(events: &'a [AccessEvent], space: &AddressSpace, topology: &TierTopology) -> Self {
        let mut t = 0.0;
        let times = events
            .iter()
            .map(|e| {
                let now = t;
                if let Ok(tier) = space.tier_of(e.vpage) {
                    t += topology.access_cost(tier, e.node);
                }
                now
            })
            .collect();
        ConcurrentSlice { events, times }
    }

    pub fn empty() -> Self {
        ConcurrentSlice::default()
    }

    pub fn with_times(events: &'a [AccessEvent], times: Vec<f64>) -> Self {
        assert_eq!(events.len(), times.len());
        ConcurrentSlice { events, times }
    }
}

/// One executed move.
#[derive(Clone, Debug, PartialEq)]
pub struct MoveRecord {
    pub region_id: u64,
    pub src: TierId,
    pub dst: TierId,
    pub reason: MoveReason,
    pub mechanism: Mechanism,
    pub pages: u64,
    pub exposed_cost: f64,
    pub background_cost: f64,
    pub recopied_pages: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MigrationReport {
    pub moves: Vec<MoveRecord>,
    pub exposed_cost: f64,
    pub background_cost: f64,
}

impl MigrationReport {
    fn push(&mut self, m: MoveRecord) {
        self.exposed_cost += m.exposed_cost;
        self.background_cost += m.background_cost;
        self.moves.push(m);
    }

    pub fn moved_pages(&self) -> u64 {
        self.moves.iter().map(|m| m.pages).sum()
    }
}

/// A PTE unit that changes tier: `(head, pages, src tier)`.
type Unit = (u64, u64, TierId);

fn moving_units(space: &AddressSpace, start: u64, len: u64, dst: TierId) -> Result<Vec<Unit>> {
    let end = start + len;
    if end > space.footprint_pages() {
        return Err(Error::Unmapped(end - 1));
    }
    if !space.is_unit_aligned(start, end) {
        return Err(Error::Misaligned { start, end });
    }
    let mut units = Vec::new();
    let mut p = start;
    while p < end {
        let (head, n) = space.unit_of(p)?;
        let tier = space.tier_of(p)?;
        if tier != dst {
            units.push((head, n, tier));
        }
        p = head + n;
    }
    Ok(units)
}

fn check_space(
    units: &[Unit],
    dst: TierId,
    space: &AddressSpace,
    topology: &TierTopology,
) -> Result<()> {
    let need: u64 = units.iter().map(|u| u.1).sum::<u64>() * space.base_page_bytes();
    let free = topology.free_bytes(dst)?;
    if free < need {
        return Err(Error::InsufficientSpace {
            tier: dst,
            need,
            free,
        });
    }
    Ok(())
}

fn src_of(units: &[Unit], space: &AddressSpace, start: u64) -> TierId {
    units
        .first()
        .map(|u| u.2)
        .unwrap_or_else(|| space.tier_of(start).unwrap_or(TierId(0)))
}

/// Cost of a synchronous move: alloc + unmap + copy + map for every page,
/// all on the critical path.
pub fn migrate_region_sync(
    space: &mut AddressSpace,
    topology: &mut TierTopology,
    cost: &CostModel,
    start: u64,
    len: u64,
    dst: TierId,
) -> Result<f64> {
    let units = moving_units(space, start, len, dst)?;
    check_space(&units, dst, space, topology)?;
    let exposed = units
        .iter()
        .map(|&(_, n, src)| n as f64 * cost.sync_page_cost(src, dst))
        .sum();
    space.remap_range(start, len, dst, topology)?;
    Ok(exposed)
}

/// Result of an asynchronous copy attempt.
#[derive(Clone, Debug, PartialEq)]
pub struct AsyncOutcome {
    /// Unmap + map for every page.
    pub exposed_cost: f64,
    /// Alloc + copy for every page, done off the critical path.
    pub background_cost: f64,
    /// Units written after their copy started, with their page counts.
    pub dirtied: Vec<(u64, u64, TierId)>,
    /// Agent clock when the copy window closes.
    pub window_end: f64,
}

impl AsyncOutcome {
    pub fn fallback(&self) -> bool {
        !self.dirtied.is_empty()
    }

    pub fn dirtied_pages(&self) -> u64 {
        self.dirtied.iter().map(|d| d.1).sum()
    }
}

#[allow(clippy::too_many_arguments)]
fn async_copy(
    units: &[Unit],
    start: u64,
    len: u64,
    dst: TierId,
    cost: &CostModel,
    slice: &ConcurrentSlice<'_>,
    clock: f64,
    space: &AddressSpace,
) -> Result<AsyncOutcome> {
    let per_page_bg = |src| cost.step_alloc + cost.step_copy * cost.copy_factor(src, dst);
    let mut copy_start = Vec::with_capacity(units.len());
    let mut t = clock;
    for &(_, n, src) in units {
        copy_start.push(t);
        t += n as f64 * per_page_bg(src);
    }
    let window_end = t;
    let mut dirty = vec![false; units.len()];
    for (e, &at) in slice.events.iter().zip(&slice.times) {
        if !e.is_write || e.vpage < start || e.vpage >= start + len || at >= window_end {
            continue;
        }
        let (head, _) = space.unit_of(e.vpage)?;
        if let Ok(i) = units.binary_search_by_key(&head, |u| u.0) {
            if at >= copy_start[i] {
                dirty[i] = true;
            }
        }
    }
    let pages: u64 = units.iter().map(|u| u.1).sum();
    Ok(AsyncOutcome {
        exposed_cost: pages as f64
            * (cost.step_unmap + cost.step_map + cost.pte_migration_surcharge),
        background_cost: window_end - clock,
        dirtied: units
            .iter()
            .zip(&dirty)
            .filter(|(_, &d)| d)
            .map(|(u, _)| *u)
            .collect(),
        window_end,
    })
}

/// Copies in the background starting at agent time `clock`, then remaps.
/// The caller decides what to do with dirtied units.
#[allow(clippy::too_many_arguments)]
pub fn migrate_region_async(
    space: &mut AddressSpace,
    topology: &mut TierTopology,
    cost: &CostModel,
    start: u64,
    len: u64,
    dst: TierId,
    slice: &ConcurrentSlice<'_>,
    clock: f64,
) -> Result<AsyncOutcome> {
    let units = moving_units(space, start, len, dst)?;
    check_space(&units, dst, space, topology)?;
    let out = async_copy(&units, start, len, dst, cost, slice, clock, space)?;
    space.remap_range(start, len, dst, topology)?;
    Ok(out)
}

/// Asynchronous copy that falls back to a synchronous re-copy of the
/// units written during the window.
#[allow(clippy::too_many_arguments)]
pub fn migrate_region_adaptive(
    space: &mut AddressSpace,
    topology: &mut TierTopology,
    cost: &CostModel,
    region_id: u64,
    start: u64,
    len: u64,
    dst: TierId,
    slice: &ConcurrentSlice<'_>,
    clock: f64,
) -> Result<(MoveRecord, f64)> {
    let units = moving_units(space, start, len, dst)?;
    let src = src_of(&units, space, start);
    let out = migrate_region_async(space, topology, cost, start, len, dst, slice, clock)?;
    let recopy: f64 = out
        .dirtied
        .iter()
        .map(|&(_, n, s)| n as f64 * (cost.step_alloc + cost.step_copy * cost.copy_factor(s, dst)))
        .sum();
    let rec = MoveRecord {
        region_id,
        src,
        dst,
        reason: MoveReason::Promote,
        mechanism: if out.fallback() {
            Mechanism::AsyncFallback
        } else {
            Mechanism::Async
        },
        pages: units.iter().map(|u| u.1).sum(),
        exposed_cost: out.exposed_cost + recopy,
        background_cost: out.background_cost,
        recopied_pages: out.dirtied_pages(),
    };
    Ok((rec, out.window_end))
}

/// Moves a whole huge page as one unit.
#[allow(clippy::too_many_arguments)]
pub fn migrate_huge_page(
    space: &mut AddressSpace,
    topology: &mut TierTopology,
    cost: &CostModel,
    head: u64,
    dst: TierId,
    mode: MigrationMode,
    slice: &ConcurrentSlice<'_>,
    clock: f64,
) -> Result<(MoveRecord, f64)> {
    let hp = space.huge_page_pages();
    let placement = space.placement(head)?;
    if !placement.is_huge || head % hp != 0 {
        return Err(Error::Misaligned {
            start: head,
            end: head + hp,
        });
    }
    move_one(
        space, topology, cost, head, head, hp, dst, mode, slice, clock,
    )
}

#[allow(clippy::too_many_arguments)]
fn move_one(
    space: &mut AddressSpace,
    topology: &mut TierTopology,
    cost: &CostModel,
    region_id: u64,
    start: u64,
    len: u64,
    dst: TierId,
    mode: MigrationMode,
    slice: &ConcurrentSlice<'_>,
    clock: f64,
) -> Result<(MoveRecord, f64)> {
    match mode {
        MigrationMode::Sync => {
            let units = moving_units(space, start, len, dst)?;
            let src = src_of(&units, space, start);
            let exposed = migrate_region_sync(space, topology, cost, start, len, dst)?;
            let rec = MoveRecord {
                region_id,
                src,
                dst,
                reason: MoveReason::Promote,
                mechanism: Mechanism::Sync,
                pages: units.iter().map(|u| u.1).sum(),
                exposed_cost: exposed,
                background_cost: 0.0,
                recopied_pages: 0,
            };
            Ok((rec, clock))
        }
        MigrationMode::Async => {
            let units = moving_units(space, start, len, dst)?;
            let src = src_of(&units, space, start);
            let out = migrate_region_async(space, topology, cost, start, len, dst, slice, clock)?;
            // Dirtied units are copied again in the background.
            let again: f64 = out
                .dirtied
                .iter()
                .map(|&(_, n, s)| n as f64 * cost.step_copy * cost.copy_factor(s, dst))
                .sum();
            let rec = MoveRecord {
                region_id,
                src,
                dst,
                reason: MoveReason::Promote,
                mechanism: Mechanism::Async,
                pages: units.iter().map(|u| u.1).sum(),
                exposed_cost: out.exposed_cost,
                background_cost: out.background_cost + again,
                recopied_pages: out.dirtied_pages(),
            };
            Ok((rec, out.window_end + again))
        }
        MigrationMode::Adaptive => migrate_region_adaptive(
            space, topology, cost, region_id, start, len, dst, slice, clock,
        ),
    }
}

/// Executes `plan` in order. A failing move aborts the rest; the error
/// reports how many moves completed.
pub fn execute_plan(
    plan: &MigrationPlan,
    mode: MigrationMode,
    space: &mut AddressSpace,
    topology: &mut TierTopology,
    cost: &CostModel,
    slice: &ConcurrentSlice<'_>,
) -> Result<MigrationReport> {
    let mut report = MigrationReport::default();
    let mut clock = 0.0;
    for (i, m) in plan.moves.iter().enumerate() {
        let (mut rec, next) = move_one(
            space,
            topology,
            cost,
            m.region_id,
            m.start_page,
            m.len_pages,
            m.dst,
            mode,
            slice,
            clock,
        )
        .map_err(|e| Error::PlanAborted {
            completed: i,
            total: plan.moves.len(),
            source: Box::new(e),
        })?;
        rec.reason = m.reason;
        clock = next;
        report.push(rec);
    }
    Ok(report)
}
