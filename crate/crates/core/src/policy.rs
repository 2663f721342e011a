// Copyright 2026 The tiersim Authors
// SPDX-License-Identifier: Apache-2.0

//! EMA of region hotness, the hotness histogram, and promotion/demotion
//! planning under a per-interval migration size.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memmodel::{bytesize, AddressSpace, NodeId, TierId, TierTopology};
use crate::profiler::Region;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub alpha: f64,
    pub bucket_width: f64,
    /// Per-interval promotion size as a fraction of total capacity.
    pub n_fraction: f64,
    /// Absolute per-interval promotion size; overrides `n_fraction`.
    #[serde(
        deserialize_with = "bytesize::deserialize_opt",
        skip_serializing_if = "Option::is_none"
    )]
    pub n_bytes: Option<u64>,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            alpha: 0.5,
            bucket_width: 0.1,
            n_fraction: 0.05,
            n_bytes: None,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!(
                "alpha must be in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.bucket_width > 0.0 && self.bucket_width.is_finite()) {
            return Err(Error::Config(format!(
                "bucket_width must be positive, got {}",
                self.bucket_width
            )));
        }
        if self.n_bytes == Some(0)
            || (self.n_bytes.is_none() && !(self.n_fraction > 0.0 && self.n_fraction <= 1.0))
        {
            return Err(Error::Config("migration size N must be positive".into()));
        }
        Ok(())
    }

    /// Promotion bytes allowed per interval, rounded down to whole pages.
    pub fn migration_bytes(&self, topology: &TierTopology) -> u64 {
        let page = topology.base_page_bytes();
        let n = self
            .n_bytes
            .unwrap_or_else(|| (topology.total_capacity() as f64 * self.n_fraction) as u64);
        (n / page * page).max(page)
    }
}

/// `alpha * hi + (1 - alpha) * whi_prev`, or `hi` when there is no history.
pub fn update_ema(whi_prev: Option<f64>, hi: f64, alpha: f64) -> f64 {
    match whi_prev {
        Some(w) => alpha * hi + (1.0 - alpha) * w,
        None => hi,
    }
}

/// Applies one EMA step to a profiled region.
pub fn update_region_ema(r: &mut Region, alpha: f64) {
    r.whi = update_ema(r.has_whi.then_some(r.whi), r.hi, alpha);
    r.has_whi = true;
}

/// A region as seen by the planner.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub id: u64,
    pub start_page: u64,
    pub len_pages: u64,
    pub whi: f64,
    /// Tier holding most of the region's pages.
    pub tier: TierId,
    /// Pages per tier.
    pub pages: Vec<(TierId, u64)>,
    /// Node whose view decides destinations.
    pub node: NodeId,
}

impl Candidate {
    pub fn from_region(r: &Region, space: &AddressSpace) -> Self {
        let pages = space.tier_pages(r.start_page, r.len_pages);
        let tier = dominant_tier(&pages).unwrap_or(r.tier);
        Candidate {
            id: r.id,
            start_page: r.start_page,
            len_pages: r.len_pages,
            whi: if r.has_whi { r.whi } else { 0.0 },
            tier,
            pages,
            node: resolve_node(&r.origin_counts),
        }
    }

    pub fn pages_outside(&self, dst: TierId) -> u64 {
        self.pages
            .iter()
            .filter(|(t, _)| *t != dst)
            .map(|(_, n)| n)
            .sum()
    }

    fn resident_in(&self, dst: TierId) -> bool {
        self.pages_outside(dst) == 0
    }
}

fn dominant_tier(pages: &[(TierId, u64)]) -> Option<TierId> {
    pages
        .iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|p| p.0)
}

/// Argmax of the origin counts; ties and all-zero counts go to the lower node.
pub fn resolve_node(origin_counts: &[u64]) -> NodeId {
    let mut best = 0;
    for (i, &c) in origin_counts.iter().enumerate() {
        if c > origin_counts[best] {
            best = i;
        }
    }
    NodeId(best)
}

/// The dominant accessor's fastest-to-slowest tier order.
pub fn resolve_destination<'t>(origin_counts: &[u64], topology: &'t TierTopology) -> &'t [TierId] {
    topology.view(resolve_node(origin_counts))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bucket {
    pub lo: f64,
    pub hi: f64,
    /// Region ids.
    pub members: Vec<u64>,
    pub pages: u64,
}

/// Regions grouped by `floor(whi / bucket_width)`; the top bucket also holds
/// `whi == num_scans`.
#[derive(Clone, Debug, PartialEq)]
pub struct HotnessHistogram {
    pub bucket_width: f64,
    pub buckets: Vec<Bucket>,
    placed: BTreeMap<u64, (usize, u64)>,
}

impl HotnessHistogram {
    pub fn new(bucket_width: f64, num_scans: u32) -> Self {
        let n = ((num_scans as f64 / bucket_width) - 1e-9).ceil().max(1.0) as usize;
        let buckets = (0..n)
            .map(|i| Bucket {
                lo: i as f64 * bucket_width,
                hi: ((i + 1) as f64 * bucket_width).min(num_scans as f64),
                members: Vec::new(),
                pages: 0,
            })
            .collect();
        HotnessHistogram {
            bucket_width,
            buckets,
            placed: BTreeMap::new(),
        }
    }

    pub fn bucket_of(&self, whi: f64) -> usize {
        ((whi / self.bucket_width).floor().max(0.0) as usize).min(self.buckets.len() - 1)
    }

    /// Places a region, or moves it if already present.
    pub fn update(&mut self, id: u64, whi: f64, pages: u64) {
        self.remove(id);
        let b = self.bucket_of(whi);
        let bucket = &mut self.buckets[b];
        let at = bucket.members.partition_point(|&m| m < id);
        bucket.members.insert(at, id);
        bucket.pages += pages;
        self.placed.insert(id, (b, pages));
    }

    pub fn remove(&mut self, id: u64) {
        if let Some((b, pages)) = self.placed.remove(&id) {
            let bucket = &mut self.buckets[b];
            bucket.members.retain(|&m| m != id);
            bucket.pages -= pages;
        }
    }

    pub fn bucket_index(&self, id: u64) -> Option<usize> {
        self.placed.get(&id).map(|p| p.0)
    }

    pub fn len(&self) -> usize {
        self.placed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.placed.is_empty()
    }
}

pub fn build_histogram(
    candidates: &[Candidate],
    bucket_width: f64,
    num_scans: u32,
) -> HotnessHistogram {
    let mut h = HotnessHistogram::new(bucket_width, num_scans);
    for c in candidates {
        h.update(c.id, c.whi, c.len_pages);
    }
    h
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveReason {
    Promote,
    Demote,
}

impl fmt::Display for MoveReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MoveReason::Promote => "promote",
            MoveReason::Demote => "demote",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Move {
    pub region_id: u64,
    pub start_page: u64,
    pub len_pages: u64,
    pub src: TierId,
    pub dst: TierId,
    pub reason: MoveReason,
    /// Bytes that actually change tier.
    pub bytes: u64,
}

/// Ordered moves; executing them in order never overfills a tier.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MigrationPlan {
    pub moves: Vec<Move>,
    pub promoted_bytes: u64,
    pub demoted_bytes: u64,
}

impl MigrationPlan {
    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    pub fn promotions(&self) -> impl Iterator<Item = &Move> {
        self.moves
            .iter()
            .filter(|m| m.reason == MoveReason::Promote)
    }
}

/// Free space and residency while a plan is being built.
#[derive(Clone, Debug)]
pub struct PlanState {
    pub free: Vec<u64>,
    pub(crate) page_bytes: u64,
    tier_of: BTreeMap<u64, TierId>,
    pub(crate) locked: HashSet<u64>,
    promoted: HashSet<u64>,
}

impl PlanState {
    pub fn new(topology: &TierTopology) -> Self {
        PlanState {
            free: topology.free_bytes_all(),
            page_bytes: topology.base_page_bytes(),
            tier_of: BTreeMap::new(),
            locked: HashSet::new(),
            promoted: HashSet::new(),
        }
    }

    pub(crate) fn current_tier(&self, c: &Candidate) -> TierId {
        self.tier_of.get(&c.id).copied().unwrap_or(c.tier)
    }

    pub(crate) fn apply(&mut self, c: &Candidate, dst: TierId) -> u64 {
        let mut moved = 0;
        for &(t, n) in &c.pages {
            if t != dst {
                self.free[t.0] += n * self.page_bytes;
                moved += n;
            }
        }
        let bytes = moved * self.page_bytes;
        self.free[dst.0] -= bytes;
        self.tier_of.insert(c.id, dst);
        self.locked.insert(c.id);
        bytes
    }
}

/// Order used everywhere: colder first, then lower id.
fn colder(a: &Candidate, b: &Candidate) -> std::cmp::Ordering {
    a.whi.total_cmp(&b.whi).then(a.id.cmp(&b.id))
}

/// Frees `need_bytes` on `tier` by demoting its coldest regions one tier
/// down in their owner's view, cascading when that tier is full too.
/// `colder_than` limits victims to regions strictly colder than a candidate.
#[allow(clippy::too_many_arguments)]
fn make_room(
    tier: TierId,
    need_bytes: u64,
    candidates: &[Candidate],
    hist: &HotnessHistogram,
    topology: &TierTopology,
    state: &mut PlanState,
    colder_than: Option<&Candidate>,
    chain: &mut Vec<TierId>,
) -> Result<Vec<Move>> {
    if state.free[tier.0] >= need_bytes {
        return Ok(Vec::new());
    }
    chain.push(tier);
    let mut victims: Vec<&Candidate> = candidates
        .iter()
        .filter(|c| {
            !state.locked.contains(&c.id)
                && !state.promoted.contains(&c.id)
                && state.current_tier(c) == tier
                && c.resident_in(tier)
                && colder_than.is_none_or(|h| colder(c, h).is_lt())
        })
        .collect();
    victims.sort_by(|a, b| {
        let (ba, bb) = (hist.bucket_of(a.whi), hist.bucket_of(b.whi));
        ba.cmp(&bb).then(colder(a, b))
    });
    let mut moves = Vec::new();
    for v in victims {
        if state.free[tier.0] >= need_bytes {
            break;
        }
        let view = topology.view(v.node);
        let pos = view.iter().position(|&t| t == tier).unwrap_or(view.len());
        let lower: Vec<TierId> = view[pos + 1..]
            .iter()
            .copied()
            .filter(|t| !chain.contains(t))
            .collect();
        let bytes = v.len_pages * state.page_bytes;
        let mut placed = false;
        // Next lower tier first, cascading into it if needed; then any
        // further tier that already has room.
        if let Some(&next) = lower.first() {
            let mut trial = state.clone();
            if let Ok(mut sub) = make_room(
                next, bytes, candidates, hist, topology, &mut trial, None, chain,
            ) {
                *state = trial;
                moves.append(&mut sub);
                moves.push(demote(v, tier, next, state));
                placed = true;
            }
        }
        if !placed {
            if let Some(&dst) = lower.iter().skip(1).find(|t| state.free[t.0] >= bytes) {
                moves.push(demote(v, tier, dst, state));
            }
        }
    }
    chain.pop();
    if state.free[tier.0] >= need_bytes {
        Ok(moves)
    } else {
        Err(Error::MemoryExhausted(format!(
            "cannot free {} bytes on tier {} ({} free)",
            need_bytes, tier, state.free[tier.0]
        )))
    }
}

fn demote(v: &Candidate, src: TierId, dst: TierId, state: &mut PlanState) -> Move {
    let bytes = state.apply(v, dst);
    Move {
        region_id: v.id,
        start_page: v.start_page,
        len_pages: v.len_pages,
        src,
        dst,
        reason: MoveReason::Demote,
        bytes,
    }
}

/// Demotions that leave at least `need_bytes` free on `tier`.
pub fn plan_demotions(
    topology: &TierTopology,
    tier: TierId,
    need_bytes: u64,
    candidates: &[Candidate],
    hist: &HotnessHistogram,
    state: &mut PlanState,
) -> Result<MigrationPlan> {
    if need_bytes == 0 {
        return Ok(MigrationPlan::default());
    }
    let mut trial = state.clone();
    let moves = make_room(
        tier,
        need_bytes,
        candidates,
        hist,
        topology,
        &mut trial,
        None,
        &mut Vec::new(),
    )?;
    *state = trial;
    let demoted_bytes = moves.iter().map(|m| m.bytes).sum();
    Ok(MigrationPlan {
        moves,
        promoted_bytes: 0,
        demoted_bytes,
    })
}

/// Promotes the hottest regions straight to the fastest tier with room in
/// their dominant accessor's view, demoting colder regions to make room,
/// until `n_bytes` have been promoted or candidates run out. A region larger
/// than `n_bytes` is taken only as the first promotion, and ends the plan.
pub fn plan_promotions(
    hist: &HotnessHistogram,
    candidates: &[Candidate],
    topology: &TierTopology,
    n_bytes: u64,
    state: &mut PlanState,
) -> MigrationPlan {
    let mut plan = MigrationPlan::default();
    let mut order: Vec<&Candidate> = candidates
        .iter()
        .filter(|c| hist.bucket_index(c.id).is_some())
        .collect();
    order.sort_by(|a, b| {
        let (ba, bb) = (hist.bucket_of(a.whi), hist.bucket_of(b.whi));
        bb.cmp(&ba)
            .then(b.whi.total_cmp(&a.whi))
            .then(a.id.cmp(&b.id))
    });
    for c in order {
        if plan.promoted_bytes >= n_bytes {
            break;
        }
        if state.locked.contains(&c.id) {
            continue;
        }
        let view = topology.view(c.node);
        let here = state.current_tier(c);
        let rank_here = view.iter().position(|&t| t == here).unwrap_or(view.len());
        for &dst in &view[..rank_here.min(view.len())] {
            let bytes = c.pages_outside(dst) * state.page_bytes;
            // A region larger than N may only move on its own.
            if plan.promoted_bytes + bytes > n_bytes && plan.promoted_bytes > 0 {
                break;
            }
            if try_promote(c, dst, bytes, candidates, hist, topology, state, &mut plan) {
                break;
            }
        }
    }
    plan
}

/// Moves `c` to `dst` if room can be made by demoting colder regions.
/// `bytes` is what the move adds to `dst`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn try_promote(
    c: &Candidate,
    dst: TierId,
    bytes: u64,
    candidates: &[Candidate],
    hist: &HotnessHistogram,
    topology: &TierTopology,
    state: &mut PlanState,
    plan: &mut MigrationPlan,
) -> bool {
    let mut trial = state.clone();
    trial.promoted.insert(c.id);
    let Ok(mut room) = make_room(
        dst,
        bytes,
        candidates,
        hist,
        topology,
        &mut trial,
        Some(c),
        &mut Vec::new(),
    ) else {
        return false;
    };
    *state = trial;
    plan.demoted_bytes += room.iter().map(|m| m.bytes).sum::<u64>();
    plan.moves.append(&mut room);
    let moved = state.apply(c, dst);
    plan.promoted_bytes += moved;
    plan.moves.push(Move {
        region_id: c.id,
        start_page: c.start_page,
        len_pages: c.len_pages,
        src: c.tier,
        dst,
        reason: MoveReason::Promote,
        bytes: moved,
    });
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memmodel::TopologySpec;

    const PAGE: u64 = 4096;

    fn cand(id: u64, len: u64, whi: f64, tier: usize, node: usize) -> Candidate {
        Candidate {
            id,
            start_page: id,
            len_pages: len,
            whi,
            tier: TierId(tier),
            pages: vec![(TierId(tier), len)],
            node: NodeId(node),
        }
    }

    /// Free-space state with the candidates' pages already placed.
    fn state_for(topo: &TierTopology, cands: &[Candidate]) -> PlanState {
        let mut s = PlanState::new(topo);
        for c in cands {
            s.free[c.tier.0] -= c.len_pages * PAGE;
        }
        s
    }

    #[test]
    fn ema_examples() {
        assert_eq!(update_ema(Some(2.0), 3.0, 0.5), 2.5);
        assert_eq!(update_ema(None, 1.7, 0.5), 1.7);
        assert_eq!(update_ema(Some(0.3), 2.2, 1.0), 2.2);
        let mut w = 0.0;
        for _ in 0..200 {
            w = update_ema(Some(w), 1.25, 0.5);
        }
        assert!((w - 1.25).abs() < 1e-12);
    }

    #[test]
    fn histogram_floor_buckets() {
        let cands = [
            cand(0, 1, 0.05, 0, 0),
            cand(1, 1, 1.55, 0, 0),
            cand(2, 1, 2.95, 0, 0),
            cand(3, 1, 3.0, 0, 0),
        ];
        let h = build_histogram(&cands, 0.1, 3);
        assert_eq!(h.buckets.len(), 30);
        assert_eq!(h.bucket_index(0), Some(0));
        assert_eq!(h.bucket_index(1), Some(15));
        assert_eq!(h.bucket_index(2), Some(29));
        assert_eq!(h.bucket_index(3), Some(29));
    }

    #[test]
    fn equal_whi_single_bucket() {
        let cands: Vec<_> = (0..5).map(|i| cand(i, 2, 1.0, 0, 0)).collect();
        let h = build_histogram(&cands, 0.1, 3);
        assert_eq!(
            h.buckets.iter().filter(|b| !b.members.is_empty()).count(),
            1
        );
    }

    #[test]
    fn incremental_update_matches_rebuild() {
        let mut cands: Vec<_> = (0..6).map(|i| cand(i, 2, i as f64 * 0.4, 0, 0)).collect();
        let mut h = build_histogram(&cands, 0.1, 3);
        cands[2].whi = 2.9;
        h.update(2, 2.9, 2);
        assert_eq!(h, build_histogram(&cands, 0.1, 3));
    }

    fn two_tier(fast_pages: u64, slow_pages: u64) -> TierTopology {
        TierTopology::build(&TopologySpec::two_tier(
            fast_pages * PAGE,
            slow_pages * PAGE,
        ))
        .unwrap()
    }

    #[test]
    fn skips_regions_already_fast() {
        let topo = two_tier(100, 100);
        let cands = vec![
            cand(0, 4, 3.0, 0, 0),
            cand(10, 4, 2.0, 1, 0),
            cand(20, 4, 1.0, 1, 0),
        ];
        let h = build_histogram(&cands, 0.1, 3);
        let mut st = state_for(&topo, &cands);
        let plan = plan_promotions(&h, &cands, &topo, 4 * PAGE, &mut st);
        assert_eq!(plan.moves.len(), 1);
        assert_eq!(plan.moves[0].region_id, 10);
        assert_eq!(plan.promoted_bytes, 4 * PAGE);
    }

    #[test]
    fn all_placed_means_empty_plan() {
        let topo = two_tier(100, 100);
        let cands = vec![cand(0, 4, 3.0, 0, 0), cand(10, 4, 0.0, 1, 0)];
        let h = build_histogram(&cands, 0.1, 3);
        let mut st = state_for(&topo, &cands);
        // The cold one is not worth displacing anything and N is spent on nothing.
        let plan = plan_promotions(&h, &cands[..1], &topo, 100 * PAGE, &mut st);
        assert!(plan.is_empty());
    }

    #[test]
    fn full_fast_tier_demotes_coldest() {
        let topo = two_tier(8, 100);
        let cands = vec![
            cand(0, 4, 0.2, 0, 0),
            cand(4, 4, 0.1, 0, 0),
            cand(10, 4, 2.5, 1, 0),
        ];
        let h = build_histogram(&cands, 0.1, 3);
        let mut st = state_for(&topo, &cands);
        let plan = plan_promotions(&h, &cands, &topo, 4 * PAGE, &mut st);
        let ids: Vec<_> = plan.moves.iter().map(|m| (m.region_id, m.reason)).collect();
        assert_eq!(
            ids,
            vec![(4, MoveReason::Demote), (10, MoveReason::Promote)]
        );
    }

    #[test]
    fn demotion_cascades_two_levels() {
        let spec = TopologySpec::four_tier([4 * PAGE, 4 * PAGE, 4 * PAGE, 100 * PAGE]);
        let topo = TierTopology::build(&spec).unwrap();
        let cands = vec![
            cand(0, 4, 0.5, 0, 0),
            cand(4, 4, 0.4, 2, 0),
            cand(8, 4, 0.3, 1, 0),
        ];
        let h = build_histogram(&cands, 0.1, 3);
        let mut st = state_for(&topo, &cands);
        let before: u64 = st.free.iter().sum();
        let plan = plan_demotions(&topo, TierId(0), 4 * PAGE, &cands, &h, &mut st).unwrap();
        let hops: Vec<_> = plan
            .moves
            .iter()
            .map(|m| (m.region_id, m.src.0, m.dst.0))
            .collect();
        assert_eq!(hops, vec![(4, 2, 3), (8, 1, 2), (0, 0, 1)]);
        assert_eq!(st.free.iter().sum::<u64>(), before);
        assert_eq!(st.free[0], 4 * PAGE);
    }

    #[test]
    fn no_room_anywhere_is_memory_exhausted() {
        let topo = two_tier(4, 4);
        let cands = vec![cand(0, 4, 0.5, 0, 0), cand(4, 4, 0.4, 1, 0)];
        let h = build_histogram(&cands, 0.1, 3);
        let mut st = state_for(&topo, &cands);
        let err = plan_demotions(&topo, TierId(0), PAGE, &cands, &h, &mut st).unwrap_err();
        assert!(matches!(err, Error::MemoryExhausted(_)));
        assert!(plan_demotions(&topo, TierId(0), 0, &cands, &h, &mut st)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn destination_follows_dominant_node() {
        let topo = TierTopology::build(&TopologySpec::four_tier([64 * PAGE; 4])).unwrap();
        assert_eq!(resolve_destination(&[5, 2], &topo)[0], TierId(0));
        assert_eq!(resolve_destination(&[3, 3], &topo)[0], TierId(0));
        assert_eq!(resolve_destination(&[0, 0], &topo)[0], TierId(0));
        assert_eq!(resolve_destination(&[0, 9], &topo)[0], TierId(1));
        let cands = vec![cand(0, 4, 3.0, 3, 1)];
        let h = build_histogram(&cands, 0.1, 3);
        let mut st = state_for(&topo, &cands);
        let plan = plan_promotions(&h, &cands, &topo, 4 * PAGE, &mut st);
        assert_eq!(plan.moves[0].dst, TierId(1));
    }
}
