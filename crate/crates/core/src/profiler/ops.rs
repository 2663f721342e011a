// Copyright 2026 The tiersim Authors
// SPDX-License-Identifier: Apache-2.0

//! Region merge, split, quota redistribution and budget enforcement.

use rand::Rng;

use crate::error::{Error, Result};
use crate::memmodel::{AddressSpace, TierTopology};
use crate::profiler::region::{Region, RegionSet};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MergeOutcome {
    pub merges: usize,
    pub saved: u64,
}

fn mergeable(a: &Region, b: &Region) -> bool {
    !a.skipped && !b.skipped && a.tier == b.tier && a.end_page() == b.start_page
}

fn weighted(a: f64, la: u64, b: f64, lb: u64) -> f64 {
    (a * la as f64 + b * lb as f64) / (la + lb) as f64
}

/// Folds `b` (the right neighbour) into `a`. Returns the quota saved.
fn merge_into(a: &mut Region, b: Region, max_quota: u64) -> u64 {
    let (la, lb) = (a.len_pages, b.len_pages);
    let q = ((a.quota + b.quota) / 2).max(1).min(max_quota.max(1));
    let saved = a.quota + b.quota - q;
    // Interleave both sample lists so the survivors cover both halves.
    let mut samples = Vec::with_capacity(q as usize);
    let mut counts = Vec::with_capacity(q as usize);
    let (mut i, mut j) = (0, 0);
    while (samples.len() as u64) < q && (i < a.samples.len() || j < b.samples.len()) {
        if i < a.samples.len() {
            samples.push(a.samples[i]);
            counts.push(a.counts[i]);
            i += 1;
        }
        if (samples.len() as u64) < q && j < b.samples.len() {
            samples.push(b.samples[j]);
            counts.push(b.counts[j]);
            j += 1;
        }
    }
    a.whi = match (a.has_whi, b.has_whi) {
        (true, true) => weighted(a.whi, la, b.whi, lb),
        (false, true) => b.whi,
        _ => a.whi,
    };
    a.has_whi |= b.has_whi;
    a.hi = weighted(a.hi, la, b.hi, lb);
    a.hi_prev = weighted(a.hi_prev, la, b.hi_prev, lb);
    a.len_pages += lb;
    a.quota = samples.len() as u64;
    a.samples = samples;
    a.counts = counts;
    for (x, y) in a.origin_counts.iter_mut().zip(&b.origin_counts) {
        *x += y;
    }
    a.origin_carry += b.origin_carry;
    a.fresh = true;
    saved + (q - a.quota)
}

/// Merges adjacent same-tier regions whose hotness differs by less than
/// `tau1`, repeating until no pair qualifies. Saved quota goes to the spare
/// pool.
pub fn merge_pass(set: &mut RegionSet, tau1: f64) -> MergeOutcome {
    let mut out = MergeOutcome::default();
    loop {
        let before = out.merges;
        let mut merged: Vec<Region> = Vec::with_capacity(set.regions.len());
        for r in set.regions.drain(..) {
            match merged.last_mut() {
                Some(cur) if mergeable(cur, &r) && (cur.hi - r.hi).abs() < tau1 => {
                    let cap = cur.quota + r.quota;
                    out.saved += merge_into(cur, r, cap);
                    out.merges += 1;
                }
                _ => merged.push(r),
            }
        }
        set.regions = merged;
        if out.merges == before {
            break;
        }
    }
    set.spare += out.saved;
    out
}

/// Split point for `r`: the midpoint, moved to the nearest huge-page
/// boundary when it would bisect one.
fn split_point(r: &Region, space: &AddressSpace) -> Option<u64> {
    if r.len_pages < 2 {
        return None;
    }
    let mid = r.start_page + r.len_pages / 2;
    let point = if space.is_unit_aligned(mid, mid) {
        mid
    } else {
        let hp = space.huge_page_pages();
        let down = mid - mid % hp;
        let up = down + hp;
        if mid - down <= up - mid {
            down
        } else {
            up
        }
    };
    (point > r.start_page && point < r.end_page()).then_some(point)
}

fn half<R: Rng>(
    parent: &Region,
    start: u64,
    len: u64,
    quota: u64,
    space: &AddressSpace,
    rng: &mut R,
) -> Region {
    let mut h = Region::new(start, len, parent.tier, parent.origin_counts.len());
    h.whi = parent.whi;
    h.has_whi = parent.has_whi;
    h.hi_prev = parent.hi_prev;
    for (s, c) in parent.samples.iter().zip(&parent.counts) {
        if h.contains(*s) && (h.samples.len() as u64) < quota {
            h.samples.push(*s);
            h.counts.push(*c);
        }
    }
    h.hi = h.mean_count().unwrap_or(parent.hi);
    let missing = quota as usize - h.samples.len();
    h.add_samples(space, rng, missing);
    h.quota = h.samples.len() as u64;
    h.fresh = true;
    h
}

/// Splits every profiled region whose per-sample counts spread by more
/// than `tau2`. Returns the number of splits.
pub fn split_pass<R: Rng>(
    set: &mut RegionSet,
    tau2: f64,
    space: &AddressSpace,
    rng: &mut R,
) -> usize {
    let mut splits = 0;
    let mut out: Vec<Region> = Vec::with_capacity(set.regions.len());
    for r in std::mem::take(&mut set.regions) {
        let spread = match (r.counts.iter().max(), r.counts.iter().min()) {
            (Some(&hi), Some(&lo)) => (hi - lo) as f64,
            _ => 0.0,
        };
        let point = (!r.fresh && !r.skipped && spread > tau2)
            .then(|| split_point(&r, space))
            .flatten();
        let Some(point) = point else {
            out.push(r);
            continue;
        };
        let mut total = r.quota;
        if total < 2 {
            if set.spare == 0 {
                out.push(r);
                continue;
            }
            set.spare -= 1;
            total = 2;
        }
        let (llen, rlen) = (point - r.start_page, r.end_page() - point);
        let mut lq = total / 2;
        let mut rq = total - lq;
        let (lcap, rcap) = (
            space.unit_count(r.start_page, llen),
            space.unit_count(point, rlen),
        );
        if lq > lcap {
            rq += lq - lcap;
            lq = lcap;
        }
        if rq > rcap {
            lq = (lq + rq - rcap).min(lcap);
            rq = rcap;
        }
        let mut left = half(&r, r.start_page, llen, lq, space, rng);
        let mut right = half(&r, point, rlen, rq, space, rng);
        // Origin tallies are shared out by length so merges add them back exactly.
        for (i, &c) in r.origin_counts.iter().enumerate() {
            let l = c * llen / r.len_pages;
            left.origin_counts[i] = l;
            right.origin_counts[i] = c - l;
        }
        set.spare += total - left.quota - right.quota;
        out.push(left);
        out.push(right);
        splits += 1;
    }
    set.regions = out;
    splits
}

/// Score used to pick quota recipients.
pub fn variance_score(r: &Region) -> f64 {
    (r.hi - r.hi_prev).abs()
}

/// Top `k` eligible regions by variance score, ties to the lower id.
pub(crate) fn top_variance(
    set: &RegionSet,
    k: usize,
    eligible: impl Fn(&Region) -> bool,
) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..set.regions.len())
        .filter(|&i| eligible(&set.regions[i]))
        .collect();
    idx.sort_by(|&a, &b| {
        let (ra, rb) = (&set.regions[a], &set.regions[b]);
        variance_score(rb)
            .total_cmp(&variance_score(ra))
            .then(ra.id.cmp(&rb.id))
    });
    idx.truncate(k);
    idx
}

/// Even split of `amount` over `n` recipients, remainder to the first ones.
pub(crate) fn even_shares(amount: u64, n: usize) -> Vec<u64> {
    if n == 0 {
        return Vec::new();
    }
    let base = amount / n as u64;
    let rem = (amount % n as u64) as usize;
    (0..n).map(|i| base + u64::from(i < rem)).collect()
}

/// Hands the spare pool to the `top_k` regions with the largest hotness
/// change. Returns `(region id, samples added)` per recipient.
pub fn redistribute_quota<R: Rng>(
    set: &mut RegionSet,
    top_k: usize,
    space: &AddressSpace,
    rng: &mut R,
) -> Vec<(u64, u64)> {
    if set.spare == 0 {
        return Vec::new();
    }
    let picks = top_variance(set, top_k, |r| !r.skipped && r.capacity(space) > r.quota);
    let shares = even_shares(set.spare, picks.len());
    let mut given = Vec::with_capacity(picks.len());
    for (i, share) in picks.into_iter().zip(shares) {
        let r = &mut set.regions[i];
        let added = r.add_samples(space, rng, share as usize) as u64;
        r.quota += added;
        set.spare -= added;
        given.push((r.id, added));
    }
    given
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnforceOutcome {
    pub rounds: usize,
    /// Highest merge threshold used; the configured value applies again
    /// next interval.
    pub tau1_reached: f64,
    pub merges: usize,
    pub forced_merges: usize,
    pub dropped: usize,
    pub warnings: Vec<String>,
}

/// Smallest step below `tau2` that the escalated merge threshold may reach.
pub const TAU1_EPSILON: f64 = 1e-6;

/// Merges regions until there are at most `num_ps` of them, escalating the
/// merge threshold one count unit per round. When the cap is reached,
/// slowest-tier regions are coarsened (merged regardless of hotness) and a
/// warning is recorded.
pub fn enforce_budget(
    set: &mut RegionSet,
    num_ps: u64,
    tau1: f64,
    tau2: f64,
    space: &AddressSpace,
    topology: &TierTopology,
) -> Result<EnforceOutcome> {
    let cap = (tau2 - TAU1_EPSILON).max(tau1);
    let mut out = EnforceOutcome {
        tau1_reached: tau1,
        ..Default::default()
    };
    let mut t = tau1;
    while set.len() as u64 > num_ps {
        if t < cap {
            t = (t + 1.0).min(cap);
            out.rounds += 1;
            out.merges += merge_pass(set, t).merges;
            continue;
        }
        if out.forced_merges == 0 && out.dropped == 0 {
            out.warnings.push(format!(
                "{} regions exceed the {} sample budget at the maximal merge threshold; coarsening",
                set.len(),
                num_ps
            ));
        }
        if coarsen_once(set, space, topology) {
            out.forced_merges += 1;
            continue;
        }
        // Nothing left to merge: give up the coldest slowest-tier region.
        let slowest = topology.slowest();
        let victim = (0..set.regions.len())
            .filter(|&i| set.regions[i].tier == slowest)
            .min_by(|&a, &b| {
                set.regions[a]
                    .whi
                    .total_cmp(&set.regions[b].whi)
                    .then(a.cmp(&b))
            });
        match victim {
            Some(i) => {
                let r = set.regions.remove(i);
                set.spare += r.quota;
                out.dropped += 1;
            }
            None => {
                return Err(Error::ConstraintInfeasible(format!(
                    "{} regions cannot be reduced to the {} sample budget",
                    set.len(),
                    num_ps
                )))
            }
        }
    }
    out.tau1_reached = t;
    normalize_quota(set, num_ps);
    Ok(out)
}

/// Merges one pair of neighbours regardless of hotness, preferring the
/// slowest tier and the smallest combined size. Neighbours separated by an
/// uncovered gap of the same tier merge across it.
fn coarsen_once(set: &mut RegionSet, space: &AddressSpace, topology: &TierTopology) -> bool {
    let order = topology.global_order();
    let rank = |t| {
        order
            .iter()
            .rev()
            .position(|&x| x == t)
            .unwrap_or(usize::MAX)
    };
    let mut best: Option<(usize, u64, usize)> = None;
    for i in 1..set.regions.len() {
        let (a, b) = (&set.regions[i - 1], &set.regions[i]);
        if a.tier != b.tier {
            continue;
        }
        if a.end_page() != b.start_page {
            let gap = space.tier_pages(a.end_page(), b.start_page - a.end_page());
            if gap.len() != 1 || gap[0].0 != a.tier {
                continue;
            }
        }
        let key = (rank(a.tier), b.end_page() - a.start_page, i);
        if best.is_none_or(|k| key < k) {
            best = Some(key);
        }
    }
    let Some((_, _, i)) = best else { return false };
    let b = set.regions.remove(i);
    let a = &mut set.regions[i - 1];
    a.len_pages = b.start_page - a.start_page;
    let cap = a.quota + b.quota;
    set.spare += merge_into(a, b, cap);
    true
}

/// Restores `Σ quota + spare == num_ps`, trimming the largest quotas when
/// the regions hold more than the budget.
pub(crate) fn normalize_quota(set: &mut RegionSet, num_ps: u64) {
    set.num_ps = num_ps;
    let mut total = set.total_quota();
    while total > num_ps {
        let Some(i) = (0..set.regions.len())
            .filter(|&i| set.regions[i].quota > 1)
            .max_by_key(|&i| (set.regions[i].quota, std::cmp::Reverse(i)))
        else {
            break;
        };
        let r = &mut set.regions[i];
        r.quota -= 1;
        r.samples.pop();
        r.counts.pop();
        total -= 1;
    }
    set.spare = num_ps.saturating_sub(total);
}
