// Copyright 2026 The tiersim Authors
// SPDX-License-Identifier: Apache-2.0

//! Profiling quality against the oracle, and cost totals.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::memmodel::CostLedger;
use crate::profiler::RegionSet;

/// Default hot-detection threshold on the smoothed hotness scale.
pub const DEFAULT_DETECT_THRESHOLD: f64 = 1.5;

/// Every page of every region whose smoothed hotness reaches `threshold`,
/// in ascending order.
pub fn detect_hot_pages(regions: &RegionSet, threshold: f64) -> Vec<u64> {
    let mut pages: Vec<u64> = regions
        .regions
        .iter()
        .filter(|r| r.whi >= threshold)
        .flat_map(|r| r.start_page..r.end_page())
        .collect();
    pages.sort_unstable();
    pages.dedup();
    pages
}

/// Size of the intersection of two ascending, duplicate-free page lists.
fn intersection_len(a: &[u64], b: &[u64]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// `(recall, precision)` of `detected` against `oracle`. Both inputs are
/// ascending without duplicates. An empty side scores 1.
pub fn recall_precision(detected: &[u64], oracle: &[u64]) -> (f64, f64) {
    let hit = intersection_len(detected, oracle) as f64;
    let recall = if oracle.is_empty() {
        1.0
    } else {
        hit / oracle.len() as f64
    };
    let precision = if detected.is_empty() {
        1.0
    } else {
        hit / detected.len() as f64
    };
    (recall, precision)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeBreakdown {
    pub app: f64,
    pub profiling: f64,
    pub migration_exposed: f64,
    pub migration_background: f64,
    /// Profiling cost relative to application cost.
    pub profiling_fraction: f64,
}

impl TimeBreakdown {
    /// What the application waits for: app, profiling and exposed migration.
    pub fn total(&self) -> f64 {
        self.app + self.profiling + self.migration_exposed
    }
}

pub fn time_breakdown(ledgers: &[CostLedger]) -> TimeBreakdown {
    let mut sum = CostLedger::default();
    for l in ledgers {
        sum += *l;
    }
    TimeBreakdown {
        app: sum.app,
        profiling: sum.profiling,
        migration_exposed: sum.migration_exposed,
        migration_background: sum.migration_background,
        profiling_fraction: if sum.app > 0.0 {
            sum.profiling / sum.app
        } else {
            0.0
        },
    }
}

/// One row of the per-interval metrics file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalMetrics {
    pub interval: usize,
    pub recall: f64,
    pub precision: f64,
    pub app_cost: f64,
    pub prof_cost: f64,
    pub mig_cost: f64,
    /// Application accesses served by each tier during the interval.
    pub tier_accesses: Vec<u64>,
    pub merges: usize,
    pub splits: usize,
}

/// Writes the metrics CSV. Tier columns run `t1_acc..tN_acc` with at least
/// four of them; missing tiers read 0.
pub fn write_metrics_csv<W: Write>(
    out: W,
    rows: &[IntervalMetrics],
    num_tiers: usize,
) -> Result<()> {
    let cols = num_tiers.max(4);
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = [
        "interval",
        "recall",
        "precision",
        "app_cost",
        "prof_cost",
        "mig_cost",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((1..=cols).map(|t| format!("t{t}_acc")));
    header.push("merges".into());
    header.push("splits".into());
    w.write_record(&header)?;
    for m in rows {
        let mut rec = vec![
            m.interval.to_string(),
            m.recall.to_string(),
            m.precision.to_string(),
            m.app_cost.to_string(),
            m.prof_cost.to_string(),
            m.mig_cost.to_string(),
        ];
        rec.extend((0..cols).map(|t| m.tier_accesses.get(t).copied().unwrap_or(0).to_string()));
        rec.push(m.merges.to_string());
        rec.push(m.splits.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// First interval (0-based) at or after `from` whose recall reaches
/// `target`, counted from `from`.
pub fn intervals_to_recall(rows: &[IntervalMetrics], from: usize, target: f64) -> Option<usize> {
    rows.iter()
        .filter(|m| m.interval >= from)
        .find(|m| m.recall >= target)
        .map(|m| m.interval - from)
}

/// Mean of `f` over rows with `lo <= interval < hi`.
pub fn mean_over(
    rows: &[IntervalMetrics],
    lo: usize,
    hi: usize,
    f: impl Fn(&IntervalMetrics) -> f64,
) -> f64 {
    let sel: Vec<f64> = rows
        .iter()
        .filter(|m| (lo..hi).contains(&m.interval))
        .map(f)
        .collect();
    if sel.is_empty() {
        0.0
    } else {
        sel.iter().sum::<f64>() / sel.len() as f64
    }
}
