// Copyright 2026 The tiersim Authors
// SPDX-License-Identifier: Apache-2.0

use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memmodel::TierId;

/// Abstract costs of profiling and migration, in the same units as tier
/// access costs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostModel {
    /// Cost of reading and resetting one PTE access bit.
    pub scan_cost: f64,
    /// Cost of one hint fault relative to a PTE scan.
    pub hint_fault_multiplier: f64,
    pub step_alloc: f64,
    pub step_unmap: f64,
    pub step_copy: f64,
    pub step_map: f64,
    /// Copy cost multiplier per (src, dst) tier pair. All ones when absent.
    pub inter_tier_factor: Option<Vec<Vec<f64>>>,
    /// One counter sample per this many slowest-tier accesses.
    pub pebs_sample_period: u64,
    /// Extra exposed cost per migrated page for moving its page-table pages.
    pub pte_migration_surcharge: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            scan_cost: 1.0,
            hint_fault_multiplier: 12.0,
            step_alloc: 1.0,
            step_unmap: 1.0,
            step_copy: 2.0,
            step_map: 1.0,
            inter_tier_factor: None,
            pebs_sample_period: 200,
            pte_migration_surcharge: 0.0,
        }
    }
}

impl CostModel {
    pub fn validate(&self, num_tiers: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::CostModel(msg));
        let named = [
            ("scan_cost", self.scan_cost),
            ("hint_fault_multiplier", self.hint_fault_multiplier),
            ("step_alloc", self.step_alloc),
            ("step_unmap", self.step_unmap),
            ("step_copy", self.step_copy),
            ("step_map", self.step_map),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.pebs_sample_period == 0 {
            return bad("pebs_sample_period must be at least 1".into());
        }
        if !(self.pte_migration_surcharge.is_finite() && self.pte_migration_surcharge >= 0.0) {
            return bad("pte_migration_surcharge must be non-negative".into());
        }
        if let Some(m) = &self.inter_tier_factor {
            if m.len() != num_tiers || m.iter().any(|row| row.len() != num_tiers) {
                return bad(format!("inter_tier_factor must be {num_tiers}x{num_tiers}"));
            }
            for (i, row) in m.iter().enumerate() {
                for (j, &f) in row.iter().enumerate() {
                    if !(f.is_finite() && f >= 1.0) {
                        return bad(format!("inter_tier_factor[{i}][{j}] must be at least 1"));
                    }
                    if f != m[j][i] {
                        return bad(format!("inter_tier_factor is not symmetric at ({i}, {j})"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn copy_factor(&self, src: TierId, dst: TierId) -> f64 {
        self.inter_tier_factor
            .as_ref()
            .map_or(1.0, |m| m[src.0][dst.0])
    }

    /// Synchronous cost of moving one base page.
    pub fn sync_page_cost(&self, src: TierId, dst: TierId) -> f64 {
        self.step_alloc
            + self.step_unmap
            + self.step_copy * self.copy_factor(src, dst)
            + self.step_map
            + self.pte_migration_surcharge
    }

    /// Scan cost including the amortized hint-fault share when origin
    /// sampling is on.
    pub fn effective_scan_cost(&self, origin_sampling: bool, hint_fault_period: u64) -> f64 {
        if origin_sampling {
            self.scan_cost * (1.0 + self.hint_fault_multiplier / hint_fault_period as f64)
        } else {
            self.scan_cost
        }
    }
}

/// Simulated time spent per category.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct CostLedger {
    pub app: f64,
    pub profiling: f64,
    pub migration_exposed: f64,
    /// Copy work done off the critical path; not part of the run time.
    pub migration_background: f64,
}

impl CostLedger {
    /// Time on the application's critical path.
    pub fn total(&self) -> f64 {
        self.app + self.profiling + self.migration_exposed
    }
}

impl AddAssign for CostLedger {
    fn add_assign(&mut self, rhs: Self) {
        self.app += rhs.app;
        self.profiling += rhs.profiling;
        self.migration_exposed += rhs.migration_exposed;
        self.migration_background += rhs.migration_background;
    }
}
