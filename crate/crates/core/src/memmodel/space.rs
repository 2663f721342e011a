// Copyright 2026 The tiersim Authors
// SPDX-License-Identifier: Apache-2.0

use crate::error::{Error, Result};
use crate::memmodel::{CostLedger, TierId, TierTopology};
use crate::workload::AccessEvent;

/// Placement and page-table bits for one virtual page, as seen by callers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PagePlacement {
    pub vpage: u64,
    pub tier: TierId,
    pub is_huge: bool,
    pub access_bit: bool,
    pub dirty_bit: bool,
}

#[derive(Clone, Copy, Debug)]
struct Slot {
    tier: u16,
    huge: bool,
    access: bool,
    dirty: bool,
}

/// Virtual address space of the simulated process.
///
/// A huge page owns `huge_page_pages` aligned slots that always share one
/// tier; its access and dirty bits live on the head slot, so any access to
/// the huge page is observed by scanning any of its slots.
#[derive(Clone, Debug)]
pub struct AddressSpace {
    slots: Vec<Option<Slot>>,
    base_page_bytes: u64,
    huge_page_pages: u64,
    tier_accesses: Vec<u64>,
    placed_pages: Vec<u64>,
    has_huge: bool,
}

impl AddressSpace {
    pub fn new(footprint_pages: u64, topology: &TierTopology) -> Self {
        AddressSpace {
            slots: vec![None; footprint_pages as usize],
            base_page_bytes: topology.base_page_bytes(),
            huge_page_pages: topology.huge_page_pages(),
            tier_accesses: vec![0; topology.num_tiers()],
            placed_pages: vec![0; topology.num_tiers()],
            has_huge: false,
        }
    }

    pub fn footprint_pages(&self) -> u64 {
        self.slots.len() as u64
    }

    pub fn base_page_bytes(&self) -> u64 {
        self.base_page_bytes
    }

    pub fn huge_page_pages(&self) -> u64 {
        self.huge_page_pages
    }

    pub fn has_huge_pages(&self) -> bool {
        self.has_huge
    }

    fn slot(&self, vpage: u64) -> Result<&Slot> {
        self.slots
            .get(vpage as usize)
            .and_then(Option::as_ref)
            .ok_or(Error::Unmapped(vpage))
    }

    pub fn is_mapped(&self, vpage: u64) -> bool {
        self.slot(vpage).is_ok()
    }

    pub fn map_base(
        &mut self,
        vpage: u64,
        tier: TierId,
        topology: &mut TierTopology,
    ) -> Result<()> {
        let idx = vpage as usize;
        if idx >= self.slots.len() {
            return Err(Error::Unmapped(vpage));
        }
        if self.slots[idx].is_some() {
            return Err(Error::AlreadyMapped(vpage));
        }
        topology.reserve(tier, self.base_page_bytes)?;
        self.slots[idx] = Some(Slot {
            tier: tier.0 as u16,
            huge: false,
            access: false,
            dirty: false,
        });
        self.placed_pages[tier.0] += 1;
        Ok(())
    }

    /// Maps the huge page starting at `head` (which must be aligned).
    pub fn map_huge(&mut self, head: u64, tier: TierId, topology: &mut TierTopology) -> Result<()> {
        let hp = self.huge_page_pages;
        let end = head + hp;
        if head % hp != 0 || end > self.footprint_pages() {
            return Err(Error::Misaligned { start: head, end });
        }
        if let Some(p) = (head..end).find(|&p| self.slots[p as usize].is_some()) {
            return Err(Error::AlreadyMapped(p));
        }
        topology.reserve(tier, hp * self.base_page_bytes)?;
        for p in head..end {
            self.slots[p as usize] = Some(Slot {
                tier: tier.0 as u16,
                huge: true,
                access: false,
                dirty: false,
            });
        }
        self.placed_pages[tier.0] += hp;
        self.has_huge = true;
        Ok(())
    }

    /// First slot and length of the PTE unit (base page or huge page) holding `vpage`.
    pub fn unit_of(&self, vpage: u64) -> Result<(u64, u64)> {
        let slot = self.slot(vpage)?;
        if slot.huge {
            let hp = self.huge_page_pages;
            Ok((vpage - vpage % hp, hp))
        } else {
            Ok((vpage, 1))
        }
    }

    fn head(&self, vpage: u64) -> usize {
        match self.slots[vpage as usize] {
            Some(Slot { huge: true, .. }) => (vpage - vpage % self.huge_page_pages) as usize,
            _ => vpage as usize,
        }
    }

    pub fn placement(&self, vpage: u64) -> Result<PagePlacement> {
        let slot = self.slot(vpage)?;
        let head = self.slots[self.head(vpage)].expect("head of a mapped unit is mapped");
        Ok(PagePlacement {
            vpage,
            tier: TierId(slot.tier as usize),
            is_huge: slot.huge,
            access_bit: head.access,
            dirty_bit: head.dirty,
        })
    }

    pub fn tier_of(&self, vpage: u64) -> Result<TierId> {
        self.slot(vpage).map(|s| TierId(s.tier as usize))
    }

    /// Replays one application access and returns its cost.
    pub fn apply_access(&mut self, topology: &TierTopology, access: &AccessEvent) -> Result<f64> {
        let tier = self.tier_of(access.vpage)?;
        let head = self.head(access.vpage);
        let slot = self.slots[head].as_mut().expect("mapped");
        slot.access = true;
        if access.is_write {
            slot.dirty = true;
        }
        self.tier_accesses[tier.0] += 1;
        Ok(topology.access_cost(tier, access.node))
    }

    /// Reads and clears the access bit of `vpage`'s PTE, charging `cost` to
    /// the profiling ledger.
    pub fn scan_pte(&mut self, vpage: u64, ledger: &mut CostLedger, cost: f64) -> Result<bool> {
        self.slot(vpage)?;
        let head = self.head(vpage);
        let slot = self.slots[head].as_mut().expect("mapped");
        let seen = slot.access;
        slot.access = false;
        ledger.profiling += cost;
        Ok(seen)
    }

    /// Clears the access bit without charging a scan (arming a new sample).
    pub fn clear_access_bit(&mut self, vpage: u64) -> Result<()> {
        self.slot(vpage)?;
        let head = self.head(vpage);
        self.slots[head].as_mut().expect("mapped").access = false;
        Ok(())
    }

    /// True when no huge page straddles `start` or `end`.
    pub fn is_unit_aligned(&self, start: u64, end: u64) -> bool {
        if !self.has_huge {
            return true;
        }
        let hp = self.huge_page_pages;
        let inside = |b: u64| {
            b % hp != 0
                && (b as usize) < self.slots.len()
                && matches!(self.slots[b as usize], Some(Slot { huge: true, .. }))
        };
        !inside(start) && !inside(end)
    }

    /// Heads of the PTE units inside `[start, start + len)`.
    pub fn unit_heads(&self, start: u64, len: u64) -> Vec<u64> {
        let mut heads = Vec::new();
        let end = (start + len).min(self.footprint_pages());
        let mut p = start;
        while p < end {
            match self.slots[p as usize] {
                Some(Slot { huge: true, .. }) => {
                    let head = p - p % self.huge_page_pages;
                    heads.push(head);
                    p = head + self.huge_page_pages;
                }
                Some(_) => {
                    heads.push(p);
                    p += 1;
                }
                None => p += 1,
            }
        }
        heads
    }

    /// Number of PTE units inside `[start, start + len)`.
    pub fn unit_count(&self, start: u64, len: u64) -> u64 {
        if self.has_huge {
            self.unit_heads(start, len).len() as u64
        } else {
            let end = (start + len).min(self.footprint_pages());
            (start..end)
                .filter(|&p| self.slots[p as usize].is_some())
                .count() as u64
        }
    }

    /// Pages of `[start, start + len)` per tier, in tier order.
    pub fn tier_pages(&self, start: u64, len: u64) -> Vec<(TierId, u64)> {
        let mut counts: Vec<u64> = vec![0; self.placed_pages.len()];
        let end = (start + len).min(self.footprint_pages());
        for p in start..end {
            if let Some(s) = self.slots[p as usize] {
                counts[s.tier as usize] += 1;
            }
        }
        counts
            .into_iter()
            .enumerate()
            .filter(|(_, c)| *c > 0)
            .map(|(t, c)| (TierId(t), c))
            .collect()
    }

    /// Moves every page of `[start, start + len)` that is not already on
    /// `dst`. The range must be mapped and must not bisect a huge page.
    /// Access and dirty bits of moved pages are cleared. Returns the number
    /// of base pages moved.
    pub fn remap_range(
        &mut self,
        start: u64,
        len: u64,
        dst: TierId,
        topology: &mut TierTopology,
    ) -> Result<u64> {
        let end = start + len;
        if end > self.footprint_pages() {
            return Err(Error::Unmapped(end - 1));
        }
        if !self.is_unit_aligned(start, end) {
            return Err(Error::Misaligned { start, end });
        }
        let mut moving = 0u64;
        for p in start..end {
            let s = self.slot(p)?;
            if s.tier as usize != dst.0 {
                moving += 1;
            }
        }
        topology.reserve(dst, moving * self.base_page_bytes)?;
        for p in start..end {
            let s = self.slots[p as usize].as_mut().expect("checked");
            if s.tier as usize != dst.0 {
                let src = s.tier as usize;
                topology.release(TierId(src), self.base_page_bytes);
                self.placed_pages[src] -= 1;
                self.placed_pages[dst.0] += 1;
                s.tier = dst.0 as u16;
                s.access = false;
                s.dirty = false;
            }
        }
        Ok(moving)
    }

    pub fn placed_bytes(&self, tier: TierId) -> u64 {
        self.placed_pages.get(tier.0).copied().unwrap_or(0) * self.base_page_bytes
    }

    pub fn total_placed_bytes(&self) -> u64 {
        self.placed_pages.iter().sum::<u64>() * self.base_page_bytes
    }

    /// Application accesses served by each tier so far.
    pub fn tier_access_counts(&self) -> &[u64] {
        &self.tier_accesses
    }
}
