// Copyright 2026 The tiersim Authors
// SPDX-License-Identifier: Apache-2.0

//! Synthetic access traces and their per-interval ground truth.

use std::io::{Read, Write};

use rand::seq::index;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memmodel::NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AccessEvent {
    pub seq: u64,
    pub vpage: u64,
    pub is_write: bool,
    pub node: NodeId,
}

/// A flat, time-ordered access stream over pages `0..footprint_pages`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AccessTrace {
    events: Vec<AccessEvent>,
    footprint_pages: u64,
}

impl AccessTrace {
    pub fn new(events: Vec<AccessEvent>, footprint_pages: u64) -> Result<Self> {
        if footprint_pages == 0 {
            return Err(Error::Workload("zero footprint".into()));
        }
        for pair in events.windows(2) {
            if pair[1].seq <= pair[0].seq {
                return Err(Error::Workload(format!(
                    "seq {} does not increase",
                    pair[1].seq
                )));
            }
        }
        if let Some(e) = events.iter().find(|e| e.vpage >= footprint_pages) {
            return Err(Error::Workload(format!(
                "page {} outside footprint {}",
                e.vpage, footprint_pages
            )));
        }
        Ok(AccessTrace {
            events,
            footprint_pages,
        })
    }

    pub fn events(&self) -> &[AccessEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn footprint_pages(&self) -> u64 {
        self.footprint_pages
    }

    pub fn num_intervals(&self, accesses_per_interval: usize) -> usize {
        self.events.len().div_ceil(accesses_per_interval)
    }

    /// Events of interval `index`; empty past the end of the trace.
    pub fn interval(&self, index: usize, accesses_per_interval: usize) -> &[AccessEvent] {
        let start = (index * accesses_per_interval).min(self.events.len());
        let end = (start + accesses_per_interval).min(self.events.len());
        &self.events[start..end]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for e in &self.events {
            w.serialize(TraceRecord {
                seq: e.seq,
                vpage: e.vpage,
                rw: if e.is_write { 'W' } else { 'R' },
                node: e.node.0,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a trace written by [`AccessTrace::write_csv`]. The footprint is
    /// the largest page index plus one unless given.
    pub fn read_csv<R: Read>(input: R, footprint_pages: Option<u64>) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        if header.iter().collect::<Vec<_>>() != ["seq", "vpage", "rw", "node"] {
            return Err(Error::Workload(
                "trace header must be `seq,vpage,rw,node`".into(),
            ));
        }
        let mut events = Vec::new();
        for rec in r.deserialize() {
            let rec: TraceRecord = rec?;
            let is_write = match rec.rw {
                'R' | 'r' => false,
                'W' | 'w' => true,
                other => {
                    return Err(Error::Workload(format!(
                        "bad rw flag `{other}` at seq {}",
                        rec.seq
                    )))
                }
            };
            events.push(AccessEvent {
                seq: rec.seq,
                vpage: rec.vpage,
                is_write,
                node: NodeId(rec.node),
            });
        }
        let footprint = footprint_pages
            .unwrap_or_else(|| events.iter().map(|e| e.vpage + 1).max().unwrap_or(0));
        AccessTrace::new(events, footprint)
    }
}

#[derive(Serialize, Deserialize)]
struct TraceRecord {
    seq: u64,
    vpage: u64,
    rw: char,
    node: usize,
}

/// Pages accessed at least twice in each interval.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HotOracle {
    accesses_per_interval: usize,
    sets: Vec<Vec<u64>>,
}

pub const HOT_ACCESS_THRESHOLD: u32 = 2;

impl HotOracle {
    pub fn build(trace: &AccessTrace, accesses_per_interval: usize) -> Result<Self> {
        if accesses_per_interval == 0 {
            return Err(Error::Workload(
                "accesses_per_interval must be positive".into(),
            ));
        }
        let mut counts = vec![0u32; trace.footprint_pages() as usize];
        let mut touched = Vec::new();
        let mut sets = Vec::with_capacity(trace.num_intervals(accesses_per_interval));
        for chunk in trace.events().chunks(accesses_per_interval) {
            for e in chunk {
                let c = &mut counts[e.vpage as usize];
                if *c == 0 {
                    touched.push(e.vpage);
                }
                *c += 1;
            }
            let mut hot: Vec<u64> = touched
                .iter()
                .copied()
                .filter(|&p| counts[p as usize] >= HOT_ACCESS_THRESHOLD)
                .collect();
            hot.sort_unstable();
            sets.push(hot);
            for p in touched.drain(..) {
                counts[p as usize] = 0;
            }
        }
        Ok(HotOracle {
            accesses_per_interval,
            sets,
        })
    }

    pub fn accesses_per_interval(&self) -> usize {
        self.accesses_per_interval
    }

    pub fn num_intervals(&self) -> usize {
        self.sets.len()
    }

    /// Sorted hot pages of interval `index`.
    pub fn hot_pages(&self, index: usize) -> Result<&[u64]> {
        self.sets
            .get(index)
            .map(Vec::as_slice)
            .ok_or(Error::IntervalOutOfRange {
                index,
                len: self.sets.len(),
            })
    }
}

pub fn oracle_hot_pages(oracle: &HotOracle, interval_index: usize) -> Result<&[u64]> {
    oracle.hot_pages(interval_index)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HotsetLayout {
    /// One contiguous run at a random offset.
    #[default]
    Contiguous,
    /// Pages drawn independently across the footprint.
    Scattered,
}

/// Parameters of one GUPS block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GupsParams {
    pub footprint_pages: u64,
    pub hotset_fraction: f64,
    pub hot_access_fraction: f64,
    pub accesses: u64,
    pub nodes: usize,
    /// Pins every access of the block to one node instead of round-robin.
    pub node: Option<NodeId>,
    pub write_fraction: f64,
    pub layout: HotsetLayout,
    /// Redraw the hotset after this many passes over the footprint.
    pub rehash_hotset_every_n_passes: Option<u64>,
    /// Draws the hotset from this seed instead of the trace generator.
    pub hotset_seed: Option<u64>,
}

impl Default for GupsParams {
    fn default() -> Self {
        GupsParams {
            footprint_pages: 1024,
            hotset_fraction: 0.2,
            hot_access_fraction: 0.8,
            accesses: 1024 * 40,
            nodes: 1,
            node: None,
            write_fraction: 1.0,
            layout: HotsetLayout::Contiguous,
            rehash_hotset_every_n_passes: None,
            hotset_seed: None,
        }
    }
}

impl GupsParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Workload(m));
        if self.footprint_pages == 0 {
            return bad("zero footprint".into());
        }
        if self.accesses == 0 {
            return bad("zero accesses".into());
        }
        if !(self.hotset_fraction > 0.0 && self.hotset_fraction < 1.0) {
            return bad(format!(
                "hotset_fraction must be in (0, 1), got {}",
                self.hotset_fraction
            ));
        }
        if !(self.hot_access_fraction > 0.0 && self.hot_access_fraction <= 1.0) {
            return bad(format!(
                "hot_access_fraction must be in (0, 1], got {}",
                self.hot_access_fraction
            ));
        }
        if !(0.0..=1.0).contains(&self.write_fraction) {
            return bad(format!(
                "write_fraction must be in [0, 1], got {}",
                self.write_fraction
            ));
        }
        if self.nodes == 0 {
            return bad("need at least one node".into());
        }
        if self.rehash_hotset_every_n_passes == Some(0) {
            return bad("rehash_hotset_every_n_passes must be positive".into());
        }
        Ok(())
    }

    pub fn hotset_pages(&self) -> u64 {
        let n = (self.hotset_fraction * self.footprint_pages as f64).round() as u64;
        n.clamp(1, self.footprint_pages.saturating_sub(1).max(1))
    }
}

/// A hot set plus a way to draw uniformly from its complement.
struct Hotset {
    pages: Vec<u64>,
    cold: Cold,
}

enum Cold {
    Gap {
        offset: u64,
        len: u64,
        footprint: u64,
    },
    List(Vec<u64>),
}

impl Hotset {
    fn draw(p: &GupsParams, rng: &mut ChaCha8Rng) -> Self {
        let size = p.hotset_pages();
        let fp = p.footprint_pages;
        match p.layout {
            HotsetLayout::Contiguous => {
                let offset = rng.random_range(0..=fp - size);
                Hotset {
                    pages: (offset..offset + size).collect(),
                    cold: Cold::Gap {
                        offset,
                        len: size,
                        footprint: fp,
                    },
                }
            }
            HotsetLayout::Scattered => {
                let mut pages: Vec<u64> = index::sample(rng, fp as usize, size as usize)
                    .into_iter()
                    .map(|i| i as u64)
                    .collect();
                pages.sort_unstable();
                let mut is_hot = vec![false; fp as usize];
                for &h in &pages {
                    is_hot[h as usize] = true;
                }
                let cold = (0..fp).filter(|&q| !is_hot[q as usize]).collect();
                Hotset {
                    pages,
                    cold: Cold::List(cold),
                }
            }
        }
    }

    fn cold_page(&self, rng: &mut ChaCha8Rng) -> Option<u64> {
        match &self.cold {
            Cold::Gap {
                offset,
                len,
                footprint,
            } => {
                let n = footprint - len;
                (n > 0).then(|| {
                    let r = rng.random_range(0..n);
                    if r < *offset {
                        r
                    } else {
                        r + len
                    }
                })
            }
            Cold::List(v) => (!v.is_empty()).then(|| v[rng.random_range(0..v.len())]),
        }
    }
}

fn hotset_for(p: &GupsParams, rng: &mut ChaCha8Rng) -> Hotset {
    match p.hotset_seed {
        Some(s) => Hotset::draw(p, &mut ChaCha8Rng::seed_from_u64(s)),
        None => Hotset::draw(p, rng),
    }
}

fn append_gups(p: &GupsParams, rng: &mut ChaCha8Rng, events: &mut Vec<AccessEvent>) -> Result<()> {
    p.validate()?;
    let mut hot = hotset_for(p, rng);
    let rehash_every = p
        .rehash_hotset_every_n_passes
        .map(|n| n * p.footprint_pages);
    for i in 0..p.accesses {
        if let Some(every) = rehash_every {
            if i > 0 && i % every == 0 {
                hot = Hotset::draw(p, rng);
            }
        }
        let to_hot = p.hot_access_fraction >= 1.0 || rng.random::<f64>() < p.hot_access_fraction;
        let vpage = if to_hot {
            hot.pages[rng.random_range(0..hot.pages.len())]
        } else {
            match hot.cold_page(rng) {
                Some(c) => c,
                None => hot.pages[rng.random_range(0..hot.pages.len())],
            }
        };
        let is_write = p.write_fraction >= 1.0 || rng.random::<f64>() < p.write_fraction;
        let seq = events.len() as u64;
        let node = p.node.unwrap_or(NodeId((seq % p.nodes as u64) as usize));
        events.push(AccessEvent {
            seq,
            vpage,
            is_write,
            node,
        });
    }
    Ok(())
}

/// GUPS with a hot set receiving `hot_access_fraction` of the updates.
pub fn gen_gups(
    params: &GupsParams,
    accesses_per_interval: usize,
    seed: u64,
) -> Result<(AccessTrace, HotOracle)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events = Vec::with_capacity(params.accesses as usize);
    append_gups(params, &mut rng, &mut events)?;
    let trace = AccessTrace::new(events, params.footprint_pages)?;
    let oracle = HotOracle::build(&trace, accesses_per_interval)?;
    Ok((trace, oracle))
}

/// Concatenated GUPS blocks, each drawing its own hot set.
pub fn gen_phase_change(
    phases: &[GupsParams],
    accesses_per_interval: usize,
    seed: u64,
) -> Result<(AccessTrace, HotOracle)> {
    if phases.is_empty() {
        return Err(Error::Workload("empty phase list".into()));
    }
    let footprint = phases.iter().map(|p| p.footprint_pages).max().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events = Vec::with_capacity(phases.iter().map(|p| p.accesses as usize).sum());
    for p in phases {
        append_gups(p, &mut rng, &mut events)?;
    }
    let trace = AccessTrace::new(events, footprint)?;
    let oracle = HotOracle::build(&trace, accesses_per_interval)?;
    Ok((trace, oracle))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MicrobenchKind {
    ReadOnly,
    HalfRead,
    WriteOnly,
}

impl std::str::FromStr for MicrobenchKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "read_only" => Ok(MicrobenchKind::ReadOnly),
            "half_read" => Ok(MicrobenchKind::HalfRead),
            "write_only" => Ok(MicrobenchKind::WriteOnly),
            other => Err(Error::Workload(format!("unknown microbenchmark `{other}`"))),
        }
    }
}

/// Sequential sweep over `array_pages` pages, repeated `passes` times.
pub fn gen_seq_microbench(
    kind: MicrobenchKind,
    array_pages: u64,
    passes: u64,
    node: NodeId,
) -> Result<AccessTrace> {
    if array_pages == 0 {
        return Err(Error::Workload("array_pages must be at least 1".into()));
    }
    let per_page = if kind == MicrobenchKind::HalfRead {
        2
    } else {
        1
    };
    let mut events = Vec::with_capacity((array_pages * passes * per_page) as usize);
    let mut push = |vpage, is_write| {
        let seq = events.len() as u64;
        events.push(AccessEvent {
            seq,
            vpage,
            is_write,
            node,
        });
    };
    for _ in 0..passes {
        for p in 0..array_pages {
            match kind {
                MicrobenchKind::ReadOnly => push(p, false),
                MicrobenchKind::WriteOnly => push(p, true),
                MicrobenchKind::HalfRead => {
                    push(p, false);
                    push(p, true);
                }
            }
        }
    }
    AccessTrace::new(events, array_pages)
}
