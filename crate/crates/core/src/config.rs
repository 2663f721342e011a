// Copyright 2026 The tiersim Authors
// SPDX-License-Identifier: Apache-2.0

//! Run configuration. The primary format is TOML (`key = value` with
//! `[dotted.sections]`); JSON is accepted when the text starts with `{`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{AutoNumaConfig, DamonConfig, System, ThermostatConfig};
use crate::error::{Error, Result};
use crate::memmodel::{CostModel, NodeId, TopologySpec};
use crate::metrics::DEFAULT_DETECT_THRESHOLD;
use crate::migrator::MigrationMode;
use crate::policy::PolicyConfig;
use crate::profiler::ProfilerConfig;
use crate::workload::{GupsParams, HotsetLayout, MicrobenchKind};

/// Environment variable that replaces the configured seed.
pub const SEED_ENV: &str = "TIERSIM_SEED";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyPreset {
    /// Four tiers of 128, 256, 512 and 1024 pages with 16-page huge pages.
    #[default]
    Desk,
    FourTier,
    TwoTier,
    /// Use the `[topology.spec]` table as written.
    Custom,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyConfig {
    pub preset: TopologyPreset,
    /// Per-tier capacities in base pages; overrides the preset's.
    pub capacity_pages: Option<Vec<u64>>,
    pub base_page_bytes: Option<u64>,
    pub huge_page_pages: Option<u64>,
    /// Back the initial placement with huge pages where they fit.
    pub map_huge: bool,
    pub spec: Option<TopologySpec>,
}

const DESK_CAPACITY_PAGES: [u64; 4] = [128, 256, 512, 1024];
const DESK_HUGE_PAGE_PAGES: u64 = 16;

impl TopologyConfig {
    pub fn build_spec(&self) -> Result<TopologySpec> {
        let mut spec = match self.preset {
            TopologyPreset::Custom => self.spec.clone().ok_or_else(|| {
                Error::Config("topology.preset = \"custom\" needs a [topology.spec] table".into())
            })?,
            TopologyPreset::Desk => TopologySpec::four_tier(DESK_CAPACITY_PAGES.map(|p| p * 4096))
                .with_page_sizes(4096, DESK_HUGE_PAGE_PAGES),
            TopologyPreset::FourTier => {
                TopologySpec::four_tier([16 << 30, 16 << 30, 64 << 30, 64 << 30])
            }
            TopologyPreset::TwoTier => TopologySpec::two_tier(16 << 30, 64 << 30),
        };
        if self.spec.is_some() && self.preset != TopologyPreset::Custom {
            return Err(Error::Config(
                "[topology.spec] requires topology.preset = \"custom\"".into(),
            ));
        }
        if let Some(b) = self.base_page_bytes {
            let pages: Vec<u64> = spec
                .tiers
                .iter()
                .map(|t| t.capacity_bytes / spec.base_page_bytes)
                .collect();
            spec.base_page_bytes = b;
            for (t, p) in spec.tiers.iter_mut().zip(pages) {
                t.capacity_bytes = p * b;
            }
        }
        if let Some(h) = self.huge_page_pages {
            spec.huge_page_pages = h;
        }
        if let Some(caps) = &self.capacity_pages {
            if caps.len() != spec.tiers.len() {
                return Err(Error::Config(format!(
                    "topology.capacity_pages has {} entries for {} tiers",
                    caps.len(),
                    spec.tiers.len()
                )));
            }
            for (t, &p) in spec.tiers.iter_mut().zip(caps) {
                t.capacity_bytes = p * spec.base_page_bytes;
            }
        }
        Ok(spec)
    }
}

/// A run of GUPS blocks, each with a freshly drawn hot set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseChangeParams {
    pub phases: usize,
    pub accesses_per_phase: u64,
    pub footprint_pages: u64,
    pub hotset_fraction: f64,
    pub hot_access_fraction: f64,
    pub nodes: usize,
    pub write_fraction: f64,
    pub layout: HotsetLayout,
}

impl Default for PhaseChangeParams {
    fn default() -> Self {
        let g = GupsParams::default();
        PhaseChangeParams {
            phases: 4,
            accesses_per_phase: 1024 * 20,
            footprint_pages: g.footprint_pages,
            hotset_fraction: g.hotset_fraction,
            hot_access_fraction: g.hot_access_fraction,
            nodes: g.nodes,
            write_fraction: g.write_fraction,
            layout: g.layout,
        }
    }
}

impl PhaseChangeParams {
    pub fn blocks(&self) -> Result<Vec<GupsParams>> {
        if self.phases == 0 {
            return Err(Error::Workload(
                "phase_change needs at least one phase".into(),
            ));
        }
        let block = GupsParams {
            footprint_pages: self.footprint_pages,
            hotset_fraction: self.hotset_fraction,
            hot_access_fraction: self.hot_access_fraction,
            accesses: self.accesses_per_phase,
            nodes: self.nodes,
            write_fraction: self.write_fraction,
            layout: self.layout,
            ..GupsParams::default()
        };
        Ok(vec![block; self.phases])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicrobenchParams {
    pub bench: MicrobenchKind,
    #[serde(default = "default_array_pages")]
    pub array_pages: u64,
    #[serde(default = "default_passes")]
    pub passes: u64,
    #[serde(default)]
    pub node: NodeId,
}

fn default_array_pages() -> u64 {
    256
}

fn default_passes() -> u64 {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceFileParams {
    /// Relative paths resolve against the config file's directory.
    pub path: PathBuf,
    #[serde(default)]
    pub footprint_pages: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WorkloadConfig {
    Gups(GupsParams),
    PhaseChange(PhaseChangeParams),
    Microbench(MicrobenchParams),
    Trace(TraceFileParams),
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig::Gups(GupsParams::default())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MigratorConfig {
    pub mode: MigrationMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default)]
    pub system: System,
    /// Intervals to simulate; the whole trace when absent.
    #[serde(default)]
    pub intervals: Option<usize>,
    #[serde(default = "default_api")]
    pub accesses_per_interval: usize,
    /// Smoothed hotness at which a region's pages count as detected hot.
    #[serde(default = "default_threshold")]
    pub detect_threshold: f64,
    #[serde(default)]
    pub topology: TopologyConfig,
    #[serde(default)]
    pub workload: WorkloadConfig,
    #[serde(default)]
    pub cost: CostModel,
    #[serde(default)]
    pub profiler: ProfilerConfig,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default)]
    pub migrator: MigratorConfig,
    #[serde(default)]
    pub autonuma: AutoNumaConfig,
    #[serde(default)]
    pub thermostat: ThermostatConfig,
    #[serde(default)]
    pub damon: DamonConfig,
}

fn default_api() -> usize {
    1024
}

fn default_threshold() -> f64 {
    DEFAULT_DETECT_THRESHOLD
}

impl RunConfig {
    /// Module defaults with the given seed.
    pub fn with_seed(seed: u64) -> Self {
        RunConfig {
            seed,
            system: System::default(),
            intervals: None,
            accesses_per_interval: default_api(),
            detect_threshold: default_threshold(),
            topology: TopologyConfig::default(),
            workload: WorkloadConfig::default(),
            cost: CostModel::default(),
            profiler: ProfilerConfig::default(),
            policy: PolicyConfig::default(),
            migrator: MigratorConfig::default(),
            autonuma: AutoNumaConfig::default(),
            thermostat: ThermostatConfig::default(),
            damon: DamonConfig::default(),
        }
    }

    /// The small four-tier setup used throughout the test suite, with
    /// 16-page profiling regions, scans cheap enough that the budget buys
    /// about forty samples per interval, and a counter period short enough
    /// to see the slowest tier within one interval.
    pub fn desk(system: System, seed: u64) -> Self {
        let mut c = RunConfig::with_seed(seed);
        c.system = system;
        c.cost.scan_cost = 0.2;
        c.cost.pebs_sample_period = 5;
        c.profiler.default_region_pages = DESK_HUGE_PAGE_PAGES;
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.accesses_per_interval == 0 {
            return Err(Error::Config(
                "accesses_per_interval must be at least 1".into(),
            ));
        }
        if self.intervals == Some(0) {
            return Err(Error::Config("intervals must be at least 1".into()));
        }
        if !(self.detect_threshold >= 0.0
            && self.detect_threshold <= self.profiler.num_scans as f64)
        {
            return Err(Error::Config(format!(
                "detect_threshold must be in [0, num_scans], got {}",
                self.detect_threshold
            )));
        }
        self.profiler.validate()?;
        self.policy.validate()?;
        self.autonuma.validate()?;
        self.thermostat.validate()?;
        self.damon.validate()?;
        let spec = self.topology.build_spec()?;
        self.cost.validate(spec.tiers.len())?;
        if let WorkloadConfig::Gups(g) = &self.workload {
            g.validate()?;
        }
        Ok(())
    }

    /// Parses TOML, or JSON when the first non-blank character is `{`.
    /// Errors name the offending key and, for TOML, its line.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = if text.trim_start().starts_with('{') {
            let de = &mut serde_json::Deserializer::from_str(text);
            serde_path_to_error::deserialize(de).map_err(|e| {
                let inner = e.inner();
                Error::Config(format!("line {}: `{}`: {}", inner.line(), e.path(), inner))
            })?
        } else {
            let de = toml::de::Deserializer::parse(text).map_err(|e| toml_error(text, "", &e))?;
            serde_path_to_error::deserialize(de).map_err(|e| {
                let path = e.path().to_string();
                toml_error(text, &path, e.inner())
            })?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file, applies the seed override from the
    /// environment and resolves trace paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        cfg.apply_env_seed(std::env::var(SEED_ENV).ok().as_deref())?;
        if let WorkloadConfig::Trace(t) = &mut cfg.workload {
            if t.path.is_relative() {
                if let Some(dir) = path.parent() {
                    t.path = dir.join(&t.path);
                }
            }
        }
        Ok(cfg)
    }

    pub fn apply_env_seed(&mut self, value: Option<&str>) -> Result<()> {
        if let Some(v) = value {
            self.seed = v.trim().parse().map_err(|_| {
                Error::Config(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))
            })?;
        }
        Ok(())
    }

    /// Sets one sweepable parameter from its text form.
    pub fn set_param(&mut self, name: &str, value: &str) -> Result<()> {
        let bad = || Error::Config(format!("invalid value `{value}` for {name}"));
        let num = || value.trim().parse::<f64>().map_err(|_| bad());
        match name {
            "overhead_constraint" => self.profiler.overhead_constraint = num()?,
            "alpha" => self.policy.alpha = num()?,
            "tau1" => self.profiler.tau1 = Some(num()?),
            "tau2" => self.profiler.tau2 = Some(num()?),
            "num_scans" => self.profiler.num_scans = value.trim().parse().map_err(|_| bad())?,
            "bucket_width" => self.policy.bucket_width = num()?,
            "N" | "n" | "n_bytes" => {
                self.policy.n_bytes = Some(crate::memmodel::bytesize::parse(value).ok_or_else(bad)?)
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown sweep parameter `{other}`; expected one of {}",
                    SWEEP_PARAMS.join(", ")
                )))
            }
        }
        self.validate()
    }
}

pub const SWEEP_PARAMS: [&str; 7] = [
    "overhead_constraint",
    "alpha",
    "tau1",
    "tau2",
    "num_scans",
    "bucket_width",
    "N",
];

fn toml_error(text: &str, path: &str, e: &toml::de::Error) -> Error {
    let line = e
        .span()
        .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
    let msg = e.message().trim_end();
    match (line, path.is_empty() || path == ".") {
        (Some(l), true) => Error::Config(format!("line {l}: {msg}")),
        (Some(l), false) => Error::Config(format!("line {l}: `{path}`: {msg}")),
        (None, true) => Error::Config(msg.to_string()),
        (None, false) => Error::Config(format!("`{path}`: {msg}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = RunConfig::parse("seed = 7\n").unwrap();
        assert_eq!(c, RunConfig::with_seed(7));
    }

    #[test]
    fn seed_is_mandatory() {
        let e = RunConfig::parse("system = \"mtm\"\n").unwrap_err();
        assert!(e.to_string().contains("seed"), "{e}");
    }

    #[test]
    fn sections_and_lists() {
        let text = r#"
seed = 1
system = "damon"
intervals = 12

[topology]
preset = "desk"
capacity_pages = [64, 64, 512, 1024]

[workload]
kind = "phase_change"
phases = 3

[profiler]
overhead_constraint = 0.02   # tighter
num_scans = 6

[policy]
n_bytes = "64KB"

[migrator]
mode = "sync"
"#;
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.system, System::Damon);
        assert_eq!(c.intervals, Some(12));
        assert_eq!(c.profiler.num_scans, 6);
        assert_eq!(c.policy.n_bytes, Some(65536));
        assert_eq!(c.migrator.mode, MigrationMode::Sync);
        assert!(matches!(&c.workload, WorkloadConfig::PhaseChange(p) if p.phases == 3));
        let spec = c.topology.build_spec().unwrap();
        assert_eq!(spec.tiers[1].capacity_bytes, 64 * 4096);
    }

    #[test]
    fn errors_point_at_the_line_and_key() {
        let e = RunConfig::parse("seed = 1\n\n[profiler]\nnum_scans = \"three\"\n").unwrap_err();
        let m = e.to_string();
        assert!(
            m.contains("line 4") && m.contains("profiler.num_scans"),
            "{m}"
        );
        let e = RunConfig::parse("seed = 1\n[policy]\nbeta = 2\n").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        let e = RunConfig::parse("seed = 1\nintervals = 0\n").unwrap_err();
        assert!(matches!(e, Error::Config(_)));
    }

    #[test]
    fn json_is_accepted() {
        let c = RunConfig::parse(
            r#"{"seed": 3, "system": "first-touch", "profiler": {"num_scans": 4}}"#,
        )
        .unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.system, System::FirstTouch);
        let e = RunConfig::parse("{\"seed\": 3,\n \"profiler\": {\"num_scans\": -1}}").unwrap_err();
        assert!(e.to_string().contains("profiler.num_scans"), "{e}");
    }

    #[test]
    fn env_seed_overrides() {
        let mut c = RunConfig::with_seed(1);
        c.apply_env_seed(Some("99")).unwrap();
        assert_eq!(c.seed, 99);
        c.apply_env_seed(None).unwrap();
        assert_eq!(c.seed, 99);
        assert!(c.apply_env_seed(Some("x")).is_err());
    }

    #[test]
    fn sweep_params() {
        let mut c = RunConfig::with_seed(1);
        c.set_param("alpha", "0.25").unwrap();
        c.set_param("N", "8KB").unwrap();
        c.set_param("num_scans", "6").unwrap();
        assert_eq!(c.policy.alpha, 0.25);
        assert_eq!(c.policy.n_bytes, Some(8192));
        assert_eq!(c.profiler.num_scans, 6);
        assert!(c.set_param("gamma", "1").is_err());
        assert!(c.set_param("alpha", "2").is_err());
    }

    #[test]
    fn custom_topology_round_trips() {
        let text = r#"
seed = 1
[topology]
preset = "custom"
[topology.spec]
nodes = 1
[[topology.spec.tiers]]
id = 0
capacity_bytes = "64KB"
access_cost = [1.0]
[[topology.spec.tiers]]
id = 1
capacity_bytes = "1MB"
access_cost = [4.0]
"#;
        let c = RunConfig::parse(text).unwrap();
        let spec = c.topology.build_spec().unwrap();
        assert_eq!(spec.tiers.len(), 2);
        assert_eq!(spec.tiers[0].capacity_bytes, 65536);
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(RunConfig::parse(&json).unwrap(), c);
    }
}
