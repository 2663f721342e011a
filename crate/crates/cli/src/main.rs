// Copyright 2026 The tiersim Authors
// SPDX-License-Identifier: Apache-2.0

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use tiersim_core::baselines::System;
use tiersim_core::config::RunConfig;
use tiersim_core::sim::{self, RunOutput};
use tiersim_core::Error;

/// Trace-driven tiered-memory simulator.
#[derive(Debug, Parser)]
#[command(name = "tiersim", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Simulate one config and write its CSVs and summary.
    Run {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run several systems on one shared trace and normalize their costs.
    Compare {
        /// One config per system, or a single config combined with --systems.
        #[arg(short, long, required = true)]
        config: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        systems: Vec<System>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// One run per value of a single parameter.
    Sweep {
        #[arg(short, long)]
        config: PathBuf,
        /// overhead_constraint, alpha, tau1, tau2, num_scans, bucket_width or N.
        #[arg(long)]
        param: String,
        #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let Some(e) = err.chain().find_map(|e| e.downcast_ref::<Error>()) else {
        return 1;
    };
    match e.root() {
        Error::Config(_)
        | Error::Topology(_)
        | Error::Workload(_)
        | Error::CostModel(_)
        | Error::Profiler(_)
        | Error::UnknownTier(_) => 2,
        Error::ConstraintInfeasible(_) => 3,
        Error::MemoryExhausted(_) | Error::InsufficientSpace { .. } => 4,
        _ => 1,
    }
}

fn print_summary(out: &RunOutput) {
    let s = &out.summary;
    println!(
        "{:<12} intervals {:>4}  total {:>12.1}  app {:>12.1}  prof {:>9.1}  mig {:>9.1}  recall {:.3}  precision {:.3}",
        s.system.to_string(),
        s.intervals,
        s.total_cost,
        s.costs.app,
        s.costs.profiling,
        s.costs.migration_exposed,
        s.mean_recall,
        s.mean_precision,
    );
    for w in &s.warnings {
        eprintln!("warning: {w}");
    }
}

fn write_table<T: serde::Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    sim::write_csv(BufWriter::new(f), rows)?;
    Ok(())
}

fn run(config: &Path, out: &Path) -> anyhow::Result<()> {
    let cfg = RunConfig::load(config)?;
    let output = sim::run(&cfg)?;
    output.write_dir(out)?;
    print_summary(&output);
    Ok(())
}

fn compare(configs: &[PathBuf], systems: &[System], out: &Path) -> anyhow::Result<()> {
    let mut cfgs = configs
        .iter()
        .map(|p| RunConfig::load(p))
        .collect::<Result<Vec<_>, _>>()?;
    if !systems.is_empty() {
        if cfgs.len() != 1 {
            bail!(Error::Config("--systems takes exactly one config".into()));
        }
        let base = cfgs.remove(0);
        cfgs = systems
            .iter()
            .map(|&s| RunConfig {
                system: s,
                ..base.clone()
            })
            .collect();
    }
    let (rows, outputs) = sim::compare(&cfgs)?;
    fs::create_dir_all(out)?;
    for (i, o) in outputs.iter().enumerate() {
        let name = o.summary.system.to_string();
        let dir = if outputs
            .iter()
            .filter(|x| x.summary.system == o.summary.system)
            .count()
            > 1
        {
            out.join(format!("{name}-{i}"))
        } else {
            out.join(name)
        };
        o.write_dir(&dir)?;
        print_summary(o);
    }
    write_table(&out.join("compare.csv"), &rows)?;
    println!();
    println!("{:<12} {:>10} {:>10}", "system", "normalized", "norm_app");
    for r in &rows {
        println!(
            "{:<12} {:>10.4} {:>10.4}",
            r.system.to_string(),
            r.normalized,
            r.normalized_app
        );
    }
    Ok(())
}

fn sweep(config: &Path, param: &str, values: &[String], out: &Path) -> anyhow::Result<()> {
    let cfg = RunConfig::load(config)?;
    let rows = sim::sweep(&cfg, param, values)?;
    fs::create_dir_all(out)?;
    write_table(&out.join("sweep.csv"), &rows)?;
    for r in &rows {
        println!(
            "{}={:<10} total {:>12.1}  prof {:>9.1}  recall {:.3}  precision {:.3}",
            r.param, r.value, r.total_cost, r.prof_cost, r.mean_recall, r.mean_precision
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Run { config, out } => run(config, out),
        Cmd::Compare {
            config,
            systems,
            out,
        } => compare(config, systems, out),
        Cmd::Sweep {
            config,
            param,
            values,
            out,
        } => sweep(config, param, values, out),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
