// Copyright 2026 The tiersim Authors
// SPDX-License-Identifier: Apache-2.0

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use tiersim_core::baselines::System;
use tiersim_core::config::RunConfig;
use tiersim_core::memmodel::{CostModel, NodeId, TierId, TierTopology, TopologySpec};
use tiersim_core::migrator::MigrationMode;
use tiersim_core::policy::{build_histogram, plan_promotions, Candidate, PlanState};
use tiersim_core::sim::{build_workload, run_microbench, run_with};
use tiersim_core::workload::{gen_gups, GupsParams, MicrobenchKind};

fn workload(c: &mut Criterion) {
    let p = GupsParams::default();
    c.bench_function("gen_gups_40k", |b| {
        b.iter(|| gen_gups(black_box(&p), 1024, 7).unwrap())
    });
}

fn systems(c: &mut Criterion) {
    let mut g = c.benchmark_group("run_40_intervals");
    g.sample_size(20);
    for s in System::ALL {
        let cfg = RunConfig::desk(s, 1);
        let (trace, oracle) = build_workload(&cfg).unwrap();
        g.bench_function(s.to_string(), |b| {
            b.iter(|| run_with(&cfg, &trace, &oracle).unwrap())
        });
    }
    g.finish();
}

fn planning(c: &mut Criterion) {
    let topo = TierTopology::build(&TopologySpec::four_tier([
        256 << 12,
        512 << 12,
        1024 << 12,
        4096 << 12,
    ]))
    .unwrap();
    let cands: Vec<Candidate> = (0..1024u64)
        .map(|i| {
            let tier = TierId((i % 4) as usize);
            Candidate {
                id: i * 4,
                start_page: i * 4,
                len_pages: 4,
                whi: ((i * 2654435761) % 3000) as f64 / 1000.0,
                tier,
                pages: vec![(tier, 4)],
                node: NodeId(0),
            }
        })
        .collect();
    c.bench_function("histogram_1024", |b| {
        b.iter(|| build_histogram(black_box(&cands), 0.1, 3))
    });
    let hist = build_histogram(&cands, 0.1, 3);
    c.bench_function("plan_promotions_1024", |b| {
        b.iter_batched(
            || PlanState::new(&topo),
            |mut st| plan_promotions(&hist, &cands, &topo, 256 << 12, &mut st),
            BatchSize::SmallInput,
        )
    });
}

fn mechanism(c: &mut Criterion) {
    let cost = CostModel::default();
    let mut g = c.benchmark_group("microbench_256_pages");
    for kind in [
        MicrobenchKind::ReadOnly,
        MicrobenchKind::HalfRead,
        MicrobenchKind::WriteOnly,
    ] {
        g.bench_function(format!("{kind:?}"), |b| {
            b.iter(|| run_microbench(kind, 256, 4, MigrationMode::Adaptive, &cost).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, workload, systems, planning, mechanism);
criterion_main!(benches);
