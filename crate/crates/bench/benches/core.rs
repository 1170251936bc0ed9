use std::hint::black_box;

use behex_core::allocation::{run_dpbrag, ExactRewards, RewardTable, StepSchedule};
use behex_core::network::PeriodicRing;
use behex_core::planner::{grid_path, rrt_path, RrtParams};
use behex_core::sim::{run_episode, EpisodeSetup, SimConfig};
use behex_core::world::{extract_frontiers, generate_map, MapKind};
use behex_core::{total_map_entropy, Cell};
use criterion::{criterion_group, criterion_main, Criterion};

fn entropy(c: &mut Criterion) {
    let setup = EpisodeSetup::from_config(&SimConfig::default()).unwrap();
    c.bench_function("total_map_entropy 40x40", |b| b.iter(|| total_map_entropy(black_box(&setup.prior))));
}

fn allocation(c: &mut Criterion) {
    let rho: Vec<Vec<f64>> =
        (0..6).map(|i| (0..10).map(|q| ((i * 7 + q * 13) % 17) as f64 + 0.01 * (i + q) as f64).collect()).collect();
    let table = RewardTable::dense(rho).unwrap();
    let ring = PeriodicRing::new(6, 1);
    let schedule = StepSchedule::new(8, 1).unwrap();
    c.bench_function("dpbrag 6x10 ring, 96 rounds", |b| {
        b.iter(|| run_dpbrag(&table, &mut ExactRewards(&table), &ring, &schedule, 96, 1.0))
    });
}

fn frontiers(c: &mut Criterion) {
    let setup = EpisodeSetup::from_config(&SimConfig::default()).unwrap();
    c.bench_function("extract_frontiers 40x40 prior", |b| b.iter(|| extract_frontiers(black_box(&setup.prior))));
}

fn planning(c: &mut Criterion) {
    let map = generate_map(MapKind::Open, 60, 60, 0.1, 3).unwrap();
    let (s, g) = (Cell::new(2, 2), Cell::new(57, 57));
    let params = RrtParams::default();
    c.bench_function("rrt_path open 60x60", |b| b.iter(|| rrt_path(&map, s, g, &params)));
    c.bench_function("grid_path open 60x60", |b| b.iter(|| grid_path(&map, s, g)));
}

fn episode(c: &mut Criterion) {
    let cfg = SimConfig { sensing_radius: 0.8, ..SimConfig::default() };
    let mut group = c.benchmark_group("episode");
    group.sample_size(10);
    group.bench_function("default config, radius 0.8", |b| b.iter(|| run_episode(black_box(&cfg)).unwrap()));
    group.finish();
}

criterion_group!(benches, entropy, allocation, frontiers, planning, episode);
criterion_main!(benches);
