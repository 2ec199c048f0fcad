//! Ensemble throughput on the default pool against a single worker.
//!
//! Build with `--no-default-features` to time the sequential fallback alone.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use isinglab::graph::{build_mobius_ladder, MobiusParams};
use isinglab::landscape::find_critical_points;
use isinglab::softspin::{basin_sample, success_probability, GroundSet, SolverConfig, Variant};

fn workloads(c: &mut Criterion, label: &str, run: &dyn Fn(&(dyn Fn() + Sync))) {
    let m = build_mobius_ladder(MobiusParams::new(8, 0.4).unwrap());
    let ground = GroundSet::from_oracle(&m).unwrap();
    let cfg = SolverConfig {
        t_end: 600.0,
        ..SolverConfig::for_coupling(Variant::CimI, 0.4)
    };
    let mut g = c.benchmark_group("ensembles");
    g.sample_size(10);
    g.bench_function(BenchmarkId::new("cim1_200_runs", label), |b| {
        b.iter(|| run(&|| drop(success_probability(&m, &cfg, 200, &ground).unwrap())))
    });
    g.bench_function(BenchmarkId::new("basins_2000", label), |b| {
        b.iter(|| run(&|| drop(basin_sample(&m, 2.0, 1.0, 2000, 1).unwrap())))
    });
    g.bench_function(BenchmarkId::new("critical_2000", label), |b| {
        b.iter(|| run(&|| drop(find_critical_points(&m, 2.0, 1.0, 2000, 1).unwrap())))
    });
    g.finish();
}

#[cfg(feature = "parallel")]
fn bench(c: &mut Criterion) {
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    workloads(c, "rayon", &|f| f());
    workloads(c, "one_thread", &|f| single.install(f));
}

#[cfg(not(feature = "parallel"))]
fn bench(c: &mut Criterion) {
    workloads(c, "sequential", &|f| f());
}

criterion_group!(benches, bench);
criterion_main!(benches);
