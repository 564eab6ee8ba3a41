use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use condensa_bench::{block_partition, motif_stream, random_space};
use condensa_core::cover::{covering_number_exact, covering_number_greedy};
use condensa_core::hierarchy::{build_hierarchy, CondensationPolicy};
use condensa_core::inference::{fast_navigate, slow_verify, CostLedger};
use condensa_core::quotient::build_quotient;

fn covers(c: &mut Criterion) {
    let mut g = c.benchmark_group("cover");
    for n in [12usize, 20, 24] {
        let s = random_space(n, 1);
        g.bench_with_input(BenchmarkId::new("greedy", n), &s, |b, s| {
            b.iter(|| covering_number_greedy(black_box(s), 0.25).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("exact", n), &s, |b, s| {
            b.iter(|| covering_number_exact(black_box(s), 0.25).unwrap())
        });
    }
    g.finish();
}

fn quotients(c: &mut Criterion) {
    let mut g = c.benchmark_group("quotient");
    for n in [64usize, 256] {
        let s = random_space(n, 2);
        let p = block_partition(n, 4);
        g.bench_with_input(BenchmarkId::from_parameter(n), &(s, p), |b, (s, p)| {
            b.iter(|| build_quotient(black_box(s), black_box(p)).unwrap())
        });
    }
    g.finish();
}

fn inference(c: &mut Criterion) {
    let mut g = c.benchmark_group("inference");
    g.sample_size(10);
    for samples in [100usize, 1000] {
        let stream = motif_stream(samples);
        let n = stream.n_samples();
        g.bench_with_input(BenchmarkId::new("slow", samples), &stream, |b, s| {
            b.iter(|| {
                let mut ledger = CostLedger::default();
                slow_verify(s.points(), 0, n - 1, s.max_step(), None, &mut ledger).unwrap()
            })
        });
        let h = build_hierarchy(
            &stream,
            &CondensationPolicy::motif(10, 2, 0.07),
            0.01,
            7,
            16,
        )
        .unwrap();
        g.bench_with_input(BenchmarkId::new("fast", samples), &h, |b, h| {
            b.iter(|| {
                let mut ledger = CostLedger::default();
                fast_navigate(h, 0, n - 1, &mut ledger).unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, covers, quotients, inference);
criterion_main!(benches);
