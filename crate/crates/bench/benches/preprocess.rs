use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use dctnet::reduce::{ReductionKind, ReductionOperator};
use dctnet::tensor::{FbsSpec, TensorOptions};
use dctnet_bench::{fixture_jpegs, full_decode, partial_decode};

const IMAGES: usize = 8;

fn decode(c: &mut Criterion) {
    let jpegs = fixture_jpegs(IMAGES, 0);
    let mut g = c.benchmark_group("decode");
    g.throughput(Throughput::Elements(IMAGES as u64));
    g.bench_function("full_rgb", |b| {
        b.iter(|| jpegs.iter().for_each(|j| drop(black_box(full_decode(j)))))
    });
    for (name, keep_quantized) in [("partial_dct", false), ("partial_dct_quantized", true)] {
        let opts = TensorOptions {
            keep_quantized,
            ..TensorOptions::default()
        };
        g.bench_function(name, |b| {
            b.iter(|| jpegs.iter().for_each(|j| drop(black_box(partial_decode(j, &opts)))))
        });
    }
    g.finish();
}

fn fbs(c: &mut Criterion) {
    let jpegs = fixture_jpegs(IMAGES, 0);
    let mut g = c.benchmark_group("fbs_lowest");
    g.throughput(Throughput::Elements(IMAGES as u64));
    for n in [16, 32, 64] {
        let opts = TensorOptions {
            fbs: Some(FbsSpec::lowest(n).unwrap()),
            ..TensorOptions::default()
        };
        g.bench_with_input(BenchmarkId::from_parameter(n), &opts, |b, opts| {
            b.iter(|| jpegs.iter().for_each(|j| drop(black_box(partial_decode(j, opts)))))
        });
    }
    g.finish();
}

fn reduction(c: &mut Criterion) {
    let t = partial_decode(&fixture_jpegs(1, 0)[0], &TensorOptions::default());
    let mut g = c.benchmark_group("reduction_forward");
    for kind in [ReductionKind::Lp, ReductionKind::La, ReductionKind::Ccpp] {
        let op = ReductionOperator::random(kind, t.channels, 64, 0).unwrap();
        g.bench_function(kind.to_string(), |b| b.iter(|| op.apply(black_box(&t)).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, decode, fbs, reduction);
criterion_main!(benches);
