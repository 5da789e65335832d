use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use xtalk_bench::mixed_record;
use xtalk_core::demod::{self, DemodConfig};
use xtalk_core::diplexer::{composite_tones, diplex, DiplexParams};
use xtalk_core::fastica::{self, FastIcaConfig};
use xtalk_core::preprocess::center_and_whiten;
use xtalk_core::InterferometerParams;

fn whitening(c: &mut Criterion) {
    let mut g = c.benchmark_group("whiten");
    for n in [1usize << 14, 1 << 18] {
        let s = mixed_record(n, "1,0.4;0.3,1");
        g.bench_with_input(BenchmarkId::from_parameter(n), &s, |b, s| {
            b.iter(|| center_and_whiten(black_box(s)).unwrap())
        });
    }
    g.finish();
}

fn separation(c: &mut Criterion) {
    let p = InterferometerParams::default();
    let mut g = c.benchmark_group("separate");
    g.sample_size(10);
    for n in [1usize << 14, 1 << 18] {
        let s = mixed_record(n, "1,0.9;0.9,1");
        g.bench_with_input(BenchmarkId::from_parameter(n), &s, |b, s| {
            b.iter(|| fastica::separate(black_box(s), &FastIcaConfig::default(), Some(&p.carriers())).unwrap())
        });
    }
    g.finish();
}

fn demodulation(c: &mut Criterion) {
    let p = InterferometerParams::default();
    let cfg = DemodConfig::for_carriers(&p);
    let s = mixed_record(1 << 18, "1,0;0,1");
    c.bench_function("two_color_density/262144", |b| {
        b.iter(|| demod::two_color_density(black_box(&s), &p, &cfg).unwrap())
    });
}

fn diplexing(c: &mut Criterion) {
    let params = DiplexParams::default();
    let s = composite_tones(params.f_a, params.f_b, 1.0, 1.0, 200e6, 40_000).unwrap();
    c.bench_function("diplex/40000", |b| {
        b.iter(|| diplex(black_box(&s), &params, &FastIcaConfig::default()).unwrap())
    });
}

criterion_group!(benches, whitening, separation, demodulation, diplexing);
criterion_main!(benches);
