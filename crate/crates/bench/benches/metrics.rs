use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use sdrcnn_core::classical::{gram_schmidt, sfim, GsOptions, SfimOptions};
use sdrcnn_core::metrics::{ergas, q2n, sam, scc, FullResolution, Q_BLOCK};
use sdrcnn_core::wald::{make_samples, synth_scene, SensorModel};

fn metrics(c: &mut Criterion) {
    let sensor = SensorModel::new(8);
    let (ms, pan) = synth_scene(3, 64, 8).unwrap();
    let s = &make_samples("b", &ms, &pan, 64, 64, &sensor).unwrap()[0];
    let fused = sfim(&s.pan, &s.lrms, &SfimOptions::default()).unwrap();

    c.bench_function("q2n 8 bands 64x64", |b| {
        b.iter(|| q2n(black_box(&fused), &s.gt, Q_BLOCK, Q_BLOCK).unwrap())
    });
    c.bench_function("sam+ergas+scc 8 bands 64x64", |b| {
        b.iter(|| {
            (
                sam(black_box(&fused), &s.gt).unwrap(),
                ergas(&fused, &s.gt, 4.0).unwrap(),
                scc(&fused, &s.gt).unwrap(),
            )
        })
    });
    c.bench_function("qnr 8 bands 64x64", |b| {
        b.iter(|| FullResolution::compute(black_box(&fused), &s.lrms, &s.pan, &sensor).unwrap())
    });
    c.bench_function("gram_schmidt 8 bands 64x64", |b| {
        b.iter(|| gram_schmidt(black_box(&s.pan), &s.lrms, &GsOptions::default()).unwrap())
    });
    c.bench_function("sfim 8 bands 64x64", |b| {
        b.iter(|| sfim(black_box(&s.pan), &s.lrms, &SfimOptions::default()).unwrap())
    });
}

criterion_group!(benches, metrics);
criterion_main!(benches);
