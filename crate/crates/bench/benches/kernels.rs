use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use sdrcnn_core::tensor::{conv_depthwise, conv_pointwise, upsample_bicubic, ConvWeights};
use sdrcnn_core::Tensor4;

fn filled(shape: [usize; 4]) -> Tensor4 {
    let n = shape.iter().product();
    let data = (0..n).map(|i| ((i * 7919) % 1000) as f64 / 1000.0 - 0.5).collect();
    Tensor4::from_vec(shape, data).unwrap()
}

fn pointwise(c: &mut Criterion) {
    let mut g = c.benchmark_group("conv_pointwise");
    for &(cin, cout) in &[(9, 52), (52, 260), (260, 52), (156, 8)] {
        let x = filled([4, cin, 64, 64]);
        let w = ConvWeights::pointwise(cout, cin, vec![0.01; cin * cout], vec![0.0; cout]).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(format!("{cin}->{cout}")), &x, |b, x| {
            b.iter(|| conv_pointwise(black_box(x), &w).unwrap())
        });
    }
    g.finish();
}

fn depthwise(c: &mut Criterion) {
    let x = filled([4, 52, 64, 64]);
    let w = ConvWeights::depthwise(52, (3, 3), vec![0.1; 52 * 9], vec![0.0; 52]).unwrap();
    c.bench_function("conv_depthwise 3x3 52ch 64x64 x4", |b| {
        b.iter(|| conv_depthwise(black_box(&x), &w).unwrap())
    });
}

fn bicubic(c: &mut Criterion) {
    let x = filled([4, 8, 16, 16]);
    c.bench_function("upsample_bicubic x4 8ch 16x16 x4", |b| {
        b.iter(|| upsample_bicubic(black_box(&x), 4).unwrap())
    });
}

criterion_group!(benches, pointwise, depthwise, bicubic);
criterion_main!(benches);
