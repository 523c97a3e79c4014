use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use lymphnet::ops::{conv2d_backward, conv2d_naive, conv2d_valid, maxpool};
use lymphnet_bench::{conv_layers, ramp};

fn convolution(c: &mut Criterion) {
    for (name, (input, params)) in ["conv1", "conv2"].into_iter().zip(conv_layers::<f32>()) {
        let mut g = c.benchmark_group(name);
        g.bench_function("im2col", |b| b.iter(|| conv2d_valid(black_box(&input), &params).unwrap()));
        g.bench_function("naive", |b| b.iter(|| conv2d_naive(black_box(&input), &params).unwrap()));
        let out = conv2d_valid(&input, &params).unwrap();
        g.bench_function("backward", |b| {
            b.iter(|| conv2d_backward(black_box(&input), &params, &out).unwrap())
        });
        g.finish();
    }
}

fn pooling(c: &mut Criterion) {
    let input = ramp::<f32>(&[20, 36, 36]);
    c.bench_function("maxpool 20x36x36", |b| b.iter(|| maxpool(black_box(&input), 3, 3).unwrap()));
}

criterion_group!(benches, convolution, pooling);
criterion_main!(benches);
