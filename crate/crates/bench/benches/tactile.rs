use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use vtgrasp::tactile::{replay, DetectorConfig, GraspTrace};

fn tactile(c: &mut Criterion) {
    let frames = GraspTrace::default().frames(1);
    let cfg = DetectorConfig::default();
    c.bench_function("replay_grasp_trace", |b| b.iter(|| replay(black_box(&frames), &cfg, 50).unwrap()));
}

criterion_group!(benches, tactile);
criterion_main!(benches);
