use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use vtgrasp::perception::{estimate_normals, segment_scene, PerceptionConfig};
use vtgrasp::recognition::{recognize_cluster, ObjectTemplate, RecognitionConfig};
use vtgrasp_bench::tabletop;

fn perception(c: &mut Criterion) {
    let cloud = tabletop(150_000.0);
    let cfg = PerceptionConfig::default();
    c.bench_function("segment_scene", |b| b.iter(|| segment_scene(black_box(&cloud), &cfg, 1).unwrap()));

    let seg = segment_scene(&cloud, &cfg, 1).unwrap();
    let clusters = seg.cluster_clouds();
    c.bench_function("estimate_normals", |b| {
        b.iter(|| estimate_normals(black_box(&clusters[0]), cfg.normal_radius).unwrap())
    });

    let rcfg = RecognitionConfig::default();
    let db: Vec<ObjectTemplate> = clusters
        .iter()
        .enumerate()
        .map(|(i, k)| ObjectTemplate::build(format!("object{i}"), k.clone().relabeled(vtgrasp::geometry::Frame::OBJECT), &rcfg).unwrap())
        .collect();
    c.bench_function("recognize_cluster", |b| {
        b.iter(|| recognize_cluster(black_box(&clusters[0]), &db, &rcfg).unwrap())
    });
}

criterion_group!(benches, perception);
criterion_main!(benches);
