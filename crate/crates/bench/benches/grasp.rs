use criterion::{criterion_group, criterion_main, Criterion};

use vtgrasp::sim::{build_templates, run_with_templates};
use vtgrasp_bench::scenario;

fn grasp(c: &mut Criterion) {
    let mut group = c.benchmark_group("grasp");
    group.sample_size(10);
    for name in ["spoon.toml", "towel.toml"] {
        let s = scenario(name);
        let templates = build_templates(&s).unwrap();
        group.bench_function(name.trim_end_matches(".toml"), |b| {
            b.iter(|| run_with_templates(&s, &templates, &[]).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, grasp);
criterion_main!(benches);
