use criterion::{criterion_group, criterion_main, Criterion};
use mgnn_bench::planted_inputs;
use mgnn_core::model::{MgnnModel, ModelConfig, Task, Variant};

fn forward(c: &mut Criterion) {
    let inputs = planted_inputs(20);
    let mut group = c.benchmark_group("forward_240_nodes");
    for variant in [Variant::Full, Variant::NoMotif] {
        let model = MgnnModel::new(ModelConfig::with_defaults(Task::Node, 2, 2), variant, 1, 0).unwrap();
        group.bench_function(variant.tag(), |b| b.iter(|| model.predict_proba(&inputs, None).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, forward);
criterion_main!(benches);
