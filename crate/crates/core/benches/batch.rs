use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use relnet::harness::{make_episodes, mann_config, TrainConfig};
use relnet::mann::mann_batch_grad;
use relnet::models::{Loss, RnSpec, SceneModel};
use relnet::numerics::{Matrix, RngStream};
use relnet::scenegen::{build_relation_pool, Dataset, GeneratorParams, Relation, TargetMode};
use relnet::Exec;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn scene_batch(c: &mut Criterion) {
    let classes = build_relation_pool(Relation::Position, 4, &mut RngStream::new(0, 1)).unwrap();
    let ds = Dataset::generate(
        classes,
        4,
        Relation::Position,
        TargetMode::Adjacency,
        GeneratorParams::default(),
        &RngStream::new(0, 2),
        Exec::Sequential,
    )
    .unwrap();
    let model = SceneModel::Rn(RnSpec::symmetric(10, &[64, 64], 64, 16));
    let params = model.init(&mut RngStream::new(0, 3));
    let inputs: Vec<Matrix> = ds.samples.iter().map(|s| s.scene.matrix().clone()).collect();
    let idx: Vec<usize> = (0..ds.len()).collect();
    let targets = ds.targets(&idx);

    let mut group = c.benchmark_group("rn_batch16_loss_and_grad");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| model.loss_and_grad(&params, &inputs, &targets, Loss::Bce, exec).unwrap())
        });
    }
    group.finish();
}

fn dataset_generation(c: &mut Criterion) {
    let classes = build_relation_pool(Relation::Both, 10, &mut RngStream::new(1, 1)).unwrap();
    let mut group = c.benchmark_group("generate_1000_scenes");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                Dataset::generate(
                    classes.clone(),
                    100,
                    Relation::Both,
                    TargetMode::Adjacency,
                    GeneratorParams::default(),
                    &RngStream::new(1, 2),
                    exec,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

fn episode_batch(c: &mut Criterion) {
    let cfg = TrainConfig::desk();
    let mcfg = mann_config(&cfg).unwrap();
    let params = mcfg.init(&mut RngStream::new(2, 4));
    let pool = build_relation_pool(Relation::Both, 20, &mut RngStream::new(2, 1)).unwrap();
    let episodes = make_episodes(&cfg, &pool, 4, &mut RngStream::new(2, 5)).unwrap();
    let mut group = c.benchmark_group("mann_batch4_episode_grad");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| mann_batch_grad(&mcfg, &params, &episodes, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, scene_batch, dataset_generation, episode_batch);
criterion_main!(benches);
