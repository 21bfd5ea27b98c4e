mod common;

use std::path::PathBuf;

use common::{brute_force_dag_count, empty_graph_coordinates, ks_uniform, planar_distance};
use relnet::harness::{task_dataset, TrainConfig};
use relnet::numerics::RngStream;
use relnet::scenegen::{
    build_class_pool, enumerate_dags, generate_scene, type_dags, Dataset, GeneratorParams,
    SceneClass, INSTANCES_PER_TYPE, NUM_TYPES,
};

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/golden_seed42.jsonl")
}

/// Two classes over both relations, five scenes each, seed 42; the same
/// recipe as `relnet gen --classes 2 --samples 5 --relation both --seed 42`.
fn golden_config() -> TrainConfig {
    let mut cfg = TrainConfig::desk();
    cfg.relation = relnet::scenegen::Relation::Both;
    cfg.class_count = 2;
    cfg.samples_per_class = 5;
    cfg.seed = 42;
    cfg
}

#[test]
fn golden_dataset_regenerates_byte_identical() {
    let (ds, _) = task_dataset(&golden_config()).unwrap();
    let mut buf = Vec::new();
    ds.write_to(&mut buf).unwrap();
    let golden = std::fs::read(golden_path()).unwrap();
    assert_eq!(buf, golden);
    assert_eq!(Dataset::read(&golden_path()).unwrap(), ds);
}

#[test]
fn dag_counts_match_brute_force() {
    for (k, expected) in [(1, 1), (2, 3), (3, 25), (4, 543)] {
        assert_eq!(brute_force_dag_count(k), expected);
        assert_eq!(enumerate_dags(k).unwrap().len(), expected);
    }
}

#[test]
fn dag_list_is_exactly_the_acyclic_set() {
    // every 4-node DAG appears once and every listed graph is acyclic
    let dags = type_dags();
    let mut seen: Vec<Vec<Vec<u8>>> = dags.iter().map(|g| g.to_matrix()).collect();
    seen.dedup();
    assert_eq!(seen.len(), 543);
    assert!(dags.iter().all(|g| g.topological_order().is_some()));
}

#[test]
fn empty_graph_positions_are_uniform() {
    let (xs, ys) = empty_graph_coordinates(10_000, 17);
    let (dx, dy) = (ks_uniform(xs), ks_uniform(ys));
    assert!(dx < 0.02 && dy < 0.02, "{dx} {dy}");
}

#[test]
fn ks_oracle_detects_skew() {
    let xs: Vec<f64> = (0..1000).map(|i| (i as f64 / 1000.0).powi(2)).collect();
    assert!(ks_uniform(xs) > 0.2);
    let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
    assert!(ks_uniform(xs) <= 0.0005 + 1e-12);
}

#[test]
fn unclamped_children_stay_near_a_parent() {
    let params = GeneratorParams {
        clamp: false,
        ..Default::default()
    };
    let bound = params.d0 + 6.0 * params.sigma_d;
    let mut rng = RngStream::new(8, 0);
    let pool = build_class_pool(200, &mut rng).unwrap();
    for class in &pool {
        for _ in 0..5 {
            let scene = generate_scene(class, &params, &mut rng).unwrap();
            let m = scene.matrix();
            let rows_of = |t: usize| (0..m.rows()).filter(move |&r| m.row(r)[6 + t] == 1.0);
            for c in 0..NUM_TYPES {
                let parents = class.position_graph.parents(c);
                if parents.is_empty() {
                    continue;
                }
                for child in rows_of(c) {
                    let near = parents.iter().any(|&p| {
                        rows_of(p).any(|pr| planar_distance(m.row(child), m.row(pr)) <= bound)
                    });
                    assert!(near, "class {} child type {c}", class.class_id);
                }
            }
        }
    }
}

#[test]
fn pool_pairs_are_unique() {
    let pool = build_class_pool(500, &mut RngStream::new(21, 0)).unwrap();
    let mut keys: Vec<_> = pool.iter().map(SceneClass::key).collect();
    keys.sort_by_key(|(p, c)| (p.to_matrix(), c.to_matrix()));
    keys.dedup();
    assert_eq!(keys.len(), 500);
    assert_eq!(INSTANCES_PER_TYPE * NUM_TYPES, 16);
}
