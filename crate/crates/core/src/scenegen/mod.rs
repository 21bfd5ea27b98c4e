//! Scene-graph datasets: relation DAGs, class pools, the generative process,
//! dataset files and the entangling permutation.

mod classes;
mod dataset;
mod generate;
mod graph;
mod permute;

pub use classes::{
    adjacency_target, build_class_pool, build_relation_pool, pool_capacity, renumber,
    target_width, type_dags, Relation, SceneClass,
};
pub use dataset::{Dataset, Sample, TargetMode, DATASET_FORMAT_VERSION};
pub use generate::{
    generate_scene, generate_scene_traced, offset_position, type_size, GeneratorParams,
    ObjectRecord, ObjectTrace, SceneDescription, SceneTrace, FEATURE_LAYOUT, INSTANCES_PER_TYPE,
    NUM_FEATURES, NUM_OBJECTS,
};
pub use graph::{enumerate_dags, RelationGraph, MAX_ENUM_NODES, NUM_TYPES};
pub use permute::{entangle, make_permutation, PermutationMatrix};
