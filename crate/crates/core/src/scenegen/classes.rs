use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::graph::{enumerate_dags, RelationGraph, NUM_TYPES};
use crate::error::{Error, Result};
use crate::numerics::RngStream;

/// Which relation block(s) a task looks at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Position,
    Color,
    Both,
}

impl std::str::FromStr for Relation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "position" => Ok(Relation::Position),
            "color" => Ok(Relation::Color),
            "both" => Ok(Relation::Both),
            other => Err(Error::Config(format!("unknown relation `{other}`"))),
        }
    }
}

impl std::fmt::Display for Relation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Relation::Position => "position",
            Relation::Color => "color",
            Relation::Both => "both",
        })
    }
}

/// A scene class: one DAG for position inheritance, one for colour.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SceneClass {
    pub class_id: usize,
    pub position_graph: RelationGraph,
    pub color_graph: RelationGraph,
}

impl SceneClass {
    pub fn new(class_id: usize, position_graph: RelationGraph, color_graph: RelationGraph) -> Self {
        SceneClass {
            class_id,
            position_graph,
            color_graph,
        }
    }

    /// `(position, color)` identity, ignoring the id.
    pub fn key(&self) -> (RelationGraph, RelationGraph) {
        (self.position_graph, self.color_graph)
    }
}

/// The 543 labelled DAGs over the four object types, in lexicographic order.
pub fn type_dags() -> &'static [RelationGraph] {
    static DAGS: OnceLock<Vec<RelationGraph>> = OnceLock::new();
    DAGS.get_or_init(|| enumerate_dags(NUM_TYPES).expect("4 nodes is within capacity"))
}

/// Number of distinct classes available for a pool of the given kind.
pub fn pool_capacity(relation: Relation) -> usize {
    let n = type_dags().len();
    match relation {
        Relation::Position | Relation::Color => n - 1,
        Relation::Both => n * n - 1,
    }
}

/// `pool_size` distinct `(position, color)` DAG pairs drawn without
/// replacement, never both empty.
pub fn build_class_pool(pool_size: usize, rng: &mut RngStream) -> Result<Vec<SceneClass>> {
    build_relation_pool(Relation::Both, pool_size, rng)
}

/// Class pool for one relation kind. Single-relation pools hold a non-empty
/// DAG on that relation and the empty graph on the other, so the unused
/// feature block is sampled independently per object.
pub fn build_relation_pool(
    relation: Relation,
    pool_size: usize,
    rng: &mut RngStream,
) -> Result<Vec<SceneClass>> {
    let capacity = pool_capacity(relation);
    if pool_size > capacity {
        return Err(Error::Capacity(format!(
            "{pool_size} classes requested, only {capacity} distinct {relation} classes exist"
        )));
    }
    let dags = type_dags();
    let n = dags.len();
    let empty = dags[0];
    Ok(rng
        .sample_indices(capacity, pool_size)
        .into_iter()
        .enumerate()
        .map(|(class_id, idx)| {
            // skip index 0: the empty graph (or the (empty, empty) pair)
            let idx = idx + 1;
            let (pos, col) = match relation {
                Relation::Position => (dags[idx], empty),
                Relation::Color => (empty, dags[idx]),
                Relation::Both => (dags[idx / n], dags[idx % n]),
            };
            SceneClass::new(class_id, pos, col)
        })
        .collect())
}

/// Row-major flatten of the selected adjacency matrix; `Both` concatenates
/// position then colour (32 entries).
pub fn adjacency_target(class: &SceneClass, relation: Relation) -> Vec<f64> {
    match relation {
        Relation::Position => class.position_graph.flatten(),
        Relation::Color => class.color_graph.flatten(),
        Relation::Both => {
            let mut v = class.position_graph.flatten();
            v.extend(class.color_graph.flatten());
            v
        }
    }
}

pub fn target_width(relation: Relation) -> usize {
    match relation {
        Relation::Position | Relation::Color => NUM_TYPES * NUM_TYPES,
        Relation::Both => 2 * NUM_TYPES * NUM_TYPES,
    }
}

/// Re-numbers class ids to their position in the slice.
pub fn renumber(classes: &mut [SceneClass]) {
    for (i, c) in classes.iter_mut().enumerate() {
        c.class_id = i;
    }
}
