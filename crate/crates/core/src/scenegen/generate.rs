use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::classes::SceneClass;
use super::graph::{RelationGraph, NUM_TYPES};
use crate::error::{Error, Result};
use crate::numerics::{sample_half_normal, Matrix, RngStream};

pub const INSTANCES_PER_TYPE: usize = 4;
pub const NUM_OBJECTS: usize = NUM_TYPES * INSTANCES_PER_TYPE;
pub const NUM_FEATURES: usize = 10;
pub const FEATURE_LAYOUT: [&str; NUM_FEATURES] =
    ["x", "y", "r", "g", "b", "size", "type0", "type1", "type2", "type3"];

/// Knobs of the scene generative process.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    /// Minimum parent-child distance.
    pub d0: f64,
    /// Scale of the half-normal extra distance.
    pub sigma_d: f64,
    /// Per-channel colour noise added to an inherited colour.
    pub sigma_c: f64,
    /// Clamp features to `[0, 1]`; disabling it is only meant for tests.
    pub clamp: bool,
    /// Present objects in random row order.
    pub shuffle_rows: bool,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            d0: 0.06,
            sigma_d: 0.04,
            sigma_c: 0.05,
            clamp: true,
            shuffle_rows: true,
        }
    }
}

/// One object's features.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub type_id: usize,
    pub x: f64,
    pub y: f64,
    pub r: f64,
    pub g: f64,
    pub b: f64,
    pub size: f64,
}

impl ObjectRecord {
    pub fn to_row(&self) -> [f64; NUM_FEATURES] {
        let mut row = [0.0; NUM_FEATURES];
        row[..6].copy_from_slice(&[self.x, self.y, self.r, self.g, self.b, self.size]);
        row[6 + self.type_id] = 1.0;
        row
    }

    pub fn from_row(row: &[f64]) -> Result<Self> {
        if row.len() != NUM_FEATURES {
            return Err(Error::Dimension {
                op: "ObjectRecord::from_row",
                left: (1, NUM_FEATURES),
                right: (1, row.len()),
            });
        }
        let type_id = crate::numerics::one_hot_index(&row[6..])
            .ok_or_else(|| Error::param("object type block is not one-hot"))?;
        Ok(ObjectRecord {
            type_id,
            x: row[0],
            y: row[1],
            r: row[2],
            g: row[3],
            b: row[4],
            size: row[5],
        })
    }
}

/// Static per-type size.
pub fn type_size(type_id: usize) -> f64 {
    0.2 + 0.1 * type_id as f64
}

/// A `16 × 10` scene matrix, four objects of each type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix", into = "Matrix")]
pub struct SceneDescription(Matrix);

impl SceneDescription {
    pub fn from_matrix(m: Matrix) -> Result<Self> {
        if m.shape() != (NUM_OBJECTS, NUM_FEATURES) {
            return Err(Error::Dimension {
                op: "SceneDescription",
                left: (NUM_OBJECTS, NUM_FEATURES),
                right: m.shape(),
            });
        }
        let mut counts = [0usize; NUM_TYPES];
        for r in 0..NUM_OBJECTS {
            counts[ObjectRecord::from_row(m.row(r))?.type_id] += 1;
        }
        if counts.iter().any(|&c| c != INSTANCES_PER_TYPE) {
            return Err(Error::param(format!("type counts {counts:?}, expected 4 of each")));
        }
        Ok(SceneDescription(m))
    }

    pub fn from_objects(objects: &[ObjectRecord]) -> Result<Self> {
        let rows: Vec<[f64; NUM_FEATURES]> = objects.iter().map(ObjectRecord::to_row).collect();
        SceneDescription::from_matrix(Matrix::from_rows(&rows)?)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn objects(&self) -> Vec<ObjectRecord> {
        (0..NUM_OBJECTS)
            .map(|r| ObjectRecord::from_row(self.0.row(r)).expect("validated on construction"))
            .collect()
    }

    /// Row-major flatten (length 160).
    pub fn flatten(&self) -> &[f64] {
        self.0.values()
    }
}

impl TryFrom<Matrix> for SceneDescription {
    type Error = Error;
    fn try_from(m: Matrix) -> Result<Self> {
        SceneDescription::from_matrix(m)
    }
}

impl From<SceneDescription> for Matrix {
    fn from(s: SceneDescription) -> Matrix {
        s.0
    }
}

/// How one object came to be, indexed by generation slot `4·type + instance`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectTrace {
    pub record: ObjectRecord,
    pub position_parent: Option<usize>,
    pub theta: f64,
    pub distance: f64,
    pub color_parent: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneTrace {
    pub objects: Vec<ObjectTrace>,
    /// Row of `D` holding each generation slot.
    pub row_of: Vec<usize>,
}

/// `(x_p + d·cos θ, y_p + d·sin θ)`.
pub fn offset_position(parent: (f64, f64), theta: f64, distance: f64) -> (f64, f64) {
    (parent.0 + distance * theta.cos(), parent.1 + distance * theta.sin())
}

fn clamp01(v: f64, clamp: bool) -> f64 {
    if clamp {
        v.clamp(0.0, 1.0)
    } else {
        v
    }
}

/// Picks a parent slot for one child instance: parent type uniformly among
/// the graph parents, then one of its four instances uniformly.
fn pick_parent(graph: &RelationGraph, child_type: usize, rng: &mut RngStream) -> Option<usize> {
    let parents = graph.parents(child_type);
    if parents.is_empty() {
        return None;
    }
    let p = parents[rng.below(parents.len())];
    Some(p * INSTANCES_PER_TYPE + rng.below(INSTANCES_PER_TYPE))
}

pub fn generate_scene(
    class: &SceneClass,
    params: &GeneratorParams,
    rng: &mut RngStream,
) -> Result<SceneDescription> {
    Ok(generate_scene_traced(class, params, rng)?.0)
}

/// Samples one scene and records every sampled angle, distance and parent.
pub fn generate_scene_traced(
    class: &SceneClass,
    params: &GeneratorParams,
    rng: &mut RngStream,
) -> Result<(SceneDescription, SceneTrace)> {
    let pos_order = class
        .position_graph
        .topological_order()
        .ok_or_else(|| Error::param("position graph is cyclic"))?;
    let col_order = class
        .color_graph
        .topological_order()
        .ok_or_else(|| Error::param("color graph is cyclic"))?;

    let mut objs: Vec<ObjectTrace> = (0..NUM_OBJECTS)
        .map(|slot| {
            let type_id = slot / INSTANCES_PER_TYPE;
            ObjectTrace {
                record: ObjectRecord {
                    type_id,
                    x: 0.0,
                    y: 0.0,
                    r: 0.0,
                    g: 0.0,
                    b: 0.0,
                    size: type_size(type_id),
                },
                position_parent: None,
                theta: 0.0,
                distance: 0.0,
                color_parent: None,
            }
        })
        .collect();

    for &t in &pos_order {
        for slot in t * INSTANCES_PER_TYPE..(t + 1) * INSTANCES_PER_TYPE {
            match pick_parent(&class.position_graph, t, rng) {
                None => {
                    objs[slot].record.x = rng.uniform(0.0, 1.0);
                    objs[slot].record.y = rng.uniform(0.0, 1.0);
                    objs[slot].theta = rng.uniform(0.0, 2.0 * PI);
                }
                Some(p) => {
                    let parent = (objs[p].record.x, objs[p].record.y);
                    let theta_p = objs[p].theta;
                    let theta = rng.uniform(theta_p - PI / 3.0, theta_p + PI / 3.0);
                    let distance = params.d0 + sample_half_normal(params.sigma_d, rng)?;
                    let (x, y) = offset_position(parent, theta, distance);
                    let o = &mut objs[slot];
                    o.record.x = clamp01(x, params.clamp);
                    o.record.y = clamp01(y, params.clamp);
                    o.theta = theta;
                    o.distance = distance;
                    o.position_parent = Some(p);
                }
            }
        }
    }

    for &t in &col_order {
        for slot in t * INSTANCES_PER_TYPE..(t + 1) * INSTANCES_PER_TYPE {
            let rgb = match pick_parent(&class.color_graph, t, rng) {
                None => [
                    rng.uniform(0.0, 1.0),
                    rng.uniform(0.0, 1.0),
                    rng.uniform(0.0, 1.0),
                ],
                Some(p) => {
                    objs[slot].color_parent = Some(p);
                    let pr = &objs[p].record;
                    let mut rgb = [pr.r, pr.g, pr.b];
                    for c in &mut rgb {
                        *c = clamp01(*c + params.sigma_c * rng.standard_normal(), params.clamp);
                    }
                    rgb
                }
            };
            let r = &mut objs[slot].record;
            r.r = rgb[0];
            r.g = rgb[1];
            r.b = rgb[2];
        }
    }

    let mut order: Vec<usize> = (0..NUM_OBJECTS).collect();
    if params.shuffle_rows {
        rng.shuffle(&mut order);
    }
    // order[row] = slot
    let mut row_of = vec![0; NUM_OBJECTS];
    for (row, &slot) in order.iter().enumerate() {
        row_of[slot] = row;
    }
    let rows: Vec<[f64; NUM_FEATURES]> = order.iter().map(|&s| objs[s].record.to_row()).collect();
    let scene = SceneDescription(Matrix::from_rows(&rows)?);
    Ok((scene, SceneTrace { objects: objs, row_of }))
}
