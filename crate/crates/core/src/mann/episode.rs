use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::RngStream;
use crate::scenegen::{generate_scene, GeneratorParams, SceneClass, SceneDescription};

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeStep {
    pub scene: SceneDescription,
    pub class_id: usize,
    /// Label shown alongside this step: the previous step's target.
    pub input_label: Option<usize>,
    pub target_label: usize,
    /// 1 for the first occurrence of the class in this episode, 2 for the
    /// second, and so on.
    pub class_instance_index: usize,
}

/// A labelled sequence over a few classes whose labels are drawn afresh
/// for every episode.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub label_count: usize,
    pub steps: Vec<EpisodeStep>,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// One-hot input label for step `t`, all zeros at `t = 0`.
    pub fn input_vector(&self, t: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.label_count];
        if let Some(l) = self.steps[t].input_label {
            v[l] = 1.0;
        }
        v
    }

    /// Applies a label permutation to inputs and targets together.
    pub fn relabel(&self, perm: &[usize]) -> Result<Episode> {
        if perm.len() != self.label_count {
            return Err(Error::param("label permutation has the wrong length"));
        }
        let mut out = self.clone();
        for s in &mut out.steps {
            s.input_label = s.input_label.map(|l| perm[l]);
            s.target_label = perm[s.target_label];
        }
        Ok(out)
    }

    /// JSON lines, one step per line.
    pub fn dump<W: Write>(&self, mut w: W) -> Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            t: usize,
            class_id: usize,
            input_label: Vec<f64>,
            target_label: usize,
            class_instance_index: usize,
            #[serde(rename = "D")]
            d: Vec<&'a [f64]>,
        }
        for (t, s) in self.steps.iter().enumerate() {
            let m = s.scene.matrix();
            let line = Line {
                t,
                class_id: s.class_id,
                input_label: self.input_vector(t),
                target_label: s.target_label,
                class_instance_index: s.class_instance_index,
                d: (0..m.rows()).map(|r| m.row(r)).collect(),
            };
            let text = serde_json::to_string(&line).expect("episode step serializes");
            writeln!(w, "{text}").map_err(|e| Error::io("<episode dump>", e))?;
        }
        Ok(())
    }
}

/// Draws `classes` distinct classes from `pool`, assigns them distinct
/// random labels out of `label_count`, then samples `steps` class draws
/// uniformly with a freshly generated scene for each.
pub fn build_episode(
    pool: &[SceneClass],
    classes: usize,
    label_count: usize,
    steps: usize,
    generator: &GeneratorParams,
    rng: &mut RngStream,
) -> Result<Episode> {
    if pool.len() < classes || classes == 0 {
        return Err(Error::param(format!(
            "episode needs {classes} classes, pool has {}",
            pool.len()
        )));
    }
    if label_count < classes {
        return Err(Error::param(format!(
            "{classes} classes cannot get distinct labels out of {label_count}"
        )));
    }
    let chosen = rng.sample_indices(pool.len(), classes);
    let labels = rng.sample_indices(label_count, classes);
    let mut seen = vec![0usize; classes];
    let mut out = Vec::with_capacity(steps);
    let mut prev: Option<usize> = None;
    for _ in 0..steps {
        let c = rng.below(classes);
        seen[c] += 1;
        let class = &pool[chosen[c]];
        let scene = generate_scene(class, generator, rng)?;
        out.push(EpisodeStep {
            scene,
            class_id: class.class_id,
            input_label: prev,
            target_label: labels[c],
            class_instance_index: seen[c],
        });
        prev = Some(labels[c]);
    }
    Ok(Episode {
        label_count,
        steps: out,
    })
}
