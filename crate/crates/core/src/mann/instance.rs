use serde::Serialize;

use super::episode::Episode;
use crate::error::{Error, Result};
use crate::numerics::RngStream;

/// Accuracy by within-episode occurrence: entry `k − 1` covers steps whose
/// `class_instance_index` is `k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InstanceCurve {
    /// `None` where no step had that instance index.
    pub accuracy: Vec<Option<f64>>,
    pub counts: Vec<usize>,
}

impl InstanceCurve {
    pub fn at(&self, k: usize) -> Option<f64> {
        self.accuracy.get(k.checked_sub(1)?).copied().flatten()
    }

    /// Pooled accuracy over instances `k ≥ from`.
    pub fn from_instance(&self, from: usize, predictions: &[Vec<usize>], episodes: &[Episode]) -> Option<f64> {
        let mut hit = 0usize;
        let mut n = 0usize;
        for (pred, ep) in predictions.iter().zip(episodes) {
            for (p, s) in pred.iter().zip(&ep.steps) {
                if s.class_instance_index >= from {
                    n += 1;
                    hit += usize::from(*p == s.target_label);
                }
            }
        }
        (n > 0).then(|| hit as f64 / n as f64)
    }
}

/// Per-instance accuracy for `k = 1..=max_instance`.
pub fn instance_accuracy(
    predictions: &[Vec<usize>],
    episodes: &[Episode],
    max_instance: usize,
) -> Result<InstanceCurve> {
    if predictions.len() != episodes.len() {
        return Err(Error::param("one prediction sequence per episode expected"));
    }
    let mut hits = vec![0usize; max_instance];
    let mut counts = vec![0usize; max_instance];
    for (pred, ep) in predictions.iter().zip(episodes) {
        if pred.len() != ep.len() {
            return Err(Error::param("prediction sequence length differs from episode"));
        }
        for (p, s) in pred.iter().zip(&ep.steps) {
            let k = s.class_instance_index;
            if (1..=max_instance).contains(&k) {
                counts[k - 1] += 1;
                hits[k - 1] += usize::from(*p == s.target_label);
            }
        }
    }
    Ok(InstanceCurve {
        accuracy: hits
            .iter()
            .zip(&counts)
            .map(|(&h, &n)| (n > 0).then(|| h as f64 / n as f64))
            .collect(),
        counts,
    })
}

/// Predictions of an ideal memory: a class seen before gets the label that
/// followed its first occurrence, a new class gets a uniformly random label.
pub fn perfect_memory_predictions(episode: &Episode, rng: &mut RngStream) -> Vec<usize> {
    let mut known: Vec<(usize, usize)> = Vec::new();
    let mut out = Vec::with_capacity(episode.len());
    for (t, s) in episode.steps.iter().enumerate() {
        // the label of step t−1 arrives now
        if t > 0 {
            let prev = &episode.steps[t - 1];
            if let Some(l) = s.input_label {
                if !known.iter().any(|&(c, _)| c == prev.class_id) {
                    known.push((prev.class_id, l));
                }
            }
        }
        let guess = match known.iter().find(|&&(c, _)| c == s.class_id) {
            Some(&(_, l)) => l,
            None => rng.below(episode.label_count),
        };
        out.push(guess);
    }
    out
}
