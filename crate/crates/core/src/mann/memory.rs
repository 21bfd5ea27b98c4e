//! External memory: cosine-similarity reads and least-recently-used-access
//! writes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{sigmoid, Matrix};

/// Norms below this are floored when computing cosine similarity.
pub const NORM_FLOOR: f64 = 1e-12;

/// Value every memory cell starts at. Small and nonzero so that initial
/// cosine similarities are well defined.
pub const INITIAL_CELL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryState {
    /// `N × W` slots.
    pub memory: Matrix,
    pub usage: Vec<f64>,
    /// Most recent read weights, one distribution per head.
    pub read_weights: Vec<Vec<f64>>,
    /// Most recent write weights, one distribution per head.
    pub write_weights: Vec<Vec<f64>>,
    /// Slot each head treats as least used: head `h` gets the `h`-th
    /// smallest usage (ties broken by slot index).
    pub least_used: Vec<usize>,
}

impl MemoryState {
    /// Constant memory, uniform read weights, zero usage.
    pub fn new(slots: usize, width: usize, heads: usize) -> Self {
        let usage = vec![0.0; slots];
        MemoryState {
            memory: Matrix::filled(slots, width, INITIAL_CELL),
            least_used: least_used(&usage, heads),
            usage,
            read_weights: vec![vec![1.0 / slots as f64; slots]; heads],
            write_weights: vec![vec![0.0; slots]; heads],
        }
    }

    pub fn slots(&self) -> usize {
        self.memory.rows()
    }

    pub fn heads(&self) -> usize {
        self.read_weights.len()
    }
}

/// Indices of the `heads` smallest usages, smallest first.
pub fn least_used(usage: &[f64], heads: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..usage.len()).collect();
    idx.sort_by(|&a, &b| usage[a].total_cmp(&usage[b]).then(a.cmp(&b)));
    idx.truncate(heads);
    idx
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity with both norms floored at [`NORM_FLOOR`].
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / (norm(a).max(NORM_FLOOR) * norm(b).max(NORM_FLOOR))
}

/// Gradients of [`cosine`] with respect to `a` and `b`, scaled by `upstream`.
pub(crate) fn cosine_backward(a: &[f64], b: &[f64], upstream: f64, da: &mut [f64], db: &mut [f64]) {
    let (na, nb) = (norm(a), norm(b));
    let (fa, fb) = (na.max(NORM_FLOOR), nb.max(NORM_FLOOR));
    let ab = dot(a, b);
    let denom = fa * fb;
    // d/da [a·b / (|a| |b|)] = b/(|a||b|) − (a·b) a / (|a|³ |b|), second term
    // only where the floor is inactive
    let ka = if na > NORM_FLOOR { ab / (denom * na * na) } else { 0.0 };
    let kb = if nb > NORM_FLOOR { ab / (denom * nb * nb) } else { 0.0 };
    for i in 0..a.len() {
        da[i] += upstream * (b[i] / denom - ka * a[i]);
        db[i] += upstream * (a[i] / denom - kb * b[i]);
    }
}

/// `weights = softmax(strength · cos(key, row_i))`, `read = weightsᵀ·memory`.
pub fn cosine_read(key: &[f64], key_strength: f64, memory: &Matrix) -> Result<(Vec<f64>, Vec<f64>)> {
    if key.len() != memory.cols() {
        return Err(Error::Dimension {
            op: "cosine_read",
            left: (1, key.len()),
            right: memory.shape(),
        });
    }
    let sims: Vec<f64> = (0..memory.rows())
        .map(|i| key_strength * cosine(key, memory.row(i)))
        .collect();
    let max = sims.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = sims.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    let mut read = vec![0.0; memory.cols()];
    for (i, &wi) in w.iter().enumerate() {
        for (r, m) in read.iter_mut().zip(memory.row(i)) {
            *r += wi * m;
        }
    }
    Ok((w, read))
}

/// Write weights for one head: `σ(α)·w_r_prev + (1−σ(α))·onehot(least_used)`.
pub fn write_weights(read_prev: &[f64], least_used: usize, gate_logit: f64) -> Vec<f64> {
    let g = sigmoid(gate_logit);
    let mut w: Vec<f64> = read_prev.iter().map(|r| g * r).collect();
    w[least_used] += 1.0 - g;
    w
}

/// LRUA write. Each head `h` writes `keys[h]` with weights from
/// [`write_weights`]; the previous least-used slots are zeroed first. Usage
/// then decays by `decay` and gains the latest read and the new write
/// weights, and the least-used slots are recomputed.
pub fn lrua_write(
    state: &MemoryState,
    keys: &[Vec<f64>],
    gate_logits: &[f64],
    decay: f64,
) -> Result<MemoryState> {
    let heads = state.heads();
    if keys.len() != heads || gate_logits.len() != heads {
        return Err(Error::Dimension {
            op: "lrua_write (heads)",
            left: (heads, heads),
            right: (keys.len(), gate_logits.len()),
        });
    }
    if let Some(k) = keys.iter().find(|k| k.len() != state.memory.cols()) {
        return Err(Error::Dimension {
            op: "lrua_write (key)",
            left: (1, state.memory.cols()),
            right: (1, k.len()),
        });
    }
    let mut memory = state.memory.clone();
    for &slot in &state.least_used {
        memory.row_mut(slot).fill(0.0);
    }
    let mut ww = Vec::with_capacity(heads);
    for h in 0..heads {
        let w = write_weights(&state.read_weights[h], state.least_used[h], gate_logits[h]);
        for (i, &wi) in w.iter().enumerate() {
            for (m, k) in memory.row_mut(i).iter_mut().zip(&keys[h]) {
                *m += wi * k;
            }
        }
        ww.push(w);
    }
    let mut usage: Vec<f64> = state.usage.iter().map(|u| decay * u).collect();
    for w in state.read_weights.iter().chain(&ww) {
        for (u, v) in usage.iter_mut().zip(w) {
            *u += v;
        }
    }
    Ok(MemoryState {
        memory,
        least_used: least_used(&usage, heads),
        usage,
        read_weights: state.read_weights.clone(),
        write_weights: ww,
    })
}
