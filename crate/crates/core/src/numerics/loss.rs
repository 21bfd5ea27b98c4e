use super::Matrix;
use crate::error::{Error, Result};

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross entropy over all entries of `logits`, and its gradient.
///
/// Uses `max(z,0) − z·t + ln(1 + e^{−|z|})`, which never overflows.
pub fn sigmoid_bce(logits: &Matrix, targets: &Matrix) -> Result<(f64, Matrix)> {
    logits.check_same("sigmoid_bce", targets)?;
    if let Some(i) = targets.values().iter().position(|&t| t != 0.0 && t != 1.0) {
        return Err(Error::param(format!(
            "binary target expected, found {} at flat index {i}",
            targets.values()[i]
        )));
    }
    let count = logits.len().max(1) as f64;
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    let mut total = 0.0;
    for ((g, &z), &t) in grad
        .values_mut()
        .iter_mut()
        .zip(logits.values())
        .zip(targets.values())
    {
        total += z.max(0.0) - z * t + (-z.abs()).exp().ln_1p();
        *g = (sigmoid(z) - t) / count;
    }
    Ok((total / count, grad))
}

/// Row-wise softmax.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            s += *v;
        }
        row.iter_mut().for_each(|v| *v /= s);
    }
    out
}

/// Mean (over rows) softmax cross entropy against one-hot rows.
pub fn softmax_xent(logits: &Matrix, one_hot: &Matrix) -> Result<(f64, Matrix)> {
    logits.check_same("softmax_xent", one_hot)?;
    let batch = logits.rows().max(1) as f64;
    let mut total = 0.0;
    let mut grad = softmax_rows(logits);
    for r in 0..logits.rows() {
        let class = one_hot_index(one_hot.row(r))
            .ok_or_else(|| Error::param(format!("target row {r} is not one-hot")))?;
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        total += lse - row[class];
        let g = grad.row_mut(r);
        g[class] -= 1.0;
        g.iter_mut().for_each(|v| *v /= batch);
    }
    Ok((total / batch, grad))
}

/// Position of the single `1.0` in an otherwise zero row.
pub fn one_hot_index(row: &[f64]) -> Option<usize> {
    let mut hit = None;
    for (i, &v) in row.iter().enumerate() {
        if v == 1.0 {
            if hit.is_some() {
                return None;
            }
            hit = Some(i);
        } else if v != 0.0 {
            return None;
        }
    }
    hit
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}
