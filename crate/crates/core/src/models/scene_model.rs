use serde::{Deserialize, Serialize};

use super::disentangle::{linear_rn_backward, linear_rn_forward, LinearRnSpec};
use super::mlp::{mlp_backward, mlp_forward, MlpSpec};
use super::rn::{rn_backward, rn_forward, RnSpec};
use crate::error::{Error, Result};
use crate::numerics::{sigmoid_bce, softmax_xent, Matrix, ParamSet, RngStream};
use crate::par::Exec;

/// Training objective attached to a target mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// Mean sigmoid cross entropy over every target entry.
    Bce,
    /// Mean softmax cross entropy over rows.
    Xent,
}

impl Loss {
    pub fn apply(self, logits: &Matrix, targets: &Matrix) -> Result<(f64, Matrix)> {
        match self {
            Loss::Bce => sigmoid_bce(logits, targets),
            Loss::Xent => softmax_xent(logits, targets),
        }
    }
}

/// The three scene classifiers.
///
/// Inputs are per-sample matrices: the flattened scene (`1 × mn`) for the
/// MLP, the `m × n` scene for the RN, the entangled vector (`1 × mn`) for
/// the linear+RN model.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SceneModel {
    Mlp(MlpSpec),
    Rn(RnSpec),
    LinearRn(LinearRnSpec),
}

impl SceneModel {
    pub fn kind(&self) -> &'static str {
        match self {
            SceneModel::Mlp(_) => "mlp",
            SceneModel::Rn(_) => "rn",
            SceneModel::LinearRn(_) => "linear_rn",
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            SceneModel::Mlp(s) => s.param_count(),
            SceneModel::Rn(s) => s.param_count(),
            SceneModel::LinearRn(s) => s.param_count(),
        }
    }

    pub fn output_width(&self) -> usize {
        match self {
            SceneModel::Mlp(s) => s.output_width(),
            SceneModel::Rn(s) => s.output,
            SceneModel::LinearRn(s) => s.rn.output,
        }
    }

    /// Fresh parameters with a zeroed readout, so untrained logits are 0.
    pub fn init(&self, rng: &mut RngStream) -> ParamSet {
        match self {
            SceneModel::Mlp(s) => s.init(rng, true),
            SceneModel::Rn(s) => s.init(rng, true),
            SceneModel::LinearRn(s) => s.init(rng, true),
        }
    }

    fn stack(inputs: &[Matrix]) -> Result<Matrix> {
        let cols = inputs.first().map_or(0, Matrix::len);
        let mut x = Matrix::zeros(inputs.len(), cols);
        for (r, m) in inputs.iter().enumerate() {
            if m.len() != cols {
                return Err(Error::Dimension {
                    op: "SceneModel (batch)",
                    left: (1, cols),
                    right: m.shape(),
                });
            }
            x.row_mut(r).copy_from_slice(m.values());
        }
        Ok(x)
    }

    /// Logits for a batch (one row per input).
    pub fn logits(&self, params: &ParamSet, inputs: &[Matrix], exec: Exec) -> Result<Matrix> {
        let p = params.tensors();
        let rows: Vec<Result<Matrix>> = match self {
            SceneModel::Mlp(s) => return Ok(mlp_forward(s, p, &Self::stack(inputs)?)?.0),
            SceneModel::Rn(s) => exec.map(inputs, |x| Ok(rn_forward(s, p, x)?.0)),
            SceneModel::LinearRn(s) => exec.map(inputs, |x| Ok(linear_rn_forward(s, p, x.values())?.0)),
        };
        let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
        Self::stack(&rows)
    }

    /// Batch loss, its parameter gradient and the logits. Per-sample
    /// gradients are summed in sample order whatever `exec` is.
    pub fn loss_and_grad(
        &self,
        params: &ParamSet,
        inputs: &[Matrix],
        targets: &Matrix,
        loss: Loss,
        exec: Exec,
    ) -> Result<(f64, ParamSet, Matrix)> {
        let p = params.tensors();
        match self {
            SceneModel::Mlp(s) => {
                let x = Self::stack(inputs)?;
                let (logits, cache) = mlp_forward(s, p, &x)?;
                let (l, g) = loss.apply(&logits, targets)?;
                let mut grads = params.zeros_like();
                mlp_backward(s, p, &cache, &g, grads.tensors_mut())?;
                Ok((l, grads, logits))
            }
            SceneModel::Rn(s) => {
                let fwd = exec
                    .map(inputs, |x| rn_forward(s, p, x))
                    .into_iter()
                    .collect::<Result<Vec<_>>>()?;
                let logits = Self::stack(&fwd.iter().map(|(y, _)| y.clone()).collect::<Vec<_>>())?;
                let (l, g) = loss.apply(&logits, targets)?;
                let idx: Vec<usize> = (0..fwd.len()).collect();
                let parts = exec.map(&idx, |&i| {
                    let mut grads = params.zeros_like();
                    let go = Matrix::row_vector(g.row(i).to_vec());
                    rn_backward(s, p, &fwd[i].1, &go, grads.tensors_mut()).map(|_| grads)
                });
                let grads = ParamSet::sum_ordered(parts.into_iter().collect::<Result<Vec<_>>>()?)
                    .unwrap_or_else(|| params.zeros_like());
                Ok((l, grads, logits))
            }
            SceneModel::LinearRn(s) => {
                let fwd = exec
                    .map(inputs, |x| linear_rn_forward(s, p, x.values()))
                    .into_iter()
                    .collect::<Result<Vec<_>>>()?;
                let logits = Self::stack(&fwd.iter().map(|(y, _)| y.clone()).collect::<Vec<_>>())?;
                let (l, g) = loss.apply(&logits, targets)?;
                let idx: Vec<usize> = (0..fwd.len()).collect();
                let parts = exec.map(&idx, |&i| {
                    let mut grads = params.zeros_like();
                    let go = Matrix::row_vector(g.row(i).to_vec());
                    linear_rn_backward(s, p, &fwd[i].1, &go, grads.tensors_mut()).map(|_| grads)
                });
                let grads = ParamSet::sum_ordered(parts.into_iter().collect::<Result<Vec<_>>>()?)
                    .unwrap_or_else(|| params.zeros_like());
                Ok((l, grads, logits))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn untrained_logits_are_zero() {
        let mut rng = RngStream::new(0, 0);
        let model = SceneModel::Rn(RnSpec::symmetric(3, &[4], 4, 5));
        let p = model.init(&mut rng);
        let x = Matrix::from_vec(4, 3, (0..12).map(|i| i as f64 / 12.0).collect()).unwrap();
        let y = model.logits(&p, &[x], Exec::Sequential).unwrap();
        assert!(y.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn exec_modes_agree_bitwise() {
        let mut rng = RngStream::new(1, 0);
        let model = SceneModel::Rn(RnSpec::symmetric(3, &[5, 4], 4, 2));
        let mut p = model.init(&mut rng);
        for t in p.tensors_mut() {
            for v in t.values_mut() {
                *v += rng.uniform(-0.1, 0.1);
            }
        }
        let inputs: Vec<Matrix> = (0..7)
            .map(|_| Matrix::from_vec(5, 3, (0..15).map(|_| rng.uniform(0.0, 1.0)).collect()).unwrap())
            .collect();
        let t = Matrix::from_vec(7, 2, (0..14).map(|i| (i % 2) as f64).collect()).unwrap();
        let a = model.loss_and_grad(&p, &inputs, &t, Loss::Bce, Exec::Sequential).unwrap();
        let b = model.loss_and_grad(&p, &inputs, &t, Loss::Bce, Exec::Parallel).unwrap();
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        assert_eq!(a.1, b.1);
    }
}
