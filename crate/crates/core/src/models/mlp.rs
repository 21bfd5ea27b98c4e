use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{affine_forward, gemm, glorot_uniform, Matrix, ParamSet, RngStream, Trans};

/// Layer widths `[input, hidden…, output]`. Hidden layers are rectified,
/// the output is linear.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_sizes: Vec<usize>,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::param("an MLP needs at least an input and an output width"));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::param(format!("zero-width layer in {layer_sizes:?}")));
        }
        Ok(MlpSpec { layer_sizes })
    }

    /// `[input, hidden…, output]`.
    pub fn with_hidden(input: usize, hidden: &[usize], output: usize) -> Result<Self> {
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        MlpSpec::new(sizes)
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Number of tensors (`w`, `b` per layer).
    pub fn tensor_count(&self) -> usize {
        2 * self.num_layers()
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Glorot weights, zero biases. With `zero_readout` the last layer's
    /// weights start at zero too, so the untrained output is exactly zero.
    pub fn init(&self, rng: &mut RngStream, zero_readout: bool) -> ParamSet {
        let mut p = ParamSet::new();
        let last = self.num_layers() - 1;
        for (l, w) in self.layer_sizes.windows(2).enumerate() {
            let weight = if zero_readout && l == last {
                Matrix::zeros(w[0], w[1])
            } else {
                glorot_uniform(w[0], w[1], rng)
            };
            p.push(format!("w{l}"), weight).expect("fresh names");
            p.push(format!("b{l}"), Matrix::zeros(1, w[1])).expect("fresh names");
        }
        p
    }

    /// Checks that `params` holds this spec's tensors in order.
    pub fn check_params(&self, params: &[Matrix]) -> Result<()> {
        if params.len() != self.tensor_count() {
            return Err(Error::param(format!(
                "MLP expects {} tensors, got {}",
                self.tensor_count(),
                params.len()
            )));
        }
        for (l, w) in self.layer_sizes.windows(2).enumerate() {
            for (t, shape) in [(2 * l, (w[0], w[1])), (2 * l + 1, (1, w[1]))] {
                if params[t].shape() != shape {
                    return Err(Error::Dimension {
                        op: "MLP parameter",
                        left: shape,
                        right: params[t].shape(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Smallest-error equal-width hidden stack of `depth` layers whose total
    /// parameter count is closest to `target`.
    pub fn matched_to(target: usize, input: usize, output: usize, depth: usize) -> Result<Self> {
        let mut best: Option<(usize, MlpSpec)> = None;
        for width in 1..=4096 {
            let spec = MlpSpec::with_hidden(input, &vec![width; depth], output)?;
            let gap = spec.param_count().abs_diff(target);
            if best.as_ref().is_none_or(|(g, _)| gap < *g) {
                best = Some((gap, spec));
            }
        }
        Ok(best.expect("non-empty search").1)
    }
}

/// Layer inputs kept for the backward pass (`inputs[0]` is the batch itself).
#[derive(Clone, Debug)]
pub struct MlpCache {
    inputs: Vec<Matrix>,
}

impl MlpCache {
    pub fn input(&self) -> &Matrix {
        &self.inputs[0]
    }
}

pub fn mlp_forward(spec: &MlpSpec, params: &[Matrix], x: &Matrix) -> Result<(Matrix, MlpCache)> {
    spec.check_params(params)?;
    if x.cols() != spec.input_width() {
        return Err(Error::Dimension {
            op: "mlp_forward (input)",
            left: (x.rows(), spec.input_width()),
            right: x.shape(),
        });
    }
    let last = spec.num_layers() - 1;
    let mut inputs = Vec::with_capacity(spec.num_layers());
    let mut a = x.clone();
    for l in 0..spec.num_layers() {
        let mut z = affine_forward(&a, &params[2 * l], &params[2 * l + 1])?;
        if l < last {
            z.values_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        }
        inputs.push(std::mem::replace(&mut a, z));
    }
    Ok((a, MlpCache { inputs }))
}

/// Accumulates parameter gradients into `grads` and returns `dL/dx`.
pub fn mlp_backward(
    spec: &MlpSpec,
    params: &[Matrix],
    cache: &MlpCache,
    grad_out: &Matrix,
    grads: &mut [Matrix],
) -> Result<Matrix> {
    spec.check_params(params)?;
    spec.check_params(grads)?;
    let rows = cache.inputs[0].rows();
    if grad_out.shape() != (rows, spec.output_width()) {
        return Err(Error::Dimension {
            op: "mlp_backward (grad_out)",
            left: (rows, spec.output_width()),
            right: grad_out.shape(),
        });
    }
    let mut dz = grad_out.clone();
    for l in (0..spec.num_layers()).rev() {
        let a = &cache.inputs[l];
        gemm(1.0, a, Trans::Yes, &dz, Trans::No, 1.0, &mut grads[2 * l])?;
        let db = &mut grads[2 * l + 1];
        for r in 0..dz.rows() {
            for (g, v) in db.values_mut().iter_mut().zip(dz.row(r)) {
                *g += v;
            }
        }
        let mut da = dz.matmul_t(&params[2 * l])?;
        if l > 0 {
            for (d, &act) in da.values_mut().iter_mut().zip(a.values()) {
                if act <= 0.0 {
                    *d = 0.0;
                }
            }
        }
        dz = da;
    }
    Ok(dz)
}
