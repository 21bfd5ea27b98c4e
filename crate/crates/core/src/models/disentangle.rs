//! Learnable square linear map in front of an RN, trained through the RN's
//! loss to undo an entangling permutation.

use serde::{Deserialize, Serialize};

use super::rn::{rn_backward, rn_forward, RnCache, RnSpec};
use crate::error::{Error, Result};
use crate::numerics::{glorot_uniform, Matrix, ParamSet, RngStream};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearRnSpec {
    /// Rows of the reshaped scene (`m`).
    pub objects: usize,
    pub rn: RnSpec,
}

impl LinearRnSpec {
    /// `mn`, the side of `U`.
    pub fn size(&self) -> usize {
        self.objects * self.rn.features
    }

    pub fn param_count(&self) -> usize {
        self.size() * self.size() + self.rn.param_count()
    }

    /// `u` followed by the RN's tensors prefixed `rn.`.
    pub fn init(&self, rng: &mut RngStream, zero_readout: bool) -> ParamSet {
        let mut p = ParamSet::new();
        p.push("u", glorot_uniform(self.size(), self.size(), rng))
            .expect("fresh names");
        p.extend_prefixed("rn.", self.rn.init(rng, zero_readout))
            .expect("fresh names");
        p
    }
}

/// `U·v` reshaped row-major to `objects × (len / objects)`.
pub fn disentangle_forward(v: &[f64], u: &Matrix, objects: usize) -> Result<Matrix> {
    if u.rows() != u.cols() || v.len() != u.cols() || objects == 0 || v.len() % objects != 0 {
        return Err(Error::Dimension {
            op: "disentangle_forward",
            left: u.shape(),
            right: (v.len(), 1),
        });
    }
    let col = Matrix::from_vec(v.len(), 1, v.to_vec())?;
    u.matmul(&col)?.reshape(objects, v.len() / objects)
}

#[derive(Clone, Debug)]
pub struct LinearRnCache {
    input: Vec<f64>,
    rn: RnCache,
}

impl LinearRnCache {
    pub fn rn_cache(&self) -> &RnCache {
        &self.rn
    }
}

pub fn linear_rn_forward(
    spec: &LinearRnSpec,
    params: &[Matrix],
    v: &[f64],
) -> Result<(Matrix, LinearRnCache)> {
    let (u, rest) = params
        .split_first()
        .ok_or_else(|| Error::param("missing disentangling layer"))?;
    if u.shape() != (spec.size(), spec.size()) {
        return Err(Error::Dimension {
            op: "linear_rn_forward (U)",
            left: (spec.size(), spec.size()),
            right: u.shape(),
        });
    }
    let scene = disentangle_forward(v, u, spec.objects)?;
    let (logits, rn) = rn_forward(&spec.rn, rest, &scene)?;
    Ok((
        logits,
        LinearRnCache {
            input: v.to_vec(),
            rn,
        },
    ))
}

/// Accumulates gradients for `U` and the RN into `grads`.
pub fn linear_rn_backward(
    spec: &LinearRnSpec,
    params: &[Matrix],
    cache: &LinearRnCache,
    grad_out: &Matrix,
    grads: &mut [Matrix],
) -> Result<()> {
    let (_, rest) = params
        .split_first()
        .ok_or_else(|| Error::param("missing disentangling layer"))?;
    let (gu, grest) = grads
        .split_first_mut()
        .ok_or_else(|| Error::param("missing disentangling gradient"))?;
    let d_scene = rn_backward(&spec.rn, rest, &cache.rn, grad_out, grest)?;
    // dU = vec(dD) · vᵀ
    let n = spec.size();
    let gu = gu.values_mut();
    for (r, &d) in d_scene.values().iter().enumerate() {
        if d != 0.0 {
            let row = &mut gu[r * n..(r + 1) * n];
            row.iter_mut().zip(&cache.input).for_each(|(o, x)| *o += d * x);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_gradcheck, sigmoid_bce};
    use crate::scenegen::{entangle, generate_scene, make_permutation, GeneratorParams, RelationGraph, SceneClass, NUM_TYPES};

    fn scene() -> crate::scenegen::SceneDescription {
        let g = RelationGraph::from_edges(NUM_TYPES, &[(1, 2)]).unwrap();
        let c = SceneClass::new(0, g, RelationGraph::empty(NUM_TYPES));
        generate_scene(&c, &GeneratorParams::default(), &mut RngStream::new(6, 0)).unwrap()
    }

    #[test]
    fn identity_restores_scene() {
        let s = scene();
        let out = disentangle_forward(s.flatten(), &Matrix::identity(160), 16).unwrap();
        assert_eq!(&out, s.matrix());
    }

    #[test]
    fn transpose_of_b_undoes_entangling() {
        let s = scene();
        let b = make_permutation(99, 160);
        let v = entangle(&s, &b).unwrap();
        let out = disentangle_forward(&v, &b.to_matrix().transpose(), 16).unwrap();
        assert_eq!(&out, s.matrix());
    }

    #[test]
    fn length_mismatch() {
        assert!(disentangle_forward(&[0.0; 10], &Matrix::identity(160), 16).is_err());
    }

    #[test]
    fn gradcheck_composite() {
        let mut rng = RngStream::new(30, 0);
        let spec = LinearRnSpec {
            objects: 4,
            rn: RnSpec::symmetric(3, &[6, 5], 5, 3),
        };
        let params = spec.init(&mut rng, false);
        let v: Vec<f64> = (0..12).map(|_| rng.uniform(0.0, 1.0)).collect();
        let t = Matrix::from_vec(1, 3, vec![0.0, 1.0, 1.0]).unwrap();
        let (y, cache) = linear_rn_forward(&spec, params.tensors(), &v).unwrap();
        let (_, gy) = sigmoid_bce(&y, &t).unwrap();
        let mut grads = params.zeros_like();
        linear_rn_backward(&spec, params.tensors(), &cache, &gy, grads.tensors_mut()).unwrap();
        let r = finite_diff_gradcheck(
            |p| Ok(sigmoid_bce(&linear_rn_forward(&spec, p.tensors(), &v)?.0, &t)?.0),
            &params,
            &grads,
            100,
            1e-6,
            &mut rng,
        )
        .unwrap();
        assert!(r.max_relative_error < 1e-4, "{r:?}");
    }
}
