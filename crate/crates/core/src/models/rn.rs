//! Relation Network: `logits = f( Σ_{i≠j} g(o_i ‖ o_j) )`.
//!
//! The sum runs over all ordered pairs of distinct rows, in the canonical
//! order `(0,1), (0,2), …, (m−1,m−2)`. Two algebraic shortcuts keep the
//! per-pair work down without changing the function:
//!
//! * the first layer of `g` is split into the halves acting on `o_i` and
//!   `o_j`, so its pre-activation is `A_i + C_j + b` with `A = D·W_top`,
//!   `C = D·W_bottom`;
//! * `g`'s output layer is linear, so it is applied once to the summed last
//!   hidden activations (with the bias scaled by the pair count).

use serde::{Deserialize, Serialize};

use super::mlp::{mlp_backward, mlp_forward, MlpCache, MlpSpec};
use crate::error::{Error, Result};
use crate::numerics::{gemm, Matrix, ParamSet, RngStream, Trans};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RnSpec {
    /// Features per object (`n`); `g` sees `2n` inputs.
    pub features: usize,
    pub g_hidden: Vec<usize>,
    pub g_out: usize,
    pub f_hidden: Vec<usize>,
    pub output: usize,
}

impl RnSpec {
    /// `g` and `f` both get the same hidden stack.
    pub fn symmetric(features: usize, hidden: &[usize], g_out: usize, output: usize) -> Self {
        RnSpec {
            features,
            g_hidden: hidden.to_vec(),
            g_out,
            f_hidden: hidden.to_vec(),
            output,
        }
    }

    pub fn g_spec(&self) -> MlpSpec {
        MlpSpec::with_hidden(2 * self.features, &self.g_hidden, self.g_out)
            .expect("validated widths")
    }

    pub fn f_spec(&self) -> MlpSpec {
        MlpSpec::with_hidden(self.g_out, &self.f_hidden, self.output).expect("validated widths")
    }

    pub fn validate(&self) -> Result<()> {
        MlpSpec::with_hidden(2 * self.features, &self.g_hidden, self.g_out)?;
        MlpSpec::with_hidden(self.g_out, &self.f_hidden, self.output)?;
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.g_spec().param_count() + self.f_spec().param_count()
    }

    pub fn tensor_count(&self) -> usize {
        self.g_spec().tensor_count() + self.f_spec().tensor_count()
    }

    /// Tensors are named `g.w0, g.b0, …, f.w0, …`.
    pub fn init(&self, rng: &mut RngStream, zero_readout: bool) -> ParamSet {
        let mut p = ParamSet::new();
        p.extend_prefixed("g.", self.g_spec().init(rng, false))
            .expect("fresh names");
        p.extend_prefixed("f.", self.f_spec().init(rng, zero_readout))
            .expect("fresh names");
        p
    }
}

/// Everything `rn_backward` needs from a forward pass.
#[derive(Clone, Debug)]
pub struct RnCache {
    scene: Matrix,
    /// Post-ReLU activations of each hidden layer of `g`, one row per pair.
    hidden: Vec<Matrix>,
    /// Sum over pairs of the input to `g`'s output layer.
    pair_sum: Matrix,
    f_cache: MlpCache,
    fingerprint: u64,
}

impl RnCache {
    /// `Σ g(o_i ‖ o_j)` as fed to `f`.
    pub fn aggregate(&self) -> &Matrix {
        self.f_cache.input()
    }
}

/// Cheap order-sensitive hash of parameter bits, used to catch a backward
/// pass run against parameters other than the forward's.
pub(crate) fn fingerprint(params: &[Matrix]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for t in params {
        for v in t.values() {
            h = (h ^ v.to_bits()).wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

fn split_params<'a>(spec: &RnSpec, params: &'a [Matrix]) -> Result<(&'a [Matrix], &'a [Matrix])> {
    if params.len() != spec.tensor_count() {
        return Err(Error::param(format!(
            "RN expects {} tensors, got {}",
            spec.tensor_count(),
            params.len()
        )));
    }
    Ok(params.split_at(spec.g_spec().tensor_count()))
}

fn pair_count(m: usize) -> usize {
    m * (m - 1)
}

/// Rows `[lo, hi)` of a matrix as a new matrix.
fn row_block(m: &Matrix, lo: usize, hi: usize) -> Matrix {
    Matrix::from_vec(hi - lo, m.cols(), m.values()[lo * m.cols()..hi * m.cols()].to_vec())
        .expect("in-range block")
}

pub fn rn_forward(spec: &RnSpec, params: &[Matrix], scene: &Matrix) -> Result<(Matrix, RnCache)> {
    let (gp, fp) = split_params(spec, params)?;
    let g = spec.g_spec();
    g.check_params(gp)?;
    let (m, n) = scene.shape();
    if n != spec.features || m < 2 {
        return Err(Error::Dimension {
            op: "rn_forward (scene)",
            left: (m.max(2), spec.features),
            right: scene.shape(),
        });
    }
    let pairs = pair_count(m);
    let layers = g.num_layers();
    let mut hidden = Vec::with_capacity(layers - 1);

    let pair_sum = if layers == 1 {
        let mut s = Matrix::zeros(1, 2 * n);
        for i in 0..m {
            for j in (0..m).filter(|&j| j != i) {
                let (a, b) = s.values_mut().split_at_mut(n);
                a.iter_mut().zip(scene.row(i)).for_each(|(x, v)| *x += v);
                b.iter_mut().zip(scene.row(j)).for_each(|(x, v)| *x += v);
            }
        }
        s
    } else {
        let w0 = &gp[0];
        let h1 = w0.cols();
        let a = scene.matmul(&row_block(w0, 0, n))?;
        let c = scene.matmul(&row_block(w0, n, 2 * n))?;
        let b0 = gp[1].values();
        let mut act = Matrix::zeros(pairs, h1);
        let mut p = 0;
        for i in 0..m {
            for j in (0..m).filter(|&j| j != i) {
                let out = act.row_mut(p);
                for (k, o) in out.iter_mut().enumerate() {
                    *o = (a.get(i, k) + c.get(j, k) + b0[k]).max(0.0);
                }
                p += 1;
            }
        }
        for l in 1..layers - 1 {
            let w = &gp[2 * l];
            let mut z = Matrix::zeros(pairs, w.cols());
            for r in 0..pairs {
                z.row_mut(r).copy_from_slice(gp[2 * l + 1].values());
            }
            gemm(1.0, &act, Trans::No, w, Trans::No, 1.0, &mut z)?;
            z.values_mut().iter_mut().for_each(|v| *v = v.max(0.0));
            hidden.push(std::mem::replace(&mut act, z));
        }
        let s = act.sum_rows();
        hidden.push(act);
        s
    };

    let last = layers - 1;
    let mut agg = pair_sum.matmul(&gp[2 * last])?;
    for (o, b) in agg.values_mut().iter_mut().zip(gp[2 * last + 1].values()) {
        *o += pairs as f64 * b;
    }
    let (logits, f_cache) = mlp_forward(&spec.f_spec(), fp, &agg)?;
    Ok((
        logits,
        RnCache {
            scene: scene.clone(),
            hidden,
            pair_sum,
            f_cache,
            fingerprint: fingerprint(params),
        },
    ))
}

/// Accumulates parameter gradients into `grads`; returns `dL/dD`.
pub fn rn_backward(
    spec: &RnSpec,
    params: &[Matrix],
    cache: &RnCache,
    grad_out: &Matrix,
    grads: &mut [Matrix],
) -> Result<Matrix> {
    if fingerprint(params) != cache.fingerprint {
        return Err(Error::param("stale RN cache: parameters changed since the forward pass"));
    }
    let (gp, fp) = split_params(spec, params)?;
    if grads.len() != params.len() {
        return Err(Error::param("gradient buffer does not match RN parameters"));
    }
    let (gg, fg) = grads.split_at_mut(gp.len());
    let g = spec.g_spec();
    let layers = g.num_layers();
    let (m, n) = cache.scene.shape();
    let pairs = pair_count(m);

    let d_agg = mlp_backward(&spec.f_spec(), fp, &cache.f_cache, grad_out, fg)?;

    let last = layers - 1;
    gemm(1.0, &cache.pair_sum, Trans::Yes, &d_agg, Trans::No, 1.0, &mut gg[2 * last])?;
    for (o, d) in gg[2 * last + 1].values_mut().iter_mut().zip(d_agg.values()) {
        *o += pairs as f64 * d;
    }
    let d_sum = d_agg.matmul_t(&gp[2 * last])?;

    let mut d_scene = Matrix::zeros(m, n);
    if layers == 1 {
        let k = (m - 1) as f64;
        let (top, bottom) = d_sum.values().split_at(n);
        for i in 0..m {
            for (c, o) in d_scene.row_mut(i).iter_mut().enumerate() {
                *o = k * (top[c] + bottom[c]);
            }
        }
        return Ok(d_scene);
    }

    // Every pair receives the same upstream gradient for the summed layer.
    let top_act = &cache.hidden[layers - 2];
    let mut dz = Matrix::zeros(pairs, top_act.cols());
    for r in 0..pairs {
        for ((o, &a), &d) in dz.row_mut(r).iter_mut().zip(top_act.row(r)).zip(d_sum.values()) {
            *o = if a > 0.0 { d } else { 0.0 };
        }
    }
    for l in (1..layers - 1).rev() {
        let input = &cache.hidden[l - 1];
        gemm(1.0, input, Trans::Yes, &dz, Trans::No, 1.0, &mut gg[2 * l])?;
        for r in 0..pairs {
            for (o, v) in gg[2 * l + 1].values_mut().iter_mut().zip(dz.row(r)) {
                *o += v;
            }
        }
        let mut dh = dz.matmul_t(&gp[2 * l])?;
        for (d, &a) in dh.values_mut().iter_mut().zip(input.values()) {
            if a <= 0.0 {
                *d = 0.0;
            }
        }
        dz = dh;
    }

    // First layer: fold pair gradients back onto the rows they came from.
    let h1 = dz.cols();
    let mut by_first = Matrix::zeros(m, h1);
    let mut by_second = Matrix::zeros(m, h1);
    let mut p = 0;
    for i in 0..m {
        for j in (0..m).filter(|&j| j != i) {
            let row = dz.row(p);
            by_first.row_mut(i).iter_mut().zip(row).for_each(|(o, v)| *o += v);
            by_second.row_mut(j).iter_mut().zip(row).for_each(|(o, v)| *o += v);
            p += 1;
        }
    }
    let db0 = by_first.sum_rows();
    gg[1].add_assign(&db0)?;
    let dw_top = cache.scene.t_matmul(&by_first)?;
    let dw_bottom = cache.scene.t_matmul(&by_second)?;
    {
        let w = gg[0].values_mut();
        let (top, bottom) = w.split_at_mut(n * h1);
        top.iter_mut().zip(dw_top.values()).for_each(|(o, v)| *o += v);
        bottom.iter_mut().zip(dw_bottom.values()).for_each(|(o, v)| *o += v);
    }
    let w0 = &gp[0];
    gemm(1.0, &by_first, Trans::No, &row_block(w0, 0, n), Trans::Yes, 0.0, &mut d_scene)?;
    gemm(1.0, &by_second, Trans::No, &row_block(w0, n, 2 * n), Trans::Yes, 1.0, &mut d_scene)?;
    Ok(d_scene)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_gradcheck, sigmoid_bce};

    fn random_scene(m: usize, n: usize, rng: &mut RngStream) -> Matrix {
        Matrix::from_vec(m, n, (0..m * n).map(|_| rng.uniform(0.0, 1.0)).collect()).unwrap()
    }

    /// Direct evaluation of the defining sum, pair by pair, through full `g`.
    fn naive_rn(spec: &RnSpec, params: &[Matrix], scene: &Matrix) -> Matrix {
        let (gp, fp) = params.split_at(spec.g_spec().tensor_count());
        let m = scene.rows();
        let mut agg = Matrix::zeros(1, spec.g_out);
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    continue;
                }
                let mut x = scene.row(i).to_vec();
                x.extend_from_slice(scene.row(j));
                let (y, _) = mlp_forward(&spec.g_spec(), gp, &Matrix::row_vector(x)).unwrap();
                agg.add_assign(&y).unwrap();
            }
        }
        mlp_forward(&spec.f_spec(), fp, &agg).unwrap().0
    }

    #[test]
    fn matches_direct_pair_sum() {
        let mut rng = RngStream::new(10, 0);
        for hidden in [vec![], vec![6], vec![6, 5]] {
            let spec = RnSpec::symmetric(4, &hidden, 3, 2);
            let p = spec.init(&mut rng, false);
            let scene = random_scene(5, 4, &mut rng);
            let (y, _) = rn_forward(&spec, p.tensors(), &scene).unwrap();
            let expected = naive_rn(&spec, p.tensors(), &scene);
            assert!(y.max_abs_diff(&expected) < 1e-12, "hidden {hidden:?}");
        }
    }

    #[test]
    fn two_objects_expand() {
        let mut rng = RngStream::new(11, 0);
        let spec = RnSpec::symmetric(3, &[4], 5, 2);
        let p = spec.init(&mut rng, false);
        let scene = random_scene(2, 3, &mut rng);
        let (gp, fp) = p.tensors().split_at(spec.g_spec().tensor_count());
        let g = |a: &[f64], b: &[f64]| {
            let mut x = a.to_vec();
            x.extend_from_slice(b);
            mlp_forward(&spec.g_spec(), gp, &Matrix::row_vector(x)).unwrap().0
        };
        let mut agg = g(scene.row(0), scene.row(1));
        agg.add_assign(&g(scene.row(1), scene.row(0))).unwrap();
        let expected = mlp_forward(&spec.f_spec(), fp, &agg).unwrap().0;
        let (y, _) = rn_forward(&spec, p.tensors(), &scene).unwrap();
        assert!(y.max_abs_diff(&expected) < 1e-13);
    }

    #[test]
    fn duplicated_rows_double_the_aggregate() {
        let mut rng = RngStream::new(12, 0);
        let spec = RnSpec::symmetric(3, &[4, 4], 5, 2);
        let p = spec.init(&mut rng, false);
        let row: Vec<f64> = (0..3).map(|_| rng.uniform(0.0, 1.0)).collect();
        let scene = Matrix::from_rows(&[row.clone(), row.clone()]).unwrap();
        let (_, cache) = rn_forward(&spec, p.tensors(), &scene).unwrap();
        let (gp, _) = p.tensors().split_at(spec.g_spec().tensor_count());
        let mut x = row.clone();
        x.extend_from_slice(&row);
        let (single, _) = mlp_forward(&spec.g_spec(), gp, &Matrix::row_vector(x)).unwrap();
        for (a, s) in cache.aggregate().values().iter().zip(single.values()) {
            assert!((a - 2.0 * s).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_g_gives_f_of_zero() {
        let mut rng = RngStream::new(13, 0);
        let spec = RnSpec::symmetric(3, &[4], 5, 2);
        let mut p = spec.init(&mut rng, false);
        for t in &mut p.tensors_mut()[..spec.g_spec().tensor_count()] {
            t.fill(0.0);
        }
        let scene = random_scene(6, 3, &mut rng);
        let (y, _) = rn_forward(&spec, p.tensors(), &scene).unwrap();
        let fp = &p.tensors()[spec.g_spec().tensor_count()..];
        let (expected, _) = mlp_forward(&spec.f_spec(), fp, &Matrix::zeros(1, 5)).unwrap();
        assert_eq!(y, expected);
    }

    #[test]
    fn rejects_wrong_feature_width_and_stale_cache() {
        let mut rng = RngStream::new(14, 0);
        let spec = RnSpec::symmetric(3, &[4], 5, 2);
        let mut p = spec.init(&mut rng, false);
        assert!(rn_forward(&spec, p.tensors(), &Matrix::zeros(4, 5)).is_err());
        assert!(rn_forward(&spec, p.tensors(), &Matrix::zeros(1, 3)).is_err());
        let scene = random_scene(4, 3, &mut rng);
        let (_, cache) = rn_forward(&spec, p.tensors(), &scene).unwrap();
        p.flat_set(0, 0.123);
        let mut g = p.zeros_like();
        let err = rn_backward(&spec, p.tensors(), &cache, &Matrix::zeros(1, 2), g.tensors_mut());
        assert!(err.is_err());
    }

    fn check(hidden: &[usize], seed: u64) {
        let mut rng = RngStream::new(seed, 0);
        let spec = RnSpec::symmetric(5, hidden, 6, 4);
        let params = spec.init(&mut rng, false);
        let scene = random_scene(5, 5, &mut rng);
        let t = Matrix::from_vec(1, 4, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let (y, cache) = rn_forward(&spec, params.tensors(), &scene).unwrap();
        let (_, gy) = sigmoid_bce(&y, &t).unwrap();
        let mut grads = params.zeros_like();
        let d_scene = rn_backward(&spec, params.tensors(), &cache, &gy, grads.tensors_mut()).unwrap();

        let r = finite_diff_gradcheck(
            |p| Ok(sigmoid_bce(&rn_forward(&spec, p.tensors(), &scene)?.0, &t)?.0),
            &params,
            &grads,
            100,
            1e-6,
            &mut rng,
        )
        .unwrap();
        assert!(r.max_relative_error < 1e-4, "params {hidden:?}: {r:?}");

        let mut sp = ParamSet::new();
        sp.push("D", scene.clone()).unwrap();
        let mut sg = ParamSet::new();
        sg.push("D", d_scene).unwrap();
        let r = finite_diff_gradcheck(
            |s| Ok(sigmoid_bce(&rn_forward(&spec, params.tensors(), &s.tensors()[0])?.0, &t)?.0),
            &sp,
            &sg,
            25,
            1e-6,
            &mut rng,
        )
        .unwrap();
        assert!(r.max_relative_error < 1e-4, "input {hidden:?}: {r:?}");
    }

    #[test]
    fn gradcheck_all_depths() {
        check(&[], 20);
        check(&[7], 21);
        check(&[7, 6], 22);
    }
}
