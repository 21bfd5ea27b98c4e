//! Finite-difference checks of every model's backward pass on small
//! fixtures built from generated scenes.

use crate::error::{Error, Result};
use crate::mann::{build_episode, mann_episode_forward, mann_episode_grad, MannConfig, Preprocessor};
use crate::models::{
    linear_rn_backward, linear_rn_forward, mlp_backward, mlp_forward, rn_backward, rn_forward,
    LinearRnSpec, MlpSpec, RnSpec,
};
use crate::numerics::{finite_diff_gradcheck, sigmoid_bce, GradcheckReport, Matrix, ParamSet, RngStream};
use crate::scenegen::{build_class_pool, entangle, generate_scene, make_permutation, GeneratorParams, SceneDescription};

/// What to check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradcheckTarget {
    Mlp,
    /// RN parameters.
    Rn,
    /// RN gradient with respect to the scene matrix.
    RnInput,
    LinearRn,
    /// Episode loss of a small memory-augmented network.
    Mann,
}

impl GradcheckTarget {
    pub const ALL: [GradcheckTarget; 5] = [
        GradcheckTarget::Mlp,
        GradcheckTarget::Rn,
        GradcheckTarget::RnInput,
        GradcheckTarget::LinearRn,
        GradcheckTarget::Mann,
    ];

    /// Largest acceptable relative error.
    pub fn tolerance(self) -> f64 {
        match self {
            GradcheckTarget::Mlp => 1e-6,
            GradcheckTarget::Rn | GradcheckTarget::RnInput | GradcheckTarget::LinearRn => 1e-4,
            GradcheckTarget::Mann => 1e-3,
        }
    }

    pub fn default_eps(self) -> f64 {
        match self {
            GradcheckTarget::Mann => 1e-6,
            _ => 1e-5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GradcheckTarget::Mlp => "mlp",
            GradcheckTarget::Rn => "rn",
            GradcheckTarget::RnInput => "rn_input",
            GradcheckTarget::LinearRn => "linear_rn",
            GradcheckTarget::Mann => "mann",
        }
    }
}

impl std::str::FromStr for GradcheckTarget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        GradcheckTarget::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown gradcheck model `{s}`")))
    }
}

fn fixture_scene(rng: &mut RngStream) -> Result<SceneDescription> {
    let class = build_class_pool(1, rng)?.remove(0);
    generate_scene(&class, &GeneratorParams::default(), rng)
}

/// The aggregate of 240 pair outputs is large, so a Glorot readout puts
/// most sigmoids deep in saturation where gradients fall to the level of
/// difference roundoff. Shrinking the readout keeps logits O(1).
fn unsaturate(params: &mut ParamSet, readout: &str) {
    if let Some(i) = params.names().iter().position(|n| n == readout) {
        params.tensors_mut()[i].scale(0.01);
    }
}

fn fixture_targets(rows: usize, cols: usize, rng: &mut RngStream) -> Result<Matrix> {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.below(2) as f64).collect())
}

/// Runs `probes` central-difference probes with step `eps` on the target's
/// fixture; all fixture randomness comes from `seed`.
pub fn run_gradcheck(target: GradcheckTarget, probes: usize, eps: f64, seed: u64) -> Result<GradcheckReport> {
    let mut rng = RngStream::new(seed, 0);
    match target {
        GradcheckTarget::Mlp => {
            let spec = MlpSpec::new(vec![160, 32, 16, 16])?;
            let params = spec.init(&mut rng, false);
            let mut rows = Vec::new();
            for _ in 0..4 {
                rows.extend_from_slice(fixture_scene(&mut rng)?.flatten());
            }
            let x = Matrix::from_vec(4, 160, rows)?;
            let t = fixture_targets(4, 16, &mut rng)?;
            let (y, cache) = mlp_forward(&spec, params.tensors(), &x)?;
            let (_, g) = sigmoid_bce(&y, &t)?;
            let mut grads = params.zeros_like();
            mlp_backward(&spec, params.tensors(), &cache, &g, grads.tensors_mut())?;
            finite_diff_gradcheck(
                |p| Ok(sigmoid_bce(&mlp_forward(&spec, p.tensors(), &x)?.0, &t)?.0),
                &params,
                &grads,
                probes,
                eps,
                &mut rng,
            )
        }
        GradcheckTarget::Rn | GradcheckTarget::RnInput => {
            let spec = RnSpec::symmetric(10, &[16, 16], 16, 16);
            let mut params = spec.init(&mut rng, false);
            unsaturate(&mut params, "f.w2");
            let scene = fixture_scene(&mut rng)?.matrix().clone();
            let t = fixture_targets(1, 16, &mut rng)?;
            let (y, cache) = rn_forward(&spec, params.tensors(), &scene)?;
            let (_, g) = sigmoid_bce(&y, &t)?;
            let mut grads = params.zeros_like();
            let d_scene = rn_backward(&spec, params.tensors(), &cache, &g, grads.tensors_mut())?;
            if target == GradcheckTarget::Rn {
                return finite_diff_gradcheck(
                    |p| Ok(sigmoid_bce(&rn_forward(&spec, p.tensors(), &scene)?.0, &t)?.0),
                    &params,
                    &grads,
                    probes,
                    eps,
                    &mut rng,
                );
            }
            let mut at = ParamSet::new();
            at.push("D", scene)?;
            let mut analytic = ParamSet::new();
            analytic.push("D", d_scene)?;
            finite_diff_gradcheck(
                |s| Ok(sigmoid_bce(&rn_forward(&spec, params.tensors(), &s.tensors()[0])?.0, &t)?.0),
                &at,
                &analytic,
                probes,
                eps,
                &mut rng,
            )
        }
        GradcheckTarget::LinearRn => {
            let spec = LinearRnSpec {
                objects: 16,
                rn: RnSpec::symmetric(10, &[16], 16, 16),
            };
            let mut params = spec.init(&mut rng, false);
            unsaturate(&mut params, "rn.f.w2");
            let v = entangle(&fixture_scene(&mut rng)?, &make_permutation(seed, 160))?;
            let t = fixture_targets(1, 16, &mut rng)?;
            let (y, cache) = linear_rn_forward(&spec, params.tensors(), &v)?;
            let (_, g) = sigmoid_bce(&y, &t)?;
            let mut grads = params.zeros_like();
            linear_rn_backward(&spec, params.tensors(), &cache, &g, grads.tensors_mut())?;
            finite_diff_gradcheck(
                |p| Ok(sigmoid_bce(&linear_rn_forward(&spec, p.tensors(), &v)?.0, &t)?.0),
                &params,
                &grads,
                probes,
                eps,
                &mut rng,
            )
        }
        GradcheckTarget::Mann => {
            let cfg = MannConfig {
                preprocessor: Preprocessor::Rn(RnSpec::symmetric(10, &[6], 6, 8)),
                controller_size: 8,
                slots: 4,
                width: 5,
                heads: 2,
                usage_decay: 0.95,
                key_strength: 1.0,
                labels: 5,
            };
            let pool = build_class_pool(10, &mut rng)?;
            let episode = build_episode(&pool, 3, 5, 6, &GeneratorParams::default(), &mut rng)?;
            let mut params = cfg.init(&mut rng);
            // move off the zero readout so every path carries gradient
            for v in params.tensors_mut().iter_mut().flat_map(|t| t.values_mut()) {
                *v += rng.uniform(-0.3, 0.3);
            }
            // same for the features feeding the controller gates
            unsaturate(&mut params, "pre.f.w1");
            let (_, grads) = mann_episode_grad(&cfg, &params, &episode)?;
            finite_diff_gradcheck(
                |p| Ok(mann_episode_forward(&cfg, p, &episode)?.loss),
                &params,
                &grads,
                probes,
                eps,
                &mut rng,
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_target_passes_its_tolerance() {
        for (t, seed) in GradcheckTarget::ALL.into_iter().flat_map(|t| (0..4).map(move |s| (t, s))) {
            let r = run_gradcheck(t, 60, t.default_eps(), seed).unwrap();
            assert!(r.max_relative_error < t.tolerance(), "{}: {r:?}", t.name());
        }
    }

    #[test]
    fn names_round_trip() {
        for t in GradcheckTarget::ALL {
            assert_eq!(t.name().parse::<GradcheckTarget>().unwrap(), t);
        }
        assert!("cnn".parse::<GradcheckTarget>().is_err());
    }
}
