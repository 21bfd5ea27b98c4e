use serde::{Deserialize, Serialize};

use super::{Matrix, ParamSet};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment estimates and step counter for one [`ParamSet`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub first_moment: Vec<Matrix>,
    pub second_moment: Vec<Matrix>,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(params: &ParamSet, config: AdamConfig) -> Self {
        let zeros: Vec<Matrix> = params
            .tensors()
            .iter()
            .map(|t| Matrix::zeros(t.rows(), t.cols()))
            .collect();
        AdamState {
            step: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
            config,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
///
/// Gradients are validated before anything is mutated, so a rejected step
/// leaves both `params` and `state` untouched.
pub fn adam_step(params: &mut ParamSet, grads: &ParamSet, state: &mut AdamState) -> Result<()> {
    params.check_layout(grads)?;
    if state.first_moment.len() != params.len() {
        return Err(Error::param("optimizer state does not match parameter set"));
    }
    for ((name, g), m) in grads.iter().zip(&state.first_moment) {
        if m.shape() != g.shape() {
            return Err(Error::Dimension {
                op: "adam_step (moment)",
                left: m.shape(),
                right: g.shape(),
            });
        }
        g.check_finite(name)?;
    }

    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);

    for (((w, g), m), v) in params
        .tensors_mut()
        .iter_mut()
        .zip(grads.tensors())
        .zip(state.first_moment.iter_mut())
        .zip(state.second_moment.iter_mut())
    {
        for (((w, &g), m), v) in w
            .values_mut()
            .iter_mut()
            .zip(g.values())
            .zip(m.values_mut())
            .zip(v.values_mut())
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *w -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar(w: f64) -> ParamSet {
        let mut p = ParamSet::new();
        p.push("w", Matrix::from_vec(1, 1, vec![w]).unwrap()).unwrap();
        p
    }

    #[test]
    fn zero_gradient_fresh_state_is_noop() {
        let mut p = scalar(0.7);
        let g = scalar(0.0);
        let mut s = AdamState::new(&p, AdamConfig::default());
        adam_step(&mut p, &g, &mut s).unwrap();
        assert_eq!(p.flat_get(0), 0.7);
        assert_eq!(s.first_moment[0].values(), &[0.0]);
        assert_eq!(s.second_moment[0].values(), &[0.0]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_closed_form() {
        let mut p = scalar(0.0);
        let mut s = AdamState::new(&p, AdamConfig::with_lr(1e-3));
        adam_step(&mut p, &scalar(1.0), &mut s).unwrap();
        // m̂ = g, v̂ = g², so the step is lr·g/(|g| + ε).
        let expected = -1e-3 * (1.0 / (1.0 + 1e-8));
        assert!((p.flat_get(0) - expected).abs() < 1e-18);
    }

    #[test]
    fn two_steps_match_unrolled_recurrence() {
        let (lr, b1, b2, eps, g) = (1e-3, 0.9, 0.999, 1e-8, 0.37);
        let mut p = scalar(0.25);
        let mut s = AdamState::new(&p, AdamConfig::with_lr(lr));
        adam_step(&mut p, &scalar(g), &mut s).unwrap();
        adam_step(&mut p, &scalar(g), &mut s).unwrap();

        let mut w = 0.25;
        let m1 = (1.0 - b1) * g;
        let v1 = (1.0 - b2) * g * g;
        w -= lr * (m1 / (1.0 - b1)) / ((v1 / (1.0 - b2)).sqrt() + eps);
        let m2 = b1 * m1 + (1.0 - b1) * g;
        let v2 = b2 * v1 + (1.0 - b2) * g * g;
        w -= lr * (m2 / (1.0 - b1 * b1)) / ((v2 / (1.0 - b2 * b2)).sqrt() + eps);
        assert!((p.flat_get(0) - w).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_finite_gradient_by_name() {
        let mut p = scalar(1.0);
        let mut s = AdamState::new(&p, AdamConfig::default());
        let mut g = ParamSet::new();
        g.push("w", Matrix::from_vec(1, 1, vec![f64::NAN]).unwrap()).unwrap();
        let err = adam_step(&mut p, &g, &mut s).unwrap_err();
        assert!(err.to_string().contains("`w`"));
        assert_eq!(s.step, 0);
        assert_eq!(p.flat_get(0), 1.0);
    }

    #[test]
    fn rejects_shape_mismatch() {
        let mut p = scalar(1.0);
        let mut s = AdamState::new(&p, AdamConfig::default());
        let mut g = ParamSet::new();
        g.push("w", Matrix::zeros(1, 2)).unwrap();
        assert!(adam_step(&mut p, &g, &mut s).is_err());
    }

    proptest! {
        // With no momentum carried over, a zero gradient cannot move any
        // parameter regardless of step count or second-moment history.
        #[test]
        fn zero_gradient_without_momentum_is_identity(
            w in proptest::collection::vec(-10.0f64..10.0, 1..20),
            v in proptest::collection::vec(0.0f64..5.0, 20),
            step in 0u64..10_000,
        ) {
            let n = w.len();
            let mut p = ParamSet::new();
            p.push("w", Matrix::from_vec(1, n, w.clone()).unwrap()).unwrap();
            let mut s = AdamState::new(&p, AdamConfig::default());
            s.step = step;
            s.second_moment[0] = Matrix::from_vec(1, n, v[..n].to_vec()).unwrap();
            let g = p.zeros_like();
            adam_step(&mut p, &g, &mut s).unwrap();
            prop_assert_eq!(p.tensors()[0].values(), &w[..]);
            prop_assert!(s.second_moment[0].values().iter().all(|&x| x >= 0.0));
        }
    }
}
