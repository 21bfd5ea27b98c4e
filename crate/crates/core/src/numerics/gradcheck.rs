use super::{ParamSet, RngStream};
use crate::error::{Error, Result};

/// Outcome of a finite-difference gradient check.
#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    pub max_relative_error: f64,
    /// Tensor name and offset of the worst probe.
    pub worst: Option<(String, usize)>,
    pub probes: usize,
}

/// Compares `analytic` against central differences of `loss_fn` at
/// `probe_count` randomly chosen coordinates of `params`.
///
/// The relative error per probe is `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn finite_diff_gradcheck<F>(
    mut loss_fn: F,
    params: &ParamSet,
    analytic: &ParamSet,
    probe_count: usize,
    eps: f64,
    rng: &mut RngStream,
) -> Result<GradcheckReport>
where
    F: FnMut(&ParamSet) -> Result<f64>,
{
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::param(format!("gradcheck eps {eps} outside [1e-7, 1e-3]")));
    }
    params.check_layout(analytic)?;
    let total = params.scalar_count();
    if total == 0 {
        return Err(Error::param("gradcheck on an empty parameter set"));
    }
    let probes = if probe_count >= total {
        (0..total).collect()
    } else {
        rng.sample_indices(total, probe_count)
    };

    let mut work = params.clone();
    let mut worst = None;
    let mut max_err = 0.0f64;
    for &idx in &probes {
        let w = params.flat_get(idx);
        work.flat_set(idx, w + eps);
        let plus = loss_fn(&work)?;
        work.flat_set(idx, w - eps);
        let minus = loss_fn(&work)?;
        work.flat_set(idx, w);
        if !plus.is_finite() || !minus.is_finite() {
            let (name, index) = params.describe(idx);
            return Err(Error::NonFinite { name, index });
        }
        let numeric = (plus - minus) / (2.0 * eps);
        let a = analytic.flat_get(idx);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        if rel > max_err || worst.is_none() {
            max_err = max_err.max(rel);
            worst = Some(params.describe(idx));
        }
    }
    Ok(GradcheckReport {
        max_relative_error: max_err,
        worst,
        probes: probes.len(),
    })
}
