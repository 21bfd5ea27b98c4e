use super::{Matrix, RngStream};

/// Glorot-uniform weights: `𝒰(−√(6/(fan_in+fan_out)), +√(6/(fan_in+fan_out)))`.
pub fn glorot_uniform(fan_in: usize, fan_out: usize, rng: &mut RngStream) -> Matrix {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let mut m = Matrix::zeros(fan_in, fan_out);
    for v in m.values_mut() {
        *v = rng.uniform(-limit, limit);
    }
    m
}
