//! LSTM cell with hand-written backward pass.
//!
//! Gates are packed `[i, f, o, g]` along the columns of one weight matrix
//! acting on `[x ‖ h_prev]`.

use crate::error::{Error, Result};
use crate::numerics::{glorot_uniform, sigmoid, Matrix, ParamSet, RngStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmSpec {
    pub input: usize,
    pub hidden: usize,
}

impl LstmSpec {
    pub fn param_count(&self) -> usize {
        (self.input + self.hidden + 1) * 4 * self.hidden
    }

    /// `w` is `(input + hidden) × 4·hidden`, `b` is `1 × 4·hidden`.
    pub fn init(&self, rng: &mut RngStream) -> ParamSet {
        let mut p = ParamSet::new();
        let h = self.hidden;
        p.push("w", glorot_uniform(self.input + h, 4 * h, rng))
            .expect("fresh names");
        p.push("b", Matrix::zeros(1, 4 * h)).expect("fresh names");
        p
    }

    fn check(&self, w: &Matrix, b: &Matrix) -> Result<()> {
        let want = (self.input + self.hidden, 4 * self.hidden);
        if w.shape() != want {
            return Err(Error::Dimension {
                op: "lstm weights",
                left: want,
                right: w.shape(),
            });
        }
        if b.shape() != (1, 4 * self.hidden) {
            return Err(Error::Dimension {
                op: "lstm bias",
                left: (1, 4 * self.hidden),
                right: b.shape(),
            });
        }
        Ok(())
    }
}

/// Hidden and cell vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

#[derive(Clone, Debug)]
pub struct LstmCache {
    xh: Vec<f64>,
    /// Post-activation gates `[i, f, o, g]`.
    gates: Vec<f64>,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// One step: `c' = f⊙c + i⊙g`, `h' = o⊙tanh(c')`.
pub fn lstm_step(
    spec: &LstmSpec,
    w: &Matrix,
    b: &Matrix,
    x: &[f64],
    state: &LstmState,
) -> Result<(LstmState, LstmCache)> {
    spec.check(w, b)?;
    let h = spec.hidden;
    if x.len() != spec.input || state.h.len() != h || state.c.len() != h {
        return Err(Error::Dimension {
            op: "lstm_step (input/state)",
            left: (spec.input, h),
            right: (x.len(), state.h.len()),
        });
    }
    let mut xh = Vec::with_capacity(spec.input + h);
    xh.extend_from_slice(x);
    xh.extend_from_slice(&state.h);
    let mut z = b.values().to_vec();
    for (r, &v) in xh.iter().enumerate() {
        if v != 0.0 {
            for (zi, wi) in z.iter_mut().zip(w.row(r)) {
                *zi += v * wi;
            }
        }
    }
    let mut gates = z;
    for (k, v) in gates.iter_mut().enumerate() {
        *v = if k < 3 * h { sigmoid(*v) } else { v.tanh() };
    }
    let mut c = vec![0.0; h];
    let mut out = vec![0.0; h];
    let mut tanh_c = vec![0.0; h];
    for j in 0..h {
        let (i, f, o, g) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
        c[j] = f * state.c[j] + i * g;
        tanh_c[j] = c[j].tanh();
        out[j] = o * tanh_c[j];
    }
    Ok((
        LstmState { h: out, c },
        LstmCache {
            xh,
            gates,
            c_prev: state.c.clone(),
            tanh_c,
        },
    ))
}

/// Backward through one step. Accumulates into `dw`, `db`; returns
/// `(dx, dh_prev, dc_prev)`.
pub fn lstm_step_backward(
    spec: &LstmSpec,
    w: &Matrix,
    cache: &LstmCache,
    dh: &[f64],
    dc_next: &[f64],
    dw: &mut Matrix,
    db: &mut Matrix,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let h = spec.hidden;
    let g = &cache.gates;
    let mut dz = vec![0.0; 4 * h];
    let mut dc_prev = vec![0.0; h];
    for j in 0..h {
        let (i, f, o, gg) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
        let tc = cache.tanh_c[j];
        let dc = dc_next[j] + dh[j] * o * (1.0 - tc * tc);
        dz[j] = dc * gg * i * (1.0 - i);
        dz[h + j] = dc * cache.c_prev[j] * f * (1.0 - f);
        dz[2 * h + j] = dh[j] * tc * o * (1.0 - o);
        dz[3 * h + j] = dc * i * (1.0 - gg * gg);
        dc_prev[j] = dc * f;
    }
    for (r, &v) in cache.xh.iter().enumerate() {
        if v != 0.0 {
            for (d, z) in dw.row_mut(r).iter_mut().zip(&dz) {
                *d += v * z;
            }
        }
    }
    for (d, z) in db.values_mut().iter_mut().zip(&dz) {
        *d += z;
    }
    let mut dxh = vec![0.0; spec.input + h];
    for (r, d) in dxh.iter_mut().enumerate() {
        *d = w.row(r).iter().zip(&dz).map(|(a, b)| a * b).sum();
    }
    let dh_prev = dxh.split_off(spec.input);
    (dxh, dh_prev, dc_prev)
}
