//! Memory-augmented network: scene pre-processor → LSTM controller → LRUA
//! memory → label logits.
//!
//! Per step `t`, with controller output `h`:
//!
//! * each head emits a key `k = h·W_k + b_k` and a gate logit
//!   `α = h·w_a + b_a`;
//! * the heads write their keys (see [`lrua_write`]), then read the updated
//!   memory with the same keys;
//! * `logits = [h ‖ r_1 … r_R]·W_o + b_o`.
//!
//! The least-used slot choice is piecewise constant in the parameters and
//! is treated as a constant by the backward pass.

use serde::{Deserialize, Serialize};

use super::episode::Episode;
use super::lstm::{lstm_step, lstm_step_backward, LstmCache, LstmSpec, LstmState};
use super::memory::{cosine_backward, cosine_read, lrua_write, MemoryState};
use crate::error::{Error, Result};
use crate::models::{mlp_backward, mlp_forward, rn_backward, rn_forward, MlpCache, MlpSpec, RnCache, RnSpec};
use crate::numerics::{glorot_uniform, sigmoid, softmax_rows, Matrix, ParamSet, RngStream};
use crate::par::Exec;
use crate::scenegen::SceneDescription;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Preprocessor {
    Rn(RnSpec),
    Mlp(MlpSpec),
}

impl Preprocessor {
    pub fn output_width(&self) -> usize {
        match self {
            Preprocessor::Rn(s) => s.output,
            Preprocessor::Mlp(s) => s.output_width(),
        }
    }

    fn tensor_count(&self) -> usize {
        match self {
            Preprocessor::Rn(s) => s.tensor_count(),
            Preprocessor::Mlp(s) => s.tensor_count(),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Preprocessor::Rn(s) => s.param_count(),
            Preprocessor::Mlp(s) => s.param_count(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MannConfig {
    pub preprocessor: Preprocessor,
    pub controller_size: usize,
    pub slots: usize,
    pub width: usize,
    pub heads: usize,
    /// Usage decay `γ`.
    pub usage_decay: f64,
    /// Multiplier on cosine similarities before the read softmax.
    pub key_strength: f64,
    pub labels: usize,
}

impl MannConfig {
    pub fn lstm_spec(&self) -> LstmSpec {
        LstmSpec {
            input: self.preprocessor.output_width() + self.labels,
            hidden: self.controller_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.controller_size == 0 || self.slots == 0 || self.width == 0 || self.heads == 0 || self.labels == 0 {
            return Err(Error::Config("MANN sizes must be positive".into()));
        }
        if self.heads > self.slots {
            return Err(Error::Config("more heads than memory slots".into()));
        }
        if !(0.0..1.0).contains(&self.usage_decay) {
            return Err(Error::Config("usage decay must lie in [0, 1)".into()));
        }
        if let Preprocessor::Mlp(s) = &self.preprocessor {
            if s.input_width() != crate::scenegen::NUM_OBJECTS * crate::scenegen::NUM_FEATURES {
                return Err(Error::Config("MLP pre-processor must read a flattened scene".into()));
            }
        }
        Ok(())
    }

    fn readout_width(&self) -> usize {
        self.controller_size + self.heads * self.width
    }

    pub fn param_count(&self) -> usize {
        let h = self.controller_size;
        self.preprocessor.param_count()
            + self.lstm_spec().param_count()
            + self.heads * ((h + 1) * self.width + h + 1)
            + (self.readout_width() + 1) * self.labels
    }

    /// Tensor order: `pre.*`, `lstm.w`, `lstm.b`, then per head `key{h}.w`,
    /// `key{h}.b`, `gate{h}.w`, `gate{h}.b`, then `out.w`, `out.b`. The
    /// readout starts at zero so an untrained network predicts uniformly.
    pub fn init(&self, rng: &mut RngStream) -> ParamSet {
        let mut p = ParamSet::new();
        let pre = match &self.preprocessor {
            Preprocessor::Rn(s) => s.init(rng, false),
            Preprocessor::Mlp(s) => s.init(rng, false),
        };
        p.extend_prefixed("pre.", pre).expect("fresh names");
        p.extend_prefixed("lstm.", self.lstm_spec().init(rng)).expect("fresh names");
        let h = self.controller_size;
        for head in 0..self.heads {
            p.push(format!("key{head}.w"), glorot_uniform(h, self.width, rng)).expect("fresh names");
            p.push(format!("key{head}.b"), Matrix::zeros(1, self.width)).expect("fresh names");
            p.push(format!("gate{head}.w"), glorot_uniform(h, 1, rng)).expect("fresh names");
            p.push(format!("gate{head}.b"), Matrix::zeros(1, 1)).expect("fresh names");
        }
        p.push("out.w", Matrix::zeros(self.readout_width(), self.labels)).expect("fresh names");
        p.push("out.b", Matrix::zeros(1, self.labels)).expect("fresh names");
        p
    }

    fn layout(&self) -> Layout {
        let pre = self.preprocessor.tensor_count();
        Layout {
            pre,
            lstm: pre,
            head: pre + 2,
            out: pre + 2 + 4 * self.heads,
            total: pre + 4 + 4 * self.heads,
        }
    }

    fn check_params(&self, params: &ParamSet) -> Result<()> {
        if params.len() != self.layout().total {
            return Err(Error::Config(format!(
                "MANN expects {} tensors, got {}",
                self.layout().total,
                params.len()
            )));
        }
        Ok(())
    }
}

/// Tensor offsets inside a MANN parameter set.
struct Layout {
    pre: usize,
    lstm: usize,
    head: usize,
    out: usize,
    total: usize,
}

/// Everything threaded from one step to the next.
#[derive(Clone, Debug, PartialEq)]
pub struct MannState {
    pub controller: LstmState,
    pub memory: MemoryState,
}

impl MannState {
    pub fn new(cfg: &MannConfig) -> Self {
        MannState {
            controller: LstmState::zeros(cfg.controller_size),
            memory: MemoryState::new(cfg.slots, cfg.width, cfg.heads),
        }
    }
}

enum PreCache {
    Rn(RnCache),
    Mlp(MlpCache),
}

struct StepCache {
    pre: PreCache,
    lstm: LstmCache,
    h: Vec<f64>,
    keys: Vec<Vec<f64>>,
    gate_logits: Vec<f64>,
    read_prev: Vec<Vec<f64>>,
    least_used_prev: Vec<usize>,
    write_weights: Vec<Vec<f64>>,
    memory: Matrix,
    read_weights: Vec<Vec<f64>>,
    readout_in: Vec<f64>,
}

fn preprocess(cfg: &MannConfig, params: &[Matrix], scene: &SceneDescription) -> Result<(Vec<f64>, PreCache)> {
    match &cfg.preprocessor {
        Preprocessor::Rn(s) => {
            let (y, c) = rn_forward(s, params, scene.matrix())?;
            Ok((y.into_values(), PreCache::Rn(c)))
        }
        Preprocessor::Mlp(s) => {
            let x = Matrix::row_vector(scene.flatten().to_vec());
            let (y, c) = mlp_forward(s, params, &x)?;
            Ok((y.into_values(), PreCache::Mlp(c)))
        }
    }
}

fn affine_vec(x: &[f64], w: &Matrix, b: &Matrix) -> Vec<f64> {
    let mut out = b.values().to_vec();
    for (r, &v) in x.iter().enumerate() {
        for (o, wi) in out.iter_mut().zip(w.row(r)) {
            *o += v * wi;
        }
    }
    out
}

fn step(
    cfg: &MannConfig,
    params: &ParamSet,
    state: &MannState,
    scene: &SceneDescription,
    input_label: &[f64],
) -> Result<(Vec<f64>, MannState, StepCache)> {
    let p = params.tensors();
    let lay = cfg.layout();
    let (mut x, pre) = preprocess(cfg, &p[..lay.pre], scene)?;
    x.extend_from_slice(input_label);
    let (controller, lstm) = lstm_step(&cfg.lstm_spec(), &p[lay.lstm], &p[lay.lstm + 1], &x, &state.controller)?;
    let h = controller.h.clone();

    let mut keys = Vec::with_capacity(cfg.heads);
    let mut gate_logits = Vec::with_capacity(cfg.heads);
    for head in 0..cfg.heads {
        let t = lay.head + 4 * head;
        keys.push(affine_vec(&h, &p[t], &p[t + 1]));
        gate_logits.push(affine_vec(&h, &p[t + 2], &p[t + 3])[0]);
    }
    let mut memory = lrua_write(&state.memory, &keys, &gate_logits, cfg.usage_decay)?;
    let mut readout_in = h.clone();
    let mut read_weights = Vec::with_capacity(cfg.heads);
    for key in &keys {
        let (w, r) = cosine_read(key, cfg.key_strength, &memory.memory)?;
        readout_in.extend_from_slice(&r);
        read_weights.push(w);
    }
    memory.read_weights = read_weights.clone();
    let logits = affine_vec(&readout_in, &p[lay.out], &p[lay.out + 1]);
    let cache = StepCache {
        pre,
        lstm,
        h,
        keys,
        gate_logits,
        read_prev: state.memory.read_weights.clone(),
        least_used_prev: state.memory.least_used.clone(),
        write_weights: memory.write_weights.clone(),
        memory: memory.memory.clone(),
        read_weights,
        readout_in,
    };
    Ok((logits, MannState { controller, memory }, cache))
}

/// Forward pass over one episode.
#[derive(Clone, Debug)]
pub struct EpisodeOutput {
    /// Per-step label logits.
    pub logits: Vec<Vec<f64>>,
    /// Summed softmax cross entropy over steps.
    pub loss: f64,
    pub predictions: Vec<usize>,
    /// Largest `|Σw − 1|` over every read and write weight vector seen.
    pub max_weight_error: f64,
    /// Smallest read or write weight seen.
    pub min_weight: f64,
    pub final_state: MannState,
}

fn step_loss(logits: &[f64], target: usize) -> (f64, Vec<f64>) {
    let p = softmax_rows(&Matrix::row_vector(logits.to_vec())).into_values();
    let loss = -(p[target].max(f64::MIN_POSITIVE)).ln();
    let mut g = p;
    g[target] -= 1.0;
    (loss, g)
}

fn validate_episode(cfg: &MannConfig, episode: &Episode) -> Result<()> {
    if episode.label_count != cfg.labels {
        return Err(Error::Config(format!(
            "episode has {} labels, network expects {}",
            episode.label_count, cfg.labels
        )));
    }
    Ok(())
}

fn run(
    cfg: &MannConfig,
    params: &ParamSet,
    episode: &Episode,
    range: std::ops::Range<usize>,
    state: MannState,
    keep: bool,
) -> Result<(EpisodeOutput, Vec<StepCache>)> {
    cfg.check_params(params)?;
    validate_episode(cfg, episode)?;
    let mut state = state;
    let mut caches = Vec::new();
    let mut out = EpisodeOutput {
        logits: Vec::new(),
        loss: 0.0,
        predictions: Vec::new(),
        max_weight_error: 0.0,
        min_weight: f64::INFINITY,
        final_state: state.clone(),
    };
    for t in range {
        let s = &episode.steps[t];
        let (logits, next, cache) = step(cfg, params, &state, &s.scene, &episode.input_vector(t))?;
        for w in next.memory.read_weights.iter().chain(&next.memory.write_weights) {
            out.max_weight_error = out.max_weight_error.max((w.iter().sum::<f64>() - 1.0).abs());
            out.min_weight = w.iter().copied().fold(out.min_weight, f64::min);
        }
        out.loss += step_loss(&logits, s.target_label).0;
        out.predictions.push(crate::numerics::argmax(&logits));
        out.logits.push(logits);
        if keep {
            caches.push(cache);
        }
        state = next;
    }
    out.final_state = state;
    Ok((out, caches))
}

/// Runs a whole episode from the initial state.
pub fn mann_episode_forward(cfg: &MannConfig, params: &ParamSet, episode: &Episode) -> Result<EpisodeOutput> {
    Ok(run(cfg, params, episode, 0..episode.len(), MannState::new(cfg), false)?.0)
}

/// Runs steps `range` of an episode from a given state, e.g. a snapshot
/// taken from an earlier partial run.
pub fn mann_resume(
    cfg: &MannConfig,
    params: &ParamSet,
    episode: &Episode,
    range: std::ops::Range<usize>,
    state: MannState,
) -> Result<EpisodeOutput> {
    if range.end > episode.len() {
        return Err(Error::param("step range beyond the episode"));
    }
    Ok(run(cfg, params, episode, range, state, false)?.0)
}

/// Summed episode loss and its gradient by backpropagation through time.
pub fn mann_episode_grad(
    cfg: &MannConfig,
    params: &ParamSet,
    episode: &Episode,
) -> Result<(EpisodeOutput, ParamSet)> {
    let (out, caches) = run(cfg, params, episode, 0..episode.len(), MannState::new(cfg), true)?;
    let p = params.tensors();
    let lay = cfg.layout();
    let lstm = cfg.lstm_spec();
    let (hs, w) = (cfg.controller_size, cfg.width);
    let feat = cfg.preprocessor.output_width();
    let mut grads = params.zeros_like();

    let mut dmem = Matrix::zeros(cfg.slots, w);
    let mut dread_next = vec![vec![0.0; cfg.slots]; cfg.heads];
    let mut dh_next = vec![0.0; hs];
    let mut dc_next = vec![0.0; hs];

    for (t, c) in caches.iter().enumerate().rev() {
        let g = grads.tensors_mut();
        let (_, dlogits) = step_loss(&out.logits[t], episode.steps[t].target_label);

        // readout
        let mut dro = vec![0.0; c.readout_in.len()];
        for (r, &v) in c.readout_in.iter().enumerate() {
            let wrow = p[lay.out].row(r);
            let grow = g[lay.out].row_mut(r);
            let mut acc = 0.0;
            for k in 0..cfg.labels {
                grow[k] += v * dlogits[k];
                acc += wrow[k] * dlogits[k];
            }
            dro[r] = acc;
        }
        for (b, d) in g[lay.out + 1].values_mut().iter_mut().zip(&dlogits) {
            *b += d;
        }
        let mut dh: Vec<f64> = dro[..hs].iter().zip(&dh_next).map(|(a, b)| a + b).collect();

        // reads
        let mut dkeys = vec![vec![0.0; w]; cfg.heads];
        for head in 0..cfg.heads {
            let wr = &c.read_weights[head];
            let dr = &dro[hs + head * w..hs + (head + 1) * w];
            let dw: Vec<f64> = (0..cfg.slots)
                .map(|i| {
                    c.memory.row(i).iter().zip(dr).map(|(m, d)| m * d).sum::<f64>() + dread_next[head][i]
                })
                .collect();
            for i in 0..cfg.slots {
                for (dm, d) in dmem.row_mut(i).iter_mut().zip(dr) {
                    *dm += wr[i] * d;
                }
            }
            let s: f64 = wr.iter().zip(&dw).map(|(a, b)| a * b).sum();
            for i in 0..cfg.slots {
                let ds = wr[i] * (dw[i] - s) * cfg.key_strength;
                if ds != 0.0 {
                    cosine_backward(&c.keys[head], c.memory.row(i), ds, &mut dkeys[head], dmem.row_mut(i));
                }
            }
        }

        // writes
        for head in 0..cfg.heads {
            let ww = &c.write_weights[head];
            let key = &c.keys[head];
            let gate = sigmoid(c.gate_logits[head]);
            let mut dgate = 0.0;
            let mut dread_prev = vec![0.0; cfg.slots];
            for i in 0..cfg.slots {
                let row = dmem.row(i);
                let dww: f64 = row.iter().zip(key).map(|(a, b)| a * b).sum();
                for (dk, d) in dkeys[head].iter_mut().zip(row) {
                    *dk += ww[i] * d;
                }
                let lu = if i == c.least_used_prev[head] { 1.0 } else { 0.0 };
                dgate += dww * (c.read_prev[head][i] - lu);
                dread_prev[i] = gate * dww;
            }
            dread_next[head] = dread_prev;
            let dalpha = dgate * gate * (1.0 - gate);

            let t0 = lay.head + 4 * head;
            for (r, &hv) in c.h.iter().enumerate() {
                for (gk, dk) in g[t0].row_mut(r).iter_mut().zip(&dkeys[head]) {
                    *gk += hv * dk;
                }
                g[t0 + 2].values_mut()[r] += hv * dalpha;
                dh[r] += p[t0].row(r).iter().zip(&dkeys[head]).map(|(a, b)| a * b).sum::<f64>()
                    + p[t0 + 2].values()[r] * dalpha;
            }
            for (gb, dk) in g[t0 + 1].values_mut().iter_mut().zip(&dkeys[head]) {
                *gb += dk;
            }
            g[t0 + 3].values_mut()[0] += dalpha;
        }
        for &slot in &c.least_used_prev {
            dmem.row_mut(slot).fill(0.0);
        }

        // controller
        let (dw_l, rest) = g[lay.lstm..].split_at_mut(1);
        let (dx, dhp, dcp) = lstm_step_backward(&lstm, &p[lay.lstm], &c.lstm, &dh, &dc_next, &mut dw_l[0], &mut rest[0]);
        dh_next = dhp;
        dc_next = dcp;

        // pre-processor
        let dfeat = Matrix::row_vector(dx[..feat].to_vec());
        let gpre = &mut g[..lay.pre];
        match (&cfg.preprocessor, &c.pre) {
            (Preprocessor::Rn(s), PreCache::Rn(rc)) => {
                rn_backward(s, &p[..lay.pre], rc, &dfeat, gpre)?;
            }
            (Preprocessor::Mlp(s), PreCache::Mlp(mc)) => {
                mlp_backward(s, &p[..lay.pre], mc, &dfeat, gpre)?;
            }
            _ => unreachable!("cache kind follows the config"),
        }
    }
    Ok((out, grads))
}

/// Mean episode loss and gradient over a batch of episodes. Per-episode
/// gradients are reduced in episode order.
pub fn mann_batch_grad(
    cfg: &MannConfig,
    params: &ParamSet,
    episodes: &[Episode],
    exec: Exec,
) -> Result<(f64, ParamSet, Vec<EpisodeOutput>)> {
    let parts = exec
        .map(episodes, |e| mann_episode_grad(cfg, params, e))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let n = parts.len().max(1) as f64;
    let loss = parts.iter().map(|(o, _)| o.loss).sum::<f64>() / n;
    let (outs, grads): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
    let mut total = ParamSet::sum_ordered(grads).unwrap_or_else(|| params.zeros_like());
    total.scale(1.0 / n);
    Ok((loss, total, outs))
}
