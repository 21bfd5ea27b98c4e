//! Episodic one-shot training and evaluation.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ModelKind, Task, TrainConfig};
use super::metrics::{write_metrics, MetricsRecord};
use crate::error::{Error, Result};
use crate::mann::{
    build_episode, instance_accuracy, mann_batch_grad, mann_episode_forward, Episode,
    InstanceCurve, MannConfig, Preprocessor,
};
use crate::models::{Checkpoint, MlpSpec};
use crate::numerics::{adam_step, AdamConfig, AdamState, ParamSet, RngStream};
use crate::par::Exec;
use crate::scenegen::{build_class_pool, SceneClass, NUM_FEATURES, NUM_OBJECTS};

/// Instance indices reported in curves.
pub const MAX_INSTANCE: usize = 10;

/// The MANN described by a config. The MLP pre-processor is parameter
/// matched to the RN it replaces.
pub fn mann_config(cfg: &TrainConfig) -> Result<MannConfig> {
    let rn = cfg.rn_spec(cfg.feature_width);
    let preprocessor = match cfg.preprocessor {
        ModelKind::Rn => Preprocessor::Rn(rn),
        ModelKind::Mlp => Preprocessor::Mlp(MlpSpec::matched_to(
            rn.param_count(),
            NUM_OBJECTS * NUM_FEATURES,
            cfg.feature_width,
            cfg.hidden.len().max(1),
        )?),
        ModelKind::LinearRn => {
            return Err(Error::Config("one-shot pre-processor must be `rn` or `mlp`".into()))
        }
    };
    let m = MannConfig {
        preprocessor,
        controller_size: cfg.controller_size,
        slots: cfg.memory_slots,
        width: cfg.memory_width,
        heads: cfg.heads,
        usage_decay: cfg.usage_decay,
        key_strength: cfg.key_strength,
        labels: cfg.labels,
    };
    m.validate()?;
    Ok(m)
}

/// Disjoint training and evaluation class pools.
pub fn one_shot_pools(cfg: &TrainConfig) -> Result<(Vec<SceneClass>, Vec<SceneClass>)> {
    let mut pool = build_class_pool(cfg.train_pool + cfg.test_pool, &mut RngStream::new(cfg.seed, 1))?;
    let test = pool.split_off(cfg.train_pool);
    Ok((pool, test))
}

pub fn make_episodes(cfg: &TrainConfig, pool: &[SceneClass], count: usize, rng: &mut RngStream) -> Result<Vec<Episode>> {
    (0..count)
        .map(|_| build_episode(pool, cfg.episode_classes, cfg.labels, cfg.episode_steps, &cfg.generator, rng))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OneShotEval {
    /// Mean per-step cross entropy.
    pub loss: f64,
    pub accuracy: f64,
    pub curve: InstanceCurve,
    /// Largest deviation of any read or write weight vector from summing
    /// to one, and the smallest weight seen.
    pub max_weight_error: f64,
    pub min_weight: f64,
}

/// Evaluates frozen parameters on a set of episodes.
pub fn evaluate_one_shot(
    mcfg: &MannConfig,
    params: &ParamSet,
    episodes: &[Episode],
    exec: Exec,
) -> Result<(OneShotEval, Vec<Vec<usize>>)> {
    let outs = exec
        .map(episodes, |e| mann_episode_forward(mcfg, params, e))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let steps: usize = episodes.iter().map(Episode::len).sum();
    let preds: Vec<Vec<usize>> = outs.iter().map(|o| o.predictions.clone()).collect();
    let hits: usize = preds
        .iter()
        .zip(episodes)
        .map(|(p, e)| p.iter().zip(&e.steps).filter(|(p, s)| **p == s.target_label).count())
        .sum();
    let eval = OneShotEval {
        loss: outs.iter().map(|o| o.loss).sum::<f64>() / steps as f64,
        accuracy: hits as f64 / steps as f64,
        curve: instance_accuracy(&preds, episodes, MAX_INSTANCE)?,
        max_weight_error: outs.iter().map(|o| o.max_weight_error).fold(0.0, f64::max),
        min_weight: outs.iter().map(|o| o.min_weight).fold(f64::INFINITY, f64::min),
    };
    Ok((eval, preds))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneShotMetadata {
    pub train_pool: Vec<SceneClass>,
    pub test_pool: Vec<SceneClass>,
    pub iteration: usize,
}

#[derive(Clone, Debug)]
pub struct OneShotRun {
    pub mann: MannConfig,
    pub params: ParamSet,
    pub history: Vec<MetricsRecord>,
    /// Held-out evaluation at each logged iteration.
    pub evals: Vec<(usize, OneShotEval)>,
    pub checkpoint: Checkpoint,
}

/// Source of training episodes for [`train_episodes`].
pub enum EpisodeSource<'a> {
    /// Fresh episodes from this class pool every iteration.
    Pool(&'a [SceneClass]),
    /// The same episode every iteration.
    Fixed(&'a Episode),
}

/// Episodic Adam training; evaluates on `eval_set` at iteration 0, every
/// `eval_every` iterations and at the end. On a non-finite loss the last
/// finite parameters go through `on_abort` before the error is returned.
pub fn train_episodes(
    cfg: &TrainConfig,
    mcfg: &MannConfig,
    source: EpisodeSource<'_>,
    eval_set: &[Episode],
    on_abort: &dyn Fn(&ParamSet, &[MetricsRecord], usize) -> Result<()>,
) -> Result<(ParamSet, Vec<MetricsRecord>, Vec<(usize, OneShotEval)>)> {
    let started = Instant::now();
    let mut params = mcfg.init(&mut RngStream::new(cfg.seed, 4));
    let mut adam = AdamState::new(&params, AdamConfig::with_lr(cfg.learning_rate));
    let mut rng = RngStream::new(cfg.seed, 5);
    let mut history = Vec::new();
    let mut evals = Vec::new();
    let mut running = 0.0;
    let mut running_n = 0usize;
    for it in 0..=cfg.iterations {
        let batch = match source {
            EpisodeSource::Pool(pool) => make_episodes(cfg, pool, cfg.batch_size, &mut rng)?,
            EpisodeSource::Fixed(e) => vec![e.clone()],
        };
        let (loss, grads, _) = mann_batch_grad(mcfg, &params, &batch, cfg.exec)?;
        let per_step = loss / cfg.episode_steps.max(1) as f64;
        if !per_step.is_finite() {
            on_abort(&params, &history, it)?;
            return Err(Error::Diverged {
                iteration: it,
                loss: per_step,
            });
        }
        running += per_step;
        running_n += 1;
        if it % cfg.eval_every == 0 || it == cfg.iterations {
            let (ev, _) = evaluate_one_shot(mcfg, &params, eval_set, cfg.exec)?;
            history.push(MetricsRecord {
                iteration: it,
                train_loss: running / running_n as f64,
                test_loss: ev.loss,
                test_accuracy: Some(ev.accuracy),
                wall_ms: if cfg.record_wall_time {
                    started.elapsed().as_millis() as u64
                } else {
                    0
                },
            });
            evals.push((it, ev));
            running = 0.0;
            running_n = 0;
        }
        if it < cfg.iterations {
            adam_step(&mut params, &grads, &mut adam)?;
        }
    }
    Ok((params, history, evals))
}

/// One-shot training on episodes from the training pool, evaluated on
/// episodes over the disjoint held-out pool.
pub fn train_one_shot(cfg: &TrainConfig) -> Result<OneShotRun> {
    cfg.validate()?;
    if cfg.task != Task::OneShot {
        return Err(Error::Config("train_one_shot needs `task = one_shot`".into()));
    }
    let mcfg = mann_config(cfg)?;
    let (train_pool, test_pool) = one_shot_pools(cfg)?;
    let eval_set = make_episodes(cfg, &test_pool, cfg.eval_episodes, &mut RngStream::new(cfg.seed, 7))?;
    let checkpoint_at = |params: &ParamSet, iteration: usize| Checkpoint {
        kind: "mann".into(),
        spec: serde_json::to_value(&mcfg).expect("config serializes"),
        seed: cfg.seed,
        metadata: serde_json::to_value(OneShotMetadata {
            train_pool: train_pool.clone(),
            test_pool: test_pool.clone(),
            iteration,
        })
        .expect("metadata serializes"),
        params: params.clone(),
    };
    let on_abort = |params: &ParamSet, history: &[MetricsRecord], iteration: usize| {
        if let Some(p) = &cfg.checkpoint_path {
            checkpoint_at(params, iteration).write(p)?;
        }
        if let Some(p) = &cfg.metrics_path {
            write_metrics(p, history)?;
        }
        Ok(())
    };
    let (params, history, evals) =
        train_episodes(cfg, &mcfg, EpisodeSource::Pool(&train_pool), &eval_set, &on_abort)?;
    let checkpoint = checkpoint_at(&params, cfg.iterations);
    if let Some(p) = &cfg.checkpoint_path {
        checkpoint.write(p)?;
    }
    if let Some(p) = &cfg.metrics_path {
        write_metrics(p, &history)?;
    }
    Ok(OneShotRun {
        mann: mcfg,
        params,
        history,
        evals,
        checkpoint,
    })
}

/// Trains on a single frozen episode and evaluates on that same episode.
/// Returns the evaluation, the episode and the per-step predictions.
pub fn memorize_episode(cfg: &TrainConfig) -> Result<(OneShotEval, Episode, Vec<usize>)> {
    cfg.validate()?;
    let mcfg = mann_config(cfg)?;
    let (train_pool, _) = one_shot_pools(cfg)?;
    let episode = make_episodes(cfg, &train_pool, 1, &mut RngStream::new(cfg.seed, 8))?.remove(0);
    let set = std::slice::from_ref(&episode);
    let (params, _, _) = train_episodes(cfg, &mcfg, EpisodeSource::Fixed(&episode), set, &|_, _, _| Ok(()))?;
    let (ev, mut preds) = evaluate_one_shot(&mcfg, &params, set, cfg.exec)?;
    Ok((ev, episode, preds.remove(0)))
}
