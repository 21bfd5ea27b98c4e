//! Scene-classification training and evaluation.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{Task, TrainConfig};
use super::metrics::{write_metrics, MetricsRecord};
use super::split::split_indices;
use crate::error::{Error, Result};
use crate::models::{Checkpoint, Loss, SceneModel};
use crate::numerics::{adam_step, argmax, AdamConfig, AdamState, Matrix, ParamSet, RngStream};
use crate::par::Exec;
use crate::scenegen::{
    build_relation_pool, entangle, make_permutation, Dataset, GeneratorParams, PermutationMatrix,
    Relation, SceneClass, TargetMode, NUM_FEATURES, NUM_OBJECTS,
};

/// Loss plus accuracy. For adjacency targets accuracy is per edge entry
/// (logit > 0 read as "edge"); for one-hot targets it is top-1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub loss: f64,
    pub accuracy: f64,
}

/// Run description stored with every scene checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneMetadata {
    pub relation: Relation,
    pub target_mode: TargetMode,
    pub generator: GeneratorParams,
    pub train_classes: Vec<SceneClass>,
    pub unseen_classes: Vec<SceneClass>,
    /// Seed of the entangling permutation, present for entangled runs.
    pub b_seed: Option<u64>,
    pub iteration: usize,
}

#[derive(Clone, Debug)]
pub struct SceneRun {
    pub model: SceneModel,
    pub params: ParamSet,
    pub history: Vec<MetricsRecord>,
    pub final_test: EvalReport,
    /// Held-out class evaluation for the `unseen_gen` task.
    pub unseen: Option<EvalReport>,
    pub checkpoint: Checkpoint,
}

pub fn loss_for(mode: TargetMode) -> Loss {
    match mode {
        TargetMode::Adjacency => Loss::Bce,
        TargetMode::OneHot => Loss::Xent,
    }
}

/// Per-sample model inputs: the scene for an RN, the flattened (and, with
/// `b`, entangled) scene as a row otherwise.
pub fn scene_inputs(
    model: &SceneModel,
    ds: &Dataset,
    b: Option<&PermutationMatrix>,
) -> Result<Vec<Matrix>> {
    ds.samples
        .iter()
        .map(|s| match (model, b) {
            (SceneModel::Rn(_), None) => Ok(s.scene.matrix().clone()),
            (SceneModel::Rn(_), Some(_)) => {
                Err(Error::Config("an RN cannot read entangled vectors".into()))
            }
            (_, Some(b)) => Ok(Matrix::row_vector(entangle(&s.scene, b)?)),
            (_, None) => Ok(Matrix::row_vector(s.scene.flatten().to_vec())),
        })
        .collect()
}

fn accuracy(logits: &Matrix, targets: &Matrix, loss: Loss) -> f64 {
    match loss {
        Loss::Bce => {
            let hits = logits
                .values()
                .iter()
                .zip(targets.values())
                .filter(|(z, t)| (**z > 0.0) == (**t > 0.5))
                .count();
            hits as f64 / logits.len() as f64
        }
        Loss::Xent => {
            let hits = (0..logits.rows())
                .filter(|&r| argmax(logits.row(r)) == argmax(targets.row(r)))
                .count();
            hits as f64 / logits.rows() as f64
        }
    }
}

/// Evaluates frozen parameters on the given inputs.
pub fn evaluate(
    model: &SceneModel,
    params: &ParamSet,
    inputs: &[Matrix],
    targets: &Matrix,
    loss: Loss,
    exec: Exec,
) -> Result<EvalReport> {
    let logits = model.logits(params, inputs, exec)?;
    let (l, _) = loss.apply(&logits, targets)?;
    Ok(EvalReport {
        loss: l,
        accuracy: accuracy(&logits, targets, loss),
    })
}

fn gather(inputs: &[Matrix], idx: &[usize]) -> Vec<Matrix> {
    idx.iter().map(|&i| inputs[i].clone()).collect()
}

/// The dataset a scene run trains on, plus the held-out classes of an
/// `unseen_gen` run. Reads `cfg.dataset` when set, otherwise draws the class
/// pool from stream `(seed, 1)` and the scenes from `(seed, 2)`.
pub fn task_dataset(cfg: &TrainConfig) -> Result<(Dataset, Vec<SceneClass>)> {
    if let Some(path) = &cfg.dataset {
        let mut ds = Dataset::read(path)?;
        ds.target_mode = cfg.task.target_mode();
        return Ok((ds, Vec::new()));
    }
    let unseen = if cfg.task == Task::UnseenGen {
        cfg.unseen_classes
    } else {
        0
    };
    let mut pool = build_relation_pool(
        cfg.relation,
        cfg.class_count + unseen,
        &mut RngStream::new(cfg.seed, 1),
    )?;
    let held_out = pool.split_off(cfg.class_count);
    let ds = Dataset::generate(
        pool,
        cfg.samples_per_class,
        cfg.relation,
        cfg.task.target_mode(),
        cfg.generator,
        &RngStream::new(cfg.seed, 2),
        cfg.exec,
    )?;
    Ok((ds, held_out))
}

fn make_checkpoint(
    cfg: &TrainConfig,
    model: &SceneModel,
    params: &ParamSet,
    meta: &SceneMetadata,
) -> Checkpoint {
    Checkpoint {
        kind: model.kind().to_string(),
        spec: serde_json::to_value(model).expect("spec serializes"),
        seed: cfg.seed,
        metadata: serde_json::to_value(meta).expect("metadata serializes"),
        params: params.clone(),
    }
}

/// Minibatch Adam training of a scene classifier.
///
/// Iteration 0 is logged before any update. Each later record carries the
/// mean minibatch loss since the previous record and a full pass over the
/// withheld test split. A non-finite loss aborts the run; the last finite
/// parameters are still written to the configured checkpoint path.
pub fn train_scene_classifier(cfg: &TrainConfig) -> Result<SceneRun> {
    cfg.validate()?;
    if cfg.task == Task::OneShot {
        return Err(Error::Config("one-shot runs go through train_one_shot".into()));
    }
    let started = Instant::now();
    let wall = || {
        if cfg.record_wall_time {
            started.elapsed().as_millis() as u64
        } else {
            0
        }
    };

    let (ds, unseen_classes) = task_dataset(cfg)?;
    let model = cfg.scene_model(ds.target_width())?;
    let loss = loss_for(ds.target_mode);
    let b = (cfg.task == Task::Entangled).then(|| make_permutation(cfg.b_seed, NUM_OBJECTS * NUM_FEATURES));
    let inputs = scene_inputs(&model, &ds, b.as_ref())?;
    let (train_idx, test_idx) = split_indices(&ds, cfg.test_fraction, &mut RngStream::new(cfg.seed, 3))?;
    let test_inputs = gather(&inputs, &test_idx);
    let test_targets = ds.targets(&test_idx);

    let mut params = model.init(&mut RngStream::new(cfg.seed, 4));
    let mut adam = AdamState::new(&params, AdamConfig::with_lr(cfg.learning_rate));
    let mut batch_rng = RngStream::new(cfg.seed, 5);
    let mut order = train_idx.clone();
    let mut cursor = order.len();

    let mut meta = SceneMetadata {
        relation: ds.relation,
        target_mode: ds.target_mode,
        generator: ds.generator,
        train_classes: ds.classes.clone(),
        unseen_classes: unseen_classes.clone(),
        b_seed: b.as_ref().map(|_| cfg.b_seed),
        iteration: 0,
    };
    let mut history = Vec::new();
    let mut running = 0.0;
    let mut running_n = 0usize;

    for it in 0..=cfg.iterations {
        let mut batch = Vec::with_capacity(cfg.batch_size);
        while batch.len() < cfg.batch_size {
            if cursor == order.len() {
                batch_rng.shuffle(&mut order);
                cursor = 0;
            }
            batch.push(order[cursor]);
            cursor += 1;
        }
        let (l, grads, _) = model.loss_and_grad(
            &params,
            &gather(&inputs, &batch),
            &ds.targets(&batch),
            loss,
            cfg.exec,
        )?;
        if !l.is_finite() {
            meta.iteration = it;
            if let Some(p) = &cfg.checkpoint_path {
                make_checkpoint(cfg, &model, &params, &meta).write(p)?;
            }
            if let Some(p) = &cfg.metrics_path {
                write_metrics(p, &history)?;
            }
            return Err(Error::Diverged { iteration: it, loss: l });
        }
        running += l;
        running_n += 1;
        if it % cfg.log_every == 0 || it == cfg.iterations {
            let test = evaluate(&model, &params, &test_inputs, &test_targets, loss, cfg.exec)?;
            history.push(MetricsRecord {
                iteration: it,
                train_loss: running / running_n as f64,
                test_loss: test.loss,
                test_accuracy: Some(test.accuracy),
                wall_ms: wall(),
            });
            running = 0.0;
            running_n = 0;
        }
        if it < cfg.iterations {
            adam_step(&mut params, &grads, &mut adam)?;
        }
    }

    let final_test = evaluate(&model, &params, &test_inputs, &test_targets, loss, cfg.exec)?;
    meta.iteration = cfg.iterations;
    let checkpoint = make_checkpoint(cfg, &model, &params, &meta);
    let unseen = if unseen_classes.is_empty() {
        None
    } else {
        Some(eval_unseen(
            &checkpoint,
            &unseen_classes,
            cfg.samples_per_class,
            cfg.seed,
            cfg.exec,
        )?)
    };
    if let Some(p) = &cfg.checkpoint_path {
        checkpoint.write(p)?;
    }
    if let Some(p) = &cfg.metrics_path {
        write_metrics(p, &history)?;
    }
    Ok(SceneRun {
        model,
        params,
        history,
        final_test,
        unseen,
        checkpoint,
    })
}

/// Model, parameters and run description recovered from a scene checkpoint.
pub fn load_scene_checkpoint(ck: &Checkpoint) -> Result<(SceneModel, SceneMetadata)> {
    let model: SceneModel = serde_json::from_value(ck.spec.clone())
        .map_err(|e| Error::Config(format!("checkpoint does not hold a scene model: {e}")))?;
    let meta: SceneMetadata = serde_json::from_value(ck.metadata.clone())
        .map_err(|e| Error::Config(format!("checkpoint metadata unreadable: {e}")))?;
    let fresh = model.init(&mut RngStream::new(0, 0));
    ck.params.check_layout(&fresh)?;
    Ok((model, meta))
}

/// Evaluates a checkpoint on a dataset (all of its samples).
pub fn evaluate_checkpoint(ck: &Checkpoint, ds: &Dataset, exec: Exec) -> Result<EvalReport> {
    let (model, meta) = load_scene_checkpoint(ck)?;
    if ds.target_width() != model.output_width() {
        return Err(Error::Config(format!(
            "dataset targets have width {}, model outputs {}",
            ds.target_width(),
            model.output_width()
        )));
    }
    let b = meta
        .b_seed
        .map(|s| make_permutation(s, NUM_OBJECTS * NUM_FEATURES));
    let inputs = scene_inputs(&model, ds, b.as_ref())?;
    let all: Vec<usize> = (0..ds.len()).collect();
    evaluate(&model, &ck.params, &inputs, &ds.targets(&all), loss_for(ds.target_mode), exec)
}

/// Adjacency loss and per-edge accuracy on fresh scenes from classes the
/// checkpoint never saw. Any overlap with the training classes is a
/// configuration error.
pub fn eval_unseen(
    ck: &Checkpoint,
    unseen: &[SceneClass],
    samples_per_class: usize,
    seed: u64,
    exec: Exec,
) -> Result<EvalReport> {
    let (_, meta) = load_scene_checkpoint(ck)?;
    if meta.target_mode != TargetMode::Adjacency {
        return Err(Error::Config(
            "unseen-class evaluation needs adjacency targets".into(),
        ));
    }
    if let Some(c) = unseen
        .iter()
        .find(|u| meta.train_classes.iter().any(|t| t.key() == u.key()))
    {
        return Err(Error::Config(format!(
            "class {} is also a training class",
            c.class_id
        )));
    }
    let ds = Dataset::generate(
        unseen.to_vec(),
        samples_per_class,
        meta.relation,
        TargetMode::Adjacency,
        meta.generator,
        &RngStream::new(seed, 6),
        exec,
    )?;
    evaluate_checkpoint(ck, &ds, exec)
}

/// Convenience for callers holding a checkpoint file.
pub fn read_scene_checkpoint(path: &Path) -> Result<(Checkpoint, SceneModel, SceneMetadata)> {
    let ck = Checkpoint::read(path)?;
    let (model, meta) = load_scene_checkpoint(&ck)?;
    Ok((ck, model, meta))
}
