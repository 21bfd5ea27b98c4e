//! Experiment configuration: a flat `key = value` text format.
//!
//! Blank lines and `#` comments are ignored. Unknown keys are an error so a
//! typo never silently falls back to a default. Lists are comma separated.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::models::{LinearRnSpec, MlpSpec, RnSpec, SceneModel};
use crate::par::Exec;
use crate::scenegen::{GeneratorParams, Relation, TargetMode, NUM_FEATURES, NUM_OBJECTS};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Adjacency,
    OneHot,
    Entangled,
    UnseenGen,
    OneShot,
}

impl Task {
    pub fn target_mode(self) -> TargetMode {
        match self {
            Task::OneHot => TargetMode::OneHot,
            _ => TargetMode::Adjacency,
        }
    }
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "adjacency" => Task::Adjacency,
            "one_hot" => Task::OneHot,
            "entangled" => Task::Entangled,
            "unseen_gen" => Task::UnseenGen,
            "one_shot" => Task::OneShot,
            other => return Err(Error::Config(format!("unknown task `{other}`"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Rn,
    Mlp,
    LinearRn,
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "rn" => ModelKind::Rn,
            "mlp" => ModelKind::Mlp,
            "linear_rn" => ModelKind::LinearRn,
            other => return Err(Error::Config(format!("unknown model `{other}`"))),
        })
    }
}

/// How an MLP baseline is sized against the RN it is compared with.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MlpSizing {
    /// Equal hidden widths, i.e. the same `hidden` list.
    Width,
    /// Total parameter count matched to the RN of the same config.
    Params,
}

impl FromStr for MlpSizing {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "width" => Ok(MlpSizing::Width),
            "params" => Ok(MlpSizing::Params),
            other => Err(Error::Config(format!("unknown mlp_sizing `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub task: Task,
    pub model: ModelKind,
    pub relation: Relation,
    /// Hidden widths shared by `g` and `f` (and the MLP under width sizing).
    pub hidden: Vec<usize>,
    pub g_out: usize,
    pub mlp_sizing: MlpSizing,
    pub class_count: usize,
    /// Held-out classes for `unseen_gen`.
    pub unseen_classes: usize,
    pub samples_per_class: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub iterations: usize,
    pub seed: u64,
    pub test_fraction: f64,
    pub log_every: usize,
    pub dataset: Option<PathBuf>,
    pub generator: GeneratorParams,
    /// Seed of the entangling permutation.
    pub b_seed: u64,
    pub exec: Exec,
    /// When false the `wall_ms` column is written as 0 so metrics files
    /// are reproducible byte for byte.
    pub record_wall_time: bool,
    pub metrics_path: Option<PathBuf>,
    pub checkpoint_path: Option<PathBuf>,

    pub preprocessor: ModelKind,
    pub controller_size: usize,
    pub memory_slots: usize,
    pub memory_width: usize,
    pub heads: usize,
    pub usage_decay: f64,
    pub key_strength: f64,
    pub feature_width: usize,
    pub episode_classes: usize,
    /// Size of the label alphabet; classes get distinct labels from it.
    pub labels: usize,
    pub episode_steps: usize,
    /// Class pool for one-shot training; evaluation uses a disjoint pool.
    pub train_pool: usize,
    pub test_pool: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::desk()
    }
}

impl TrainConfig {
    /// Desk-scale defaults, sized for a single CPU.
    pub fn desk() -> Self {
        TrainConfig {
            task: Task::Adjacency,
            model: ModelKind::Rn,
            relation: Relation::Position,
            hidden: vec![64, 64],
            g_out: 64,
            mlp_sizing: MlpSizing::Params,
            class_count: 5,
            unseen_classes: 10,
            samples_per_class: 200,
            learning_rate: 1e-4,
            batch_size: 16,
            iterations: 20_000,
            seed: 0,
            test_fraction: 0.05,
            log_every: 100,
            dataset: None,
            generator: GeneratorParams::default(),
            b_seed: 7,
            exec: Exec::Parallel,
            record_wall_time: false,
            metrics_path: None,
            checkpoint_path: None,
            preprocessor: ModelKind::Rn,
            controller_size: 64,
            memory_slots: 32,
            memory_width: 20,
            heads: 2,
            usage_decay: 0.95,
            key_strength: 1.0,
            feature_width: NUM_OBJECTS * NUM_FEATURES,
            episode_classes: 3,
            labels: 5,
            episode_steps: 30,
            train_pool: 490,
            test_pool: 10,
            eval_every: 100,
            eval_episodes: 50,
        }
    }

    /// Full-scale scene-task settings. Not run by the test suite.
    pub fn full_scene() -> Self {
        TrainConfig {
            hidden: vec![200, 200],
            g_out: 200,
            samples_per_class: 5000,
            learning_rate: 1e-4,
            batch_size: 100,
            iterations: 200_000,
            ..TrainConfig::desk()
        }
    }

    /// Full-scale one-shot settings. Not run by the test suite.
    pub fn full_one_shot() -> Self {
        TrainConfig {
            task: Task::OneShot,
            hidden: vec![200, 200],
            g_out: 200,
            learning_rate: 1e-5,
            batch_size: 16,
            iterations: 500_000,
            controller_size: 200,
            memory_slots: 128,
            memory_width: 40,
            heads: 4,
            episode_classes: 5,
            episode_steps: 50,
            train_pool: 1900,
            test_pool: 100,
            ..TrainConfig::desk()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(TrainConfig::desk()),
            "full_scene" => Ok(TrainConfig::full_scene()),
            "full_one_shot" => Ok(TrainConfig::full_one_shot()),
            other => Err(Error::Config(format!("unknown preset `{other}`"))),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = TrainConfig::parse(&text)?;
        // relative data paths resolve against the config's directory
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.dataset, &mut cfg.metrics_path, &mut cfg.checkpoint_path]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Parses config text. A `preset` key, if present, must come first and
    /// selects the base the remaining keys override.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::desk();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
        }
        fn flag(key: &str, v: &str) -> Result<bool> {
            match v {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(Error::Config(format!("`{key}`: expected true or false, got `{v}`"))),
            }
        }
        let path = |v: &str| (!v.is_empty()).then(|| PathBuf::from(v));
        match key {
            "preset" => *self = TrainConfig::preset(value)?,
            "task" => self.task = value.parse()?,
            "model" => self.model = value.parse()?,
            "relation" => self.relation = value.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
            "hidden" => {
                self.hidden = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| num(key, s))
                    .collect::<Result<_>>()?
            }
            "g_out" => self.g_out = num(key, value)?,
            "mlp_sizing" => self.mlp_sizing = value.parse()?,
            "class_count" => self.class_count = num(key, value)?,
            "unseen_classes" => self.unseen_classes = num(key, value)?,
            "samples_per_class" => self.samples_per_class = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "iterations" => self.iterations = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "test_fraction" => self.test_fraction = num(key, value)?,
            "log_every" => self.log_every = num(key, value)?,
            "dataset" => self.dataset = path(value),
            "d0" => self.generator.d0 = num(key, value)?,
            "sigma_d" => self.generator.sigma_d = num(key, value)?,
            "sigma_c" => self.generator.sigma_c = num(key, value)?,
            "clamp" => self.generator.clamp = flag(key, value)?,
            "shuffle_rows" => self.generator.shuffle_rows = flag(key, value)?,
            "b_seed" => self.b_seed = num(key, value)?,
            "exec" => {
                self.exec = match value {
                    "parallel" => Exec::Parallel,
                    "sequential" => Exec::Sequential,
                    _ => return Err(Error::Config(format!("`exec`: unknown mode `{value}`"))),
                }
            }
            "record_wall_time" => self.record_wall_time = flag(key, value)?,
            "metrics" => self.metrics_path = path(value),
            "checkpoint" => self.checkpoint_path = path(value),
            "preprocessor" => self.preprocessor = value.parse()?,
            "controller_size" => self.controller_size = num(key, value)?,
            "memory_slots" => self.memory_slots = num(key, value)?,
            "memory_width" => self.memory_width = num(key, value)?,
            "heads" => self.heads = num(key, value)?,
            "usage_decay" => self.usage_decay = num(key, value)?,
            "key_strength" => self.key_strength = num(key, value)?,
            "feature_width" => self.feature_width = num(key, value)?,
            "episode_classes" => self.episode_classes = num(key, value)?,
            "labels" => self.labels = num(key, value)?,
            "episode_steps" => self.episode_steps = num(key, value)?,
            "train_pool" => self.train_pool = num(key, value)?,
            "test_pool" => self.test_pool = num(key, value)?,
            "eval_every" => self.eval_every = num(key, value)?,
            "eval_episodes" => self.eval_episodes = num(key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("g_out", self.g_out),
            ("class_count", self.class_count),
            ("samples_per_class", self.samples_per_class),
            ("batch_size", self.batch_size),
            ("log_every", self.log_every),
            ("controller_size", self.controller_size),
            ("memory_slots", self.memory_slots),
            ("memory_width", self.memory_width),
            ("heads", self.heads),
            ("feature_width", self.feature_width),
            ("episode_classes", self.episode_classes),
            ("labels", self.labels),
            ("episode_steps", self.episode_steps),
            ("eval_every", self.eval_every),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("`{name}` must be positive")));
            }
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("`hidden` widths must be positive".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "`test_fraction` must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("`learning_rate` must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.usage_decay) {
            return Err(Error::Config("`usage_decay` must lie in [0, 1)".into()));
        }
        if self.heads > self.memory_slots {
            return Err(Error::Config("more heads than memory slots".into()));
        }
        if self.task == Task::OneShot && self.model == ModelKind::LinearRn {
            return Err(Error::Config("one-shot pre-processor must be `rn` or `mlp`".into()));
        }
        if self.task == Task::OneShot
            && (self.train_pool < self.episode_classes || self.test_pool < self.episode_classes)
        {
            return Err(Error::Config("class pools smaller than `episode_classes`".into()));
        }
        if self.labels < self.episode_classes {
            return Err(Error::Config("fewer labels than classes per episode".into()));
        }
        if self.task == Task::Entangled && self.model == ModelKind::Rn {
            return Err(Error::Config(
                "the entangled task needs a model that reads flat vectors (`linear_rn` or `mlp`)".into(),
            ));
        }
        Ok(())
    }

    pub fn rn_spec(&self, output: usize) -> RnSpec {
        RnSpec::symmetric(NUM_FEATURES, &self.hidden, self.g_out, output)
    }

    /// Builds the configured scene model for `output` logits.
    pub fn scene_model(&self, output: usize) -> Result<SceneModel> {
        let input = NUM_OBJECTS * NUM_FEATURES;
        Ok(match self.model {
            ModelKind::Rn => SceneModel::Rn(self.rn_spec(output)),
            ModelKind::LinearRn => SceneModel::LinearRn(LinearRnSpec {
                objects: NUM_OBJECTS,
                rn: self.rn_spec(output),
            }),
            ModelKind::Mlp => SceneModel::Mlp(match self.mlp_sizing {
                MlpSizing::Width => MlpSpec::with_hidden(input, &self.hidden, output)?,
                MlpSizing::Params => MlpSpec::matched_to(
                    self.rn_spec(output).param_count(),
                    input,
                    output,
                    self.hidden.len().max(1),
                )?,
            }),
        })
    }

    /// Renders the config in the same text format `parse` reads.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let task = match self.task {
            Task::Adjacency => "adjacency",
            Task::OneHot => "one_hot",
            Task::Entangled => "entangled",
            Task::UnseenGen => "unseen_gen",
            Task::OneShot => "one_shot",
        };
        let model = |m: ModelKind| match m {
            ModelKind::Rn => "rn",
            ModelKind::Mlp => "mlp",
            ModelKind::LinearRn => "linear_rn",
        };
        let hidden: Vec<String> = self.hidden.iter().map(|h| h.to_string()).collect();
        let opt = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let g = &self.generator;
        let _ = writeln!(s, "task = {task}");
        let _ = writeln!(s, "model = {}", model(self.model));
        let _ = writeln!(s, "relation = {}", self.relation);
        let _ = writeln!(s, "hidden = {}", hidden.join(","));
        let _ = writeln!(s, "g_out = {}", self.g_out);
        let _ = writeln!(
            s,
            "mlp_sizing = {}",
            if self.mlp_sizing == MlpSizing::Params { "params" } else { "width" }
        );
        let _ = writeln!(s, "class_count = {}", self.class_count);
        let _ = writeln!(s, "unseen_classes = {}", self.unseen_classes);
        let _ = writeln!(s, "samples_per_class = {}", self.samples_per_class);
        let _ = writeln!(s, "learning_rate = {:e}", self.learning_rate);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "iterations = {}", self.iterations);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "test_fraction = {}", self.test_fraction);
        let _ = writeln!(s, "log_every = {}", self.log_every);
        let _ = writeln!(s, "dataset = {}", opt(&self.dataset));
        let _ = writeln!(s, "d0 = {}", g.d0);
        let _ = writeln!(s, "sigma_d = {}", g.sigma_d);
        let _ = writeln!(s, "sigma_c = {}", g.sigma_c);
        let _ = writeln!(s, "clamp = {}", g.clamp);
        let _ = writeln!(s, "shuffle_rows = {}", g.shuffle_rows);
        let _ = writeln!(s, "b_seed = {}", self.b_seed);
        let _ = writeln!(
            s,
            "exec = {}",
            if self.exec == Exec::Parallel { "parallel" } else { "sequential" }
        );
        let _ = writeln!(s, "record_wall_time = {}", self.record_wall_time);
        let _ = writeln!(s, "metrics = {}", opt(&self.metrics_path));
        let _ = writeln!(s, "checkpoint = {}", opt(&self.checkpoint_path));
        let _ = writeln!(s, "preprocessor = {}", model(self.preprocessor));
        let _ = writeln!(s, "controller_size = {}", self.controller_size);
        let _ = writeln!(s, "memory_slots = {}", self.memory_slots);
        let _ = writeln!(s, "memory_width = {}", self.memory_width);
        let _ = writeln!(s, "heads = {}", self.heads);
        let _ = writeln!(s, "usage_decay = {}", self.usage_decay);
        let _ = writeln!(s, "key_strength = {}", self.key_strength);
        let _ = writeln!(s, "feature_width = {}", self.feature_width);
        let _ = writeln!(s, "episode_classes = {}", self.episode_classes);
        let _ = writeln!(s, "labels = {}", self.labels);
        let _ = writeln!(s, "episode_steps = {}", self.episode_steps);
        let _ = writeln!(s, "train_pool = {}", self.train_pool);
        let _ = writeln!(s, "test_pool = {}", self.test_pool);
        let _ = writeln!(s, "eval_every = {}", self.eval_every);
        let _ = writeln!(s, "eval_episodes = {}", self.eval_episodes);
        s
    }
}
