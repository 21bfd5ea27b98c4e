use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use relnet::harness::{
    block_mass_csv, eval_unseen, evaluate_checkpoint, memorize_episode, read_scene_checkpoint,
    run_gradcheck, run_ub_analysis, task_dataset, train_one_shot, train_scene_classifier,
    GradcheckTarget, Task, TrainConfig,
};
use relnet::models::random_ub_baseline;
use relnet::numerics::RngStream;
use relnet::scenegen::{make_permutation, Dataset, Relation, TargetMode, NUM_FEATURES, NUM_OBJECTS};
use relnet::{Error, Exec};
use serde_json::json;

#[derive(Parser)]
#[command(name = "relnet", version, about = "Relation networks on synthetic scene descriptions")]
struct Cli {
    /// Run batch work on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scene dataset.
    Gen {
        #[arg(long)]
        classes: usize,
        #[arg(long)]
        samples: usize,
        #[arg(long, default_value = "position")]
        relation: Relation,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "adjacency")]
        target: TargetMode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a scene classifier from a config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's metrics path.
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Override the config's checkpoint path.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Evaluate a scene checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset to evaluate on (all samples).
        #[arg(long, required_unless_present = "unseen")]
        dataset: Option<PathBuf>,
        /// Evaluate on fresh scenes from the held-out classes stored in the
        /// checkpoint.
        #[arg(long)]
        unseen: bool,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train the memory-augmented one-shot learner from a config file.
    Oneshot {
        #[arg(long)]
        config: PathBuf,
        /// Train on one frozen episode and report its accuracy instead.
        #[arg(long)]
        memorize: bool,
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Compare analytic gradients with central differences.
    Gradcheck {
        /// mlp, rn, rn_input, linear_rn, mann or all.
        #[arg(long, default_value = "all")]
        model: String,
        #[arg(long, default_value_t = 100)]
        probes: usize,
        /// Step size; each model has its own default.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Block structure of |UB| for an entangled-task checkpoint.
    Ub {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Seed of B; defaults to the one stored in the checkpoint.
        #[arg(long)]
        b_seed: Option<u64>,
        /// Write the 16×16 block-mass matrix here as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Random-U draws for the baseline.
        #[arg(long, default_value_t = 100)]
        baseline_draws: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    };
    match run(cli.command, exec) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) | Error::Parse { .. } => 2,
                Error::Diverged { .. } => 3,
                _ => 1,
            })
        }
    }
}

fn load_config(path: &PathBuf, exec: Exec) -> relnet::Result<TrainConfig> {
    let mut cfg = TrainConfig::from_file(path)?;
    cfg.exec = exec;
    Ok(cfg)
}

fn run(command: Command, exec: Exec) -> relnet::Result<ExitCode> {
    match command {
        Command::Gen {
            classes,
            samples,
            relation,
            seed,
            target,
            out,
        } => {
            let mut cfg = TrainConfig::desk();
            cfg.task = match target {
                TargetMode::Adjacency => Task::Adjacency,
                TargetMode::OneHot => Task::OneHot,
            };
            cfg.relation = relation;
            cfg.class_count = classes;
            cfg.samples_per_class = samples;
            cfg.seed = seed;
            cfg.exec = exec;
            let (ds, _) = task_dataset(&cfg)?;
            ds.write(&out)?;
            println!("{}", json!({"classes": ds.classes.len(), "samples": ds.len(), "out": out}));
        }
        Command::Train {
            config,
            metrics,
            checkpoint,
        } => {
            let mut cfg = load_config(&config, exec)?;
            cfg.metrics_path = metrics.or(cfg.metrics_path);
            cfg.checkpoint_path = checkpoint.or(cfg.checkpoint_path);
            let run = train_scene_classifier(&cfg)?;
            println!(
                "{}",
                json!({
                    "model": run.model.kind(),
                    "params": run.model.param_count(),
                    "iterations": cfg.iterations,
                    "test": run.final_test,
                    "unseen": run.unseen,
                })
            );
        }
        Command::Eval {
            checkpoint,
            dataset,
            unseen,
            samples,
            seed,
        } => {
            let (ck, _, meta) = read_scene_checkpoint(&checkpoint)?;
            let mut out = serde_json::Map::new();
            if let Some(path) = dataset {
                let report = evaluate_checkpoint(&ck, &Dataset::read(&path)?, exec)?;
                out.insert("dataset".into(), json!(report));
            }
            if unseen {
                if meta.unseen_classes.is_empty() {
                    return Err(Error::Config("checkpoint stores no held-out classes".into()));
                }
                let report = eval_unseen(&ck, &meta.unseen_classes, samples, seed, exec)?;
                out.insert("unseen".into(), json!(report));
            }
            println!("{}", serde_json::Value::Object(out));
        }
        Command::Oneshot {
            config,
            memorize,
            metrics,
            checkpoint,
        } => {
            let mut cfg = load_config(&config, exec)?;
            cfg.metrics_path = metrics.or(cfg.metrics_path);
            cfg.checkpoint_path = checkpoint.or(cfg.checkpoint_path);
            if memorize {
                let (ev, _, _) = memorize_episode(&cfg)?;
                println!("{}", json!({"memorized": ev}));
            } else {
                let run = train_one_shot(&cfg)?;
                let (it, last) = run.evals.last().expect("final evaluation");
                println!("{}", json!({"iteration": it, "eval": last}));
            }
        }
        Command::Gradcheck {
            model,
            probes,
            eps,
            seed,
        } => {
            let targets = if model == "all" {
                GradcheckTarget::ALL.to_vec()
            } else {
                vec![model.parse()?]
            };
            let mut ok = true;
            for t in targets {
                let eps = eps.unwrap_or(t.default_eps());
                let r = run_gradcheck(t, probes, eps, seed)?;
                let pass = r.max_relative_error < t.tolerance();
                ok &= pass;
                println!(
                    "{}",
                    json!({
                        "model": t.name(),
                        "probes": r.probes,
                        "eps": eps,
                        "max_relative_error": r.max_relative_error,
                        "worst": r.worst,
                        "tolerance": t.tolerance(),
                        "pass": pass,
                    })
                );
            }
            if !ok {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Ub {
            checkpoint,
            b_seed,
            out,
            baseline_draws,
        } => {
            let (ck, _, meta) = read_scene_checkpoint(&checkpoint)?;
            let seed = b_seed
                .or(meta.b_seed)
                .ok_or_else(|| Error::Config("no --b-seed given and none stored".into()))?;
            let b = make_permutation(seed, NUM_OBJECTS * NUM_FEATURES);
            let report = run_ub_analysis(&ck, &b)?;
            let (mean, sd) =
                random_ub_baseline(&b, NUM_OBJECTS, baseline_draws, &mut RngStream::new(seed, 0))?;
            if let Some(path) = &out {
                std::fs::write(path, block_mass_csv(&report))
                    .map_err(|e| Error::io(path, e))?;
            }
            println!(
                "{}",
                json!({"score": report.score, "baseline_mean": mean, "baseline_sd": sd, "b_seed": seed})
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}
