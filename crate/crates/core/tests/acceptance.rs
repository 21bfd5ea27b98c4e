//! End-to-end acceptance runner: one PASS/FAIL line per criterion.
//!
//! Failing criteria are reported, not hidden; the process exits non-zero on
//! any failure only when `ACCEPTANCE_STRICT=1` is set, so the rest of the
//! workspace test suite still runs to completion.

mod common;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use common::{
    brute_force_dag_count, empty_graph_coordinates, ks_uniform, rn_permutation_deviation,
};
use relnet::harness::{
    make_episodes, memorize_episode, one_shot_pools, run_gradcheck,
    run_ub_analysis, train_scene_classifier, GradcheckTarget, ModelKind, SceneRun, Task,
    TrainConfig,
};
use relnet::mann::{instance_accuracy, perfect_memory_predictions};
use relnet::models::{random_ub_baseline, RnSpec};
use relnet::numerics::RngStream;
use relnet::scenegen::{
    build_class_pool, enumerate_dags, generate_scene, generate_scene_traced, make_permutation,
    offset_position, GeneratorParams, RelationGraph, Relation, SceneClass, NUM_TYPES,
};

/// Per-edge accuracy of the first unseen-class run; later runs must stay
/// within `UNSEEN_TOLERANCE` of it.
const UNSEEN_PIN: f64 = 0.7316;
const UNSEEN_TOLERANCE: f64 = 0.05;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

/// The tested desk-scale scene configuration.
fn desk_scene(task: Task, model: ModelKind, relation: Relation) -> TrainConfig {
    let mut cfg = TrainConfig::desk();
    cfg.task = task;
    cfg.model = model;
    cfg.relation = relation;
    cfg
}

fn c1_permutation_invariance() -> Outcome {
    let start = Instant::now();
    let spec = RnSpec::symmetric(10, &[64, 64], 64, 16);
    let mut rng = RngStream::new(101, 0);
    let params = spec.init(&mut rng, false);
    let pool = build_class_pool(20, &mut rng).unwrap();
    let scenes: Vec<_> = pool
        .iter()
        .map(|c| generate_scene(c, &GeneratorParams::default(), &mut rng).unwrap())
        .collect();
    let dev = rn_permutation_deviation(&spec, &params, &scenes, 200, &mut rng);
    let t = start.elapsed();
    outcome(
        dev < 1e-9 && within(t, 10),
        format!("max |Δlogit| = {dev:.3e} over 20 scenes × 200 permutations in {:.1}s", t.as_secs_f64()),
    )
}

fn c2_gradient_fidelity() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for t in GradcheckTarget::ALL {
        let r = run_gradcheck(t, 100, t.default_eps(), 0).unwrap();
        pass &= r.max_relative_error < t.tolerance();
        parts.push(format!("{} {:.1e}<{:.0e}", t.name(), r.max_relative_error, t.tolerance()));
    }
    let t = start.elapsed();
    pass &= within(t, 120);
    outcome(pass, format!("{} (100 probes each) in {:.1}s", parts.join(", "), t.as_secs_f64()))
}

fn c3_dag_enumeration() -> Outcome {
    let start = Instant::now();
    let counts: Vec<(usize, usize)> = (1..=4)
        .map(|k| (enumerate_dags(k).unwrap().len(), brute_force_dag_count(k)))
        .collect();
    let t = start.elapsed();
    let pass = counts.iter().all(|(a, b)| a == b)
        && counts.iter().map(|c| c.0).eq([1, 3, 25, 543])
        && within(t, 5);
    outcome(pass, format!("(enumerated, brute force) = {counts:?} in {:.2}s", t.as_secs_f64()))
}

fn c4_generator() -> Outcome {
    let start = Instant::now();
    // forced angle and distance
    let east = offset_position((0.5, 0.5), 0.0, 0.2);
    let north = offset_position((0.5, 0.5), PI / 2.0, 0.2);
    let mut placement = east == (0.7, 0.5) && north == (0.5 + 0.2 * (PI / 2.0).cos(), 0.5 + 0.2);
    placement &= (north.0 - 0.5).abs() < 1e-16 && (north.1 - 0.7).abs() < 1e-15;

    // every sampled child against the closed form
    let mut rng = RngStream::new(104, 0);
    let pool = build_class_pool(100, &mut rng).unwrap();
    let unclamped = GeneratorParams {
        clamp: false,
        ..Default::default()
    };
    let mut children = 0usize;
    for class in &pool {
        let (_, trace) = generate_scene_traced(class, &unclamped, &mut rng).unwrap();
        for o in &trace.objects {
            if let Some(p) = o.position_parent {
                let pr = &trace.objects[p].record;
                let x = pr.x + o.distance * o.theta.cos();
                let y = pr.y + o.distance * o.theta.sin();
                placement &= (o.record.x, o.record.y) == (x, y);
                placement &= o.distance >= unclamped.d0
                    && (o.theta - trace.objects[p].theta).abs() <= PI / 3.0;
                children += 1;
            }
        }
    }

    // zero-noise colour inheritance
    let quiet = GeneratorParams {
        sigma_c: 0.0,
        ..Default::default()
    };
    let chain = SceneClass::new(
        0,
        RelationGraph::empty(NUM_TYPES),
        RelationGraph::from_edges(NUM_TYPES, &[(0, 1), (1, 2), (2, 3)]).unwrap(),
    );
    let mut colour = true;
    for _ in 0..200 {
        let (_, trace) = generate_scene_traced(&chain, &quiet, &mut rng).unwrap();
        for o in &trace.objects {
            if let Some(p) = o.color_parent {
                let pr = &trace.objects[p].record;
                colour &= (o.record.r, o.record.g, o.record.b) == (pr.r, pr.g, pr.b);
            }
        }
    }

    let (xs, ys) = empty_graph_coordinates(10_000, 104);
    let (kx, ky) = (ks_uniform(xs), ks_uniform(ys));
    let t = start.elapsed();
    outcome(
        placement && colour && kx < 0.02 && ky < 0.02 && within(t, 30),
        format!(
            "placement exact on {children} children: {placement}; colour exact: {colour}; KS x {kx:.4} y {ky:.4} in {:.1}s",
            t.as_secs_f64()
        ),
    )
}

fn final_loss(run: &SceneRun) -> f64 {
    run.final_test.loss
}

struct Separation {
    outcome: Outcome,
    position_rn_loss: f64,
    position_rn_csv: Vec<u8>,
}

fn c5_separation(dir: &std::path::Path) -> Separation {
    let mut pass = true;
    let mut parts = Vec::new();
    let mut position_rn_loss = f64::NAN;
    let mut position_rn_csv = Vec::new();
    for relation in [Relation::Position, Relation::Color] {
        let mut losses = [0.0; 2];
        for (i, model) in [ModelKind::Rn, ModelKind::Mlp].into_iter().enumerate() {
            let mut cfg = desk_scene(Task::Adjacency, model, relation);
            cfg.metrics_path = Some(dir.join(format!("c5_{relation}_{}.csv", i)));
            let start = Instant::now();
            let run = train_scene_classifier(&cfg).unwrap();
            let t = start.elapsed();
            losses[i] = final_loss(&run);
            pass &= within(t, 20 * 60);
            parts.push(format!(
                "{relation} {} BCE {:.4} ({} params, {:.0}s)",
                run.model.kind(),
                losses[i],
                run.model.param_count(),
                t.as_secs_f64()
            ));
            if relation == Relation::Position && model == ModelKind::Rn {
                position_rn_loss = losses[i];
                position_rn_csv = std::fs::read(cfg.metrics_path.as_ref().unwrap()).unwrap();
            }
        }
        pass &= losses[0] < 0.05 && losses[1] > 0.2;
    }
    Separation {
        outcome: outcome(pass, format!("{}; need RN < 0.05 and MLP > 0.2", parts.join(", "))),
        position_rn_loss,
        position_rn_csv,
    }
}

fn c6_one_hot() -> Outcome {
    let cfg = desk_scene(Task::OneHot, ModelKind::Rn, Relation::Position);
    let start = Instant::now();
    let run = train_scene_classifier(&cfg).unwrap();
    let t = start.elapsed();
    let untrained = run.history[0].test_loss;
    let acc = run.final_test.accuracy;
    outcome(
        acc >= 0.9 && (untrained - 5f64.ln()).abs() <= 0.01 && within(t, 20 * 60),
        format!(
            "untrained loss {untrained:.4} (ln 5 = {:.4}), test accuracy {acc:.3} (need ≥ 0.9) in {:.0}s",
            5f64.ln(),
            t.as_secs_f64()
        ),
    )
}

fn c7_unseen() -> Outcome {
    let mut cfg = desk_scene(Task::UnseenGen, ModelKind::Rn, Relation::Position);
    cfg.class_count = 60;
    cfg.unseen_classes = 10;
    let start = Instant::now();
    let run = train_scene_classifier(&cfg).unwrap();
    let t = start.elapsed();
    let unseen = run.unseen.unwrap();
    let pinned = (unseen.accuracy - UNSEEN_PIN).abs() <= UNSEEN_TOLERANCE;
    outcome(
        unseen.accuracy > 0.75 && pinned,
        format!(
            "unseen per-edge accuracy {:.4} (need > 0.75, pinned {UNSEEN_PIN:.4} ± {UNSEEN_TOLERANCE}), unseen BCE {:.4}, seen-class test BCE {:.4}, {:.0}s",
            unseen.accuracy,
            unseen.loss,
            run.final_test.loss,
            t.as_secs_f64()
        ),
    )
}

fn c8_entangled(rn_loss: f64) -> Outcome {
    let cfg = desk_scene(Task::Entangled, ModelKind::LinearRn, Relation::Position);
    let start = Instant::now();
    let run = train_scene_classifier(&cfg).unwrap();
    let t = start.elapsed();
    let b = make_permutation(cfg.b_seed, 160);
    let score = run_ub_analysis(&run.checkpoint, &b).unwrap().score;
    let (mean, sd) = random_ub_baseline(&b, 16, 100, &mut RngStream::new(108, 0)).unwrap();
    let loss = final_loss(&run);
    outcome(
        loss <= 2.0 * rn_loss && score >= mean + 0.2,
        format!(
            "linear+RN BCE {loss:.4} vs RN {rn_loss:.4} (need ≤ 2×); UB score {score:.4} vs random {mean:.4} ± {sd:.4} (need ≥ +0.2), {:.0}s",
            t.as_secs_f64()
        ),
    )
}

fn one_shot_config() -> TrainConfig {
    let mut cfg = TrainConfig::desk();
    cfg.task = Task::OneShot;
    cfg.learning_rate = 1e-3;
    cfg.iterations = 300;
    cfg.eval_every = 50;
    cfg.eval_episodes = 200;
    cfg
}

fn c9_one_shot() -> Outcome {
    let start = Instant::now();
    let cfg = one_shot_config();
    let run = relnet::harness::train_one_shot(&cfg).unwrap();
    let firsts: Vec<f64> = run.evals.iter().map(|(_, e)| e.curve.at(1).unwrap()).collect();
    let a = firsts.iter().all(|v| (v - 0.2).abs() <= 0.05);
    let weights_ok = |e: &relnet::harness::OneShotEval| e.max_weight_error < 1e-9 && e.min_weight >= 0.0;
    let mut d = run.evals.iter().all(|(_, e)| weights_ok(e));

    let mut mem_cfg = cfg.clone();
    mem_cfg.iterations = 200;
    let (mem, episode, preds) = memorize_episode(&mem_cfg).unwrap();
    let memorized = mem
        .curve
        .from_instance(2, &[preds], std::slice::from_ref(&episode))
        .unwrap();
    let b = memorized >= 0.9;
    d &= weights_ok(&mem);

    let (_, test_pool) = one_shot_pools(&cfg).unwrap();
    let episodes = make_episodes(&cfg, &test_pool, 200, &mut RngStream::new(109, 0)).unwrap();
    let mut rng = RngStream::new(109, 1);
    let oracle: Vec<Vec<usize>> = episodes.iter().map(|e| perfect_memory_predictions(e, &mut rng)).collect();
    let curve = instance_accuracy(&oracle, &episodes, relnet::harness::MAX_INSTANCE).unwrap();
    let oracle_k2 = curve.from_instance(2, &oracle, &episodes).unwrap();
    let c = oracle_k2 == 1.0;

    let t = start.elapsed();
    outcome(
        a && b && c && d && within(t, 600),
        format!(
            "(a) instance-1 accuracy {:.3}..{:.3}: {a}; (b) memorized k≥2 {memorized:.3}: {b}; (c) oracle k≥2 {oracle_k2:.3}: {c}; (d) weights valid: {d}; {:.0}s",
            firsts.iter().copied().fold(f64::INFINITY, f64::min),
            firsts.iter().copied().fold(0.0, f64::max),
            t.as_secs_f64()
        ),
    )
}

fn c10_determinism(dir: &std::path::Path, first: &[u8]) -> Outcome {
    let mut cfg = desk_scene(Task::Adjacency, ModelKind::Rn, Relation::Position);
    cfg.metrics_path = Some(dir.join("c10_repeat.csv"));
    train_scene_classifier(&cfg).unwrap();
    let second = std::fs::read(cfg.metrics_path.as_ref().unwrap()).unwrap();
    outcome(
        !first.is_empty() && first == second,
        format!("{} bytes, identical: {}", first.len(), first == second),
    )
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut report = |n: u32, name: &'static str, o: Outcome| {
        println!("C{n} {} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };
    report(1, "permutation invariance", c1_permutation_invariance());
    report(2, "gradient fidelity", c2_gradient_fidelity());
    report(3, "DAG enumeration", c3_dag_enumeration());
    report(4, "generator correctness", c4_generator());
    let sep = c5_separation(dir.path());
    report(5, "RN/MLP separation", sep.outcome);
    report(6, "one-hot variant", c6_one_hot());
    report(7, "unseen-class generalization", c7_unseen());
    report(8, "entangled task", c8_entangled(sep.position_rn_loss));
    report(9, "one-shot properties", c9_one_shot());
    report(10, "determinism", c10_determinism(dir.path(), &sep.position_rn_csv));

    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {} of {} criteria pass{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failing {failed:?}")
        }
    );
    if !failed.is_empty() && std::env::var("ACCEPTANCE_STRICT").as_deref() == Ok("1") {
        std::process::exit(1);
    }
}
