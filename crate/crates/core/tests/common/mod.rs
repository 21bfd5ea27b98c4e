//! Independent oracles shared by the integration tests and the acceptance
//! runner.
#![allow(dead_code)]

use relnet::models::{rn_forward, RnSpec};
use relnet::numerics::{Matrix, ParamSet, RngStream};
use relnet::scenegen::{
    generate_scene, GeneratorParams, RelationGraph, SceneClass, SceneDescription, NUM_TYPES,
};

/// Counts `k × k` zero-diagonal binary matrices with no directed cycle by
/// checking all `2^(k(k-1))` candidates with a depth-first search.
pub fn brute_force_dag_count(k: usize) -> usize {
    let slots: Vec<(usize, usize)> = (0..k)
        .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    (0u64..1 << slots.len())
        .filter(|mask| {
            let mut adj = vec![vec![false; k]; k];
            for (b, &(i, j)) in slots.iter().enumerate() {
                adj[i][j] = mask >> b & 1 == 1;
            }
            !has_cycle(&adj)
        })
        .count()
}

fn has_cycle(adj: &[Vec<bool>]) -> bool {
    // 0 unvisited, 1 on stack, 2 done
    fn visit(v: usize, adj: &[Vec<bool>], state: &mut [u8]) -> bool {
        state[v] = 1;
        for w in 0..adj.len() {
            if adj[v][w] && (state[w] == 1 || (state[w] == 0 && visit(w, adj, state))) {
                return true;
            }
        }
        state[v] = 2;
        false
    }
    let mut state = vec![0u8; adj.len()];
    (0..adj.len()).any(|v| state[v] == 0 && visit(v, adj, &mut state))
}

/// Kolmogorov–Smirnov distance between a sample and `U(0, 1)`.
pub fn ks_uniform(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let lo = x - i as f64 / n;
            let hi = (i + 1) as f64 / n - x;
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}

/// Coordinates of every object over `scenes` scenes of the doubly empty class.
pub fn empty_graph_coordinates(scenes: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let empty = RelationGraph::empty(NUM_TYPES);
    let class = SceneClass::new(0, empty, empty);
    let mut rng = RngStream::new(seed, 0);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for _ in 0..scenes {
        let s = generate_scene(&class, &GeneratorParams::default(), &mut rng).unwrap();
        for o in s.objects() {
            xs.push(o.x);
            ys.push(o.y);
        }
    }
    (xs, ys)
}

/// Rows of `m` reordered so that row `r` of the result is row `perm[r]`.
pub fn permute_rows(m: &Matrix, perm: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(m.rows(), m.cols());
    for (r, &p) in perm.iter().enumerate() {
        out.row_mut(r).copy_from_slice(m.row(p));
    }
    out
}

/// Largest absolute logit change of an RN over `perms` random row orders of
/// each of `scenes` random scenes.
pub fn rn_permutation_deviation(
    spec: &RnSpec,
    params: &ParamSet,
    scenes: &[SceneDescription],
    perms: usize,
    rng: &mut RngStream,
) -> f64 {
    let mut worst = 0.0f64;
    for s in scenes {
        let base = rn_forward(spec, params.tensors(), s.matrix()).unwrap().0;
        for _ in 0..perms {
            let mut order: Vec<usize> = (0..s.matrix().rows()).collect();
            rng.shuffle(&mut order);
            let moved = rn_forward(spec, params.tensors(), &permute_rows(s.matrix(), &order))
                .unwrap()
                .0;
            for (a, b) in base.values().iter().zip(moved.values()) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    worst
}

/// Euclidean distance in the `(x, y)` columns.
pub fn planar_distance(a: &[f64], b: &[f64]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}
