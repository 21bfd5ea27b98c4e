use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::models::{ub_block_score, Checkpoint, UbReport};
use crate::scenegen::{make_permutation, PermutationMatrix, NUM_FEATURES, NUM_OBJECTS};

/// Block score of `|U·B|` for the disentangling layer stored in `ck`.
pub fn run_ub_analysis(ck: &Checkpoint, b: &PermutationMatrix) -> Result<UbReport> {
    let u = ck
        .params
        .get("u")
        .ok_or_else(|| Error::Config("checkpoint holds no disentangling layer `u`".into()))?;
    ub_block_score(u, b, NUM_OBJECTS)
}

/// As [`run_ub_analysis`] with `B` rebuilt from its seed.
pub fn run_ub_analysis_seeded(ck: &Checkpoint, b_seed: u64) -> Result<UbReport> {
    run_ub_analysis(ck, &make_permutation(b_seed, NUM_OBJECTS * NUM_FEATURES))
}

/// Block-mass matrix as CSV, one block-row per line.
pub fn block_mass_csv(report: &UbReport) -> String {
    let m = &report.block_mass;
    let mut s = String::new();
    for r in 0..m.rows() {
        let row: Vec<String> = m.row(r).iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{}", row.join(","));
    }
    s
}
