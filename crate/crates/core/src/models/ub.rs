use crate::error::{Error, Result};
use crate::numerics::{Matrix, RngStream};
use crate::scenegen::PermutationMatrix;

/// Block concentration of `|U·B|`.
#[derive(Clone, Debug, PartialEq)]
pub struct UbReport {
    /// Mean over ground-truth objects of the share of that object's mass
    /// landing in its single heaviest perceived-object block.
    pub score: f64,
    /// `objects × objects` matrix of block masses `Σ|block(i, j)|`.
    pub block_mass: Matrix,
}

/// `U·B` for a permutation `B`: column `c` of the product is column
/// `B⁻¹(c)` of `U`.
pub fn ub_product(u: &Matrix, b: &PermutationMatrix) -> Result<Matrix> {
    if u.cols() != b.size() {
        return Err(Error::Dimension {
            op: "ub_product",
            left: u.shape(),
            right: (b.size(), b.size()),
        });
    }
    let n = u.cols();
    let mut out = Matrix::zeros(u.rows(), n);
    for (k, &c) in b.indices().iter().enumerate() {
        for r in 0..u.rows() {
            out.set(r, c, u.get(r, k));
        }
    }
    Ok(out)
}

/// Block score of an arbitrary square `M` (absolute values are taken).
pub fn block_score(m: &Matrix, objects: usize) -> Result<UbReport> {
    if m.rows() != m.cols() || objects == 0 || m.rows() % objects != 0 {
        return Err(Error::Dimension {
            op: "block_score",
            left: m.shape(),
            right: (objects, objects),
        });
    }
    let width = m.rows() / objects;
    let mut mass = Matrix::zeros(objects, objects);
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            let v = mass.get(r / width, c / width) + m.get(r, c).abs();
            mass.set(r / width, c / width, v);
        }
    }
    let mut total = 0.0;
    for j in 0..objects {
        let col: Vec<f64> = (0..objects).map(|i| mass.get(i, j)).collect();
        let sum: f64 = col.iter().sum();
        total += if sum > 0.0 {
            col.iter().copied().fold(0.0, f64::max) / sum
        } else {
            1.0 / objects as f64
        };
    }
    Ok(UbReport {
        score: total / objects as f64,
        block_mass: mass,
    })
}

/// Block score of `|U·B|` with `objects × objects` blocks.
pub fn ub_block_score(u: &Matrix, b: &PermutationMatrix, objects: usize) -> Result<UbReport> {
    block_score(&ub_product(u, b)?, objects)
}

/// Mean and standard deviation of the block score over `draws` matrices
/// `U` with i.i.d. standard normal entries, `B` fixed.
pub fn random_ub_baseline(
    b: &PermutationMatrix,
    objects: usize,
    draws: usize,
    rng: &mut RngStream,
) -> Result<(f64, f64)> {
    if draws < 2 {
        return Err(Error::param("the random baseline needs at least two draws"));
    }
    let n = b.size();
    let scores = (0..draws)
        .map(|_| {
            let u = Matrix::from_vec(n, n, (0..n * n).map(|_| rng.standard_normal()).collect())?;
            Ok(ub_block_score(&u, b, objects)?.score)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = scores.iter().sum::<f64>() / draws as f64;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
    Ok((mean, var.sqrt()))
}
