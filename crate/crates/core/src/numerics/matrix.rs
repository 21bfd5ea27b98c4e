use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major `f64` matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

/// Whether an operand of [`gemm`] is used as-is or transposed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trans {
    No,
    Yes,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix {
            rows,
            cols,
            values: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.values[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Dimension {
                op: "Matrix::from_vec",
                left: (rows, cols),
                right: (values.len(), 1),
            });
        }
        Ok(Matrix { rows, cols, values })
    }

    /// Builds a matrix from nested rows; all rows must share one length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Dimension {
                    op: "Matrix::from_rows",
                    left: (rows.len(), cols),
                    right: (1, r.len()),
                });
            }
            values.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            values,
        })
    }

    pub fn row_vector(values: Vec<f64>) -> Self {
        Matrix {
            rows: 1,
            cols: values.len(),
            values,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let c = self.cols;
        &mut self.values[r * c..(r + 1) * c]
    }

    /// Same values, new shape.
    pub fn reshape(self, rows: usize, cols: usize) -> Result<Self> {
        Matrix::from_vec(rows, cols, self.values)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.values[c * self.rows + r] = self.values[r * self.cols + c];
            }
        }
        t
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn fill(&mut self, v: f64) {
        self.values.iter_mut().for_each(|x| *x = v);
    }

    pub fn scale(&mut self, k: f64) {
        self.values.iter_mut().for_each(|x| *x *= k);
    }

    /// `self += other`, shapes must match.
    pub fn add_assign(&mut self, other: &Matrix) -> Result<()> {
        self.check_same("Matrix::add_assign", other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        Ok(())
    }

    /// `self += k * other`, shapes must match.
    pub fn add_scaled(&mut self, k: f64, other: &Matrix) -> Result<()> {
        self.check_same("Matrix::add_scaled", other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += k * b;
        }
        Ok(())
    }

    /// Column sums as a `1 × cols` matrix.
    pub fn sum_rows(&self) -> Matrix {
        let mut out = Matrix::zeros(1, self.cols);
        for r in 0..self.rows {
            for (o, v) in out.values.iter_mut().zip(self.row(r)) {
                *o += v;
            }
        }
        out
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Index of the first non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.values.iter().position(|v| !v.is_finite())
    }

    pub fn check_finite(&self, name: &str) -> Result<()> {
        match self.first_non_finite() {
            Some(index) => Err(Error::NonFinite {
                name: name.to_string(),
                index,
            }),
            None => Ok(()),
        }
    }

    pub(crate) fn check_same(&self, op: &'static str, other: &Matrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Dimension {
                op,
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(())
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(
            self.rows,
            other.cols,
        );
        gemm(1.0, self, Trans::No, other, Trans::No, 0.0, &mut out)?;
        Ok(out)
    }

    /// `selfᵀ · other`.
    pub fn t_matmul(&self, other: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(self.cols, other.cols);
        gemm(1.0, self, Trans::Yes, other, Trans::No, 0.0, &mut out)?;
        Ok(out)
    }

    /// `self · otherᵀ`.
    pub fn matmul_t(&self, other: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(self.rows, other.rows);
        gemm(1.0, self, Trans::No, other, Trans::Yes, 0.0, &mut out)?;
        Ok(out)
    }
}

/// `c ← alpha · op(a) · op(b) + beta · c`.
///
/// When `beta == 0` the previous contents of `c` are ignored (NaNs included).
pub fn gemm(
    alpha: f64,
    a: &Matrix,
    ta: Trans,
    b: &Matrix,
    tb: Trans,
    beta: f64,
    c: &mut Matrix,
) -> Result<()> {
    let (m, k, rsa, csa) = match ta {
        Trans::No => (a.rows, a.cols, a.cols as isize, 1isize),
        Trans::Yes => (a.cols, a.rows, 1isize, a.cols as isize),
    };
    let (kb, n, rsb, csb) = match tb {
        Trans::No => (b.rows, b.cols, b.cols as isize, 1isize),
        Trans::Yes => (b.cols, b.rows, 1isize, b.cols as isize),
    };
    if k != kb {
        return Err(Error::Dimension {
            op: "gemm",
            left: (m, k),
            right: (kb, n),
        });
    }
    if c.shape() != (m, n) {
        return Err(Error::Dimension {
            op: "gemm (output)",
            left: (m, n),
            right: c.shape(),
        });
    }
    if m == 0 || n == 0 {
        return Ok(());
    }
    if k == 0 {
        if beta == 0.0 {
            c.fill(0.0);
        } else {
            c.scale(beta);
        }
        return Ok(());
    }
    // SAFETY: all strides and extents were derived from the matrices' own
    // shapes above, so every access stays inside the backing vectors.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.values.as_ptr(),
            rsa,
            csa,
            b.values.as_ptr(),
            rsb,
            csb,
            beta,
            c.values.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    Ok(())
}

/// `y = x·W + b` with `b` broadcast over rows.
pub fn affine_forward(x: &Matrix, w: &Matrix, b: &Matrix) -> Result<Matrix> {
    if x.cols != w.rows {
        return Err(Error::Dimension {
            op: "affine_forward (x·W)",
            left: x.shape(),
            right: w.shape(),
        });
    }
    if b.shape() != (1, w.cols) {
        return Err(Error::Dimension {
            op: "affine_forward (bias)",
            left: (1, w.cols),
            right: b.shape(),
        });
    }
    let mut y = Matrix::zeros(x.rows, w.cols);
    for r in 0..x.rows {
        y.row_mut(r).copy_from_slice(&b.values);
    }
    gemm(1.0, x, Trans::No, w, Trans::No, 1.0, &mut y)?;
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;

    fn naive(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    fn random(rows: usize, cols: usize, rng: &mut RngStream) -> Matrix {
        let v = (0..rows * cols).map(|_| rng.uniform(-1.0, 1.0)).collect();
        Matrix::from_vec(rows, cols, v).unwrap()
    }

    #[test]
    fn affine_identity_and_scalar() {
        let x = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let y = affine_forward(&x, &Matrix::identity(2), &Matrix::zeros(1, 2)).unwrap();
        assert_eq!(y, x);

        let y = affine_forward(
            &Matrix::from_rows(&[[1.0]]).unwrap(),
            &Matrix::from_rows(&[[3.0]]).unwrap(),
            &Matrix::from_rows(&[[-1.0]]).unwrap(),
        )
        .unwrap();
        assert_eq!(y.values(), &[2.0]);
    }

    #[test]
    fn affine_matches_triple_loop() {
        let mut rng = RngStream::new(7, 0);
        let x = random(3, 4, &mut rng);
        let w = random(4, 2, &mut rng);
        let b = Matrix::zeros(1, 2);
        let y = affine_forward(&x, &w, &b).unwrap();
        assert!(y.max_abs_diff(&naive(&x, &w)) <= 1e-15);
    }

    #[test]
    fn affine_shape_error_names_both_shapes() {
        let err = affine_forward(&Matrix::zeros(2, 3), &Matrix::zeros(4, 2), &Matrix::zeros(1, 2))
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(2, 3)") && msg.contains("(4, 2)"), "{msg}");
    }

    #[test]
    fn transposed_products_agree() {
        let mut rng = RngStream::new(8, 1);
        let a = random(5, 7, &mut rng);
        let b = random(5, 3, &mut rng);
        let c = random(4, 7, &mut rng);
        assert!(a.t_matmul(&b).unwrap().max_abs_diff(&naive(&a.transpose(), &b)) < 1e-14);
        assert!(a.matmul_t(&c).unwrap().max_abs_diff(&naive(&a, &c.transpose())) < 1e-14);
    }

    #[test]
    fn gemm_beta_zero_ignores_nan() {
        let a = Matrix::identity(2);
        let mut c = Matrix::filled(2, 2, f64::NAN);
        gemm(1.0, &a, Trans::No, &a, Trans::No, 0.0, &mut c).unwrap();
        assert_eq!(c, Matrix::identity(2));
    }

    #[test]
    fn from_vec_rejects_bad_length() {
        assert!(Matrix::from_vec(2, 2, vec![1.0; 3]).is_err());
    }
}
