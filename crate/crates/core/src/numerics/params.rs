use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

/// Ordered, uniquely named collection of parameter tensors.
///
/// Iteration order is insertion order, so two sets built by the same
/// sequence of `push` calls line up tensor-for-tensor.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Matrix>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Matrix) -> Result<()> {
        let name = name.into();
        if self.names.contains(&name) {
            return Err(Error::param(format!("duplicate parameter name `{name}`")));
        }
        self.names.push(name);
        self.tensors.push(tensor);
        Ok(())
    }

    /// Appends every tensor of `other` with `prefix` prepended to its name.
    pub fn extend_prefixed(&mut self, prefix: &str, other: ParamSet) -> Result<()> {
        for (n, t) in other.names.into_iter().zip(other.tensors) {
            self.push(format!("{prefix}{n}"), t)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Matrix] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Matrix] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    /// Total number of scalar entries.
    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Matrix::len).sum()
    }

    pub fn zeros_like(&self) -> ParamSet {
        ParamSet {
            names: self.names.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| Matrix::zeros(t.rows(), t.cols()))
                .collect(),
        }
    }

    pub fn same_layout(&self, other: &ParamSet) -> bool {
        self.names == other.names
            && self
                .tensors
                .iter()
                .zip(&other.tensors)
                .all(|(a, b)| a.shape() == b.shape())
    }

    pub fn check_layout(&self, other: &ParamSet) -> Result<()> {
        if self.len() != other.len() || self.names != other.names {
            return Err(Error::param(format!(
                "parameter sets differ: {:?} vs {:?}",
                self.names, other.names
            )));
        }
        for ((n, a), b) in self.names.iter().zip(&self.tensors).zip(&other.tensors) {
            if a.shape() != b.shape() {
                return Err(Error::Dimension {
                    op: if n.is_empty() { "parameter" } else { "parameter shape" },
                    left: a.shape(),
                    right: b.shape(),
                });
            }
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &ParamSet) -> Result<()> {
        self.check_layout(other)?;
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    pub fn scale(&mut self, k: f64) {
        self.tensors.iter_mut().for_each(|t| t.scale(k));
    }

    /// Scalar at flat position `index` across all tensors in order.
    pub fn flat_get(&self, index: usize) -> f64 {
        let (t, i) = self.locate(index);
        self.tensors[t].values()[i]
    }

    pub fn flat_set(&mut self, index: usize, v: f64) {
        let (t, i) = self.locate(index);
        self.tensors[t].values_mut()[i] = v;
    }

    /// `(tensor name, offset inside the tensor)` of a flat position.
    pub fn describe(&self, index: usize) -> (String, usize) {
        let (t, i) = self.locate(index);
        (self.names[t].clone(), i)
    }

    fn locate(&self, mut index: usize) -> (usize, usize) {
        for (t, tensor) in self.tensors.iter().enumerate() {
            if index < tensor.len() {
                return (t, index);
            }
            index -= tensor.len();
        }
        panic!("flat parameter index out of range");
    }

    /// Sum of a list of same-layout sets, accumulated left to right.
    pub fn sum_ordered(sets: Vec<ParamSet>) -> Option<ParamSet> {
        let mut it = sets.into_iter();
        let mut acc = it.next()?;
        for s in it {
            for (a, b) in acc.tensors.iter_mut().zip(&s.tensors) {
                for (x, y) in a.values_mut().iter_mut().zip(b.values()) {
                    *x += y;
                }
            }
        }
        Some(acc)
    }
}
