use super::generate::SceneDescription;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, RngStream};

/// Fixed permutation of a flattened scene, the matrix `B` with
/// `B[k, perm[k]] = 1` so that `(B·x)[k] = x[perm[k]]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PermutationMatrix {
    perm: Vec<usize>,
}

impl PermutationMatrix {
    pub fn identity(size: usize) -> Self {
        PermutationMatrix {
            perm: (0..size).collect(),
        }
    }

    pub fn from_indices(perm: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; perm.len()];
        for &p in &perm {
            if p >= perm.len() || std::mem::replace(&mut seen[p], true) {
                return Err(Error::param("index map is not a bijection"));
            }
        }
        Ok(PermutationMatrix { perm })
    }

    pub fn size(&self) -> usize {
        self.perm.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.perm
    }

    pub fn inverse(&self) -> PermutationMatrix {
        let mut inv = vec![0; self.perm.len()];
        for (k, &p) in self.perm.iter().enumerate() {
            inv[p] = k;
        }
        PermutationMatrix { perm: inv }
    }

    /// `B·x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.perm.len() {
            return Err(Error::Dimension {
                op: "PermutationMatrix::apply",
                left: (self.perm.len(), 1),
                right: (x.len(), 1),
            });
        }
        Ok(self.perm.iter().map(|&p| x[p]).collect())
    }

    /// Dense `B`.
    pub fn to_matrix(&self) -> Matrix {
        let n = self.perm.len();
        let mut m = Matrix::zeros(n, n);
        for (k, &p) in self.perm.iter().enumerate() {
            m.set(k, p, 1.0);
        }
        m
    }
}

/// Seeded uniformly random permutation of `0..size`.
pub fn make_permutation(seed: u64, size: usize) -> PermutationMatrix {
    let mut perm: Vec<usize> = (0..size).collect();
    RngStream::new(seed, 0xB).shuffle(&mut perm);
    PermutationMatrix { perm }
}

/// Row-major flatten of `scene`, then `B·x`.
pub fn entangle(scene: &SceneDescription, b: &PermutationMatrix) -> Result<Vec<f64>> {
    b.apply(scene.flatten())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenegen::{generate_scene, GeneratorParams, RelationGraph, SceneClass, NUM_TYPES};

    fn scene() -> SceneDescription {
        let g = RelationGraph::from_edges(NUM_TYPES, &[(0, 1)]).unwrap();
        let c = SceneClass::new(0, g, RelationGraph::empty(NUM_TYPES));
        generate_scene(&c, &GeneratorParams::default(), &mut RngStream::new(0, 0)).unwrap()
    }

    #[test]
    fn identity_is_flatten() {
        let s = scene();
        assert_eq!(entangle(&s, &PermutationMatrix::identity(160)).unwrap(), s.flatten());
    }

    #[test]
    fn inverse_recovers_and_preserves_multiset() {
        let s = scene();
        let b = make_permutation(17, 160);
        let v = entangle(&s, &b).unwrap();
        assert_eq!(b.inverse().apply(&v).unwrap(), s.flatten());
        let mut a: Vec<u64> = v.iter().map(|x| x.to_bits()).collect();
        let mut e: Vec<u64> = s.flatten().iter().map(|x| x.to_bits()).collect();
        a.sort_unstable();
        e.sort_unstable();
        assert_eq!(a, e);
    }

    #[test]
    fn dense_matrix_agrees_with_index_map() {
        let b = make_permutation(3, 12);
        let x: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let dense = b.to_matrix().matmul(&Matrix::from_vec(12, 1, x.clone()).unwrap()).unwrap();
        assert_eq!(dense.values(), b.apply(&x).unwrap().as_slice());
        assert_eq!(b.to_matrix().transpose(), b.inverse().to_matrix());
    }

    #[test]
    fn length_mismatch() {
        assert!(make_permutation(1, 160).apply(&[0.0; 10]).is_err());
        assert!(PermutationMatrix::from_indices(vec![0, 0]).is_err());
    }
}
