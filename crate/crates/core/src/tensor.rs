//! Dense rank-3 coefficient tensors.
//!
//! Structure constants and connection functions are both stored as dense
//! `n x n x n` tensors with the convention that entry `(i, j, k)` is the
//! k-th coordinate of the image of the basis pair `(E_i, E_j)`. Algebra
//! dimensions never exceed 6 here, so density costs nothing.

/// Dense rank-3 tensor over a fixed algebra dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    dim: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dim: usize) -> Self {
        Tensor3 {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Tensor3::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    t.set(i, j, k, f(i, j, k));
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.dim + j) * self.dim + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        self.data[(i * self.dim + j) * self.dim + k] = value;
    }

    /// Scale every entry, returning a new tensor.
    pub fn scaled(&self, factor: f64) -> Self {
        Tensor3 {
            dim: self.dim,
            data: self.data.iter().map(|v| factor * v).collect(),
        }
    }

    /// Maximum absolute deviation from antisymmetry in the first two slots.
    pub fn antisymmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                for k in 0..self.dim {
                    worst = worst.max((self.get(i, j, k) + self.get(j, i, k)).abs());
                }
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_round_trip() {
        let mut t = Tensor3::zeros(3);
        t.set(0, 1, 2, 1.5);
        t.set(1, 0, 2, -1.5);
        assert_eq!(t.get(0, 1, 2), 1.5);
        assert_eq!(t.get(2, 1, 0), 0.0);
        assert_eq!(t.antisymmetry_defect(), 0.0);
        t.set(0, 0, 1, 0.25);
        assert_eq!(t.antisymmetry_defect(), 0.5);
    }
}
