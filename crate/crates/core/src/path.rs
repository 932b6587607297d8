//! Discrete-time paths on the algebra, the group and the real line.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::group::GroupDescriptor;

/// Path in the Lie algebra: one coordinate vector per grid point.
#[derive(Clone, Debug)]
pub struct AlgebraPath {
    group: Arc<GroupDescriptor>,
    grid: TimeGrid,
    values: Vec<DVector<f64>>,
}

impl AlgebraPath {
    pub fn new(
        group: Arc<GroupDescriptor>,
        grid: TimeGrid,
        values: Vec<DVector<f64>>,
    ) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        for v in &values {
            if v.len() != group.dim() {
                return Err(Error::DimensionMismatch {
                    expected: group.dim(),
                    got: v.len(),
                });
            }
        }
        Ok(AlgebraPath { group, grid, values })
    }

    pub fn group(&self) -> &Arc<GroupDescriptor> {
        &self.group
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    pub fn value(&self, k: usize) -> &DVector<f64> {
        &self.values[k]
    }

    pub fn terminal(&self) -> &DVector<f64> {
        self.values.last().expect("grid guarantees at least 3 values")
    }

    /// One-step increments `Y_{k+1} - Y_k`.
    pub fn increments(&self) -> impl Iterator<Item = DVector<f64>> + '_ {
        self.values.windows(2).map(|w| &w[1] - &w[0])
    }

    pub fn starts_at_zero(&self) -> bool {
        self.values[0].iter().all(|v| *v == 0.0)
    }

    /// Coordinates of value `k` in the metric-orthonormal frame.
    pub fn orthonormal_value(&self, k: usize) -> DVector<f64> {
        self.group.ortho_dual() * &self.values[k]
    }
}

/// Path on the group: one embedded matrix per grid point.
#[derive(Clone, Debug)]
pub struct GroupPath {
    group: Arc<GroupDescriptor>,
    grid: TimeGrid,
    values: Vec<DMatrix<f64>>,
}

impl GroupPath {
    /// Wraps matrices as a group path, enforcing the membership residual
    /// bound on every element.
    pub fn new(
        group: Arc<GroupDescriptor>,
        grid: TimeGrid,
        values: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        for m in &values {
            let residual = group.membership_residual(m);
            if residual > crate::group::MEMBERSHIP_TOL {
                return Err(Error::NotOnGroup {
                    group: group.name().to_string(),
                    residual,
                });
            }
        }
        Ok(GroupPath { group, grid, values })
    }

    /// Wraps matrices without membership checks; callers guarantee the
    /// values are already on the group (samplers project every step).
    pub(crate) fn new_unchecked(
        group: Arc<GroupDescriptor>,
        grid: TimeGrid,
        values: Vec<DMatrix<f64>>,
    ) -> Self {
        GroupPath { group, grid, values }
    }

    pub fn group(&self) -> &Arc<GroupDescriptor> {
        &self.group
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[DMatrix<f64>] {
        &self.values
    }

    pub fn value(&self, k: usize) -> &DMatrix<f64> {
        &self.values[k]
    }

    pub fn max_membership_residual(&self) -> f64 {
        self.values
            .iter()
            .map(|m| self.group.membership_residual(m))
            .fold(0.0, f64::max)
    }
}

/// Real-valued path, the codomain of all integral estimators. Starts at 0.
#[derive(Clone, Debug)]
pub struct RealPath {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl RealPath {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(RealPath { grid, values })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("grid guarantees at least 3 values")
    }

    /// Value at the grid point closest to time `t`.
    pub fn value_at_time(&self, t: f64) -> Result<f64> {
        Ok(self.values[self.grid.index_of(t)?])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::registry;
    use nalgebra::dvector;

    #[test]
    fn algebra_path_checks_lengths() {
        let r2 = registry::group("r2").unwrap();
        let grid = TimeGrid::new(1.0, 2).unwrap();
        let ok = AlgebraPath::new(
            Arc::clone(&r2),
            grid,
            vec![dvector![0.0, 0.0], dvector![0.1, 0.2], dvector![0.3, 0.4]],
        );
        assert!(ok.is_ok());
        let short = AlgebraPath::new(Arc::clone(&r2), grid, vec![dvector![0.0, 0.0]]);
        assert!(short.is_err());
        let wrong_dim = AlgebraPath::new(
            r2,
            grid,
            vec![dvector![0.0], dvector![0.1], dvector![0.3]],
        );
        assert!(wrong_dim.is_err());
    }

    #[test]
    fn group_path_enforces_membership() {
        let so3 = registry::group("so3").unwrap();
        let grid = TimeGrid::new(1.0, 2).unwrap();
        let eye = nalgebra::DMatrix::identity(3, 3);
        let ok = GroupPath::new(
            Arc::clone(&so3),
            grid,
            vec![eye.clone(), eye.clone(), eye.clone()],
        );
        assert!(ok.is_ok());
        let bad = GroupPath::new(so3, grid, vec![eye.clone(), eye.clone(), eye * 1.01]);
        assert!(bad.is_err());
    }
}
