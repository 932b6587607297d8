//! Connection functions on the Lie algebra.
//!
//! A left-invariant connection on the group corresponds one-to-one with a
//! bilinear map `alpha` on the algebra; we store `alpha` as a dense rank-3
//! tensor. Only skew-symmetric connection functions unlock the logarithm
//! reduction used by the group Ito integral, so skewness is a first-class
//! query here.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::group::{AlgebraVector, GroupDescriptor};
use crate::tensor::Tensor3;

/// Tolerance for the exact skew-symmetry check.
pub const SKEW_TOL: f64 = 1e-14;

/// Constant element of the dual algebra.
#[derive(Clone, Debug)]
pub struct Covector {
    group: Arc<GroupDescriptor>,
    components: DVector<f64>,
}

impl Covector {
    pub fn new(group: &Arc<GroupDescriptor>, components: DVector<f64>) -> Result<Self> {
        if components.len() != group.dim() {
            return Err(Error::DimensionMismatch {
                expected: group.dim(),
                got: components.len(),
            });
        }
        Ok(Covector {
            group: Arc::clone(group),
            components,
        })
    }

    /// The coordinate covector `dx^i`.
    pub fn basis(group: &Arc<GroupDescriptor>, i: usize) -> Result<Self> {
        if i >= group.dim() {
            return Err(Error::IndexOutOfRange {
                index: i,
                dim: group.dim(),
            });
        }
        let mut components = DVector::zeros(group.dim());
        components[i] = 1.0;
        Ok(Covector {
            group: Arc::clone(group),
            components,
        })
    }

    pub fn group(&self) -> &Arc<GroupDescriptor> {
        &self.group
    }

    pub fn components(&self) -> &DVector<f64> {
        &self.components
    }

    pub fn apply(&self, x: &AlgebraVector) -> Result<f64> {
        self.group.ensure_same(x.group())?;
        Ok(self.components.dot(x.coords()))
    }

    #[inline]
    pub fn apply_coords(&self, coords: &DVector<f64>) -> f64 {
        self.components.dot(coords)
    }
}

/// Bilinear connection function `alpha` as a rank-3 coefficient tensor,
/// entry `(i, j, k)` being the k-th coordinate of `alpha(E_i, E_j)`.
#[derive(Clone, Debug)]
pub struct ConnectionFunction {
    group: Arc<GroupDescriptor>,
    coeffs: Tensor3,
}

impl ConnectionFunction {
    /// The zero connection function.
    pub fn zero(group: &Arc<GroupDescriptor>) -> Self {
        ConnectionFunction {
            group: Arc::clone(group),
            coeffs: Tensor3::zeros(group.dim()),
        }
    }

    /// `alpha = c [.,.]`, the family containing both the flat case (c = 0)
    /// and the Levi-Civita connection of a bi-invariant metric (c = 1/2).
    pub fn bracket_multiple(group: &Arc<GroupDescriptor>, c: f64) -> Self {
        ConnectionFunction {
            group: Arc::clone(group),
            coeffs: group.structure_constants().scaled(c),
        }
    }

    /// Wraps an explicit coefficient tensor.
    pub fn explicit(group: &Arc<GroupDescriptor>, coeffs: Tensor3) -> Result<Self> {
        if coeffs.dim() != group.dim() {
            return Err(Error::DimensionMismatch {
                expected: group.dim(),
                got: coeffs.dim(),
            });
        }
        Ok(ConnectionFunction {
            group: Arc::clone(group),
            coeffs,
        })
    }

    /// Levi-Civita connection of the bi-invariant metric: `alpha = [.,.]/2`.
    pub fn levi_civita_biinvariant(group: &Arc<GroupDescriptor>) -> Result<Self> {
        if !group.admits_biinvariant_metric() {
            return Err(Error::NoBiinvariantMetric(group.name().to_string()));
        }
        Ok(Self::bracket_multiple(group, 0.5))
    }

    pub fn group(&self) -> &Arc<GroupDescriptor> {
        &self.group
    }

    pub fn coeffs(&self) -> &Tensor3 {
        &self.coeffs
    }

    /// Evaluates `alpha(X, Y)`.
    pub fn evaluate(&self, x: &AlgebraVector, y: &AlgebraVector) -> Result<AlgebraVector> {
        self.group.ensure_same(x.group())?;
        self.group.ensure_same(y.group())?;
        let coords = self.evaluate_coords(x.coords(), y.coords());
        self.group.algebra_vector(coords)
    }

    pub fn evaluate_coords(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let n = self.group.dim();
        let mut out = DVector::zeros(n);
        for i in 0..n {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                if y[j] == 0.0 {
                    continue;
                }
                let xy = x[i] * y[j];
                for k in 0..n {
                    out[k] += self.coeffs.get(i, j, k) * xy;
                }
            }
        }
        out
    }

    /// True iff the tensor is antisymmetric in its two arguments.
    pub fn is_skew_symmetric(&self) -> bool {
        self.coeffs.antisymmetry_defect() <= SKEW_TOL
    }

    /// Contraction `C_ij = theta(alpha(E_i, E_j))`, the constant part of
    /// the dual-connection derivative of a constant covector.
    pub fn contract_covector(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let n = self.group.dim();
        DMatrix::from_fn(n, n, |i, j| {
            let mut sum = 0.0;
            for k in 0..n {
                sum += theta[k] * self.coeffs.get(i, j, k);
            }
            sum
        })
    }

    /// Symmetric part of the dual-connection derivative of the constant
    /// covector `theta`: `S_ij = -theta(alpha(E_i,E_j) + alpha(E_j,E_i))/2`.
    /// Identically zero for skew-symmetric `alpha`.
    pub fn dual_connection_symmetric_part(&self, theta: &Covector) -> Result<DMatrix<f64>> {
        self.group.ensure_same(theta.group())?;
        let c = self.contract_covector(theta.components());
        let n = self.group.dim();
        Ok(DMatrix::from_fn(n, n, |i, j| {
            -0.5 * (c[(i, j)] + c[(j, i)])
        }))
    }
}

/// Infinitesimal Ad-invariance of the descriptor metric:
/// `<[Z,X],Y> + <X,[Z,Y]> = 0` on all basis triples.
pub fn check_ad_invariance(group: &GroupDescriptor) -> bool {
    let n = group.dim();
    let metric = group.metric();
    let c = group.structure_constants();
    for z in 0..n {
        for x in 0..n {
            for y in 0..n {
                let mut sum = 0.0;
                for k in 0..n {
                    sum += c.get(z, x, k) * metric[(k, y)] + c.get(z, y, k) * metric[(x, k)];
                }
                if sum.abs() > 1e-12 {
                    return false;
                }
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::registry;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    #[test]
    fn bracket_multiple_matches_scaled_bracket() {
        let so3 = registry::group("so3").unwrap();
        let alpha = ConnectionFunction::bracket_multiple(&so3, 0.5);
        let e1 = so3.basis_vector(0).unwrap();
        let e2 = so3.basis_vector(1).unwrap();
        let half_bracket = so3.bracket(&e1, &e2).unwrap().scale(0.5);
        let value = alpha.evaluate(&e1, &e2).unwrap();
        assert_relative_eq!(value.coords(), half_bracket.coords(), epsilon = 1e-15);
        // alpha(E1, E2) = E3 / 2 on so(3).
        assert_relative_eq!(value.coords(), &dvector![0.0, 0.0, 0.5], epsilon = 1e-15);
    }

    #[test]
    fn skew_symmetry_detection() {
        let so3 = registry::group("so3").unwrap();
        let alpha = ConnectionFunction::bracket_multiple(&so3, 0.5);
        assert!(alpha.is_skew_symmetric());
        assert!(ConnectionFunction::zero(&so3).is_skew_symmetric());

        let mut coeffs = so3.structure_constants().scaled(0.5);
        coeffs.set(0, 0, 1, 1.0); // alpha(E1, E1) = E2
        let broken = ConnectionFunction::explicit(&so3, coeffs).unwrap();
        assert!(!broken.is_skew_symmetric());
    }

    #[test]
    fn skew_alpha_annihilates_diagonal() {
        let so3 = registry::group("so3").unwrap();
        let alpha = ConnectionFunction::bracket_multiple(&so3, 0.5);
        let x = so3
            .algebra_vector(dvector![0.3, -1.2, 0.7])
            .unwrap();
        let value = alpha.evaluate(&x, &x).unwrap();
        assert_eq!(value.norm(), 0.0);
    }

    #[test]
    fn levi_civita_requires_biinvariant_metric() {
        let heis = registry::group("heis3").unwrap();
        assert!(matches!(
            ConnectionFunction::levi_civita_biinvariant(&heis),
            Err(Error::NoBiinvariantMetric(_))
        ));
        let so3 = registry::group("so3").unwrap();
        let lc = ConnectionFunction::levi_civita_biinvariant(&so3).unwrap();
        assert!(lc.is_skew_symmetric());
    }

    #[test]
    fn levi_civita_is_torsion_free() {
        // alpha(X,Y) - alpha(Y,X) - [X,Y] = 0 for alpha = bracket/2.
        let so3 = registry::group("so3").unwrap();
        let alpha = ConnectionFunction::levi_civita_biinvariant(&so3).unwrap();
        let x = so3.algebra_vector(dvector![0.4, 0.1, -0.9]).unwrap();
        let y = so3.algebra_vector(dvector![-1.1, 0.6, 0.2]).unwrap();
        let torsion = alpha
            .evaluate(&x, &y)
            .unwrap()
            .sub(&alpha.evaluate(&y, &x).unwrap())
            .unwrap()
            .sub(&so3.bracket(&x, &y).unwrap())
            .unwrap();
        assert!(torsion.norm() < 1e-14);
    }

    #[test]
    fn dual_symmetric_part_vanishes_for_skew_alpha() {
        let so3 = registry::group("so3").unwrap();
        let alpha = ConnectionFunction::bracket_multiple(&so3, 0.5);
        let theta = Covector::new(&so3, dvector![0.3, -2.0, 1.4]).unwrap();
        let s = alpha.dual_connection_symmetric_part(&theta).unwrap();
        assert_eq!(s.norm(), 0.0);
    }

    #[test]
    fn dual_symmetric_part_hand_value_on_r2() {
        // Symmetrized product on abelian r2 with alpha(E1,E1) = E1 and
        // theta = dx^1 gives S_11 = -1.
        let r2 = registry::group("r2").unwrap();
        let mut coeffs = Tensor3::zeros(2);
        coeffs.set(0, 0, 0, 1.0);
        let alpha = ConnectionFunction::explicit(&r2, coeffs).unwrap();
        let theta = Covector::basis(&r2, 0).unwrap();
        let s = alpha.dual_connection_symmetric_part(&theta).unwrap();
        assert_eq!(s[(0, 0)], -1.0);
        assert_eq!(s[(0, 1)], 0.0);
        assert_eq!(s[(1, 1)], 0.0);
    }

    #[test]
    fn zero_alpha_symmetric_part_is_zero() {
        let r2 = registry::group("r2").unwrap();
        let alpha = ConnectionFunction::zero(&r2);
        let theta = Covector::new(&r2, dvector![2.0, -3.0]).unwrap();
        assert_eq!(
            alpha.dual_connection_symmetric_part(&theta).unwrap().norm(),
            0.0
        );
    }

    #[test]
    fn levi_civita_is_metric_compatible() {
        // <alpha(Z,X), Y> + <X, alpha(Z,Y)> = 0 on all basis triples when
        // the metric is Ad-invariant.
        for name in ["so3", "su2", "r2", "torus2"] {
            let g = registry::group(name).unwrap();
            let alpha = ConnectionFunction::levi_civita_biinvariant(&g).unwrap();
            let metric = g.metric();
            let n = g.dim();
            for z in 0..n {
                for x in 0..n {
                    for y in 0..n {
                        let ez = g.basis_vector(z).unwrap();
                        let ex = g.basis_vector(x).unwrap();
                        let ey = g.basis_vector(y).unwrap();
                        let azx = alpha.evaluate(&ez, &ex).unwrap();
                        let azy = alpha.evaluate(&ez, &ey).unwrap();
                        let lhs = azx.coords().dot(&(metric * ey.coords()))
                            + ex.coords().dot(&(metric * azy.coords()));
                        assert!(lhs.abs() < 1e-13, "{name} triple ({z},{x},{y}): {lhs}");
                    }
                }
            }
        }
    }

    #[test]
    fn ad_invariance_matches_flags() {
        for g in registry::all_groups() {
            assert_eq!(
                check_ad_invariance(&g),
                g.admits_biinvariant_metric(),
                "{} flag disagrees with contraction",
                g.name()
            );
        }
    }

    #[test]
    fn evaluate_is_bilinear() {
        let so3 = registry::group("so3").unwrap();
        let alpha = ConnectionFunction::bracket_multiple(&so3, 0.5);
        let x1 = so3.algebra_vector(dvector![0.2, -0.5, 0.9]).unwrap();
        let x2 = so3.algebra_vector(dvector![1.3, 0.4, -0.8]).unwrap();
        let y = so3.algebra_vector(dvector![-0.6, 0.7, 0.1]).unwrap();
        let (a, b) = (0.37, -1.21);
        let combo = alpha
            .evaluate(&x1.scale(a).add(&x2.scale(b)).unwrap(), &y)
            .unwrap();
        let split = alpha
            .evaluate(&x1, &y)
            .unwrap()
            .scale(a)
            .add(&alpha.evaluate(&x2, &y).unwrap().scale(b))
            .unwrap();
        assert_relative_eq!(combo.coords(), split.coords(), epsilon = 1e-13);
    }
}
