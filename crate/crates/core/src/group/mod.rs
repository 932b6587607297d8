//! Matrix Lie groups and their algebras.
//!
//! A [`GroupDescriptor`] bundles a basis of the Lie algebra (as embedded
//! matrices), the structure constants, a scalar product on the algebra and
//! the closed-form kernels of the chosen matrix realization. Descriptors
//! are immutable after construction and freely shareable across threads;
//! all operations are pure.

mod forms;
pub mod registry;
#[cfg(test)]
mod tests;

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

pub use forms::{GroupForm, LogConditioning};

use crate::error::{Error, Result};
use crate::tensor::Tensor3;

/// Tolerance on group membership residuals after projection.
pub const MEMBERSHIP_TOL: f64 = 1e-8;
/// Tolerance on the span residual of adjoint images.
const ADJOINT_SPAN_TOL: f64 = 1e-9;
/// Tolerance on the span residual of left-trivialized tangent vectors.
const TANGENCY_TOL: f64 = 1e-8;

/// A matrix Lie group together with its algebra data.
#[derive(Debug)]
pub struct GroupDescriptor {
    name: String,
    dim: usize,
    embed_dim: usize,
    basis: Vec<DMatrix<f64>>,
    structure: Tensor3,
    metric: DMatrix<f64>,
    admits_biinvariant_metric: bool,
    injectivity_radius: f64,
    form: GroupForm,
    // caches
    gram: Cholesky<f64, Dyn>,
    metric_inverse: DMatrix<f64>,
    /// Columns are the coordinates of a metric-orthonormal basis.
    ortho_frame: DMatrix<f64>,
    /// Maps basis coordinates to metric-orthonormal coordinates.
    ortho_dual: DMatrix<f64>,
}

impl GroupDescriptor {
    /// Assembles and validates a descriptor. The basis must be linearly
    /// independent and the metric symmetric positive-definite.
    pub fn new(
        name: impl Into<String>,
        basis: Vec<DMatrix<f64>>,
        structure: Tensor3,
        metric: DMatrix<f64>,
        admits_biinvariant_metric: bool,
        injectivity_radius: f64,
        form: GroupForm,
    ) -> Result<Arc<Self>> {
        let name = name.into();
        let dim = basis.len();
        let embed_dim = form.embed_dim();
        if dim != form.algebra_dim() {
            return Err(Error::DimensionMismatch {
                expected: form.algebra_dim(),
                got: dim,
            });
        }
        for b in &basis {
            if b.nrows() != embed_dim || b.ncols() != embed_dim {
                return Err(Error::DimensionMismatch {
                    expected: embed_dim,
                    got: b.nrows(),
                });
            }
        }
        if structure.dim() != dim || metric.nrows() != dim || metric.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: structure.dim(),
            });
        }
        if (&metric - metric.transpose()).norm() > 1e-14 {
            return Err(Error::DegenerateMetric(format!("{name}: metric not symmetric")));
        }
        let metric_chol = Cholesky::new(metric.clone())
            .ok_or_else(|| Error::DegenerateMetric(format!("{name}: metric not positive-definite")))?;
        let metric_inverse = metric_chol.inverse();
        let l_t = metric_chol.l().transpose();
        let ortho_frame = l_t
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::DegenerateMetric(format!("{name}: Cholesky factor singular")))?;
        let ortho_dual = l_t;

        let mut gram_matrix = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                gram_matrix[(i, j)] = basis[i].dot(&basis[j]);
            }
        }
        let gram = Cholesky::new(gram_matrix)
            .ok_or_else(|| Error::DegenerateMetric(format!("{name}: basis not linearly independent")))?;

        Ok(Arc::new(GroupDescriptor {
            name,
            dim,
            embed_dim,
            basis,
            structure,
            metric,
            admits_biinvariant_metric,
            injectivity_radius,
            form,
            gram,
            metric_inverse,
            ortho_frame,
            ortho_dual,
        }))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn basis(&self) -> &[DMatrix<f64>] {
        &self.basis
    }

    pub fn structure_constants(&self) -> &Tensor3 {
        &self.structure
    }

    pub fn metric(&self) -> &DMatrix<f64> {
        &self.metric
    }

    pub fn metric_inverse(&self) -> &DMatrix<f64> {
        &self.metric_inverse
    }

    pub fn admits_biinvariant_metric(&self) -> bool {
        self.admits_biinvariant_metric
    }

    pub fn injectivity_radius(&self) -> f64 {
        self.injectivity_radius
    }

    pub fn form(&self) -> GroupForm {
        self.form
    }

    /// Coordinates of a metric-orthonormal frame, one column per frame
    /// vector. Used by samplers and the covariation tests.
    pub fn ortho_frame(&self) -> &DMatrix<f64> {
        &self.ortho_frame
    }

    /// Change of coordinates from the stored basis to the orthonormal frame.
    pub fn ortho_dual(&self) -> &DMatrix<f64> {
        &self.ortho_dual
    }

    pub(crate) fn ensure_same(&self, other: &GroupDescriptor) -> Result<()> {
        if self.name != other.name {
            return Err(Error::DescriptorMismatch {
                left: self.name.clone(),
                right: other.name.clone(),
            });
        }
        Ok(())
    }

    // ----- algebra vectors -------------------------------------------------

    pub fn zero_vector(self: &Arc<Self>) -> AlgebraVector {
        AlgebraVector {
            group: Arc::clone(self),
            coords: DVector::zeros(self.dim),
        }
    }

    pub fn basis_vector(self: &Arc<Self>, i: usize) -> Result<AlgebraVector> {
        if i >= self.dim {
            return Err(Error::IndexOutOfRange {
                index: i,
                dim: self.dim,
            });
        }
        let mut coords = DVector::zeros(self.dim);
        coords[i] = 1.0;
        Ok(AlgebraVector {
            group: Arc::clone(self),
            coords,
        })
    }

    pub fn algebra_vector(self: &Arc<Self>, coords: DVector<f64>) -> Result<AlgebraVector> {
        if coords.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: coords.len(),
            });
        }
        Ok(AlgebraVector {
            group: Arc::clone(self),
            coords,
        })
    }

    /// Embeds coordinates as the matrix `sum_i x_i E_i`.
    pub fn hat(&self, coords: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.embed_dim, self.embed_dim);
        for (i, b) in self.basis.iter().enumerate() {
            m += b * coords[i];
        }
        m
    }

    /// Least-squares coordinates of `m` in the basis together with the
    /// off-span residual in Frobenius norm.
    pub fn coordinates_of(&self, m: &DMatrix<f64>) -> (DVector<f64>, f64) {
        let rhs = DVector::from_fn(self.dim, |i, _| self.basis[i].dot(m));
        let coords = self.gram.solve(&rhs);
        let residual = (m - self.hat(&coords)).norm();
        (coords, residual)
    }

    // ----- group elements --------------------------------------------------

    pub fn identity_element(self: &Arc<Self>) -> GroupElement {
        GroupElement {
            group: Arc::clone(self),
            matrix: DMatrix::identity(self.embed_dim, self.embed_dim),
        }
    }

    /// Wraps a matrix as a group element, enforcing the membership
    /// residual bound.
    pub fn element(self: &Arc<Self>, matrix: DMatrix<f64>) -> Result<GroupElement> {
        if matrix.nrows() != self.embed_dim || matrix.ncols() != self.embed_dim {
            return Err(Error::DimensionMismatch {
                expected: self.embed_dim,
                got: matrix.nrows(),
            });
        }
        let residual = forms::membership_residual(self.form, &matrix);
        if residual > MEMBERSHIP_TOL {
            return Err(Error::NotOnGroup {
                group: self.name.clone(),
                residual,
            });
        }
        Ok(GroupElement {
            group: Arc::clone(self),
            matrix,
        })
    }

    pub fn membership_residual(&self, matrix: &DMatrix<f64>) -> f64 {
        forms::membership_residual(self.form, matrix)
    }

    // ----- operations ------------------------------------------------------

    /// Lie bracket through the structure constants.
    pub fn bracket(&self, x: &AlgebraVector, y: &AlgebraVector) -> Result<AlgebraVector> {
        self.ensure_same(&x.group)?;
        self.ensure_same(&y.group)?;
        Ok(AlgebraVector {
            group: Arc::clone(&x.group),
            coords: self.bracket_coords(&x.coords, &y.coords),
        })
    }

    pub fn bracket_coords(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for i in 0..self.dim {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..self.dim {
                if y[j] == 0.0 {
                    continue;
                }
                let xy = x[i] * y[j];
                for k in 0..self.dim {
                    out[k] += self.structure.get(i, j, k) * xy;
                }
            }
        }
        out
    }

    /// Group exponential of an algebra vector.
    pub fn exp(self: &Arc<Self>, x: &AlgebraVector) -> Result<GroupElement> {
        self.ensure_same(&x.group)?;
        Ok(GroupElement {
            group: Arc::clone(self),
            matrix: self.exp_matrix(&x.coords)?,
        })
    }

    pub fn exp_matrix(&self, coords: &DVector<f64>) -> Result<DMatrix<f64>> {
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("group exponential input"));
        }
        Ok(forms::exp_coords(self.form, coords))
    }

    /// Principal-branch group logarithm. Fails outside the injectivity
    /// radius; see [`GroupDescriptor::log_conditioned`] for the
    /// conditioning flag.
    pub fn log(self: &Arc<Self>, g: &GroupElement) -> Result<AlgebraVector> {
        Ok(self.log_conditioned(g)?.0)
    }

    pub fn log_conditioned(
        self: &Arc<Self>,
        g: &GroupElement,
    ) -> Result<(AlgebraVector, LogConditioning)> {
        self.ensure_same(&g.group)?;
        let (coords, conditioning) = self.log_matrix(&g.matrix)?;
        Ok((
            AlgebraVector {
                group: Arc::clone(self),
                coords,
            },
            conditioning,
        ))
    }

    pub fn log_matrix(&self, g: &DMatrix<f64>) -> Result<(DVector<f64>, LogConditioning)> {
        forms::log_matrix(self.form, g, self.injectivity_radius, &self.name)
    }

    /// Adjoint action `Ad_g X` expressed in the basis.
    pub fn adjoint(self: &Arc<Self>, g: &GroupElement, x: &AlgebraVector) -> Result<AlgebraVector> {
        self.ensure_same(&g.group)?;
        self.ensure_same(&x.group)?;
        let conjugated = &g.matrix * self.hat(&x.coords) * forms::inverse_matrix(self.form, &g.matrix);
        let (coords, residual) = self.coordinates_of(&conjugated);
        if residual > ADJOINT_SPAN_TOL {
            return Err(Error::NotInAlgebraSpan { residual });
        }
        Ok(AlgebraVector {
            group: Arc::clone(self),
            coords,
        })
    }

    /// Maurer-Cartan form: coordinates of `g^{-1} v` for a tangent matrix
    /// `v` at `g`.
    pub fn maurer_cartan(
        self: &Arc<Self>,
        g: &GroupElement,
        v: &DMatrix<f64>,
    ) -> Result<AlgebraVector> {
        self.ensure_same(&g.group)?;
        if v.nrows() != self.embed_dim || v.ncols() != self.embed_dim {
            return Err(Error::DimensionMismatch {
                expected: self.embed_dim,
                got: v.nrows(),
            });
        }
        let pulled = forms::inverse_matrix(self.form, &g.matrix) * v;
        let (coords, residual) = self.coordinates_of(&pulled);
        if residual > TANGENCY_TOL * (1.0 + v.norm()) {
            return Err(Error::NotTangent { residual });
        }
        Ok(AlgebraVector {
            group: Arc::clone(self),
            coords,
        })
    }

    /// Nearest group element to `m` (polar projection, quaternion
    /// renormalization or structural repair depending on the realization).
    pub fn project(self: &Arc<Self>, m: &DMatrix<f64>) -> Result<GroupElement> {
        Ok(GroupElement {
            group: Arc::clone(self),
            matrix: self.project_matrix(m)?,
        })
    }

    pub fn project_matrix(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if m.nrows() != self.embed_dim || m.ncols() != self.embed_dim {
            return Err(Error::DimensionMismatch {
                expected: self.embed_dim,
                got: m.nrows(),
            });
        }
        forms::project_matrix(self.form, m, &self.name)
    }

    pub fn inverse_matrix(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        forms::inverse_matrix(self.form, g)
    }

    /// Logarithm of the multiplicative increment `prev^{-1} next`.
    pub fn log_increment(
        &self,
        prev: &DMatrix<f64>,
        next: &DMatrix<f64>,
    ) -> Result<DVector<f64>> {
        let increment = forms::inverse_matrix(self.form, prev) * next;
        Ok(self.log_matrix(&increment)?.0)
    }

    /// Full invariant battery: antisymmetry and Jacobi identity of the
    /// structure constants, agreement with matrix commutators, metric
    /// symmetry/positivity and (when flagged) infinitesimal Ad-invariance.
    pub fn validate(&self) -> Result<()> {
        let n = self.dim;
        if self.structure.antisymmetry_defect() > 1e-12 {
            return Err(Error::Precondition(format!(
                "{}: structure constants not antisymmetric",
                self.name
            )));
        }
        // Jacobi identity by direct summation.
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for m in 0..n {
                        let mut sum = 0.0;
                        for l in 0..n {
                            sum += self.structure.get(i, j, l) * self.structure.get(l, k, m)
                                + self.structure.get(j, k, l) * self.structure.get(l, i, m)
                                + self.structure.get(k, i, l) * self.structure.get(l, j, m);
                        }
                        if sum.abs() > 1e-12 {
                            return Err(Error::Precondition(format!(
                                "{}: Jacobi identity fails at ({i},{j},{k},{m})",
                                self.name
                            )));
                        }
                    }
                }
            }
        }
        // Structure constants must reproduce matrix commutators.
        for i in 0..n {
            for j in 0..n {
                let comm = &self.basis[i] * &self.basis[j] - &self.basis[j] * &self.basis[i];
                let (coords, residual) = self.coordinates_of(&comm);
                if residual > 1e-12 {
                    return Err(Error::Precondition(format!(
                        "{}: commutator [E{i},E{j}] leaves the basis span",
                        self.name
                    )));
                }
                for k in 0..n {
                    if (coords[k] - self.structure.get(i, j, k)).abs() > 1e-12 {
                        return Err(Error::Precondition(format!(
                            "{}: structure constant c^{k}_{{{i}{j}}} disagrees with commutator",
                            self.name
                        )));
                    }
                }
            }
        }
        if self.admits_biinvariant_metric && !crate::connection::check_ad_invariance(self) {
            return Err(Error::Precondition(format!(
                "{}: metric flagged bi-invariant but not Ad-invariant",
                self.name
            )));
        }
        Ok(())
    }
}

/// Element of the Lie algebra in basis coordinates.
#[derive(Clone, Debug)]
pub struct AlgebraVector {
    group: Arc<GroupDescriptor>,
    coords: DVector<f64>,
}

impl AlgebraVector {
    pub fn group(&self) -> &Arc<GroupDescriptor> {
        &self.group
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn into_coords(self) -> DVector<f64> {
        self.coords
    }

    /// Euclidean norm of the coordinate vector.
    pub fn norm(&self) -> f64 {
        self.coords.norm()
    }

    /// Norm induced by the descriptor metric.
    pub fn metric_norm(&self) -> f64 {
        (self.coords.dot(&(self.group.metric() * &self.coords))).sqrt()
    }

    pub fn scale(&self, factor: f64) -> AlgebraVector {
        AlgebraVector {
            group: Arc::clone(&self.group),
            coords: &self.coords * factor,
        }
    }

    pub fn add(&self, other: &AlgebraVector) -> Result<AlgebraVector> {
        self.group.ensure_same(&other.group)?;
        Ok(AlgebraVector {
            group: Arc::clone(&self.group),
            coords: &self.coords + &other.coords,
        })
    }

    pub fn sub(&self, other: &AlgebraVector) -> Result<AlgebraVector> {
        self.group.ensure_same(&other.group)?;
        Ok(AlgebraVector {
            group: Arc::clone(&self.group),
            coords: &self.coords - &other.coords,
        })
    }
}

/// Element of the group as an embedded matrix.
#[derive(Clone, Debug)]
pub struct GroupElement {
    group: Arc<GroupDescriptor>,
    matrix: DMatrix<f64>,
}

impl GroupElement {
    pub fn group(&self) -> &Arc<GroupDescriptor> {
        &self.group
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn compose(&self, other: &GroupElement) -> Result<GroupElement> {
        self.group.ensure_same(&other.group)?;
        Ok(GroupElement {
            group: Arc::clone(&self.group),
            matrix: &self.matrix * &other.matrix,
        })
    }

    pub fn inverse(&self) -> GroupElement {
        GroupElement {
            group: Arc::clone(&self.group),
            matrix: self.group.inverse_matrix(&self.matrix),
        }
    }
}
