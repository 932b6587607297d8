//! Discrete integral estimators along algebra paths.
//!
//! Conventions: Stratonovich integrals evaluate the covector at the
//! midpoint of each step, Ito-type quadratic evaluations use the left
//! point, and the Ito integral is defined through the conversion formula
//! `ito = stratonovich - quadratic(grad theta) / 2`, with the
//! dual-connection derivative `(grad theta)_ij = d_i theta_j -
//! theta(alpha(E_i, E_j))`. The quadratic estimator sums symmetrized
//! pairs, so antisymmetric integrands vanish exactly.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::connection::{ConnectionFunction, Covector};
use crate::error::{Error, Result};
use crate::group::GroupDescriptor;
use crate::path::{AlgebraPath, GroupPath, RealPath};
use crate::sampler;

type VectorField = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
type MatrixField = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// Covector field on the algebra: `x -> theta(x)` componentwise, with an
/// optional analytic Jacobian `(i, j) -> d_i theta_j`. Without one,
/// derivatives fall back to central differences.
#[derive(Clone)]
pub struct CovectorField {
    group: Arc<GroupDescriptor>,
    components: VectorField,
    jacobian: Option<MatrixField>,
}

impl CovectorField {
    pub fn constant(theta: &Covector) -> Self {
        let n = theta.group().dim();
        let values = theta.components().clone();
        let group = Arc::clone(theta.group());
        CovectorField {
            group,
            components: Arc::new(move |_| values.clone()),
            jacobian: Some(Arc::new(move |_| DMatrix::zeros(n, n))),
        }
    }

    pub fn from_fn(
        group: &Arc<GroupDescriptor>,
        components: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        CovectorField {
            group: Arc::clone(group),
            components: Arc::new(components),
            jacobian: None,
        }
    }

    pub fn with_jacobian(
        mut self,
        jacobian: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.jacobian = Some(Arc::new(jacobian));
        self
    }

    pub fn group(&self) -> &Arc<GroupDescriptor> {
        &self.group
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.components)(x)
    }

    /// Partial derivatives `d_i theta_j`, analytic when supplied,
    /// otherwise central differences with step `1e-5 * scale`.
    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        if let Some(jac) = &self.jacobian {
            return jac(x);
        }
        let n = x.len();
        let h = 1e-5 * x.amax().max(1.0);
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut plus = x.clone();
            let mut minus = x.clone();
            plus[i] += h;
            minus[i] -= h;
            let diff = (self.eval(&plus) - self.eval(&minus)) / (2.0 * h);
            for j in 0..n {
                out[(i, j)] = diff[j];
            }
        }
        out
    }
}

/// Bilinear field on the algebra: `x -> b_ij(x)`.
#[derive(Clone)]
pub struct BilinearField {
    group: Arc<GroupDescriptor>,
    eval: MatrixField,
}

impl BilinearField {
    pub fn constant(group: &Arc<GroupDescriptor>, matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != group.dim() || matrix.ncols() != group.dim() {
            return Err(Error::DimensionMismatch {
                expected: group.dim(),
                got: matrix.nrows(),
            });
        }
        Ok(BilinearField {
            group: Arc::clone(group),
            eval: Arc::new(move |_| matrix.clone()),
        })
    }

    /// The descriptor metric as a constant bilinear field.
    pub fn metric(group: &Arc<GroupDescriptor>) -> Self {
        let m = group.metric().clone();
        BilinearField {
            group: Arc::clone(group),
            eval: Arc::new(move |_| m.clone()),
        }
    }

    pub fn from_fn(
        group: &Arc<GroupDescriptor>,
        eval: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        BilinearField {
            group: Arc::clone(group),
            eval: Arc::new(eval),
        }
    }

    pub fn group(&self) -> &Arc<GroupDescriptor> {
        &self.group
    }

    pub fn eval(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.eval)(x)
    }

    /// Trace with respect to the descriptor metric:
    /// `tr_g b(x) = g^{ij} b_ij(x)`.
    pub fn metric_trace(&self, x: &DVector<f64>) -> f64 {
        let b = self.eval(x);
        let ginv = self.group.metric_inverse();
        let mut tr = 0.0;
        for i in 0..self.group.dim() {
            for j in 0..self.group.dim() {
                tr += ginv[(i, j)] * b[(i, j)];
            }
        }
        tr
    }
}

/// Midpoint-rule Stratonovich integral of `theta` along `path`.
pub fn stratonovich_integral(theta: &CovectorField, path: &AlgebraPath) -> Result<RealPath> {
    theta.group.ensure_same(path.group())?;
    let mut values = Vec::with_capacity(path.grid().len());
    values.push(0.0);
    let mut acc = 0.0;
    for k in 0..path.grid().steps() {
        let mid = (path.value(k) + path.value(k + 1)) * 0.5;
        let delta = path.value(k + 1) - path.value(k);
        acc += theta.eval(&mid).dot(&delta);
        values.push(acc);
    }
    RealPath::new(*path.grid(), values)
}

/// Quadratic integral `sum_k b_ij(Y_k) dY^i dY^j` with left-point
/// evaluation. Terms are accumulated over symmetrized index pairs, so an
/// antisymmetric `b` contributes exactly zero.
pub fn quadratic_integral(b: &BilinearField, path: &AlgebraPath) -> Result<RealPath> {
    b.group.ensure_same(path.group())?;
    let n = path.group().dim();
    let mut values = Vec::with_capacity(path.grid().len());
    values.push(0.0);
    let mut acc = 0.0;
    for k in 0..path.grid().steps() {
        let coeffs = b.eval(path.value(k));
        let delta = path.value(k + 1) - path.value(k);
        let mut step = 0.0;
        for i in 0..n {
            step += coeffs[(i, i)] * delta[i] * delta[i];
            for j in (i + 1)..n {
                step += (coeffs[(i, j)] + coeffs[(j, i)]) * (delta[i] * delta[j]);
            }
        }
        acc += step;
        values.push(acc);
    }
    RealPath::new(*path.grid(), values)
}

/// Dual-connection derivative of `theta` as a bilinear field:
/// `(grad theta)_ij(x) = d_i theta_j(x) - theta_x(alpha(E_i, E_j))`.
pub fn covector_derivative(theta: &CovectorField, alpha: &ConnectionFunction) -> Result<BilinearField> {
    theta.group.ensure_same(alpha.group())?;
    let theta = theta.clone();
    let alpha = alpha.clone();
    Ok(BilinearField {
        group: Arc::clone(&theta.group),
        eval: Arc::new(move |x| {
            let jac = theta.jacobian(x);
            let contraction = alpha.contract_covector(&theta.eval(x));
            jac - contraction
        }),
    })
}

/// Ito integral through the conversion formula:
/// `ito = stratonovich - quadratic(grad theta) / 2`.
pub fn ito_integral(
    theta: &CovectorField,
    path: &AlgebraPath,
    alpha: &ConnectionFunction,
) -> Result<RealPath> {
    let strat = stratonovich_integral(theta, path)?;
    let correction = quadratic_integral(&covector_derivative(theta, alpha)?, path)?;
    let values = strat
        .values()
        .iter()
        .zip(correction.values())
        .map(|(s, q)| s - 0.5 * q)
        .collect();
    RealPath::new(*path.grid(), values)
}

/// Left-point Ito sum of a constant covector along a flat path.
pub fn flat_ito_constant(theta: &Covector, path: &AlgebraPath) -> Result<RealPath> {
    theta.group().ensure_same(path.group())?;
    let mut values = Vec::with_capacity(path.grid().len());
    values.push(0.0);
    let mut acc = 0.0;
    for k in 0..path.grid().steps() {
        let delta = path.value(k + 1) - path.value(k);
        acc += theta.apply_coords(&delta);
        values.push(acc);
    }
    RealPath::new(*path.grid(), values)
}

/// Group Ito integral of the left-invariant form with value `theta_e` at
/// the identity, realized through the stochastic logarithm. Valid only for
/// skew-symmetric connection functions, where the dual-connection
/// correction of a constant covector vanishes; other connections are
/// refused rather than silently corrected.
pub fn group_ito_integral(
    theta_e: &Covector,
    path: &GroupPath,
    alpha: &ConnectionFunction,
) -> Result<RealPath> {
    theta_e.group().ensure_same(path.group())?;
    alpha.group().ensure_same(path.group())?;
    if !alpha.is_skew_symmetric() {
        return Err(Error::NotSkewSymmetric);
    }
    let log_path = sampler::stochastic_logarithm(path)?;
    flat_ito_constant(theta_e, &log_path)
}

/// Realized covariation `sum_k dY^i dY^j` of two coordinates.
pub fn quadratic_covariation(path: &AlgebraPath, i: usize, j: usize) -> Result<RealPath> {
    let n = path.group().dim();
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, dim: n });
    }
    if j >= n {
        return Err(Error::IndexOutOfRange { index: j, dim: n });
    }
    let mut values = Vec::with_capacity(path.grid().len());
    values.push(0.0);
    let mut acc = 0.0;
    for k in 0..path.grid().steps() {
        let delta = path.value(k + 1) - path.value(k);
        acc += delta[i] * delta[j];
        values.push(acc);
    }
    RealPath::new(*path.grid(), values)
}
