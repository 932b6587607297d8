//! Closed-form kernels for the registered group realizations.
//!
//! Every registered group carries a `GroupForm` tag selecting closed-form
//! exponential, logarithm, inverse, projection and membership kernels:
//! Rodrigues for rotations, the quaternion exponential for the real
//! realization of SU(2), exact polynomials for the nilpotent and abelian
//! realizations, and per-block plane rotations for tori. The closed forms
//! double as independent cross-checks against the Pade fallback in tests.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Conditioning report attached to group logarithms.
///
/// `NearBranchCut` flags inputs within `NEAR_BRANCH_TOL` of the branch
/// point of the logarithm (rotation angle near pi); results are still
/// returned but carry fewer correct digits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LogConditioning {
    WellConditioned,
    NearBranchCut,
}

/// Inputs closer than this to the branch point are refused.
pub(crate) const BRANCH_TOL: f64 = 1e-6;
/// Inputs closer than this to the branch point are flagged.
pub(crate) const NEAR_BRANCH_TOL: f64 = 1e-2;
/// Projection refuses matrices farther than this from the group.
pub(crate) const PROJECTION_RADIUS: f64 = 0.1;

/// Matrix realization of a registered group.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupForm {
    /// 3x3 rotation matrices.
    Rotation3,
    /// Unit quaternions as real 4x4 left-multiplication matrices.
    QuaternionLeft,
    /// 3x3 upper unitriangular matrices.
    Unitriangular3,
    /// (n+1)x(n+1) translation matrices over R^n.
    Translation(usize),
    /// Block-diagonal 2x2 plane rotations, one block per coordinate.
    TorusBlocks(usize),
}

impl GroupForm {
    pub fn embed_dim(&self) -> usize {
        match self {
            GroupForm::Rotation3 | GroupForm::Unitriangular3 => 3,
            GroupForm::QuaternionLeft => 4,
            GroupForm::Translation(n) => n + 1,
            GroupForm::TorusBlocks(nb) => 2 * nb,
        }
    }

    pub fn algebra_dim(&self) -> usize {
        match self {
            GroupForm::Rotation3 | GroupForm::Unitriangular3 => 3,
            GroupForm::QuaternionLeft => 3,
            GroupForm::Translation(n) => *n,
            GroupForm::TorusBlocks(nb) => *nb,
        }
    }
}

fn skew3(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(
        3,
        3,
        &[0.0, -v[2], v[1], v[2], 0.0, -v[0], -v[1], v[0], 0.0],
    )
}

/// Left-multiplication matrix of the quaternion `(w, x, y, z)`.
fn quat_left_matrix(w: f64, x: f64, y: f64, z: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[
            w, -x, -y, -z, //
            x, w, -z, y, //
            y, z, w, -x, //
            z, -y, x, w,
        ],
    )
}

pub(crate) fn exp_coords(form: GroupForm, coords: &DVector<f64>) -> DMatrix<f64> {
    match form {
        GroupForm::Rotation3 => {
            let theta = coords.norm();
            let k = skew3(coords);
            let (a, b) = if theta < 1e-4 {
                let t2 = theta * theta;
                (1.0 - t2 / 6.0 + t2 * t2 / 120.0, 0.5 - t2 / 24.0 + t2 * t2 / 720.0)
            } else {
                (theta.sin() / theta, (1.0 - theta.cos()) / (theta * theta))
            };
            DMatrix::identity(3, 3) + &k * a + &k * &k * b
        }
        GroupForm::QuaternionLeft => {
            // exp(sum a_i E_i) = L_q with q the quaternion exponential of
            // the pure quaternion a/2.
            let theta = coords.norm();
            let half = 0.5 * theta;
            let w = half.cos();
            let s = if theta < 1e-4 {
                let h2 = half * half;
                0.5 * (1.0 - h2 / 6.0 + h2 * h2 / 120.0)
            } else {
                half.sin() / theta
            };
            quat_left_matrix(w, s * coords[0], s * coords[1], s * coords[2])
        }
        GroupForm::Unitriangular3 => {
            let (a, b, c) = (coords[0], coords[1], coords[2]);
            DMatrix::from_row_slice(
                3,
                3,
                &[1.0, a, c + 0.5 * a * b, 0.0, 1.0, b, 0.0, 0.0, 1.0],
            )
        }
        GroupForm::Translation(n) => {
            let mut m = DMatrix::identity(n + 1, n + 1);
            for i in 0..n {
                m[(i, n)] = coords[i];
            }
            m
        }
        GroupForm::TorusBlocks(nb) => {
            let mut m = DMatrix::identity(2 * nb, 2 * nb);
            for i in 0..nb {
                let (c, s) = (coords[i].cos(), coords[i].sin());
                m[(2 * i, 2 * i)] = c;
                m[(2 * i, 2 * i + 1)] = -s;
                m[(2 * i + 1, 2 * i)] = s;
                m[(2 * i + 1, 2 * i + 1)] = c;
            }
            m
        }
    }
}

fn vee3(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_vec(vec![m[(2, 1)], m[(0, 2)], m[(1, 0)]])
}

pub(crate) fn log_matrix(
    form: GroupForm,
    g: &DMatrix<f64>,
    injectivity_radius: f64,
    group_name: &str,
) -> Result<(DVector<f64>, LogConditioning)> {
    match form {
        GroupForm::Rotation3 => {
            let cos_theta = ((g.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
            let theta = cos_theta.acos();
            if theta >= injectivity_radius - BRANCH_TOL {
                return Err(Error::BranchCut {
                    group: group_name.to_string(),
                    distance: theta,
                    radius: injectivity_radius,
                });
            }
            let anti = vee3(&(g - g.transpose())) * 0.5;
            if theta < 1e-4 {
                // log(R) ~ (R - R^T)/2 with a small-angle series correction.
                let t2 = theta * theta;
                let factor = 1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0;
                return Ok((anti * factor, LogConditioning::WellConditioned));
            }
            if theta < std::f64::consts::PI - NEAR_BRANCH_TOL {
                let factor = theta / theta.sin();
                return Ok((anti * factor, LogConditioning::WellConditioned));
            }
            // Near the branch cut sin(theta) degrades; recover the axis from
            // the symmetric part instead, fixing signs with the skew part.
            let one_minus = 1.0 - cos_theta;
            let sym = (g + g.transpose()) * 0.5;
            let mut nn = DMatrix::zeros(3, 3);
            for i in 0..3 {
                for j in 0..3 {
                    let delta = if i == j { cos_theta } else { 0.0 };
                    nn[(i, j)] = (sym[(i, j)] - delta) / one_minus;
                }
            }
            let i0 = (0..3)
                .max_by(|&a, &b| nn[(a, a)].partial_cmp(&nn[(b, b)]).unwrap())
                .unwrap();
            let mut axis = DVector::zeros(3);
            axis[i0] = nn[(i0, i0)].max(0.0).sqrt();
            for j in 0..3 {
                if j != i0 {
                    axis[j] = nn[(i0, j)] / axis[i0];
                }
            }
            axis /= axis.norm();
            if axis.dot(&anti) < 0.0 {
                axis = -axis;
            }
            log::warn!(
                "group log of {group_name} is {:.3e} from the branch cut; result is ill-conditioned",
                injectivity_radius - theta
            );
            Ok((axis * theta, LogConditioning::NearBranchCut))
        }
        GroupForm::QuaternionLeft => {
            let (w, x, y, z) = (g[(0, 0)], g[(1, 0)], g[(2, 0)], g[(3, 0)]);
            let s = (x * x + y * y + z * z).sqrt();
            let angle = 2.0 * s.atan2(w);
            if angle >= injectivity_radius - BRANCH_TOL {
                return Err(Error::BranchCut {
                    group: group_name.to_string(),
                    distance: angle,
                    radius: injectivity_radius,
                });
            }
            let factor = if s < 1e-9 {
                2.0 / w * (1.0 - s * s / (3.0 * w * w))
            } else {
                angle / s
            };
            let coords = DVector::from_vec(vec![factor * x, factor * y, factor * z]);
            let conditioning = if angle > injectivity_radius - NEAR_BRANCH_TOL {
                log::warn!(
                    "group log of {group_name} is {:.3e} from the declared radius",
                    injectivity_radius - angle
                );
                LogConditioning::NearBranchCut
            } else {
                LogConditioning::WellConditioned
            };
            Ok((coords, conditioning))
        }
        GroupForm::Unitriangular3 => {
            let (a, b, c) = (g[(0, 1)], g[(1, 2)], g[(0, 2)]);
            Ok((
                DVector::from_vec(vec![a, b, c - 0.5 * a * b]),
                LogConditioning::WellConditioned,
            ))
        }
        GroupForm::Translation(n) => {
            let coords = DVector::from_fn(n, |i, _| g[(i, n)]);
            Ok((coords, LogConditioning::WellConditioned))
        }
        GroupForm::TorusBlocks(nb) => {
            let mut coords = DVector::zeros(nb);
            let mut conditioning = LogConditioning::WellConditioned;
            for i in 0..nb {
                let angle = g[(2 * i + 1, 2 * i)].atan2(g[(2 * i, 2 * i)]);
                if angle.abs() >= injectivity_radius - BRANCH_TOL {
                    return Err(Error::BranchCut {
                        group: group_name.to_string(),
                        distance: angle.abs(),
                        radius: injectivity_radius,
                    });
                }
                if angle.abs() > injectivity_radius - NEAR_BRANCH_TOL {
                    conditioning = LogConditioning::NearBranchCut;
                }
                coords[i] = angle;
            }
            Ok((coords, conditioning))
        }
    }
}

pub(crate) fn inverse_matrix(form: GroupForm, g: &DMatrix<f64>) -> DMatrix<f64> {
    match form {
        GroupForm::Rotation3 | GroupForm::QuaternionLeft | GroupForm::TorusBlocks(_) => {
            g.transpose()
        }
        GroupForm::Unitriangular3 => {
            let (a, b, c) = (g[(0, 1)], g[(1, 2)], g[(0, 2)]);
            DMatrix::from_row_slice(3, 3, &[1.0, -a, a * b - c, 0.0, 1.0, -b, 0.0, 0.0, 1.0])
        }
        GroupForm::Translation(n) => {
            let mut m = DMatrix::identity(n + 1, n + 1);
            for i in 0..n {
                m[(i, n)] = -g[(i, n)];
            }
            m
        }
    }
}

/// Newton iteration for the orthogonal polar factor of a near-orthogonal
/// matrix. Quadratically convergent; two or three sweeps suffice after a
/// single integration step.
fn polar_orthogonal(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let mut y = m.clone();
    for _ in 0..40 {
        let inv_t = y.clone().try_inverse()?.transpose();
        y = (&y + inv_t) * 0.5;
        let defect = (&y.transpose() * &y - DMatrix::identity(y.nrows(), y.ncols())).norm();
        if defect <= 1e-14 {
            return Some(y);
        }
    }
    Some(y)
}

pub(crate) fn project_matrix(
    form: GroupForm,
    m: &DMatrix<f64>,
    group_name: &str,
) -> Result<DMatrix<f64>> {
    let projected = match form {
        GroupForm::Rotation3 => {
            if m.determinant() <= 0.0 {
                return Err(Error::WrongComponent {
                    group: group_name.to_string(),
                });
            }
            polar_orthogonal(m).ok_or(Error::NonFinite("orthogonal projection"))?
        }
        GroupForm::QuaternionLeft => {
            let q = DVector::from_vec(vec![m[(0, 0)], m[(1, 0)], m[(2, 0)], m[(3, 0)]]);
            let norm = q.norm();
            if (norm - 1.0).abs() > PROJECTION_RADIUS {
                return Err(Error::ProjectionTooFar {
                    group: group_name.to_string(),
                    distance: (norm - 1.0).abs(),
                });
            }
            quat_left_matrix(q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm)
        }
        GroupForm::Unitriangular3 => DMatrix::from_row_slice(
            3,
            3,
            &[1.0, m[(0, 1)], m[(0, 2)], 0.0, 1.0, m[(1, 2)], 0.0, 0.0, 1.0],
        ),
        GroupForm::Translation(n) => {
            let mut p = DMatrix::identity(n + 1, n + 1);
            for i in 0..n {
                p[(i, n)] = m[(i, n)];
            }
            p
        }
        GroupForm::TorusBlocks(nb) => {
            let mut p = DMatrix::identity(2 * nb, 2 * nb);
            for i in 0..nb {
                let c = (m[(2 * i, 2 * i)] + m[(2 * i + 1, 2 * i + 1)]) * 0.5;
                let s = (m[(2 * i + 1, 2 * i)] - m[(2 * i, 2 * i + 1)]) * 0.5;
                if c.hypot(s) < 0.5 {
                    return Err(Error::ProjectionTooFar {
                        group: group_name.to_string(),
                        distance: 1.0 - c.hypot(s),
                    });
                }
                let angle = s.atan2(c);
                p[(2 * i, 2 * i)] = angle.cos();
                p[(2 * i, 2 * i + 1)] = -angle.sin();
                p[(2 * i + 1, 2 * i)] = angle.sin();
                p[(2 * i + 1, 2 * i + 1)] = angle.cos();
            }
            p
        }
    };
    let distance = (m - &projected).norm();
    if distance > PROJECTION_RADIUS {
        return Err(Error::ProjectionTooFar {
            group: group_name.to_string(),
            distance,
        });
    }
    Ok(projected)
}

pub(crate) fn membership_residual(form: GroupForm, g: &DMatrix<f64>) -> f64 {
    match form {
        GroupForm::Rotation3 => {
            let ortho = (g.transpose() * g - DMatrix::identity(3, 3)).norm();
            ortho.max((g.determinant() - 1.0).abs())
        }
        GroupForm::QuaternionLeft => {
            let q = DVector::from_vec(vec![g[(0, 0)], g[(1, 0)], g[(2, 0)], g[(3, 0)]]);
            let rebuilt = quat_left_matrix(q[0], q[1], q[2], q[3]);
            (g - rebuilt).norm().max((q.norm() - 1.0).abs())
        }
        GroupForm::Unitriangular3 => {
            let mut r: f64 = 0.0;
            for i in 0..3 {
                r = r.max((g[(i, i)] - 1.0).abs());
                for j in 0..i {
                    r = r.max(g[(i, j)].abs());
                }
            }
            r
        }
        GroupForm::Translation(n) => {
            let mut r: f64 = (g[(n, n)] - 1.0).abs();
            for i in 0..n {
                for j in 0..n {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    r = r.max((g[(i, j)] - delta).abs());
                }
                r = r.max(g[(n, i)].abs());
            }
            r
        }
        GroupForm::TorusBlocks(nb) => {
            let dim = 2 * nb;
            let ortho = (g.transpose() * g - DMatrix::identity(dim, dim)).norm();
            let mut off: f64 = 0.0;
            for i in 0..dim {
                for j in 0..dim {
                    if i / 2 != j / 2 {
                        off = off.max(g[(i, j)].abs());
                    }
                }
            }
            let mut det: f64 = 0.0;
            for b in 0..nb {
                let d = g[(2 * b, 2 * b)] * g[(2 * b + 1, 2 * b + 1)]
                    - g[(2 * b, 2 * b + 1)] * g[(2 * b + 1, 2 * b)];
                det = det.max((d - 1.0).abs());
            }
            ortho.max(off).max(det)
        }
    }
}
