use std::f64::consts::PI;

use approx::assert_relative_eq;
use nalgebra::{dvector, DMatrix, DVector};
use proptest::prelude::*;

use super::registry;
use super::{GroupDescriptor, LogConditioning};
use crate::error::Error;
use crate::rng::{NoiseDomain, NoiseSpec, PathRng};

/// Plain scaled-and-squared Taylor series, independent of the closed-form
/// kernels under test.
fn taylor_expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.norm();
    let squarings = norm.log2().ceil().max(0.0) as u32 + 4;
    let scaled = a / 2f64.powi(squarings as i32);
    let mut term = DMatrix::identity(n, n);
    let mut sum = DMatrix::identity(n, n);
    for k in 1..30 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

fn deterministic_coords(group: &GroupDescriptor, slot: u64, scale: f64) -> DVector<f64> {
    let mut rng = PathRng::new(&NoiseSpec::new(0xBEEF, slot), NoiseDomain::Increments);
    let mut buf = vec![0.0; group.dim()];
    rng.standard_normals(0, &mut buf);
    DVector::from_fn(group.dim(), |i, _| scale * buf[i])
}

#[test]
fn all_registered_descriptors_validate() {
    for g in registry::all_groups() {
        g.validate().unwrap_or_else(|e| panic!("{}: {e}", g.name()));
    }
    assert!(registry::group_names().len() >= 5);
    assert!(matches!(registry::group("nope"), Err(Error::UnknownName(_))));
}

#[test]
fn bracket_matches_matrix_commutator_oracle() {
    for g in registry::all_groups() {
        for i in 0..g.dim() {
            for j in 0..g.dim() {
                let ei = g.basis_vector(i).unwrap();
                let ej = g.basis_vector(j).unwrap();
                let algebraic = g.bracket(&ei, &ej).unwrap();
                let commutator =
                    &g.basis()[i] * &g.basis()[j] - &g.basis()[j] * &g.basis()[i];
                let (coords, residual) = g.coordinates_of(&commutator);
                assert!(residual < 1e-12);
                assert_relative_eq!(algebraic.coords(), &coords, epsilon = 1e-12);
            }
        }
    }
}

#[test]
fn so3_bracket_example_and_heisenberg_center() {
    let so3 = registry::group("so3").unwrap();
    let e1 = so3.basis_vector(0).unwrap();
    let e2 = so3.basis_vector(1).unwrap();
    let b = so3.bracket(&e1, &e2).unwrap();
    assert_relative_eq!(b.coords(), &dvector![0.0, 0.0, 1.0], epsilon = 1e-15);

    let heis = registry::group("heis3").unwrap();
    let h1 = heis.basis_vector(0).unwrap();
    let h3 = heis.basis_vector(2).unwrap();
    assert_eq!(heis.bracket(&h1, &h3).unwrap().norm(), 0.0);
}

#[test]
fn exp_of_zero_is_identity() {
    for g in registry::all_groups() {
        let zero = g.zero_vector();
        let e = g.exp(&zero).unwrap();
        let defect = (e.matrix() - DMatrix::identity(g.embed_dim(), g.embed_dim())).norm();
        assert!(defect < 1e-15, "{}", g.name());
    }
}

#[test]
fn so3_quarter_turn_matches_frozen_rotation() {
    let so3 = registry::group("so3").unwrap();
    let x = so3.algebra_vector(dvector![0.0, 0.0, PI / 2.0]).unwrap();
    let g = so3.exp(&x).unwrap();
    let expected = DMatrix::from_row_slice(
        3,
        3,
        &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0],
    );
    assert_relative_eq!(g.matrix(), &expected, epsilon = 1e-14);
}

#[test]
fn exp_times_exp_of_negation_is_identity() {
    for g in registry::all_groups() {
        let x = g.algebra_vector(deterministic_coords(&g, 1, 0.4)).unwrap();
        let forward = g.exp(&x).unwrap();
        let backward = g.exp(&x.scale(-1.0)).unwrap();
        let product = forward.compose(&backward).unwrap();
        let defect =
            (product.matrix() - DMatrix::identity(g.embed_dim(), g.embed_dim())).norm();
        assert!(defect < 1e-12, "{}: defect {defect}", g.name());
    }
}

#[test]
fn closed_form_exp_matches_taylor_series_oracle() {
    for g in registry::all_groups() {
        for slot in 0..6 {
            let coords = deterministic_coords(&g, 10 + slot, 0.5);
            let closed = g.exp_matrix(&coords).unwrap();
            let series = taylor_expm(&g.hat(&coords));
            assert!(
                (&closed - &series).norm() < 1e-12,
                "{}: closed form deviates from Taylor oracle",
                g.name()
            );
        }
    }
}

#[test]
fn exp_rejects_non_finite_input() {
    let so3 = registry::group("so3").unwrap();
    let x = so3.algebra_vector(dvector![f64::NAN, 0.0, 0.0]).unwrap();
    assert!(matches!(so3.exp(&x), Err(Error::NonFinite(_))));
}

#[test]
fn log_of_identity_is_zero() {
    for g in registry::all_groups() {
        let log = g.log(&g.identity_element()).unwrap();
        assert_eq!(log.norm(), 0.0, "{}", g.name());
    }
}

#[test]
fn log_exp_round_trip_within_injectivity_radius() {
    for g in registry::all_groups() {
        let radius = g.injectivity_radius().min(2.0);
        for slot in 0..8 {
            let coords = deterministic_coords(&g, 20 + slot, 0.31 * radius);
            if coords.norm() >= 0.9 * radius {
                continue;
            }
            let x = g.algebra_vector(coords.clone()).unwrap();
            let back = g.log(&g.exp(&x).unwrap()).unwrap();
            assert!(
                (back.coords() - &coords).norm() <= 1e-10,
                "{}: round trip error {}",
                g.name(),
                (back.coords() - &coords).norm()
            );
        }
    }
}

#[test]
fn so3_log_near_branch_warns_and_beyond_fails() {
    let so3 = registry::group("so3").unwrap();
    let axis = dvector![1.0, 2.0, -0.5];
    let axis = &axis / axis.norm();

    let near = so3
        .exp(&so3.algebra_vector(&axis * (PI - 1e-3)).unwrap())
        .unwrap();
    let (log, conditioning) = so3.log_conditioned(&near).unwrap();
    assert_eq!(conditioning, LogConditioning::NearBranchCut);
    assert!(log.coords().iter().all(|v| v.is_finite()));
    // The Rodrigues inverse still identifies angle and axis.
    assert_relative_eq!(log.norm(), PI - 1e-3, epsilon = 1e-6);
    assert!((log.coords() / log.norm() - &axis).norm() < 1e-5);

    let beyond = so3
        .exp(&so3.algebra_vector(&axis * (PI - 1e-8)).unwrap())
        .unwrap();
    assert!(matches!(so3.log(&beyond), Err(Error::BranchCut { .. })));
}

#[test]
fn su2_log_respects_declared_radius() {
    let su2 = registry::group("su2").unwrap();
    let v = dvector![0.0, 0.9 * PI, 0.0];
    let x = su2.algebra_vector(v.clone()).unwrap();
    let back = su2.log(&su2.exp(&x).unwrap()).unwrap();
    assert!((back.coords() - &v).norm() < 1e-10);

    let too_far = su2.algebra_vector(dvector![0.0, PI + 0.2, 0.0]).unwrap();
    let g = su2.exp(&too_far).unwrap();
    assert!(matches!(su2.log(&g), Err(Error::BranchCut { .. })));
}

#[test]
fn adjoint_of_identity_is_identity_map() {
    for g in registry::all_groups() {
        let x = g.algebra_vector(deterministic_coords(&g, 30, 0.7)).unwrap();
        let ad = g.adjoint(&g.identity_element(), &x).unwrap();
        assert_relative_eq!(ad.coords(), x.coords(), epsilon = 1e-14);
    }
}

#[test]
fn adjoint_linearizes_to_the_bracket() {
    // Ad_{exp(tZ)} X = X + t [Z, X] + O(t^2).
    let so3 = registry::group("so3").unwrap();
    let z = so3.algebra_vector(dvector![0.4, -0.2, 0.9]).unwrap();
    let x = so3.algebra_vector(dvector![-1.0, 0.3, 0.5]).unwrap();
    let t = 1e-5;
    let g = so3.exp(&z.scale(t)).unwrap();
    let ad = so3.adjoint(&g, &x).unwrap();
    let linear = x.add(&so3.bracket(&z, &x).unwrap().scale(t)).unwrap();
    let defect = (ad.coords() - linear.coords()).norm();
    assert!(defect < 5.0 * t * t, "defect {defect}");
}

#[test]
fn adjoint_preserves_the_biinvariant_metric() {
    let so3 = registry::group("so3").unwrap();
    let x = so3.algebra_vector(dvector![0.7, -1.1, 0.4]).unwrap();
    let g = so3
        .exp(&so3.algebra_vector(dvector![1.2, 0.5, -0.8]).unwrap())
        .unwrap();
    let ad = so3.adjoint(&g, &x).unwrap();
    assert_relative_eq!(ad.metric_norm(), x.metric_norm(), epsilon = 1e-10);
}

#[test]
fn adjoint_is_a_homomorphism() {
    let su2 = registry::group("su2").unwrap();
    let x = su2.algebra_vector(deterministic_coords(&su2, 41, 0.6)).unwrap();
    let g = su2
        .exp(&su2.algebra_vector(deterministic_coords(&su2, 42, 0.5)).unwrap())
        .unwrap();
    let h = su2
        .exp(&su2.algebra_vector(deterministic_coords(&su2, 43, 0.5)).unwrap())
        .unwrap();
    let gh = g.compose(&h).unwrap();
    let combined = su2.adjoint(&gh, &x).unwrap();
    let staged = su2.adjoint(&g, &su2.adjoint(&h, &x).unwrap()).unwrap();
    assert!((combined.coords() - staged.coords()).norm() < 1e-10);
}

#[test]
fn maurer_cartan_at_identity_reads_off_coordinates() {
    let so3 = registry::group("so3").unwrap();
    let v = so3.basis()[0].clone();
    let coords = so3.maurer_cartan(&so3.identity_element(), &v).unwrap();
    assert_relative_eq!(coords.coords(), &dvector![1.0, 0.0, 0.0], epsilon = 1e-14);
}

#[test]
fn maurer_cartan_is_left_invariant() {
    let so3 = registry::group("so3").unwrap();
    let g = so3
        .exp(&so3.algebra_vector(dvector![0.3, 0.8, -0.5]).unwrap())
        .unwrap();
    let h = so3
        .exp(&so3.algebra_vector(dvector![-0.9, 0.2, 0.6]).unwrap())
        .unwrap();
    let a = so3.hat(&dvector![0.5, -0.7, 1.1]);
    let v = g.matrix() * &a; // tangent vector at g (left translate of a)
    let direct = so3.maurer_cartan(&g, &v).unwrap();
    let translated = so3
        .maurer_cartan(&h.compose(&g).unwrap(), &(h.matrix() * &v))
        .unwrap();
    assert_relative_eq!(direct.coords(), translated.coords(), epsilon = 1e-12);
    // Left trivialization is exact on the span.
    assert_relative_eq!(direct.coords(), &dvector![0.5, -0.7, 1.1], epsilon = 1e-12);
}

#[test]
fn maurer_cartan_along_one_parameter_subgroup() {
    // For X_t = exp(t xi), numerical differentiation gives omega(X') = xi.
    let su2 = registry::group("su2").unwrap();
    let xi = dvector![0.4, -0.3, 0.7];
    let h = 1e-5;
    for t in [0.0, 0.5, 1.2] {
        let g = su2.element(su2.exp_matrix(&(&xi * t)).unwrap()).unwrap();
        let plus = su2.exp_matrix(&(&xi * (t + h))).unwrap();
        let minus = su2.exp_matrix(&(&xi * (t - h))).unwrap();
        let velocity = (plus - minus) / (2.0 * h);
        let pulled = su2.maurer_cartan(&g, &velocity).unwrap();
        assert!((pulled.coords() - &xi).norm() < 1e-8);
    }
}

#[test]
fn maurer_cartan_rejects_non_tangent_matrices() {
    let so3 = registry::group("so3").unwrap();
    let g = so3.identity_element();
    let v = DMatrix::identity(3, 3); // symmetric, not in so(3)
    assert!(matches!(
        so3.maurer_cartan(&g, &v),
        Err(Error::NotTangent { .. })
    ));
}

#[test]
fn projection_fixes_rotations_and_repairs_perturbations() {
    let so3 = registry::group("so3").unwrap();
    let r = so3.exp_matrix(&dvector![0.4, -0.8, 0.3]).unwrap();
    let projected = so3.project_matrix(&r).unwrap();
    assert!((&projected - &r).norm() < 1e-14);

    let mut perturbed = r.clone();
    perturbed[(0, 1)] += 1e-6;
    perturbed[(2, 2)] += 1e-6;
    let repaired = so3.project_matrix(&perturbed).unwrap();
    assert!(so3.membership_residual(&repaired) <= 1e-12);
    assert!((&repaired - &perturbed).norm() < 1e-5);
}

#[test]
fn projection_rejects_wrong_component_and_far_matrices() {
    let so3 = registry::group("so3").unwrap();
    let reflection = DMatrix::from_row_slice(
        3,
        3,
        &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0],
    );
    assert!(matches!(
        so3.project_matrix(&reflection),
        Err(Error::WrongComponent { .. })
    ));
    let far = DMatrix::identity(3, 3) * 2.0;
    assert!(so3.project_matrix(&far).is_err());
}

#[test]
fn quaternion_projection_renormalizes() {
    let su2 = registry::group("su2").unwrap();
    let g = su2.exp_matrix(&dvector![0.5, 0.2, -0.4]).unwrap();
    let scaled = &g * 1.01;
    let projected = su2.project_matrix(&scaled).unwrap();
    assert!(su2.membership_residual(&projected) < 1e-14);
    assert!((projected - g).norm() < 1e-12);
}

#[test]
fn element_constructor_enforces_membership() {
    let so3 = registry::group("so3").unwrap();
    assert!(so3.element(DMatrix::identity(3, 3)).is_ok());
    assert!(matches!(
        so3.element(DMatrix::identity(3, 3) * 1.001),
        Err(Error::NotOnGroup { .. })
    ));
}

#[test]
fn descriptor_mismatch_is_reported() {
    let so3 = registry::group("so3").unwrap();
    let su2 = registry::group("su2").unwrap();
    let x = so3.basis_vector(0).unwrap();
    let y = su2.basis_vector(0).unwrap();
    assert!(matches!(
        so3.bracket(&x, &y),
        Err(Error::DescriptorMismatch { .. })
    ));
}

#[test]
fn torus_log_branch_and_roundtrip() {
    let torus = registry::group("torus2").unwrap();
    let x = torus.algebra_vector(dvector![2.8, -2.8]).unwrap();
    let back = torus.log(&torus.exp(&x).unwrap()).unwrap();
    assert!((back.coords() - x.coords()).norm() < 1e-12);

    // Beyond pi the principal angle wraps; the log is the wrapped value.
    let wrapped = torus.algebra_vector(dvector![PI + 0.1, 0.0]).unwrap();
    let g = torus.exp(&wrapped).unwrap();
    let principal = torus.log(&g).unwrap();
    assert!((principal.coords()[0] + (PI - 0.1)).abs() < 1e-12);

    // At the branch point itself the log is refused.
    let at_branch = torus.algebra_vector(dvector![PI - 1e-8, 0.0]).unwrap();
    let h = torus.exp(&at_branch).unwrap();
    assert!(matches!(torus.log(&h), Err(Error::BranchCut { .. })));
}

#[test]
fn heisenberg_exp_log_are_exact_polynomials() {
    let heis = registry::group("heis3").unwrap();
    let x = heis.algebra_vector(dvector![1.5, -2.0, 3.25]).unwrap();
    let g = heis.exp(&x).unwrap();
    assert_eq!(g.matrix()[(0, 1)], 1.5);
    assert_eq!(g.matrix()[(1, 2)], -2.0);
    assert_eq!(g.matrix()[(0, 2)], 3.25 + 0.5 * 1.5 * (-2.0));
    let back = heis.log(&g).unwrap();
    assert_eq!(back.coords(), x.coords());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prop_bracket_is_antisymmetric(
        a in proptest::array::uniform3(-2.0f64..2.0),
        b in proptest::array::uniform3(-2.0f64..2.0),
    ) {
        let so3 = registry::group("so3").unwrap();
        let x = so3.algebra_vector(DVector::from_row_slice(&a)).unwrap();
        let y = so3.algebra_vector(DVector::from_row_slice(&b)).unwrap();
        let xy = so3.bracket(&x, &y).unwrap();
        let yx = so3.bracket(&y, &x).unwrap();
        prop_assert!((xy.coords() + yx.coords()).norm() < 1e-12);
        prop_assert_eq!(so3.bracket(&x, &x).unwrap().norm(), 0.0);
    }

    #[test]
    fn prop_exp_log_round_trip_so3(
        a in proptest::array::uniform3(-1.0f64..1.0),
    ) {
        let so3 = registry::group("so3").unwrap();
        let coords = DVector::from_row_slice(&a);
        prop_assume!(coords.norm() <= 0.9 * so3.injectivity_radius());
        let x = so3.algebra_vector(coords.clone()).unwrap();
        let back = so3.log(&so3.exp(&x).unwrap()).unwrap();
        prop_assert!((back.coords() - &coords).norm() <= 1e-10);
    }

    #[test]
    fn prop_group_elements_stay_on_group_under_composition(
        a in proptest::array::uniform3(-1.2f64..1.2),
        b in proptest::array::uniform3(-1.2f64..1.2),
    ) {
        let su2 = registry::group("su2").unwrap();
        let g = su2.exp(&su2.algebra_vector(DVector::from_row_slice(&a)).unwrap()).unwrap();
        let h = su2.exp(&su2.algebra_vector(DVector::from_row_slice(&b)).unwrap()).unwrap();
        let gh = g.compose(&h).unwrap();
        prop_assert!(su2.membership_residual(gh.matrix()) < 1e-12);
    }
}
