//! Curated group registry.
//!
//! Groups are addressable by name from the CLI and config files:
//! `"so3"`, `"su2"`, `"heis3"`, `"r1"`, `"r2"`, `"r3"`, `"torus2"`.
//! The registry is compile-time curated; arbitrary user-supplied groups
//! are out of scope.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::tensor::Tensor3;

use super::{GroupDescriptor, GroupForm};

fn epsilon_structure() -> Tensor3 {
    // c^k_{ij} = Levi-Civita symbol.
    let mut t = Tensor3::zeros(3);
    t.set(0, 1, 2, 1.0);
    t.set(1, 0, 2, -1.0);
    t.set(1, 2, 0, 1.0);
    t.set(2, 1, 0, -1.0);
    t.set(2, 0, 1, 1.0);
    t.set(0, 2, 1, -1.0);
    t
}

fn build_so3() -> Arc<GroupDescriptor> {
    let basis = vec![
        DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0]),
        DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0]),
        DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
    ];
    // Negative Killing form: B(E_i, E_j) = -2 delta_ij for this basis.
    let metric = DMatrix::identity(3, 3) * 2.0;
    GroupDescriptor::new(
        "so3",
        basis,
        epsilon_structure(),
        metric,
        true,
        PI,
        GroupForm::Rotation3,
    )
    .expect("so3 descriptor is valid")
}

fn build_su2() -> Arc<GroupDescriptor> {
    // Half the left-multiplication matrices of the imaginary units, so the
    // structure constants match so(3) and the covering differential is the
    // identity.
    let l_i = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0, -1.0, 0.0, 0.0, //
            1.0, 0.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, -1.0, //
            0.0, 0.0, 1.0, 0.0,
        ],
    );
    let l_j = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0, 0.0, -1.0, 0.0, //
            0.0, 0.0, 0.0, 1.0, //
            1.0, 0.0, 0.0, 0.0, //
            0.0, -1.0, 0.0, 0.0,
        ],
    );
    let l_k = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0, 0.0, 0.0, -1.0, //
            0.0, 0.0, -1.0, 0.0, //
            0.0, 1.0, 0.0, 0.0, //
            1.0, 0.0, 0.0, 0.0,
        ],
    );
    let basis = vec![l_i * 0.5, l_j * 0.5, l_k * 0.5];
    let metric = DMatrix::identity(3, 3) * 2.0;
    GroupDescriptor::new(
        "su2",
        basis,
        epsilon_structure(),
        metric,
        true,
        PI,
        GroupForm::QuaternionLeft,
    )
    .expect("su2 descriptor is valid")
}

fn build_heis3() -> Arc<GroupDescriptor> {
    let mut e1 = DMatrix::zeros(3, 3);
    e1[(0, 1)] = 1.0;
    let mut e2 = DMatrix::zeros(3, 3);
    e2[(1, 2)] = 1.0;
    let mut e3 = DMatrix::zeros(3, 3);
    e3[(0, 2)] = 1.0;
    let mut structure = Tensor3::zeros(3);
    structure.set(0, 1, 2, 1.0);
    structure.set(1, 0, 2, -1.0);
    GroupDescriptor::new(
        "heis3",
        vec![e1, e2, e3],
        structure,
        DMatrix::identity(3, 3),
        false,
        f64::INFINITY,
        GroupForm::Unitriangular3,
    )
    .expect("heis3 descriptor is valid")
}

fn build_translation(name: &str, n: usize) -> Arc<GroupDescriptor> {
    let basis = (0..n)
        .map(|i| {
            let mut e = DMatrix::zeros(n + 1, n + 1);
            e[(i, n)] = 1.0;
            e
        })
        .collect();
    GroupDescriptor::new(
        name,
        basis,
        Tensor3::zeros(n),
        DMatrix::identity(n, n),
        true,
        f64::INFINITY,
        GroupForm::Translation(n),
    )
    .expect("translation descriptor is valid")
}

fn build_torus2() -> Arc<GroupDescriptor> {
    let mut e1 = DMatrix::zeros(4, 4);
    e1[(0, 1)] = -1.0;
    e1[(1, 0)] = 1.0;
    let mut e2 = DMatrix::zeros(4, 4);
    e2[(2, 3)] = -1.0;
    e2[(3, 2)] = 1.0;
    // The per-coordinate rotation angle has a log branch at pi, so the
    // injectivity radius is pi even though the group is abelian.
    GroupDescriptor::new(
        "torus2",
        vec![e1, e2],
        Tensor3::zeros(2),
        DMatrix::identity(2, 2),
        true,
        PI,
        GroupForm::TorusBlocks(2),
    )
    .expect("torus2 descriptor is valid")
}

fn registry() -> &'static BTreeMap<&'static str, Arc<GroupDescriptor>> {
    static REGISTRY: OnceLock<BTreeMap<&'static str, Arc<GroupDescriptor>>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut map = BTreeMap::new();
        map.insert("so3", build_so3());
        map.insert("su2", build_su2());
        map.insert("heis3", build_heis3());
        map.insert("r1", build_translation("r1", 1));
        map.insert("r2", build_translation("r2", 2));
        map.insert("r3", build_translation("r3", 3));
        map.insert("torus2", build_torus2());
        map
    })
}

/// Looks up a registered group by name.
pub fn group(name: &str) -> Result<Arc<GroupDescriptor>> {
    registry()
        .get(name)
        .cloned()
        .ok_or_else(|| Error::UnknownName(name.to_string()))
}

/// Names of all registered groups, sorted.
pub fn group_names() -> Vec<&'static str> {
    registry().keys().copied().collect()
}

/// All registered descriptors, sorted by name.
pub fn all_groups() -> Vec<Arc<GroupDescriptor>> {
    registry().values().cloned().collect()
}
