//! Stochastic calculus on matrix Lie groups.
//!
//! The crate provides, at desk scale:
//!
//! * a curated registry of matrix Lie groups (`SO(3)`, `SU(2)` as real
//!   quaternion matrices, the Heisenberg group, flat abelian groups and
//!   tori) with closed-form exponential, logarithm and manifold projection;
//! * left-invariant connections described by their bilinear connection
//!   functions on the Lie algebra;
//! * discrete-time semimartingale samplers on the algebra and the group,
//!   together with the stochastic logarithm/exponential transform pair;
//! * discrete Stratonovich, Ito and quadratic integral estimators and the
//!   left-trivialized group Ito integral;
//! * statistical verifiers (martingale drift tests, the Levy covariation
//!   characterization, the Brownian trace rule) producing serializable
//!   reports;
//! * harmonic-map machinery for maps from flat sources into a group:
//!   Maurer-Cartan pullbacks, co-differentials, tension fields, the
//!   divergence-form harmonicity criterion and Monte-Carlo cross-checks.
//!
//! Everything is deterministic given a seed: samplers use a counter-based
//! generator keyed by `(seed, path index, step)`, so ensembles reproduce
//! bit-identically under any parallel schedule.

pub mod connection;
pub mod convergence;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod group;
pub mod integrals;
pub mod io;
pub mod maps;
pub mod path;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod tensor;

/// Re-export of the linear-algebra backend; public signatures use its
/// vector and matrix types.
pub use nalgebra;

pub use connection::{check_ad_invariance, ConnectionFunction, Covector};
pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use group::{
    registry, AlgebraVector, GroupDescriptor, GroupElement, LogConditioning,
};
pub use path::{AlgebraPath, GroupPath, RealPath};
pub use rng::NoiseSpec;
pub use stats::{TestReport, Verdict};
pub use tensor::Tensor3;
