//! Semimartingale samplers and the stochastic logarithm/exponential pair.
//!
//! Group-valued diffusion uses the multiplicative injection scheme
//! `X_{k+1} = X_k exp(dY_k)`: it stays on the group exactly and, for
//! bi-invariant metrics, is a weakly first-order scheme for the group
//! Brownian motion. The stochastic logarithm accumulates group logs of
//! one-step multiplicative increments, which makes the discrete transform
//! pair exact inverses of each other.

use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::group::GroupDescriptor;
use crate::path::{AlgebraPath, GroupPath};
use crate::rng::{NoiseDomain, NoiseSpec, PathRng};

/// Flat Brownian motion on the algebra with covariance determined by the
/// descriptor metric: increments are `sqrt(dt) * sum_i xi_i F_i` over a
/// metric-orthonormal frame `{F_i}`.
pub fn sample_flat_bm(
    group: &Arc<GroupDescriptor>,
    grid: &TimeGrid,
    noise: &NoiseSpec,
) -> Result<AlgebraPath> {
    sample_drifted_coords(group, grid, noise, None)
}

/// Flat Brownian motion plus the deterministic drift `t * drift`; the
/// negative control for the martingale batteries.
pub fn sample_drifted_martingale(
    group: &Arc<GroupDescriptor>,
    grid: &TimeGrid,
    noise: &NoiseSpec,
    drift: &crate::group::AlgebraVector,
) -> Result<AlgebraPath> {
    group.ensure_same(drift.group())?;
    sample_drifted_coords(group, grid, noise, Some(drift.coords()))
}

fn sample_drifted_coords(
    group: &Arc<GroupDescriptor>,
    grid: &TimeGrid,
    noise: &NoiseSpec,
    drift: Option<&DVector<f64>>,
) -> Result<AlgebraPath> {
    let n = group.dim();
    let mut rng = PathRng::new(noise, NoiseDomain::Increments);
    let mut buf = vec![0.0; n];
    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();
    let frame = group.ortho_frame();

    let mut values = Vec::with_capacity(grid.len());
    values.push(DVector::zeros(n));
    let mut current = DVector::zeros(n);
    for k in 0..grid.steps() {
        rng.standard_normals(k as u64, &mut buf);
        let xi = DVector::from_column_slice(&buf);
        current += frame * xi * sqrt_dt;
        if let Some(d) = drift {
            // Store BM + t*drift without mutating the accumulated BM state.
            let t_next = grid.time(k + 1);
            values.push(&current + d * t_next);
        } else {
            values.push(current.clone());
        }
    }
    AlgebraPath::new(Arc::clone(group), *grid, values)
}

/// Group Brownian motion by exponential injection of flat increments.
/// Requires a bi-invariant metric; the law is only the group Brownian
/// motion in that regime.
pub fn sample_group_bm(
    group: &Arc<GroupDescriptor>,
    grid: &TimeGrid,
    noise: &NoiseSpec,
) -> Result<GroupPath> {
    if !group.admits_biinvariant_metric() {
        return Err(Error::NoBiinvariantMetric(group.name().to_string()));
    }
    let flat = sample_flat_bm(group, grid, noise)?;
    stochastic_exponential(&flat)
}

/// Stochastic exponential: `X_0 = e`, `X_{k+1} = X_k exp(dY_k)`, projected
/// onto the group every step.
pub fn stochastic_exponential(path: &AlgebraPath) -> Result<GroupPath> {
    if !path.starts_at_zero() {
        return Err(Error::Precondition(
            "stochastic exponential input must start at zero".into(),
        ));
    }
    let group = path.group();
    let mut values = Vec::with_capacity(path.grid().len());
    let mut current = nalgebra::DMatrix::identity(group.embed_dim(), group.embed_dim());
    values.push(current.clone());
    for delta in path.increments() {
        let step = group.exp_matrix(&delta)?;
        current = group.project_matrix(&(current * step))?;
        values.push(current.clone());
    }
    Ok(GroupPath::new_unchecked(
        Arc::clone(group),
        *path.grid(),
        values,
    ))
}

/// Stochastic logarithm: cumulative group logs of one-step multiplicative
/// increments. Exact inverse of [`stochastic_exponential`] on the same
/// grid. Fails with a branch error when an increment leaves the
/// injectivity radius; the caller should refine the grid.
pub fn stochastic_logarithm(path: &GroupPath) -> Result<AlgebraPath> {
    let group = path.group();
    let mut values = Vec::with_capacity(path.grid().len());
    let mut current = DVector::zeros(group.dim());
    values.push(current.clone());
    for k in 0..path.grid().steps() {
        let delta = group.log_increment(path.value(k), path.value(k + 1))?;
        current += delta;
        values.push(current.clone());
    }
    AlgebraPath::new(Arc::clone(group), *path.grid(), values)
}

/// Builds the flat path with the given increments (partial sums from zero).
pub fn path_from_increments(
    group: &Arc<GroupDescriptor>,
    horizon: f64,
    increments: &[DVector<f64>],
) -> Result<AlgebraPath> {
    let grid = TimeGrid::new(horizon, increments.len())?;
    let mut values = Vec::with_capacity(grid.len());
    let mut current = DVector::zeros(group.dim());
    values.push(current.clone());
    for inc in increments {
        current += inc;
        values.push(current.clone());
    }
    AlgebraPath::new(Arc::clone(group), grid, values)
}

/// Flat Brownian path at dyadic level `level` drawn from the shared Wiener
/// tree of `noise`, with the metric-orthonormal frame applied. Paths at
/// successive levels refine each other pathwise.
pub fn dyadic_flat_bm(
    group: &Arc<GroupDescriptor>,
    horizon: f64,
    level: u32,
    noise: &NoiseSpec,
) -> Result<AlgebraPath> {
    let std_incs = crate::rng::dyadic_standard_increments(group.dim(), horizon, level, noise);
    let frame = group.ortho_frame();
    let incs: Vec<DVector<f64>> = std_incs.iter().map(|z| frame * z).collect();
    path_from_increments(group, horizon, &incs)
}
