//! Streamed ensemble experiments.
//!
//! These runners generate one path at a time, reduce it to per-checkpoint
//! summaries and discard it, so desk-scale ensembles (10^4 paths of 10^3
//! steps) stay cheap on memory. Paths are produced in parallel but always
//! reduced in path-index order, which keeps reports byte-identical across
//! worker counts.

use std::sync::Arc;

use nalgebra::DVector;

use crate::connection::ConnectionFunction;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::group::GroupDescriptor;
use crate::integrals::BilinearField;
use crate::path::AlgebraPath;
use crate::rng::NoiseSpec;
use crate::sampler;
use crate::stats::{self, ReportMeta, TestReport};

fn meta(grid: &TimeGrid, seed: u64) -> ReportMeta {
    ReportMeta {
        horizon: grid.horizon(),
        steps: grid.steps(),
        seed,
    }
}

/// Levy characterization of the logarithm of group Brownian motion.
pub fn group_bm_levy(
    group: &Arc<GroupDescriptor>,
    grid: &TimeGrid,
    paths: usize,
    seed: u64,
    times: &[f64],
    rel_tol: f64,
    z_max: f64,
) -> Result<TestReport> {
    let summaries = stats::par_collect(paths, |p| {
        let x = sampler::sample_group_bm(group, grid, &NoiseSpec::new(seed, p))?;
        let log_path = sampler::stochastic_logarithm(&x)?;
        stats::levy_summary(&log_path, times)
    })?;
    stats::levy_report_from_summaries(
        &format!("levy:log_group_bm:{}", group.name()),
        &summaries,
        group.dim(),
        times,
        rel_tol,
        z_max,
        meta(grid, seed),
    )
}

/// Levy characterization of flat Brownian motion on the algebra.
pub fn flat_bm_levy(
    group: &Arc<GroupDescriptor>,
    grid: &TimeGrid,
    paths: usize,
    seed: u64,
    times: &[f64],
    rel_tol: f64,
    z_max: f64,
) -> Result<TestReport> {
    let summaries = stats::par_collect(paths, |p| {
        let y = sampler::sample_flat_bm(group, grid, &NoiseSpec::new(seed, p))?;
        stats::levy_summary(&y, times)
    })?;
    stats::levy_report_from_summaries(
        &format!("levy:flat_bm:{}", group.name()),
        &summaries,
        group.dim(),
        times,
        rel_tol,
        z_max,
        meta(grid, seed),
    )
}

/// Negative control for the Levy test: the deterministic line `t -> t xi`
/// has zero covariation and must fail.
pub fn deterministic_levy_control(
    group: &Arc<GroupDescriptor>,
    grid: &TimeGrid,
    paths: usize,
    seed: u64,
    times: &[f64],
    rel_tol: f64,
    z_max: f64,
) -> Result<TestReport> {
    let xi = {
        let mut v = DVector::zeros(group.dim());
        v[0] = 1.0;
        v
    };
    let values: Vec<DVector<f64>> = grid.times().map(|t| &xi * t).collect();
    let line = AlgebraPath::new(Arc::clone(group), *grid, values)?;
    let summary = stats::levy_summary(&line, times)?;
    let summaries = vec![summary; paths];
    stats::levy_report_from_summaries(
        &format!("levy:deterministic_control:{}", group.name()),
        &summaries,
        group.dim(),
        times,
        rel_tol,
        z_max,
        meta(grid, seed),
    )
}

/// Martingale battery for the exponential of a flat (optionally drifted)
/// Brownian motion: the group Ito integrals of all basis covectors against
/// a skew connection reduce to the stochastic-logarithm coordinates, which
/// are tested for zero drift. The full transform pipeline (sample, inject,
/// log) runs per path.
#[allow(clippy::too_many_arguments)]
pub fn exponential_martingale_battery(
    group: &Arc<GroupDescriptor>,
    alpha: &ConnectionFunction,
    grid: &TimeGrid,
    paths: usize,
    seed: u64,
    times: &[f64],
    z_max: f64,
    drift: Option<&DVector<f64>>,
) -> Result<TestReport> {
    alpha.group().ensure_same(group)?;
    if !alpha.is_skew_symmetric() {
        return Err(Error::NotSkewSymmetric);
    }
    let indices: Result<Vec<usize>> = times.iter().map(|t| grid.index_of(*t)).collect();
    let indices = indices?;
    let drift_vec = match drift {
        Some(d) => Some(group.algebra_vector(d.clone())?),
        None => None,
    };
    let rows = stats::par_collect(paths, |p| {
        let noise = NoiseSpec::new(seed, p);
        let flat = match &drift_vec {
            Some(d) => sampler::sample_drifted_martingale(group, grid, &noise, d)?,
            None => sampler::sample_flat_bm(group, grid, &noise)?,
        };
        let x = sampler::stochastic_exponential(&flat)?;
        let log_path = sampler::stochastic_logarithm(&x)?;
        let mut row = Vec::with_capacity(indices.len());
        for &k in &indices {
            row.push(log_path.value(k).iter().copied().collect::<Vec<f64>>());
        }
        Ok(row)
    })?;
    let tag = if drift.is_some() { "drifted" } else { "martingale" };
    stats::battery_from_rows(
        &format!("group_ito:{tag}:{}", group.name()),
        group.dim(),
        times,
        &rows,
        z_max,
        meta(grid, seed),
    )
}

/// Brownian trace rule along the logarithm of group Brownian motion:
/// ensemble mean of the quadratic integral of `b` against the time
/// integral of its metric trace.
pub fn group_bm_trace(
    group: &Arc<GroupDescriptor>,
    b: &BilinearField,
    grid: &TimeGrid,
    paths: usize,
    seed: u64,
    times: &[f64],
    rel_tol: f64,
) -> Result<TestReport> {
    b.group().ensure_same(group)?;
    let indices: Result<Vec<usize>> = times.iter().map(|t| grid.index_of(*t)).collect();
    let indices = indices?;
    let dt = grid.dt();
    // Per path: checkpoint values of the quadratic integral and of the
    // trace quadrature.
    let rows = stats::par_collect(paths, |p| {
        let x = sampler::sample_group_bm(group, grid, &NoiseSpec::new(seed, p))?;
        let y = sampler::stochastic_logarithm(&x)?;
        let quad = crate::integrals::quadratic_integral(b, &y)?;
        let mut acc = 0.0;
        let mut trace_cp = vec![0.0; indices.len()];
        let mut quad_cp = vec![0.0; indices.len()];
        let mut next = 0usize;
        for k in 0..=grid.steps() {
            while next < indices.len() && indices[next] == k {
                trace_cp[next] = acc;
                quad_cp[next] = quad.value(k);
                next += 1;
            }
            if k < grid.steps() {
                acc += b.metric_trace(y.value(k)) * dt;
            }
        }
        Ok((quad_cp, trace_cp))
    })?;
    let mut checkpoints = Vec::with_capacity(times.len());
    for (c, t) in times.iter().enumerate() {
        let mq = rows.iter().map(|r| r.0[c]).sum::<f64>() / paths as f64;
        let mt = rows.iter().map(|r| r.1[c]).sum::<f64>() / paths as f64;
        let score = (mq - mt).abs() / (rel_tol * mt.abs().max(1e-12));
        checkpoints.push(stats::CheckpointStat {
            label: format!("trace@t{}", c + 1),
            time: *t,
            statistic: mq,
            score,
            threshold: 1.0,
            pass: score < 1.0,
        });
    }
    let verdict = if checkpoints.iter().all(|c| c.pass) {
        stats::Verdict::Pass
    } else {
        stats::Verdict::Fail
    };
    Ok(TestReport {
        name: format!("trace:log_group_bm:{}", group.name()),
        verdict,
        checkpoints,
        ensemble_size: paths,
        horizon: grid.horizon(),
        steps: grid.steps(),
        seed,
        z_max: None,
        rel_tol: Some(rel_tol),
        metrics: Default::default(),
        notes: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::registry;
    use crate::stats::{default_checkpoints, Verdict};

    #[test]
    fn streamed_levy_matches_materialized_levy() {
        let so3 = registry::group("so3").unwrap();
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let times = default_checkpoints(1.0);
        let streamed = group_bm_levy(&so3, &grid, 150, 321, &times, 0.2, 4.0).unwrap();
        let ensemble: Vec<_> = (0..150)
            .map(|p| {
                let x = sampler::sample_group_bm(&so3, &grid, &NoiseSpec::new(321, p)).unwrap();
                sampler::stochastic_logarithm(&x).unwrap()
            })
            .collect();
        let materialized = stats::levy_characterization_test(
            "levy:log_group_bm:so3",
            &ensemble,
            &times,
            0.2,
            4.0,
            321,
        )
        .unwrap();
        assert_eq!(streamed.verdict, materialized.verdict);
        for (a, b) in streamed.checkpoints.iter().zip(&materialized.checkpoints) {
            assert_eq!(a.statistic, b.statistic, "statistics must match bitwise");
        }
    }

    #[test]
    fn exponential_battery_flags_drift() {
        let so3 = registry::group("so3").unwrap();
        let alpha = ConnectionFunction::bracket_multiple(&so3, 0.5);
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let times = default_checkpoints(1.0);
        let null =
            exponential_martingale_battery(&so3, &alpha, &grid, 300, 654, &times, 4.0, None)
                .unwrap();
        assert_eq!(null.verdict, Verdict::Pass, "{null:?}");
        let drift = DVector::from_vec(vec![0.5, 0.0, 0.0]);
        let control = exponential_martingale_battery(
            &so3,
            &alpha,
            &grid,
            300,
            654,
            &times,
            4.0,
            Some(&drift),
        )
        .unwrap();
        assert_eq!(control.verdict, Verdict::Fail);
    }

    #[test]
    fn deterministic_control_fails_levy() {
        let so3 = registry::group("so3").unwrap();
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let times = default_checkpoints(1.0);
        let report =
            deterministic_levy_control(&so3, &grid, 150, 0, &times, 0.05, 4.0).unwrap();
        assert_eq!(report.verdict, Verdict::Fail);
    }
}
