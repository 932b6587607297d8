//! Dyadic refinement studies on a shared Wiener tree.
//!
//! All studies fix one Brownian realization through the bridge tree of
//! [`crate::rng::dyadic_standard_increments`] and measure how a discrete
//! quantity at level `l` (grid of `2^l` steps) deviates from a reference
//! at a finer level of the same tree. Deviations below `MACHINE_FLOOR`
//! are reported as exact and excluded from order fits: the discrete
//! transform pair and the naturality identity hold to machine precision
//! on a common grid, so only cross-resolution comparisons produce
//! nonzero residuals.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::GroupDescriptor;
use crate::maps::{pullback_fd, pullback_maurer_cartan, GroupHomomorphism, SmoothMap};
use crate::path::AlgebraPath;
use crate::rng::NoiseSpec;
use crate::sampler;
use std::sync::Arc;

/// Residuals below this are treated as exact (no measurable order).
pub const MACHINE_FLOOR: f64 = 1e-13;

/// One row of a refinement table.
#[derive(Clone, Debug, Serialize)]
pub struct LevelError {
    pub level: u32,
    pub steps: usize,
    pub error: f64,
}

/// Errors across dyadic levels with observed orders.
#[derive(Clone, Debug, Serialize)]
pub struct RefinementStudy {
    pub quantity: String,
    pub rows: Vec<LevelError>,
    /// `log2(e_l / e_{l+1})` per adjacent pair; `None` at the machine floor.
    pub pairwise_orders: Vec<Option<f64>>,
    /// Least-squares slope of `log2 e` against the level, negated.
    pub fit_order: Option<f64>,
    /// Strict decrease of the error across levels.
    pub monotone: bool,
}

impl RefinementStudy {
    fn from_rows(quantity: impl Into<String>, rows: Vec<LevelError>) -> Self {
        let at_floor = rows.iter().any(|r| r.error < MACHINE_FLOOR);
        let pairwise_orders = rows
            .windows(2)
            .map(|w| {
                if w[0].error < MACHINE_FLOOR || w[1].error < MACHINE_FLOOR {
                    None
                } else {
                    Some((w[0].error / w[1].error).log2())
                }
            })
            .collect();
        let fit_order = if at_floor || rows.len() < 2 {
            None
        } else {
            // Least squares of log2(error) on level.
            let n = rows.len() as f64;
            let mean_x = rows.iter().map(|r| r.level as f64).sum::<f64>() / n;
            let mean_y = rows.iter().map(|r| r.error.log2()).sum::<f64>() / n;
            let mut num = 0.0;
            let mut den = 0.0;
            for r in &rows {
                let dx = r.level as f64 - mean_x;
                num += dx * (r.error.log2() - mean_y);
                den += dx * dx;
            }
            Some(-num / den)
        };
        let monotone = rows.windows(2).all(|w| w[1].error < w[0].error);
        RefinementStudy {
            quantity: quantity.into(),
            rows,
            pairwise_orders,
            fit_order,
            monotone,
        }
    }

    /// All rows at the machine floor.
    pub fn is_exact(&self) -> bool {
        self.rows.iter().all(|r| r.error < MACHINE_FLOOR)
    }
}

fn validate_levels(levels: &[u32], ref_level: u32) -> Result<()> {
    if levels.len() < 2 {
        return Err(Error::InvalidArgument("need at least two dyadic levels".into()));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("levels must be strictly increasing".into()));
    }
    if ref_level <= *levels.last().unwrap() {
        return Err(Error::InvalidArgument(
            "reference level must exceed the finest study level".into(),
        ));
    }
    Ok(())
}

/// Convergence of the exponential scheme: group distance, in log
/// coordinates, between the level-`l` path and the reference-level path of
/// the same Wiener tree, maximized over the coarse grid.
pub fn exp_log_scheme_study(
    group: &Arc<GroupDescriptor>,
    horizon: f64,
    levels: &[u32],
    ref_level: u32,
    noise: &NoiseSpec,
) -> Result<RefinementStudy> {
    validate_levels(levels, ref_level)?;
    let reference = sampler::stochastic_exponential(&sampler::dyadic_flat_bm(
        group, horizon, ref_level, noise,
    )?)?;
    let mut rows = Vec::with_capacity(levels.len());
    for &level in levels {
        let coarse = sampler::stochastic_exponential(&sampler::dyadic_flat_bm(
            group, horizon, level, noise,
        )?)?;
        let stride = 1usize << (ref_level - level);
        let mut worst = 0.0f64;
        for k in 0..=coarse.grid().steps() {
            let defect = group.log_increment(reference.value(k * stride), coarse.value(k))?;
            worst = worst.max(defect.norm());
        }
        rows.push(LevelError {
            level,
            steps: 1 << level,
            error: worst,
        });
    }
    Ok(RefinementStudy::from_rows(
        format!("exp_log_scheme:{}", group.name()),
        rows,
    ))
}

/// Cross-resolution naturality residual: the coarse-grid logarithm of the
/// mapped path against the pushed-forward fine-grid logarithm of the
/// reference path, on one Wiener tree.
pub fn naturality_refinement_study(
    phi: &GroupHomomorphism,
    horizon: f64,
    levels: &[u32],
    ref_level: u32,
    noise: &NoiseSpec,
) -> Result<RefinementStudy> {
    validate_levels(levels, ref_level)?;
    let domain = phi.domain();
    let reference_log = sampler::stochastic_logarithm(&sampler::stochastic_exponential(
        &sampler::dyadic_flat_bm(domain, horizon, ref_level, noise)?,
    )?)?;
    let mut rows = Vec::with_capacity(levels.len());
    for &level in levels {
        let coarse = sampler::stochastic_exponential(&sampler::dyadic_flat_bm(
            domain, horizon, level, noise,
        )?)?;
        let mapped: Vec<_> = coarse.values().iter().map(|m| phi.eval_matrix(m)).collect();
        let mapped_path = crate::path::GroupPath::new(
            Arc::clone(phi.codomain()),
            *coarse.grid(),
            mapped,
        )?;
        let log_mapped = sampler::stochastic_logarithm(&mapped_path)?;
        let stride = 1usize << (ref_level - level);
        let mut worst = 0.0f64;
        for k in 0..=coarse.grid().steps() {
            let pushed = phi.differential() * reference_log.value(k * stride);
            worst = worst.max((log_mapped.value(k) - pushed).norm());
        }
        rows.push(LevelError {
            level,
            steps: 1 << level,
            error: worst,
        });
    }
    Ok(RefinementStudy::from_rows(
        format!("naturality:{}", phi.name()),
        rows,
    ))
}

/// Coarse-graining residual of the naturality identity on one fixed path:
/// the reference path is generated once at `ref_level`, subsampled to each
/// study level, and the coarse-grid logarithm of its mapped subsample is
/// compared against the pushed-forward fine-grid logarithm. Unlike
/// [`naturality_refinement_study`], the coarse increments here are
/// products of many fine exponentials, so the commutator (Levy-area)
/// defect of the one-step logarithm accumulates and the residual decays
/// at the strong rate of the scheme.
pub fn naturality_coarse_graining_study(
    phi: &GroupHomomorphism,
    horizon: f64,
    levels: &[u32],
    ref_level: u32,
    noise: &NoiseSpec,
) -> Result<RefinementStudy> {
    validate_levels(levels, ref_level)?;
    let domain = phi.domain();
    let reference = sampler::stochastic_exponential(&sampler::dyadic_flat_bm(
        domain, horizon, ref_level, noise,
    )?)?;
    let reference_log = sampler::stochastic_logarithm(&reference)?;
    let mut rows = Vec::with_capacity(levels.len());
    for &level in levels {
        let stride = 1usize << (ref_level - level);
        let steps = 1usize << level;
        let grid = crate::grid::TimeGrid::new(horizon, steps)?;
        let subsampled: Vec<_> = (0..=steps)
            .map(|k| phi.eval_matrix(reference.value(k * stride)))
            .collect();
        let mapped = crate::path::GroupPath::new(Arc::clone(phi.codomain()), grid, subsampled)?;
        let log_mapped = sampler::stochastic_logarithm(&mapped)?;
        let mut worst = 0.0f64;
        for k in 0..=steps {
            let pushed = phi.differential() * reference_log.value(k * stride);
            worst = worst.max((log_mapped.value(k) - pushed).norm());
        }
        rows.push(LevelError {
            level,
            steps,
            error: worst,
        });
    }
    Ok(RefinementStudy::from_rows(
        format!("naturality_coarse_graining:{}", phi.name()),
        rows,
    ))
}

/// Same-grid naturality residual per level: the discrete identity
/// `log(phi(X)) = phi_* log(X)` evaluated on the level-`l` path itself.
/// Exact homomorphisms hold this at machine precision for every level.
pub fn naturality_samegrid_study(
    phi: &GroupHomomorphism,
    horizon: f64,
    levels: &[u32],
    noise: &NoiseSpec,
) -> Result<RefinementStudy> {
    if levels.is_empty() {
        return Err(Error::InvalidArgument("need at least one level".into()));
    }
    let domain = phi.domain();
    let mut rows = Vec::with_capacity(levels.len());
    for &level in levels {
        let path = sampler::stochastic_exponential(&sampler::dyadic_flat_bm(
            domain, horizon, level, noise,
        )?)?;
        let d = crate::maps::homomorphism_naturality_check(phi, &path)?;
        rows.push(LevelError {
            level,
            steps: 1 << level,
            error: d.iter().cloned().fold(0.0, f64::max),
        });
    }
    Ok(RefinementStudy::from_rows(
        format!("naturality_samegrid:{}", phi.name()),
        rows,
    ))
}

/// Order of the central-difference pullback against the analytic rule at
/// one point, halving the step from `h0`.
pub fn pullback_fd_study(
    map: &SmoothMap,
    point: &[f64],
    h0: f64,
    halvings: u32,
) -> Result<RefinementStudy> {
    if !map.has_analytic_pullback() {
        return Err(Error::InvalidArgument(format!(
            "map {} has no analytic pullback to compare against",
            map.name()
        )));
    }
    let exact = pullback_maurer_cartan(map, point, h0)?;
    let mut rows = Vec::new();
    for m in 0..=halvings {
        let h = h0 / (1u64 << m) as f64;
        let fd = pullback_fd(map, point, h)?;
        let mut worst = 0.0f64;
        for (f, e) in fd.iter().zip(&exact) {
            worst = worst.max((f - e).norm());
        }
        rows.push(LevelError {
            level: m,
            steps: 1 << m,
            error: worst,
        });
    }
    Ok(RefinementStudy::from_rows(
        format!("pullback_fd:{}", map.name()),
        rows,
    ))
}

/// Same-grid round-trip residual of the transform pair per level:
/// `max_k || log(exp(Y))_k - Y_k ||` on the tree path of each level.
pub fn roundtrip_samegrid_study(
    group: &Arc<GroupDescriptor>,
    horizon: f64,
    levels: &[u32],
    noise: &NoiseSpec,
) -> Result<RefinementStudy> {
    if levels.is_empty() {
        return Err(Error::InvalidArgument("need at least one level".into()));
    }
    let mut rows = Vec::with_capacity(levels.len());
    for &level in levels {
        let y = sampler::dyadic_flat_bm(group, horizon, level, noise)?;
        let back = sampler::stochastic_logarithm(&sampler::stochastic_exponential(&y)?)?;
        let error = roundtrip_defect(&y, &back);
        rows.push(LevelError {
            level,
            steps: 1 << level,
            error,
        });
    }
    Ok(RefinementStudy::from_rows(
        format!("roundtrip_samegrid:{}", group.name()),
        rows,
    ))
}

fn roundtrip_defect(a: &AlgebraPath, b: &AlgebraPath) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::registry;
    use crate::maps;

    #[test]
    fn scheme_error_decays_on_so3() {
        let so3 = registry::group("so3").unwrap();
        let study =
            exp_log_scheme_study(&so3, 1.0, &[4, 5, 6, 7], 10, &NoiseSpec::new(7, 0)).unwrap();
        assert_eq!(study.rows.len(), 4);
        assert!(study.rows[0].error > study.rows[3].error);
        let order = study.fit_order.unwrap();
        assert!(order > 0.2 && order < 1.2, "order {order}");
    }

    #[test]
    fn scheme_error_is_exact_on_abelian_groups() {
        let r2 = registry::group("r2").unwrap();
        let study =
            exp_log_scheme_study(&r2, 1.0, &[4, 5, 6], 9, &NoiseSpec::new(7, 1)).unwrap();
        assert!(study.is_exact(), "{:?}", study.rows);
        assert!(study.fit_order.is_none());
    }

    #[test]
    fn samegrid_residuals_sit_at_machine_floor() {
        let phi = maps::homomorphism("su2_to_so3").unwrap();
        let study =
            naturality_samegrid_study(&phi, 1.0, &[5, 6, 7], &NoiseSpec::new(3, 2)).unwrap();
        assert!(study.is_exact(), "{:?}", study.rows);

        let so3 = registry::group("so3").unwrap();
        let rt = roundtrip_samegrid_study(&so3, 1.0, &[5, 6, 7], &NoiseSpec::new(3, 3)).unwrap();
        assert!(rt.is_exact(), "{:?}", rt.rows);
    }

    #[test]
    fn pullback_fd_order_is_two_on_the_cubic_map() {
        let map = maps::smooth_map("exp_xcube_so3").unwrap();
        let study = pullback_fd_study(&map, &[0.6], 1e-2, 3).unwrap();
        let order = study.fit_order.unwrap();
        assert!((order - 2.0).abs() < 0.2, "order {order}");
    }

    #[test]
    fn level_validation_rejects_bad_inputs() {
        let so3 = registry::group("so3").unwrap();
        assert!(exp_log_scheme_study(&so3, 1.0, &[4], 8, &NoiseSpec::new(0, 0)).is_err());
        assert!(exp_log_scheme_study(&so3, 1.0, &[5, 4], 8, &NoiseSpec::new(0, 0)).is_err());
        assert!(exp_log_scheme_study(&so3, 1.0, &[4, 5], 5, &NoiseSpec::new(0, 0)).is_err());
    }
}
