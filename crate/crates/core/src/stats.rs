//! Statistical verifiers over path ensembles.
//!
//! Every test reduces an ensemble to per-checkpoint statistics and a
//! deterministic verdict. Reductions run in path-index order regardless of
//! the parallel schedule that produced the ensemble, so reports serialize
//! to identical bytes under any worker count. Drift tests are z-tests with
//! a Bonferroni-adjusted threshold over the number of comparisons.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::integrals::{self, BilinearField};
use crate::path::{AlgebraPath, RealPath};

/// Minimum ensemble size accepted by the z-test machinery.
pub const MIN_ENSEMBLE: usize = 100;

/// Deterministic outcome of a statistical verifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
    /// Degenerate input (for example zero variance); no decision possible.
    Inconclusive,
}

/// One statistic at one checkpoint. `score` is measured against
/// `threshold`; the checkpoint passes iff `score < threshold`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckpointStat {
    pub label: String,
    pub time: f64,
    pub statistic: f64,
    pub score: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Serializable result of one statistical experiment. Field order is the
/// serialization order; reports with equal content are byte-identical.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub verdict: Verdict,
    pub checkpoints: Vec<CheckpointStat>,
    pub ensemble_size: usize,
    pub horizon: f64,
    pub steps: usize,
    pub seed: u64,
    pub z_max: Option<f64>,
    pub rel_tol: Option<f64>,
    pub metrics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl TestReport {
    /// Stable JSON encoding of the report.
    pub fn to_json_bytes(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(self).expect("report serialization cannot fail")
    }
}

/// Bonferroni-adjusted z threshold: the two-sided tail budget of `z_max`
/// is split across `comparisons` tests.
pub fn bonferroni_z(z_max: f64, comparisons: usize) -> f64 {
    if comparisons <= 1 {
        return z_max;
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let tail = 1.0 - normal.cdf(z_max);
    normal.inverse_cdf(1.0 - tail / comparisons as f64)
}

/// Runs `f` for each path index and collects results in index order. The
/// reduction downstream of this call is sequential, which pins report
/// bytes regardless of thread count.
pub fn par_collect<T: Send>(
    count: usize,
    f: impl Fn(u64) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    (0..count as u64)
        .into_par_iter()
        .map(&f)
        .collect::<Result<Vec<T>>>()
}

/// Values of a real path at the requested checkpoint times.
pub fn checkpoint_values(path: &RealPath, times: &[f64]) -> Result<Vec<f64>> {
    times.iter().map(|t| path.value_at_time(*t)).collect()
}

fn mean_and_sd(values: impl Iterator<Item = f64> + Clone, count: usize) -> (f64, f64) {
    let mean = values.clone().sum::<f64>() / count as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1) as f64;
    (mean, var.sqrt())
}

/// Metadata shared by the report constructors.
#[derive(Clone, Copy, Debug)]
pub struct ReportMeta {
    pub horizon: f64,
    pub steps: usize,
    pub seed: u64,
}

/// Zero-drift z-test on per-path checkpoint values (`rows[p][c]` is path
/// `p` at checkpoint `c`). Available for runners that reduce ensembles on
/// the fly; [`martingale_drift_test`] is the path-level wrapper.
pub fn drift_report_from_values(
    name: &str,
    rows: &[Vec<f64>],
    times: &[f64],
    z_max: f64,
    meta: ReportMeta,
) -> Result<TestReport> {
    let paths = rows.len();
    if paths < MIN_ENSEMBLE {
        return Err(Error::Precondition(format!(
            "drift test needs at least {MIN_ENSEMBLE} paths, got {paths}"
        )));
    }
    let threshold = bonferroni_z(z_max, times.len());
    let mut checkpoints = Vec::with_capacity(times.len());
    let mut degenerate = 0usize;
    for (c, t) in times.iter().enumerate() {
        let (mean, sd) = mean_and_sd(rows.iter().map(|r| r[c]), paths);
        let (score, pass) = if sd == 0.0 {
            if mean == 0.0 {
                degenerate += 1;
                (0.0, true)
            } else {
                (f64::MAX, false)
            }
        } else {
            let z = mean * (paths as f64).sqrt() / sd;
            (z.abs(), z.abs() < threshold)
        };
        checkpoints.push(CheckpointStat {
            label: format!("drift@t{}", c + 1),
            time: *t,
            statistic: mean,
            score,
            threshold,
            pass,
        });
    }
    let verdict = overall_verdict(&checkpoints, degenerate);
    let mut notes = Vec::new();
    if degenerate > 0 {
        notes.push(format!("{degenerate} zero-variance checkpoint statistics"));
    }
    Ok(TestReport {
        name: name.to_string(),
        verdict,
        checkpoints,
        ensemble_size: paths,
        horizon: meta.horizon,
        steps: meta.steps,
        seed: meta.seed,
        z_max: Some(z_max),
        rel_tol: None,
        metrics: BTreeMap::new(),
        notes,
    })
}

/// Zero-drift z-test battery over vector-valued checkpoint rows
/// (`rows[p][c][i]` is coordinate `i` of path `p` at checkpoint `c`),
/// Bonferroni-adjusted over all `dim * times` comparisons. When the last
/// checkpoint sits at the horizon, the terminal drift rates per coordinate
/// are recorded in `metrics` as `drift_rate[i]` plus their Euclidean norm.
pub fn battery_from_rows(
    name: &str,
    dim: usize,
    times: &[f64],
    rows: &[Vec<Vec<f64>>],
    z_max: f64,
    meta: ReportMeta,
) -> Result<TestReport> {
    let paths = rows.len();
    if paths < MIN_ENSEMBLE {
        return Err(Error::Precondition(format!(
            "drift battery needs at least {MIN_ENSEMBLE} paths, got {paths}"
        )));
    }
    let threshold = bonferroni_z(z_max, dim * times.len());
    let mut checkpoints = Vec::with_capacity(dim * times.len());
    let mut degenerate = 0usize;
    let mut metrics = BTreeMap::new();
    let mut rate_sq = 0.0;
    for (c, t) in times.iter().enumerate() {
        for i in 0..dim {
            let (mean, sd) = mean_and_sd(rows.iter().map(|r| r[c][i]), paths);
            let (score, pass) = if sd == 0.0 {
                if mean == 0.0 {
                    degenerate += 1;
                    (0.0, true)
                } else {
                    (f64::MAX, false)
                }
            } else {
                let z = mean * (paths as f64).sqrt() / sd;
                (z.abs(), z.abs() < threshold)
            };
            checkpoints.push(CheckpointStat {
                label: format!("theta[{i}]@t{}", c + 1),
                time: *t,
                statistic: mean,
                score,
                threshold,
                pass,
            });
            if c + 1 == times.len() && (t - meta.horizon).abs() < 1e-9 * meta.horizon {
                let rate = mean / t;
                metrics.insert(format!("drift_rate[{i}]"), rate);
                rate_sq += rate * rate;
            }
        }
    }
    if !metrics.is_empty() {
        metrics.insert("drift_rate_norm".to_string(), rate_sq.sqrt());
    }
    let verdict = overall_verdict(&checkpoints, degenerate);
    let mut notes = Vec::new();
    if degenerate > 0 {
        notes.push(format!("{degenerate} zero-variance battery components"));
    }
    Ok(TestReport {
        name: name.to_string(),
        verdict,
        checkpoints,
        ensemble_size: paths,
        horizon: meta.horizon,
        steps: meta.steps,
        seed: meta.seed,
        z_max: Some(z_max),
        rel_tol: None,
        metrics,
        notes,
    })
}

/// Fail beats everything; a clean pass requires at least one informative
/// statistic. Identically-zero components (an exact martingale) are
/// trivial passes, so only a fully degenerate battery is inconclusive.
fn overall_verdict(checkpoints: &[CheckpointStat], degenerate: usize) -> Verdict {
    if checkpoints.iter().any(|c| !c.pass) {
        Verdict::Fail
    } else if degenerate == checkpoints.len() {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    }
}

/// Zero-drift martingale test at the given checkpoint times.
pub fn martingale_drift_test(
    name: &str,
    ensemble: &[RealPath],
    times: &[f64],
    z_max: f64,
    seed: u64,
) -> Result<TestReport> {
    let grid = ensemble
        .first()
        .map(|p| *p.grid())
        .ok_or_else(|| Error::DegenerateEnsemble("empty ensemble".into()))?;
    let mut rows = Vec::with_capacity(ensemble.len());
    for path in ensemble {
        if path.grid() != &grid {
            return Err(Error::GridMismatch);
        }
        rows.push(checkpoint_values(path, times)?);
    }
    drift_report_from_values(
        name,
        &rows,
        times,
        z_max,
        ReportMeta {
            horizon: grid.horizon(),
            steps: grid.steps(),
            seed,
        },
    )
}

/// Per-path summary used by the Levy characterization: realized
/// covariation entries and path values, both in metric-orthonormal
/// coordinates, at each checkpoint.
#[derive(Clone, Debug)]
pub struct LevySummary {
    /// `cov[c]` is the upper triangle (row-major) of the realized
    /// covariation matrix at checkpoint `c`.
    pub cov: Vec<Vec<f64>>,
    /// `value[c]` is the orthonormal coordinate vector at checkpoint `c`.
    pub value: Vec<Vec<f64>>,
}

/// Reduces one algebra path to its Levy summary.
pub fn levy_summary(path: &AlgebraPath, times: &[f64]) -> Result<LevySummary> {
    let n = path.group().dim();
    let dual = path.group().ortho_dual();
    let indices: Result<Vec<usize>> = times.iter().map(|t| path.grid().index_of(*t)).collect();
    let indices = indices?;
    let mut cov_acc = vec![0.0; n * (n + 1) / 2];
    let mut cov = Vec::with_capacity(times.len());
    let mut value = Vec::with_capacity(times.len());
    let mut next_checkpoint = 0usize;
    let mut prev = dual * path.value(0);
    for k in 0..=path.grid().steps() {
        if k > 0 {
            let current = dual * path.value(k);
            let delta = &current - &prev;
            let mut slot = 0;
            for i in 0..n {
                for j in i..n {
                    cov_acc[slot] += delta[i] * delta[j];
                    slot += 1;
                }
            }
            prev = current;
        }
        while next_checkpoint < indices.len() && indices[next_checkpoint] == k {
            cov.push(cov_acc.clone());
            value.push(prev.iter().copied().collect());
            next_checkpoint += 1;
        }
    }
    Ok(LevySummary { cov, value })
}

/// Levy characterization from per-path summaries.
pub fn levy_report_from_summaries(
    name: &str,
    summaries: &[LevySummary],
    dim: usize,
    times: &[f64],
    rel_tol: f64,
    z_max: f64,
    meta: ReportMeta,
) -> Result<TestReport> {
    let paths = summaries.len();
    if paths < MIN_ENSEMBLE {
        return Err(Error::Precondition(format!(
            "levy test needs at least {MIN_ENSEMBLE} paths, got {paths}"
        )));
    }
    let mut checkpoints = Vec::new();
    // Covariation criterion: ensemble-mean realized covariation close to
    // delta_ij * t in relative terms.
    for (c, t) in times.iter().enumerate() {
        let mut slot = 0;
        for i in 0..dim {
            for j in i..dim {
                let mean = summaries.iter().map(|s| s.cov[c][slot]).sum::<f64>() / paths as f64;
                let target = if i == j { *t } else { 0.0 };
                let score = (mean - target).abs() / (rel_tol * t);
                checkpoints.push(CheckpointStat {
                    label: format!("covar[{i}{j}]@t{}", c + 1),
                    time: *t,
                    statistic: mean,
                    score,
                    threshold: 1.0,
                    pass: score < 1.0,
                });
                slot += 1;
            }
        }
    }
    // Componentwise zero-drift criterion.
    let drift_threshold = bonferroni_z(z_max, dim * times.len());
    let mut degenerate = 0usize;
    for (c, t) in times.iter().enumerate() {
        for i in 0..dim {
            let (mean, sd) = mean_and_sd(summaries.iter().map(|s| s.value[c][i]), paths);
            let (score, pass) = if sd == 0.0 {
                if mean == 0.0 {
                    degenerate += 1;
                    (0.0, true)
                } else {
                    (f64::MAX, false)
                }
            } else {
                let z = mean * (paths as f64).sqrt() / sd;
                (z.abs(), z.abs() < drift_threshold)
            };
            checkpoints.push(CheckpointStat {
                label: format!("drift[{i}]@t{}", c + 1),
                time: *t,
                statistic: mean,
                score,
                threshold: drift_threshold,
                pass,
            });
        }
    }
    let verdict = overall_verdict(&checkpoints, degenerate);
    let mut notes = Vec::new();
    if degenerate > 0 {
        notes.push(format!("{degenerate} zero-variance drift components"));
    }
    Ok(TestReport {
        name: name.to_string(),
        verdict,
        checkpoints,
        ensemble_size: paths,
        horizon: meta.horizon,
        steps: meta.steps,
        seed: meta.seed,
        z_max: Some(z_max),
        rel_tol: Some(rel_tol),
        metrics: BTreeMap::new(),
        notes,
    })
}

/// Levy characterization of Brownian motion: the ensemble-mean realized
/// covariation matrix must match `delta_ij * t` at every checkpoint and
/// every component must pass the zero-drift test. Coordinates are taken in
/// the metric-orthonormal frame.
pub fn levy_characterization_test(
    name: &str,
    ensemble: &[AlgebraPath],
    times: &[f64],
    rel_tol: f64,
    z_max: f64,
    seed: u64,
) -> Result<TestReport> {
    let first = ensemble
        .first()
        .ok_or_else(|| Error::DegenerateEnsemble("empty ensemble".into()))?;
    let grid = *first.grid();
    let dim = first.group().dim();
    let mut summaries = Vec::with_capacity(ensemble.len());
    for path in ensemble {
        if path.grid() != &grid {
            return Err(Error::GridMismatch);
        }
        summaries.push(levy_summary(path, times)?);
    }
    levy_report_from_summaries(
        name,
        &summaries,
        dim,
        times,
        rel_tol,
        z_max,
        ReportMeta {
            horizon: grid.horizon(),
            steps: grid.steps(),
            seed,
        },
    )
}

/// Brownian trace rule: the ensemble mean of the quadratic integral of `b`
/// must match the ensemble mean of the time integral of the metric trace
/// of `b` along the path, in relative terms, at every checkpoint.
pub fn brownian_trace_test(
    name: &str,
    ensemble: &[AlgebraPath],
    b: &BilinearField,
    times: &[f64],
    rel_tol: f64,
    seed: u64,
) -> Result<TestReport> {
    let first = ensemble
        .first()
        .ok_or_else(|| Error::DegenerateEnsemble("empty ensemble".into()))?;
    let grid = *first.grid();
    let paths = ensemble.len();
    let dt = grid.dt();
    let mut quad_means = vec![0.0; times.len()];
    let mut trace_means = vec![0.0; times.len()];
    for path in ensemble {
        if path.grid() != &grid {
            return Err(Error::GridMismatch);
        }
        let quad = integrals::quadratic_integral(b, path)?;
        let quad_cp = checkpoint_values(&quad, times)?;
        // Left-point time quadrature of the metric trace along the path.
        let indices: Result<Vec<usize>> = times.iter().map(|t| grid.index_of(*t)).collect();
        let indices = indices?;
        let mut acc = 0.0;
        let mut trace_cp = vec![0.0; times.len()];
        let mut next = 0usize;
        for k in 0..=grid.steps() {
            while next < indices.len() && indices[next] == k {
                trace_cp[next] = acc;
                next += 1;
            }
            if k < grid.steps() {
                acc += b.metric_trace(path.value(k)) * dt;
            }
        }
        for c in 0..times.len() {
            quad_means[c] += quad_cp[c];
            trace_means[c] += trace_cp[c];
        }
    }
    let mut checkpoints = Vec::with_capacity(times.len());
    let mut degenerate = 0usize;
    for (c, t) in times.iter().enumerate() {
        let mq = quad_means[c] / paths as f64;
        let mt = trace_means[c] / paths as f64;
        let denom = mt.abs().max(1e-12);
        if mt.abs() < 1e-12 && mq.abs() < 1e-12 {
            degenerate += 1;
        }
        let score = (mq - mt).abs() / (rel_tol * denom);
        checkpoints.push(CheckpointStat {
            label: format!("trace@t{}", c + 1),
            time: *t,
            statistic: mq,
            score,
            threshold: 1.0,
            pass: score < 1.0,
        });
    }
    let verdict = overall_verdict(&checkpoints, degenerate);
    Ok(TestReport {
        name: name.to_string(),
        verdict,
        checkpoints,
        ensemble_size: paths,
        horizon: grid.horizon(),
        steps: grid.steps(),
        seed,
        z_max: None,
        rel_tol: Some(rel_tol),
        metrics: BTreeMap::new(),
        notes: Vec::new(),
    })
}

/// Default checkpoint times `{T/4, T/2, 3T/4, T}`.
pub fn default_checkpoints(horizon: f64) -> Vec<f64> {
    vec![
        horizon * 0.25,
        horizon * 0.5,
        horizon * 0.75,
        horizon,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection::Covector;
    use crate::grid::TimeGrid;
    use crate::group::registry;
    use crate::integrals::flat_ito_constant;
    use crate::rng::NoiseSpec;
    use crate::sampler;
    use nalgebra::dvector;
    use std::sync::Arc;

    #[test]
    fn bonferroni_widens_the_threshold() {
        let z = bonferroni_z(4.0, 4);
        assert!(z > 4.0 && z < 5.0, "adjusted z {z}");
        assert_eq!(bonferroni_z(4.0, 1), 4.0);
    }

    #[test]
    fn martingale_test_passes_for_true_martingale() {
        let r1 = registry::group("r1").unwrap();
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let theta = Covector::basis(&r1, 0).unwrap();
        let ensemble: Vec<_> = (0..400)
            .map(|p| {
                let path = sampler::sample_flat_bm(&r1, &grid, &NoiseSpec::new(500, p)).unwrap();
                flat_ito_constant(&theta, &path).unwrap()
            })
            .collect();
        let report = martingale_drift_test(
            "null",
            &ensemble,
            &default_checkpoints(1.0),
            4.0,
            500,
        )
        .unwrap();
        assert_eq!(report.verdict, Verdict::Pass);
    }

    #[test]
    fn martingale_test_fails_for_drifted_paths() {
        let r1 = registry::group("r1").unwrap();
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let drift = r1.algebra_vector(dvector![0.5]).unwrap();
        let ensemble: Vec<_> = (0..400)
            .map(|p| {
                let path =
                    sampler::sample_drifted_martingale(&r1, &grid, &NoiseSpec::new(501, p), &drift)
                        .unwrap();
                RealPath::new(grid, path.values().iter().map(|v| v[0]).collect()).unwrap()
            })
            .collect();
        let report = martingale_drift_test(
            "drifted",
            &ensemble,
            &default_checkpoints(1.0),
            4.0,
            501,
        )
        .unwrap();
        assert_eq!(report.verdict, Verdict::Fail);
        let terminal = report.checkpoints.last().unwrap();
        assert!(terminal.score > 5.0);
    }

    #[test]
    fn constant_zero_ensemble_is_inconclusive() {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let ensemble: Vec<_> = (0..200)
            .map(|_| RealPath::new(grid, vec![0.0; 5]).unwrap())
            .collect();
        let report =
            martingale_drift_test("degenerate", &ensemble, &[0.5, 1.0], 4.0, 0).unwrap();
        assert_eq!(report.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn small_ensembles_are_rejected() {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let ensemble: Vec<_> = (0..10)
            .map(|_| RealPath::new(grid, vec![0.0; 5]).unwrap())
            .collect();
        assert!(matches!(
            martingale_drift_test("tiny", &ensemble, &[1.0], 4.0, 0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn levy_passes_for_flat_bm_and_fails_for_deterministic_line() {
        let r3 = registry::group("r3").unwrap();
        let grid = TimeGrid::new(1.0, 200).unwrap();
        let times = default_checkpoints(1.0);
        let ensemble: Vec<_> = (0..300)
            .map(|p| sampler::sample_flat_bm(&r3, &grid, &NoiseSpec::new(502, p)).unwrap())
            .collect();
        let report =
            levy_characterization_test("flat", &ensemble, &times, 0.08, 4.0, 502).unwrap();
        assert_eq!(report.verdict, Verdict::Pass, "{report:?}");

        let xi = dvector![1.0, 0.0, 0.0];
        let line: Vec<_> = (0..300)
            .map(|_| {
                let values = grid.times().map(|t| &xi * t).collect();
                AlgebraPath::new(Arc::clone(&r3), grid, values).unwrap()
            })
            .collect();
        let report =
            levy_characterization_test("line", &line, &times, 0.08, 4.0, 502).unwrap();
        assert_eq!(report.verdict, Verdict::Fail);
    }

    #[test]
    fn trace_test_matches_dimension_for_flat_bm() {
        let r2 = registry::group("r2").unwrap();
        let grid = TimeGrid::new(1.0, 200).unwrap();
        let ensemble: Vec<_> = (0..300)
            .map(|p| sampler::sample_flat_bm(&r2, &grid, &NoiseSpec::new(503, p)).unwrap())
            .collect();
        let b = BilinearField::metric(&r2);
        let report = brownian_trace_test(
            "trace",
            &ensemble,
            &b,
            &default_checkpoints(1.0),
            0.1,
            503,
        )
        .unwrap();
        assert_eq!(report.verdict, Verdict::Pass, "{report:?}");
        // Terminal statistic is close to dim * T = 2.
        let terminal = &report.checkpoints.last().unwrap();
        assert!((terminal.statistic - 2.0).abs() < 0.2);
    }

    #[test]
    fn trace_test_fails_on_smooth_paths() {
        let r2 = registry::group("r2").unwrap();
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let ensemble: Vec<_> = (0..200)
            .map(|_| {
                let values = grid.times().map(|t| dvector![t, -t]).collect();
                AlgebraPath::new(Arc::clone(&r2), grid, values).unwrap()
            })
            .collect();
        let b = BilinearField::metric(&r2);
        let report = brownian_trace_test(
            "smooth",
            &ensemble,
            &b,
            &default_checkpoints(1.0),
            0.1,
            0,
        )
        .unwrap();
        assert_eq!(report.verdict, Verdict::Fail);
    }

    #[test]
    fn reports_serialize_to_identical_bytes() {
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let mk = || {
            let ensemble: Vec<_> = (0..150)
                .map(|p| {
                    let r1 = registry::group("r1").unwrap();
                    let path =
                        sampler::sample_flat_bm(&r1, &grid, &NoiseSpec::new(504, p)).unwrap();
                    RealPath::new(grid, path.values().iter().map(|v| v[0]).collect()).unwrap()
                })
                .collect();
            martingale_drift_test("bytes", &ensemble, &[0.5, 1.0], 4.0, 504)
                .unwrap()
                .to_json_bytes()
        };
        assert_eq!(mk(), mk());
    }
}
