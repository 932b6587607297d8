//! Smooth maps from flat sources into a group, and group homomorphisms.
//!
//! Sources are flat (Euclidean R^n or a flat torus, n <= 3), which keeps
//! the co-differential a plain divergence: `d* theta = -sum_i d_i
//! theta(e_i)`. The left-trivialized data of a map `F` is its
//! Maurer-Cartan pullback `a_i(x) = (F* omega)(e_i)`; harmonicity reduces
//! to the vanishing of `d* F* omega`, checked either from analytic
//! pullbacks or from central differences, and cross-checked by a
//! Monte-Carlo martingale battery on `F(B)` for source Brownian motions.

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};

use crate::connection::ConnectionFunction;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::group::{registry, GroupDescriptor};
use crate::path::GroupPath;
use crate::rng::{NoiseDomain, NoiseSpec, PathRng};
use crate::sampler;
use crate::stats::{self, ReportMeta, TestReport};

/// Flat source domain of a smooth map.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SourceKind {
    Euclidean,
    FlatTorus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SourceDomain {
    pub dim: usize,
    pub kind: SourceKind,
}

impl SourceDomain {
    pub fn euclidean(dim: usize) -> Self {
        SourceDomain {
            dim,
            kind: SourceKind::Euclidean,
        }
    }
}

type MapEval = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
type PullbackEval = Arc<dyn Fn(&[f64]) -> Vec<DVector<f64>> + Send + Sync>;
type CodiffEval = Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>;

/// Smooth map from a flat source into a registered group. Analytic
/// pullbacks and co-differentials, when present, serve as oracles for the
/// finite-difference route.
#[derive(Clone)]
pub struct SmoothMap {
    name: String,
    source: SourceDomain,
    target: Arc<GroupDescriptor>,
    eval: MapEval,
    analytic_pullback: Option<PullbackEval>,
    analytic_codifferential: Option<CodiffEval>,
}

impl SmoothMap {
    pub fn new(
        name: impl Into<String>,
        source: SourceDomain,
        target: Arc<GroupDescriptor>,
        eval: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        SmoothMap {
            name: name.into(),
            source,
            target,
            eval: Arc::new(eval),
            analytic_pullback: None,
            analytic_codifferential: None,
        }
    }

    pub fn with_analytic_pullback(
        mut self,
        pullback: impl Fn(&[f64]) -> Vec<DVector<f64>> + Send + Sync + 'static,
    ) -> Self {
        self.analytic_pullback = Some(Arc::new(pullback));
        self
    }

    pub fn with_analytic_codifferential(
        mut self,
        codiff: impl Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        self.analytic_codifferential = Some(Arc::new(codiff));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn source(&self) -> SourceDomain {
        self.source
    }

    pub fn target(&self) -> &Arc<GroupDescriptor> {
        &self.target
    }

    pub fn has_analytic_pullback(&self) -> bool {
        self.analytic_pullback.is_some()
    }

    pub fn has_analytic_codifferential(&self) -> bool {
        self.analytic_codifferential.is_some()
    }

    pub fn eval_matrix(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        if x.len() != self.source.dim {
            return Err(Error::DimensionMismatch {
                expected: self.source.dim,
                got: x.len(),
            });
        }
        Ok((self.eval)(x))
    }
}

/// Central finite-difference Maurer-Cartan pullback:
/// `a_i(x) = log(F(x - h e_i)^{-1} F(x + h e_i)) / (2h)`.
pub fn pullback_fd(map: &SmoothMap, x: &[f64], h: f64) -> Result<Vec<DVector<f64>>> {
    if h <= 0.0 {
        return Err(Error::InvalidArgument("finite-difference step must be positive".into()));
    }
    let mut out = Vec::with_capacity(map.source.dim);
    for i in 0..map.source.dim {
        let mut plus = x.to_vec();
        let mut minus = x.to_vec();
        plus[i] += h;
        minus[i] -= h;
        let f_minus = map.eval_matrix(&minus)?;
        let f_plus = map.eval_matrix(&plus)?;
        let delta = map.target.log_increment(&f_minus, &f_plus)?;
        out.push(delta / (2.0 * h));
    }
    Ok(out)
}

/// Maurer-Cartan pullback, analytic when the map ships one.
pub fn pullback_maurer_cartan(map: &SmoothMap, x: &[f64], h: f64) -> Result<Vec<DVector<f64>>> {
    if let Some(analytic) = &map.analytic_pullback {
        return Ok(analytic(x));
    }
    pullback_fd(map, x, h)
}

/// Divergence of the pullback frame, `sum_i d_i a_i(x)`, by central
/// differences over the (possibly analytic) pullback.
fn pullback_divergence(map: &SmoothMap, x: &[f64], h: f64) -> Result<DVector<f64>> {
    let mut acc = DVector::zeros(map.target.dim());
    for i in 0..map.source.dim {
        let mut plus = x.to_vec();
        let mut minus = x.to_vec();
        plus[i] += h;
        minus[i] -= h;
        let a_plus = pullback_maurer_cartan(map, &plus, h)?;
        let a_minus = pullback_maurer_cartan(map, &minus, h)?;
        acc += (&a_plus[i] - &a_minus[i]) / (2.0 * h);
    }
    Ok(acc)
}

/// Co-differential of the pulled-back Maurer-Cartan form on a flat source:
/// `d* F* omega = -sum_i d_i a_i(x)`, or the analytic rule when present.
pub fn codifferential(map: &SmoothMap, x: &[f64], h: f64) -> Result<DVector<f64>> {
    if let Some(analytic) = &map.analytic_codifferential {
        return Ok(analytic(x));
    }
    codifferential_fd(map, x, h)
}

/// Finite-difference co-differential, ignoring any analytic rule at the
/// top level (inner pullbacks still use the analytic route when present).
pub fn codifferential_fd(map: &SmoothMap, x: &[f64], h: f64) -> Result<DVector<f64>> {
    Ok(-pullback_divergence(map, x, h)?)
}

/// Left-trivialized tension field on a flat source:
/// `tau(x) = sum_i [ d_i a_i(x) + alpha(a_i(x), a_i(x)) ]`.
/// For skew `alpha` the second term vanishes and `tau = -d* F* omega`.
pub fn tension_field(
    map: &SmoothMap,
    x: &[f64],
    alpha: &ConnectionFunction,
    h: f64,
) -> Result<DVector<f64>> {
    alpha.group().ensure_same(&map.target)?;
    let mut tau = pullback_divergence(map, x, h)?;
    let frame = pullback_maurer_cartan(map, x, h)?;
    for a_i in &frame {
        tau += alpha.evaluate_coords(a_i, a_i);
    }
    Ok(tau)
}

/// Rectangular sampling lattice in the source domain.
#[derive(Clone, Debug)]
pub struct DomainLattice {
    mins: Vec<f64>,
    maxs: Vec<f64>,
    points_per_axis: usize,
}

impl DomainLattice {
    pub fn new(mins: Vec<f64>, maxs: Vec<f64>, points_per_axis: usize) -> Result<Self> {
        if mins.len() != maxs.len() || mins.is_empty() {
            return Err(Error::InvalidArgument("lattice bounds must have equal nonzero length".into()));
        }
        if points_per_axis < 2 {
            return Err(Error::InvalidArgument("lattice needs at least 2 points per axis".into()));
        }
        if mins.iter().zip(&maxs).any(|(a, b)| a >= b) {
            return Err(Error::InvalidArgument("lattice bounds must be increasing".into()));
        }
        Ok(DomainLattice {
            mins,
            maxs,
            points_per_axis,
        })
    }

    /// Symmetric cube `[-1, 1]^dim` with the given resolution.
    pub fn symmetric(dim: usize, points_per_axis: usize) -> Result<Self> {
        DomainLattice::new(vec![-1.0; dim], vec![1.0; dim], points_per_axis)
    }

    pub fn dim(&self) -> usize {
        self.mins.len()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        let dim = self.dim();
        let m = self.points_per_axis;
        let total = m.pow(dim as u32);
        let mut out = Vec::with_capacity(total);
        for flat in 0..total {
            let mut point = Vec::with_capacity(dim);
            let mut rest = flat;
            for axis in 0..dim {
                let idx = rest % m;
                rest /= m;
                let frac = idx as f64 / (m - 1) as f64;
                point.push(self.mins[axis] + frac * (self.maxs[axis] - self.mins[axis]));
            }
            out.push(point);
        }
        out
    }
}

/// How residuals are evaluated in [`pluzhnikov_check`].
#[derive(Clone, Copy, Debug)]
pub enum ResidualMode {
    /// Use the map's analytic co-differential (error if absent).
    Analytic,
    /// Central differences with the given step.
    FiniteDifference { h: f64 },
}

/// Result of the divergence criterion over a lattice.
#[derive(Clone, Debug)]
pub struct PluzhnikovOutcome {
    pub harmonic: bool,
    pub max_residual: f64,
    /// Per-point residual vectors for inspection/export.
    pub residuals: Vec<(Vec<f64>, DVector<f64>)>,
}

/// Harmonicity by the divergence criterion: `F` is declared harmonic iff
/// the co-differential norm stays below `tol` over the whole lattice.
pub fn pluzhnikov_check(
    map: &SmoothMap,
    lattice: &DomainLattice,
    tol: f64,
    mode: ResidualMode,
) -> Result<PluzhnikovOutcome> {
    if lattice.dim() != map.source.dim {
        return Err(Error::DimensionMismatch {
            expected: map.source.dim,
            got: lattice.dim(),
        });
    }
    let mut residuals = Vec::new();
    let mut max_residual = 0.0f64;
    for point in lattice.points() {
        let value = match mode {
            ResidualMode::Analytic => {
                if map.analytic_codifferential.is_none() {
                    return Err(Error::InvalidArgument(format!(
                        "map {} has no analytic codifferential",
                        map.name
                    )));
                }
                codifferential(map, &point, 1e-4)?
            }
            ResidualMode::FiniteDifference { h } => codifferential_fd(map, &point, h)?,
        };
        max_residual = max_residual.max(value.norm());
        residuals.push((point, value));
    }
    Ok(PluzhnikovOutcome {
        harmonic: max_residual <= tol,
        max_residual,
        residuals,
    })
}

/// Caps the automatic dyadic grid refinements of the Monte-Carlo battery.
const MAX_GRID_REFINEMENTS: u32 = 4;

/// Monte-Carlo harmonicity: sample source Brownian motions `B`, push them
/// through `F`, and test the group Ito integrals of all basis covectors
/// (equivalently the stochastic-logarithm coordinates of `F(B)`) for zero
/// drift. Branch errors trigger dyadic grid refinement up to a cap.
///
/// The report carries the measured terminal drift rates per covector in
/// `metrics` (keys `drift_rate[i]`, plus `drift_rate_norm`), which for a
/// non-harmonic map estimate half the tension field.
pub fn harmonicity_monte_carlo(
    map: &SmoothMap,
    alpha: &ConnectionFunction,
    grid: &TimeGrid,
    ensemble_size: usize,
    seed: u64,
    times: &[f64],
    z_max: f64,
) -> Result<TestReport> {
    alpha.group().ensure_same(&map.target)?;
    if !alpha.is_skew_symmetric() {
        return Err(Error::NotSkewSymmetric);
    }
    let mut steps = grid.steps();
    for attempt in 0..=MAX_GRID_REFINEMENTS {
        let working = TimeGrid::new(grid.horizon(), steps)?;
        let rows = stats::par_collect(ensemble_size, |p| {
            mc_log_rows(map, &working, &NoiseSpec::new(seed, p), times)
        });
        match rows {
            Ok(rows) => {
                let meta = ReportMeta {
                    horizon: working.horizon(),
                    steps: working.steps(),
                    seed,
                };
                let mut report = stats::battery_from_rows(
                    &format!("harmonicity:{}", map.name),
                    map.target.dim(),
                    times,
                    &rows,
                    z_max,
                    meta,
                )?;
                report
                    .metrics
                    .insert("grid_refinements".to_string(), attempt as f64);
                return Ok(report);
            }
            Err(Error::BranchCut { .. }) if attempt < MAX_GRID_REFINEMENTS => {
                steps *= 2;
            }
            Err(e) => return Err(e),
        }
    }
    unreachable!("refinement loop returns or errors")
}

/// One path of the Monte-Carlo battery: checkpoint values of the
/// stochastic-logarithm coordinates of `F(B)`.
fn mc_log_rows(
    map: &SmoothMap,
    grid: &TimeGrid,
    noise: &NoiseSpec,
    times: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let n_src = map.source.dim;
    let n_tgt = map.target.dim();
    let indices: Result<Vec<usize>> = times.iter().map(|t| grid.index_of(*t)).collect();
    let indices = indices?;
    let mut rng = PathRng::new(noise, NoiseDomain::Increments);
    let mut buf = vec![0.0; n_src];
    let sqrt_dt = grid.dt().sqrt();

    let mut x = vec![0.0; n_src];
    let mut prev = map.eval_matrix(&x)?;
    let mut cum = DVector::zeros(n_tgt);
    let mut rows = Vec::with_capacity(times.len());
    let mut next = 0usize;
    for k in 0..=grid.steps() {
        if k > 0 {
            rng.standard_normals((k - 1) as u64, &mut buf);
            for (xi, b) in x.iter_mut().zip(&buf) {
                *xi += sqrt_dt * b;
            }
            let current = map.eval_matrix(&x)?;
            cum += map.target.log_increment(&prev, &current)?;
            prev = current;
        }
        while next < indices.len() && indices[next] == k {
            rows.push(cum.iter().copied().collect());
            next += 1;
        }
    }
    Ok(rows)
}

// ----- homomorphisms ---------------------------------------------------------

type HomEval = Arc<dyn Fn(&DMatrix<f64>) -> DMatrix<f64> + Send + Sync>;

/// Homomorphism between registered groups with its differential at the
/// identity (codomain coordinates of the images of the domain basis).
#[derive(Clone)]
pub struct GroupHomomorphism {
    name: String,
    domain: Arc<GroupDescriptor>,
    codomain: Arc<GroupDescriptor>,
    eval: HomEval,
    differential: DMatrix<f64>,
}

impl GroupHomomorphism {
    pub fn new(
        name: impl Into<String>,
        domain: Arc<GroupDescriptor>,
        codomain: Arc<GroupDescriptor>,
        eval: impl Fn(&DMatrix<f64>) -> DMatrix<f64> + Send + Sync + 'static,
        differential: DMatrix<f64>,
    ) -> Result<Self> {
        if differential.nrows() != codomain.dim() || differential.ncols() != domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: codomain.dim(),
                got: differential.nrows(),
            });
        }
        Ok(GroupHomomorphism {
            name: name.into(),
            domain,
            codomain,
            eval: Arc::new(eval),
            differential,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &Arc<GroupDescriptor> {
        &self.domain
    }

    pub fn codomain(&self) -> &Arc<GroupDescriptor> {
        &self.codomain
    }

    pub fn differential(&self) -> &DMatrix<f64> {
        &self.differential
    }

    /// Returns a copy with a perturbed differential; used to exercise the
    /// commutation precondition.
    pub fn with_differential(&self, differential: DMatrix<f64>) -> Result<Self> {
        GroupHomomorphism::new(
            self.name.clone(),
            Arc::clone(&self.domain),
            Arc::clone(&self.codomain),
            {
                let eval = Arc::clone(&self.eval);
                move |m| eval(m)
            },
            differential,
        )
    }

    pub fn eval_matrix(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        (self.eval)(g)
    }

    /// Checks the homomorphism property on deterministic pseudo-random
    /// samples and the differential against `log(phi(exp(t e_i))) / t`.
    pub fn validate(&self) -> Result<()> {
        let mut rng = PathRng::new(&NoiseSpec::new(0xF00D, 0), NoiseDomain::Increments);
        let mut buf = vec![0.0; self.domain.dim()];
        for trial in 0..8u64 {
            rng.standard_normals(trial, &mut buf);
            let v = DVector::from_fn(self.domain.dim(), |i, _| 0.3 * buf[i]);
            rng.standard_normals(100 + trial, &mut buf);
            let w = DVector::from_fn(self.domain.dim(), |i, _| 0.3 * buf[i]);
            let g = self.domain.exp_matrix(&v)?;
            let h = self.domain.exp_matrix(&w)?;
            let lhs = self.eval_matrix(&(&g * &h));
            let rhs = self.eval_matrix(&g) * self.eval_matrix(&h);
            let defect = (lhs - rhs).norm();
            if defect > 1e-10 {
                return Err(Error::Precondition(format!(
                    "{}: homomorphism property fails (defect {defect:.3e})",
                    self.name
                )));
            }
        }
        let t = 1e-3;
        for i in 0..self.domain.dim() {
            let mut e = DVector::zeros(self.domain.dim());
            e[i] = t;
            let image = self.eval_matrix(&self.domain.exp_matrix(&e)?);
            let (log_img, _) = self.codomain.log_matrix(&image)?;
            let fd = log_img / t;
            let column = self.differential.column(i);
            if (fd - column).norm() > 1e-9 {
                return Err(Error::Precondition(format!(
                    "{}: differential column {i} disagrees with finite differences",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// Discrepancy path of the naturality identity: per grid point,
/// `|| log(phi(X))_k - phi_* log(X)_k ||`.
pub fn homomorphism_naturality_check(
    phi: &GroupHomomorphism,
    path: &GroupPath,
) -> Result<Vec<f64>> {
    phi.domain.ensure_same(path.group())?;
    let log_domain = sampler::stochastic_logarithm(path)?;
    let mapped: Vec<DMatrix<f64>> = path.values().iter().map(|m| phi.eval_matrix(m)).collect();
    let mapped_path = GroupPath::new(Arc::clone(&phi.codomain), *path.grid(), mapped)?;
    let log_mapped = sampler::stochastic_logarithm(&mapped_path)?;
    let mut out = Vec::with_capacity(path.grid().len());
    for k in 0..path.grid().len() {
        let pushed = &phi.differential * log_domain.value(k);
        out.push((log_mapped.value(k) - pushed).norm());
    }
    Ok(out)
}

/// Worst-case defect of `phi_* alpha_H(E_i, E_j) = alpha_G(phi_* E_i,
/// phi_* E_j)` over domain basis pairs.
pub fn differential_commutation_defect(
    phi: &GroupHomomorphism,
    alpha_domain: &ConnectionFunction,
    alpha_codomain: &ConnectionFunction,
) -> Result<f64> {
    alpha_domain.group().ensure_same(&phi.domain)?;
    alpha_codomain.group().ensure_same(&phi.codomain)?;
    let n = phi.domain.dim();
    let mut worst = 0.0f64;
    for i in 0..n {
        let mut ei = DVector::zeros(n);
        ei[i] = 1.0;
        for j in 0..n {
            let mut ej = DVector::zeros(n);
            ej[j] = 1.0;
            let lhs = &phi.differential * alpha_domain.evaluate_coords(&ei, &ej);
            let rhs = alpha_codomain.evaluate_coords(
                &(&phi.differential * &ei),
                &(&phi.differential * &ej),
            );
            worst = worst.max((lhs - rhs).norm());
        }
    }
    Ok(worst)
}

/// Tolerance on the commutation precondition of the harmonicity
/// experiment for homomorphisms.
pub const COMMUTATION_TOL: f64 = 1e-10;

/// Harmonicity experiment for a homomorphism: samples domain-group
/// Brownian motion, maps it through `phi`, and runs the martingale battery
/// on the codomain. Preconditions: both connection functions skew, the
/// differential commutes with them, and the domain admits a bi-invariant
/// metric (needed to sample its Brownian motion).
#[allow(clippy::too_many_arguments)]
pub fn homomorphism_harmonicity_experiment(
    phi: &GroupHomomorphism,
    alpha_domain: &ConnectionFunction,
    alpha_codomain: &ConnectionFunction,
    grid: &TimeGrid,
    ensemble_size: usize,
    seed: u64,
    times: &[f64],
    z_max: f64,
) -> Result<TestReport> {
    if !alpha_domain.is_skew_symmetric() || !alpha_codomain.is_skew_symmetric() {
        return Err(Error::NotSkewSymmetric);
    }
    if !phi.domain.admits_biinvariant_metric() {
        return Err(Error::NoBiinvariantMetric(phi.domain.name().to_string()));
    }
    let defect = differential_commutation_defect(phi, alpha_domain, alpha_codomain)?;
    if defect > COMMUTATION_TOL {
        return Err(Error::Precondition(format!(
            "differential of {} does not commute with the connection functions (defect {defect:.3e})",
            phi.name
        )));
    }
    let rows = stats::par_collect(ensemble_size, |p| {
        hom_log_rows(phi, grid, &NoiseSpec::new(seed, p), times)
    })?;
    let meta = ReportMeta {
        horizon: grid.horizon(),
        steps: grid.steps(),
        seed,
    };
    let mut report = stats::battery_from_rows(
        &format!("homomorphism:{}", phi.name),
        phi.codomain.dim(),
        times,
        &rows,
        z_max,
        meta,
    )?;
    report.metrics.insert("commutation_defect".to_string(), defect);
    Ok(report)
}

fn hom_log_rows(
    phi: &GroupHomomorphism,
    grid: &TimeGrid,
    noise: &NoiseSpec,
    times: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let domain = &phi.domain;
    let codomain = &phi.codomain;
    let indices: Result<Vec<usize>> = times.iter().map(|t| grid.index_of(*t)).collect();
    let indices = indices?;
    let mut rng = PathRng::new(noise, NoiseDomain::Increments);
    let mut buf = vec![0.0; domain.dim()];
    let sqrt_dt = grid.dt().sqrt();
    let frame = domain.ortho_frame();

    let mut g = DMatrix::identity(domain.embed_dim(), domain.embed_dim());
    let mut prev_image = phi.eval_matrix(&g);
    let mut cum = DVector::zeros(codomain.dim());
    let mut rows = Vec::with_capacity(times.len());
    let mut next = 0usize;
    for k in 0..=grid.steps() {
        if k > 0 {
            rng.standard_normals((k - 1) as u64, &mut buf);
            let xi = DVector::from_column_slice(&buf);
            let delta = frame * xi * sqrt_dt;
            g = domain.project_matrix(&(&g * domain.exp_matrix(&delta)?))?;
            let image = phi.eval_matrix(&g);
            cum += codomain.log_increment(&prev_image, &image)?;
            prev_image = image;
        }
        while next < indices.len() && indices[next] == k {
            rows.push(cum.iter().copied().collect());
            next += 1;
        }
    }
    Ok(rows)
}

// ----- registries ------------------------------------------------------------

fn so3_xi() -> DVector<f64> {
    DVector::from_vec(vec![0.0, 0.0, 1.0])
}

fn smooth_map_registry() -> &'static BTreeMap<&'static str, SmoothMap> {
    static MAPS: OnceLock<BTreeMap<&'static str, SmoothMap>> = OnceLock::new();
    MAPS.get_or_init(|| {
        let so3 = registry::group("so3").expect("so3 registered");
        let r1 = registry::group("r1").expect("r1 registered");
        let mut maps = BTreeMap::new();

        // One-parameter subgroup x -> exp(x xi); harmonic.
        {
            let g = Arc::clone(&so3);
            let xi = so3_xi();
            let dim = so3.dim();
            let map = SmoothMap::new(
                "exp_x_so3",
                SourceDomain::euclidean(1),
                Arc::clone(&so3),
                move |x| g.exp_matrix(&(&xi * x[0])).expect("finite input"),
            )
            .with_analytic_pullback({
                let xi = so3_xi();
                move |_| vec![xi.clone()]
            })
            .with_analytic_codifferential(move |_| DVector::zeros(dim));
            maps.insert("exp_x_so3", map);
        }

        // Quadratic reparametrization x -> exp(x^2 xi); tension 2 xi.
        {
            let g = Arc::clone(&so3);
            let xi = so3_xi();
            let map = SmoothMap::new(
                "exp_xsq_so3",
                SourceDomain::euclidean(1),
                Arc::clone(&so3),
                move |x| g.exp_matrix(&(&xi * (x[0] * x[0]))).expect("finite input"),
            )
            .with_analytic_pullback({
                let xi = so3_xi();
                move |x| vec![&xi * (2.0 * x[0])]
            })
            .with_analytic_codifferential({
                let xi = so3_xi();
                move |_| &xi * (-2.0)
            });
            maps.insert("exp_xsq_so3", map);
        }

        // Cubic reparametrization x -> exp(x^3 xi); the central-difference
        // pullback has a genuine O(h^2) error here, unlike the other
        // polynomial maps, so this one anchors the FD order study.
        {
            let g = Arc::clone(&so3);
            let xi = so3_xi();
            let map = SmoothMap::new(
                "exp_xcube_so3",
                SourceDomain::euclidean(1),
                Arc::clone(&so3),
                move |x| g.exp_matrix(&(&xi * (x[0] * x[0] * x[0]))).expect("finite input"),
            )
            .with_analytic_pullback({
                let xi = so3_xi();
                move |x| vec![&xi * (3.0 * x[0] * x[0])]
            })
            .with_analytic_codifferential({
                let xi = so3_xi();
                move |x| &xi * (-6.0 * x[0])
            });
            maps.insert("exp_xcube_so3", map);
        }

        // Two-parameter product (x, y) -> exp(x A) exp(y B); harmonic.
        {
            let g = Arc::clone(&so3);
            let a_gen = DVector::from_vec(vec![1.0, 0.0, 0.0]);
            let b_gen = DVector::from_vec(vec![0.0, 1.0, 0.0]);
            let dim = so3.dim();
            let map = SmoothMap::new(
                "exp_xa_yb_so3",
                SourceDomain::euclidean(2),
                Arc::clone(&so3),
                {
                    let (a_gen, b_gen) = (a_gen.clone(), b_gen.clone());
                    let g = Arc::clone(&g);
                    move |x| {
                        let left = g.exp_matrix(&(&a_gen * x[0])).expect("finite input");
                        let right = g.exp_matrix(&(&b_gen * x[1])).expect("finite input");
                        left * right
                    }
                },
            )
            .with_analytic_pullback({
                let g = Arc::clone(&g);
                let (a_gen, b_gen) = (a_gen.clone(), b_gen.clone());
                move |x| {
                    // a_x = Ad(exp(-y B)) A; for rotations the adjoint
                    // representation is the rotation matrix itself.
                    let rot = g.exp_matrix(&(&b_gen * (-x[1]))).expect("finite input");
                    vec![&rot * &a_gen, b_gen.clone()]
                }
            })
            .with_analytic_codifferential(move |_| DVector::zeros(dim));
            maps.insert("exp_xa_yb_so3", map);
        }

        // Identity chart of the abelian line; harmonic.
        {
            let g = Arc::clone(&r1);
            let map = SmoothMap::new(
                "exp_x_r1",
                SourceDomain::euclidean(1),
                Arc::clone(&r1),
                move |x| {
                    g.exp_matrix(&DVector::from_vec(vec![x[0]])).expect("finite input")
                },
            )
            .with_analytic_pullback(|_| vec![DVector::from_vec(vec![1.0])])
            .with_analytic_codifferential(|_| DVector::zeros(1));
            maps.insert("exp_x_r1", map);
        }

        maps
    })
}

/// Looks up a registered smooth map by name.
pub fn smooth_map(name: &str) -> Result<SmoothMap> {
    smooth_map_registry()
        .get(name)
        .cloned()
        .ok_or_else(|| Error::UnknownName(name.to_string()))
}

pub fn smooth_map_names() -> Vec<&'static str> {
    smooth_map_registry().keys().copied().collect()
}

/// Rotation matrix of a unit quaternion `(w, x, y, z)`.
fn quaternion_to_rotation(w: f64, x: f64, y: f64, z: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(
        3,
        3,
        &[
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    )
}

fn homomorphism_registry() -> &'static BTreeMap<&'static str, GroupHomomorphism> {
    static HOMS: OnceLock<BTreeMap<&'static str, GroupHomomorphism>> = OnceLock::new();
    HOMS.get_or_init(|| {
        let so3 = registry::group("so3").expect("so3 registered");
        let su2 = registry::group("su2").expect("su2 registered");
        let r1 = registry::group("r1").expect("r1 registered");
        let mut homs = BTreeMap::new();

        // Adjoint double cover; the basis choices make the differential
        // the identity.
        homs.insert(
            "su2_to_so3",
            GroupHomomorphism::new(
                "su2_to_so3",
                Arc::clone(&su2),
                Arc::clone(&so3),
                |m| quaternion_to_rotation(m[(0, 0)], m[(1, 0)], m[(2, 0)], m[(3, 0)]),
                DMatrix::identity(3, 3),
            )
            .expect("su2_to_so3 shapes"),
        );

        // One-parameter subgroup of rotations about xi.
        {
            let g = Arc::clone(&so3);
            let xi = so3_xi();
            homs.insert(
                "r1_to_so3",
                GroupHomomorphism::new(
                    "r1_to_so3",
                    Arc::clone(&r1),
                    Arc::clone(&so3),
                    move |m| g.exp_matrix(&(&xi * m[(0, 1)])).expect("finite input"),
                    DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0]),
                )
                .expect("r1_to_so3 shapes"),
            );
        }

        // Abelian rescaling x -> 2x; doubling is exact in binary floating
        // point, so the naturality discrepancy is identically zero.
        homs.insert(
            "scale_r1",
            GroupHomomorphism::new(
                "scale_r1",
                Arc::clone(&r1),
                Arc::clone(&r1),
                |m| {
                    let mut out = m.clone();
                    out[(0, 1)] = 2.0 * m[(0, 1)];
                    out
                },
                DMatrix::from_column_slice(1, 1, &[2.0]),
            )
            .expect("scale_r1 shapes"),
        );

        homs
    })
}

/// Looks up a registered homomorphism by name.
pub fn homomorphism(name: &str) -> Result<GroupHomomorphism> {
    homomorphism_registry()
        .get(name)
        .cloned()
        .ok_or_else(|| Error::UnknownName(name.to_string()))
}

pub fn homomorphism_names() -> Vec<&'static str> {
    homomorphism_registry().keys().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::Verdict;
    use approx::assert_relative_eq;

    #[test]
    fn registered_homomorphisms_validate() {
        for name in homomorphism_names() {
            homomorphism(name).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn one_parameter_map_pulls_back_to_its_generator() {
        let map = smooth_map("exp_x_so3").unwrap();
        for x in [-0.8, 0.0, 1.3] {
            let fd = pullback_fd(&map, &[x], 1e-4).unwrap();
            assert_relative_eq!(&fd[0], &so3_xi(), epsilon = 1e-9);
        }
    }

    #[test]
    fn quadratic_map_pullback_and_codifferential() {
        let map = smooth_map("exp_xsq_so3").unwrap();
        for x in [-0.7, 0.2, 0.9] {
            let fd = pullback_fd(&map, &[x], 1e-4).unwrap();
            assert_relative_eq!(&fd[0], &(so3_xi() * (2.0 * x)), epsilon = 1e-8);
            let codiff = codifferential_fd(&map, &[x], 1e-4).unwrap();
            assert_relative_eq!(&codiff, &(so3_xi() * (-2.0)), epsilon = 1e-7);
        }
    }

    #[test]
    fn product_map_pullback_matches_adjoint_formula() {
        let map = smooth_map("exp_xa_yb_so3").unwrap();
        let point = [0.4, -0.6];
        let fd = pullback_fd(&map, &point, 1e-4).unwrap();
        let analytic = pullback_maurer_cartan(&map, &point, 1e-4).unwrap();
        for (f, a) in fd.iter().zip(&analytic) {
            assert_relative_eq!(f, a, epsilon = 1e-8);
        }
        let codiff = codifferential_fd(&map, &point, 1e-4).unwrap();
        assert!(codiff.norm() < 1e-8, "codiff norm {}", codiff.norm());
    }

    #[test]
    fn fd_pullback_error_is_second_order_on_the_cubic_map() {
        let map = smooth_map("exp_xcube_so3").unwrap();
        let x = [0.7];
        let exact = so3_xi() * (3.0 * x[0] * x[0]);
        let err = |h: f64| (pullback_fd(&map, &x, h).unwrap()[0].clone() - &exact).norm();
        let e1 = err(1e-2);
        let e2 = err(5e-3);
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.2, "observed FD order {order}");
    }

    #[test]
    fn tension_field_identity_for_skew_alpha() {
        let so3 = registry::group("so3").unwrap();
        let alpha = ConnectionFunction::bracket_multiple(&so3, 0.5);
        for name in ["exp_x_so3", "exp_xsq_so3", "exp_xa_yb_so3"] {
            let map = smooth_map(name).unwrap();
            let point = vec![0.35; map.source().dim];
            let tau = tension_field(&map, &point, &alpha, 1e-4).unwrap();
            let codiff = codifferential(&map, &point, 1e-4).unwrap();
            assert!(
                (&tau + &codiff).norm() < 1e-7,
                "{name}: tension + codifferential = {}",
                (&tau + &codiff).norm()
            );
        }
    }

    #[test]
    fn tension_of_quadratic_map_is_twice_the_generator() {
        let so3 = registry::group("so3").unwrap();
        let alpha = ConnectionFunction::bracket_multiple(&so3, 0.5);
        let map = smooth_map("exp_xsq_so3").unwrap();
        for x in [-0.5, 0.0, 0.8] {
            let tau = tension_field(&map, &[x], &alpha, 1e-4).unwrap();
            assert_relative_eq!(&tau, &(so3_xi() * 2.0), epsilon = 1e-7);
        }
    }

    #[test]
    fn codifferential_commutes_with_covectors() {
        // theta(d* F* omega) equals the divergence of the scalar fields
        // theta(a_i); linearity of theta makes the two routes agree.
        let map = smooth_map("exp_xsq_so3").unwrap();
        let theta = DVector::from_vec(vec![0.7, -0.2, 1.1]);
        let x = [0.45];
        let h = 1e-4;
        let direct = theta.dot(&codifferential_fd(&map, &x, h).unwrap());
        let mut scalar_divergence = 0.0;
        for i in 0..map.source().dim {
            let mut plus = x.to_vec();
            let mut minus = x.to_vec();
            plus[i] += h;
            minus[i] -= h;
            let sp = theta.dot(&pullback_maurer_cartan(&map, &plus, h).unwrap()[i]);
            let sm = theta.dot(&pullback_maurer_cartan(&map, &minus, h).unwrap()[i]);
            scalar_divergence -= (sp - sm) / (2.0 * h);
        }
        assert!((direct - scalar_divergence).abs() < 1e-10);
    }

    #[test]
    fn pluzhnikov_check_classifies_the_corpus() {
        let lattice1 = DomainLattice::symmetric(1, 9).unwrap();
        let fd = ResidualMode::FiniteDifference { h: 1e-4 };

        let harmonic = pluzhnikov_check(&smooth_map("exp_x_so3").unwrap(), &lattice1, 1e-6, fd)
            .unwrap();
        assert!(harmonic.harmonic, "max residual {}", harmonic.max_residual);

        let non_harmonic =
            pluzhnikov_check(&smooth_map("exp_xsq_so3").unwrap(), &lattice1, 1e-6, fd).unwrap();
        assert!(!non_harmonic.harmonic);
        assert!(non_harmonic.max_residual >= 1.9);

        let lattice2 = DomainLattice::symmetric(2, 5).unwrap();
        let product =
            pluzhnikov_check(&smooth_map("exp_xa_yb_so3").unwrap(), &lattice2, 1e-6, fd).unwrap();
        assert!(product.harmonic, "max residual {}", product.max_residual);

        let analytic = pluzhnikov_check(
            &smooth_map("exp_xa_yb_so3").unwrap(),
            &lattice2,
            1e-10,
            ResidualMode::Analytic,
        )
        .unwrap();
        assert!(analytic.harmonic);
    }

    #[test]
    fn monte_carlo_agrees_with_the_checker_at_small_scale() {
        let so3 = registry::group("so3").unwrap();
        let alpha = ConnectionFunction::bracket_multiple(&so3, 0.5);
        let grid = TimeGrid::new(1.0, 200).unwrap();
        let times = crate::stats::default_checkpoints(1.0);

        let pass = harmonicity_monte_carlo(
            &smooth_map("exp_x_so3").unwrap(),
            &alpha,
            &grid,
            400,
            901,
            &times,
            4.0,
        )
        .unwrap();
        assert_eq!(pass.verdict, Verdict::Pass, "{pass:?}");

        let fail = harmonicity_monte_carlo(
            &smooth_map("exp_xsq_so3").unwrap(),
            &alpha,
            &grid,
            400,
            902,
            &times,
            4.0,
        )
        .unwrap();
        assert_eq!(fail.verdict, Verdict::Fail);
        // Drift rate approximates half the tension field, here +xi.
        let rate = fail.metrics.get("drift_rate[2]").unwrap();
        assert!((rate - 1.0).abs() < 0.3, "drift rate {rate}");
    }

    #[test]
    fn naturality_discrepancy_is_machine_zero_for_the_covering() {
        let su2 = registry::group("su2").unwrap();
        let phi = homomorphism("su2_to_so3").unwrap();
        let grid = TimeGrid::new(1.0, 256).unwrap();
        let x = sampler::sample_group_bm(&su2, &grid, &NoiseSpec::new(77, 0)).unwrap();
        let d = homomorphism_naturality_check(&phi, &x).unwrap();
        let max = d.iter().cloned().fold(0.0, f64::max);
        assert!(max < 1e-12, "naturality discrepancy {max}");
    }

    #[test]
    fn naturality_discrepancy_is_exactly_zero_for_abelian_scaling() {
        let r1 = registry::group("r1").unwrap();
        let phi = homomorphism("scale_r1").unwrap();
        let grid = TimeGrid::new(1.0, 128).unwrap();
        let y = sampler::sample_flat_bm(&r1, &grid, &NoiseSpec::new(78, 0)).unwrap();
        let x = sampler::stochastic_exponential(&y).unwrap();
        let d = homomorphism_naturality_check(&phi, &x).unwrap();
        assert!(d.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn one_parameter_subgroup_homomorphism_is_harmonic() {
        let r1 = registry::group("r1").unwrap();
        let so3 = registry::group("so3").unwrap();
        let phi = homomorphism("r1_to_so3").unwrap();
        // Bracket multiples degenerate to zero on the abelian domain.
        let alpha_h = ConnectionFunction::bracket_multiple(&r1, 0.5);
        let alpha_g = ConnectionFunction::bracket_multiple(&so3, 0.5);
        let grid = TimeGrid::new(1.0, 200).unwrap();
        let times = crate::stats::default_checkpoints(1.0);
        let report = homomorphism_harmonicity_experiment(
            &phi, &alpha_h, &alpha_g, &grid, 300, 905, &times, 4.0,
        )
        .unwrap();
        assert_eq!(report.verdict, Verdict::Pass, "{report:?}");
    }

    #[test]
    fn homomorphism_experiment_passes_and_rejects_broken_differential() {
        let su2 = registry::group("su2").unwrap();
        let so3 = registry::group("so3").unwrap();
        let phi = homomorphism("su2_to_so3").unwrap();
        let alpha_h = ConnectionFunction::bracket_multiple(&su2, 0.5);
        let alpha_g = ConnectionFunction::bracket_multiple(&so3, 0.5);
        let grid = TimeGrid::new(1.0, 200).unwrap();
        let times = crate::stats::default_checkpoints(1.0);
        let report = homomorphism_harmonicity_experiment(
            &phi, &alpha_h, &alpha_g, &grid, 400, 903, &times, 4.0,
        )
        .unwrap();
        assert_eq!(report.verdict, Verdict::Pass, "{report:?}");

        let mut perturbed = DMatrix::identity(3, 3);
        perturbed[(0, 1)] += 0.01;
        let broken = phi.with_differential(perturbed).unwrap();
        assert!(matches!(
            homomorphism_harmonicity_experiment(
                &broken, &alpha_h, &alpha_g, &grid, 400, 903, &times, 4.0,
            ),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn lattice_enumerates_the_grid() {
        let lattice = DomainLattice::new(vec![0.0, -1.0], vec![1.0, 1.0], 3).unwrap();
        let pts = lattice.points();
        assert_eq!(pts.len(), 9);
        assert!(pts.contains(&vec![0.5, 0.0]));
        assert!(DomainLattice::new(vec![0.0], vec![0.0], 3).is_err());
    }
}
