//! Experiment configuration: TOML schema, flag overrides and resolution
//! against the registries.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use liestoch::connection::ConnectionFunction;
use liestoch::group::{registry, GroupDescriptor};
use liestoch::grid::TimeGrid;
use liestoch::maps::{self, DomainLattice, GroupHomomorphism, SmoothMap};
use liestoch::tensor::Tensor3;

use crate::CliError;

/// On-disk configuration. Every field is optional; defaults are filled in
/// during resolution and every scalar is overridable from the command
/// line.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub experiment: Option<String>,
    pub group: Option<String>,
    pub map: Option<String>,
    pub homomorphism: Option<String>,
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub steps: Option<usize>,
    pub horizon: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub connection: Option<ConnectionSpec>,
    pub thresholds: Option<ThresholdSpec>,
    pub convergence: Option<ConvergenceSpec>,
    pub lattice: Option<LatticeSpec>,
}

/// Connection syntax: `{kind = "bracket_multiple", c = 0.5}`,
/// `{kind = "zero"}` or `{kind = "explicit", coeffs = [[[...]]] }`.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionSpec {
    pub kind: String,
    pub c: Option<f64>,
    pub coeffs: Option<Vec<Vec<Vec<f64>>>>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSpec {
    pub z_max: Option<f64>,
    pub rel_tol: Option<f64>,
    pub residual_tol: Option<f64>,
    pub checkpoints: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSpec {
    pub min_level: u32,
    pub max_level: u32,
    pub ref_level: u32,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub min: Option<Vec<f64>>,
    pub max: Option<Vec<f64>>,
    pub points_per_axis: Option<usize>,
    pub fd_step: Option<f64>,
}

/// Command-line overrides applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub experiment: Option<String>,
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub steps: Option<usize>,
    pub horizon: Option<f64>,
    pub group: Option<String>,
    pub map: Option<String>,
    pub homomorphism: Option<String>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Theorem1,
    Theorem2,
    Levy,
    Naturality,
    Homomorphism,
    Pluzhnikov,
    Convergence,
}

impl Experiment {
    pub fn parse(name: &str) -> Result<Self, CliError> {
        Ok(match name {
            "theorem1" => Experiment::Theorem1,
            "theorem2" => Experiment::Theorem2,
            "levy" => Experiment::Levy,
            "naturality" => Experiment::Naturality,
            "homomorphism" => Experiment::Homomorphism,
            "pluzhnikov" => Experiment::Pluzhnikov,
            "convergence" => Experiment::Convergence,
            other => {
                return Err(CliError::Config(format!(
                    "unknown experiment {other:?}; expected one of theorem1, theorem2, levy, \
                     naturality, homomorphism, pluzhnikov, convergence"
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Theorem1 => "theorem1",
            Experiment::Theorem2 => "theorem2",
            Experiment::Levy => "levy",
            Experiment::Naturality => "naturality",
            Experiment::Homomorphism => "homomorphism",
            Experiment::Pluzhnikov => "pluzhnikov",
            Experiment::Convergence => "convergence",
        }
    }
}

/// Threshold values with defaults applied.
#[derive(Clone, Debug, Serialize)]
pub struct Thresholds {
    pub z_max: f64,
    pub rel_tol: f64,
    pub residual_tol: f64,
    pub checkpoints: Vec<f64>,
}

/// Fully resolved experiment: registry objects constructed, defaults
/// filled, everything validated. Construction failures are config errors.
pub struct Resolved {
    pub experiment: Experiment,
    pub group: Option<Arc<GroupDescriptor>>,
    pub map: Option<SmoothMap>,
    pub homomorphism: Option<GroupHomomorphism>,
    pub connection_desc: String,
    pub connection: Option<ConnectionSpec>,
    pub seed: u64,
    pub seed_was_explicit: bool,
    pub paths: usize,
    pub grid: TimeGrid,
    pub thresholds: Thresholds,
    pub levels: Vec<u32>,
    pub ref_level: u32,
    pub lattice_points_per_axis: usize,
    pub fd_step: f64,
    pub lattice_min: Option<Vec<f64>>,
    pub lattice_max: Option<Vec<f64>>,
    pub out_dir: PathBuf,
    pub config_hash: String,
}

/// Canonical serialization of the effective configuration; its SHA-256
/// prefix is embedded in every report.
#[derive(Serialize)]
struct EffectiveConfig<'a> {
    experiment: &'a str,
    group: Option<&'a str>,
    map: Option<&'a str>,
    homomorphism: Option<&'a str>,
    connection: &'a str,
    seed: u64,
    paths: usize,
    steps: usize,
    horizon: f64,
    thresholds: &'a Thresholds,
    levels: &'a [u32],
    ref_level: u32,
    lattice_points_per_axis: usize,
    fd_step: f64,
}

fn entropy_seed() -> u64 {
    use std::time::{SystemTime, UNIX_EPOCH};
    let nanos = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos() as u64)
        .unwrap_or(0);
    nanos ^ (std::process::id() as u64).rotate_left(32)
}

impl RawConfig {
    pub fn from_path(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {path:?}: {e}")))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("bad config {path:?}: {e}")))
    }

    pub fn resolve(mut self, overrides: &Overrides) -> Result<Resolved, CliError> {
        if let Some(v) = &overrides.experiment {
            self.experiment = Some(v.clone());
        }
        if let Some(v) = overrides.seed {
            self.seed = Some(v);
        }
        if let Some(v) = overrides.paths {
            self.paths = Some(v);
        }
        if let Some(v) = overrides.steps {
            self.steps = Some(v);
        }
        if let Some(v) = overrides.horizon {
            self.horizon = Some(v);
        }
        if let Some(v) = &overrides.group {
            self.group = Some(v.clone());
        }
        if let Some(v) = &overrides.map {
            self.map = Some(v.clone());
        }
        if let Some(v) = &overrides.homomorphism {
            self.homomorphism = Some(v.clone());
        }
        if let Some(v) = &overrides.out_dir {
            self.out_dir = Some(v.clone());
        }

        let experiment = Experiment::parse(
            self.experiment
                .as_deref()
                .ok_or_else(|| CliError::Config("config must name an experiment".into()))?,
        )?;

        let needs_group = matches!(
            experiment,
            Experiment::Theorem1 | Experiment::Theorem2 | Experiment::Levy | Experiment::Convergence
        );
        let group = match (&self.group, needs_group) {
            (Some(name), _) => Some(registry::group(name).map_err(config_err)?),
            (None, true) => Some(registry::group("so3").expect("so3 registered")),
            (None, false) => None,
        };
        let needs_map = matches!(experiment, Experiment::Pluzhnikov);
        let map = match (&self.map, needs_map) {
            (Some(name), _) => Some(maps::smooth_map(name).map_err(config_err)?),
            (None, true) => Some(maps::smooth_map("exp_x_so3").expect("registered")),
            (None, false) => None,
        };
        let needs_hom = matches!(
            experiment,
            Experiment::Naturality | Experiment::Homomorphism | Experiment::Convergence
        );
        let homomorphism = match (&self.homomorphism, needs_hom) {
            (Some(name), _) => Some(maps::homomorphism(name).map_err(config_err)?),
            (None, true) => Some(maps::homomorphism("su2_to_so3").expect("registered")),
            (None, false) => None,
        };

        if experiment == Experiment::Theorem2 {
            let g = group.as_ref().unwrap();
            if !g.admits_biinvariant_metric() {
                return Err(CliError::Config(format!(
                    "experiment theorem2 needs a bi-invariant metric; {} has none",
                    g.name()
                )));
            }
        }
        if experiment == Experiment::Homomorphism {
            let h = homomorphism.as_ref().unwrap();
            if !h.domain().admits_biinvariant_metric() {
                return Err(CliError::Config(format!(
                    "experiment homomorphism samples Brownian motion on {}, which has no \
                     bi-invariant metric",
                    h.domain().name()
                )));
            }
        }

        let (seed, seed_was_explicit) = match self.seed {
            Some(s) => (s, true),
            None => (entropy_seed(), false),
        };
        let paths = self.paths.unwrap_or(1000);
        let steps = self.steps.unwrap_or(1000);
        let horizon = self.horizon.unwrap_or(1.0);
        let grid = TimeGrid::new(horizon, steps).map_err(config_err)?;

        let t = self.thresholds.clone().unwrap_or_default();
        let checkpoints = match t.checkpoints {
            Some(cp) => {
                if cp.is_empty() || cp.iter().any(|t| !(0.0..=horizon * 1.0000001).contains(t)) {
                    return Err(CliError::Config(
                        "checkpoints must be nonempty times within the horizon".into(),
                    ));
                }
                cp
            }
            None => liestoch::stats::default_checkpoints(horizon),
        };
        let thresholds = Thresholds {
            z_max: t.z_max.unwrap_or(4.0),
            rel_tol: t.rel_tol.unwrap_or(0.05),
            residual_tol: t.residual_tol.unwrap_or(1e-6),
            checkpoints,
        };
        if thresholds.z_max <= 0.0 || thresholds.rel_tol <= 0.0 || thresholds.residual_tol <= 0.0 {
            return Err(CliError::Config("thresholds must be positive".into()));
        }

        let conv = self.convergence.clone().unwrap_or(ConvergenceSpec {
            min_level: 8,
            max_level: 12,
            ref_level: 15,
        });
        if conv.min_level >= conv.max_level || conv.max_level >= conv.ref_level {
            return Err(CliError::Config(
                "convergence levels must satisfy min < max < ref".into(),
            ));
        }
        let levels: Vec<u32> = (conv.min_level..=conv.max_level).collect();

        let lat = self.lattice.clone().unwrap_or_default();
        let lattice_points_per_axis = lat.points_per_axis.unwrap_or(9);
        if lattice_points_per_axis < 2 {
            return Err(CliError::Config("lattice needs at least 2 points per axis".into()));
        }
        let fd_step = lat.fd_step.unwrap_or(1e-4);
        if fd_step <= 0.0 {
            return Err(CliError::Config("fd_step must be positive".into()));
        }

        // Validate the connection spec eagerly against its target group.
        let connection = self.connection.clone();
        let connection_desc = match &connection {
            None => "bracket_multiple(c=0.5)".to_string(),
            Some(spec) => match spec.kind.as_str() {
                "zero" => "zero".to_string(),
                "bracket_multiple" => {
                    let c = spec.c.ok_or_else(|| {
                        CliError::Config("bracket_multiple connection needs field c".into())
                    })?;
                    if !(0.0..=1.0).contains(&c) {
                        return Err(CliError::Config(format!(
                            "bracket multiple c = {c} outside [0, 1]"
                        )));
                    }
                    format!("bracket_multiple(c={c})")
                }
                "explicit" => {
                    if spec.coeffs.is_none() {
                        return Err(CliError::Config(
                            "explicit connection needs field coeffs".into(),
                        ));
                    }
                    "explicit".to_string()
                }
                other => {
                    return Err(CliError::Config(format!(
                        "unknown connection kind {other:?}"
                    )))
                }
            },
        };

        let out_dir = self
            .out_dir
            .unwrap_or_else(|| PathBuf::from("out").join(experiment.name()));

        let mut resolved = Resolved {
            experiment,
            group,
            map,
            homomorphism,
            connection_desc,
            connection,
            seed,
            seed_was_explicit,
            paths,
            grid,
            thresholds,
            levels,
            ref_level: conv.ref_level,
            lattice_points_per_axis,
            fd_step,
            lattice_min: lat.min,
            lattice_max: lat.max,
            out_dir,
            config_hash: String::new(),
        };
        // Build the connection once now so malformed tensors surface as
        // config errors before any output exists.
        resolved.connection_for(resolved.primary_group()?.as_ref().map(Arc::clone))?;
        resolved.config_hash = resolved.effective_hash();
        Ok(resolved)
    }
}

fn config_err(e: liestoch::Error) -> CliError {
    CliError::Config(e.to_string())
}

impl Resolved {
    /// The group a connection function binds to for this experiment.
    pub fn primary_group(&self) -> Result<Option<Arc<GroupDescriptor>>, CliError> {
        Ok(match self.experiment {
            Experiment::Theorem1 | Experiment::Theorem2 | Experiment::Levy => {
                self.group.clone()
            }
            Experiment::Pluzhnikov => self.map.as_ref().map(|m| Arc::clone(m.target())),
            Experiment::Homomorphism => {
                self.homomorphism.as_ref().map(|h| Arc::clone(h.codomain()))
            }
            Experiment::Naturality | Experiment::Convergence => None,
        })
    }

    /// Builds the configured connection function on `group` (default:
    /// Levi-Civita of the bi-invariant family, `c = 1/2`).
    pub fn connection_for(
        &self,
        group: Option<Arc<GroupDescriptor>>,
    ) -> Result<Option<ConnectionFunction>, CliError> {
        let Some(group) = group else { return Ok(None) };
        let alpha = match &self.connection {
            None => ConnectionFunction::bracket_multiple(&group, 0.5),
            Some(spec) => match spec.kind.as_str() {
                "zero" => ConnectionFunction::zero(&group),
                "bracket_multiple" => {
                    ConnectionFunction::bracket_multiple(&group, spec.c.unwrap())
                }
                "explicit" => {
                    let coeffs = spec.coeffs.as_ref().unwrap();
                    let n = group.dim();
                    if coeffs.len() != n
                        || coeffs.iter().any(|rows| {
                            rows.len() != n || rows.iter().any(|row| row.len() != n)
                        })
                    {
                        return Err(CliError::Config(format!(
                            "explicit connection coefficients must be {n}x{n}x{n} for {}",
                            group.name()
                        )));
                    }
                    let tensor = Tensor3::from_fn(n, |i, j, k| coeffs[i][j][k]);
                    ConnectionFunction::explicit(&group, tensor).map_err(config_err)?
                }
                _ => unreachable!("kinds validated during resolution"),
            },
        };
        Ok(Some(alpha))
    }

    /// The sampling lattice for map experiments.
    pub fn lattice_for(&self, map: &SmoothMap) -> Result<DomainLattice, CliError> {
        let dim = map.source().dim;
        match (&self.lattice_min, &self.lattice_max) {
            (Some(min), Some(max)) => {
                DomainLattice::new(min.clone(), max.clone(), self.lattice_points_per_axis)
                    .map_err(config_err)
            }
            (None, None) => DomainLattice::symmetric(dim, self.lattice_points_per_axis)
                .map_err(config_err),
            _ => Err(CliError::Config(
                "lattice needs both min and max (or neither)".into(),
            )),
        }
    }

    fn effective_hash(&self) -> String {
        let effective = EffectiveConfig {
            experiment: self.experiment.name(),
            group: self.group.as_deref().map(|g| g.name()),
            map: self.map.as_ref().map(|m| m.name()),
            homomorphism: self.homomorphism.as_ref().map(|h| h.name()),
            connection: &self.connection_desc,
            seed: self.seed,
            paths: self.paths,
            steps: self.grid.steps(),
            horizon: self.grid.horizon(),
            thresholds: &self.thresholds,
            levels: &self.levels,
            ref_level: self.ref_level,
            lattice_points_per_axis: self.lattice_points_per_axis,
            fd_step: self.fd_step,
        };
        let bytes = serde_json::to_vec(&effective).expect("config serialization");
        let digest = Sha256::digest(&bytes);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
