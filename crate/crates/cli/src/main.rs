//! `liestoch` experiment runner.
//!
//! Subcommands: `run` (config-driven experiment), `list` (registries),
//! `converge` (convergence study shortcut). Exit codes: 0 success,
//! 1 `--expect` mismatch, 2 config error, 3 numeric error,
//! 4 statistically inconclusive, 5 i/o error.

mod config;
mod experiments;

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use liestoch::stats::Verdict;

use config::{Overrides, RawConfig, Resolved};
use experiments::ExperimentOutput;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Io(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<liestoch::Error> for CliError {
    fn from(e: liestoch::Error) -> Self {
        match e {
            liestoch::Error::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 5,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "liestoch",
    version,
    about = "Stochastic-calculus experiments on matrix Lie groups"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config-driven experiment and write report.json + CSV summaries.
    Run(RunArgs),
    /// List registered groups, maps, homomorphisms and experiments.
    List {
        /// Machine-readable output.
        #[arg(long)]
        json: bool,
    },
    /// Run the convergence study (shortcut for experiment = "convergence").
    Converge(RunArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Expect {
    Pass,
    Fail,
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the ensemble seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the ensemble size.
    #[arg(long)]
    paths: Option<usize>,
    /// Override the number of grid steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Override the time horizon.
    #[arg(long)]
    horizon: Option<f64>,
    /// Override the group registry name.
    #[arg(long)]
    group: Option<String>,
    /// Override the smooth-map registry name.
    #[arg(long)]
    map: Option<String>,
    /// Override the homomorphism registry name.
    #[arg(long)]
    homomorphism: Option<String>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Size of the worker pool (defaults to the number of cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Exit 0 only if the experiment verdict matches.
    #[arg(long, value_enum)]
    expect: Option<Expect>,
    /// Also write per-path CSV files (ensembles of at most 64 paths).
    #[arg(long)]
    emit_paths: bool,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::List { json } => {
            list_registries(json);
            Ok(None)
        }
        Command::Run(args) => run(args, None),
        Command::Converge(args) => run(args, Some("convergence")),
    };
    match outcome {
        Ok(None) => {}
        Ok(Some(code)) => std::process::exit(code),
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn run(args: RunArgs, forced_experiment: Option<&str>) -> Result<Option<i32>, CliError> {
    let raw = match &args.config {
        Some(path) => RawConfig::from_path(path)?,
        None if forced_experiment.is_some() => RawConfig::default(),
        None => {
            return Err(CliError::Config(
                "run needs --config (converge supplies defaults)".into(),
            ))
        }
    };
    let overrides = Overrides {
        experiment: forced_experiment.map(str::to_string),
        seed: args.seed,
        paths: args.paths,
        steps: args.steps,
        horizon: args.horizon,
        group: args.group.clone(),
        map: args.map.clone(),
        homomorphism: args.homomorphism.clone(),
        out_dir: args.out.clone(),
    };
    let resolved = raw.resolve(&overrides)?;

    let output = match args.threads {
        None => experiments::execute(&resolved)?,
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| CliError::Config(format!("cannot build worker pool: {e}")))?;
            pool.install(|| experiments::execute(&resolved))?
        }
    };

    write_outputs(&resolved, &output, args.emit_paths)?;
    let verdict = output.report.verdict;
    println!(
        "{}: verdict {:?} (report in {})",
        resolved.experiment.name(),
        verdict,
        resolved.out_dir.display()
    );

    if let Some(expect) = args.expect {
        let matches = matches!(
            (expect, verdict),
            (Expect::Pass, Verdict::Pass) | (Expect::Fail, Verdict::Fail)
        );
        return Ok(Some(if matches { 0 } else { 1 }));
    }
    if verdict == Verdict::Inconclusive {
        return Ok(Some(4));
    }
    Ok(None)
}

fn write_outputs(
    cfg: &Resolved,
    output: &ExperimentOutput,
    emit_paths: bool,
) -> Result<(), CliError> {
    let dir = &cfg.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(e.to_string()))?;

    let report_path = dir.join("report.json");
    std::fs::write(&report_path, output.report.to_json_bytes())
        .map_err(|e| CliError::Io(e.to_string()))?;

    write_summary_csv(&dir.join("summary.csv"), output)?;
    if !output.report.studies.is_empty() {
        write_rates_csv(&dir.join("rates.csv"), output)?;
    }
    if let Some(field) = &output.residual_field {
        write_residuals_csv(&dir.join("residuals.csv"), field)?;
    }
    if emit_paths {
        if cfg.paths <= 128 {
            experiments::emit_paths(cfg, &dir.join("paths"))?;
        } else {
            log::warn!(
                "--emit-paths skipped: {} paths exceed the limit of 128",
                cfg.paths
            );
        }
    }
    Ok(())
}

fn write_summary_csv(path: &Path, output: &ExperimentOutput) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    writeln!(w, "report,role,label,time,statistic,score,threshold,pass")
        .map_err(|e| CliError::Io(e.to_string()))?;
    for role_report in &output.report.reports {
        let role = match role_report.role {
            experiments::ReportRole::Main => "main",
            experiments::ReportRole::NegativeControl => "negative_control",
        };
        for c in &role_report.report.checkpoints {
            writeln!(
                w,
                "{},{role},{},{},{},{},{},{}",
                role_report.report.name, c.label, c.time, c.statistic, c.score, c.threshold, c.pass
            )
            .map_err(|e| CliError::Io(e.to_string()))?;
        }
    }
    Ok(())
}

fn write_rates_csv(path: &Path, output: &ExperimentOutput) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    writeln!(w, "quantity,level,steps,error,pairwise_order,fit_order,monotone")
        .map_err(|e| CliError::Io(e.to_string()))?;
    for study in &output.report.studies {
        let fit = study
            .fit_order
            .map_or("exact".to_string(), |o| format!("{o}"));
        for (i, row) in study.rows.iter().enumerate() {
            let pairwise = if i == 0 {
                String::new()
            } else {
                study.pairwise_orders[i - 1]
                    .map_or("exact".to_string(), |o| format!("{o}"))
            };
            writeln!(
                w,
                "{},{},{},{},{pairwise},{fit},{}",
                study.quantity, row.level, row.steps, row.error, study.monotone
            )
            .map_err(|e| CliError::Io(e.to_string()))?;
        }
    }
    Ok(())
}

fn write_residuals_csv(path: &Path, field: &[(Vec<f64>, Vec<f64>)]) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    let (first_point, first_res) = match field.first() {
        Some(row) => row,
        None => return Ok(()),
    };
    let mut header: Vec<String> = (1..=first_point.len()).map(|i| format!("x{i}")).collect();
    header.extend((1..=first_res.len()).map(|i| format!("r{i}")));
    header.push("norm".to_string());
    writeln!(w, "{}", header.join(",")).map_err(|e| CliError::Io(e.to_string()))?;
    for (point, residual) in field {
        let norm = residual.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut fields: Vec<String> = point.iter().map(|v| format!("{v}")).collect();
        fields.extend(residual.iter().map(|v| format!("{v}")));
        fields.push(format!("{norm}"));
        writeln!(w, "{}", fields.join(",")).map_err(|e| CliError::Io(e.to_string()))?;
    }
    Ok(())
}

fn csv_writer(path: &Path) -> Result<std::io::BufWriter<std::fs::File>, CliError> {
    Ok(std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| CliError::Io(e.to_string()))?,
    ))
}

fn list_registries(json: bool) {
    let groups = liestoch::registry::group_names();
    let maps = liestoch::maps::smooth_map_names();
    let homs = liestoch::maps::homomorphism_names();
    let experiment_names = [
        "theorem1",
        "theorem2",
        "levy",
        "naturality",
        "homomorphism",
        "pluzhnikov",
        "convergence",
    ];
    if json {
        let value = serde_json::json!({
            "groups": groups,
            "maps": maps,
            "homomorphisms": homs,
            "experiments": experiment_names,
        });
        println!("{}", serde_json::to_string_pretty(&value).expect("static registries"));
        return;
    }
    println!("groups:");
    for g in groups {
        let d = liestoch::registry::group(g).expect("listed group resolves");
        println!(
            "  {g} (dim {}, embedded {}x{}, bi-invariant metric: {})",
            d.dim(),
            d.embed_dim(),
            d.embed_dim(),
            d.admits_biinvariant_metric()
        );
    }
    println!("maps:");
    for m in maps {
        println!("  {m}");
    }
    println!("homomorphisms:");
    for h in homs {
        println!("  {h}");
    }
    println!("experiments:");
    for e in experiment_names {
        println!("  {e}");
    }
}
