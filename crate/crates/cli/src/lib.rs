//! Command-line front end: config-driven evaluation, figure data,
//! simulation and fitting, emitting CSV or JSON plus a run manifest.

pub mod commands;
pub mod config;
pub mod error;
pub mod figures;
pub mod manifest;
pub mod table;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use specklamp::config::SCHEMA_VERSION;

use crate::commands::Output;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::figures::{FigureId, REGISTRY_VERSION};
use crate::manifest::{RunManifest, Versions};
use crate::table::Format;

/// Caps the worker count; all cores when unset.
pub const THREADS_ENV: &str = "SPECKLAMP_THREADS";

#[derive(Debug, Parser)]
#[command(name = "specklamp", version, about = "Photocount noise of amplifying disordered slabs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// RNG seed of stochastic commands; overrides `simulation.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mean transmission, reflection and emission coefficients against x.
    Coeffs,
    /// Correlation functions against t/t_c.
    Corr,
    /// Term-by-term photocount variance, at one point or over a sweep.
    Variance,
    /// Photocount autocorrelation for non-overlapping windows.
    Autocorr,
    /// Monte Carlo checks of the variance and of the speckle synthesis.
    Simulate,
    /// Recovers g and the correlation time from a noise curve.
    Fit {
        /// CSV with header `abscissa,ordinate[,sigma]`; overrides `fit.curve`.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Data of a reference figure.
    Figures {
        /// fig3 ... fig9, or `all`.
        #[arg(long)]
        id: String,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Coeffs => "coeffs",
            Command::Corr => "corr",
            Command::Variance => "variance",
            Command::Autocorr => "autocorr",
            Command::Simulate => "simulate",
            Command::Fit { .. } => "fit",
            Command::Figures { .. } => "figures",
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code: 0 success, 1 invalid input, 2 numerical failure.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Usage(e.to_string()))
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    thread_pool()?.install(|| dispatch(cli))
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.simulation.seed = s;
    }
    std::fs::create_dir_all(&cli.out).map_err(|e| CliError::io(cli.out.display().to_string(), e))?;
    let dir = cli.out.as_path();
    let (out, resolved, figures) = match &cli.command {
        Command::Figures { id } => {
            let ids = if id == "all" {
                FigureId::ALL.to_vec()
            } else {
                vec![id.parse::<FigureId>()?]
            };
            (figures(&ids)?, figure_config(&ids), true)
        }
        cmd => {
            let out = match cmd {
                Command::Coeffs => commands::coeffs(&config)?,
                Command::Corr => commands::corr(&config)?,
                Command::Variance => commands::variance(&config)?,
                Command::Autocorr => commands::autocorr(&config)?,
                Command::Simulate => commands::simulate(&config, dir)?,
                Command::Fit { input } => commands::fit(&config, input.as_deref())?,
                Command::Figures { .. } => unreachable!(),
            };
            let resolved = serde_json::to_value(&config).map_err(|e| CliError::io("config", e))?;
            (out, resolved, false)
        }
    };
    finish(cli, dir, out, resolved, figures)
}

fn figures(ids: &[FigureId]) -> Result<Output, CliError> {
    let mut out = Output::default();
    for &id in ids {
        let (t, w) = id.compute()?;
        out.tables.push(t);
        out.warnings.extend(w);
        out.artifact_choices.extend(id.artifact_choices());
    }
    Ok(out)
}

fn figure_config(ids: &[FigureId]) -> serde_json::Value {
    let map = ids
        .iter()
        .map(|id| {
            let v = serde_json::json!({
                "description": id.description(),
                "parameters": id.parameters(),
            });
            (id.name().to_string(), v)
        })
        .collect::<serde_json::Map<_, _>>();
    serde_json::json!({ "figures": map })
}

fn finish(
    cli: &Cli,
    dir: &Path,
    out: Output,
    config: serde_json::Value,
    figures: bool,
) -> Result<(), CliError> {
    // validate everything before the first write
    for t in &out.tables {
        t.check_finite()?;
    }
    let mut outputs = out.files;
    for t in &out.tables {
        outputs.push(t.write(dir, cli.format)?);
    }
    for (name, value) in &out.json {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::io(name, e))?;
        bytes.push(b'\n');
        std::fs::write(dir.join(name), bytes).map_err(|e| CliError::io(name, e))?;
        outputs.push(name.clone());
    }
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    RunManifest {
        command: cli.command.name().into(),
        config,
        outputs,
        versions: Versions {
            code: env!("CARGO_PKG_VERSION"),
            schema: SCHEMA_VERSION,
            figures: figures.then_some(REGISTRY_VERSION),
        },
        seed: out.seed,
        artifact_choices: out.artifact_choices,
        warnings: out.warnings,
    }
    .write(dir)
}
