//! Batch experiment runner over `pascal-adic`.
//!
//! Settings come from an optional `key = value` file, then flags; every
//! artifact embeds the version and the resolved settings. Exit status is 0
//! on success, 1 when an internal check fails, 2 on a config error.

pub mod commands;
pub mod config;
pub mod emit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use crate::config::{ConfigError, Settings};
use crate::emit::{render, Artifact, Format};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Closed-form residues of row q^n-2 against Pascal's recurrence.
    RowCheck,
    /// Exact line/gasket measure ratios for n = 0..=N.
    Gasket,
    /// Mean fraction of path steps where d_j is divisible by q.
    Divisibility,
    /// Joint vs. product masses of residue events at two levels.
    Mixing,
    /// Union masses of residue-class hits up to level R.
    Sweep,
    /// Calibrate stages and build θ.
    ThetaBuild,
    /// Weyl averages, density and histogram of {d_j θ} for a built θ.
    ThetaStats,
    /// Powers of two that are sums of distinct powers of three.
    ErdosSearch,
    /// Integers with restricted digits in several bases.
    Cantor,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::RowCheck => "row-check",
            Command::Gasket => "gasket",
            Command::Divisibility => "divisibility",
            Command::Mixing => "mixing",
            Command::Sweep => "sweep",
            Command::ThetaBuild => "theta-build",
            Command::ThetaStats => "theta-stats",
            Command::ErdosSearch => "erdos-search",
            Command::Cantor => "cantor",
        }
    }
}

/// Flags are kept as text and validated per subcommand, with the same
/// messages as config-file values.
#[derive(Debug, Parser)]
#[command(
    name = "pascal-lab",
    version,
    about = "Binomial residue, gasket and θ experiments"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// `key = value` file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub q: Option<String>,
    /// Comma-separated primes (bases for `cantor`).
    #[arg(long)]
    pub primes: Option<String>,
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub m: Option<String>,
    /// Residue class for `mixing`, max level for `sweep`.
    #[arg(long)]
    pub r: Option<String>,
    /// Line slope as `num/den`.
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<String>,
    /// Line x-intercept as `num/den`.
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<String>,
    /// Comma-separated stage levels, skipping calibration.
    #[arg(long)]
    pub horizon: Option<String>,
    #[arg(long)]
    pub samples: Option<String>,
    #[arg(long)]
    pub paths: Option<String>,
    /// Calibration mode: weyl or sweep.
    #[arg(long)]
    pub mode: Option<String>,
    /// strict or relaxed.
    #[arg(long)]
    pub delta_mode: Option<String>,
    /// Nesting policy: strict or tail.
    #[arg(long)]
    pub policy: Option<String>,
    /// q^n-2 or q^n.
    #[arg(long)]
    pub row_rule: Option<String>,
    #[arg(long)]
    pub rmax: Option<String>,
    #[arg(long)]
    pub bound: Option<String>,
    /// Comma-separated allowed digits.
    #[arg(long)]
    pub digits: Option<String>,
    #[arg(long)]
    pub eps: Option<String>,
    #[arg(long)]
    pub precision: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    pub format: Option<String>,
}

impl Cli {
    fn flag_values(&self) -> Vec<(&'static str, Option<String>)> {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        vec![
            ("alpha", self.alpha.clone()),
            ("seed", self.seed.clone()),
            ("q", self.q.clone()),
            ("primes", self.primes.clone()),
            ("n", self.n.clone()),
            ("m", self.m.clone()),
            ("r", self.r.clone()),
            ("gamma", self.gamma.clone()),
            ("b", self.b.clone()),
            ("horizon", self.horizon.clone()),
            ("samples", self.samples.clone()),
            ("paths", self.paths.clone()),
            ("mode", self.mode.clone()),
            ("delta-mode", self.delta_mode.clone()),
            ("policy", self.policy.clone()),
            ("row-rule", self.row_rule.clone()),
            ("rmax", self.rmax.clone()),
            ("bound", self.bound.clone()),
            ("digits", self.digits.clone()),
            ("eps", self.eps.clone()),
            ("precision", self.precision.clone()),
            ("out", path(&self.out)),
            ("format", self.format.clone()),
        ]
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("check failed: {0}")]
    Assertion(String),
    #[error("{0}")]
    Run(String),
    #[error("cannot write {}: {source}", path.display())]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(2),
            _ => ExitCode::from(1),
        }
    }
}

/// A subcommand with its merged settings.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub settings: Settings,
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Result<Self, ConfigError> {
        let mut settings = match &cli.config {
            Some(path) => Settings::load_file(path)?,
            None => Settings::new(),
        };
        for (key, value) in cli.flag_values() {
            if let Some(v) = value {
                settings.set(key, v);
            }
        }
        Ok(Self {
            command: cli.command,
            settings,
        })
    }
}

/// Rendered output of a successful or failed run.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub artifact: Artifact,
    pub rendered: String,
    pub out: Option<PathBuf>,
}

/// Validates settings, runs the subcommand and renders its artifact.
/// Nothing is written; see [`run`].
pub fn execute(config: RunConfig) -> Result<Outcome, CliError> {
    let RunConfig {
        command,
        mut settings,
    } = config;
    let default_format = if command == Command::ThetaBuild {
        "json"
    } else {
        "csv"
    };
    let format: Format = settings.parsed("format", default_format)?;
    let out = settings.optional_str("out").map(PathBuf::from);
    let artifact = match command {
        Command::RowCheck => commands::row_check(&mut settings),
        Command::Gasket => commands::gasket(&mut settings),
        Command::Divisibility => commands::divisibility(&mut settings),
        Command::Mixing => commands::mixing(&mut settings),
        Command::Sweep => commands::sweep(&mut settings),
        Command::ThetaBuild => commands::theta_build(&mut settings),
        Command::ThetaStats => commands::theta_stats(&mut settings),
        Command::ErdosSearch => commands::erdos_search(&mut settings),
        Command::Cantor => commands::cantor(&mut settings),
    }?;
    debug_assert_eq!(artifact.command, command.name());
    let rendered = render(&artifact, settings.echo(), format);
    Ok(Outcome {
        artifact,
        rendered,
        out,
    })
}

/// Runs one subcommand, writing the artifact to `--out` or stdout and the
/// summary line to stderr (stdout when writing to a file).
pub fn run(config: RunConfig) -> Result<(), CliError> {
    let outcome = execute(config)?;
    match &outcome.out {
        Some(path) => {
            std::fs::write(path, &outcome.rendered).map_err(|source| CliError::Output {
                path: path.clone(),
                source,
            })?;
            println!("{}", outcome.artifact.summary);
        }
        None => {
            print!("{}", outcome.rendered);
            eprintln!("{}", outcome.artifact.summary);
        }
    }
    match outcome.artifact.failure {
        Some(f) => Err(CliError::Assertion(f)),
        None => Ok(()),
    }
}
