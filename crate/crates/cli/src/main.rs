//! `dgcopula`: simulation, fitting and diagnostics for Gaussian copula models
//! with discrete margins.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(name = "dgcopula", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// `key = value` experiment file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in design: ar1-negbin or anova-poisson.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    jitters: Option<usize>,
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(name)) => ExperimentConfig::parse(config::preset(name)?)?,
            (None, None) => anyhow::bail!("either --config or --preset is required"),
        };
        let nonzero = |name: &str, v: usize| {
            if v == 0 {
                anyhow::bail!("--{name} must be positive")
            }
            Ok(v)
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(v) = self.replicates {
            cfg.replicates = nonzero("replicates", v)?;
        }
        if let Some(v) = self.jitters {
            cfg.jitters = nonzero("jitters", v)?;
        }
        if let Some(v) = self.bootstrap {
            cfg.bootstrap = nonzero("bootstrap", v)?;
        }
        if let Some(v) = self.parallelism {
            cfg.parallelism = nonzero("parallelism", v)?;
        }
        if let Some(p) = &self.out {
            cfg.out = Some(p.clone());
        }
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write one dataset CSV per replicate into the --out directory.
    Simulate(Common),
    /// Fit the DT and CE objectives to a dataset.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
    /// Replicate study of likelihood ratios at the true parameter.
    LrExperiment(Common),
    /// ℓ_DT and ℓ_CE over a grid of a two-parameter model.
    Surface {
        #[command(flatten)]
        common: Common,
        /// Dataset; simulated at the true parameter when absent.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Points per axis.
        #[arg(long, default_value_t = 100)]
        grid: usize,
        /// `from:to` for the first parameter.
        #[arg(long)]
        first_range: Option<String>,
        /// `from:to` for the second parameter.
        #[arg(long)]
        second_range: Option<String>,
    },
    /// Bootstrap κ̂ at the DT estimate for a dataset.
    Kappa {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
    /// κ̂ over a design grid at the given parameter values.
    KappaGrid {
        #[command(flatten)]
        common: Common,
        /// Marginal parameter values (rows).
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0, 3.0, 4.0])]
        lambdas: Vec<f64>,
        /// Correlation parameter values (columns).
        #[arg(long, value_delimiter = ',', default_values_t = [0.6, 0.7, 0.8, 0.9])]
        omegas: Vec<f64>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate(c) => commands::simulate(&c.resolve()?),
        Command::Fit { common, data } => commands::fit(&common.resolve()?, &data),
        Command::LrExperiment(c) => commands::lr_experiment(&c.resolve()?),
        Command::Surface {
            common,
            data,
            grid,
            first_range,
            second_range,
        } => commands::surface(
            &common.resolve()?,
            data.as_deref(),
            grid,
            first_range.as_deref(),
            second_range.as_deref(),
        ),
        Command::Kappa { common, data } => commands::kappa(&common.resolve()?, &data),
        Command::KappaGrid {
            common,
            lambdas,
            omegas,
        } => commands::kappa_grid(&common.resolve()?, &lambdas, &omegas),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
