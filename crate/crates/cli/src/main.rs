//! `datri-lab`: total scalar curvature experiments and the D'Atri diagnostics
//! battery on registered 3-dimensional metrics.
//!
//! Exit status: 0 on success (for `report`, the classification matches the
//! model's expectation), 1 on usage errors or unknown models, 2 when a
//! computation fails or the report is INVALID, 3 on a classification
//! mismatch.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use datri_core::Registry;

use commands::{schema_help, Failure};
use config::{parse_param, CurveKind, RunConfig, SweepKind};

#[derive(Parser)]
#[command(name = "datri-lab", version)]
#[command(about = "Total scalar curvature of spheres, hemispheres and tubes, with D'Atri diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the diagnostics battery; writes report.json and report.txt
    Report(Common),
    /// Tabulate one quantity over a grid; writes sweep_<kind>_<model>.csv
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Quantity to tabulate
        #[arg(long, value_enum)]
        kind: Option<SweepKind>,
        /// Axis of tube-total sweeps
        #[arg(long, value_enum)]
        curve: Option<CurveKind>,
        /// Base point index (0 is the identity or origin)
        #[arg(long)]
        base: Option<usize>,
    },
    /// Fit the volume-density series and compare with curvature formulas
    Series {
        #[command(flatten)]
        common: Common,
        /// Base point index (0 is the identity or origin)
        #[arg(long)]
        base: Option<usize>,
        /// Highest fitted power
        #[arg(long)]
        k_max: Option<i32>,
    },
    /// List registered models and their parameters
    Models,
}

#[derive(Args)]
struct Common {
    /// Registered model name
    #[arg(long)]
    model: Option<String>,
    /// Model parameter override, repeatable
    #[arg(long = "param", value_name = "KEY=VALUE", value_parser = parse_param)]
    params: Vec<(String, f64)>,
    /// Grid values, comma separated or repeated
    #[arg(long = "r", value_delimiter = ',', allow_negative_numbers = true)]
    radii: Vec<f64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON run configuration; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed of the sampled directions
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, Failure> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p).map_err(Failure::Usage)?,
            None => RunConfig::default(),
        };
        if let Some(m) = &self.model {
            c.model = Some(m.clone());
        }
        c.params.extend(self.params.iter().cloned());
        if !self.radii.is_empty() {
            c.radii = self.radii.clone();
        }
        if let Some(o) = &self.out {
            c.out = o.clone();
        }
        if let Some(s) = self.seed {
            c.battery.seed = s;
        }
        Ok(c)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let path = match cli.command {
        Command::Models => {
            print!("{}", schema_help(&Registry::builtin()));
            return Ok(());
        }
        Command::Report(common) => commands::report(&common.resolve()?)?,
        Command::Sweep {
            common,
            kind,
            curve,
            base,
        } => {
            let mut c = common.resolve()?;
            c.kind = kind.unwrap_or(c.kind);
            c.curve = curve.unwrap_or(c.curve);
            c.base = base.unwrap_or(c.base);
            commands::sweep(&c)?
        }
        Command::Series { common, base, k_max } => {
            let mut c = common.resolve()?;
            c.base = base.unwrap_or(c.base);
            c.k_max = k_max.unwrap_or(c.k_max);
            commands::series(&c)?
        }
    };
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
