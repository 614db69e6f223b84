//! Command-line pipeline: extract, restore, filter, evaluate, loss-check, report.
//!
//! Every command reads and updates a single manifest in the output directory.

pub mod config;
pub mod error;
pub mod evaluate;
pub mod extract;
pub mod filter;
pub mod losscheck;
pub mod report;
pub mod restore;
pub mod workspace;

pub use config::{Overrides, PipelineConfig};
pub use error::{CliError, Result};

use clap::{Parser, Subcommand, ValueEnum};
use lumbarkit::filter::ImbalanceMode;
use std::ffi::OsString;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "lumbarkit", version, about = "Lumbar spine segmentation dataset curation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML settings file; flags override its values.
    #[arg(long, global = true, env = "LUMBARKIT_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, env = "LUMBARKIT_INPUT")]
    pub input: Option<PathBuf>,
    #[arg(long, global = true, env = "LUMBARKIT_OUTPUT")]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, env = "LUMBARKIT_MANIFEST")]
    pub manifest: Option<PathBuf>,
    #[arg(long, global = true, env = "LUMBARKIT_THRESHOLD")]
    pub threshold: Option<f64>,
    #[arg(long, global = true, value_enum, env = "LUMBARKIT_IMBALANCE_MODE")]
    pub imbalance_mode: Option<ModeArg>,
    #[arg(long, global = true, env = "LUMBARKIT_TAU")]
    pub tau: Option<f64>,
    #[arg(long, global = true, env = "LUMBARKIT_GAMMA")]
    pub gamma: Option<f64>,
    #[arg(long, global = true, env = "LUMBARKIT_ALPHA_MIX")]
    pub alpha_mix: Option<f64>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "LUMBARKIT_WORKERS")]
    pub workers: Option<usize>,
    /// Run out of stage order or overwrite earlier results.
    #[arg(long, global = true, env = "LUMBARKIT_FORCE")]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    DominantFraction,
    MaxOverMin,
}

impl From<ModeArg> for ImbalanceMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::DominantFraction => ImbalanceMode::DominantFraction,
            ModeArg::MaxOverMin => ImbalanceMode::MaxOverMin,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cut MHA volumes into PNG slices and create the manifest.
    Extract,
    /// Repair extracted masks and record class statistics.
    Restore,
    /// Drop slices with missing classes or too much imbalance.
    Filter,
    /// Score predicted masks against the restored masks.
    Evaluate {
        #[arg(long, env = "LUMBARKIT_PREDICTIONS")]
        predictions: Option<PathBuf>,
    },
    /// Check the loss kernels and write test vectors.
    LossCheck {
        #[arg(long, env = "LUMBARKIT_SEED")]
        seed: Option<u64>,
        #[arg(long, env = "LUMBARKIT_COUNT")]
        count: Option<usize>,
        /// Re-evaluate an existing vector file instead of writing one.
        #[arg(long)]
        verify: Option<PathBuf>,
        #[arg(long, env = "LUMBARKIT_TOLERANCE")]
        tolerance: Option<f64>,
    },
    /// Summarize the manifest and evaluation results.
    Report,
}

impl Cli {
    fn overrides(&self) -> Overrides {
        let mut o = Overrides {
            input: self.input.clone(),
            output: self.output.clone(),
            manifest: self.manifest.clone(),
            threshold: self.threshold,
            imbalance_mode: self.imbalance_mode.map(Into::into),
            tau: self.tau,
            gamma: self.gamma,
            alpha_mix: self.alpha_mix,
            workers: self.workers,
            force: self.force,
            ..Overrides::default()
        };
        match &self.command {
            Command::Evaluate { predictions } => o.predictions = predictions.clone(),
            Command::LossCheck { seed, count, tolerance, .. } => {
                o.seed = *seed;
                o.count = *count;
                o.tolerance = *tolerance;
            }
            _ => {}
        }
        o
    }

    pub fn resolve_config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        cfg.apply(&self.overrides());
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs one parsed invocation and returns the text to print.
pub fn execute(cli: &Cli) -> Result<String> {
    let cfg = cli.resolve_config()?;
    Ok(match &cli.command {
        Command::Extract => {
            let o = extract::cmd_extract(&cfg)?;
            format!(
                "extracted {} slices from {} volumes, {} failed\n",
                o.slices, o.volumes, o.failed
            )
        }
        Command::Restore => {
            let o = restore::cmd_restore(&cfg)?;
            format!(
                "restored {} masks ({} without a fixed point), {} failed\n",
                o.restored, o.not_converged, o.failed
            )
        }
        Command::Filter => filter::cmd_filter(&cfg)?.render_table(),
        Command::Evaluate { .. } => evaluate::cmd_evaluate(&cfg)?.render(),
        Command::LossCheck { verify, .. } => {
            let r = losscheck::cmd_losscheck(&cfg, verify.as_deref())?;
            r.checks
                .iter()
                .map(|c| format!("{} {}: {}\n", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail))
                .collect()
        }
        Command::Report => report::cmd_report(&cfg)?,
    })
}

/// Parses `args`, runs the command, prints output or error, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
