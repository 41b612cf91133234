use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use ipdsim_cli::config::{
    apply_overrides, config_keys_help, parse_config, ExperimentKind, RunConfig,
};
use ipdsim_cli::runner;

/// Binaural tone-in-noise detection model: packaged simulation experiments.
///
/// Each subcommand runs one experiment and writes its tables, plot data,
/// and a replayable manifest into the output directory. Without --config
/// the model defaults are used.
#[derive(Parser)]
#[command(name = "ipdsim", version, after_help = config_keys_help())]
struct Cli {
    #[command(subcommand)]
    experiment: Experiment,
}

#[derive(Subcommand)]
enum Experiment {
    /// Threshold grid over six bandwidths, four delays, and uncorrelated noise
    Fig3(RunArgs),
    /// Decision-variable moments and d-prime across noise correlations
    Correlation(RunArgs),
    /// Thresholds against interaural envelope delay at one bandwidth
    #[command(name = "group_delay")]
    GroupDelay(RunArgs),
    /// Threshold shift from a 1.5 ms envelope delay at 50 and 400 Hz
    Trahiotis(RunArgs),
    /// Predicted and measured interaural coherence per bandwidth
    Coherence(RunArgs),
    /// One adaptive track with its full trial log
    #[command(name = "staircase_demo")]
    StaircaseDemo(RunArgs),
    /// Two listening intervals rendered as 32-bit float WAV files
    #[command(name = "stimulus_export")]
    StimulusExport(RunArgs),
}

impl Experiment {
    fn split(self) -> (ExperimentKind, RunArgs) {
        match self {
            Experiment::Fig3(args) => (ExperimentKind::Fig3, args),
            Experiment::Correlation(args) => (ExperimentKind::Correlation, args),
            Experiment::GroupDelay(args) => (ExperimentKind::GroupDelay, args),
            Experiment::Trahiotis(args) => (ExperimentKind::Trahiotis, args),
            Experiment::Coherence(args) => (ExperimentKind::Coherence, args),
            Experiment::StaircaseDemo(args) => (ExperimentKind::StaircaseDemo, args),
            Experiment::StimulusExport(args) => (ExperimentKind::StimulusExport, args),
        }
    }
}

#[derive(Args)]
#[command(after_help = config_keys_help())]
struct RunArgs {
    /// Configuration file (key = value lines; see the key list below)
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Output directory (overrides the configured output_dir)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Master seed (overrides the configured master_seed)
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,

    /// Adaptive tracks per condition (overrides the configured n_runs)
    #[arg(long, value_name = "N")]
    runs: Option<usize>,

    /// Suppress progress output
    #[arg(long)]
    quiet: bool,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (kind, args) = cli.experiment.split();
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config file {}", path.display()))?;
            let config = parse_config(&text)?;
            if config.experiment != kind {
                bail!(
                    "config file {} sets experiment = {}, but the {} subcommand was invoked",
                    path.display(),
                    config.experiment.name(),
                    kind.name()
                );
            }
            config
        }
        None => RunConfig::defaults(kind),
    };
    apply_overrides(&mut config, args.out, args.seed, args.runs)?;
    let quiet = args.quiet;
    runner::run(&config, quiet)?;
    if !quiet {
        println!(
            "{}: outputs written to {}",
            config.experiment.name(),
            config.output_dir.display()
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {:#}", err);
            ExitCode::FAILURE
        }
    }
}
