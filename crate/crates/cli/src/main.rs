mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "tfed", version, about = "Tukey's-fences event detection for aggregate current waveforms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Detect events in a waveform; writes JSON lines, one per event.
    Detect {
        #[command(flatten)]
        shared: SharedArgs,
        /// Also write one JSON line per analysed window.
        #[arg(long)]
        verdicts: Option<PathBuf>,
        /// Read a BLUED-style raw file or directory, selecting this phase's
        /// current (A or B); implies --rate 12000 --decimate 2.
        #[arg(long, visible_alias = "bled-layout", value_name = "PHASE")]
        blued_layout: Option<String>,
    },
    /// Generate a synthetic waveform (raw-f64le) and its ground truth.
    Synth {
        #[command(flatten)]
        shared: SharedArgs,
        #[command(flatten)]
        synth: commands::SynthArgs,
    },
    /// Score detected events against ground truth; prints metrics JSON.
    Eval {
        #[command(flatten)]
        shared: SharedArgs,
        /// Events file written by `detect`.
        #[arg(long)]
        events: Option<PathBuf>,
        /// Window verdicts written by `detect --verdicts`, used to count true negatives.
        #[arg(long)]
        verdicts: Option<PathBuf>,
    },
    /// Re-run detection and scoring over a list of parameter values; writes CSV.
    Sweep {
        #[command(flatten)]
        shared: SharedArgs,
        /// One of step, k, std-window.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
    },
}

#[derive(Debug, Args)]
struct SharedArgs {
    /// Key = value file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    /// csv, raw-f32le or raw-f64le.
    #[arg(long)]
    format: Option<String>,
    /// Input sample rate in Hz.
    #[arg(long)]
    rate: Option<f64>,
    /// Keep every n-th sample.
    #[arg(long)]
    decimate: Option<usize>,
    /// Window length in samples.
    #[arg(long)]
    window: Option<usize>,
    /// Window step in samples.
    #[arg(long)]
    step: Option<usize>,
    /// Block (FFT) length in samples.
    #[arg(long)]
    block: Option<usize>,
    /// Tukey constant.
    #[arg(long)]
    k: Option<f64>,
    /// Points per forward standard deviation.
    #[arg(long)]
    std_window: Option<usize>,
    /// Ground-truth CSV (`time_s[,label]`).
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Matching tolerance in seconds; defaults to one window.
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SharedArgs {
    fn into_config(self, extra: RunConfig) -> anyhow::Result<RunConfig> {
        let file = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        let flags = RunConfig {
            input: self.input,
            format: self.format,
            rate: self.rate,
            decimate: self.decimate,
            window: self.window,
            step: self.step,
            block: self.block,
            k: self.k,
            std_window: self.std_window,
            truth: self.truth,
            tolerance: self.tolerance,
            seed: self.seed,
            out: self.out,
            ..extra
        };
        Ok(file.overlay(flags))
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Detect {
            shared,
            verdicts,
            blued_layout,
        } => {
            let cfg = shared.into_config(RunConfig {
                verdicts,
                blued_layout,
                ..Default::default()
            })?;
            commands::detect(&cfg.resolve()?)
        }
        Command::Synth { shared, synth } => commands::synth(&shared.into_config(RunConfig::default())?.resolve()?, &synth),
        Command::Eval {
            shared,
            events,
            verdicts,
        } => {
            let cfg = shared.into_config(RunConfig {
                events,
                verdicts,
                ..Default::default()
            })?;
            commands::eval(&cfg.resolve()?)
        }
        Command::Sweep { shared, param, values } => {
            commands::sweep(&shared.into_config(RunConfig::default())?.resolve()?, &param, &values)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
