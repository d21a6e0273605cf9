use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use ngts_core::harness::{
    run_ber, run_complexity, run_trace, selftest, ExperimentConfig, SelftestOptions,
    COMPLEXITY_HEADER, RESULT_HEADER,
};
use ngts_core::{Constellation, DetectorKind};

#[derive(Parser)]
#[command(
    name = "ngts",
    version,
    about = "Tabu-search MIMO detection experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bit error rate sweep over an SNR grid.
    Ber(ExperimentArgs),
    /// Operation counts and reductions against the first detector.
    Complexity(ExperimentArgs),
    /// Per-iteration traces of a single instance.
    Trace {
        #[command(flatten)]
        args: ExperimentArgs,
        /// Trial index whose instance is traced.
        #[arg(long, default_value_t = 0)]
        instance: u64,
    },
    /// Runs the built-in invariant checks.
    Selftest {
        #[arg(long, hide = true)]
        inject_gamma_fault: bool,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// key = value file; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    nt: Option<usize>,
    #[arg(long)]
    nr: Option<usize>,
    /// qpsk, 16qam or 64qam.
    #[arg(long = "mod")]
    modulation: Option<Constellation>,
    /// SNR points in dB, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    snr: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    /// Tabu list length [default: iters/2].
    #[arg(long)]
    tabu: Option<usize>,
    /// conventional, qrts, qrts-co, ngts, ngts-co, sesd, ml.
    #[arg(long, value_delimiter = ',')]
    detectors: Option<Vec<DetectorKind>>,
    /// Also run the channel-ordered variants.
    #[arg(long)]
    ordering: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (trace: output directory). Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ExperimentArgs {
    fn into_config(self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)
                .with_context(|| format!("reading {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.nt {
            cfg.nt = v;
            cfg.nr = if self.config.is_some() {
                v.max(cfg.nr)
            } else {
                v
            };
        }
        if let Some(v) = self.nr {
            cfg.nr = v;
        }
        if let Some(v) = self.modulation {
            cfg.constellation = v;
        }
        if let Some(v) = self.snr {
            cfg.snr_db = v;
        }
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        if let Some(v) = self.iters {
            cfg.iterations = v;
        }
        if self.tabu.is_some() {
            cfg.tabu = self.tabu;
        }
        if let Some(v) = self.detectors {
            cfg.detectors = v;
        }
        cfg.ordering |= self.ordering;
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if self.out.is_some() {
            cfg.out = self.out;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<bool> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Ber(args) => {
            let cfg = args.into_config()?;
            let rows = run_ber(&cfg)?;
            if cfg.out.is_none() {
                writeln!(out, "{RESULT_HEADER}")?;
                for r in &rows {
                    writeln!(out, "{}", r.csv_record())?;
                }
            }
        }
        Command::Complexity(args) => {
            let cfg = args.into_config()?;
            let rows = run_complexity(&cfg)?;
            if cfg.out.is_none() {
                writeln!(out, "{COMPLEXITY_HEADER}")?;
                for r in &rows {
                    writeln!(out, "{}", r.csv_record())?;
                }
            }
        }
        Command::Trace { args, instance } => {
            let cfg = args.into_config()?;
            let report = run_trace(&cfg, instance)?;
            if cfg.out.is_none() {
                for t in &report.traces {
                    writeln!(out, "# {}", t.detector)?;
                    write!(out, "{}", t.csv())?;
                }
            }
            write!(out, "{}", report.summary())?;
        }
        Command::Selftest { inject_gamma_fault } => {
            let report = selftest(SelftestOptions { inject_gamma_fault })?;
            writeln!(out, "{report}")?;
            return Ok(report.passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
