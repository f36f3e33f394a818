use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use otfs_ipac::config::{parse_snr_db, AdcBits, SimConfig, SnrConvention};
use otfs_ipac::error::{Error, Result};
use otfs_ipac::sim::{run_sweep, write_csv, write_csv_file, CsvMetadata, Metric, ResultRow, Simulator, SweepSpec};

/// OTFS positioning and communication simulator with low-resolution ADCs.
#[derive(Debug, Parser)]
#[command(name = "otfs-ipac", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte-Carlo sweep over SNR and ADC resolution, written as CSV.
    Sweep(Common),
    /// Cramer-Rao bounds only, no estimation.
    Crlb(Common),
    /// Run one trial per (SNR, bits) cell and print it as JSON lines.
    SingleTrial {
        #[command(flatten)]
        common: Common,
        /// Include every intermediate stage, not just the metrics.
        #[arg(long)]
        dump: bool,
        /// Trial index.
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
    /// Parse and validate a configuration file.
    ValidateConfig(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file; built-in reference scenario when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated ADC resolutions, e.g. `3,4,5,inf`.
    #[arg(long, value_delimiter = ',')]
    bits: Option<Vec<AdcBits>>,
    /// Comma-separated SNR points in dB.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, value_parser = parse_snr_db)]
    snr: Option<Vec<f64>>,
    /// `receive` (per receive antenna) or `transmit` (per transmitted sample).
    #[arg(long)]
    snr_convention: Option<SnrConvention>,
}

impl Common {
    fn load(&self) -> Result<SimConfig> {
        let mut cfg = match &self.config {
            Some(path) => SimConfig::from_file(path)?,
            None => SimConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.frame.seed = seed;
        }
        if let Some(trials) = self.trials {
            cfg.sweep.trials = trials;
        }
        if let Some(bits) = &self.bits {
            cfg.sweep.bits = bits.clone();
        }
        if let Some(snr) = &self.snr {
            cfg.frame.snr_db = snr.clone();
        }
        if let Some(conv) = self.snr_convention {
            cfg.sweep.snr_convention = conv;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn output(&self) -> Result<Box<dyn Write>> {
        match &self.out {
            Some(path) => std::fs::File::create(path)
                .map(|f| Box::new(std::io::BufWriter::new(f)) as Box<dyn Write>)
                .map_err(|source| Error::Io {
                    path: path.display().to_string(),
                    source,
                }),
            None => Ok(Box::new(std::io::stdout().lock())),
        }
    }
}

fn emit_csv(common: &Common, rows: &[ResultRow], meta: &CsvMetadata) -> Result<()> {
    match &common.out {
        Some(path) => write_csv_file(path, rows, meta),
        None => write_csv(std::io::stdout().lock(), rows, meta).map_err(|source| Error::Io {
            path: "<stdout>".to_string(),
            source,
        }),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sweep(common) => {
            let cfg = common.load()?;
            let spec = SweepSpec::from_config(&cfg)?;
            let sim = Simulator::new(&cfg)?;
            let rows = run_sweep(&sim, &spec)?;
            emit_csv(&common, &rows, &CsvMetadata::for_config(&cfg, spec.seed))
        }
        Command::Crlb(common) => {
            let mut cfg = common.load()?;
            cfg.sweep.metrics = [Metric::CrlbPosition, Metric::CrlbDoppler, Metric::CrlbGain]
                .iter()
                .map(|m| m.name().to_string())
                .collect();
            let spec = SweepSpec::from_config(&cfg)?;
            let sim = Simulator::new(&cfg)?;
            let rows = run_sweep(&sim, &spec)?;
            emit_csv(&common, &rows, &CsvMetadata::for_config(&cfg, spec.seed))
        }
        Command::SingleTrial { common, dump, trial } => {
            let cfg = common.load()?;
            let sim = Simulator::new(&cfg)?;
            let mut out = common.output()?;
            let io = |source| Error::Io {
                path: "<output>".to_string(),
                source,
            };
            for &snr in &cfg.frame.snr_db {
                for &bits in &cfg.sweep.bits {
                    let line = if dump {
                        serde_json::to_string(&sim.dump_trial(snr, bits, cfg.frame.seed, trial)?)
                    } else {
                        let metrics = sim.run_trial(snr, bits, cfg.frame.seed, trial)?;
                        serde_json::to_string(&serde_json::json!({
                            "trial": trial,
                            "snr_db": snr,
                            "bits": bits.to_string(),
                            "metrics": metrics,
                        }))
                    }
                    .map_err(|e| Error::Io {
                        path: "<output>".to_string(),
                        source: std::io::Error::other(e),
                    })?;
                    writeln!(out, "{line}").map_err(io)?;
                }
            }
            out.flush().map_err(io)
        }
        Command::ValidateConfig(common) => {
            let cfg = common.load()?;
            SweepSpec::from_config(&cfg)?;
            println!("ok");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
