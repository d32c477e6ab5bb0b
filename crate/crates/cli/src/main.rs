use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use qdefi_core::features::{build_matrix, FeatureConfig};
use qdefi_core::market_data::{generate_gbm, load_csv_with, save_csv, GapPolicy, GbmParams, PlantedSignal};
use qdefi_core::runner::report::{self, Format};
use qdefi_core::runner::{load_bundle, run_experiment, ExperimentConfig, RunnerError};

#[derive(Parser)]
#[command(name = "qdefi", version, about = "Classical, quantum and hybrid rebalancing-signal backtests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FeatureSet {
    Full,
    Hybrid,
    Quantum6,
    Quantum8,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Csv,
    Json,
    Svg,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Validate an OHLCV CSV and optionally write the cleaned series.
    Ingest {
        input: PathBuf,
        #[arg(long, default_value = "ASSET")]
        symbol: String,
        /// Fill missing bars with flat zero-volume candles instead of failing.
        #[arg(long)]
        fill_gaps: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic GBM series as OHLCV CSV.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 252)]
        bars: usize,
        #[arg(long, default_value_t = 0.1)]
        mu: f64,
        #[arg(long, default_value_t = 0.5)]
        sigma: f64,
        #[arg(long, default_value_t = 100.0)]
        s0: f64,
        /// Add the periodic mean-reverting displacement with its volume precursor.
        #[arg(long)]
        planted: bool,
    },
    /// Compute a feature matrix from an OHLCV CSV.
    Features {
        input: PathBuf,
        #[arg(long, default_value = "ASSET")]
        symbol: String,
        #[arg(long, value_enum, default_value = "full")]
        set: FeatureSet,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the models × assets × seeds matrix and write a run directory.
    Run {
        /// Experiment TOML, or a run manifest to repeat. Defaults to the 10-model matrix on synthetic data.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Base seed mixed into every per-run seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        predict_ahead: Option<usize>,
        /// Let QASA Sequence attend to future tokens in its window.
        #[arg(long)]
        no_causal_mask: bool,
    },
    /// Regenerate tables and plots from a run directory.
    Report {
        run_dir: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        format: ReportFormat,
        /// Destination directory; defaults to the run directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn data_err(asset: &str, e: impl ToString) -> RunnerError {
    RunnerError::Data { asset: asset.to_string(), message: e.to_string() }
}

fn io_err(path: &Path, e: std::io::Error) -> RunnerError {
    RunnerError::Io { path: path.display().to_string(), source: e }
}

fn write(path: &Path, text: &str) -> Result<(), RunnerError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn execute(cli: Cli) -> Result<(), RunnerError> {
    match cli.command {
        Command::Ingest { input, symbol, fill_gaps, out } => {
            let policy = if fill_gaps { GapPolicy::ForwardFill } else { GapPolicy::Reject };
            let s = load_csv_with(&input, &symbol, policy).map_err(|e| data_err(&symbol, e))?;
            let ts = s.timestamps();
            println!("{symbol}: {} bars, {} .. {}", s.len(), ts[0], ts[ts.len() - 1]);
            if let Some(out) = out {
                save_csv(&s, &out).map_err(|e| data_err(&symbol, e))?;
            }
        }
        Command::Synth { out, seed, bars, mu, sigma, s0, planted } => {
            let p = GbmParams {
                seed,
                n: bars,
                s0,
                mu,
                sigma,
                planted_signal: planted.then(PlantedSignal::default),
                ..GbmParams::default()
            };
            let s = generate_gbm(&p).map_err(|e| RunnerError::Config(e.to_string()))?;
            save_csv(&s, &out).map_err(|e| data_err("synthetic", e))?;
            println!("wrote {} bars to {}", s.len(), out.display());
        }
        Command::Features { input, symbol, set, out } => {
            let s = load_csv_with(&input, &symbol, GapPolicy::Reject).map_err(|e| data_err(&symbol, e))?;
            let cfg = match set {
                FeatureSet::Full => FeatureConfig::Full,
                FeatureSet::Hybrid => FeatureConfig::Hybrid,
                FeatureSet::Quantum6 => FeatureConfig::Quantum6,
                FeatureSet::Quantum8 => FeatureConfig::Quantum8,
            };
            let m = build_matrix(&s, &cfg).map_err(|e| data_err(&symbol, e))?;
            let mut buf = Vec::new();
            m.write_csv(&mut buf).map_err(|e| data_err(&symbol, e))?;
            write(&out, &String::from_utf8_lossy(&buf))?;
            println!("wrote {} rows × {} columns (warm-up {}) to {}", m.n_rows(), m.n_cols(), m.warm_up, out.display());
        }
        Command::Run { config, seed, jobs, out, predict_ahead, no_causal_mask } => {
            let mut cfg = match &config {
                Some(p) => ExperimentConfig::load_any(p)?,
                None => ExperimentConfig::paper_matrix(),
            };
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            if let Some(k) = predict_ahead {
                cfg.predict_ahead = k;
            }
            if no_causal_mask {
                cfg.disable_causal_mask();
            }
            if let Some(o) = out {
                cfg.out_dir = o;
            }
            let dir = cfg.out_dir.clone();
            let (bundle, manifest) = run_experiment(&cfg, &dir, jobs)?;
            print!("{}", report::render(&bundle, Format::Text).into_iter().find(|(p, _)| p.ends_with("ranking.txt")).map(|(_, t)| t).unwrap_or_default());
            println!("{} runs written to {} ({} files)", bundle.runs.len(), dir.display(), manifest.files.len() + 1);
        }
        Command::Report { run_dir, format, out } => {
            let bundle = load_bundle(&run_dir)?;
            let formats = match format {
                ReportFormat::Text => vec![Format::Text],
                ReportFormat::Csv => vec![Format::Csv],
                ReportFormat::Json => vec![Format::Json],
                ReportFormat::Svg => vec![Format::Svg],
                ReportFormat::All => vec![Format::Text, Format::Csv, Format::Json, Format::Svg],
            };
            let dest = out.unwrap_or_else(|| run_dir.clone());
            let mut n = 0;
            for f in formats {
                for (rel, text) in report::render(&bundle, f) {
                    write(&dest.join(rel), &text)?;
                    n += 1;
                }
            }
            println!("wrote {n} report files to {}", dest.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
