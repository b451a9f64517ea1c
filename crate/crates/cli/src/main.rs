use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qradar::harness::{self, ExperimentConfig, GenerateOptions, NoisePreset, SweepOptions};
use qradar::par;

#[derive(Parser)]
#[command(name = "qradar", version, about = "Radar micro-Doppler classification with classical and quantum kernels")]
struct Cli {
    /// Random seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON file with experiment configuration fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config file).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize signals, extract features, write the split.
    Generate {
        /// Also write raw I/Q signals.
        #[arg(long)]
        save_signals: bool,
    },
    /// Accuracy against number of PCA components.
    PcaSweep {
        #[arg(long, default_value_t = 6)]
        k_max: usize,
        /// Allow k above the qubit cap using an RBF kernel for those rows.
        #[arg(long)]
        classical_surrogate: bool,
    },
    /// Classical RBF SVM against the exact-kernel QSVM.
    Compare,
    /// Finite-shot statistics of the representative feature-map state.
    Shots {
        /// Replace the shot list, e.g. `--shots 1024,4096,8192`.
        #[arg(long, value_delimiter = ',')]
        shots: Option<Vec<u64>>,
        /// Preset used for the uncertainty-ratio summary.
        #[arg(long)]
        noise_preset: Option<NoisePreset>,
    },
    /// Calibrated noise emulation of the reference circuit.
    HwEmulate,
    /// Merge experiment outputs into report.json and report.md.
    Report {
        /// Explicit table files; defaults to those in the output directory.
        inputs: Vec<PathBuf>,
    },
}

fn resolve_config(cli: &Cli) -> qradar::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Command::Shots { shots, noise_preset } = &cli.command {
        if let Some(s) = shots {
            cfg.shots = s.clone();
        }
        if let Some(p) = noise_preset {
            cfg.noise_preset = *p;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> qradar::Result<serde_json::Value> {
    let cfg = resolve_config(cli)?;
    let value = match &cli.command {
        Command::Generate { save_signals } => serde_json::to_value(harness::cmd_generate(
            &cfg,
            GenerateOptions {
                save_signals: *save_signals,
            },
        )?),
        Command::PcaSweep {
            k_max,
            classical_surrogate,
        } => serde_json::to_value(harness::cmd_pca_sweep(
            &cfg,
            SweepOptions {
                k_max: *k_max,
                classical_surrogate: *classical_surrogate,
            },
        )?),
        Command::Compare => serde_json::to_value(harness::cmd_compare(&cfg)?),
        Command::Shots { .. } => serde_json::to_value(harness::cmd_shots(&cfg)?),
        Command::HwEmulate => serde_json::to_value(harness::cmd_hw_emulate(&cfg)?),
        Command::Report { inputs } => Ok(harness::cmd_report(&cfg, inputs)?),
    };
    Ok(value.expect("result types serialize"))
}

fn error_json(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", error_json("usage", e.to_string().trim_end()));
            return ExitCode::from(2);
        }
    };
    match par::with_threads(cli.threads, || run(&cli)) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_json(e.kind(), &e.to_string()));
            ExitCode::FAILURE
        }
    }
}
