use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qpart_cli::config::{default_preset, Experiment};
use qpart_cli::{load_config, preset, run_experiment, CliError, ExperimentConfig};
use qpart_core::digits::Basis;

#[derive(Parser)]
#[command(
    name = "qpart",
    version,
    about = "Partitioned quantum model experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON experiment config.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Shipped preset, e.g. `n8` for `vqe`.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory (default: the config's `output_dir`, else `runs/<kind>`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Ground-state search for the transverse-field Ising chain.
    Vqe {
        #[command(flatten)]
        common: Common,
    },
    /// Train the 3-vs-6 digits classifier.
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_basis)]
        basis: Option<Basis>,
        /// Headerless 64-pixel + label CSV (default: bundled corpus).
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Gradient variance against subsystem count.
    BpScan {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Write the factored observable for a TFIM configuration.
    ConjugateDump {
        #[command(flatten)]
        common: Common,
    },
    /// Second moments of random-circuit expectations.
    HaarCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        qubits: Option<usize>,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// List shipped presets.
    Presets,
}

fn parse_basis(s: &str) -> Result<Basis, String> {
    match s {
        "full" => Ok(Basis::Full),
        "reduced" => Ok(Basis::Reduced),
        _ => Err(format!("unknown basis {s:?} (full | reduced)")),
    }
}

fn resolve(kind: &str, common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match (&common.config, &common.preset) {
        (Some(path), _) => load_config(path)?,
        (None, Some(name)) => preset(kind, name)?,
        (None, None) => preset(kind, default_preset(kind))?,
    };
    if cfg.experiment.kind() != kind {
        return Err(CliError::Config(format!(
            "config describes a {} experiment, not {kind}",
            cfg.experiment.kind()
        )));
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (kind, common, mut cfg) = match &cli.command {
        Command::Presets => {
            for (name, _) in qpart_cli::PRESETS {
                println!("{name}");
            }
            return Ok(());
        }
        Command::Vqe { common } => ("vqe", common, resolve("vqe", common)?),
        Command::Classify { common, .. } => ("classify", common, resolve("classify", common)?),
        Command::BpScan { common, .. } => ("bp-scan", common, resolve("bp-scan", common)?),
        Command::ConjugateDump { common } => {
            ("conjugate-dump", common, resolve("conjugate-dump", common)?)
        }
        Command::HaarCheck { common, .. } => ("haar-check", common, resolve("haar-check", common)?),
    };
    match (&cli.command, &mut cfg.experiment) {
        (Command::Classify { basis, dataset, .. }, Experiment::Classify(e)) => {
            if let Some(b) = basis {
                e.basis = *b;
            }
            if let Some(d) = dataset {
                e.dataset = Some(d.clone());
            }
        }
        (
            Command::BpScan {
                trials: Some(t), ..
            },
            Experiment::BpScan(e),
        ) => e.trials = *t,
        (
            Command::HaarCheck {
                qubits,
                depth,
                samples,
                ..
            },
            Experiment::HaarCheck(e),
        ) => {
            e.qubits = qubits.unwrap_or(e.qubits);
            e.depth = depth.unwrap_or(e.depth);
            e.samples = samples.unwrap_or(e.samples);
        }
        _ => {}
    }
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(kind));

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let threads = pool.current_num_threads();
    let result = pool.install(|| run_experiment(&cfg, &out, threads))?;
    println!(
        "{}",
        serde_json::to_string_pretty(&result.summary).unwrap_or_default()
    );
    for f in &result.files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Config(e.to_string());
            eprintln!("{}", err.record());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.record());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
