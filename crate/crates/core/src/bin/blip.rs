//! Command-line front end: deterministic experiment pipelines driven by a
//! single TOML config.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use blip_mri::config::{load_config, ExperimentKind, ValidatedConfig};
use blip_mri::experiment;

#[derive(Parser)]
#[command(
    name = "blip",
    about = "Compressed quantitative MRI: simulate, sample, and reconstruct parameter maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Cap the worker thread count (does not change results).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Single end-to-end run: ground truth, both reconstructions, maps and trace.
    Run(CommonArgs),
    /// Recovery SER over a grid of sequence lengths and undersampling factors.
    Study(CommonArgs),
    /// Chord flatness of the response dictionary across sequence lengths.
    Flatness(CommonArgs),
    /// Build the response dictionary and save it as a binary artifact.
    DictBuild {
        #[command(flatten)]
        common: CommonArgs,
        /// Output file (default <out-dir>/dictionary.dict).
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Generate the configured phantom as a label-map text file.
    PhantomGen {
        #[command(flatten)]
        common: CommonArgs,
        /// Output file (default <out-dir>/phantom.txt).
        #[arg(long)]
        file: Option<PathBuf>,
    },
}

enum AppError {
    Usage(String),
    Runtime(String),
}

fn load(common: &CommonArgs, expect: Option<ExperimentKind>) -> Result<ValidatedConfig, AppError> {
    let mut cfg =
        load_config(&common.config, common.seed).map_err(|e| AppError::Usage(e.to_string()))?;
    if let Some(kind) = expect {
        if cfg.kind != kind {
            return Err(AppError::Usage(format!(
                "config kind does not match this subcommand (expected {kind:?})"
            )));
        }
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn with_thread_cap<T>(
    threads: Option<usize>,
    f: impl FnOnce() -> Result<T, AppError> + Send,
) -> Result<T, AppError>
where
    T: Send,
{
    match threads {
        None => f(),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| AppError::Usage(format!("--threads: {e}")))?;
            pool.install(f)
        }
    }
}

fn runtime(e: blip_mri::Error) -> AppError {
    AppError::Runtime(e.to_string())
}

fn dispatch(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Run(common) => {
            let cfg = load(&common, Some(ExperimentKind::SingleRun))?;
            let out_dir = cfg.out_dir.clone();
            let summary = with_thread_cap(common.threads, || {
                experiment::run_single(&cfg, &out_dir).map_err(runtime)
            })?;
            println!("config_hash {:016x}", summary.config_hash);
            println!("atoms {} (filtered {})", summary.num_atoms, summary.infeasible_filtered);
            println!("ser_blip_db {:.3}", summary.ser_blip_db);
            println!("ser_mrf_db {:.3}", summary.ser_mrf_db);
            println!("iterations {}", summary.blip_iterations);
            println!("outputs written to {}", out_dir.display());
            Ok(())
        }
        Command::Study(common) => {
            let cfg = load(&common, Some(ExperimentKind::ScalingStudy))?;
            let out_dir = cfg.out_dir.clone();
            let report = with_thread_cap(common.threads, || {
                experiment::run_study(&cfg, &out_dir).map_err(runtime)
            })?;
            for (p, transition) in &report.transitions {
                match transition {
                    Some(v) => println!("transition p={p} l_over_p2={v}"),
                    None => println!("transition p={p} none"),
                }
            }
            println!("table written to {}", out_dir.join("study.tsv").display());
            Ok(())
        }
        Command::Flatness(common) => {
            let cfg = load(&common, Some(ExperimentKind::Flatness))?;
            let out_dir = cfg.out_dir.clone();
            let rows = with_thread_cap(common.threads, || {
                experiment::run_flatness(&cfg, &out_dir).map_err(runtime)
            })?;
            for r in &rows {
                println!(
                    "l {} lambda {:.6} lambda_inv_sq_over_l {:.6}",
                    r.l, r.lambda, r.lambda_inv_sq_over_l
                );
            }
            println!("table written to {}", out_dir.join("flatness.tsv").display());
            Ok(())
        }
        Command::DictBuild { common, file } => {
            let cfg = load(&common, None)?;
            let out = file.unwrap_or_else(|| cfg.out_dir.join("dictionary.dict"));
            let dict = with_thread_cap(common.threads, || {
                experiment::run_dict_build(&cfg, &out).map_err(runtime)
            })?;
            println!(
                "dictionary: {} atoms x {} frames ({} nonphysical grid points filtered)",
                dict.num_atoms(),
                dict.seq_len(),
                dict.infeasible_filtered
            );
            println!("written to {}", out.display());
            Ok(())
        }
        Command::PhantomGen { common, file } => {
            let cfg = load(&common, None)?;
            let out = file.unwrap_or_else(|| cfg.out_dir.join("phantom.txt"));
            experiment::run_phantom_gen(&cfg, &out).map_err(runtime)?;
            println!("phantom written to {}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders help/version on stdout with success status.
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(AppError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
