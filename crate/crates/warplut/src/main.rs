use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use warplut::commands::{cmd_eval, cmd_export, cmd_inspect, cmd_train, TrainOptions};
use warplut::netlist_io::NetlistFormat;
use warplut::selftest::{format_table, run_selftest, SelftestOptions};
use warplut::CliError;
use warplut_core::train::EvalMode;
use warplut_core::RelaxMode;

#[derive(Parser)]
#[command(name = "warplut", version, about = "Train, evaluate and export Walsh-relaxed LUT networks")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TrainMode {
    Deterministic,
    Gumbel,
    Ste,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalArg {
    Relaxed,
    Discrete,
}

#[derive(Subcommand)]
enum Command {
    /// Train from a run config.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        mode: Option<TrainMode>,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Accuracy of a checkpoint.
    Eval {
        checkpoint: PathBuf,
        /// Run config naming the dataset; defaults to the one recorded in
        /// the checkpoint.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "discrete")]
        mode: EvalArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Harden a checkpoint into a netlist.
    Export {
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: NetlistFormat,
        #[arg(long)]
        fold_identities: bool,
        /// Output file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize a checkpoint or an architecture document.
    Inspect { path: PathBuf },
    /// Run the embedded invariant suite.
    Selftest {
        #[arg(long, hide = true)]
        corrupt_catalog: bool,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    match cli.command {
        Command::Train { config, seed, mode, out } => {
            let mode = mode.map(|m| match m {
                TrainMode::Deterministic => RelaxMode::Deterministic,
                TrainMode::Gumbel => RelaxMode::GumbelSigmoid,
                TrainMode::Ste => RelaxMode::StraightThrough,
            });
            let report = cmd_train(&TrainOptions { config, seed, mode, out })?;
            if let Some(r) = report.records.last() {
                println!(
                    "step {} loss {:.4} relaxed {:.4} discrete {:.4} gap {:+.4}",
                    r.step, r.train_loss, r.val_acc_relaxed, r.val_acc_discrete, r.discretization_gap
                );
            }
            println!("outputs in {}", report.output_dir.display());
        }
        Command::Eval { checkpoint, config, mode, out } => {
            let mode = match mode {
                EvalArg::Relaxed => EvalMode::Relaxed,
                EvalArg::Discrete => EvalMode::Discrete,
            };
            let report = cmd_eval(&checkpoint, config.as_deref(), mode, out.as_deref())?;
            println!("accuracy {:.4} on {} examples", report.accuracy, report.examples);
            println!("{}", serde_json::to_string(&report).expect("serializable"));
        }
        Command::Export {
            checkpoint,
            format,
            fold_identities,
            out,
        } => {
            let r = cmd_export(&checkpoint, format, fold_identities, &out)?;
            println!(
                "{}: {} nodes, depth {}, identity fraction {:.3}, {} identities folded",
                r.path.display(),
                r.stats.total_nodes,
                r.stats.depth,
                r.stats.identity_fraction,
                r.folded
            );
        }
        Command::Inspect { path } => {
            println!("{}", serde_json::to_string_pretty(&cmd_inspect(&path)?).expect("serializable"));
        }
        Command::Selftest { corrupt_catalog } => {
            let checks = run_selftest(&SelftestOptions { corrupt_catalog });
            print!("{}", format_table(&checks));
            if checks.iter().any(|c| !c.passed) {
                return Err(CliError::Runtime("selftest failed".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
