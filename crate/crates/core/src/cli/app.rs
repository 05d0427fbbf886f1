use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use super::commands::{cmd_eval, cmd_plotdata, cmd_replay, cmd_train, EvalOptions, PlotOptions, ReplayOptions, TrainOptions};
use super::{RunConfig, Selector};
use crate::error::Result;
use crate::ppo::CatchMode;
use crate::rewards::Stage;

#[derive(Debug, Parser)]
#[command(name = "dexcatch", version, about = "Train and evaluate whole-body catching policies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one stage of the curriculum.
    Train {
        /// Run file (TOML) naming the env, PPO and reward configs.
        #[arg(long)]
        config: Option<PathBuf>,
        /// `track` or `catch`, optionally with `:mode`.
        #[arg(long)]
        stage: Option<Selector>,
        /// Catching curriculum: two-stage, one-stage or no-roll.
        #[arg(long)]
        mode: Option<CatchMode>,
        /// Overrides the run file's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Continue from the newest checkpoint in the run directory.
        #[arg(long)]
        resume: bool,
        /// Output root.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Tracking checkpoint to start two-stage catching from.
        #[arg(long)]
        from: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on every object class.
    Eval {
        checkpoint: PathBuf,
        #[arg(long)]
        stage: Option<Stage>,
        /// Base seed of the evaluation seed groups.
        #[arg(long)]
        seed: Option<u64>,
        /// Episodes per object class and seed group.
        #[arg(long)]
        episodes: Option<usize>,
        /// Number of seed groups.
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export per-step trajectories as JSON lines.
    Replay {
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        episodes: usize,
        /// Use mean actions instead of sampling.
        #[arg(long)]
        deterministic: bool,
        #[arg(long, default_value = "replay.jsonl")]
        out: PathBuf,
    },
    /// Reduce a metrics CSV to curve columns.
    Plotdata {
        metrics: PathBuf,
        /// Keep every k-th row plus the last.
        #[arg(long, default_value_t = 1)]
        every: usize,
        #[arg(long, default_value = "curves.csv")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            config,
            stage,
            mode,
            seed,
            resume,
            out,
            from,
        } => {
            let mut run = match &config {
                Some(path) => RunConfig::load(path)?.0,
                None => RunConfig::default(),
            };
            if let Some(s) = stage {
                run.stage = s;
            }
            if let Some(m) = mode {
                run.stage.mode = m;
            }
            if let Some(s) = seed {
                run.seed = s;
            }
            if let Some(o) = out {
                run.out = o;
            }
            let config = run.train_config()?;
            let summary = cmd_train(&TrainOptions {
                run,
                config,
                resume,
                from,
            })?;
            println!(
                "trained {} updates, {} env steps; checkpoint {} (sha256 {})",
                summary.updates,
                summary.env_steps,
                summary.final_checkpoint.display(),
                summary.checkpoint_digest
            );
        }
        Command::Eval {
            checkpoint,
            stage,
            seed,
            episodes,
            seeds,
            out,
        } => {
            let summary = cmd_eval(&EvalOptions {
                checkpoint,
                stage,
                episodes,
                seed,
                seeds,
                out,
            })?;
            print!("{}", summary.table());
        }
        Command::Replay {
            checkpoint,
            seed,
            episodes,
            deterministic,
            out,
        } => {
            let s = cmd_replay(&ReplayOptions {
                checkpoint,
                seed,
                episodes,
                deterministic,
                out,
            })?;
            println!(
                "wrote {} records for {} episodes to {} (touched {}, caught {})",
                s.records,
                s.returns.len(),
                s.path.display(),
                s.touched,
                s.caught
            );
        }
        Command::Plotdata { metrics, every, out } => {
            let s = cmd_plotdata(&PlotOptions {
                metrics,
                every,
                out: out.clone(),
            })?;
            println!("kept {} of {} rows ({} skipped) in {}", s.rows_out, s.rows_in, s.skipped, out.display());
        }
    }
    Ok(())
}

/// Parse arguments, run the command and return the process exit code:
/// 0 on success, 2 for usage or configuration errors, 3 for runtime faults.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
