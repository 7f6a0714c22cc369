use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;
mod formats;

#[derive(Parser)]
#[command(
    name = "distill",
    version,
    about = "Calibration, distillation targets and toy distillation experiments",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Top-N expected calibration error and reliability table.
    Ece {
        /// Predictions, one `{"logits": [...], "label": n}` object per line.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        rank: usize,
        #[arg(long, default_value_t = 15)]
        bins: usize,
        /// `pooled`, or `batch:SIZE` to bin inside consecutive batches.
        #[arg(long, default_value = "pooled")]
        group: String,
        /// Reliability CSV destination.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a post-hoc temperature on validation predictions.
    FitTemp {
        #[arg(long)]
        val: PathBuf,
        #[arg(long, default_value_t = distill_core::temperature::DEFAULT_T_MIN)]
        t_min: f64,
        #[arg(long, default_value_t = distill_core::temperature::DEFAULT_T_MAX)]
        t_max: f64,
        /// Bins for the before/after ECE.
        #[arg(long, default_value_t = 15)]
        bins: usize,
    },
    /// Rank n-best hypotheses by `am/t1 + lm/t2`.
    Combine {
        /// Hypotheses, one `{"utt", "id", "am_logp", "lm_logp"}` object per line.
        #[arg(long)]
        hyps: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        t1: f64,
        #[arg(long, default_value_t = 1.0)]
        t2: f64,
        /// TSV destination; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Expand token-level teacher posteriors to frame-wise targets.
    Targets {
        /// Alignments, `utt<TAB>tok tok ...` per line.
        #[arg(long)]
        align: PathBuf,
        /// Unit inventory of the alignment tokens.
        #[arg(long, default_value = "senone")]
        unit: String,
        /// Teacher ids; repeat once per teacher.
        #[arg(long = "teacher-id", required = true)]
        teacher_ids: Vec<String>,
        /// `identity` or a `source<TAB>target` map file, one per teacher.
        #[arg(long = "map", required = true)]
        maps: Vec<String>,
        /// Posterior file, `utt<TAB>index<TAB>p0 p1 ...`, one per teacher.
        #[arg(long = "posteriors", required = true)]
        posteriors: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one student on the synthetic task.
    Train {
        /// `key=value` run configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Trained model (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep the interpolation weight for LST and multitask students.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Results CSV.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ece {
            input,
            rank,
            bins,
            group,
            out,
        } => commands::ece(&input, rank, bins, &group, out.as_deref()),
        Command::FitTemp {
            val,
            t_min,
            t_max,
            bins,
        } => commands::fit_temp(&val, t_min, t_max, bins),
        Command::Combine { hyps, t1, t2, out } => commands::combine(&hyps, t1, t2, out.as_deref()),
        Command::Targets {
            align,
            unit,
            teacher_ids,
            maps,
            posteriors,
            out,
        } => commands::targets(&align, &unit, &teacher_ids, &maps, &posteriors, &out),
        Command::Train { config, out } => commands::train(config.as_deref(), &out),
        Command::Sweep { config, out } => commands::sweep(config.as_deref(), &out),
    };
    match result {
        Ok(stdout) => {
            print!("{stdout}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
