use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use brisket::config::RunConfig;
use brisket::reward::RewardKind;
use brisket::workflow::Workflow;

/// Train and evaluate diverse fighting-game agents.
#[derive(Parser)]
#[command(name = "brisket", version)]
struct Cli {
    /// Run configuration (JSON). Full-scale defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; artifacts go to OUT/RUN_ID.
    #[arg(long, global = true, env = "BRISKET_OUT")]
    out: Option<PathBuf>,

    /// Override the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    /// Suppress per-episode progress on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train K policies with the discriminator reward.
    TrainDiversity,
    /// Fine-tune policies on the win/loss reward.
    Finetune {
        /// Input checkpoints; defaults to the diversity stage's final policies.
        #[arg(long = "policy")]
        policies: Vec<PathBuf>,
    },
    /// Train fresh policies on the hand-written rewards.
    TrainBaseline {
        /// aggressive, balanced or counter; all three when omitted.
        #[arg(long = "kind")]
        kinds: Vec<RewardKind>,
    },
    /// Action-diversity matrix over random states.
    EvalDiversity {
        /// Checkpoints to compare; defaults to fine-tuned plus baseline policies.
        #[arg(long = "policy")]
        policies: Vec<PathBuf>,
    },
    /// Side-swapped round robin.
    Tournament {
        #[arg(long = "policy")]
        policies: Vec<PathBuf>,
        #[arg(long)]
        matches_per_pair: Option<u32>,
        #[arg(long)]
        rounds_per_match: Option<u32>,
    },
    /// Write a JSON-lines trace of one match between two checkpoints.
    Replay {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        /// Rounds to play; the config's rounds_per_match by default.
        #[arg(long)]
        rounds: Option<u32>,
        /// Trace file; OUT/RUN_ID/reports/replay.jsonl by default.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print a complete config to stdout.
    PrintConfig {
        /// The small desk-scale preset instead of full scale.
        #[arg(long)]
        desk: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let validation = err.chain().any(|e| e.downcast_ref::<brisket::Error>().is_some_and(|e| e.is_validation()));
            ExitCode::from(if validation { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Command::PrintConfig { desk } = cli.command {
        let cfg = if desk { RunConfig::desk() } else { RunConfig::default() };
        return emit(&cfg.to_json());
    }

    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Command::Tournament { matches_per_pair, rounds_per_match, .. } = &cli.command {
        if let Some(m) = matches_per_pair {
            cfg.evaluation.matches_per_pair = *m;
        }
        if let Some(r) = rounds_per_match {
            cfg.evaluation.rounds_per_match = *r;
        }
    }
    let out = cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("runs"));

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.max(1))
        .build()
        .context("building the worker pool")?;
    let mut workflow = Workflow::new(cfg, &out)?;
    if !cli.quiet {
        workflow = workflow.with_progress(|line| eprintln!("{line}"));
    }
    pool.install(|| dispatch(&workflow, cli.command))
}

fn dispatch(wf: &Workflow, command: Command) -> Result<()> {
    let root = wf.layout().root().to_path_buf();
    match command {
        Command::TrainDiversity => {
            let run = wf.train_diversity()?;
            let last = run.metrics.last().expect("at least one episode");
            emit(&format!(
                "trained {} policies over {} episodes; final val acc {:.3}, test acc {:.3}",
                run.policies.len(),
                run.metrics.len(),
                last.val_acc,
                last.test_acc
            ))?;
        }
        Command::Finetune { policies } => {
            let inputs = or_default(policies, wf.diversity_outputs());
            for outcome in wf.finetune(&inputs)? {
                let best = &outcome.checkpoints[outcome.best_episode];
                emit(&format!("{}: best episode {} (mean eval reward {:.1})", outcome.best.id, best.episode, best.mean_eval_reward))?;
            }
        }
        Command::TrainBaseline { kinds } => {
            let kinds = if kinds.is_empty() { RewardKind::BASELINES.to_vec() } else { kinds };
            for outcome in wf.train_baselines(&kinds)? {
                let best = &outcome.checkpoints[outcome.best_episode];
                emit(&format!("{}: best episode {} (mean eval reward {:.1})", outcome.best.id, best.episode, best.mean_eval_reward))?;
            }
        }
        Command::EvalDiversity { policies } => {
            let report = wf.eval_diversity(&or_default(policies, evaluated(wf)))?;
            emit(report.to_csv().trim_end())?;
        }
        Command::Tournament { policies, .. } => {
            let report = wf.tournament(&or_default(policies, evaluated(wf)))?;
            emit(report.to_csv().trim_end())?;
        }
        Command::Replay { left, right, rounds, output } => {
            let rounds = rounds.unwrap_or(wf.config().evaluation.rounds_per_match);
            let output = output.unwrap_or_else(|| root.join("reports").join("replay.jsonl"));
            let lines = wf.replay(&left, &right, rounds, &output)?;
            emit(&format!("wrote {lines} decisions to {}", output.display()))?;
        }
        Command::PrintConfig { .. } => unreachable!("handled before loading a config"),
    }
    emit(&format!("artifacts in {}", root.display()))
}

/// Writes a line to stdout. A closed pipe (`| head`) is not an error.
fn emit(line: &str) -> Result<()> {
    match writeln!(std::io::stdout().lock(), "{line}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => other.context("writing to stdout"),
    }
}

fn or_default(given: Vec<PathBuf>, default: Vec<PathBuf>) -> Vec<PathBuf> {
    if given.is_empty() {
        default
    } else {
        given
    }
}

fn evaluated(wf: &Workflow) -> Vec<PathBuf> {
    let mut paths = wf.finetune_outputs();
    paths.extend(wf.baseline_outputs());
    paths
}
