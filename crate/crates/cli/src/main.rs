//! `vrn`: data generation, training, evaluation and inference.

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::artifacts::Layout;
use crate::config::{ConfigError, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "vrn", version, about = "Variational reasoning network for knowledge-graph question answering")]
struct Cli {
    #[command(flatten)]
    flags: Flags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Flags {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    #[arg(long, global = true, value_parser = clap::value_parser!(u8).range(1..=3))]
    hops: Option<u8>,
    #[arg(long = "label-fraction", global = true, value_name = "F")]
    label_fraction: Option<f64>,
    /// Topic candidates kept at inference; 1 is greedy.
    #[arg(long, global = true, value_name = "K")]
    beam: Option<usize>,
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    /// Run directory (default `run`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the graph and question splits.
    GenData,
    /// Supervised pretraining on the labeled training questions.
    Pretrain,
    /// Joint variational training, pretraining first if needed.
    Train,
    /// Append test metrics for the model and the supervised-embedding baseline.
    Eval,
    /// Answer one question.
    Infer {
        question: String,
        /// Print the reasoning path from topic entity to answer.
        #[arg(long)]
        explain: bool,
    },
    /// List the scope of an entity.
    InspectScope { entity: String },
    /// Run every reference-oracle suite; nonzero exit if any fails.
    OracleCheck,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let f = cli.flags;
    let overrides = Overrides {
        seed: f.seed,
        hops: f.hops.map(usize::from),
        label_fraction: f.label_fraction,
        beam: f.beam,
        workers: f.workers,
        out: f.out,
    };
    let cfg = RunConfig::load(f.config.as_deref())?.resolve(&overrides)?;
    rayon::ThreadPoolBuilder::new().num_threads(cfg.train.workers).build_global()?;
    if let Command::OracleCheck = cli.command {
        return commands::oracle_check(&cfg);
    }
    let layout = Layout::new(cfg.out_dir());
    match cli.command {
        Command::GenData => commands::gen_data(&cfg, &layout),
        Command::Pretrain => commands::pretrain(&cfg, &layout),
        Command::Train => commands::train(&cfg, &layout),
        Command::Eval => commands::eval(&cfg, &layout),
        Command::Infer { question, explain } => commands::infer(&cfg, &layout, &question, explain),
        Command::InspectScope { entity } => commands::inspect_scope(&cfg, &layout, &entity),
        Command::OracleCheck => unreachable!(),
    }
}

/// One JSON object on one line.
fn error_line(kind: &str, key: Option<&str>, message: &str) -> String {
    let mut obj = serde_json::Map::new();
    obj.insert("error".into(), kind.into());
    if let Some(k) = key {
        obj.insert("key".into(), k.into());
    }
    obj.insert("message".into(), message.replace('\n', " ").trim().into());
    serde_json::Value::Object(obj).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.render().to_string();
            let first = text.lines().find_map(|l| l.strip_prefix("error: ")).unwrap_or(text.trim());
            eprintln!("{}", error_line("usage", None, first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(c) = e.downcast_ref::<ConfigError>() {
                eprintln!("{}", error_line("config", c.key.as_deref(), &c.message));
                return ExitCode::from(2);
            }
            let message = format!("{e:#}");
            let kind = match e.downcast_ref::<vrn_core::VrnError>() {
                Some(vrn_core::VrnError::Config(_)) => "config",
                _ => "runtime",
            };
            eprintln!("{}", error_line(kind, None, &message));
            ExitCode::from(if kind == "config" { 2 } else { 1 })
        }
    }
}
