use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use more_core::pipeline::{
    cmd_evaluate, cmd_generate, cmd_prepare, cmd_report, cmd_train_clf, cmd_train_sent, cmd_train_term, CommandOptions,
};

/// Diverse, style-controlled captioning with a mixture of SVD-filtered GRU experts.
#[derive(Parser)]
#[command(name = "more", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the toy workspace (--toy) or fill in missing terms of --data.
    Prepare {
        #[arg(long)]
        toy: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Train the expert term generators on --data.
    TrainTerm(Common),
    /// Train the sentence generator on styled corpora.
    TrainSent(Common),
    /// Train the style classifier on styled corpora.
    TrainClf(Common),
    /// Generate captions for every expert and style.
    Generate(Common),
    /// Score generated captions against the references in --data.
    Evaluate(Common),
    /// Emit the per-expert diversity report.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// Flat key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset in JSON-lines form.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Style corpus, one sentence per line; pair each with a --style.
    #[arg(long)]
    corpus: Vec<PathBuf>,
    #[arg(long)]
    style: Vec<String>,
    /// Restrict to one expert (1-based).
    #[arg(long)]
    expert: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for checkpoints and artifacts.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Captions file (defaults to <out>/captions.jsonl).
    #[arg(long)]
    captions: Option<PathBuf>,
    /// Trained classifier for the CLF column of `evaluate`.
    #[arg(long)]
    clf: Option<PathBuf>,
    /// Term generator checkpoint (defaults to <out>/term.ckpt).
    #[arg(long)]
    term_checkpoint: Option<PathBuf>,
    /// Sentence generator checkpoint (defaults to <out>/sent.ckpt).
    #[arg(long)]
    sent_checkpoint: Option<PathBuf>,
    /// Continue training from the existing checkpoint.
    #[arg(long)]
    resume: bool,
    /// Config override, e.g. --set hidden=64 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn into_options(self, toy: bool) -> CommandOptions {
        CommandOptions {
            config: self.config,
            data: self.data,
            corpora: self.corpus,
            styles: self.style,
            expert: self.expert,
            seed: self.seed,
            out: self.out,
            captions: self.captions,
            clf: self.clf,
            term_checkpoint: self.term_checkpoint,
            sent_checkpoint: self.sent_checkpoint,
            resume: self.resume,
            toy,
            overrides: self.overrides,
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Prepare { toy, common } => cmd_prepare(&common.into_options(toy))?,
        Command::TrainTerm(c) => {
            cmd_train_term(&c.into_options(false))?;
        }
        Command::TrainSent(c) => {
            cmd_train_sent(&c.into_options(false))?;
        }
        Command::TrainClf(c) => {
            let t = cmd_train_clf(&c.into_options(false))?;
            println!(
                "precision\t{:.4}\nrecall\t{:.4}\nfolds\t{}",
                t.cv.precision, t.cv.recall, t.cv.folds
            );
        }
        Command::Generate(c) => {
            let captions = cmd_generate(&c.into_options(false))?;
            println!("{} captions", captions.len());
        }
        Command::Evaluate(c) => {
            let out = c.out.join("evaluation.tsv");
            cmd_evaluate(&c.into_options(false))?;
            print!("{}", std::fs::read_to_string(out)?);
        }
        Command::Report(c) => {
            print!("{}", cmd_report(&c.into_options(false))?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
