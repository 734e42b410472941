//! `asmt`: train, run, score and tune a phrase-based translation system.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "asmt", version, about = "Phrase-based statistical machine translation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train LM, alignments and phrase table; writes artifacts and a run config.
    Train { config: PathBuf },
    /// Translate standard input line by line.
    Translate { config: PathBuf },
    /// Corpus BLEU of a hypothesis file against a reference file.
    Score { hyp: PathBuf, reference: PathBuf },
    /// Grid-search decoder weights on a dev set; writes `<config>.tuned.ini`.
    Tune {
        config: PathBuf,
        dev_src: PathBuf,
        dev_ref: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config } => commands::cmd_train(&config),
        Command::Translate { config } => {
            let stdin = std::io::stdin().lock();
            let stdout = std::io::BufWriter::new(std::io::stdout().lock());
            commands::cmd_translate(&config, stdin, stdout)
        }
        Command::Score { hyp, reference } => {
            println!("{}", commands::cmd_score(&hyp, &reference)?);
            Ok(())
        }
        Command::Tune {
            config,
            dev_src,
            dev_ref,
        } => commands::cmd_tune(&config, &dev_src, &dev_ref).map(|_| ()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
