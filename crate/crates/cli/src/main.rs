//! `kws` — two-stage keyword spotting from the command line.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod common;
mod decode;
mod error;
mod eval;
mod merge;
mod perturb;
mod spot;
mod synth;

use error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "kws", version, about = "Two-stage keyword spotting over phoneme posteriorgrams")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Seed for every random draw of the command.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Phoneme inventory file, one symbol per line, blank first.
    #[arg(long, global = true)]
    pub inventory: Option<PathBuf>,
    /// Pronunciation lexicon (`word<TAB>PHONES`).
    #[arg(long, global = true)]
    pub lexicon: Option<PathBuf>,
    /// Directory for outputs and the run manifest.
    #[arg(long, global = true, default_value = "kws-out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Detect keywords in posteriorgrams.
    Spot(spot::SpotArgs),
    /// Score trials: AUROC, EER, recall at false-alarm rates, DET curve.
    Eval(eval::EvalArgs),
    /// Generate synthetic positive and negative utterances for a keyword.
    Synth(synth::SynthArgs),
    /// Greedy CTC decoding, with phoneme error rate against references.
    Decode(decode::DecodeArgs),
    /// Blend posteriors with the uniform distribution or jitter detection timestamps.
    Perturb(perturb::PerturbArgs),
    /// Fold low-rank adapters into a weight file.
    MergeLora(merge::MergeLoraArgs),
}

fn run(cli: Cli) -> CliResult<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Spot(a) => spot::run(g, a),
        Command::Eval(a) => eval::run(g, a),
        Command::Synth(a) => synth::run(g, a),
        Command::Decode(a) => decode::run(g, a),
        Command::Perturb(a) => perturb::run(g, a),
        Command::MergeLora(a) => merge::run(g, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kws: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
