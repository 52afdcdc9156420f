//! `lexcl`: lexicon ingestion, contrastive fine-tuning, embedding dumps, PCA,
//! word-in-context evaluation, frame induction, and hyperparameter grids.

mod commands;

use anyhow::Result;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "lexcl", version, about = "Token-level embedding toolkit", long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with planted senses and frames.
    Synth(commands::lexicon::SynthArgs),
    /// Parse and validate a lexicon file, reporting rejected records.
    Ingest(commands::lexicon::IngestArgs),
    /// Apply the lemma-level exclusion rules.
    Filter(commands::lexicon::FilterArgs),
    /// Split a lexicon into lemma-disjoint train/dev/test files.
    Split(commands::lexicon::SplitArgs),
    /// Build a balanced word-in-context pair set from a lexicon.
    WicPairs(commands::lexicon::WicPairsArgs),
    /// Print corpus statistics.
    Stats(commands::lexicon::StatsArgs),
    /// Fine-tune an encoder on a lexicon with the contrastive loss.
    Train(commands::train::TrainArgs),
    /// Encode a lexicon into an embedding dump plus sidecar.
    Encode(commands::encode::EncodeArgs),
    /// Fit a PCA projection on an embedding dump.
    PcaFit(commands::encode::PcaFitArgs),
    /// Apply a stored projection to an embedding dump.
    PcaApply(commands::encode::PcaApplyArgs),
    /// Score word-in-context pairs by target-token cosine.
    WicScore(commands::wic::WicScoreArgs),
    /// Tune the decision threshold on scored pairs.
    WicTune(commands::wic::WicTuneArgs),
    /// Evaluate scored pairs under a fixed threshold.
    WicEval(commands::wic::WicEvalArgs),
    /// McNemar significance test between two prediction files.
    WicMcnemar(commands::wic::WicMcnemarArgs),
    /// Two-step frame induction over instance records.
    FrameInduct(commands::frames::FrameInductArgs),
    /// Purity and B-cubed scores for an assignment file against gold labels.
    Metrics(commands::frames::MetricsArgs),
    /// Run a hyperparameter grid described by a config file.
    Grid(commands::grid::GridArgs),
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Synth(args) => commands::lexicon::synth(args),
        Command::Ingest(args) => commands::lexicon::ingest(args),
        Command::Filter(args) => commands::lexicon::filter(args),
        Command::Split(args) => commands::lexicon::split(args),
        Command::WicPairs(args) => commands::lexicon::wic_pairs(args),
        Command::Stats(args) => commands::lexicon::stats(args),
        Command::Train(args) => commands::train::train(args),
        Command::Encode(args) => commands::encode::encode(args),
        Command::PcaFit(args) => commands::encode::pca_fit(args),
        Command::PcaApply(args) => commands::encode::pca_apply(args),
        Command::WicScore(args) => commands::wic::score(args),
        Command::WicTune(args) => commands::wic::tune(args),
        Command::WicEval(args) => commands::wic::eval(args),
        Command::WicMcnemar(args) => commands::wic::mcnemar(args),
        Command::FrameInduct(args) => commands::frames::induct(args),
        Command::Metrics(args) => commands::frames::metrics(args),
        Command::Grid(args) => commands::grid::run(args),
    }
}
