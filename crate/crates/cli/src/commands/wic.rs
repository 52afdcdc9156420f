use std::io::BufRead;
use std::path::{Path, PathBuf};

use anyhow::{Result, bail};
use clap::Args;

use lexcl_core::dump::read_dump_file;
use lexcl_core::encoder::Encoder;
use lexcl_core::grid::EncoderSource;
use lexcl_core::lexicon::read_wic_pairs;
use lexcl_core::postprocess::read_projection_file;
use lexcl_core::wic::{
    ScoreOutcome, evaluate_accuracy, labeled_scores, mcnemar_test, read_scored, score_pairs,
    score_pairs_from_dumps, tune_threshold, write_scored,
};

use super::{reader, writer};

#[derive(Args)]
pub struct WicScoreArgs {
    /// Pair file (tab-separated rows).
    #[arg(long)]
    pub pairs: PathBuf,
    /// Parallel label file (T/F lines); labels ride along into the output.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Encoder spec; omit when scoring from dumps.
    #[arg(long)]
    pub encoder: Option<String>,
    /// Embedding dumps for pair sides 1 and 2 (rows parallel the pair file).
    #[arg(long)]
    pub emb1: Option<PathBuf>,
    #[arg(long)]
    pub emb2: Option<PathBuf>,
    /// Optional stored projection applied before cosine (encoder path only;
    /// dumps are expected to be projected already).
    #[arg(long)]
    pub proj: Option<PathBuf>,
    /// Layer to extract; defaults to the last hidden layer.
    #[arg(long)]
    pub layer: Option<usize>,
    /// Scored output (line-delimited records).
    #[arg(long)]
    pub out: PathBuf,
}

pub fn score(args: WicScoreArgs) -> Result<()> {
    let labels = args.labels.as_deref().map(reader).transpose()?;
    let (pairs, _) = read_wic_pairs(reader(&args.pairs)?, labels)?;
    let outcome: ScoreOutcome = match (&args.encoder, &args.emb1, &args.emb2) {
        (Some(spec), None, None) => {
            let enc = EncoderSource::parse(spec)?.build()?;
            let proj = args.proj.as_deref().map(read_projection_file).transpose()?;
            let layer = args.layer.unwrap_or(enc.layer_count());
            score_pairs(&enc, proj.as_ref(), &pairs, layer)?
        }
        (None, Some(e1), Some(e2)) => {
            let side1 = read_dump_file(e1)?;
            let side2 = read_dump_file(e2)?;
            score_pairs_from_dumps(&side1, &side2, &pairs)?
        }
        _ => bail!("provide either --encoder or both --emb1 and --emb2"),
    };
    write_scored(&mut writer(&args.out)?, &outcome.scored)?;
    println!("scored {} pairs ({} excluded)", outcome.scored.len(), outcome.excluded.len());
    for (idx, reason) in outcome.excluded.iter().take(5) {
        eprintln!("  excluded pair {idx}: {reason}");
    }
    Ok(())
}

#[derive(Args)]
pub struct WicTuneArgs {
    /// Scored pairs with labels.
    #[arg(long)]
    pub scored: PathBuf,
    #[arg(long, default_value_t = 0.02)]
    pub step: f64,
}

pub fn tune(args: WicTuneArgs) -> Result<()> {
    let scored = read_scored(reader(&args.scored)?)?;
    let labeled = labeled_scores(&scored)?;
    let tm = tune_threshold(&labeled, args.step)?;
    println!("{}", serde_json::to_string(&tm)?);
    Ok(())
}

#[derive(Args)]
pub struct WicEvalArgs {
    #[arg(long)]
    pub scored: PathBuf,
    #[arg(long)]
    pub threshold: f64,
}

pub fn eval(args: WicEvalArgs) -> Result<()> {
    let scored = read_scored(reader(&args.scored)?)?;
    let labeled = labeled_scores(&scored)?;
    let report = evaluate_accuracy(&labeled, args.threshold)?;
    println!("{}", serde_json::to_string(&report)?);
    println!();
    println!("pairs      {:>6}   accuracy {:.4}", report.n, report.accuracy);
    println!(
        "positives  {:>6}   accuracy {:.4}",
        report.true_positive + report.false_negative,
        report.positive_accuracy
    );
    println!(
        "negatives  {:>6}   accuracy {:.4}",
        report.true_negative + report.false_positive,
        report.negative_accuracy
    );
    println!(
        "confusion  tp={} fp={} tn={} fn={}",
        report.true_positive, report.false_positive, report.true_negative, report.false_negative
    );
    Ok(())
}

#[derive(Args)]
pub struct WicMcnemarArgs {
    /// Prediction files with T/F lines.
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
}

fn read_bools(path: &Path) -> Result<Vec<bool>> {
    let mut out = Vec::new();
    for line in reader(path)?.lines() {
        match line?.trim() {
            "" => continue,
            "T" => out.push(true),
            "F" => out.push(false),
            other => bail!("expected T or F, got '{other}'"),
        }
    }
    Ok(out)
}

pub fn mcnemar(args: WicMcnemarArgs) -> Result<()> {
    let a = read_bools(&args.a)?;
    let b = read_bools(&args.b)?;
    let gold = read_bools(&args.gold)?;
    let out = mcnemar_test(&a, &b, &gold)?;
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}
