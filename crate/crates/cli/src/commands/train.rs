use std::path::PathBuf;

use anyhow::Result;
use clap::Args;

use lexcl_core::grid::EncoderSource;
use lexcl_core::lexicon::parse_lexicon;
use lexcl_core::trainer::{Similarity, TrainConfig, train_with_hook};

use super::{reader, writer};

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub lexicon: PathBuf,
    /// Encoder spec: `toy:dim=D,layers=L,seed=S` or a checkpoint path.
    #[arg(long, default_value = "toy:")]
    pub encoder: String,
    #[arg(long, default_value_t = 5e-6)]
    pub lr: f64,
    #[arg(long, default_value_t = 2)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[arg(long, default_value_t = 64)]
    pub cap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// cosine, dot, or neg-euclidean.
    #[arg(long, default_value = "cosine")]
    pub similarity: String,
    /// Output directory for per-epoch checkpoints and the training log.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn train(args: TrainArgs) -> Result<()> {
    let (ds, _) = parse_lexicon(reader(&args.lexicon)?)?;
    let mut enc = EncoderSource::parse(&args.encoder)?.build()?;
    let cfg = TrainConfig {
        learning_rate: args.lr,
        epochs: args.epochs,
        temperature: args.tau,
        batch_cap: args.cap,
        seed: args.seed,
        similarity: Similarity::parse(&args.similarity)?,
    };
    std::fs::create_dir_all(&args.out)?;
    let out = args.out.clone();
    let log = train_with_hook(&mut enc, &ds, &cfg, |epoch, enc| {
        enc.save(&out.join(format!("checkpoint-epoch-{epoch}.json")))
    })?;
    enc.save(&args.out.join("checkpoint-final.json"))?;
    log.write_jsonl(&mut writer(&args.out.join("train.log.jsonl"))?)?;
    println!(
        "trained {} batches x {} epochs ({} lemmas dropped); epoch mean losses: {:?}",
        log.n_batches,
        cfg.epochs,
        log.dropped_batches,
        log.epoch_mean_loss.iter().map(|x| (x * 1e4).round() / 1e4).collect::<Vec<_>>()
    );
    println!("checkpoints and log in {}", args.out.display());
    Ok(())
}
