use std::path::PathBuf;

use anyhow::{Result, bail};
use clap::Args;

use lexcl_core::dump::read_dump_file;
use lexcl_core::frames::{
    DumpEmbedder, EncoderEmbedder, FrameConfig, InductionOutcome, Step1Algo, induce,
    read_assignments, read_instances, write_assignments,
};
use lexcl_core::grid::EncoderSource;
use lexcl_core::metrics::{LabeledPartition, bcubed_scores, purity_scores};
use lexcl_core::postprocess::read_projection_file;

use super::{reader, writer};

#[derive(Args)]
pub struct FrameInductArgs {
    /// Instance records (line-delimited).
    #[arg(long)]
    pub instances: PathBuf,
    /// Encoder spec; omit when embedding from dumps.
    #[arg(long)]
    pub encoder: Option<String>,
    /// Embedding dumps as LAYER:word=PATH or LAYER:mask=PATH, repeatable.
    #[arg(long = "dump")]
    pub dumps: Vec<String>,
    #[arg(long)]
    pub proj: Option<PathBuf>,
    #[arg(long)]
    pub layer1: usize,
    #[arg(long)]
    pub layer2: usize,
    #[arg(long, default_value_t = 0.0)]
    pub alpha1: f64,
    #[arg(long, default_value_t = 0.0)]
    pub alpha2: f64,
    /// xmeans or group-average.
    #[arg(long, default_value = "xmeans")]
    pub step1: String,
    #[arg(long, default_value_t = 1)]
    pub kmin: usize,
    #[arg(long, default_value_t = 15)]
    pub kmax: usize,
    #[arg(long)]
    pub term_threshold: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Assignment output (instance_id, plu_id, frame_id records).
    #[arg(long)]
    pub out: PathBuf,
}

pub fn induct(args: FrameInductArgs) -> Result<()> {
    let instances = read_instances(reader(&args.instances)?)?;
    let proj = args.proj.as_deref().map(read_projection_file).transpose()?;
    let cfg = FrameConfig {
        layer1: args.layer1,
        layer2: args.layer2,
        alpha1: args.alpha1,
        alpha2: args.alpha2,
        step1_algo: Step1Algo::parse(&args.step1)?,
        kmin: args.kmin,
        kmax: args.kmax,
        termination_threshold: args.term_threshold,
        use_projection: proj.is_some(),
        seed: args.seed,
    };
    let outcome: InductionOutcome = match (&args.encoder, args.dumps.is_empty()) {
        (Some(spec), true) => {
            let enc = EncoderSource::parse(spec)?.build()?;
            induce(&EncoderEmbedder(&enc), proj.as_ref(), &instances, &cfg)?
        }
        (None, false) => {
            let mut loaded = Vec::new();
            for spec in &args.dumps {
                let (key, path) = spec
                    .split_once('=')
                    .ok_or_else(|| anyhow::anyhow!("bad --dump '{spec}', want LAYER:KIND=PATH"))?;
                let (layer, kind) = key
                    .split_once(':')
                    .ok_or_else(|| anyhow::anyhow!("bad --dump key '{key}'"))?;
                let masked = match kind {
                    "word" => false,
                    "mask" => true,
                    other => bail!("dump kind must be word or mask, got '{other}'"),
                };
                loaded.push(((layer.parse()?, masked), read_dump_file(&PathBuf::from(path))?));
            }
            induce(&DumpEmbedder::new(loaded), proj.as_ref(), &instances, &cfg)?
        }
        _ => bail!("provide either --encoder or at least one --dump"),
    };
    write_assignments(&mut writer(&args.out)?, &outcome.assignments)?;
    println!(
        "{} instances -> {} pseudo-LUs -> {} frames ({} excluded)",
        outcome.assignments.len(),
        outcome.n_pseudo_lus(),
        outcome.n_frames(),
        outcome.step1.excluded.len()
    );
    Ok(())
}

#[derive(Args)]
pub struct MetricsArgs {
    /// Assignment records from frame-induct.
    #[arg(long)]
    pub assignments: PathBuf,
    /// Instance records carrying gold_lu and gold_frame.
    #[arg(long)]
    pub gold: PathBuf,
    /// Comma-separated subset of purity,bcubed.
    #[arg(long, default_value = "purity,bcubed")]
    pub which: String,
}

pub fn metrics(args: MetricsArgs) -> Result<()> {
    let assignments = read_assignments(reader(&args.assignments)?)?;
    let instances = read_instances(reader(&args.gold)?)?;
    let wanted: Vec<&str> = args.which.split(',').map(str::trim).collect();
    for w in &wanted {
        if !["purity", "bcubed"].contains(w) {
            bail!("unknown metric '{w}'");
        }
    }
    for level in ["step1", "step2"] {
        let part = LabeledPartition::from_labels(assignments.iter().map(|a| {
            let inst = &instances[a.instance_id];
            if level == "step1" {
                (a.plu_id, inst.gold_lu.as_str())
            } else {
                (a.frame_id, inst.gold_frame.as_str())
            }
        }));
        if wanted.contains(&"purity") {
            let s = purity_scores(&part)?;
            println!(
                "{level} purity={:.4} inverse_purity={:.4} pif={:.4}",
                s.purity, s.inverse_purity, s.pif
            );
        }
        if wanted.contains(&"bcubed") {
            let b = bcubed_scores(&part)?;
            println!(
                "{level} bcubed_precision={:.4} bcubed_recall={:.4} bcubed_f={:.4}",
                b.precision, b.recall, b.f_score
            );
        }
    }
    Ok(())
}
