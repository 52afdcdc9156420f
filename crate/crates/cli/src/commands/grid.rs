use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{Context, Result, bail};
use clap::Args;
use serde_json::Value;

use lexcl_core::frames::read_instances;
use lexcl_core::grid::{
    EncoderSource, FrameDevBcf, GridPoint, GridSpec, PipelineContext, ReportStore,
    WicDevMacro, cache_dir, render_report_table, run_grid, screen_layer_pairs,
};
use lexcl_core::lexicon::{FilterPolicy, filter_dataset, parse_lexicon, read_wic_pairs};

use super::reader;

#[derive(Args)]
pub struct GridArgs {
    /// JSON config; see the fields of `GridConfigFile`.
    #[arg(long)]
    pub config: PathBuf,
    /// Report store path; defaults to `<cache-dir>/grid-store.jsonl`.
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Pre-screen step-1/step-2 layer pairs and grid only the best N.
    #[arg(long)]
    pub screen_layers: Option<usize>,
}

/// On-disk grid description.
#[derive(serde::Deserialize)]
struct GridConfigFile {
    /// `wic-dev-macro` or `frame-dev-bcf`.
    pipeline: String,
    /// Encoder spec string.
    encoder: String,
    /// Lexicon path (pre-filter records); filtered with the default policy.
    lexicon: Option<PathBuf>,
    /// Frame instances for the frame pipeline.
    instances: Option<PathBuf>,
    grid: BTreeMap<String, Vec<Value>>,
    #[serde(default = "default_n_runs")]
    n_runs: usize,
    #[serde(default)]
    base_seed: u64,
    #[serde(default)]
    split_ratios: Option<[f64; 3]>,
    #[serde(default)]
    wic_pairs_per_set: Option<usize>,
    #[serde(default)]
    threshold_step: Option<f64>,
    /// Extra labeled dev pair sets: `[ { "pairs": ..., "labels": ... } ]`.
    #[serde(default)]
    extra_dev_pairs: Vec<PairFiles>,
}

#[derive(serde::Deserialize)]
struct PairFiles {
    pairs: PathBuf,
    labels: PathBuf,
}

fn default_n_runs() -> usize {
    5
}

pub fn run(args: GridArgs) -> Result<()> {
    let config: GridConfigFile = serde_json::from_reader(reader(&args.config)?)
        .with_context(|| format!("parsing {}", args.config.display()))?;

    let mut ctx = PipelineContext::new(EncoderSource::parse(&config.encoder)?);
    if let Some(path) = &config.lexicon {
        let (ds, _) = parse_lexicon(reader(path)?)?;
        ctx.lexicon = Some(filter_dataset(&ds, &FilterPolicy::default()));
    }
    if let Some(path) = &config.instances {
        ctx.instances = Some(read_instances(reader(path)?)?);
    }
    if let Some([a, b, c]) = config.split_ratios {
        ctx.split_ratios = (a, b, c);
    }
    if let Some(n) = config.wic_pairs_per_set {
        ctx.wic_pairs_per_set = n;
    }
    if let Some(step) = config.threshold_step {
        ctx.threshold_step = step;
    }
    for files in &config.extra_dev_pairs {
        let (pairs, has_labels) =
            read_wic_pairs(reader(&files.pairs)?, Some(reader(&files.labels)?))?;
        if !has_labels {
            bail!("extra dev pair set {} has no labels", files.pairs.display());
        }
        ctx.extra_dev_pairs.push(pairs);
    }

    let mut grid = config.grid.clone();
    if let Some(keep) = args.screen_layers {
        let base = GridPoint(
            grid.iter()
                .filter_map(|(k, v)| v.first().map(|v| (k.clone(), v.clone())))
                .collect(),
        );
        let pairs = screen_layer_pairs(&ctx, &base, keep, config.base_seed)?;
        println!("screened layer pairs: {pairs:?}");
        grid.insert("layers".to_string(), pairs.into_iter().map(Value::String).collect());
        grid.remove("layer1");
        grid.remove("layer2");
    }
    let spec = GridSpec { params: grid, n_runs: config.n_runs, base_seed: config.base_seed };

    let store_path = match &args.store {
        Some(p) => p.clone(),
        None => {
            let dir = cache_dir();
            std::fs::create_dir_all(&dir)?;
            dir.join("grid-store.jsonl")
        }
    };
    let mut store = ReportStore::open(&store_path)?;

    let reports = match config.pipeline.as_str() {
        "wic-dev-macro" => {
            let pipeline = WicDevMacro(&ctx);
            run_grid(&spec, &pipeline, &mut store)?
        }
        "frame-dev-bcf" => {
            let pipeline = FrameDevBcf(&ctx);
            run_grid(&spec, &pipeline, &mut store)?
        }
        other => bail!("unknown pipeline '{other}' (expected wic-dev-macro or frame-dev-bcf)"),
    };
    print!("{}", render_report_table(&reports, &config.pipeline));
    println!("store: {}", store_path.display());
    Ok(())
}
