use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::PathBuf;

use anyhow::{Context, Result, bail};
use clap::Args;

use lexcl_core::frames::write_instances;
use lexcl_core::lexicon::{
    FilterPolicy, build_wic_pairs, dataset_stats, filter_dataset, normalize_whitespace,
    parse_lexicon, remove_sentences, split_by_lemma, write_lexicon, write_wic_pairs,
};
use lexcl_core::synth::{SynthConfig, generate};

use super::{reader, writer};

#[derive(Args)]
pub struct SynthArgs {
    /// Lexicon output path (line-delimited records).
    #[arg(long)]
    pub lexicon: PathBuf,
    /// Frame-instance output path.
    #[arg(long)]
    pub instances: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub lemmas: usize,
    #[arg(long, default_value_t = 10)]
    pub frames: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let corpus = generate(&SynthConfig {
        n_lemmas: args.lemmas,
        n_frames: args.frames,
        seed: args.seed,
        ..SynthConfig::default()
    });
    write_lexicon(&mut writer(&args.lexicon)?, &corpus.dataset)?;
    if let Some(path) = &args.instances {
        write_instances(&mut writer(path)?, &corpus.instances)?;
    }
    let stats = dataset_stats(&corpus.dataset);
    println!(
        "wrote {} examples ({} lemmas, {} senses) to {}",
        stats.n_examples,
        stats.n_lemmas,
        stats.n_senses,
        args.lexicon.display()
    );
    Ok(())
}

#[derive(Args)]
pub struct IngestArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Where to write the rejection report (JSON); printed when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

pub fn ingest(args: IngestArgs) -> Result<()> {
    let (ds, report) = parse_lexicon(reader(&args.input)?)?;
    write_lexicon(&mut writer(&args.out)?, &ds)?;
    let summary = serde_json::to_string_pretty(&report)?;
    match &args.report {
        Some(path) => {
            writer(path)?.write_all(summary.as_bytes())?;
        }
        None => println!("{summary}"),
    }
    println!("accepted {} records, rejected {}", report.accepted, report.rejected.len());
    Ok(())
}

#[derive(Args)]
pub struct FilterArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub min_senses: usize,
    #[arg(long, default_value_t = 10)]
    pub max_senses: usize,
    /// Keep lemmas that have one sense with one example.
    #[arg(long)]
    pub keep_single_single: bool,
    /// Keep multiword lemmas.
    #[arg(long)]
    pub keep_multiword: bool,
    /// Keep only examples with this POS tag.
    #[arg(long)]
    pub pos: Option<String>,
    /// Drop examples whose sentence appears in this file (one sentence per
    /// line, or tab-separated pair rows whose 4th/5th columns are sentences).
    #[arg(long)]
    pub exclude: Option<PathBuf>,
}

pub fn filter(args: FilterArgs) -> Result<()> {
    let (ds, _) = parse_lexicon(reader(&args.input)?)?;
    let policy = FilterPolicy {
        sense_range: Some((args.min_senses, args.max_senses)),
        drop_single_sense_single_example: !args.keep_single_single,
        drop_multiword: !args.keep_multiword,
        pos: args.pos.clone(),
    };
    let mut filtered = filter_dataset(&ds, &policy);
    if let Some(path) = &args.exclude {
        let mut excluded = HashSet::new();
        for line in reader(path)?.lines() {
            let line = line?;
            if line.contains('\t') {
                let cols: Vec<&str> = line.split('\t').collect();
                for c in cols.iter().skip(3).take(2) {
                    excluded.insert(normalize_whitespace(c));
                }
            } else if !line.trim().is_empty() {
                excluded.insert(normalize_whitespace(&line));
            }
        }
        let before = filtered.len();
        filtered = remove_sentences(&filtered, &excluded);
        println!("excluded {} leaked examples", before - filtered.len());
    }
    write_lexicon(&mut writer(&args.out)?, &filtered)?;
    println!(
        "kept {} examples over {} lemmas (from {})",
        filtered.len(),
        filtered.n_lemmas(),
        ds.len()
    );
    Ok(())
}

#[derive(Args)]
pub struct SplitArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Comma-separated train,dev,test fractions.
    #[arg(long, default_value = "0.9,0.05,0.05")]
    pub ratios: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving train.jsonl, dev.jsonl, test.jsonl.
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn split(args: SplitArgs) -> Result<()> {
    let (ds, _) = parse_lexicon(reader(&args.input)?)?;
    let parts: Vec<f64> = args
        .ratios
        .split(',')
        .map(|p| p.trim().parse::<f64>().context("parsing ratios"))
        .collect::<Result<_>>()?;
    if parts.len() != 3 {
        bail!("--ratios needs exactly three comma-separated numbers");
    }
    let bundle = split_by_lemma(&ds, (parts[0], parts[1], parts[2]), args.seed)?;
    std::fs::create_dir_all(&args.out_dir)?;
    for (name, part) in
        [("train", &bundle.train), ("dev", &bundle.dev), ("test", &bundle.test)]
    {
        write_lexicon(&mut writer(&args.out_dir.join(format!("{name}.jsonl")))?, part)?;
        println!("{name}: {} examples, {} lemmas", part.len(), part.n_lemmas());
    }
    Ok(())
}

#[derive(Args)]
pub struct WicPairsArgs {
    /// Lexicon input; pairs are labeled by sense equality.
    #[arg(long = "in", conflicts_with = "from_instances")]
    pub input: Option<PathBuf>,
    /// Frame-instance input; pairs are labeled by frame equality.
    #[arg(long)]
    pub from_instances: Option<PathBuf>,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output stem; writes `<out>.pairs` and `<out>.gold`.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn wic_pairs(args: WicPairsArgs) -> Result<()> {
    let ds = match (&args.input, &args.from_instances) {
        (Some(path), None) => parse_lexicon(reader(path)?)?.0,
        (None, Some(path)) => {
            let instances = lexcl_core::frames::read_instances(reader(path)?)?;
            lexcl_core::frames::pair_dataset(&instances)?
        }
        _ => bail!("provide either --in or --from-instances"),
    };
    let set = build_wic_pairs(&ds, args.n, args.seed)?;
    let pairs_path = args.out.with_extension("pairs");
    let gold_path = args.out.with_extension("gold");
    write_wic_pairs(&mut writer(&pairs_path)?, &mut writer(&gold_path)?, &set.pairs)?;
    if set.exhausted {
        eprintln!("warning: candidates exhausted, produced {} of {}", set.pairs.len(), args.n);
    }
    println!("wrote {} pairs to {}", set.pairs.len(), pairs_path.display());
    Ok(())
}

#[derive(Args)]
pub struct StatsArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
}

pub fn stats(args: StatsArgs) -> Result<()> {
    let (ds, _) = parse_lexicon(reader(&args.input)?)?;
    let s = dataset_stats(&ds);
    println!("{}", serde_json::to_string_pretty(&s)?);
    Ok(())
}
