use std::path::PathBuf;

use anyhow::Result;
use clap::Args;

use lexcl_core::dump::{read_dump_file, write_dump_file, write_sidecar};
use lexcl_core::encoder::{Encoder, encode_corpus};
use lexcl_core::grid::EncoderSource;
use lexcl_core::lexicon::parse_lexicon;
use lexcl_core::postprocess::{
    fit_projection, project, read_projection_file, write_projection_file,
};

use super::{reader, writer};

#[derive(Args)]
pub struct EncodeArgs {
    #[arg(long)]
    pub lexicon: PathBuf,
    #[arg(long, default_value = "toy:")]
    pub encoder: String,
    /// Layer to extract; defaults to the last hidden layer.
    #[arg(long)]
    pub layer: Option<usize>,
    #[arg(long)]
    pub masked: bool,
    /// Output dump path; the sidecar lands at `<out>.sidecar.jsonl`.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn encode(args: EncodeArgs) -> Result<()> {
    let (ds, _) = parse_lexicon(reader(&args.lexicon)?)?;
    let enc = EncoderSource::parse(&args.encoder)?.build()?;
    let layer = args.layer.unwrap_or(enc.layer_count());
    let out = encode_corpus(&enc, ds.examples(), layer, args.masked)?;
    write_dump_file(&args.out, out.dim, &out.rows)?;
    let sidecar_path = args.out.with_extension("sidecar.jsonl");
    write_sidecar(&mut writer(&sidecar_path)?, &out.sidecar)?;
    println!(
        "encoded {} rows at layer {layer} (masked={}); {} alignment failures",
        out.rows.len(),
        args.masked,
        out.n_failed
    );
    Ok(())
}

#[derive(Args)]
pub struct PcaFitArgs {
    /// Input embedding dump.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub components: usize,
    #[arg(long)]
    pub whiten: bool,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn pca_fit(args: PcaFitArgs) -> Result<()> {
    let dump = read_dump_file(&args.input)?;
    let rows: Vec<Vec<f64>> =
        (0..dump.len()).filter_map(|i| dump.valid_row(i)).map(|r| r.to_vec()).collect();
    let proj = fit_projection(&rows, args.components, args.whiten)?;
    write_projection_file(&args.out, &proj)?;
    println!(
        "fit projection {} -> {} (whiten={}) on {} rows",
        proj.input_dim(),
        proj.n_components(),
        proj.whiten,
        rows.len()
    );
    Ok(())
}

#[derive(Args)]
pub struct PcaApplyArgs {
    #[arg(long)]
    pub proj: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn pca_apply(args: PcaApplyArgs) -> Result<()> {
    let proj = read_projection_file(&args.proj)?;
    let dump = read_dump_file(&args.input)?;
    // Sentinel rows stay sentinels so row numbering survives projection.
    let mut rows = Vec::with_capacity(dump.len());
    for i in 0..dump.len() {
        rows.push(match dump.valid_row(i) {
            Some(r) => project(&proj, r)?,
            None => vec![f64::NAN; proj.n_components()],
        });
    }
    write_dump_file(&args.out, proj.n_components(), &rows)?;
    println!("projected {} rows to {} dims", rows.len(), proj.n_components());
    Ok(())
}
