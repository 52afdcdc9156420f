//! Hyperparameter grids, seeded multi-run execution, and report tables.
//!
//! A grid is a map from parameter name to candidate values; every combination
//! runs `n_runs` times with seeds `base_seed .. base_seed + n_runs`, and the
//! per-run criterion values are aggregated into mean and population standard
//! deviation. Completed `(config, seed)` cells are recorded in a line-
//! delimited store and never re-run, so interrupted grids resume where they
//! stopped.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::encoder::{Encoder, encode_corpus};
use crate::error::{Error, Result};
use crate::frames::{EncoderEmbedder, FrameConfig, FrameInstance, Step1Algo, induce};
use crate::hashing::fnv1a64;
use crate::lexicon::{LexiconDataset, WiCPair, split_by_lemma};
use crate::metrics::{LabeledPartition, bcubed_scores, purity_scores};
use crate::postprocess::{Projection, fit_projection};
use crate::toy::ToyEncoder;
use crate::trainer::{Similarity, TrainConfig, train};
use crate::wic::{labeled_scores, score_pairs, tune_threshold};

/// Directory for stores and checkpoints; `LEXCL_CACHE_DIR` overrides the
/// default `.lexcl-cache`.
pub fn cache_dir() -> PathBuf {
    std::env::var_os("LEXCL_CACHE_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(".lexcl-cache"))
}

/// Parameter name -> candidate values, plus the run-repetition policy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub params: BTreeMap<String, Vec<Value>>,
    pub n_runs: usize,
    pub base_seed: u64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_runs < 1 {
            return Err(Error::Argument("n_runs must be at least 1".into()));
        }
        for (name, values) in &self.params {
            if values.is_empty() {
                return Err(Error::Argument(format!("parameter '{name}' has no values")));
            }
        }
        Ok(())
    }

    /// Cartesian product of the parameter values, in deterministic order.
    pub fn combinations(&self) -> Vec<GridPoint> {
        let mut out = vec![BTreeMap::new()];
        for (name, values) in &self.params {
            let mut next = Vec::with_capacity(out.len() * values.len());
            for base in &out {
                for v in values {
                    let mut point = base.clone();
                    point.insert(name.clone(), v.clone());
                    next.push(point);
                }
            }
            out = next;
        }
        out.into_iter().map(GridPoint).collect()
    }
}

/// One assignment of grid parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint(pub BTreeMap<String, Value>);

impl GridPoint {
    pub fn get_f64(&self, name: &str) -> Option<f64> {
        self.0.get(name).and_then(Value::as_f64)
    }

    pub fn get_usize(&self, name: &str) -> Option<usize> {
        let v = self.0.get(name)?;
        v.as_u64().map(|x| x as usize).or_else(|| {
            // Accept integral floats like 100.0 from hand-written configs.
            v.as_f64().filter(|f| f.fract() == 0.0 && *f >= 0.0).map(|f| f as usize)
        })
    }

    pub fn get_bool(&self, name: &str) -> Option<bool> {
        self.0.get(name).and_then(Value::as_bool)
    }

    pub fn get_str(&self, name: &str) -> Option<&str> {
        self.0.get(name).and_then(Value::as_str)
    }

    /// Stable hash of the canonical JSON form (BTreeMap keeps keys sorted).
    pub fn config_hash(&self) -> u64 {
        fnv1a64(serde_json::to_string(&self.0).expect("grid point serializes").as_bytes())
    }
}

/// What one pipeline run produced: the selection criterion plus any extra
/// named metrics worth a report column.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PipelineOutput {
    pub criterion: f64,
    #[serde(default)]
    pub components: BTreeMap<String, f64>,
}

/// A named evaluation pipeline.
pub trait Pipeline {
    fn name(&self) -> &str;
    fn run(&self, point: &GridPoint, seed: u64) -> Result<PipelineOutput>;
}

/// One persisted `(config, seed)` cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoredRun {
    pub config_hash: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PipelineOutput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Append-only store of completed runs, keyed by `(config_hash, seed)`.
#[derive(Debug, Default)]
pub struct ReportStore {
    path: Option<PathBuf>,
    completed: HashMap<(u64, u64), StoredRun>,
}

impl ReportStore {
    pub fn in_memory() -> Self {
        ReportStore::default()
    }

    /// Open (or create) a file-backed store, loading existing cells.
    pub fn open(path: &Path) -> Result<Self> {
        let mut store = ReportStore { path: Some(path.to_path_buf()), completed: HashMap::new() };
        if path.exists() {
            for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let run: StoredRun = serde_json::from_str(&line)
                    .map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
                store.completed.insert((run.config_hash, run.seed), run);
            }
        }
        Ok(store)
    }

    pub fn get(&self, config_hash: u64, seed: u64) -> Option<&StoredRun> {
        self.completed.get(&(config_hash, seed))
    }

    pub fn len(&self) -> usize {
        self.completed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.completed.is_empty()
    }

    fn record(&mut self, run: StoredRun) -> Result<()> {
        if let Some(path) = &self.path {
            let mut f = OpenOptions::new().create(true).append(true).open(path)?;
            serde_json::to_writer(&mut f, &run)?;
            f.write_all(b"\n")?;
        }
        self.completed.insert((run.config_hash, run.seed), run);
        Ok(())
    }
}

/// Aggregated outcome of one grid combination.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub config: GridPoint,
    pub config_hash: u64,
    pub runs: Vec<StoredRun>,
    /// Mean criterion over successful runs; NaN when every run failed.
    pub mean: f64,
    /// Population standard deviation over successful runs.
    pub std: f64,
    pub n_failed: usize,
    /// Per-component means over successful runs.
    pub component_means: BTreeMap<String, f64>,
    pub component_stds: BTreeMap<String, f64>,
}

/// Arithmetic mean and population standard deviation.
pub fn aggregate_runs(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Argument("aggregate_runs needs at least one value".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

/// Execute the grid: every combination, `n_runs` seeds each, skipping cells
/// the store already holds. A failing run marks its cell failed and the grid
/// continues. Reports come back sorted by mean criterion descending (failed
/// configs last), ties broken by config hash.
pub fn run_grid(
    spec: &GridSpec,
    pipeline: &dyn Pipeline,
    store: &mut ReportStore,
) -> Result<Vec<RunReport>> {
    spec.validate()?;
    let mut reports = Vec::new();
    for point in spec.combinations() {
        let hash = point.config_hash();
        let mut runs = Vec::with_capacity(spec.n_runs);
        for i in 0..spec.n_runs {
            let seed = spec.base_seed + i as u64;
            if let Some(done) = store.get(hash, seed) {
                runs.push(done.clone());
                continue;
            }
            let run = match pipeline.run(&point, seed) {
                Ok(output) => {
                    StoredRun { config_hash: hash, seed, output: Some(output), error: None }
                }
                Err(e) => {
                    StoredRun { config_hash: hash, seed, output: None, error: Some(e.to_string()) }
                }
            };
            store.record(run.clone())?;
            runs.push(run);
        }
        let ok: Vec<&PipelineOutput> = runs.iter().filter_map(|r| r.output.as_ref()).collect();
        let n_failed = runs.len() - ok.len();
        let (mean, std) = if ok.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            aggregate_runs(&ok.iter().map(|o| o.criterion).collect::<Vec<_>>())?
        };
        let mut component_means = BTreeMap::new();
        let mut component_stds = BTreeMap::new();
        if !ok.is_empty() {
            let mut names: Vec<&String> = ok.iter().flat_map(|o| o.components.keys()).collect();
            names.sort();
            names.dedup();
            for name in names {
                let values: Vec<f64> =
                    ok.iter().filter_map(|o| o.components.get(name).copied()).collect();
                let (m, s) = aggregate_runs(&values)?;
                component_means.insert(name.clone(), m);
                component_stds.insert(name.clone(), s);
            }
        }
        reports.push(RunReport {
            config: point,
            config_hash: hash,
            runs,
            mean,
            std,
            n_failed,
            component_means,
            component_stds,
        });
    }
    reports.sort_by(|a, b| {
        // Descending mean; all-failed (NaN) configs sink to the bottom.
        b.mean
            .partial_cmp(&a.mean)
            .unwrap_or_else(|| a.mean.is_nan().cmp(&b.mean.is_nan()))
            .then(a.config_hash.cmp(&b.config_hash))
    });
    Ok(reports)
}

fn format_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn format_mean_std(mean: f64, std: f64) -> String {
    if mean.is_nan() { "failed".to_string() } else { format!("{mean:.4}(\u{b1}{std:.4})") }
}

/// Render reports as a fixed-width table: one column per grid parameter, the
/// criterion as `mean(±std)`, then any component metrics.
pub fn render_report_table(reports: &[RunReport], criterion_label: &str) -> String {
    if reports.is_empty() {
        return String::from("(no reports)\n");
    }
    let mut param_names: Vec<&String> = reports.iter().flat_map(|r| r.config.0.keys()).collect();
    param_names.sort();
    param_names.dedup();
    let mut component_names: Vec<&String> =
        reports.iter().flat_map(|r| r.component_means.keys()).collect();
    component_names.sort();
    component_names.dedup();

    let mut header: Vec<String> = param_names.iter().map(|s| s.to_string()).collect();
    header.push(criterion_label.to_string());
    header.extend(component_names.iter().map(|s| s.to_string()));

    let mut rows: Vec<Vec<String>> = vec![header];
    for r in reports {
        let mut row: Vec<String> = param_names
            .iter()
            .map(|name| r.config.0.get(*name).map(format_value).unwrap_or_default())
            .collect();
        row.push(format_mean_std(r.mean, r.std));
        for name in &component_names {
            row.push(match r.component_means.get(*name) {
                Some(&m) => format_mean_std(m, r.component_stds[*name]),
                None => String::new(),
            });
        }
        rows.push(row);
    }

    let n_cols = rows[0].len();
    let widths: Vec<usize> = (0..n_cols)
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:<width$}", width = w))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            let total: usize = widths.iter().sum::<usize>() + 2 * (n_cols - 1);
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
    }
    out
}

/// How pipelines obtain a fresh encoder for each run.
#[derive(Debug, Clone)]
pub enum EncoderSource {
    Toy { dim: usize, layers: usize, seed: u64 },
    Checkpoint(PathBuf),
}

impl EncoderSource {
    /// Parse `toy:dim=D,layers=L,seed=S` or treat the string as a checkpoint
    /// path.
    pub fn parse(spec: &str) -> Result<Self> {
        if let Some(rest) = spec.strip_prefix("toy:") {
            let mut dim = 32usize;
            let mut layers = 4usize;
            let mut seed = 0u64;
            for part in rest.split(',').filter(|p| !p.is_empty()) {
                let (key, value) = part
                    .split_once('=')
                    .ok_or_else(|| Error::Argument(format!("bad encoder spec part '{part}'")))?;
                let parse_err =
                    |v: &str| Error::Argument(format!("bad encoder spec value '{v}'"));
                match key {
                    "dim" => dim = value.parse().map_err(|_| parse_err(value))?,
                    "layers" => layers = value.parse().map_err(|_| parse_err(value))?,
                    "seed" => seed = value.parse().map_err(|_| parse_err(value))?,
                    other => {
                        return Err(Error::Argument(format!("unknown encoder key '{other}'")));
                    }
                }
            }
            Ok(EncoderSource::Toy { dim, layers, seed })
        } else {
            Ok(EncoderSource::Checkpoint(PathBuf::from(spec)))
        }
    }

    pub fn build(&self) -> Result<ToyEncoder> {
        match self {
            EncoderSource::Toy { dim, layers, seed } => Ok(ToyEncoder::new(*dim, *layers, *seed)),
            EncoderSource::Checkpoint(path) => ToyEncoder::load(path),
        }
    }
}

/// Shared inputs for the built-in pipelines.
pub struct PipelineContext {
    pub encoder: EncoderSource,
    /// Filtered lexicon; split per run seed.
    pub lexicon: Option<LexiconDataset>,
    /// Dev instances for frame induction.
    pub instances: Option<Vec<FrameInstance>>,
    pub split_ratios: (f64, f64, f64),
    /// Pairs sampled from the lexicon dev split per run.
    pub wic_pairs_per_set: usize,
    pub threshold_step: f64,
    /// Extra labeled dev pair sets included in the macro average.
    pub extra_dev_pairs: Vec<Vec<WiCPair>>,
}

impl PipelineContext {
    pub fn new(encoder: EncoderSource) -> Self {
        PipelineContext {
            encoder,
            lexicon: None,
            instances: None,
            split_ratios: (0.9, 0.05, 0.05),
            wic_pairs_per_set: 100,
            threshold_step: 0.02,
            extra_dev_pairs: Vec::new(),
        }
    }

    /// Train a fresh encoder when the grid point carries training parameters,
    /// and fit the projection the point asks for.
    fn prepare_encoder(
        &self,
        point: &GridPoint,
        seed: u64,
        train_split: &LexiconDataset,
    ) -> Result<(ToyEncoder, Option<Projection>)> {
        let mut enc = self.encoder.build()?;
        let wants_training =
            point.get_f64("learning_rate").is_some() || point.get_usize("epochs").is_some();
        if wants_training {
            let cfg = TrainConfig {
                learning_rate: point.get_f64("learning_rate").unwrap_or(5e-6),
                epochs: point.get_usize("epochs").unwrap_or(2),
                temperature: point.get_f64("temperature").unwrap_or(0.5),
                batch_cap: point.get_usize("batch_cap").unwrap_or(64),
                seed,
                similarity: match point.get_str("similarity") {
                    Some(s) => Similarity::parse(s)?,
                    None => Similarity::Cosine,
                },
            };
            train(&mut enc, train_split, &cfg)?;
        }
        let proj = match point.get_usize("pca_components") {
            Some(0) | None => None,
            Some(k) => {
                let whiten = point.get_bool("whiten").unwrap_or(false);
                let encoded =
                    encode_corpus(&enc, train_split.examples(), enc.layer_count(), false)?;
                let rows: Vec<Vec<f64>> = encoded
                    .rows
                    .into_iter()
                    .filter(|r| r.iter().all(|x| x.is_finite()))
                    .collect();
                Some(fit_projection(&rows, k, whiten)?)
            }
        };
        Ok((enc, proj))
    }
}

/// Macro-averaged word-in-context dev accuracy.
///
/// Per run: split the lexicon by the run seed, optionally fine-tune on the
/// train split, fit the projection on train-split embeddings, build a dev
/// pair set (plus any extra sets), tune a threshold per set, and average the
/// tuned dev accuracies.
pub struct WicDevMacro<'a>(pub &'a PipelineContext);

impl Pipeline for WicDevMacro<'_> {
    fn name(&self) -> &str {
        "wic-dev-macro"
    }

    fn run(&self, point: &GridPoint, seed: u64) -> Result<PipelineOutput> {
        let ctx = self.0;
        let lexicon = ctx
            .lexicon
            .as_ref()
            .ok_or_else(|| Error::Argument("wic-dev-macro needs a lexicon".into()))?;
        let bundle = split_by_lemma(lexicon, ctx.split_ratios, seed)?;
        let (enc, proj) = ctx.prepare_encoder(point, seed, &bundle.train)?;

        let mut sets: Vec<(String, Vec<WiCPair>)> = Vec::new();
        let dev_pairs =
            crate::lexicon::build_wic_pairs(&bundle.dev, ctx.wic_pairs_per_set, seed)?;
        sets.push(("lexicon-dev".to_string(), dev_pairs.pairs));
        for (i, pairs) in ctx.extra_dev_pairs.iter().enumerate() {
            sets.push((format!("extra-{i}"), pairs.clone()));
        }

        let mut components = BTreeMap::new();
        let mut accs = Vec::new();
        for (name, pairs) in &sets {
            if pairs.is_empty() {
                return Err(Error::Argument(format!("dev pair set '{name}' is empty")));
            }
            let outcome = score_pairs(&enc, proj.as_ref(), pairs, enc.layer_count())?;
            let labeled = labeled_scores(&outcome.scored)?;
            let tm = tune_threshold(&labeled, ctx.threshold_step)?;
            components.insert(format!("acc:{name}"), tm.dev_accuracy);
            components.insert(format!("threshold:{name}"), tm.threshold);
            accs.push(tm.dev_accuracy);
        }
        let criterion = accs.iter().sum::<f64>() / accs.len() as f64;
        Ok(PipelineOutput { criterion, components })
    }
}

/// Step-2 B-cubed F on the frame-induction dev instances.
pub struct FrameDevBcf<'a>(pub &'a PipelineContext);

/// Read `layer1`/`layer2` (or a combined `layers` value like `"3/1"`) plus
/// the remaining frame hyperparameters out of a grid point.
pub fn frame_config_from_point(point: &GridPoint, seed: u64) -> Result<FrameConfig> {
    let mut cfg = FrameConfig { seed, ..FrameConfig::default() };
    if let Some(pair) = point.get_str("layers") {
        let (l1, l2) = pair
            .split_once('/')
            .ok_or_else(|| Error::Argument(format!("bad layers value '{pair}'")))?;
        cfg.layer1 = l1
            .trim()
            .parse()
            .map_err(|_| Error::Argument(format!("bad layer '{l1}'")))?;
        cfg.layer2 = l2
            .trim()
            .parse()
            .map_err(|_| Error::Argument(format!("bad layer '{l2}'")))?;
    }
    if let Some(l) = point.get_usize("layer1") {
        cfg.layer1 = l;
    }
    if let Some(l) = point.get_usize("layer2") {
        cfg.layer2 = l;
    }
    if let Some(a) = point.get_f64("alpha1") {
        cfg.alpha1 = a;
    }
    if let Some(a) = point.get_f64("alpha2") {
        cfg.alpha2 = a;
    }
    if let Some(s) = point.get_str("step1") {
        cfg.step1_algo = Step1Algo::parse(s)?;
    }
    if let Some(k) = point.get_usize("kmin") {
        cfg.kmin = k;
    }
    if let Some(k) = point.get_usize("kmax") {
        cfg.kmax = k;
    }
    if let Some(t) = point.get_f64("termination_threshold") {
        cfg.termination_threshold = t;
    }
    cfg.use_projection = point.get_usize("pca_components").is_some_and(|k| k > 0);
    Ok(cfg)
}

impl Pipeline for FrameDevBcf<'_> {
    fn name(&self) -> &str {
        "frame-dev-bcf"
    }

    fn run(&self, point: &GridPoint, seed: u64) -> Result<PipelineOutput> {
        let ctx = self.0;
        let instances = ctx
            .instances
            .as_ref()
            .ok_or_else(|| Error::Argument("frame-dev-bcf needs instances".into()))?;
        // Training and projection fitting still rely on the lexicon when the
        // grid asks for them; a missing lexicon is fine for plain encoders.
        let (enc, proj) = match &ctx.lexicon {
            Some(lexicon) => {
                let bundle = split_by_lemma(lexicon, ctx.split_ratios, seed)?;
                ctx.prepare_encoder(point, seed, &bundle.train)?
            }
            None => (ctx.encoder.build()?, None),
        };
        let cfg = frame_config_from_point(point, seed)?;
        let outcome = induce(&EncoderEmbedder(&enc), proj.as_ref(), instances, &cfg)?;
        let rows = outcome.labeled_rows(instances);

        let step1 = LabeledPartition::from_labels(rows.iter().map(|r| (r.0, r.2)));
        let step2 = LabeledPartition::from_labels(rows.iter().map(|r| (r.1, r.3)));
        let p1 = purity_scores(&step1)?;
        let b1 = bcubed_scores(&step1)?;
        let p2 = purity_scores(&step2)?;
        let b2 = bcubed_scores(&step2)?;

        let mut components = BTreeMap::new();
        components.insert("n_plu".into(), outcome.n_pseudo_lus() as f64);
        components.insert("n_frames".into(), outcome.n_frames() as f64);
        components.insert("pif1".into(), p1.pif);
        components.insert("bcf1".into(), b1.f_score);
        components.insert("pif".into(), p2.pif);
        components.insert("bcp".into(), b2.precision);
        components.insert("bcr".into(), b2.recall);
        components.insert("bcf".into(), b2.f_score);
        Ok(PipelineOutput { criterion: b2.f_score, components })
    }
}

/// Rank all step-1/step-2 layer pairs with `alpha2 = 0` under the untrained
/// base encoder and keep the best `n_keep` as `"l1/l2"` strings for the grid.
pub fn screen_layer_pairs(
    ctx: &PipelineContext,
    base_point: &GridPoint,
    n_keep: usize,
    seed: u64,
) -> Result<Vec<String>> {
    let enc = ctx.encoder.build()?;
    let layer_max = enc.layer_count();
    let pipeline = FrameDevBcf(ctx);
    let mut ranked = Vec::new();
    for l1 in 0..=layer_max {
        for l2 in 0..=layer_max {
            let mut point = base_point.clone();
            point.0.remove("learning_rate");
            point.0.remove("epochs");
            point.0.insert("layers".into(), Value::String(format!("{l1}/{l2}")));
            point.0.insert("alpha2".into(), Value::from(0.0));
            let output = pipeline.run(&point, seed)?;
            ranked.push((format!("{l1}/{l2}"), output.criterion));
        }
    }
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    Ok(ranked.into_iter().take(n_keep).map(|(pair, _)| pair).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(params: &[(&str, Vec<Value>)], n_runs: usize) -> GridSpec {
        GridSpec {
            params: params.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
            n_runs,
            base_seed: 7,
        }
    }

    struct SeedEcho;

    impl Pipeline for SeedEcho {
        fn name(&self) -> &str {
            "seed-echo"
        }

        fn run(&self, point: &GridPoint, seed: u64) -> Result<PipelineOutput> {
            let x = point.get_f64("x").unwrap();
            if x < 0.0 {
                return Err(Error::Argument("negative x".into()));
            }
            Ok(PipelineOutput {
                criterion: x + seed as f64,
                components: BTreeMap::from([("twice".to_string(), 2.0 * x)]),
            })
        }
    }

    #[test]
    fn aggregate_runs_examples() {
        assert_eq!(aggregate_runs(&[3.0, 3.0, 3.0]).unwrap(), (3.0, 0.0));
        let (mean, std) = aggregate_runs(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(mean, 3.0);
        assert!((std - 2.0f64.sqrt()).abs() < 1e-12); // population convention
        assert_eq!(aggregate_runs(&[7.0]).unwrap(), (7.0, 0.0));
        assert!(aggregate_runs(&[]).is_err());
    }

    #[test]
    fn cartesian_product_cardinality() {
        let s = spec(&[("a", vec![Value::from(1), Value::from(2)]), ("b", vec![Value::from(true), Value::from(false)])], 1);
        assert_eq!(s.combinations().len(), 4);
        let mut store = ReportStore::in_memory();
        let s = spec(&[("x", vec![Value::from(1.0), Value::from(2.0)])], 1);
        let reports = run_grid(&s, &SeedEcho, &mut store).unwrap();
        assert_eq!(reports.len(), 2);
    }

    #[test]
    fn runs_use_consecutive_seeds_and_aggregate() {
        let mut store = ReportStore::in_memory();
        let s = spec(&[("x", vec![Value::from(10.0)])], 3);
        let reports = run_grid(&s, &SeedEcho, &mut store).unwrap();
        // criterion = 10 + {7, 8, 9} -> mean 18, population std of {17,18,19}.
        assert_eq!(reports[0].mean, 18.0);
        assert!((reports[0].std - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(reports[0].component_means["twice"], 20.0);
    }

    #[test]
    fn failed_runs_are_marked_and_grid_continues() {
        let mut store = ReportStore::in_memory();
        let s = spec(&[("x", vec![Value::from(-1.0), Value::from(5.0)])], 2);
        let reports = run_grid(&s, &SeedEcho, &mut store).unwrap();
        assert_eq!(reports.len(), 2);
        // Sorted: the successful config first, the failed one last.
        assert_eq!(reports[0].n_failed, 0);
        assert_eq!(reports[1].n_failed, 2);
        assert!(reports[1].mean.is_nan());
        assert!(reports[1].runs[0].error.is_some());
    }

    #[test]
    fn store_resumes_without_rerunning() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        static CALLS: AtomicUsize = AtomicUsize::new(0);

        struct Counting;
        impl Pipeline for Counting {
            fn name(&self) -> &str {
                "counting"
            }
            fn run(&self, _point: &GridPoint, seed: u64) -> Result<PipelineOutput> {
                CALLS.fetch_add(1, Ordering::SeqCst);
                Ok(PipelineOutput { criterion: seed as f64, components: BTreeMap::new() })
            }
        }

        let dir = std::env::temp_dir().join(format!("lexcl-store-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("store.jsonl");
        std::fs::remove_file(&path).ok();

        let s = spec(&[("x", vec![Value::from(1.0)])], 3);
        let mut store = ReportStore::open(&path).unwrap();
        run_grid(&s, &Counting, &mut store).unwrap();
        assert_eq!(CALLS.load(Ordering::SeqCst), 3);

        // Fresh store from the same file: nothing re-runs.
        let mut store = ReportStore::open(&path).unwrap();
        assert_eq!(store.len(), 3);
        let reports = run_grid(&s, &Counting, &mut store).unwrap();
        assert_eq!(CALLS.load(Ordering::SeqCst), 3);
        assert_eq!(reports[0].runs.len(), 3);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn identical_seeds_reproduce_identical_values() {
        let corpus = crate::synth::generate(&crate::synth::SynthConfig {
            n_lemmas: 6,
            seed: 5,
            ..Default::default()
        });
        let mut ctx =
            PipelineContext::new(EncoderSource::Toy { dim: 16, layers: 3, seed: 2 });
        ctx.lexicon = Some(corpus.dataset.clone());
        ctx.split_ratios = (0.5, 0.5, 0.0);
        ctx.wic_pairs_per_set = 10;
        let pipeline = WicDevMacro(&ctx);
        let point = GridPoint(BTreeMap::new());
        let a = pipeline.run(&point, 3).unwrap();
        let b = pipeline.run(&point, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn frame_pipeline_produces_all_columns() {
        let corpus = crate::synth::generate(&crate::synth::SynthConfig {
            n_lemmas: 6,
            seed: 9,
            ..Default::default()
        });
        let mut ctx =
            PipelineContext::new(EncoderSource::Toy { dim: 16, layers: 3, seed: 2 });
        ctx.instances = Some(corpus.instances.clone());
        let pipeline = FrameDevBcf(&ctx);
        let point = GridPoint(BTreeMap::from([
            ("layers".to_string(), Value::from("3/1")),
            ("termination_threshold".to_string(), Value::from(0.4)),
        ]));
        let out = pipeline.run(&point, 1).unwrap();
        for key in ["n_plu", "n_frames", "pif1", "bcf1", "pif", "bcf", "bcp", "bcr"] {
            assert!(out.components.contains_key(key), "missing {key}");
        }
        assert!(out.criterion > 0.0 && out.criterion <= 1.0);
    }

    #[test]
    fn table_renders_params_and_metrics() {
        let mut store = ReportStore::in_memory();
        let s = spec(&[("x", vec![Value::from(1.0), Value::from(2.0)])], 2);
        let reports = run_grid(&s, &SeedEcho, &mut store).unwrap();
        let table = render_report_table(&reports, "criterion");
        assert!(table.contains("x"));
        assert!(table.contains("criterion"));
        assert!(table.contains("twice"));
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 4); // header + rule + 2 rows
    }

    #[test]
    fn encoder_spec_parsing() {
        match EncoderSource::parse("toy:dim=8,layers=2,seed=5").unwrap() {
            EncoderSource::Toy { dim, layers, seed } => {
                assert_eq!((dim, layers, seed), (8, 2, 5));
            }
            other => panic!("unexpected {other:?}"),
        }
        match EncoderSource::parse("toy:").unwrap() {
            EncoderSource::Toy { dim, layers, .. } => assert_eq!((dim, layers), (32, 4)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            EncoderSource::parse("some/path.json").unwrap(),
            EncoderSource::Checkpoint(_)
        ));
        assert!(EncoderSource::parse("toy:bogus=1").is_err());
    }

    #[test]
    fn grid_point_accepts_integral_floats() {
        let point = GridPoint(BTreeMap::from([
            ("k".to_string(), Value::from(100.0)),
            ("frac".to_string(), Value::from(0.5)),
            ("n".to_string(), Value::from(7)),
        ]));
        assert_eq!(point.get_usize("k"), Some(100));
        assert_eq!(point.get_usize("n"), Some(7));
        assert_eq!(point.get_usize("frac"), None);
    }

    #[test]
    fn cache_dir_honors_environment() {
        // Can't mutate the environment safely in parallel tests; just check
        // the default shape.
        let d = cache_dir();
        assert!(!d.as_os_str().is_empty());
    }
}
