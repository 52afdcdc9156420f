//! Two-step semantic frame induction over verb occurrences.
//!
//! Step 1 clusters the occurrences of each lemma separately into
//! pseudo-lexical units; step 2 re-embeds the occurrences (possibly at a
//! different layer and with a different masked-embedding weight), averages
//! them within each pseudo-LU, and clusters the centroids across lemmas with
//! group-average agglomerative clustering to form frames.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::clustering::{ClusteringResult, agglomerative_cluster, xmeans_cluster};
use crate::dump::EmbeddingDump;
use crate::encoder::{Encoder, blend_masked, embed_span};
use crate::error::{Error, Result};
use crate::hashing::derive_seed;
use crate::lexicon::Span;
use crate::postprocess::{Projection, project};
use crate::vecmath::mean_of;

/// One occurrence to cluster, with its gold lexical unit and frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameInstance {
    pub lemma: String,
    pub sentence: String,
    pub target_span: Span,
    pub gold_lu: String,
    pub gold_frame: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceRecord {
    lemma: String,
    sentence: String,
    target_start: usize,
    target_end: usize,
    gold_lu: String,
    gold_frame: String,
}

pub fn read_instances<R: BufRead>(r: R) -> Result<Vec<FrameInstance>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: InstanceRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
        if rec.gold_lu.is_empty() || rec.gold_frame.is_empty() {
            return Err(Error::Parse { line: i + 1, message: "empty gold label".into() });
        }
        out.push(FrameInstance {
            lemma: rec.lemma,
            sentence: rec.sentence,
            target_span: Span::new(rec.target_start, rec.target_end),
            gold_lu: rec.gold_lu,
            gold_frame: rec.gold_frame,
        });
    }
    Ok(out)
}

pub fn write_instances<W: Write>(w: &mut W, instances: &[FrameInstance]) -> Result<()> {
    for inst in instances {
        let rec = InstanceRecord {
            lemma: inst.lemma.clone(),
            sentence: inst.sentence.clone(),
            target_start: inst.target_span.start,
            target_end: inst.target_span.end,
            gold_lu: inst.gold_lu.clone(),
            gold_frame: inst.gold_frame.clone(),
        };
        serde_json::to_writer(&mut *w, &rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Re-key instances so the standard pair builder samples frame-labeled
/// pairs: the gold frame takes the place of the sense id, making positives
/// same-frame and negatives different-frame occurrences of one lemma.
/// Duplicate `(lemma, sentence, span)` triples are dropped.
pub fn pair_dataset(instances: &[FrameInstance]) -> Result<crate::lexicon::LexiconDataset> {
    let mut seen = std::collections::HashSet::new();
    let mut examples = Vec::with_capacity(instances.len());
    for inst in instances {
        if !seen.insert((inst.lemma.as_str(), inst.sentence.as_str(), inst.target_span)) {
            continue;
        }
        examples.push(crate::lexicon::SenseExample::new(
            &inst.lemma,
            "V",
            &inst.gold_frame,
            &inst.sentence,
            inst.target_span,
        )?);
    }
    crate::lexicon::LexiconDataset::from_examples(examples)
}

/// First-step clustering algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Step1Algo {
    #[default]
    XMeans,
    GroupAverage,
}

impl Step1Algo {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "xmeans" => Ok(Step1Algo::XMeans),
            "group-average" => Ok(Step1Algo::GroupAverage),
            other => Err(Error::Argument(format!(
                "unknown step-1 algorithm '{other}' (expected xmeans or group-average)"
            ))),
        }
    }
}

/// Hyperparameters of the two-step pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameConfig {
    /// Encoder layer for step 1.
    pub layer1: usize,
    /// Encoder layer for step 2.
    pub layer2: usize,
    /// Masked-embedding weight at step 1.
    pub alpha1: f64,
    /// Masked-embedding weight at step 2.
    pub alpha2: f64,
    pub step1_algo: Step1Algo,
    pub kmin: usize,
    pub kmax: usize,
    /// Group-average linkage distance above which merging stops.
    pub termination_threshold: f64,
    pub use_projection: bool,
    pub seed: u64,
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig {
            layer1: 0,
            layer2: 0,
            alpha1: 0.0,
            alpha2: 0.0,
            step1_algo: Step1Algo::XMeans,
            kmin: 1,
            kmax: 15,
            termination_threshold: 0.5,
            use_projection: false,
            seed: 0,
        }
    }
}

impl FrameConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kmin < 1 || self.kmin > self.kmax {
            return Err(Error::Argument("need 1 <= kmin <= kmax".into()));
        }
        for (name, a) in [("alpha1", self.alpha1), ("alpha2", self.alpha2)] {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::Argument(format!("{name} must lie in [0, 1], got {a}")));
            }
        }
        Ok(())
    }
}

/// Source of per-instance embeddings: a live encoder or pre-computed dumps.
pub trait InstanceEmbedder {
    fn embed(
        &self,
        index: usize,
        inst: &FrameInstance,
        layer: usize,
        masked: bool,
    ) -> Result<Vec<f64>>;
}

/// Embeds through an encoder; the instance index is ignored.
pub struct EncoderEmbedder<'a, E: Encoder + ?Sized>(pub &'a E);

impl<E: Encoder + ?Sized> InstanceEmbedder for EncoderEmbedder<'_, E> {
    fn embed(
        &self,
        _index: usize,
        inst: &FrameInstance,
        layer: usize,
        masked: bool,
    ) -> Result<Vec<f64>> {
        embed_span(self.0, &inst.sentence, inst.target_span, layer, masked)
    }
}

/// Serves rows of embedding dumps keyed by `(layer, masked)`; row order must
/// parallel the instance list.
pub struct DumpEmbedder {
    dumps: HashMap<(usize, bool), EmbeddingDump>,
}

impl DumpEmbedder {
    pub fn new(dumps: impl IntoIterator<Item = ((usize, bool), EmbeddingDump)>) -> Self {
        DumpEmbedder { dumps: dumps.into_iter().collect() }
    }
}

impl InstanceEmbedder for DumpEmbedder {
    fn embed(
        &self,
        index: usize,
        _inst: &FrameInstance,
        layer: usize,
        masked: bool,
    ) -> Result<Vec<f64>> {
        let dump = self.dumps.get(&(layer, masked)).ok_or_else(|| {
            Error::Argument(format!("no embedding dump for layer {layer}, masked {masked}"))
        })?;
        match dump.valid_row(index) {
            Some(row) => Ok(row.to_vec()),
            None if index < dump.len() => {
                Err(Error::Alignment(format!("row {index} is a sentinel")))
            }
            None => Err(Error::Argument(format!(
                "dump for layer {layer} has {} rows, need row {index}",
                dump.len()
            ))),
        }
    }
}

fn blended_embedding(
    embedder: &(impl InstanceEmbedder + ?Sized),
    proj: Option<&Projection>,
    index: usize,
    inst: &FrameInstance,
    layer: usize,
    alpha: f64,
) -> Result<Vec<f64>> {
    let v = if alpha == 0.0 {
        embedder.embed(index, inst, layer, false)?
    } else if alpha == 1.0 {
        embedder.embed(index, inst, layer, true)?
    } else {
        let word = embedder.embed(index, inst, layer, false)?;
        let mask = embedder.embed(index, inst, layer, true)?;
        blend_masked(&word, &mask, alpha)?
    };
    match proj {
        Some(p) => project(p, &v),
        None => Ok(v),
    }
}

/// A step-1 cluster: same-lemma occurrences represented by their centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLu {
    pub lemma: String,
    /// Instance indices belonging to this pseudo-LU.
    pub members: Vec<usize>,
    /// Mean of the members' step-1 embeddings.
    pub centroid: Vec<f64>,
}

/// Output of the per-lemma clustering step.
#[derive(Debug, Clone)]
pub struct Step1Result {
    pub pseudo_lus: Vec<PseudoLu>,
    /// Instance index -> pseudo-LU id, for instances that embedded cleanly.
    pub assignment: HashMap<usize, usize>,
    /// `(instance index, error)` for instances excluded from clustering.
    pub excluded: Vec<(usize, String)>,
    /// Per-lemma clustering results, keyed by lemma.
    pub per_lemma: BTreeMap<String, ClusteringResult>,
}

/// Cluster each lemma's occurrences into pseudo-lexical units.
pub fn induce_step1(
    embedder: &(impl InstanceEmbedder + ?Sized),
    proj: Option<&Projection>,
    instances: &[FrameInstance],
    cfg: &FrameConfig,
) -> Result<Step1Result> {
    cfg.validate()?;
    let proj = if cfg.use_projection { proj } else { None };
    let mut by_lemma: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, inst) in instances.iter().enumerate() {
        by_lemma.entry(inst.lemma.as_str()).or_default().push(i);
    }

    let mut result = Step1Result {
        pseudo_lus: Vec::new(),
        assignment: HashMap::new(),
        excluded: Vec::new(),
        per_lemma: BTreeMap::new(),
    };
    for (lemma, indices) in by_lemma {
        let mut embedded = Vec::new();
        let mut kept = Vec::new();
        for &i in &indices {
            match blended_embedding(embedder, proj, i, &instances[i], cfg.layer1, cfg.alpha1) {
                Ok(v) => {
                    embedded.push(v);
                    kept.push(i);
                }
                Err(e) => result.excluded.push((i, e.to_string())),
            }
        }
        if kept.is_empty() {
            continue;
        }
        let clustering = match cfg.step1_algo {
            Step1Algo::XMeans => {
                let lemma_seed = derive_seed(cfg.seed, &format!("step1:{lemma}"));
                xmeans_cluster(&embedded, cfg.kmin, cfg.kmax, lemma_seed)
            }
            Step1Algo::GroupAverage => agglomerative_cluster(&embedded, cfg.termination_threshold),
        };
        for (cluster, members) in clustering.members().iter().enumerate() {
            let plu_id = result.pseudo_lus.len();
            let member_instances: Vec<usize> = members.iter().map(|&m| kept[m]).collect();
            for &i in &member_instances {
                result.assignment.insert(i, plu_id);
            }
            result.pseudo_lus.push(PseudoLu {
                lemma: lemma.to_string(),
                members: member_instances,
                centroid: clustering.centroids[cluster].clone(),
            });
        }
        result.per_lemma.insert(lemma.to_string(), clustering);
    }
    Ok(result)
}

/// Frames over pseudo-LUs.
#[derive(Debug, Clone)]
pub struct Step2Result {
    /// Pseudo-LU id -> frame id.
    pub frame_of_plu: Vec<usize>,
    pub n_frames: usize,
    /// Step-2 centroids of the pseudo-LUs, in pseudo-LU order.
    pub plu_centroids: Vec<Vec<f64>>,
}

/// Re-embed instances at the step-2 layer, average within each pseudo-LU, and
/// cluster the centroids into frames.
pub fn induce_step2(
    embedder: &(impl InstanceEmbedder + ?Sized),
    proj: Option<&Projection>,
    step1: &Step1Result,
    instances: &[FrameInstance],
    cfg: &FrameConfig,
) -> Result<Step2Result> {
    cfg.validate()?;
    let proj = if cfg.use_projection { proj } else { None };
    if step1.pseudo_lus.is_empty() {
        return Err(Error::Argument("step 2 needs at least one pseudo-LU".into()));
    }
    let mut plu_centroids = Vec::with_capacity(step1.pseudo_lus.len());
    for plu in &step1.pseudo_lus {
        let mut vectors = Vec::with_capacity(plu.members.len());
        for &i in &plu.members {
            vectors.push(blended_embedding(
                embedder,
                proj,
                i,
                &instances[i],
                cfg.layer2,
                cfg.alpha2,
            )?);
        }
        plu_centroids.push(mean_of(&vectors, &(0..vectors.len()).collect::<Vec<_>>()));
    }
    let clustering = agglomerative_cluster(&plu_centroids, cfg.termination_threshold);
    Ok(Step2Result {
        frame_of_plu: clustering.assignment,
        n_frames: clustering.n_clusters,
        plu_centroids,
    })
}

/// One line of the assignment file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AssignmentRecord {
    pub instance_id: usize,
    pub plu_id: usize,
    pub frame_id: usize,
}

/// Full two-step outcome.
#[derive(Debug, Clone)]
pub struct InductionOutcome {
    pub step1: Step1Result,
    pub step2: Step2Result,
    pub assignments: Vec<AssignmentRecord>,
}

impl InductionOutcome {
    pub fn n_pseudo_lus(&self) -> usize {
        self.step1.pseudo_lus.len()
    }

    pub fn n_frames(&self) -> usize {
        self.step2.n_frames
    }

    /// `(system plu, system frame, gold lu, gold frame)` rows for scoring.
    pub fn labeled_rows<'a>(
        &'a self,
        instances: &'a [FrameInstance],
    ) -> Vec<(usize, usize, &'a str, &'a str)> {
        self.assignments
            .iter()
            .map(|a| {
                let inst = &instances[a.instance_id];
                (a.plu_id, a.frame_id, inst.gold_lu.as_str(), inst.gold_frame.as_str())
            })
            .collect()
    }
}

/// Run both steps and collect per-instance assignments.
pub fn induce(
    embedder: &(impl InstanceEmbedder + ?Sized),
    proj: Option<&Projection>,
    instances: &[FrameInstance],
    cfg: &FrameConfig,
) -> Result<InductionOutcome> {
    let step1 = induce_step1(embedder, proj, instances, cfg)?;
    let step2 = induce_step2(embedder, proj, &step1, instances, cfg)?;
    let mut assignments = Vec::with_capacity(step1.assignment.len());
    let mut indices: Vec<usize> = step1.assignment.keys().copied().collect();
    indices.sort_unstable();
    for i in indices {
        let plu_id = step1.assignment[&i];
        assignments.push(AssignmentRecord {
            instance_id: i,
            plu_id,
            frame_id: step2.frame_of_plu[plu_id],
        });
    }
    Ok(InductionOutcome { step1, step2, assignments })
}

pub fn write_assignments<W: Write>(w: &mut W, records: &[AssignmentRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut *w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_assignments<R: BufRead>(r: R) -> Result<Vec<AssignmentRecord>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?,
        );
    }
    Ok(out)
}
