//! Per-lemma batches, the multiple-positive contrastive loss, and the
//! fine-tuning loop.
//!
//! Each lemma contributes one batch holding all (capped) examples of that
//! lemma. For an anchor example `j` with same-sense partners `S(j)`, the loss
//! is
//!
//! ```text
//! L = sum over j with S(j) nonempty of
//!       (-1/|S(j)|) * sum over j' in S(j) of
//!         log( exp(s(j,j')/tau) / sum over k != j of exp(s(j,k)/tau) )
//! ```
//!
//! Anchors without a same-sense partner contribute zero. The log-sum-exp is
//! stabilized by max subtraction, and the analytic gradient with respect to
//! every embedding is available for both the update step and finite-difference
//! verification.

use std::collections::HashMap;
use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::TrainableEncoder;
use crate::error::{Error, Result};
use crate::hashing::derive_seed;
use crate::lexicon::LexiconDataset;
use crate::vecmath::{dot, norm};

/// Similarity function applied to target-token embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Similarity {
    #[default]
    Cosine,
    Dot,
    NegEuclidean,
}

impl Similarity {
    pub fn eval(&self, u: &[f64], v: &[f64]) -> f64 {
        match self {
            Similarity::Cosine => dot(u, v) / (norm(u) * norm(v)),
            Similarity::Dot => dot(u, v),
            Similarity::NegEuclidean => -crate::vecmath::squared_distance(u, v).sqrt(),
        }
    }

    /// Partial derivatives of `s(u, v)` with respect to `u` and `v`.
    fn grad(&self, u: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match self {
            Similarity::Cosine => {
                let nu = norm(u);
                let nv = norm(v);
                let c = dot(u, v) / (nu * nv);
                let du = u
                    .iter()
                    .zip(v)
                    .map(|(ui, vi)| vi / (nu * nv) - c * ui / (nu * nu))
                    .collect();
                let dv = u
                    .iter()
                    .zip(v)
                    .map(|(ui, vi)| ui / (nu * nv) - c * vi / (nv * nv))
                    .collect();
                (du, dv)
            }
            Similarity::Dot => (v.to_vec(), u.to_vec()),
            Similarity::NegEuclidean => {
                let d = crate::vecmath::squared_distance(u, v).sqrt();
                if d == 0.0 {
                    (vec![0.0; u.len()], vec![0.0; v.len()])
                } else {
                    let du: Vec<f64> = u.iter().zip(v).map(|(ui, vi)| -(ui - vi) / d).collect();
                    let dv = du.iter().map(|x| -x).collect();
                    (du, dv)
                }
            }
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Similarity::Cosine),
            "dot" => Ok(Similarity::Dot),
            "neg-euclidean" => Ok(Similarity::NegEuclidean),
            other => Err(Error::Argument(format!(
                "unknown similarity '{other}' (expected cosine, dot, or neg-euclidean)"
            ))),
        }
    }
}

impl std::fmt::Display for Similarity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Similarity::Cosine => write!(f, "cosine"),
            Similarity::Dot => write!(f, "dot"),
            Similarity::NegEuclidean => write!(f, "neg-euclidean"),
        }
    }
}

/// Fine-tuning hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub temperature: f64,
    pub batch_cap: usize,
    pub seed: u64,
    pub similarity: Similarity,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 5e-6,
            epochs: 2,
            temperature: 0.5,
            batch_cap: 64,
            seed: 0,
            similarity: Similarity::Cosine,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Argument("epochs must be at least 1".into()));
        }
        if self.batch_cap < 2 {
            return Err(Error::Argument("batch_cap must be at least 2".into()));
        }
        if self.temperature <= 0.0 || self.temperature.is_nan() {
            return Err(Error::Argument("temperature must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Argument("learning_rate must be positive and finite".into()));
        }
        Ok(())
    }
}

/// All (capped) examples of one lemma, trained as a single batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LemmaBatch {
    pub lemma: String,
    /// Positions of the member examples in the source dataset.
    pub example_ids: Vec<usize>,
    /// Sense labels parallel to `example_ids`.
    pub sense_labels: Vec<String>,
}

impl LemmaBatch {
    pub fn len(&self) -> usize {
        self.example_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.example_ids.is_empty()
    }

    /// True when no example has a same-sense partner.
    pub fn is_degenerate(&self) -> bool {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for l in &self.sense_labels {
            *counts.entry(l.as_str()).or_insert(0) += 1;
        }
        counts.values().all(|&c| c < 2)
    }
}

/// Batches plus the count of lemmas dropped for lacking a positive pair.
#[derive(Debug, Clone)]
pub struct BatchPlan {
    pub batches: Vec<LemmaBatch>,
    pub dropped: usize,
}

/// One batch per lemma with at least two usable examples. Lemmas above the
/// cap are subsampled uniformly once per run (seeded per lemma); lemmas whose
/// surviving examples hold no positive pair are dropped and counted.
pub fn build_batches(ds: &LexiconDataset, cap: usize, seed: u64) -> BatchPlan {
    let mut batches = Vec::new();
    let mut dropped = 0;
    for lemma in ds.lemmas() {
        let mut ids = ds.example_ids_of(lemma);
        if ids.len() > cap {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("cap:{lemma}")));
            let picked = rand::seq::index::sample(&mut rng, ids.len(), cap);
            let mut subset: Vec<usize> = picked.iter().map(|i| ids[i]).collect();
            subset.sort_unstable();
            ids = subset;
        }
        if ids.len() < 2 {
            dropped += 1;
            continue;
        }
        let batch = LemmaBatch {
            lemma: lemma.to_string(),
            sense_labels: ids.iter().map(|&i| ds.examples()[i].sense_id.clone()).collect(),
            example_ids: ids,
        };
        if batch.is_degenerate() {
            dropped += 1;
            continue;
        }
        batches.push(batch);
    }
    BatchPlan { batches, dropped }
}

/// Deterministic batch visit order for one epoch.
pub fn epoch_order(n_batches: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n_batches).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("epoch-order:{epoch}")));
    order.shuffle(&mut rng);
    order
}

fn validate_batch(embeddings: &[Vec<f64>], labels: &[usize], tau: f64, sim: Similarity) -> Result<usize> {
    if embeddings.len() < 2 {
        return Err(Error::Argument("batch_loss needs at least two embeddings".into()));
    }
    if embeddings.len() != labels.len() {
        return Err(Error::Argument("labels must parallel embeddings".into()));
    }
    if tau <= 0.0 || tau.is_nan() {
        return Err(Error::Argument("temperature must be positive".into()));
    }
    let dim = embeddings[0].len();
    for e in embeddings {
        if e.len() != dim {
            return Err(Error::Argument("embedding dimension mismatch".into()));
        }
        if e.iter().any(|x| !x.is_finite()) {
            return Err(Error::Argument("non-finite embedding".into()));
        }
        if sim == Similarity::Cosine && norm(e) == 0.0 {
            return Err(Error::Argument("zero embedding under cosine similarity".into()));
        }
    }
    Ok(dim)
}

/// The batch loss; anchors without a same-sense partner contribute zero.
pub fn batch_loss(embeddings: &[Vec<f64>], labels: &[usize], tau: f64, sim: Similarity) -> Result<f64> {
    batch_loss_with_grad(embeddings, labels, tau, sim).map(|(loss, _)| loss)
}

/// The batch loss together with its gradient per embedding.
pub fn batch_loss_with_grad(
    embeddings: &[Vec<f64>],
    labels: &[usize],
    tau: f64,
    sim: Similarity,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let dim = validate_batch(embeddings, labels, tau, sim)?;
    let n = embeddings.len();

    let mut z = vec![vec![0.0; n]; n];
    for j in 0..n {
        for k in (j + 1)..n {
            let s = sim.eval(&embeddings[j], &embeddings[k]) / tau;
            z[j][k] = s;
            z[k][j] = s;
        }
    }

    let mut loss = 0.0;
    // dL/dz[j][k] for ordered pairs with anchor j.
    let mut z_grad = vec![vec![0.0; n]; n];
    for j in 0..n {
        let positives: Vec<usize> =
            (0..n).filter(|&k| k != j && labels[k] == labels[j]).collect();
        if positives.is_empty() {
            continue;
        }
        let m = (0..n).filter(|&k| k != j).map(|k| z[j][k]).fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = (0..n).filter(|&k| k != j).map(|k| (z[j][k] - m).exp()).sum();
        let lse = m + total.ln();
        let mean_pos = positives.iter().map(|&k| z[j][k]).sum::<f64>() / positives.len() as f64;
        loss += lse - mean_pos;
        let inv_pos = 1.0 / positives.len() as f64;
        for k in 0..n {
            if k == j {
                continue;
            }
            let p = (z[j][k] - lse).exp();
            z_grad[j][k] = p - if labels[k] == labels[j] { inv_pos } else { 0.0 };
        }
    }

    let mut grads = vec![vec![0.0; dim]; n];
    for j in 0..n {
        for k in 0..n {
            if k == j || z_grad[j][k] == 0.0 {
                continue;
            }
            let coeff = z_grad[j][k] / tau;
            let (du, dv) = sim.grad(&embeddings[j], &embeddings[k]);
            for (g, d) in grads[j].iter_mut().zip(&du) {
                *g += coeff * d;
            }
            for (g, d) in grads[k].iter_mut().zip(&dv) {
                *g += coeff * d;
            }
        }
    }
    Ok((loss, grads))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchRecord {
    pub epoch: usize,
    pub step: usize,
    pub lemma: String,
    pub loss: f64,
}

/// Everything a training run produced, one entry per processed batch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainLog {
    pub config: TrainConfig,
    pub n_batches: usize,
    pub dropped_batches: usize,
    pub epoch_mean_loss: Vec<f64>,
    pub batches: Vec<BatchRecord>,
    pub wall_clock_secs: f64,
}

impl TrainLog {
    /// One JSON record per line: a config header, each batch, each epoch mean.
    pub fn write_jsonl<W: Write>(&self, w: &mut W) -> Result<()> {
        #[derive(Serialize)]
        #[serde(tag = "kind", rename_all = "snake_case")]
        enum Record<'a> {
            Config {
                config: &'a TrainConfig,
                n_batches: usize,
                dropped_batches: usize,
                wall_clock_secs: f64,
            },
            Batch(&'a BatchRecord),
            Epoch { epoch: usize, mean_loss: f64 },
        }
        let mut emit = |r: &Record| -> Result<()> {
            serde_json::to_writer(&mut *w, r)?;
            w.write_all(b"\n")?;
            Ok(())
        };
        emit(&Record::Config {
            config: &self.config,
            n_batches: self.n_batches,
            dropped_batches: self.dropped_batches,
            wall_clock_secs: self.wall_clock_secs,
        })?;
        for b in &self.batches {
            emit(&Record::Batch(b))?;
        }
        for (epoch, &mean_loss) in self.epoch_mean_loss.iter().enumerate() {
            emit(&Record::Epoch { epoch, mean_loss })?;
        }
        Ok(())
    }
}

/// Fine-tune `enc` on the dataset: per epoch, visit the shuffled batches,
/// re-encode each with the current encoder (last layer, unmasked), and take
/// one update step on the batch loss.
pub fn train<E: TrainableEncoder>(
    enc: &mut E,
    ds: &LexiconDataset,
    cfg: &TrainConfig,
) -> Result<TrainLog> {
    train_with_hook(enc, ds, cfg, |_, _| Ok(()))
}

/// [`train`] with a hook called after each epoch (e.g. to save a checkpoint).
pub fn train_with_hook<E: TrainableEncoder>(
    enc: &mut E,
    ds: &LexiconDataset,
    cfg: &TrainConfig,
    mut on_epoch_end: impl FnMut(usize, &E) -> Result<()>,
) -> Result<TrainLog> {
    cfg.validate()?;
    let start = Instant::now();
    let plan = build_batches(ds, cfg.batch_cap, cfg.seed);
    if plan.batches.is_empty() {
        return Err(Error::EmptyTraining("no lemma kept a positive pair".into()));
    }

    let mut log = TrainLog {
        config: cfg.clone(),
        n_batches: plan.batches.len(),
        dropped_batches: plan.dropped,
        epoch_mean_loss: Vec::with_capacity(cfg.epochs),
        batches: Vec::with_capacity(cfg.epochs * plan.batches.len()),
        wall_clock_secs: 0.0,
    };

    for epoch in 0..cfg.epochs {
        let mut epoch_loss = 0.0;
        for (step, &b) in epoch_order(plan.batches.len(), cfg.seed, epoch).iter().enumerate() {
            let batch = &plan.batches[b];
            let examples: Vec<(&str, crate::lexicon::Span)> = batch
                .example_ids
                .iter()
                .map(|&i| {
                    let ex = &ds.examples()[i];
                    (ex.sentence.as_str(), ex.target_span)
                })
                .collect();
            let (embeddings, tape) = enc.forward_targets(&examples)?;
            let labels = intern(&batch.sense_labels);
            let (loss, grads) =
                batch_loss_with_grad(&embeddings, &labels, cfg.temperature, cfg.similarity)?;
            enc.update_step(tape, &grads, cfg.learning_rate)?;
            epoch_loss += loss;
            log.batches.push(BatchRecord { epoch, step, lemma: batch.lemma.clone(), loss });
        }
        log.epoch_mean_loss.push(epoch_loss / plan.batches.len() as f64);
        on_epoch_end(epoch, enc)?;
    }
    log.wall_clock_secs = start.elapsed().as_secs_f64();
    Ok(log)
}

fn intern(labels: &[String]) -> Vec<usize> {
    let mut ids: HashMap<&str, usize> = HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = ids.len();
            *ids.entry(l.as_str()).or_insert(next)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::{SenseExample, Span};
    use proptest::prelude::*;
    use rand::RngExt;
    use rand_chacha::ChaCha8Rng;

    fn e(values: &[f64]) -> Vec<f64> {
        values.to_vec()
    }

    #[test]
    fn two_same_sense_examples_have_zero_loss() {
        let embs = vec![e(&[0.3, -1.2]), e(&[2.0, 0.7])];
        let loss = batch_loss(&embs, &[0, 0], 0.5, Similarity::Cosine).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn identical_same_sense_embeddings_give_n_log_n_minus_one() {
        for n in 2..6 {
            let embs: Vec<Vec<f64>> = (0..n).map(|_| e(&[1.0, 2.0, 3.0])).collect();
            let labels = vec![0usize; n];
            let loss = batch_loss(&embs, &labels, 0.7, Similarity::Cosine).unwrap();
            let expected = n as f64 * ((n - 1) as f64).ln();
            assert!((loss - expected).abs() < 1e-9, "n={n}: {loss} vs {expected}");
        }
    }

    #[test]
    fn worked_three_example_batch() {
        // a = b = (1,0) share a sense; c = (0,1) is alone; tau = 0.5.
        let embs = vec![e(&[1.0, 0.0]), e(&[1.0, 0.0]), e(&[0.0, 1.0])];
        let loss = batch_loss(&embs, &[0, 0, 1], 0.5, Similarity::Cosine).unwrap();
        let expected = 2.0 * (1.0 + (-2.0f64).exp()).ln();
        assert!((loss - expected).abs() < 1e-12, "{loss} vs {expected}");
        assert!((loss - 0.2539).abs() < 1e-4);
    }

    #[test]
    fn invalid_batches_are_argument_errors() {
        let embs = vec![e(&[1.0, 0.0])];
        assert!(batch_loss(&embs, &[0], 0.5, Similarity::Cosine).is_err());
        let embs = vec![e(&[1.0, 0.0]), e(&[1.0])];
        assert!(batch_loss(&embs, &[0, 0], 0.5, Similarity::Cosine).is_err());
        let embs = vec![e(&[1.0, 0.0]), e(&[f64::NAN, 1.0])];
        assert!(batch_loss(&embs, &[0, 0], 0.5, Similarity::Cosine).is_err());
        let embs = vec![e(&[1.0, 0.0]), e(&[0.0, 1.0])];
        assert!(batch_loss(&embs, &[0, 0], 0.0, Similarity::Cosine).is_err());
    }

    /// Literal evaluation of the loss definition, as an independent oracle.
    pub(crate) fn brute_force_loss(
        embeddings: &[Vec<f64>],
        labels: &[usize],
        tau: f64,
        sim: Similarity,
    ) -> f64 {
        let n = embeddings.len();
        let mut total = 0.0;
        for j in 0..n {
            let positives: Vec<usize> =
                (0..n).filter(|&k| k != j && labels[k] == labels[j]).collect();
            if positives.is_empty() {
                continue;
            }
            for &jp in &positives {
                let num = (sim.eval(&embeddings[j], &embeddings[jp]) / tau).exp();
                let den: f64 = (0..n)
                    .filter(|&k| k != j)
                    .map(|k| (sim.eval(&embeddings[j], &embeddings[k]) / tau).exp())
                    .sum();
                total += -(num / den).ln() / positives.len() as f64;
            }
        }
        total
    }

    fn random_batch(
        rng: &mut rand_chacha::ChaCha8Rng,
        max_n: usize,
        max_d: usize,
    ) -> (Vec<Vec<f64>>, Vec<usize>) {
        let n = rng.random_range(2..=max_n);
        let d = rng.random_range(2..=max_d);
        let embs: Vec<Vec<f64>> =
            (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        (embs, labels)
    }

    #[test]
    fn matches_brute_force_on_random_batches() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for i in 0..200 {
            let (embs, labels) = random_batch(&mut rng, 8, 16);
            let sim = [Similarity::Cosine, Similarity::Dot, Similarity::NegEuclidean][i % 3];
            let tau = rng.random_range(0.1..2.0);
            let fast = batch_loss(&embs, &labels, tau, sim).unwrap();
            let slow = brute_force_loss(&embs, &labels, tau, sim);
            let denom = slow.abs().max(1e-12);
            assert!((fast - slow).abs() / denom < 1e-10, "case {i}: {fast} vs {slow}");
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = 1e-5;
        for i in 0..30 {
            let (mut embs, labels) = random_batch(&mut rng, 6, 8);
            let sim = [Similarity::Cosine, Similarity::Dot, Similarity::NegEuclidean][i % 3];
            let tau = rng.random_range(0.2..1.5);
            let (_, grads) = batch_loss_with_grad(&embs, &labels, tau, sim).unwrap();
            let mut max_rel = 0.0f64;
            for p in 0..embs.len() {
                for c in 0..embs[p].len() {
                    let orig = embs[p][c];
                    embs[p][c] = orig + h;
                    let up = batch_loss(&embs, &labels, tau, sim).unwrap();
                    embs[p][c] = orig - h;
                    let down = batch_loss(&embs, &labels, tau, sim).unwrap();
                    embs[p][c] = orig;
                    let fd = (up - down) / (2.0 * h);
                    let rel = (grads[p][c] - fd).abs() / grads[p][c].abs().max(fd.abs()).max(1e-4);
                    max_rel = max_rel.max(rel);
                }
            }
            assert!(max_rel < 1e-4, "case {i} ({sim:?}): max relative error {max_rel}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn loss_is_non_negative(seed in 0u64..5000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (embs, labels) = random_batch(&mut rng, 8, 8);
            let loss = batch_loss(&embs, &labels, 0.5, Similarity::Cosine).unwrap();
            prop_assert!(loss >= 0.0);
        }

        #[test]
        fn loss_is_permutation_invariant(seed in 0u64..5000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (embs, labels) = random_batch(&mut rng, 8, 8);
            let loss = batch_loss(&embs, &labels, 0.5, Similarity::Cosine).unwrap();
            let n = embs.len();
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let p_embs: Vec<Vec<f64>> = order.iter().map(|&i| embs[i].clone()).collect();
            let p_labels: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
            let p_loss = batch_loss(&p_embs, &p_labels, 0.5, Similarity::Cosine).unwrap();
            prop_assert!((loss - p_loss).abs() < 1e-9);
        }

        #[test]
        fn cosine_loss_ignores_positive_rescaling(seed in 0u64..5000, scale in 0.1f64..20.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (mut embs, labels) = random_batch(&mut rng, 6, 6);
            let loss = batch_loss(&embs, &labels, 0.5, Similarity::Cosine).unwrap();
            let victim = (seed as usize) % embs.len();
            for x in embs[victim].iter_mut() {
                *x *= scale;
            }
            let scaled = batch_loss(&embs, &labels, 0.5, Similarity::Cosine).unwrap();
            prop_assert!((loss - scaled).abs() < 1e-9);
        }
    }

    fn dataset_with(lemma_specs: &[(&str, &[usize])]) -> LexiconDataset {
        // Each spec: (lemma, example counts per sense).
        let mut examples = Vec::new();
        for (lemma, counts) in lemma_specs {
            for (s, &count) in counts.iter().enumerate() {
                for c in 0..count {
                    let sentence = format!("filler {c} words around {lemma} sense {s} tail");
                    let start = crate::lexicon::char_count(&format!("filler {c} words around "));
                    examples.push(
                        SenseExample::new(
                            *lemma,
                            "verb",
                            format!("{lemma}.{s}"),
                            sentence.clone(),
                            Span::new(start, start + crate::lexicon::char_count(lemma)),
                        )
                        .unwrap(),
                    );
                }
            }
        }
        LexiconDataset::from_examples(examples).unwrap()
    }

    #[test]
    fn batches_cap_and_drop_rules() {
        let ds = dataset_with(&[
            ("bigone", &[30, 30]), // capped at 5
            ("pairup", &[2]),      // minimal positive batch
            ("nopair", &[1, 1]),   // no positive pair -> dropped
            ("single", &[1]),      // fewer than 2 usable -> dropped
        ]);
        let plan = build_batches(&ds, 5, 42);
        assert_eq!(plan.batches.len(), 2);
        assert_eq!(plan.dropped, 2);
        let big = plan.batches.iter().find(|b| b.lemma == "bigone").unwrap();
        assert_eq!(big.len(), 5);
        let pair = plan.batches.iter().find(|b| b.lemma == "pairup").unwrap();
        assert_eq!(pair.len(), 2);
        assert!(!pair.is_degenerate());
    }

    #[test]
    fn batch_subsample_is_deterministic() {
        let ds = dataset_with(&[("bigone", &[40, 40])]);
        let a = build_batches(&ds, 16, 3);
        let b = build_batches(&ds, 16, 3);
        assert_eq!(a.batches, b.batches);
        let c = build_batches(&ds, 16, 4);
        assert_ne!(a.batches, c.batches);
    }

    #[test]
    fn epoch_order_varies_with_epoch_and_is_reproducible() {
        let a = epoch_order(20, 5, 0);
        let b = epoch_order(20, 5, 0);
        let c = epoch_order(20, 5, 1);
        assert_eq!(a, b);
        assert_ne!(a, c);
        let mut sorted = c.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn training_errors_when_every_lemma_is_dropped() {
        let ds = dataset_with(&[("nopair", &[1, 1])]);
        let mut enc = crate::toy::ToyEncoder::new(8, 2, 1);
        let cfg = TrainConfig { epochs: 1, learning_rate: 0.01, ..TrainConfig::default() };
        assert!(matches!(train(&mut enc, &ds, &cfg), Err(Error::EmptyTraining(_))));
    }

    #[test]
    fn training_runs_and_logs_every_batch() {
        let ds = dataset_with(&[("alpha", &[3, 3]), ("beta", &[2, 2]), ("gamma", &[4])]);
        let mut enc = crate::toy::ToyEncoder::new(12, 2, 5);
        let cfg = TrainConfig {
            epochs: 3,
            learning_rate: 0.01,
            temperature: 0.5,
            batch_cap: 64,
            seed: 9,
            similarity: Similarity::Cosine,
        };
        let log = train(&mut enc, &ds, &cfg).unwrap();
        assert_eq!(log.n_batches, 3);
        assert_eq!(log.batches.len(), 9);
        assert_eq!(log.epoch_mean_loss.len(), 3);
        let mut buf = Vec::new();
        log.write_jsonl(&mut buf).unwrap();
        let lines = buf.split(|&b| b == b'\n').filter(|l| !l.is_empty()).count();
        assert_eq!(lines, 1 + 9 + 3);
    }

    #[test]
    fn training_is_deterministic_given_seed() {
        let ds = dataset_with(&[("alpha", &[3, 3]), ("beta", &[2, 2])]);
        let cfg = TrainConfig { epochs: 2, learning_rate: 0.02, ..TrainConfig::default() };
        let mut enc1 = crate::toy::ToyEncoder::new(12, 2, 5);
        let log1 = train(&mut enc1, &ds, &cfg).unwrap();
        let mut enc2 = crate::toy::ToyEncoder::new(12, 2, 5);
        let log2 = train(&mut enc2, &ds, &cfg).unwrap();
        assert_eq!(log1.epoch_mean_loss, log2.epoch_mean_loss);
    }
}
