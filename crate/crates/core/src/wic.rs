//! Unsupervised word-in-context classification.
//!
//! Pairs are scored by the cosine of their target-token embeddings (last
//! layer, unmasked, optionally projected); a single decision threshold is
//! tuned on a development set over a fixed step grid; test accuracy and
//! McNemar significance follow. No classifier is trained anywhere.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::encoder::{Encoder, embed_span};
use crate::error::{Error, Result};
use crate::lexicon::WiCPair;
use crate::postprocess::{Projection, cosine, project};

/// A pair with its similarity; the gold label rides along when known.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScoredPair {
    /// Index of the pair in its source file.
    pub pair: usize,
    pub lemma: String,
    pub similarity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<bool>,
}

/// Scored pairs plus the pairs excluded for alignment failures.
#[derive(Debug, Clone)]
pub struct ScoreOutcome {
    pub scored: Vec<ScoredPair>,
    /// `(pair index, error message)` for every excluded pair.
    pub excluded: Vec<(usize, String)>,
}

/// Tuned decision rule: `similarity >= threshold` predicts same sense.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ThresholdModel {
    pub threshold: f64,
    pub step: f64,
    pub dev_accuracy: f64,
}

/// Score pairs with an encoder at `layer` (unmasked target embeddings on both
/// sides, optionally projected). Order is preserved; pairs whose spans cannot
/// be aligned are excluded and reported.
pub fn score_pairs(
    enc: &(impl Encoder + ?Sized),
    proj: Option<&Projection>,
    pairs: &[WiCPair],
    layer: usize,
) -> Result<ScoreOutcome> {
    let mut scored = Vec::with_capacity(pairs.len());
    let mut excluded = Vec::new();
    for (i, p) in pairs.iter().enumerate() {
        let embed = |sentence: &str, span| -> Result<Vec<f64>> {
            let v = embed_span(enc, sentence, span, layer, false)?;
            match proj {
                Some(proj) => project(proj, &v),
                None => Ok(v),
            }
        };
        let a = embed(&p.sentence1, p.span1);
        let b = embed(&p.sentence2, p.span2);
        match (a, b) {
            (Ok(a), Ok(b)) => scored.push(ScoredPair {
                pair: i,
                lemma: p.lemma.clone(),
                similarity: cosine(&a, &b)?,
                label: Some(p.label),
            }),
            (Err(e), _) | (_, Err(e)) => excluded.push((i, e.to_string())),
        }
    }
    Ok(ScoreOutcome { scored, excluded })
}

/// Score pairs from two pre-computed embedding dumps whose rows parallel the
/// pair file (side 1 and side 2). Sentinel rows exclude their pair.
pub fn score_pairs_from_dumps(
    side1: &crate::dump::EmbeddingDump,
    side2: &crate::dump::EmbeddingDump,
    pairs: &[WiCPair],
) -> Result<ScoreOutcome> {
    if side1.len() != pairs.len() || side2.len() != pairs.len() {
        return Err(Error::Argument(format!(
            "dump rows ({}, {}) do not match {} pairs",
            side1.len(),
            side2.len(),
            pairs.len()
        )));
    }
    let mut scored = Vec::with_capacity(pairs.len());
    let mut excluded = Vec::new();
    for (i, p) in pairs.iter().enumerate() {
        match (side1.valid_row(i), side2.valid_row(i)) {
            (Some(a), Some(b)) => scored.push(ScoredPair {
                pair: i,
                lemma: p.lemma.clone(),
                similarity: cosine(a, b)?,
                label: Some(p.label),
            }),
            _ => excluded.push((i, "sentinel embedding row".to_string())),
        }
    }
    Ok(ScoreOutcome { scored, excluded })
}

/// The threshold grid `{-1, -1+step, ..., 1}`.
fn grid(step: f64) -> impl Iterator<Item = f64> {
    let count = (2.0 / step).floor() as usize;
    (0..=count).map(move |i| -1.0 + i as f64 * step)
}

fn accuracy_at(scored: &[(f64, bool)], threshold: f64) -> f64 {
    let correct =
        scored.iter().filter(|&&(sim, label)| (sim >= threshold) == label).count();
    correct as f64 / scored.len() as f64
}

/// Tune the threshold on labeled scores: evaluate every grid point, return
/// the argmax, ties broken by the smallest threshold.
pub fn tune_threshold(scored: &[(f64, bool)], step: f64) -> Result<ThresholdModel> {
    if !(0.0 < step && step < 1.0) {
        return Err(Error::Argument(format!("step must lie in (0, 1), got {step}")));
    }
    if scored.is_empty() {
        return Err(Error::Argument("no scored pairs to tune on".into()));
    }
    let n_pos = scored.iter().filter(|&&(_, l)| l).count();
    if n_pos == 0 || n_pos == scored.len() {
        return Err(Error::DegenerateTuning);
    }
    let mut best_t = f64::NEG_INFINITY;
    let mut best_acc = f64::NEG_INFINITY;
    for t in grid(step) {
        let acc = accuracy_at(scored, t);
        if acc > best_acc {
            best_acc = acc;
            best_t = t;
        }
    }
    Ok(ThresholdModel { threshold: best_t, step, dev_accuracy: best_acc })
}

/// Accuracy of the thresholded rule, with confusion counts and per-label
/// accuracy.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AccuracyReport {
    pub accuracy: f64,
    pub n: usize,
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
    pub positive_accuracy: f64,
    pub negative_accuracy: f64,
}

pub fn evaluate_accuracy(scored: &[(f64, bool)], threshold: f64) -> Result<AccuracyReport> {
    if scored.is_empty() {
        return Err(Error::Argument("no scored pairs to evaluate".into()));
    }
    let mut tp = 0;
    let mut fp = 0;
    let mut tn = 0;
    let mut fn_ = 0;
    for &(sim, label) in scored {
        match (sim >= threshold, label) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let n = scored.len();
    let pos = tp + fn_;
    let neg = tn + fp;
    Ok(AccuracyReport {
        accuracy: (tp + tn) as f64 / n as f64,
        n,
        true_positive: tp,
        false_positive: fp,
        true_negative: tn,
        false_negative: fn_,
        positive_accuracy: if pos == 0 { 0.0 } else { tp as f64 / pos as f64 },
        negative_accuracy: if neg == 0 { 0.0 } else { tn as f64 / neg as f64 },
    })
}

/// Predictions compared pairwise through their discordance table.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct McNemarOutcome {
    /// a correct, b wrong.
    pub b_count: usize,
    /// a wrong, b correct.
    pub c_count: usize,
    /// Continuity-corrected chi-squared statistic.
    pub statistic: f64,
    pub p_value: f64,
    pub significant_at_05: bool,
    /// Set when there were no discordant pairs at all.
    pub no_discordance: bool,
    /// True when the exact binomial path was used (fewer than 25 discordant
    /// pairs), false for the chi-squared approximation.
    pub exact: bool,
}

/// McNemar's test over the correctness of two prediction vectors.
pub fn mcnemar_test(preds_a: &[bool], preds_b: &[bool], gold: &[bool]) -> Result<McNemarOutcome> {
    if preds_a.len() != preds_b.len() || preds_a.len() != gold.len() {
        return Err(Error::Argument("prediction and gold lengths differ".into()));
    }
    if preds_a.is_empty() {
        return Err(Error::Argument("mcnemar_test needs at least one pair".into()));
    }
    let mut b = 0usize;
    let mut c = 0usize;
    for ((&a, &bb), &g) in preds_a.iter().zip(preds_b).zip(gold) {
        match (a == g, bb == g) {
            (true, false) => b += 1,
            (false, true) => c += 1,
            _ => {}
        }
    }
    let nd = b + c;
    if nd == 0 {
        return Ok(McNemarOutcome {
            b_count: b,
            c_count: c,
            statistic: 0.0,
            p_value: 1.0,
            significant_at_05: false,
            no_discordance: true,
            exact: true,
        });
    }
    let statistic = {
        let diff = (b as f64 - c as f64).abs() - 1.0;
        (diff.max(0.0)).powi(2) / nd as f64
    };
    let (p_value, exact) = if nd < 25 {
        (exact_binomial_two_sided(b.min(c), nd), true)
    } else {
        (chi2_survival_1df(statistic), false)
    };
    Ok(McNemarOutcome {
        b_count: b,
        c_count: c,
        statistic,
        p_value,
        significant_at_05: p_value < 0.05,
        no_discordance: false,
        exact,
    })
}

/// Two-sided sign-test p-value: `2 * P(X <= k)` for `X ~ Binomial(n, 1/2)`,
/// capped at 1.
fn exact_binomial_two_sided(k: usize, n: usize) -> f64 {
    let mut tail = 0.0f64;
    for i in 0..=k {
        tail += binomial(n, i);
    }
    (2.0 * tail / 2.0f64.powi(n as i32)).min(1.0)
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Survival function of a chi-squared with one degree of freedom.
fn chi2_survival_1df(x: f64) -> f64 {
    erfc((x / 2.0).sqrt())
}

/// Complementary error function (Abramowitz-Stegun 7.1.26, |error| < 1.5e-7).
fn erfc(z: f64) -> f64 {
    let t = 1.0 / (1.0 + 0.3275911 * z.abs());
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let val = poly * (-z * z).exp();
    if z >= 0.0 { val } else { 2.0 - val }
}

/// Write scored pairs as line-delimited JSON.
pub fn write_scored<W: Write>(w: &mut W, scored: &[ScoredPair]) -> Result<()> {
    for s in scored {
        serde_json::to_writer(&mut *w, s)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_scored<R: BufRead>(r: R) -> Result<Vec<ScoredPair>> {
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

/// Extract `(similarity, label)` rows, erroring on unlabeled entries.
pub fn labeled_scores(scored: &[ScoredPair]) -> Result<Vec<(f64, bool)>> {
    scored
        .iter()
        .map(|s| {
            s.label
                .map(|l| (s.similarity, l))
                .ok_or_else(|| Error::Argument(format!("pair {} has no gold label", s.pair)))
        })
        .collect()
}
