//! External clustering evaluation: purity, inverse purity, and B-cubed.
//!
//! Both metric families compare a system clustering against gold classes over
//! the same items. Purity sums, per system cluster, the size of the dominant
//! gold class; inverse purity swaps the roles; their harmonic mean is reported
//! as `PiF`. B-cubed averages per-item precision and recall over cluster/class
//! overlaps, and `BcF` is the harmonic mean of the two aggregates (not a mean
//! of per-item F values).

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};

/// Items with their system cluster id and gold class id, interned to dense
/// integers. Both maps are total: every item carries both labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledPartition {
    /// Item index -> system cluster id.
    pub system: Vec<usize>,
    /// Item index -> gold class id.
    pub gold: Vec<usize>,
}

impl LabeledPartition {
    /// Build from parallel `(system, gold)` labels of any hashable type.
    pub fn from_labels<S, G, I>(pairs: I) -> Self
    where
        S: Eq + Hash,
        G: Eq + Hash,
        I: IntoIterator<Item = (S, G)>,
    {
        let mut sys_ids: HashMap<S, usize> = HashMap::new();
        let mut gold_ids: HashMap<G, usize> = HashMap::new();
        let mut system = Vec::new();
        let mut gold = Vec::new();
        for (s, g) in pairs {
            let next = sys_ids.len();
            system.push(*sys_ids.entry(s).or_insert(next));
            let next = gold_ids.len();
            gold.push(*gold_ids.entry(g).or_insert(next));
        }
        LabeledPartition { system, gold }
    }

    pub fn len(&self) -> usize {
        self.system.len()
    }

    pub fn is_empty(&self) -> bool {
        self.system.is_empty()
    }

    /// Overlap counts keyed by `(cluster, class)`.
    fn contingency(&self) -> HashMap<(usize, usize), usize> {
        let mut table = HashMap::new();
        for (&c, &g) in self.system.iter().zip(&self.gold) {
            *table.entry((c, g)).or_insert(0) += 1;
        }
        table
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurityScores {
    pub purity: f64,
    pub inverse_purity: f64,
    /// Harmonic mean of purity and inverse purity.
    pub pif: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcubedScores {
    pub precision: f64,
    pub recall: f64,
    /// Harmonic mean of the aggregate precision and recall.
    pub f_score: f64,
}

fn harmonic_mean(a: f64, b: f64) -> f64 {
    if a + b == 0.0 { 0.0 } else { 2.0 * a * b / (a + b) }
}

/// Purity, inverse purity, and their harmonic mean.
///
/// Purity is `(1/N) * sum over clusters of max class overlap`; inverse purity
/// swaps clusters and classes.
pub fn purity_scores(p: &LabeledPartition) -> Result<PurityScores> {
    if p.is_empty() {
        return Err(Error::Argument("purity_scores needs at least one item".into()));
    }
    let table = p.contingency();
    let mut best_by_cluster: HashMap<usize, usize> = HashMap::new();
    let mut best_by_class: HashMap<usize, usize> = HashMap::new();
    for (&(c, g), &n) in &table {
        let e = best_by_cluster.entry(c).or_insert(0);
        *e = (*e).max(n);
        let e = best_by_class.entry(g).or_insert(0);
        *e = (*e).max(n);
    }
    let n = p.len() as f64;
    let purity = best_by_cluster.values().sum::<usize>() as f64 / n;
    let inverse_purity = best_by_class.values().sum::<usize>() as f64 / n;
    Ok(PurityScores { purity, inverse_purity, pif: harmonic_mean(purity, inverse_purity) })
}

/// Item-averaged B-cubed precision/recall and their harmonic mean.
///
/// For an item `e`, precision is `|cluster(e) ∩ class(e)| / |cluster(e)|` and
/// recall is `|cluster(e) ∩ class(e)| / |class(e)|`; the item itself counts in
/// every set.
pub fn bcubed_scores(p: &LabeledPartition) -> Result<BcubedScores> {
    if p.is_empty() {
        return Err(Error::Argument("bcubed_scores needs at least one item".into()));
    }
    let table = p.contingency();
    let mut cluster_sizes: HashMap<usize, usize> = HashMap::new();
    let mut class_sizes: HashMap<usize, usize> = HashMap::new();
    for (&c, &g) in p.system.iter().zip(&p.gold) {
        *cluster_sizes.entry(c).or_insert(0) += 1;
        *class_sizes.entry(g).or_insert(0) += 1;
    }
    let mut precision = 0.0;
    let mut recall = 0.0;
    for (&c, &g) in p.system.iter().zip(&p.gold) {
        let overlap = table[&(c, g)] as f64;
        precision += overlap / cluster_sizes[&c] as f64;
        recall += overlap / class_sizes[&g] as f64;
    }
    let n = p.len() as f64;
    precision /= n;
    recall /= n;
    Ok(BcubedScores { precision, recall, f_score: harmonic_mean(precision, recall) })
}
