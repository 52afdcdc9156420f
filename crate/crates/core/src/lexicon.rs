//! Sense-annotated lexicon examples: parsing, filtering, lemma-disjoint
//! splits, derived word-in-context pair sets, and corpus statistics.
//!
//! The wire format is one JSON object per line with keys `lemma`, `pos`,
//! `sense_id`, `sentence`, `target_start`, `target_end`. Spans are character
//! offsets (Unicode scalar values), half-open `[start, end)`, so the format
//! stays tokenizer-agnostic.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::derive_seed;

/// Half-open character span `[start, end)` into a sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// Number of characters (Unicode scalar values) in a string.
pub fn char_count(s: &str) -> usize {
    s.chars().count()
}

/// Slice by character offsets; `None` when out of bounds.
pub fn char_slice(s: &str, span: Span) -> Option<&str> {
    if span.start >= span.end {
        return None;
    }
    let mut byte_start = None;
    let mut byte_end = None;
    let mut count = 0;
    for (bi, _) in s.char_indices() {
        if count == span.start {
            byte_start = Some(bi);
        }
        if count == span.end {
            byte_end = Some(bi);
        }
        count += 1;
    }
    if count == span.end {
        byte_end = Some(s.len());
    }
    match (byte_start, byte_end) {
        (Some(a), Some(b)) if a < b => Some(&s[a..b]),
        _ => None,
    }
}

/// One lexicon example sentence: a lemma used in a specific sense, with the
/// target occurrence located by a character span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SenseExample {
    pub lemma: String,
    pub pos: String,
    /// Sense identifier, unique within the lemma.
    pub sense_id: String,
    pub sentence: String,
    pub target_span: Span,
}

impl SenseExample {
    /// Validate invariants: non-empty sense id, span within bounds, non-empty
    /// surface form.
    pub fn new(
        lemma: impl Into<String>,
        pos: impl Into<String>,
        sense_id: impl Into<String>,
        sentence: impl Into<String>,
        target_span: Span,
    ) -> Result<Self> {
        let ex = SenseExample {
            lemma: lemma.into(),
            pos: pos.into(),
            sense_id: sense_id.into(),
            sentence: sentence.into(),
            target_span,
        };
        ex.validate()?;
        Ok(ex)
    }

    fn validate(&self) -> Result<()> {
        if self.lemma.trim().is_empty() {
            return Err(Error::Argument("empty lemma".into()));
        }
        if self.sense_id.is_empty() {
            return Err(Error::Argument("empty sense_id".into()));
        }
        let len = char_count(&self.sentence);
        let Span { start, end } = self.target_span;
        if start >= end || end > len {
            return Err(Error::Argument(format!(
                "span [{start}, {end}) out of bounds for sentence of {len} characters"
            )));
        }
        if char_slice(&self.sentence, self.target_span).is_none_or(|s| s.trim().is_empty()) {
            return Err(Error::Argument("span selects an empty surface form".into()));
        }
        Ok(())
    }

    pub fn surface_form(&self) -> &str {
        char_slice(&self.sentence, self.target_span).unwrap_or("")
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ExampleRecord {
    lemma: String,
    pos: String,
    sense_id: String,
    sentence: String,
    target_start: usize,
    target_end: usize,
}

/// A validated collection of [`SenseExample`]s with a lemma -> sense ->
/// example-id index kept consistent with the example list.
#[derive(Debug, Clone, Default)]
pub struct LexiconDataset {
    examples: Vec<SenseExample>,
    index: BTreeMap<String, BTreeMap<String, Vec<usize>>>,
}

impl PartialEq for LexiconDataset {
    fn eq(&self, other: &Self) -> bool {
        self.examples == other.examples
    }
}

impl LexiconDataset {
    /// Build from pre-validated examples, rejecting duplicate
    /// `(lemma, sentence, span)` triples.
    pub fn from_examples(examples: Vec<SenseExample>) -> Result<Self> {
        let mut ds = LexiconDataset::default();
        let mut seen = HashSet::new();
        for ex in examples {
            ex.validate()?;
            if !seen.insert((ex.lemma.clone(), ex.sentence.clone(), ex.target_span)) {
                return Err(Error::Argument(format!(
                    "duplicate example for lemma '{}': {:?}",
                    ex.lemma, ex.sentence
                )));
            }
            ds.push_unchecked(ex);
        }
        Ok(ds)
    }

    fn push_unchecked(&mut self, ex: SenseExample) {
        let id = self.examples.len();
        self.index
            .entry(ex.lemma.clone())
            .or_default()
            .entry(ex.sense_id.clone())
            .or_default()
            .push(id);
        self.examples.push(ex);
    }

    pub fn examples(&self) -> &[SenseExample] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Lemmas in sorted order.
    pub fn lemmas(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(|s| s.as_str())
    }

    pub fn n_lemmas(&self) -> usize {
        self.index.len()
    }

    pub fn n_senses(&self) -> usize {
        self.index.values().map(|senses| senses.len()).sum()
    }

    /// sense_id -> example ids for one lemma.
    pub fn senses_of(&self, lemma: &str) -> Option<&BTreeMap<String, Vec<usize>>> {
        self.index.get(lemma)
    }

    /// Example ids of one lemma, in dataset order.
    pub fn example_ids_of(&self, lemma: &str) -> Vec<usize> {
        let Some(senses) = self.index.get(lemma) else {
            return Vec::new();
        };
        let mut ids: Vec<usize> = senses.values().flatten().copied().collect();
        ids.sort_unstable();
        ids
    }

    /// Retain only the examples selected by `keep`, preserving order.
    fn retain_examples(&self, keep: impl Fn(&SenseExample) -> bool) -> LexiconDataset {
        let mut ds = LexiconDataset::default();
        for ex in &self.examples {
            if keep(ex) {
                ds.push_unchecked(ex.clone());
            }
        }
        ds
    }
}

/// What `parse_lexicon` dropped and why.
#[derive(Debug, Clone, Default, Serialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub rejected: Vec<Rejection>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Rejection {
    pub line: usize,
    pub reason: String,
}

/// Parse a line-delimited record stream into a validated dataset.
///
/// Records failing span validation (or duplicating an earlier record) are
/// dropped and counted in the report; undecodable JSON is a hard parse error
/// carrying the line number, and an input with no records at all is an error.
pub fn parse_lexicon<R: BufRead>(reader: R) -> Result<(LexiconDataset, IngestReport)> {
    let mut ds = LexiconDataset::default();
    let mut report = IngestReport::default();
    let mut seen = HashSet::new();
    let mut saw_record = false;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        saw_record = true;
        let record: ExampleRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
        let ex = SenseExample::new(
            record.lemma,
            record.pos,
            record.sense_id,
            record.sentence,
            Span::new(record.target_start, record.target_end),
        );
        match ex {
            Ok(ex) => {
                if seen.insert((ex.lemma.clone(), ex.sentence.clone(), ex.target_span)) {
                    ds.push_unchecked(ex);
                    report.accepted += 1;
                } else {
                    report
                        .rejected
                        .push(Rejection { line: i + 1, reason: "duplicate example".into() });
                }
            }
            Err(e) => report.rejected.push(Rejection { line: i + 1, reason: e.to_string() }),
        }
    }
    if !saw_record {
        return Err(Error::EmptyDataset);
    }
    Ok((ds, report))
}

/// Serialize in the same line-delimited format `parse_lexicon` reads.
pub fn write_lexicon<W: Write>(w: &mut W, ds: &LexiconDataset) -> Result<()> {
    for ex in ds.examples() {
        let record = ExampleRecord {
            lemma: ex.lemma.clone(),
            pos: ex.pos.clone(),
            sense_id: ex.sense_id.clone(),
            sentence: ex.sentence.clone(),
            target_start: ex.target_span.start,
            target_end: ex.target_span.end,
        };
        serde_json::to_writer(&mut *w, &record)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Configurable lemma-level exclusion rules.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterPolicy {
    /// Keep lemmas whose sense count falls in this inclusive range.
    pub sense_range: Option<(usize, usize)>,
    /// Drop lemmas that have exactly one sense with exactly one example.
    pub drop_single_sense_single_example: bool,
    /// Drop lemmas containing internal whitespace.
    pub drop_multiword: bool,
    /// Keep only examples with this POS tag, when set.
    pub pos: Option<String>,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        FilterPolicy {
            sense_range: Some((1, 10)),
            drop_single_sense_single_example: true,
            drop_multiword: true,
            pos: None,
        }
    }
}

/// Apply the lemma-level exclusion rules. May return an empty dataset.
pub fn filter_dataset(ds: &LexiconDataset, policy: &FilterPolicy) -> LexiconDataset {
    let pos_filtered = match &policy.pos {
        Some(pos) => ds.retain_examples(|ex| &ex.pos == pos),
        None => ds.clone(),
    };
    let mut keep_lemmas = HashSet::new();
    for lemma in pos_filtered.lemmas() {
        let senses = pos_filtered.senses_of(lemma).unwrap();
        let n_senses = senses.len();
        let n_examples: usize = senses.values().map(|ids| ids.len()).sum();
        if let Some((lo, hi)) = policy.sense_range
            && !(lo..=hi).contains(&n_senses)
        {
            continue;
        }
        if policy.drop_single_sense_single_example && n_senses == 1 && n_examples == 1 {
            continue;
        }
        if policy.drop_multiword && lemma.trim().chars().any(char::is_whitespace) {
            continue;
        }
        keep_lemmas.insert(lemma.to_string());
    }
    pos_filtered.retain_examples(|ex| keep_lemmas.contains(&ex.lemma))
}

/// Collapse whitespace runs and trim, for leakage matching.
pub fn normalize_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Drop every example whose (whitespace-normalized) sentence appears in the
/// exclusion set. Used to remove overlap with externally released pair sets.
pub fn remove_sentences(ds: &LexiconDataset, excluded: &HashSet<String>) -> LexiconDataset {
    ds.retain_examples(|ex| !excluded.contains(&normalize_whitespace(&ex.sentence)))
}

/// Lemma-disjoint train/dev/test split.
#[derive(Debug, Clone)]
pub struct SplitBundle {
    pub train: LexiconDataset,
    pub dev: LexiconDataset,
    pub test: LexiconDataset,
    pub seed: u64,
}

/// Split by lemma: lemmas are shuffled by `seed` and assigned greedily so
/// bucket example counts approximate the (normalized) ratios. Lemma
/// disjointness is guaranteed by construction.
pub fn split_by_lemma(ds: &LexiconDataset, ratios: (f64, f64, f64), seed: u64) -> Result<SplitBundle> {
    let r = [ratios.0, ratios.1, ratios.2];
    if r.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::Argument("ratios must be non-negative and finite".into()));
    }
    let total: f64 = r.iter().sum();
    if total <= 0.0 {
        return Err(Error::Argument("ratios must sum to a positive value".into()));
    }
    let r: Vec<f64> = r.iter().map(|x| x / total).collect();
    let n_buckets = r.iter().filter(|&&x| x > 0.0).count();
    if ds.n_lemmas() < n_buckets {
        return Err(Error::Split(format!(
            "{} lemmas cannot fill {} non-empty buckets",
            ds.n_lemmas(),
            n_buckets
        )));
    }

    let mut lemmas: Vec<&str> = ds.lemmas().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "split_by_lemma"));
    lemmas.shuffle(&mut rng);

    let total_examples = ds.len() as f64;
    let targets: Vec<f64> = r.iter().map(|x| x * total_examples).collect();
    let mut assigned = [0usize; 3];
    let mut bucket_of: HashMap<&str, usize> = HashMap::new();
    for lemma in lemmas {
        let size = ds.example_ids_of(lemma).len();
        // Largest remaining deficit wins; zero-ratio buckets never receive.
        let mut best = None;
        for k in 0..3 {
            if r[k] == 0.0 {
                continue;
            }
            let deficit = targets[k] - assigned[k] as f64;
            if best.is_none_or(|(_, d)| deficit > d) {
                best = Some((k, deficit));
            }
        }
        let (k, _) = best.expect("at least one positive ratio");
        bucket_of.insert(lemma, k);
        assigned[k] += size;
    }

    let pick = |bucket: usize| ds.retain_examples(|ex| bucket_of.get(ex.lemma.as_str()) == Some(&bucket));
    Ok(SplitBundle { train: pick(0), dev: pick(1), test: pick(2), seed })
}

/// One word-in-context pair: two sentences containing the same lemma, labeled
/// with whether the target occurrences share a sense.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WiCPair {
    pub lemma: String,
    pub pos: String,
    pub sentence1: String,
    pub sentence2: String,
    pub span1: Span,
    pub span2: Span,
    pub label: bool,
}

/// Output of [`build_wic_pairs`]; `exhausted` flags a shortfall on either
/// label before `n_pairs` was reached.
#[derive(Debug, Clone)]
pub struct WiCPairSet {
    pub pairs: Vec<WiCPair>,
    pub exhausted: bool,
}

/// Sample a balanced pair set: `n_pairs / 2` positives (same lemma, same
/// sense) and `n_pairs / 2` negatives (same lemma, different senses), uniform
/// over example pairs, never repeating an unordered sentence pair.
pub fn build_wic_pairs(ds: &LexiconDataset, n_pairs: usize, seed: u64) -> Result<WiCPairSet> {
    if !n_pairs.is_multiple_of(2) {
        return Err(Error::Argument(format!("n_pairs must be even, got {n_pairs}")));
    }
    let examples = ds.examples();
    let mut positives: Vec<(usize, usize)> = Vec::new();
    let mut negatives: Vec<(usize, usize)> = Vec::new();
    for lemma in ds.lemmas() {
        let senses = ds.senses_of(lemma).unwrap();
        let sense_ids: Vec<&Vec<usize>> = senses.values().collect();
        for ids in &sense_ids {
            for i in 0..ids.len() {
                for j in (i + 1)..ids.len() {
                    positives.push((ids[i], ids[j]));
                }
            }
        }
        for a in 0..sense_ids.len() {
            for b in (a + 1)..sense_ids.len() {
                for &i in sense_ids[a] {
                    for &j in sense_ids[b] {
                        negatives.push((i, j));
                    }
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "build_wic_pairs"));
    positives.shuffle(&mut rng);
    negatives.shuffle(&mut rng);

    let half = n_pairs / 2;
    let mut used: HashSet<(String, String)> = HashSet::new();
    let mut take = |candidates: &[(usize, usize)], label: bool, out: &mut Vec<WiCPair>| {
        let mut taken = 0;
        for &(i, j) in candidates {
            if taken >= half {
                break;
            }
            let (a, b) = (&examples[i], &examples[j]);
            let key = if a.sentence <= b.sentence {
                (a.sentence.clone(), b.sentence.clone())
            } else {
                (b.sentence.clone(), a.sentence.clone())
            };
            if !used.insert(key) {
                continue;
            }
            out.push(WiCPair {
                lemma: a.lemma.clone(),
                pos: a.pos.clone(),
                sentence1: a.sentence.clone(),
                sentence2: b.sentence.clone(),
                span1: a.target_span,
                span2: b.target_span,
                label,
            });
            taken += 1;
        }
    };

    let mut pairs = Vec::with_capacity(n_pairs);
    take(&positives, true, &mut pairs);
    let n_pos = pairs.len();
    take(&negatives, false, &mut pairs);
    let n_neg = pairs.len() - n_pos;
    let exhausted = n_pos < half || n_neg < half;
    pairs.shuffle(&mut rng);
    Ok(WiCPairSet { pairs, exhausted })
}

/// Write pairs as tab-separated rows `lemma, pos, s1:e1/s2:e2, sentence1,
/// sentence2`, with labels (`T`/`F` lines) in a parallel file.
pub fn write_wic_pairs<W1: Write, W2: Write>(
    data: &mut W1,
    labels: &mut W2,
    pairs: &[WiCPair],
) -> Result<()> {
    for p in pairs {
        for s in [&p.sentence1, &p.sentence2] {
            if s.contains('\t') || s.contains('\n') {
                return Err(Error::Argument("sentence contains a tab or newline".into()));
            }
        }
        writeln!(
            data,
            "{}\t{}\t{}:{}/{}:{}\t{}\t{}",
            p.lemma,
            p.pos,
            p.span1.start,
            p.span1.end,
            p.span2.start,
            p.span2.end,
            p.sentence1,
            p.sentence2
        )?;
        writeln!(labels, "{}", if p.label { "T" } else { "F" })?;
    }
    Ok(())
}

/// Read a pair file, optionally joined with its label file. Without labels
/// every pair carries `label = false` and the flag in the result is `false`.
pub fn read_wic_pairs<R: BufRead>(
    data: R,
    labels: Option<impl BufRead>,
) -> Result<(Vec<WiCPair>, bool)> {
    let mut pairs = Vec::new();
    for (i, line) in data.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected 5 tab-separated columns, got {}", cols.len()),
            });
        }
        let spans: Vec<&str> = cols[2].split('/').collect();
        if spans.len() != 2 {
            return Err(Error::Parse { line: i + 1, message: "expected s1:e1/s2:e2 spans".into() });
        }
        let parse_span = |s: &str| -> Result<Span> {
            let (a, b) = s.split_once(':').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("bad span '{s}'"),
            })?;
            let parse = |x: &str| {
                x.parse::<usize>().map_err(|_| Error::Parse {
                    line: i + 1,
                    message: format!("bad span offset '{x}'"),
                })
            };
            Ok(Span::new(parse(a)?, parse(b)?))
        };
        let pair = WiCPair {
            lemma: cols[0].to_string(),
            pos: cols[1].to_string(),
            span1: parse_span(spans[0])?,
            span2: parse_span(spans[1])?,
            sentence1: cols[3].to_string(),
            sentence2: cols[4].to_string(),
            label: false,
        };
        for (span, sentence) in [(pair.span1, &pair.sentence1), (pair.span2, &pair.sentence2)] {
            if char_slice(sentence, span).is_none() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!(
                        "span [{}, {}) invalid for a {}-character sentence",
                        span.start,
                        span.end,
                        char_count(sentence)
                    ),
                });
            }
        }
        pairs.push(pair);
    }
    let has_labels = labels.is_some();
    if let Some(labels) = labels {
        let mut parsed = Vec::new();
        for (i, line) in labels.lines().enumerate() {
            let line = line?;
            match line.trim() {
                "" => continue,
                "T" => parsed.push(true),
                "F" => parsed.push(false),
                other => {
                    return Err(Error::Parse {
                        line: i + 1,
                        message: format!("expected T or F, got '{other}'"),
                    });
                }
            }
        }
        if parsed.len() != pairs.len() {
            return Err(Error::Argument(format!(
                "{} labels for {} pairs",
                parsed.len(),
                pairs.len()
            )));
        }
        for (p, l) in pairs.iter_mut().zip(parsed) {
            p.label = l;
        }
    }
    Ok((pairs, has_labels))
}

/// Corpus-level counts and moments.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DatasetStats {
    pub n_lemmas: usize,
    pub n_senses: usize,
    pub n_examples: usize,
    pub mean_examples_per_sense: f64,
    pub std_examples_per_sense: f64,
    pub mean_senses_per_lemma: f64,
    pub std_senses_per_lemma: f64,
    pub mean_examples_per_lemma: f64,
    pub std_examples_per_lemma: f64,
    /// Set when the dataset was empty and every figure is zero.
    pub empty: bool,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Exact counts plus population-convention means and standard deviations.
pub fn dataset_stats(ds: &LexiconDataset) -> DatasetStats {
    if ds.is_empty() {
        return DatasetStats { empty: true, ..DatasetStats::default() };
    }
    let mut per_sense = Vec::new();
    let mut per_lemma_senses = Vec::new();
    let mut per_lemma_examples = Vec::new();
    for lemma in ds.lemmas() {
        let senses = ds.senses_of(lemma).unwrap();
        per_lemma_senses.push(senses.len() as f64);
        per_lemma_examples.push(senses.values().map(|ids| ids.len()).sum::<usize>() as f64);
        for ids in senses.values() {
            per_sense.push(ids.len() as f64);
        }
    }
    let (mes, ses) = mean_std(&per_sense);
    let (msl, ssl) = mean_std(&per_lemma_senses);
    let (mel, sel) = mean_std(&per_lemma_examples);
    DatasetStats {
        n_lemmas: ds.n_lemmas(),
        n_senses: ds.n_senses(),
        n_examples: ds.len(),
        mean_examples_per_sense: mes,
        std_examples_per_sense: ses,
        mean_senses_per_lemma: msl,
        std_senses_per_lemma: ssl,
        mean_examples_per_lemma: mel,
        std_examples_per_lemma: sel,
        empty: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::BufReader;

    fn ex(lemma: &str, sense: &str, sentence: &str, start: usize, end: usize) -> SenseExample {
        SenseExample::new(lemma, "verb", sense, sentence, Span::new(start, end)).unwrap()
    }

    fn jsonl(records: &[(&str, &str, &str, usize, usize)]) -> String {
        records
            .iter()
            .map(|(lemma, sense, sentence, s, e)| {
                format!(
                    r#"{{"lemma":"{lemma}","pos":"verb","sense_id":"{sense}","sentence":"{sentence}","target_start":{s},"target_end":{e}}}"#
                )
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    #[test]
    fn parses_minimal_valid_record() {
        let input = jsonl(&[("run", "run_1", "I run fast.", 2, 5)]);
        let (ds, report) = parse_lexicon(BufReader::new(input.as_bytes())).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.n_lemmas(), 1);
        assert_eq!(ds.n_senses(), 1);
        assert_eq!(ds.examples()[0].surface_form(), "run");
        assert_eq!(report.accepted, 1);
        assert!(report.rejected.is_empty());
    }

    #[test]
    fn rejects_out_of_bounds_span() {
        let input = jsonl(&[("run", "run_1", "I run fast.", 2, 50)]);
        let (ds, report) = parse_lexicon(BufReader::new(input.as_bytes())).unwrap();
        assert_eq!(ds.len(), 0);
        assert_eq!(report.rejected.len(), 1);
        assert_eq!(report.rejected[0].line, 1);
    }

    #[test]
    fn index_is_consistent_with_examples() {
        let input = jsonl(&[
            ("run", "run_1", "I run fast.", 2, 5),
            ("run", "run_1", "We run home.", 3, 6),
            ("run", "run_2", "Rivers run dry.", 7, 10),
        ]);
        let (ds, _) = parse_lexicon(BufReader::new(input.as_bytes())).unwrap();
        let senses = ds.senses_of("run").unwrap();
        assert_eq!(senses.len(), 2);
        assert_eq!(senses["run_1"], vec![0, 1]);
        assert_eq!(senses["run_2"], vec![2]);
        // Re-scan the examples and compare against the index.
        for (id, ex) in ds.examples().iter().enumerate() {
            assert!(ds.senses_of(&ex.lemma).unwrap()[&ex.sense_id].contains(&id));
        }
    }

    #[test]
    fn malformed_json_is_a_hard_error_with_line() {
        let input = format!("{}\nnot json", jsonl(&[("run", "run_1", "I run fast.", 2, 5)]));
        match parse_lexicon(BufReader::new(input.as_bytes())) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(parse_lexicon(BufReader::new(&b""[..])), Err(Error::EmptyDataset)));
    }

    #[test]
    fn duplicate_triples_are_rejected() {
        let input = jsonl(&[
            ("run", "run_1", "I run fast.", 2, 5),
            ("run", "run_2", "I run fast.", 2, 5),
        ]);
        let (ds, report) = parse_lexicon(BufReader::new(input.as_bytes())).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(report.rejected.len(), 1);
    }

    fn lemma_with_senses(lemma: &str, n_senses: usize, examples_per_sense: usize) -> Vec<SenseExample> {
        let mut out = Vec::new();
        for s in 0..n_senses {
            for e in 0..examples_per_sense {
                let sentence = format!("context {e} for {lemma} sense {s} here");
                let start = char_count(&format!("context {e} for "));
                out.push(ex(
                    lemma,
                    &format!("{lemma}_{s}"),
                    &sentence,
                    start,
                    start + char_count(lemma),
                ));
            }
        }
        out
    }

    #[test]
    fn filter_applies_all_three_rules() {
        let mut examples = Vec::new();
        examples.extend(lemma_with_senses("manyfold", 11, 1)); // 11 senses -> out
        examples.extend(lemma_with_senses("lonely", 1, 1)); // 1 sense, 1 example -> out
        examples.extend(lemma_with_senses("give up", 2, 2)); // multiword -> out
        examples.extend(lemma_with_senses("keeper", 1, 2)); // 1 sense, 2 examples -> kept
        let ds = LexiconDataset::from_examples(examples).unwrap();
        let filtered = filter_dataset(&ds, &FilterPolicy::default());
        let lemmas: Vec<&str> = filtered.lemmas().collect();
        assert_eq!(lemmas, vec!["keeper"]);
    }

    #[test]
    fn filter_rules_are_individually_configurable() {
        let ds = LexiconDataset::from_examples(lemma_with_senses("give up", 2, 2)).unwrap();
        let policy = FilterPolicy { drop_multiword: false, ..FilterPolicy::default() };
        assert_eq!(filter_dataset(&ds, &policy).n_lemmas(), 1);
        let ds = LexiconDataset::from_examples(lemma_with_senses("manyfold", 11, 1)).unwrap();
        let policy = FilterPolicy { sense_range: None, ..FilterPolicy::default() };
        assert_eq!(filter_dataset(&ds, &policy).n_lemmas(), 1);
        let ds = LexiconDataset::from_examples(lemma_with_senses("lonely", 1, 1)).unwrap();
        let policy =
            FilterPolicy { drop_single_sense_single_example: false, ..FilterPolicy::default() };
        assert_eq!(filter_dataset(&ds, &policy).n_lemmas(), 1);
    }

    #[test]
    fn sentence_exclusion_matches_after_whitespace_normalization() {
        let ds = LexiconDataset::from_examples(lemma_with_senses("keeper", 1, 2)).unwrap();
        let sentence = ds.examples()[0].sentence.replace(' ', "  ");
        let excluded: HashSet<String> = [normalize_whitespace(&sentence)].into();
        let cleaned = remove_sentences(&ds, &excluded);
        assert_eq!(cleaned.len(), ds.len() - 1);
    }

    fn many_lemma_dataset(n: usize) -> LexiconDataset {
        let mut examples = Vec::new();
        for i in 0..n {
            examples.extend(lemma_with_senses(&format!("lemma{i}"), 2, 2));
        }
        LexiconDataset::from_examples(examples).unwrap()
    }

    #[test]
    fn split_sizes_track_ratios() {
        let ds = many_lemma_dataset(100);
        let bundle = split_by_lemma(&ds, (0.9, 0.05, 0.05), 7).unwrap();
        assert!((89..=91).contains(&bundle.train.n_lemmas()), "{}", bundle.train.n_lemmas());
        assert!((4..=6).contains(&bundle.dev.n_lemmas()));
        assert!((4..=6).contains(&bundle.test.n_lemmas()));
        let train: HashSet<_> = bundle.train.lemmas().map(str::to_string).collect();
        let dev: HashSet<_> = bundle.dev.lemmas().map(str::to_string).collect();
        let test: HashSet<_> = bundle.test.lemmas().map(str::to_string).collect();
        assert!(train.is_disjoint(&dev));
        assert!(train.is_disjoint(&test));
        assert!(dev.is_disjoint(&test));
        assert_eq!(bundle.train.len() + bundle.dev.len() + bundle.test.len(), ds.len());
    }

    #[test]
    fn degenerate_ratio_puts_everything_in_train() {
        let ds = many_lemma_dataset(5);
        let bundle = split_by_lemma(&ds, (1.0, 0.0, 0.0), 3).unwrap();
        assert_eq!(bundle.train.len(), ds.len());
        assert!(bundle.dev.is_empty());
        assert!(bundle.test.is_empty());
    }

    #[test]
    fn split_is_deterministic_per_seed() {
        let ds = many_lemma_dataset(30);
        let a = split_by_lemma(&ds, (0.8, 0.1, 0.1), 11).unwrap();
        let b = split_by_lemma(&ds, (0.8, 0.1, 0.1), 11).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.dev, b.dev);
        assert_eq!(a.test, b.test);
        let c = split_by_lemma(&ds, (0.8, 0.1, 0.1), 12).unwrap();
        assert!(a.train != c.train || a.dev != c.dev || a.test != c.test);
    }

    #[test]
    fn too_few_lemmas_is_a_split_error() {
        let ds = many_lemma_dataset(2);
        assert!(matches!(split_by_lemma(&ds, (0.8, 0.1, 0.1), 1), Err(Error::Split(_))));
        assert!(split_by_lemma(&ds, (0.5, 0.5, 0.0), 1).is_ok());
    }

    #[test]
    fn forced_pair_combinatorics() {
        // Lemma with senses A (2 examples) and B (1): exactly one positive and
        // two possible negatives.
        let examples = vec![
            ex("run", "A", "alpha run one", 6, 9),
            ex("run", "A", "beta run two", 5, 8),
            ex("run", "B", "gamma run three", 6, 9),
        ];
        let ds = LexiconDataset::from_examples(examples).unwrap();
        let set = build_wic_pairs(&ds, 2, 5).unwrap();
        assert_eq!(set.pairs.len(), 2);
        assert!(!set.exhausted);
        let pos: Vec<_> = set.pairs.iter().filter(|p| p.label).collect();
        let neg: Vec<_> = set.pairs.iter().filter(|p| !p.label).collect();
        assert_eq!(pos.len(), 1);
        assert_eq!(neg.len(), 1);
        assert!(pos[0].sentence1.contains("run") && pos[0].sentence2.contains("run"));
    }

    #[test]
    fn single_sense_dataset_exhausts_negatives() {
        let ds = LexiconDataset::from_examples(lemma_with_senses("keeper", 1, 4)).unwrap();
        let set = build_wic_pairs(&ds, 4, 9).unwrap();
        assert!(set.exhausted);
        assert!(set.pairs.iter().all(|p| p.label));
        assert_eq!(set.pairs.len(), 2);
    }

    #[test]
    fn odd_pair_count_is_an_argument_error() {
        let ds = many_lemma_dataset(3);
        assert!(build_wic_pairs(&ds, 3, 1).is_err());
    }

    #[test]
    fn pair_rows_with_bad_spans_are_parse_errors() {
        let row = "run\tverb\t0:3/2:40\tthe run\tanother run here\n";
        let got = read_wic_pairs(BufReader::new(row.as_bytes()), None::<BufReader<&[u8]>>);
        assert!(matches!(got, Err(Error::Parse { line: 1, .. })), "{got:?}");
    }

    #[test]
    fn pair_tsv_round_trip() {
        let ds = many_lemma_dataset(10);
        let set = build_wic_pairs(&ds, 20, 13).unwrap();
        let mut data = Vec::new();
        let mut labels = Vec::new();
        write_wic_pairs(&mut data, &mut labels, &set.pairs).unwrap();
        let (back, has_labels) = read_wic_pairs(
            BufReader::new(data.as_slice()),
            Some(BufReader::new(labels.as_slice())),
        )
        .unwrap();
        assert!(has_labels);
        assert_eq!(back, set.pairs);
    }

    #[test]
    fn stats_hand_example() {
        // 1 lemma, 2 senses with 1 and 3 examples.
        let mut examples = Vec::new();
        for (sense, n) in [("s0", 1usize), ("s1", 3)] {
            for e in 0..n {
                let sentence = format!("number {e} sentence with keeper in it for {sense}");
                let start = char_count(&format!("number {e} sentence with "));
                examples.push(ex("keeper", sense, &sentence, start, start + 6));
            }
        }
        let ds = LexiconDataset::from_examples(examples).unwrap();
        let stats = dataset_stats(&ds);
        assert_eq!(stats.n_lemmas, 1);
        assert_eq!(stats.n_senses, 2);
        assert_eq!(stats.n_examples, 4);
        assert!((stats.mean_examples_per_sense - 2.0).abs() < 1e-12);
        assert!((stats.mean_senses_per_lemma - 2.0).abs() < 1e-12);
        assert!((stats.mean_examples_per_lemma - 4.0).abs() < 1e-12);
        assert!((stats.std_examples_per_sense - 1.0).abs() < 1e-12); // population
    }

    #[test]
    fn empty_stats_are_flagged() {
        let stats = dataset_stats(&LexiconDataset::default());
        assert!(stats.empty);
        assert_eq!(stats.n_examples, 0);
    }

    #[test]
    fn unicode_spans_slice_by_character() {
        let e = ex("héler", "h_1", "où héler déjà", 3, 8);
        assert_eq!(e.surface_form(), "héler");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn split_partitions_lemmas(n in 3usize..25, seed in 0u64..1000) {
            let ds = many_lemma_dataset(n);
            let bundle = split_by_lemma(&ds, (0.6, 0.2, 0.2), seed).unwrap();
            let mut all: Vec<String> = bundle
                .train
                .lemmas()
                .chain(bundle.dev.lemmas())
                .chain(bundle.test.lemmas())
                .map(str::to_string)
                .collect();
            all.sort();
            let mut expected: Vec<String> = ds.lemmas().map(str::to_string).collect();
            expected.sort();
            prop_assert_eq!(all, expected);
            prop_assert_eq!(
                bundle.train.len() + bundle.dev.len() + bundle.test.len(),
                ds.len()
            );
        }

        #[test]
        fn filter_is_idempotent(n_senses in 1usize..13, per_sense in 1usize..4) {
            let mut examples = lemma_with_senses("alpha", n_senses, per_sense);
            examples.extend(lemma_with_senses("beta", 1, 1));
            let ds = LexiconDataset::from_examples(examples).unwrap();
            let once = filter_dataset(&ds, &FilterPolicy::default());
            let twice = filter_dataset(&once, &FilterPolicy::default());
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn pairs_are_balanced_and_negatives_cross_senses(
            n in 2usize..8,
            n_pairs in (1usize..10).prop_map(|x| x * 2),
            seed in 0u64..500,
        ) {
            let ds = many_lemma_dataset(n);
            let set = build_wic_pairs(&ds, n_pairs, seed).unwrap();
            let n_pos = set.pairs.iter().filter(|p| p.label).count();
            let n_neg = set.pairs.len() - n_pos;
            if !set.exhausted {
                prop_assert_eq!(set.pairs.len(), n_pairs);
                prop_assert_eq!(n_pos, n_neg);
            }
            for p in &set.pairs {
                // Spans must be valid in their sentences.
                prop_assert!(char_slice(&p.sentence1, p.span1).is_some());
                prop_assert!(char_slice(&p.sentence2, p.span2).is_some());
            }
        }

        #[test]
        fn lexicon_round_trips(n in 1usize..10) {
            let ds = many_lemma_dataset(n);
            let mut buf = Vec::new();
            write_lexicon(&mut buf, &ds).unwrap();
            let (back, report) = parse_lexicon(BufReader::new(buf.as_slice())).unwrap();
            prop_assert_eq!(back, ds);
            prop_assert!(report.rejected.is_empty());
        }
    }
}
