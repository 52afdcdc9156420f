//! Deterministic synthetic corpora with planted sense and frame structure.
//!
//! Every frame owns a pool of context words; every sense of a lemma is
//! assigned to a frame (distinct frames within one lemma) and its example
//! sentences draw their context from that frame's pool. Senses of the same
//! frame therefore share context statistics across lemmas, which is what the
//! toy encoder picks up: within a lemma the senses separate, and across
//! lemmas the senses of one frame group together.

use std::collections::{BTreeMap, HashSet};

use rand::RngExt;
use rand::SeedableRng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::frames::FrameInstance;
use crate::hashing::derive_seed;
use crate::lexicon::{LexiconDataset, SenseExample, Span, char_count};

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n_lemmas: usize,
    /// Inclusive range of senses per lemma.
    pub senses_per_lemma: (usize, usize),
    /// Inclusive range of example sentences per sense.
    pub examples_per_sense: (usize, usize),
    pub n_frames: usize,
    /// Distinct context words in each frame's pool.
    pub pool_size: usize,
    /// Context words sampled into each sentence.
    pub context_words: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_lemmas: 20,
            senses_per_lemma: (2, 3),
            examples_per_sense: (6, 10),
            n_frames: 10,
            pool_size: 10,
            context_words: 16,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub dataset: LexiconDataset,
    pub instances: Vec<FrameInstance>,
    /// sense_id -> frame id.
    pub frame_of_sense: BTreeMap<String, String>,
    /// lemma -> number of planted senses.
    pub senses_of_lemma: BTreeMap<String, usize>,
}

fn random_word(rng: &mut ChaCha8Rng, len: usize, taken: &mut HashSet<String>) -> String {
    loop {
        let w: String = (0..len).map(|_| (b'a' + rng.random_range(0..26u8)) as char).collect();
        if taken.insert(w.clone()) {
            return w;
        }
    }
}

/// Generate a corpus; fully determined by the config.
pub fn generate(cfg: &SynthConfig) -> SynthCorpus {
    assert!(cfg.n_frames >= 1 && cfg.n_lemmas >= 1);
    assert!(cfg.senses_per_lemma.0 >= 1 && cfg.senses_per_lemma.0 <= cfg.senses_per_lemma.1);
    assert!(
        cfg.senses_per_lemma.1 <= cfg.n_frames,
        "a lemma's senses need distinct frames, so senses_per_lemma must fit in n_frames"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "synth"));
    let mut taken = HashSet::new();

    let pools: Vec<Vec<String>> = (0..cfg.n_frames)
        .map(|_| (0..cfg.pool_size).map(|_| random_word(&mut rng, 6, &mut taken)).collect())
        .collect();
    let frame_names: Vec<String> = (0..cfg.n_frames).map(|f| format!("frame{f:02}")).collect();

    let mut examples = Vec::new();
    let mut instances = Vec::new();
    let mut frame_of_sense = BTreeMap::new();
    let mut senses_of_lemma = BTreeMap::new();
    let mut seen_sentences = HashSet::new();

    for _ in 0..cfg.n_lemmas {
        let lemma = random_word(&mut rng, 5, &mut taken);
        let n_senses = rng.random_range(cfg.senses_per_lemma.0..=cfg.senses_per_lemma.1);
        let mut frames: Vec<usize> = (0..cfg.n_frames).collect();
        frames.shuffle(&mut rng);
        frames.truncate(n_senses);
        senses_of_lemma.insert(lemma.clone(), n_senses);

        for (s, &frame) in frames.iter().enumerate() {
            let sense_id = format!("{lemma}.s{s}");
            frame_of_sense.insert(sense_id.clone(), frame_names[frame].clone());
            let n_examples =
                rng.random_range(cfg.examples_per_sense.0..=cfg.examples_per_sense.1);
            for _ in 0..n_examples {
                // Same-sense sentences share their exact word composition
                // (drawn without replacement) and differ only in word order
                // and target position, so the planted clusters are clean.
                let take = cfg.context_words.min(cfg.pool_size);
                let (sentence, span) = loop {
                    let picked = rand::seq::index::sample(&mut rng, cfg.pool_size, take);
                    let mut words: Vec<String> =
                        picked.iter().map(|i| pools[frame][i].clone()).collect();
                    words.shuffle(&mut rng);
                    let target_pos = rng.random_range(0..=words.len());
                    words.insert(target_pos, lemma.clone());
                    let sentence = words.join(" ");
                    if !seen_sentences.insert(sentence.clone()) {
                        continue;
                    }
                    let prefix: usize =
                        words[..target_pos].iter().map(|w| char_count(w) + 1).sum();
                    break (sentence, Span::new(prefix, prefix + char_count(&lemma)));
                };
                examples.push(
                    SenseExample::new(&lemma, "verb", &sense_id, &sentence, span)
                        .expect("generated example is valid"),
                );
                instances.push(FrameInstance {
                    lemma: lemma.clone(),
                    sentence,
                    target_span: span,
                    gold_lu: sense_id.clone(),
                    gold_frame: frame_names[frame].clone(),
                });
            }
        }
    }

    let dataset = LexiconDataset::from_examples(examples).expect("generated corpus is valid");
    SynthCorpus { dataset, instances, frame_of_sense, senses_of_lemma }
}
