//! A deterministic, trainable reference encoder for desk-scale runs.
//!
//! Subtokens are lowercased alphanumeric chunks of at most four characters
//! (punctuation becomes single-character pieces). Layer 0 is a unit-norm
//! vector derived from a stable hash of the piece text; each fixed hidden
//! layer mixes every piece with the mean of the others and passes the result
//! through a frozen random linear map and tanh; the last layer applies a
//! trainable square matrix. Everything is a pure function of the construction
//! seed and the trained weights, so encodings are reproducible bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{Encoder, LayerStack, PieceSpan, TrainableEncoder};
use crate::error::{Error, Result};
use crate::hashing::{derive_seed, fnv1a64};
use crate::lexicon::Span;
use crate::vecmath::{matvec, normalize};

const MAX_PIECE_CHARS: usize = 4;
const MASK_PIECE: &str = "[MASK]";

#[derive(Debug, Clone)]
pub struct ToyEncoder {
    dim: usize,
    hidden_layers: usize,
    seed: u64,
    ctx_weight: f64,
    /// Frozen mixing matrices for layers 1..hidden_layers, row-major dim x dim.
    mix: Vec<Vec<f64>>,
    /// Trainable last-layer map, row-major dim x dim.
    head: Vec<f64>,
    adam_m: Vec<f64>,
    adam_v: Vec<f64>,
    adam_t: u64,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    dim: usize,
    hidden_layers: usize,
    seed: u64,
    ctx_weight: f64,
    head: Vec<f64>,
    adam_m: Vec<f64>,
    adam_v: Vec<f64>,
    adam_t: u64,
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; clamp away from zero to keep ln finite.
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

impl ToyEncoder {
    /// Build a fresh encoder with `hidden_layers >= 1` layers of width `dim`.
    pub fn new(dim: usize, hidden_layers: usize, seed: u64) -> Self {
        assert!(dim >= 1 && hidden_layers >= 1, "dim and hidden_layers must be at least 1");
        let mut mix = Vec::with_capacity(hidden_layers - 1);
        for layer in 1..hidden_layers {
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("toy-mix-{layer}")));
            let scale = 1.0 / (dim as f64).sqrt();
            mix.push((0..dim * dim).map(|_| gaussian(&mut rng) * scale).collect());
        }
        let mut head = vec![0.0; dim * dim];
        for i in 0..dim {
            head[i * dim + i] = 1.0;
        }
        ToyEncoder {
            dim,
            hidden_layers,
            seed,
            ctx_weight: 0.5,
            mix,
            head,
            adam_m: vec![0.0; dim * dim],
            adam_v: vec![0.0; dim * dim],
            adam_t: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Subtoken texts with offsets; the trait method drops the texts.
    fn pieces(&self, sentence: &str) -> Vec<(String, PieceSpan)> {
        let chars: Vec<char> = sentence.chars().collect();
        let mut out = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if c.is_whitespace() {
                i += 1;
            } else if c.is_alphanumeric() {
                let start = i;
                while i < chars.len() && chars[i].is_alphanumeric() {
                    i += 1;
                }
                let mut s = start;
                while s < i {
                    let e = (s + MAX_PIECE_CHARS).min(i);
                    let text: String = chars[s..e].iter().collect::<String>().to_lowercase();
                    out.push((text, PieceSpan { start: s, end: e }));
                    s = e;
                }
            } else {
                out.push((c.to_string(), PieceSpan { start: i, end: i + 1 }));
                i += 1;
            }
        }
        out
    }

    fn static_vec(&self, piece: &str) -> Vec<f64> {
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(self.seed, "toy-static") ^ fnv1a64(piece.as_bytes()));
        let mut v: Vec<f64> = (0..self.dim).map(|_| gaussian(&mut rng)).collect();
        normalize(&mut v);
        v
    }

    /// All layers for an explicit piece list.
    ///
    /// Each fixed layer blends a piece with the unit-normalized mean of the
    /// other pieces (weight `ctx_weight`), then applies the frozen linear map
    /// and tanh. Context therefore enters on equal footing with the piece's
    /// own identity regardless of sentence length.
    fn forward_pieces(&self, pieces: &[(String, PieceSpan)]) -> LayerStack {
        let n = pieces.len();
        let mut layers = Vec::with_capacity(self.hidden_layers + 1);
        let h0: Vec<Vec<f64>> = pieces.iter().map(|(text, _)| self.static_vec(text)).collect();
        layers.push(h0);
        for m in &self.mix {
            let prev = layers.last().unwrap();
            let next: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    let mut pre = prev[i].clone();
                    if n > 1 {
                        let mut ctx = vec![0.0; self.dim];
                        for (j, other) in prev.iter().enumerate() {
                            if j != i {
                                for (c, x) in ctx.iter_mut().zip(other) {
                                    *c += x;
                                }
                            }
                        }
                        normalize(&mut ctx);
                        for (p, c) in pre.iter_mut().zip(&ctx) {
                            *p = (1.0 - self.ctx_weight) * *p + self.ctx_weight * c;
                        }
                    }
                    let mut h = matvec(m, self.dim, self.dim, &pre);
                    for x in h.iter_mut() {
                        *x = x.tanh();
                    }
                    normalize(&mut h);
                    h
                })
                .collect();
            layers.push(next);
        }
        let penult = layers.last().unwrap();
        let last: Vec<Vec<f64>> =
            penult.iter().map(|h| matvec(&self.head, self.dim, self.dim, h)).collect();
        layers.push(last);
        LayerStack { layers }
    }

    /// Pieces with the target span collapsed to one mask placeholder.
    fn masked_pieces(
        &self,
        sentence: &str,
        span: Span,
    ) -> Result<(Vec<(String, PieceSpan)>, usize)> {
        let pieces = self.pieces(sentence);
        let first = pieces.iter().position(|(_, p)| p.overlaps(span));
        let Some(first) = first else {
            return Err(Error::Alignment(format!(
                "span [{}, {}) maps to zero subtokens",
                span.start, span.end
            )));
        };
        let last = pieces.iter().rposition(|(_, p)| p.overlaps(span)).unwrap();
        let mut out = pieces[..first].to_vec();
        out.push((MASK_PIECE.to_string(), PieceSpan { start: span.start, end: span.end }));
        out.extend_from_slice(&pieces[last + 1..]);
        Ok((out, first))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let record = Checkpoint {
            dim: self.dim,
            hidden_layers: self.hidden_layers,
            seed: self.seed,
            ctx_weight: self.ctx_weight,
            head: self.head.clone(),
            adam_m: self.adam_m.clone(),
            adam_v: self.adam_v.clone(),
            adam_t: self.adam_t,
        };
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, &record)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let record: Checkpoint = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        let expected = record.dim * record.dim;
        if record.head.len() != expected
            || record.adam_m.len() != expected
            || record.adam_v.len() != expected
        {
            return Err(Error::Format("checkpoint weight shapes are inconsistent".into()));
        }
        let mut enc = ToyEncoder::new(record.dim, record.hidden_layers, record.seed);
        enc.ctx_weight = record.ctx_weight;
        enc.head = record.head;
        enc.adam_m = record.adam_m;
        enc.adam_v = record.adam_v;
        enc.adam_t = record.adam_t;
        Ok(enc)
    }
}

impl Encoder for ToyEncoder {
    fn layer_count(&self) -> usize {
        self.hidden_layers
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn tokenize(&self, sentence: &str) -> Vec<PieceSpan> {
        self.pieces(sentence).into_iter().map(|(_, span)| span).collect()
    }

    fn forward(&self, sentence: &str) -> Result<LayerStack> {
        Ok(self.forward_pieces(&self.pieces(sentence)))
    }

    fn forward_masked(&self, sentence: &str, span: Span) -> Result<(LayerStack, usize)> {
        let (pieces, mask_idx) = self.masked_pieces(sentence, span)?;
        Ok((self.forward_pieces(&pieces), mask_idx))
    }
}

/// Penultimate-layer target means, one per example; all the head update needs.
pub struct ToyTape {
    penult_means: Vec<Vec<f64>>,
}

impl TrainableEncoder for ToyEncoder {
    type Tape = ToyTape;

    fn forward_targets(&self, examples: &[(&str, Span)]) -> Result<(Vec<Vec<f64>>, ToyTape)> {
        let mut embeddings = Vec::with_capacity(examples.len());
        let mut penult_means = Vec::with_capacity(examples.len());
        for &(sentence, span) in examples {
            let pieces = self.pieces(sentence);
            let hit: Vec<usize> = pieces
                .iter()
                .enumerate()
                .filter(|(_, (_, p))| p.overlaps(span))
                .map(|(i, _)| i)
                .collect();
            if hit.is_empty() {
                return Err(Error::Alignment(format!(
                    "span [{}, {}) maps to zero subtokens",
                    span.start, span.end
                )));
            }
            let stack = self.forward_pieces(&pieces);
            let penult = &stack.layers[self.hidden_layers - 1];
            let mut mean = vec![0.0; self.dim];
            for &i in &hit {
                for (m, x) in mean.iter_mut().zip(&penult[i]) {
                    *m += x;
                }
            }
            for m in mean.iter_mut() {
                *m /= hit.len() as f64;
            }
            // Last layer is linear, so the subtoken average commutes with it.
            embeddings.push(matvec(&self.head, self.dim, self.dim, &mean));
            penult_means.push(mean);
        }
        Ok((embeddings, ToyTape { penult_means }))
    }

    fn update_step(&mut self, tape: ToyTape, grads: &[Vec<f64>], learning_rate: f64) -> Result<()> {
        if grads.len() != tape.penult_means.len() {
            return Err(Error::Argument(format!(
                "{} gradients for {} forwarded examples",
                grads.len(),
                tape.penult_means.len()
            )));
        }
        let d = self.dim;
        let mut grad_w = vec![0.0; d * d];
        for (g, h) in grads.iter().zip(&tape.penult_means) {
            if g.len() != d {
                return Err(Error::Argument("gradient dimension mismatch".into()));
            }
            for r in 0..d {
                for c in 0..d {
                    grad_w[r * d + c] += g[r] * h[c];
                }
            }
        }
        // Adam with the usual constants.
        let (b1, b2, eps) = (0.9, 0.999, 1e-8);
        self.adam_t += 1;
        let t = self.adam_t as f64;
        for (i, &g) in grad_w.iter().enumerate() {
            self.adam_m[i] = b1 * self.adam_m[i] + (1.0 - b1) * g;
            self.adam_v[i] = b2 * self.adam_v[i] + (1.0 - b2) * g * g;
            let m_hat = self.adam_m[i] / (1.0 - b1.powf(t));
            let v_hat = self.adam_v[i] / (1.0 - b2.powf(t));
            self.head[i] -= learning_rate * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}
