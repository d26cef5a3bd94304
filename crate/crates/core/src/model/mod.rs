//! The scoring model: embeddings, a bidirectional recurrent encoder, and a
//! per-token scoring head, trained from scratch.
//!
//! Each token id selects an embedding row. Two independent GRU directions
//! scan the embedded sequence left-to-right and right-to-left; for token `t`
//! their states are concatenated with the token's lexical feature vector and
//! mapped by a single linear unit to a logit, whose sigmoid is the emphasis
//! score. Word scores are span means of token scores.
//!
//! Gradients are computed by exact reverse-mode differentiation, implemented
//! by hand and checked against finite differences in the test suites; the
//! gradient of a model is carried in a second [`ModelParams`] of the same
//! shape.

mod adam;
mod gru;
mod matrix;

pub use adam::{Adam, AdamConfig};
pub use gru::{GruStates, GruWeights};
pub use matrix::Matrix;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FEATURE_DIM;
use crate::objectives::sigmoid;
use crate::rng::{self, stream};
use crate::subword::{aggregate_scores, SubwordSequence};

/// Uniform init range for embeddings and recurrent maps.
const INIT_SCALE: f64 = 0.1;

/// Layer sizes. The head input is `2 · d_hidden + FEATURE_DIM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub vocab_size: usize,
    pub d_embed: usize,
    pub d_hidden: usize,
}

impl ModelDims {
    pub fn head_dim(&self) -> usize {
        2 * self.d_hidden + FEATURE_DIM
    }

    pub fn param_count(&self) -> usize {
        let gru =
            3 * (self.d_hidden * self.d_embed + self.d_hidden * self.d_hidden + self.d_hidden);
        self.vocab_size * self.d_embed + 2 * gru + self.head_dim() + 1
    }
}

/// All trainable parameters; doubles as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    dims: ModelDims,
    /// `vocab_size × d_embed`; row `i` embeds token id `i`.
    pub embedding: Matrix,
    /// Left-to-right direction.
    pub fwd: GruWeights,
    /// Right-to-left direction (runs over the reversed sequence).
    pub bwd: GruWeights,
    /// Head weights over `[fwd_state, bwd_state, features]`.
    pub head_w: Vec<f64>,
    pub head_b: f64,
}

/// Output of a forward pass over one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Raw per-token head outputs.
    pub logits: Vec<f64>,
    /// `sigmoid(logit)` per token.
    pub scores: Vec<f64>,
    /// Span-averaged per-word scores, aligned with the source sentence.
    pub word_scores: Vec<f64>,
}

impl ModelParams {
    /// Fresh parameters: embeddings and recurrent maps uniform in
    /// `[−0.1, 0.1]` from a dedicated seed stream, gate biases and the whole
    /// head at zero — so an untrained model scores every token exactly 0.5.
    pub fn init(vocab_size: usize, d_embed: usize, d_hidden: usize, seed: u64) -> Result<Self> {
        if vocab_size == 0 || d_embed == 0 || d_hidden == 0 {
            return Err(Error::Argument(format!(
                "layer sizes must be positive (vocab {vocab_size}, embed {d_embed}, hidden {d_hidden})"
            )));
        }
        let dims = ModelDims {
            vocab_size,
            d_embed,
            d_hidden,
        };
        let mut rng = rng::seeded_rng(seed, &[stream::INIT]);
        use rand::Rng;
        let embedding = Matrix::from_fn(vocab_size, d_embed, |_, _| {
            rng.random_range(-INIT_SCALE..=INIT_SCALE)
        });
        let fwd = GruWeights::init(d_embed, d_hidden, INIT_SCALE, &mut rng);
        let bwd = GruWeights::init(d_embed, d_hidden, INIT_SCALE, &mut rng);
        Ok(ModelParams {
            dims,
            embedding,
            fwd,
            bwd,
            head_w: vec![0.0; dims.head_dim()],
            head_b: 0.0,
        })
    }

    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    pub fn param_count(&self) -> usize {
        self.dims.param_count()
    }

    /// Same shape, all zeros — the starting point for gradient accumulation.
    pub fn zeros_like(&self) -> ModelParams {
        ModelParams {
            dims: self.dims,
            embedding: Matrix::zeros(self.dims.vocab_size, self.dims.d_embed),
            fwd: GruWeights::zeros(self.dims.d_embed, self.dims.d_hidden),
            bwd: GruWeights::zeros(self.dims.d_embed, self.dims.d_hidden),
            head_w: vec![0.0; self.dims.head_dim()],
            head_b: 0.0,
        }
    }

    /// Elementwise `self += other`; shapes must match.
    pub fn add_assign(&mut self, other: &ModelParams) {
        assert_eq!(self.dims, other.dims, "parameter shape mismatch");
        self.embedding.add_assign(&other.embedding);
        self.fwd.zip_mut(&other.fwd, &mut |a, b| *a += b);
        self.bwd.zip_mut(&other.bwd, &mut |a, b| *a += b);
        for (a, &b) in self.head_w.iter_mut().zip(&other.head_w) {
            *a += b;
        }
        self.head_b += other.head_b;
    }

    /// Elementwise `self *= factor`.
    pub fn scale(&mut self, factor: f64) {
        self.visit_mut(&mut |p| *p *= factor);
    }

    /// Visit every parameter in canonical order: embedding row-major, then
    /// the forward and backward recurrent weights, then the head.
    pub fn visit(&self, f: &mut impl FnMut(f64)) {
        for &x in self.embedding.data() {
            f(x);
        }
        self.fwd.visit(f);
        self.bwd.visit(f);
        for &x in &self.head_w {
            f(x);
        }
        f(self.head_b);
    }

    /// Mutably visit every parameter in the same canonical order.
    pub fn visit_mut(&mut self, f: &mut impl FnMut(&mut f64)) {
        for x in self.embedding.data_mut() {
            f(x);
        }
        self.fwd.visit_mut(f);
        self.bwd.visit_mut(f);
        for x in &mut self.head_w {
            f(x);
        }
        f(&mut self.head_b);
    }

    /// Flatten to a vector in canonical order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.visit(&mut |x| out.push(x));
        out
    }

    /// Rebuild from a canonical-order vector.
    pub fn from_flat(dims: ModelDims, flat: &[f64]) -> Result<Self> {
        if flat.len() != dims.param_count() {
            return Err(Error::Validation(format!(
                "expected {} parameters, got {}",
                dims.param_count(),
                flat.len()
            )));
        }
        let mut proto = ModelParams {
            dims,
            embedding: Matrix::zeros(dims.vocab_size, dims.d_embed),
            fwd: GruWeights::zeros(dims.d_embed, dims.d_hidden),
            bwd: GruWeights::zeros(dims.d_embed, dims.d_hidden),
            head_w: vec![0.0; dims.head_dim()],
            head_b: 0.0,
        };
        let mut i = 0;
        proto.visit_mut(&mut |p| {
            *p = flat[i];
            i += 1;
        });
        Ok(proto)
    }

    fn check_sequence(&self, seq: &SubwordSequence) -> Result<()> {
        if seq.is_empty() {
            return Err(Error::Argument("cannot score an empty sequence".into()));
        }
        if let Some(&id) = seq.token_ids.iter().find(|&&id| id >= self.dims.vocab_size) {
            return Err(Error::Argument(format!(
                "token id {id} is outside the vocabulary of size {}",
                self.dims.vocab_size
            )));
        }
        Ok(())
    }

    fn run_forward(&self, seq: &SubwordSequence) -> ForwardTrace {
        let t_max = seq.len();
        let xs: Vec<Vec<f64>> = seq
            .token_ids
            .iter()
            .map(|&id| self.embedding.row(id).to_vec())
            .collect();
        let xs_rev: Vec<Vec<f64>> = xs.iter().rev().cloned().collect();
        let fwd_states = self.fwd.forward(&xs);
        let bwd_states_rev = self.bwd.forward(&xs_rev);

        let d_h = self.dims.d_hidden;
        let mut logits = Vec::with_capacity(t_max);
        for t in 0..t_max {
            let mut acc = self.head_b;
            let fwd_h = &fwd_states.h[t];
            let bwd_h = &bwd_states_rev.h[t_max - 1 - t];
            for k in 0..d_h {
                acc += self.head_w[k] * fwd_h[k];
                acc += self.head_w[d_h + k] * bwd_h[k];
            }
            for (k, &v) in seq.features[t].iter().enumerate() {
                acc += self.head_w[2 * d_h + k] * v;
            }
            logits.push(acc);
        }
        ForwardTrace {
            xs,
            xs_rev,
            fwd_states,
            bwd_states_rev,
            logits,
        }
    }

    /// Score one encoded sentence.
    pub fn forward(&self, seq: &SubwordSequence) -> Result<Prediction> {
        self.check_sequence(seq)?;
        let trace = self.run_forward(seq);
        let scores: Vec<f64> = trace.logits.iter().map(|&s| sigmoid(s)).collect();
        let word_scores = aggregate_scores(seq, &scores)?;
        Ok(Prediction {
            logits: trace.logits,
            scores,
            word_scores,
        })
    }

    /// Gradient of a loss with respect to every parameter, given the loss
    /// gradient with respect to the per-token logits. Replays the forward
    /// pass internally.
    pub fn backward(&self, seq: &SubwordSequence, loss_grad: &[f64]) -> Result<ModelParams> {
        self.check_sequence(seq)?;
        if loss_grad.len() != seq.len() {
            return Err(Error::Argument(format!(
                "{} logit gradients for {} tokens",
                loss_grad.len(),
                seq.len()
            )));
        }
        let trace = self.run_forward(seq);
        let t_max = seq.len();
        let d_h = self.dims.d_hidden;
        let mut grads = self.zeros_like();

        // Head: logit_t = w · [fwd_h, bwd_h, feat] + b.
        let mut d_fwd_h = vec![vec![0.0; d_h]; t_max];
        let mut d_bwd_h_rev = vec![vec![0.0; d_h]; t_max];
        for t in 0..t_max {
            let g = loss_grad[t];
            let fwd_h = &trace.fwd_states.h[t];
            let bwd_h = &trace.bwd_states_rev.h[t_max - 1 - t];
            for k in 0..d_h {
                grads.head_w[k] += g * fwd_h[k];
                grads.head_w[d_h + k] += g * bwd_h[k];
                d_fwd_h[t][k] = g * self.head_w[k];
                d_bwd_h_rev[t_max - 1 - t][k] = g * self.head_w[d_h + k];
            }
            for (k, &v) in seq.features[t].iter().enumerate() {
                grads.head_w[2 * d_h + k] += g * v;
            }
            grads.head_b += g;
        }

        let d_xs_fwd = self
            .fwd
            .backward(&trace.xs, &trace.fwd_states, &d_fwd_h, &mut grads.fwd);
        let d_xs_rev = self.bwd.backward(
            &trace.xs_rev,
            &trace.bwd_states_rev,
            &d_bwd_h_rev,
            &mut grads.bwd,
        );

        for t in 0..t_max {
            let row = grads.embedding.row_mut(seq.token_ids[t]);
            for (slot, &v) in row.iter_mut().zip(&d_xs_fwd[t]) {
                *slot += v;
            }
            for (slot, &v) in row.iter_mut().zip(&d_xs_rev[t_max - 1 - t]) {
                *slot += v;
            }
        }
        Ok(grads)
    }
}

struct ForwardTrace {
    xs: Vec<Vec<f64>>,
    xs_rev: Vec<Vec<f64>>,
    fwd_states: GruStates,
    bwd_states_rev: GruStates,
    logits: Vec<f64>,
}

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    vocab_size: usize,
    d_embed: usize,
    d_hidden: usize,
    vocab_digest: String,
    params: Vec<f64>,
}

/// Write parameters plus the digest of the vocabulary they were trained
/// with; loading verifies shape and lets callers verify the pairing.
pub fn save_checkpoint(
    params: &ModelParams,
    vocab_digest: &str,
    path: impl AsRef<Path>,
) -> Result<()> {
    let dims = params.dims();
    let file = CheckpointFile {
        version: CHECKPOINT_VERSION,
        vocab_size: dims.vocab_size,
        d_embed: dims.d_embed,
        d_hidden: dims.d_hidden,
        vocab_digest: vocab_digest.to_string(),
        params: params.to_flat(),
    };
    let out = BufWriter::new(File::create(path.as_ref())?);
    serde_json::to_writer(out, &file)
        .map_err(|e| Error::Validation(format!("cannot serialize checkpoint: {e}")))
}

/// Load a checkpoint, returning the parameters and the stored vocabulary
/// digest.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ModelParams, String)> {
    let reader = BufReader::new(File::open(path.as_ref())?);
    let file: CheckpointFile = serde_json::from_reader(reader)
        .map_err(|e| Error::Validation(format!("malformed checkpoint: {e}")))?;
    if file.version != CHECKPOINT_VERSION {
        return Err(Error::Validation(format!(
            "unsupported checkpoint version {}",
            file.version
        )));
    }
    let dims = ModelDims {
        vocab_size: file.vocab_size,
        d_embed: file.d_embed,
        d_hidden: file.d_hidden,
    };
    if dims.vocab_size == 0 || dims.d_embed == 0 || dims.d_hidden == 0 {
        return Err(Error::Validation(
            "checkpoint declares an empty layer".into(),
        ));
    }
    let params = ModelParams::from_flat(dims, &file.params)?;
    Ok((params, file.vocab_digest))
}
