//! Word-emphasis selection at desk scale.
//!
//! Given short annotated texts where every word carries a gold emphasis
//! probability, this crate trains a small bidirectional recurrent model over
//! WordPiece-style subwords to predict those probabilities, scores the
//! predictions with the top-m set-overlap metric family, and orchestrates
//! the k-fold × multi-run protocol around it.
//!
//! Module map:
//! - [`corpus`]: data model, JSON-lines I/O, fold splitting, word-type stats
//! - [`subword`]: vocabulary induction, tokenization, alignment, aggregation
//! - [`features`]: per-word lexical 0-1 features
//! - [`model`]: embedding + bidirectional GRU + sigmoid head, exact backprop
//! - [`objectives`]: MSE, gap-weighted pairwise ranking loss, combination
//! - [`augment`]: stochastic word removal / uppercasing / sentence reversal
//! - [`evalx`]: top-m selection and the match metric family
//! - [`harness`]: training loop, cross-validation, strategy gains, ensembling

pub mod augment;
pub mod corpus;
pub mod demo;
pub mod error;
pub mod evalx;
pub mod features;
pub mod harness;
pub mod model;
pub mod objectives;
pub mod rng;
pub mod subword;

pub use error::{Error, Result};
