//! Training-time data augmentation: word removal, word uppercasing, and
//! sentence reversal, each triggered independently by its own probability.
//!
//! Transforms run in a fixed order — remove, then uppercase the survivors,
//! then maybe reverse — and always move a word and its gold value together,
//! so label alignment can never break. A removal pass that would delete
//! every word is undone; downstream consumers require non-empty sentences.
//!
//! Augmentation is for training folds only and is re-sampled fresh every
//! epoch by the trainer; validation data must never pass through here.

use rand::Rng;

use crate::corpus::{Corpus, Sentence};
use crate::error::{Error, Result};
use crate::rng::{self, stream};

/// Trigger probabilities for the three schemes. Defaults are removal 0.01,
/// uppercase 0.05, reversal 0.10.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    /// Per-word probability of deleting the word and its gold value.
    pub p_remove: f64,
    /// Per-surviving-word probability of uppercasing the word.
    pub p_upper: f64,
    /// Per-sentence probability of reversing words and gold together.
    pub p_reverse: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            p_remove: 0.01,
            p_upper: 0.05,
            p_reverse: 0.10,
        }
    }
}

impl AugmentConfig {
    pub fn new(p_remove: f64, p_upper: f64, p_reverse: f64) -> Result<Self> {
        for (name, p) in [
            ("removal", p_remove),
            ("uppercase", p_upper),
            ("reversal", p_reverse),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Argument(format!(
                    "{name} probability must lie in [0, 1], got {p}"
                )));
            }
        }
        Ok(AugmentConfig {
            p_remove,
            p_upper,
            p_reverse,
        })
    }
}

/// Produce one augmented variant of a sentence. Deterministic given the rng
/// state; the id is preserved.
pub fn augment_sentence(
    sentence: &Sentence,
    config: &AugmentConfig,
    rng: &mut impl Rng,
) -> Sentence {
    let mut pairs: Vec<(String, f64)> = Vec::with_capacity(sentence.len());

    // Removal: one draw per word, keep the pair unless it triggers.
    for (word, &gold) in sentence.words().iter().zip(sentence.gold()) {
        if rng.random::<f64>() < config.p_remove {
            continue;
        }
        pairs.push((word.clone(), gold));
    }
    if pairs.is_empty() {
        // Deleting every word is undone wholesale; the sentence survives.
        pairs = sentence
            .words()
            .iter()
            .cloned()
            .zip(sentence.gold().iter().copied())
            .collect();
    }

    // Uppercasing: one draw per surviving word, label untouched.
    for (word, _) in &mut pairs {
        if rng.random::<f64>() < config.p_upper {
            *word = word.to_uppercase();
        }
    }

    // Reversal: one draw per sentence, words and gold flip together.
    if rng.random::<f64>() < config.p_reverse {
        pairs.reverse();
    }

    let (words, gold): (Vec<String>, Vec<f64>) = pairs.into_iter().unzip();
    Sentence::new(sentence.id(), words, gold).expect("augmentation preserves sentence invariants")
}

/// Augment every sentence of a corpus once, with an independent rng state
/// per sentence derived from `seed` and the sentence's position. Corpus size
/// and sentence ids are unchanged.
pub fn augment_epoch(corpus: &Corpus, config: &AugmentConfig, seed: u64) -> Corpus {
    let sentences: Vec<Sentence> = corpus
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = rng::seeded_rng(seed, &[stream::SENTENCE, i as u64]);
            augment_sentence(s, config, &mut rng)
        })
        .collect();
    Corpus::new(sentences).expect("augmentation keeps ids unique and sentences valid")
}
