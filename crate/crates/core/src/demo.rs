//! A fixed 32-sentence synthetic corpus for smoke tests and capacity checks.
//!
//! Every word type carries one constant emphasis probability wherever it
//! appears, so a model with enough capacity can drive the error to zero by
//! memorizing word identities. Scores are all distinct, which keeps top-m
//! sets unambiguous, and the pool covers all three lexical word shapes
//! (hashtag, all-uppercase, capital-initial) plus plain lowercase words.

use rand::seq::SliceRandom;

use crate::corpus::{Corpus, Sentence};
use crate::rng;

/// Word pool: 24 types, each with a fixed emphasis probability. Hashtags
/// score highest, then all-caps, then capitalized, then lowercase — echoing
/// the empirical ordering the lexical features are built on.
const WORD_SCORES: [(&str, f64); 24] = [
    ("#plantgang", 0.95),
    ("#goals", 0.88),
    ("#blessed", 0.82),
    ("#mondayvibes", 0.76),
    ("#nofilter", 0.70),
    ("WOW", 0.68),
    ("ASAP", 0.63),
    ("LOVE", 0.59),
    ("NOW", 0.55),
    ("Monday", 0.52),
    ("Friday", 0.48),
    ("Summer", 0.44),
    ("Coffee", 0.40),
    ("Dream", 0.35),
    ("amazing", 0.33),
    ("happy", 0.30),
    ("fresh", 0.27),
    ("little", 0.24),
    ("quiet", 0.21),
    ("simple", 0.17),
    ("plain", 0.13),
    ("soft", 0.09),
    ("the", 0.05),
    ("and", 0.02),
];

const SENTENCES: usize = 32;
const WORDS_PER_SENTENCE: usize = 6;
const DEMO_SEED: u64 = 0x5EED_DEC0;

/// Build the corpus. The content is a pure function of the constants above;
/// every call returns byte-identical sentences.
pub fn demo_corpus() -> Corpus {
    let mut rng = rng::seeded_rng(DEMO_SEED, &[]);
    let sentences = (0..SENTENCES)
        .map(|i| {
            let mut order: Vec<usize> = (0..WORD_SCORES.len()).collect();
            order.shuffle(&mut rng);
            let (words, gold): (Vec<String>, Vec<f64>) = order[..WORDS_PER_SENTENCE]
                .iter()
                .map(|&idx| {
                    let (word, score) = WORD_SCORES[idx];
                    (word.to_string(), score)
                })
                .unzip();
            Sentence::new(format!("syn{i:02}"), words, gold)
                .expect("demo sentences satisfy corpus invariants")
        })
        .collect();
    Corpus::new(sentences).expect("demo ids are unique")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features;
    use std::collections::HashMap;

    #[test]
    fn shape_is_fixed() {
        let corpus = demo_corpus();
        assert_eq!(corpus.len(), 32);
        for s in corpus.iter() {
            assert_eq!(s.len(), 6);
        }
        assert_eq!(demo_corpus(), corpus);
    }

    #[test]
    fn each_word_type_has_one_score_everywhere() {
        let corpus = demo_corpus();
        let mut seen: HashMap<&str, f64> = HashMap::new();
        for s in corpus.iter() {
            for (w, &g) in s.words().iter().zip(s.gold()) {
                if let Some(&prev) = seen.get(w.as_str()) {
                    assert_eq!(prev, g, "word {w} has two scores");
                } else {
                    seen.insert(w.as_str(), g);
                }
            }
        }
    }

    #[test]
    fn scores_within_a_sentence_are_distinct() {
        for s in demo_corpus().iter() {
            let mut gold = s.gold().to_vec();
            gold.sort_by(f64::total_cmp);
            gold.dedup();
            assert_eq!(gold.len(), s.len(), "ties in {}", s.id());
        }
    }

    #[test]
    fn all_lexical_shapes_appear() {
        let corpus = demo_corpus();
        let (mut hashtag, mut upper, mut caps) = (false, false, false);
        for s in corpus.iter() {
            for w in s.words() {
                let f = features::extract(w);
                hashtag |= f.hashtag;
                upper |= f.all_upper;
                caps |= f.caps_initial;
            }
        }
        assert!(hashtag && upper && caps);
    }
}
