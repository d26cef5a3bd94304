//! Subword vocabulary, tokenization, and word↔subword alignment.
//!
//! Pieces follow the WordPiece convention: a word's first piece is written
//! plain, continuation pieces carry the `##` prefix. The vocabulary is
//! induced from a training corpus by frequency-ranked merges over an
//! exhaustive single-character base, so any training word always tokenizes;
//! a word containing an unseen character maps to the unknown piece.
//!
//! Gold labels are split onto subwords for training (every piece of a word
//! inherits the word's emphasis probability) and predictions are folded back
//! to words by averaging each word's subword scores.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::corpus::{Corpus, Sentence};
use crate::error::{Error, Result};
use crate::features::{self, FEATURE_DIM};

/// Default unknown piece.
pub const UNK_PIECE: &str = "[UNK]";

const CONTINUATION_PREFIX: &str = "##";

/// A subword inventory. Piece ids are their positions; id 0 is the unknown
/// piece.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    pieces: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Build a vocabulary from an ordered piece list whose first entry is the
    /// unknown piece. Rejects duplicates, empty pieces, whitespace, and a
    /// bare `##`.
    pub fn new(pieces: Vec<String>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::Validation("vocabulary has no pieces".into()));
        }
        let mut index = HashMap::with_capacity(pieces.len());
        for (id, piece) in pieces.iter().enumerate() {
            if piece.is_empty() {
                return Err(Error::Validation(format!("empty piece at position {id}")));
            }
            if piece.chars().any(char::is_whitespace) {
                return Err(Error::Validation(format!(
                    "piece {piece:?} contains whitespace"
                )));
            }
            if piece.starts_with(CONTINUATION_PREFIX) && piece.len() == CONTINUATION_PREFIX.len() {
                return Err(Error::Validation(
                    "continuation piece has no content after \"##\"".into(),
                ));
            }
            if index.insert(piece.clone(), id).is_some() {
                return Err(Error::Validation(format!("duplicate piece {piece:?}")));
            }
        }
        Ok(Vocab { pieces, index })
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn unk_id(&self) -> usize {
        0
    }

    pub fn unk_piece(&self) -> &str {
        &self.pieces[0]
    }

    pub fn piece(&self, id: usize) -> Option<&str> {
        self.pieces.get(id).map(String::as_str)
    }

    pub fn pieces(&self) -> &[String] {
        &self.pieces
    }

    pub fn id_of(&self, piece: &str) -> Option<usize> {
        self.index.get(piece).copied()
    }

    pub fn contains(&self, piece: &str) -> bool {
        self.index.contains_key(piece)
    }

    /// Content digest (FNV-1a over the piece list), used to pair checkpoints
    /// with the vocabulary they were trained on.
    pub fn digest(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for piece in &self.pieces {
            for &b in piece.as_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
            h ^= 0x0a;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

/// Load a vocabulary file: plain text, one piece per line, first line is the
/// unknown piece.
pub fn load_vocab(path: impl AsRef<Path>) -> Result<Vocab> {
    let file = File::open(path.as_ref())?;
    let mut pieces = Vec::new();
    for line in BufReader::new(file).lines() {
        pieces.push(line?);
    }
    Vocab::new(pieces)
}

/// Write a vocabulary in the format read by [`load_vocab`].
pub fn save_vocab(vocab: &Vocab, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    for piece in vocab.pieces() {
        writeln!(w, "{piece}")?;
    }
    w.flush()?;
    Ok(())
}

fn strip_continuation(piece: &str) -> &str {
    piece.strip_prefix(CONTINUATION_PREFIX).unwrap_or(piece)
}

/// Induce a vocabulary of at most `max_size` pieces from a corpus.
///
/// The base inventory is the unknown piece plus every character seen, in both
/// initial and continuation form. Remaining capacity is filled by repeatedly
/// merging the most frequent adjacent piece pair (ties broken by the
/// lexicographically smaller pair), BPE style. Deterministic for a fixed
/// corpus and `max_size`.
pub fn build_vocab(corpus: &Corpus, max_size: usize) -> Result<Vocab> {
    if corpus.is_empty() {
        return Err(Error::Argument(
            "cannot build a vocabulary from an empty corpus".into(),
        ));
    }

    // Word frequency in first-seen order.
    let mut word_order: Vec<String> = Vec::new();
    let mut word_count: HashMap<String, u64> = HashMap::new();
    for s in corpus.iter() {
        for w in s.words() {
            let entry = word_count.entry(w.clone()).or_insert(0);
            if *entry == 0 {
                word_order.push(w.clone());
            }
            *entry += 1;
        }
    }

    let chars: BTreeSet<char> = word_order.iter().flat_map(|w| w.chars()).collect();
    let base_size = 1 + 2 * chars.len();
    if max_size < base_size {
        return Err(Error::Argument(format!(
            "max_size {max_size} is below the character base inventory of {base_size} pieces"
        )));
    }

    let mut pieces: Vec<String> = Vec::with_capacity(max_size);
    pieces.push(UNK_PIECE.to_string());
    for &c in &chars {
        pieces.push(c.to_string());
    }
    for &c in &chars {
        pieces.push(format!("{CONTINUATION_PREFIX}{c}"));
    }
    let mut known: BTreeSet<String> = pieces.iter().cloned().collect();

    // Character-level segmentations, weighted by word frequency.
    let mut segs: Vec<(Vec<String>, u64)> = word_order
        .iter()
        .map(|w| {
            let seg: Vec<String> = w
                .chars()
                .enumerate()
                .map(|(i, c)| {
                    if i == 0 {
                        c.to_string()
                    } else {
                        format!("{CONTINUATION_PREFIX}{c}")
                    }
                })
                .collect();
            (seg, word_count[w])
        })
        .collect();

    while pieces.len() < max_size {
        let mut pair_counts: HashMap<(String, String), u64> = HashMap::new();
        for (seg, count) in &segs {
            for pair in seg.windows(2) {
                *pair_counts
                    .entry((pair[0].clone(), pair[1].clone()))
                    .or_insert(0) += count;
            }
        }
        // Best pair: highest count, then lexicographically smallest. Skip
        // merges whose initial-form result would collide with the "##"
        // continuation marker (words made of literal '#' characters).
        let best = pair_counts
            .into_iter()
            .filter(|((left, right), _)| {
                let merged = format!("{left}{}", strip_continuation(right));
                left.starts_with(CONTINUATION_PREFIX) || !merged.starts_with(CONTINUATION_PREFIX)
            })
            .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)));
        let Some(((left, right), _)) = best else {
            break;
        };
        let merged = format!("{left}{}", strip_continuation(&right));
        for (seg, _) in &mut segs {
            let mut i = 0;
            while i + 1 < seg.len() {
                if seg[i] == left && seg[i + 1] == right {
                    seg[i] = merged.clone();
                    seg.remove(i + 1);
                }
                i += 1;
            }
        }
        if known.insert(merged.clone()) {
            pieces.push(merged);
        }
    }

    Vocab::new(pieces)
}

/// Split one word into vocabulary pieces by greedy longest match, left to
/// right. The first piece is matched in initial (plain) form; later pieces
/// prefer the `##` continuation form and fall back to plain pieces of the
/// same surface text. A word with any unmatchable remainder maps entirely to
/// the unknown piece.
pub fn tokenize_word(vocab: &Vocab, word: &str) -> Vec<String> {
    debug_assert!(
        !word.is_empty() && !word.chars().any(char::is_whitespace),
        "words are non-empty and whitespace-free by invariant"
    );
    let chars: Vec<char> = word.chars().collect();
    let mut out: Vec<String> = Vec::new();
    let mut start = 0;
    while start < chars.len() {
        let first = start == 0;
        let mut matched: Option<String> = None;
        for end in (start + 1..=chars.len()).rev() {
            let text: String = chars[start..end].iter().collect();
            if !first {
                let cont = format!("{CONTINUATION_PREFIX}{text}");
                if vocab.contains(&cont) {
                    matched = Some(cont);
                    break;
                }
            }
            if !text.starts_with(CONTINUATION_PREFIX) && vocab.contains(&text) {
                matched = Some(text);
                break;
            }
        }
        match matched {
            Some(piece) => {
                start += strip_continuation(&piece).chars().count();
                out.push(piece);
            }
            None => return vec![vocab.unk_piece().to_string()],
        }
    }
    out
}

/// A sentence flattened to subword level, with the bookkeeping needed to
/// train on pieces and report on words.
#[derive(Debug, Clone, PartialEq)]
pub struct SubwordSequence {
    /// Piece strings in sentence order.
    pub tokens: Vec<String>,
    /// Vocabulary id of each token.
    pub token_ids: Vec<usize>,
    /// Half-open token range of each source word, covering tokens exactly.
    pub word_spans: Vec<(usize, usize)>,
    /// Per-token training target: the owning word's gold probability.
    pub targets: Vec<f64>,
    /// Per-token lexical feature vector, replicated from the owning word.
    pub features: Vec<[f64; FEATURE_DIM]>,
}

impl SubwordSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn word_count(&self) -> usize {
        self.word_spans.len()
    }

    /// Replace every feature vector with zeros (feature-ablated training).
    pub fn zero_features(&mut self) {
        for f in &mut self.features {
            *f = [0.0; FEATURE_DIM];
        }
    }
}

/// Tokenize a sentence and split its labels onto the pieces.
pub fn encode_sentence(vocab: &Vocab, sentence: &Sentence) -> SubwordSequence {
    let mut seq = SubwordSequence {
        tokens: Vec::new(),
        token_ids: Vec::new(),
        word_spans: Vec::with_capacity(sentence.len()),
        targets: Vec::new(),
        features: Vec::new(),
    };
    for (word, &gold) in sentence.words().iter().zip(sentence.gold()) {
        let pieces = tokenize_word(vocab, word);
        let feat = features::extract(word).to_vector();
        let start = seq.tokens.len();
        for piece in pieces {
            let id = vocab
                .id_of(&piece)
                .expect("tokenize_word only emits vocabulary pieces");
            seq.tokens.push(piece);
            seq.token_ids.push(id);
            seq.targets.push(gold);
            seq.features.push(feat);
        }
        seq.word_spans.push((start, seq.tokens.len()));
    }
    seq
}

/// Fold per-token scores back to per-word scores by averaging each word's
/// span.
///
/// The mean is computed incrementally, so a span whose scores are all equal
/// aggregates to exactly that value; splitting a label and averaging it back
/// is lossless.
pub fn aggregate_scores(seq: &SubwordSequence, subword_scores: &[f64]) -> Result<Vec<f64>> {
    if subword_scores.len() != seq.tokens.len() {
        return Err(Error::Argument(format!(
            "got {} scores for {} tokens",
            subword_scores.len(),
            seq.tokens.len()
        )));
    }
    let mut out = Vec::with_capacity(seq.word_spans.len());
    for &(start, end) in &seq.word_spans {
        let mut mean = 0.0;
        for (j, &x) in subword_scores[start..end].iter().enumerate() {
            mean += (x - mean) / (j + 1) as f64;
        }
        out.push(mean);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vocab_of(pieces: &[&str]) -> Vocab {
        Vocab::new(pieces.iter().map(|p| p.to_string()).collect()).unwrap()
    }

    fn sentence(id: &str, words: &[&str], gold: &[f64]) -> Sentence {
        Sentence::new(
            id,
            words.iter().map(|w| w.to_string()).collect(),
            gold.to_vec(),
        )
        .unwrap()
    }

    fn word_corpus(words: &[&str]) -> Corpus {
        let sentences = words
            .iter()
            .enumerate()
            .map(|(i, w)| sentence(&format!("s{i}"), &[w], &[0.5]))
            .collect();
        Corpus::new(sentences).unwrap()
    }

    #[test]
    fn base_inventory_always_present() {
        let vocab = build_vocab(&word_corpus(&["aa", "ab"]), 64).unwrap();
        for piece in ["a", "b", "##a", "##b"] {
            assert!(vocab.contains(piece), "missing {piece}");
        }
        // Frequent merges appear too.
        assert!(vocab.contains("aa"));
        assert!(vocab.contains("ab"));
    }

    #[test]
    fn build_is_deterministic() {
        let corpus = word_corpus(&["emphasis", "selection", "select", "phase"]);
        let a = build_vocab(&corpus, 48).unwrap();
        let b = build_vocab(&corpus, 48).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn max_size_below_base_is_an_error() {
        let err = build_vocab(&word_corpus(&["aa", "ab"]), 1).unwrap_err();
        assert!(matches!(err, Error::Argument(_)), "{err}");
    }

    #[test]
    fn build_respects_max_size() {
        let corpus = word_corpus(&["abcabc", "abcabd", "bcd"]);
        let vocab = build_vocab(&corpus, 10).unwrap();
        assert_eq!(vocab.len(), 10);
    }

    #[test]
    fn hashtag_word_splits_like_the_running_example() {
        let vocab = vocab_of(&["[UNK]", "#", "plant", "##gang"]);
        assert_eq!(
            tokenize_word(&vocab, "#plantgang"),
            vec!["#", "plant", "##gang"]
        );
    }

    #[test]
    fn whole_word_hit() {
        let vocab = vocab_of(&["[UNK]", "plant", "p", "##l"]);
        assert_eq!(tokenize_word(&vocab, "plant"), vec!["plant"]);
    }

    #[test]
    fn unknown_character_maps_whole_word_to_unk() {
        let vocab = vocab_of(&["[UNK]", "p", "##l", "##a", "##n", "##t"]);
        assert_eq!(
            tokenize_word(&vocab, "plant"),
            vec!["p", "##l", "##a", "##n", "##t"]
        );
        // 'o' and 'k' have no pieces: the whole word degrades, not just the
        // unmatched characters.
        assert_eq!(tokenize_word(&vocab, "plonk"), vec!["[UNK]"]);
    }

    #[test]
    fn greedy_takes_longest_first() {
        let vocab = vocab_of(&["[UNK]", "ab", "a", "##b"]);
        assert_eq!(tokenize_word(&vocab, "ab"), vec!["ab"]);
    }

    #[test]
    fn continuation_form_preferred_at_equal_length() {
        let vocab = vocab_of(&["[UNK]", "a", "gang", "##gang"]);
        assert_eq!(tokenize_word(&vocab, "agang"), vec!["a", "##gang"]);
    }

    #[test]
    fn continuation_not_used_at_word_start() {
        // "##gang" alone cannot start a word; char fallback is required.
        let vocab = vocab_of(&["[UNK]", "##gang", "g", "##a", "##n", "##g"]);
        assert_eq!(
            tokenize_word(&vocab, "gang"),
            vec!["g", "##a", "##n", "##g"]
        );
    }

    #[test]
    fn literal_hash_marks_tokenize() {
        let corpus = word_corpus(&["##", "#x"]);
        let vocab = build_vocab(&corpus, 32).unwrap();
        let pieces = tokenize_word(&vocab, "##");
        assert_eq!(pieces, vec!["#", "###"]);
        assert!(!vocab.contains("##"));
    }

    #[test]
    fn encode_splits_labels_and_spans() {
        let vocab = vocab_of(&["[UNK]", "Good", "vi", "##bes"]);
        let s = sentence("s", &["Good", "vibes"], &[0.6, 0.2]);
        let seq = encode_sentence(&vocab, &s);
        assert_eq!(seq.tokens, vec!["Good", "vi", "##bes"]);
        assert_eq!(seq.targets, vec![0.6, 0.2, 0.2]);
        assert_eq!(seq.word_spans, vec![(0, 1), (1, 3)]);
        assert_eq!(seq.features[0], [1.0, 0.0, 0.0]);
        assert_eq!(seq.features[1], seq.features[2]);
    }

    #[test]
    fn encode_single_word() {
        let vocab = vocab_of(&["[UNK]", "hi"]);
        let seq = encode_sentence(&vocab, &sentence("s", &["hi"], &[0.7]));
        assert_eq!(seq.tokens, vec!["hi"]);
        assert_eq!(seq.targets, vec![0.7]);
        assert_eq!(seq.word_spans, vec![(0, 1)]);
    }

    #[test]
    fn encode_replicates_target_across_pieces() {
        let vocab = vocab_of(&["[UNK]", "#", "plant", "##gang"]);
        let seq = encode_sentence(&vocab, &sentence("s", &["#plantgang"], &[0.61]));
        assert_eq!(seq.tokens, vec!["#", "plant", "##gang"]);
        assert_eq!(seq.targets, vec![0.61, 0.61, 0.61]);
    }

    #[test]
    fn aggregate_means_each_span() {
        let vocab = vocab_of(&["[UNK]", "Good", "vi", "##bes"]);
        let seq = encode_sentence(&vocab, &sentence("s", &["Good", "vibes"], &[0.6, 0.2]));
        let scores = aggregate_scores(&seq, &[0.9, 0.2, 0.4]).unwrap();
        assert_eq!(scores.len(), 2);
        assert!((scores[0] - 0.9).abs() < 1e-15);
        assert!((scores[1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn aggregate_of_constant_span_is_exact() {
        let vocab = vocab_of(&["[UNK]", "#", "plant", "##gang"]);
        let seq = encode_sentence(&vocab, &sentence("s", &["#plantgang"], &[0.61]));
        let scores = aggregate_scores(&seq, &[0.61, 0.61, 0.61]).unwrap();
        assert_eq!(scores, vec![0.61]);
    }

    #[test]
    fn aggregate_rejects_length_mismatch() {
        let vocab = vocab_of(&["[UNK]", "hi"]);
        let seq = encode_sentence(&vocab, &sentence("s", &["hi"], &[0.7]));
        assert!(matches!(
            aggregate_scores(&seq, &[0.1, 0.2]),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn vocab_rejects_duplicates_and_bare_prefix() {
        assert!(Vocab::new(vec!["[UNK]".into(), "a".into(), "a".into()]).is_err());
        assert!(Vocab::new(vec!["[UNK]".into(), "##".into()]).is_err());
        assert!(Vocab::new(vec!["[UNK]".into(), String::new()]).is_err());
    }

    #[test]
    fn vocab_file_round_trip() {
        let corpus = word_corpus(&["vibes", "vibe", "vibrant"]);
        let vocab = build_vocab(&corpus, 40).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        save_vocab(&vocab, &path).unwrap();
        let reloaded = load_vocab(&path).unwrap();
        assert_eq!(vocab, reloaded);
        assert_eq!(vocab.digest(), reloaded.digest());
    }

    fn arb_words() -> impl Strategy<Value = Vec<String>> {
        proptest::collection::vec("[a-d#A-C]{1,8}", 1..12)
    }

    proptest! {
        // Joining a non-unk tokenization (stripping "##") reproduces the word.
        #[test]
        fn tokenize_concatenation_consistent(words in arb_words()) {
            let refs: Vec<&str> = words.iter().map(String::as_str).collect();
            let corpus = word_corpus(&refs);
            let vocab = build_vocab(&corpus, 200).unwrap();
            for w in &words {
                let pieces = tokenize_word(&vocab, w);
                prop_assert!(pieces != vec![vocab.unk_piece().to_string()] || w == vocab.unk_piece(),
                    "training word {:?} must tokenize", w);
                let joined: String = pieces
                    .iter()
                    .enumerate()
                    .map(|(i, p)| if i == 0 { p.as_str() } else { strip_continuation(p) })
                    .collect();
                prop_assert_eq!(&joined, w);
            }
        }

        // Split-then-average returns the gold labels bit for bit; spans tile
        // the token range.
        #[test]
        fn label_splitting_is_lossless(
            words in arb_words(),
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let gold: Vec<f64> = (0..words.len()).map(|_| rng.random::<f64>()).collect();
            let refs: Vec<&str> = words.iter().map(String::as_str).collect();
            let corpus = word_corpus(&refs);
            let vocab = build_vocab(&corpus, 200).unwrap();
            let s = Sentence::new("p", words.clone(), gold.clone()).unwrap();
            let seq = encode_sentence(&vocab, &s);

            let mut covered = 0;
            for &(start, end) in &seq.word_spans {
                prop_assert_eq!(start, covered);
                prop_assert!(end > start);
                covered = end;
            }
            prop_assert_eq!(covered, seq.tokens.len());

            let back = aggregate_scores(&seq, &seq.targets).unwrap();
            prop_assert_eq!(back, gold);
        }
    }
}
