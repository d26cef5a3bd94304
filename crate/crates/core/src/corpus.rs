//! Annotated sentences: data model, JSON-lines I/O, fold splitting, and
//! word-type statistics.
//!
//! The dataset format is one JSON object per line with keys `id` (string),
//! `words` (array of strings) and `probs` (array of numbers in `[0, 1]`,
//! one per word). The writer emits probabilities with 6 decimal places.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::features;
use crate::rng::{self, stream};

/// One annotated sentence: words plus their gold emphasis probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Sentence {
    id: String,
    words: Vec<String>,
    gold: Vec<f64>,
}

impl Sentence {
    /// Build a sentence, checking every invariant: at least one word, equal
    /// lengths, non-empty whitespace-free words, probabilities in `[0, 1]`.
    pub fn new(id: impl Into<String>, words: Vec<String>, gold: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if words.is_empty() {
            return Err(Error::Validation(format!("sentence {id:?} has no words")));
        }
        if words.len() != gold.len() {
            return Err(Error::Validation(format!(
                "sentence {id:?} has {} words but {} probabilities",
                words.len(),
                gold.len()
            )));
        }
        for w in &words {
            if w.is_empty() {
                return Err(Error::Validation(format!(
                    "sentence {id:?} contains an empty word"
                )));
            }
            if w.chars().any(char::is_whitespace) {
                return Err(Error::Validation(format!(
                    "sentence {id:?}: word {w:?} contains whitespace"
                )));
            }
        }
        for &g in &gold {
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::Validation(format!(
                    "sentence {id:?}: probability {g} outside [0, 1]"
                )));
            }
        }
        Ok(Sentence { id, words, gold })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn gold(&self) -> &[f64] {
        &self.gold
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        false // at least one word by construction
    }
}

/// An ordered collection of sentences with unique ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    sentences: Vec<Sentence>,
}

impl Corpus {
    pub fn new(sentences: Vec<Sentence>) -> Result<Self> {
        let mut seen = HashSet::new();
        for s in &sentences {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::Validation(format!(
                    "duplicate sentence id {:?}",
                    s.id
                )));
            }
        }
        Ok(Corpus { sentences })
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Sentence> {
        self.sentences.iter()
    }

    pub fn get(&self, idx: usize) -> Option<&Sentence> {
        self.sentences.get(idx)
    }

    pub fn find(&self, id: &str) -> Option<&Sentence> {
        self.sentences.iter().find(|s| s.id == id)
    }
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    words: Vec<String>,
    probs: Vec<f64>,
}

/// Load a JSON-lines corpus file, preserving record order.
///
/// Blank lines are skipped. A malformed line fails with its 1-based line
/// number; invariant violations fail with a validation error.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let file = File::open(path.as_ref())?;
    read_corpus(BufReader::new(file))
}

/// Load a corpus from any reader; see [`load_corpus`].
pub fn read_corpus(reader: impl BufRead) -> Result<Corpus> {
    let mut sentences = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let raw: RawRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(lineno, e.to_string()))?;
        let sentence = Sentence::new(raw.id, raw.words, raw.probs).map_err(|e| match e {
            Error::Validation(msg) => Error::Validation(format!("line {lineno}: {msg}")),
            other => other,
        })?;
        sentences.push(sentence);
    }
    Corpus::new(sentences)
}

/// Serialize one sentence as a JSON-lines record (no trailing newline).
pub fn record_to_json(sentence: &Sentence) -> String {
    // serde_json handles string escaping; probabilities are fixed to
    // 6 decimal places by the file format.
    let id = serde_json::to_string(sentence.id()).expect("string serializes");
    let words = serde_json::to_string(sentence.words()).expect("strings serialize");
    let mut probs = String::new();
    for (i, g) in sentence.gold().iter().enumerate() {
        if i > 0 {
            probs.push(',');
        }
        let _ = write!(probs, "{g:.6}");
    }
    format!("{{\"id\":{id},\"words\":{words},\"probs\":[{probs}]}}")
}

/// Write a corpus in the JSON-lines format read by [`load_corpus`].
pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    write_corpus(corpus, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Write a corpus to any writer; see [`save_corpus`].
pub fn write_corpus(corpus: &Corpus, w: &mut impl Write) -> Result<()> {
    for s in corpus.iter() {
        writeln!(w, "{}", record_to_json(s))?;
    }
    Ok(())
}

/// Assignment of every sentence to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    k: usize,
    assignments: BTreeMap<String, usize>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fold_of(&self, id: &str) -> Option<usize> {
        self.assignments.get(id).copied()
    }

    pub fn assignments(&self) -> &BTreeMap<String, usize> {
        &self.assignments
    }

    /// Split a corpus into (train, validation) for one fold, preserving
    /// corpus order. Validation is exactly the sentences assigned to `fold`.
    pub fn partition(&self, corpus: &Corpus, fold: usize) -> Result<(Corpus, Corpus)> {
        if fold >= self.k {
            return Err(Error::Argument(format!(
                "fold {fold} out of range for k={}",
                self.k
            )));
        }
        let mut train = Vec::new();
        let mut validation = Vec::new();
        for s in corpus.iter() {
            match self.fold_of(s.id()) {
                Some(f) if f == fold => validation.push(s.clone()),
                Some(_) => train.push(s.clone()),
                None => {
                    return Err(Error::Argument(format!(
                        "sentence {:?} is not covered by the fold plan",
                        s.id()
                    )))
                }
            }
        }
        Ok((Corpus::new(train)?, Corpus::new(validation)?))
    }

    /// Content digest used to check that two reports share a fold plan.
    pub fn digest(&self) -> u64 {
        // FNV-1a over the sorted (id, fold) pairs.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        eat(&(self.k as u64).to_le_bytes());
        for (id, fold) in &self.assignments {
            eat(id.as_bytes());
            eat(&[0xff]);
            eat(&(*fold as u64).to_le_bytes());
        }
        h
    }
}

/// Randomly assign sentences to `k` folds whose sizes differ by at most one.
///
/// Deterministic for a fixed (corpus, k, seed): a seeded shuffle followed by
/// round-robin dealing.
pub fn split_folds(corpus: &Corpus, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Argument(format!("k must be at least 2, got {k}")));
    }
    if k > corpus.len() {
        return Err(Error::Argument(format!(
            "k={k} exceeds corpus size {}",
            corpus.len()
        )));
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut rng = rng::seeded_rng(seed, &[stream::FOLDS]);
    order.shuffle(&mut rng);
    let assignments = order
        .iter()
        .enumerate()
        .map(|(pos, &idx)| (corpus.sentences[idx].id.clone(), pos % k))
        .collect();
    Ok(FoldPlan { k, assignments })
}

/// Occurrence count and gold-score sum for one word-type predicate.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TypeStat {
    pub count: usize,
    pub sum: f64,
}

impl TypeStat {
    fn add(&mut self, g: f64) {
        self.count += 1;
        self.sum += g;
    }

    /// Mean gold score over occurrences, or `None` when the type never occurs.
    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }
}

/// Mean gold scores per word type (all, capital-initial, uppercase, hashtag).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WordTypeStats {
    pub all: TypeStat,
    pub caps_initial: TypeStat,
    pub all_upper: TypeStat,
    pub hashtag: TypeStat,
}

impl WordTypeStats {
    /// Rows in presentation order, as (label, stat) pairs.
    pub fn rows(&self) -> [(&'static str, TypeStat); 4] {
        [
            ("all", self.all),
            ("capital_initial", self.caps_initial),
            ("uppercase", self.all_upper),
            ("hashtag", self.hashtag),
        ]
    }
}

/// Mean gold score per word type over all word occurrences in the corpus.
pub fn word_type_stats(corpus: &Corpus) -> Result<WordTypeStats> {
    if corpus.is_empty() {
        return Err(Error::Argument("corpus is empty".into()));
    }
    let mut stats = WordTypeStats::default();
    for s in corpus.iter() {
        for (w, &g) in s.words().iter().zip(s.gold()) {
            let f = features::extract(w);
            stats.all.add(g);
            if f.caps_initial {
                stats.caps_initial.add(g);
            }
            if f.all_upper {
                stats.all_upper.add(g);
            }
            if f.hashtag {
                stats.hashtag.add(g);
            }
        }
    }
    Ok(stats)
}
