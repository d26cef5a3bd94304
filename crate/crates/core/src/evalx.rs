//! Top-m word selection, the Match_m metric family, and report formats.
//!
//! Match_m asks how well the predicted top-m word set overlaps the gold
//! top-m set, per sentence, averaged over a corpus; the headline score
//! averages m = 1..4. Ties always resolve to the smaller word index — the
//! same rule for gold and predictions — so evaluation is deterministic and
//! invariant to any strictly increasing rescaling of the scores.

use std::fmt::Write as _;

use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// Corpus-level Match_m means for m = 1..4, plus their average.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchReport {
    /// `match_m[k]` is the mean Match_(k+1) over sentences.
    pub match_m: [f64; 4],
    /// Arithmetic mean of the four entries; the headline number.
    pub overall: f64,
}

impl MatchReport {
    pub fn new(match_m: [f64; 4]) -> Self {
        let overall = match_m.iter().sum::<f64>() / 4.0;
        MatchReport { match_m, overall }
    }

    /// JSON form: `{"match_m":{"m1":…,"m2":…,"m3":…,"m4":…},"overall":…}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "match_m": {
                "m1": self.match_m[0],
                "m2": self.match_m[1],
                "m3": self.match_m[2],
                "m4": self.match_m[3],
            },
            "overall": self.overall,
        })
    }
}

/// Header for the per-cell CSV report.
pub const CSV_HEADER: &str = "fold,run,m,score";

/// Append this report as four CSV rows (`fold,run,m,score`, score with six
/// decimals) to `out`.
pub fn append_csv_rows(out: &mut String, fold: usize, run: usize, report: &MatchReport) {
    for (k, &score) in report.match_m.iter().enumerate() {
        writeln!(out, "{fold},{run},{m},{score:.6}", m = k + 1)
            .expect("writing to a String cannot fail");
    }
}

/// Word indices ranked best-first: by score descending, ties by smaller
/// index.
fn ranked_indices(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// The `min(m, len)` indices with the highest scores, as a sorted index
/// list. Ties prefer the smaller index.
pub fn top_m(word_scores: &[f64], m: usize) -> Result<Vec<usize>> {
    if m < 1 {
        return Err(Error::Argument("top-m needs m ≥ 1".into()));
    }
    if word_scores.is_empty() {
        return Err(Error::Argument("top-m over an empty score vector".into()));
    }
    let mut top: Vec<usize> = ranked_indices(word_scores)
        .into_iter()
        .take(m.min(word_scores.len()))
        .collect();
    top.sort_unstable();
    Ok(top)
}

fn sorted_intersection_size(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// `|top_m(gold) ∩ top_m(predicted)| / min(m, len)` for one sentence.
pub fn match_m(gold: &[f64], predicted: &[f64], m: usize) -> Result<f64> {
    if gold.len() != predicted.len() {
        return Err(Error::Argument(format!(
            "{} gold scores but {} predictions",
            gold.len(),
            predicted.len()
        )));
    }
    let g = top_m(gold, m)?;
    let p = top_m(predicted, m)?;
    Ok(sorted_intersection_size(&g, &p) as f64 / m.min(gold.len()) as f64)
}

/// Compensated (Kahan) accumulator so corpus means do not depend on
/// sentence order beyond ~1e-16.
#[derive(Debug, Clone, Copy, Default)]
struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Score a corpus: one predicted word-score vector per sentence, in corpus
/// order.
pub fn evaluate(predictions: &[Vec<f64>], corpus: &Corpus) -> Result<MatchReport> {
    if predictions.len() != corpus.len() {
        return Err(Error::Argument(format!(
            "{} predictions for {} sentences",
            predictions.len(),
            corpus.len()
        )));
    }
    if corpus.is_empty() {
        return Err(Error::Argument("evaluation over an empty corpus".into()));
    }
    let mut sums = [KahanSum::default(); 4];
    for (sentence, predicted) in corpus.iter().zip(predictions) {
        for (k, sum) in sums.iter_mut().enumerate() {
            sum.add(match_m(sentence.gold(), predicted, k + 1)?);
        }
    }
    let n = corpus.len() as f64;
    Ok(MatchReport::new([
        sums[0].sum / n,
        sums[1].sum / n,
        sums[2].sum / n,
        sums[3].sum / n,
    ]))
}
