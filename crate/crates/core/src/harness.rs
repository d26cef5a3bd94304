//! Experiment orchestration: the training loop with early stopping, the
//! k-fold × multi-run protocol, strategy-gain analysis, and score-averaged
//! ensembling.
//!
//! Determinism is the ruling concern. Every source of randomness is derived
//! from the experiment seed through tagged streams (initialization, epoch
//! shuffles, augmentation, per-cell seeds), so a report is a pure function
//! of the input corpus and the configuration, and adding runs or folds never
//! perturbs the cells that already existed.

use std::fmt::Write as _;

use crate::augment::{augment_epoch, AugmentConfig};
use crate::corpus::{split_folds, Corpus};
use crate::error::{Error, Result};
use crate::evalx::{self, MatchReport};
use crate::model::{Adam, AdamConfig, ModelParams};
use crate::objectives::combined_loss;
use crate::rng::{self, derive_seed, stream};
use crate::subword::{build_vocab, encode_sentence, SubwordSequence, Vocab};

/// Everything that shapes one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Epoch cap.
    pub epochs: usize,
    /// Non-improving validation epochs tolerated before stopping.
    pub patience: usize,
    /// Sentences per optimizer step (gradients are averaged).
    pub batch_size: usize,
    /// Adam step size.
    pub lr: f64,
    /// Weight of the pairwise ranking term next to the MSE term.
    pub lambda_pair: f64,
    /// Training-fold augmentation; `None` disables it.
    pub augment: Option<AugmentConfig>,
    /// Feed lexical features to the head. When off, feature inputs are
    /// zeroed during training so their head weights never leave zero.
    pub use_features: bool,
    pub d_embed: usize,
    pub d_hidden: usize,
    /// Vocabulary size cap for induction from the training folds.
    pub vocab_size: usize,
    /// Root seed for all derived randomness.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            patience: 2,
            batch_size: 16,
            lr: 1e-3,
            lambda_pair: 1.0,
            augment: None,
            use_features: true,
            d_embed: 64,
            d_hidden: 64,
            vocab_size: 10_000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Argument("need at least one epoch".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Argument("batch size must be at least 1".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Argument(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if !(self.lambda_pair.is_finite() && self.lambda_pair >= 0.0) {
            return Err(Error::Argument(format!(
                "ranking weight must be non-negative, got {}",
                self.lambda_pair
            )));
        }
        if self.d_embed < 1 || self.d_hidden < 1 {
            return Err(Error::Argument("layer sizes must be positive".into()));
        }
        if self.vocab_size < 1 {
            return Err(Error::Argument("vocabulary size must be positive".into()));
        }
        Ok(())
    }
}

/// Result of [`train_one`]: the best-validation checkpoint and its metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    /// Vocabulary induced from the training corpus only.
    pub vocab: Vocab,
    /// Parameters from the best validation epoch.
    pub params: ModelParams,
    /// Validation metrics of that epoch.
    pub report: MatchReport,
    /// 1-based epoch the best checkpoint came from.
    pub best_epoch: usize,
    /// Epochs actually executed before the cap or early stopping hit.
    pub epochs_run: usize,
}

fn encode_corpus(vocab: &Vocab, corpus: &Corpus, use_features: bool) -> Vec<SubwordSequence> {
    corpus
        .iter()
        .map(|s| {
            let mut seq = encode_sentence(vocab, s);
            if !use_features {
                seq.zero_features();
            }
            seq
        })
        .collect()
}

fn predict_word_scores(params: &ModelParams, seqs: &[SubwordSequence]) -> Result<Vec<Vec<f64>>> {
    seqs.iter()
        .map(|seq| Ok(params.forward(seq)?.word_scores))
        .collect()
}

/// Train on `train`, early-stop on `validation`, return the checkpoint with
/// the highest overall Match. Deterministic given `config.seed`.
///
/// The caller is responsible for keeping the two corpora disjoint in the
/// cross-validation protocol; capacity checks may legitimately pass the same
/// corpus twice.
pub fn train_one(
    train: &Corpus,
    validation: &Corpus,
    config: &TrainConfig,
) -> Result<TrainedModel> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Argument("training corpus is empty".into()));
    }
    if validation.is_empty() {
        return Err(Error::Argument("validation corpus is empty".into()));
    }

    let vocab = build_vocab(train, config.vocab_size)?;
    let mut params = ModelParams::init(vocab.len(), config.d_embed, config.d_hidden, config.seed)?;
    let mut optimizer = Adam::new(
        AdamConfig {
            lr: config.lr,
            ..AdamConfig::default()
        },
        params.param_count(),
    )?;

    // Validation is never augmented; lexical features stay real because a
    // feature-off model has zero feature weights, making them inert.
    let val_seqs = encode_corpus(&vocab, validation, true);

    let mut best: Option<TrainedModel> = None;
    let mut non_improving = 0usize;
    let mut epochs_run = 0usize;

    for epoch in 1..=config.epochs {
        epochs_run = epoch;

        let augmented;
        let epoch_corpus = match &config.augment {
            Some(aug) => {
                augmented = augment_epoch(
                    train,
                    aug,
                    derive_seed(config.seed, &[stream::AUGMENT, epoch as u64]),
                );
                &augmented
            }
            None => train,
        };
        let seqs = encode_corpus(&vocab, epoch_corpus, config.use_features);

        let mut order: Vec<usize> = (0..seqs.len()).collect();
        {
            use rand::seq::SliceRandom;
            let mut rng = rng::seeded_rng(config.seed, &[stream::SHUFFLE, epoch as u64]);
            order.shuffle(&mut rng);
        }

        for batch in order.chunks(config.batch_size) {
            let mut grads = params.zeros_like();
            for &idx in batch {
                let seq = &seqs[idx];
                let prediction = params.forward(seq)?;
                let loss = combined_loss(&prediction.logits, &seq.targets, config.lambda_pair)?;
                grads.add_assign(&params.backward(seq, &loss.grad)?);
            }
            grads.scale(1.0 / batch.len() as f64);
            optimizer.step(&mut params, &grads)?;
        }

        let report = evalx::evaluate(&predict_word_scores(&params, &val_seqs)?, validation)?;
        let improved = best
            .as_ref()
            .is_none_or(|b| report.overall > b.report.overall);
        if improved {
            best = Some(TrainedModel {
                vocab: vocab.clone(),
                params: params.clone(),
                report,
                best_epoch: epoch,
                epochs_run: epoch,
            });
            non_improving = 0;
        } else {
            non_improving += 1;
            if non_improving > config.patience {
                break;
            }
        }
    }

    let mut model = best.expect("at least one epoch always runs");
    model.epochs_run = epochs_run;
    Ok(model)
}

/// One (fold, run) cell of the cross-validation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CellReport {
    pub fold: usize,
    pub run: usize,
    pub best_epoch: usize,
    pub report: MatchReport,
}

/// Mean, extremes, and population standard deviation of the cells' overall
/// scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub std: f64,
}

/// Full cross-validation output: every cell in (fold-major, run-minor)
/// order, plus the fold-plan digest that ties reports to their split.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldReport {
    pub k: usize,
    pub runs: usize,
    pub plan_digest: u64,
    pub cells: Vec<CellReport>,
}

impl FoldReport {
    /// Recompute the summary from the cells; nothing is cached, so the
    /// statistics can never drift from the underlying data.
    pub fn summary(&self) -> Summary {
        let overalls: Vec<f64> = self.cells.iter().map(|c| c.report.overall).collect();
        let n = overalls.len() as f64;
        let mean = overalls.iter().sum::<f64>() / n;
        let var = overalls
            .iter()
            .map(|x| (x - mean) * (x - mean))
            .sum::<f64>()
            / n;
        let min = overalls.iter().copied().fold(f64::INFINITY, f64::min);
        let max = overalls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Summary {
            mean,
            min,
            max,
            std: var.sqrt(),
        }
    }

    /// Mean overall score per fold (across its runs), indexed by fold.
    pub fn fold_means(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.k];
        let mut counts = vec![0usize; self.k];
        for cell in &self.cells {
            sums[cell.fold] += cell.report.overall;
            counts[cell.fold] += 1;
        }
        sums.iter()
            .zip(&counts)
            .map(|(s, &c)| s / c as f64)
            .collect()
    }

    /// CSV body in the `fold,run,m,score` format.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(evalx::CSV_HEADER);
        out.push('\n');
        for cell in &self.cells {
            evalx::append_csv_rows(&mut out, cell.fold, cell.run, &cell.report);
        }
        out
    }

    /// JSON summary: protocol shape, per-cell reports, and the summary
    /// statistics. Key order is fixed, so equal reports serialize to equal
    /// bytes.
    pub fn to_json(&self) -> serde_json::Value {
        let summary = self.summary();
        serde_json::json!({
            "k": self.k,
            "runs": self.runs,
            "plan_digest": format!("{:016x}", self.plan_digest),
            "cells": self
                .cells
                .iter()
                .map(|c| {
                    serde_json::json!({
                        "fold": c.fold,
                        "run": c.run,
                        "best_epoch": c.best_epoch,
                        "report": c.report.to_json(),
                    })
                })
                .collect::<Vec<_>>(),
            "summary": {
                "mean": summary.mean,
                "min": summary.min,
                "max": summary.max,
                "std": summary.std,
            },
        })
    }
}

/// Run the full k-fold × runs protocol. Cell (f, r) trains on every fold
/// except `f` under seed `derive(config.seed, CELL, f, r)` — a pure function
/// of the triple, so extending `runs` reuses identical earlier cells.
/// `workers > 1` evaluates cells concurrently with identical output.
pub fn run_cv(
    corpus: &Corpus,
    k: usize,
    runs: usize,
    config: &TrainConfig,
    workers: usize,
) -> Result<FoldReport> {
    config.validate()?;
    if runs < 1 {
        return Err(Error::Argument("need at least one run".into()));
    }
    let plan = split_folds(corpus, k, config.seed)?;

    let grid: Vec<(usize, usize)> = (0..k)
        .flat_map(|fold| (0..runs).map(move |run| (fold, run)))
        .collect();

    let run_cell = |&(fold, run): &(usize, usize)| -> Result<CellReport> {
        let (train, validation) = plan.partition(corpus, fold)?;
        let cell_config = TrainConfig {
            seed: derive_seed(config.seed, &[stream::CELL, fold as u64, run as u64]),
            ..config.clone()
        };
        let model = train_one(&train, &validation, &cell_config)?;
        Ok(CellReport {
            fold,
            run,
            best_epoch: model.best_epoch,
            report: model.report,
        })
    };

    let cells: Vec<CellReport> = if workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Argument(format!("cannot build worker pool: {e}")))?;
        pool.install(|| {
            use rayon::prelude::*;
            grid.par_iter().map(run_cell).collect::<Result<Vec<_>>>()
        })?
    } else {
        grid.iter().map(run_cell).collect::<Result<Vec<_>>>()?
    };

    Ok(FoldReport {
        k,
        runs,
        plan_digest: plan.digest(),
        cells,
    })
}

/// Gain of a variant configuration over its baseline, Table-style: the mean
/// difference over all cells, and the best per-fold mean difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyGains {
    pub average_gain: f64,
    pub max_gain: f64,
}

/// Compare two reports produced from the same corpus, fold plan, and run
/// count. Either gain may be negative; both signs are meaningful.
pub fn strategy_gains(baseline: &FoldReport, variant: &FoldReport) -> Result<StrategyGains> {
    if baseline.k != variant.k
        || baseline.runs != variant.runs
        || baseline.plan_digest != variant.plan_digest
    {
        return Err(Error::Argument(
            "strategy gains need reports from the same fold plan and run count".into(),
        ));
    }
    let average_gain = variant.summary().mean - baseline.summary().mean;
    let max_gain = variant
        .fold_means()
        .iter()
        .zip(baseline.fold_means())
        .map(|(v, b)| v - b)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(StrategyGains {
        average_gain,
        max_gain,
    })
}

/// Render gains rows in the Table-style layout: strategy, average gain, max
/// gain, six decimals, sign always explicit on negatives.
pub fn gains_csv(rows: &[(&str, StrategyGains)]) -> String {
    let mut out = String::from("strategy,average_gain,max_gain\n");
    for (name, g) in rows {
        writeln!(out, "{name},{:.6},{:.6}", g.average_gain, g.max_gain)
            .expect("writing to a String cannot fail");
    }
    out
}

/// An ensemble member: parameters plus the digest of the vocabulary they
/// were trained with.
#[derive(Debug, Clone)]
pub struct EnsembleMember {
    pub params: ModelParams,
    pub vocab_digest: String,
}

/// Average the members' word scores over a corpus (score-averaging
/// ensemble). Every member must have been trained with `vocab` — digests
/// are checked — and the mean is computed incrementally, so an ensemble of
/// identical members reproduces the single model's scores exactly.
pub fn ensemble_predict(
    members: &[EnsembleMember],
    vocab: &Vocab,
    corpus: &Corpus,
) -> Result<Vec<Vec<f64>>> {
    if members.is_empty() {
        return Err(Error::Argument("ensemble needs at least one member".into()));
    }
    let expected = vocab.digest();
    for (i, member) in members.iter().enumerate() {
        if member.vocab_digest != expected {
            return Err(Error::Argument(format!(
                "ensemble member {i} was trained with vocabulary {} but {} was supplied",
                member.vocab_digest, expected
            )));
        }
        if member.params.dims().vocab_size != vocab.len() {
            return Err(Error::Argument(format!(
                "ensemble member {i} embeds {} pieces but the vocabulary has {}",
                member.params.dims().vocab_size,
                vocab.len()
            )));
        }
    }

    let mut out = Vec::with_capacity(corpus.len());
    for sentence in corpus.iter() {
        let seq = encode_sentence(vocab, sentence);
        let mut mean: Vec<f64> = vec![0.0; sentence.len()];
        for (j, member) in members.iter().enumerate() {
            let scores = member.params.forward(&seq)?.word_scores;
            for (m, s) in mean.iter_mut().zip(scores) {
                *m += (s - *m) / (j + 1) as f64;
            }
        }
        out.push(mean);
    }
    Ok(out)
}
