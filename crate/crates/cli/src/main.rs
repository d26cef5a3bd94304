//! `emphasis` — train, evaluate, and inspect word-emphasis models.
//!
//! Subcommands:
//! - `train`: fit one model on a train/validation split and save it.
//! - `cv`: the k-fold × runs protocol, optionally comparing a training
//!   strategy against its ablation.
//! - `predict`: score sentences with one checkpoint or an ensemble.
//! - `eval`: top-m overlap of predictions against gold labels.
//! - `stats`: mean gold score per word type.
//! - `augment-preview`: sample augmented variants of one sentence.
//!
//! Exit codes: 0 on success, 1 when inputs or arguments are invalid,
//! 2 on I/O failures.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use emphasis_core::augment::{augment_sentence, AugmentConfig};
use emphasis_core::corpus::{load_corpus, record_to_json, word_type_stats, Corpus};
use emphasis_core::evalx::{evaluate, top_m};
use emphasis_core::harness::{
    ensemble_predict, gains_csv, run_cv, strategy_gains, train_one, EnsembleMember, FoldReport,
    TrainConfig, TrainedModel,
};
use emphasis_core::model::{load_checkpoint, save_checkpoint};
use emphasis_core::rng::{seeded_rng, stream};
use emphasis_core::subword::{load_vocab, save_vocab};
use emphasis_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "emphasis",
    about = "Word emphasis selection: subword regression with a ranking objective",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and write checkpoint, vocabulary, and report.
    Train(TrainCmd),
    /// Run k-fold cross-validation; optionally measure a strategy's gain.
    Cv(CvCmd),
    /// Score sentences with one or more checkpoints (scores are averaged).
    Predict(PredictCmd),
    /// Compare a prediction file against gold labels.
    Eval(EvalCmd),
    /// Report mean gold score per word type.
    Stats(StatsCmd),
    /// Print augmented variants of one sentence.
    AugmentPreview(AugmentPreviewCmd),
}

/// Flags shared by every command that trains models. Defaults match
/// [`TrainConfig::default`].
#[derive(Args)]
struct TrainFlags {
    /// Epoch cap.
    #[arg(long, default_value_t = 10)]
    epochs: usize,

    /// Non-improving validation epochs tolerated before early stopping.
    #[arg(long, default_value_t = 2)]
    patience: usize,

    /// Sentences per optimizer step.
    #[arg(long, default_value_t = 16)]
    batch_size: usize,

    /// Adam step size.
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,

    /// Weight of the pairwise ranking term next to the squared-error term.
    #[arg(long, default_value_t = 1.0)]
    lambda_pair: f64,

    /// Do not feed lexical features to the head.
    #[arg(long)]
    no_features: bool,

    /// Re-sample augmented training data each epoch.
    #[arg(long)]
    augment: bool,

    /// Word-removal probability when augmenting.
    #[arg(long, default_value_t = 0.01)]
    p_remove: f64,

    /// Word-uppercasing probability when augmenting.
    #[arg(long, default_value_t = 0.05)]
    p_upper: f64,

    /// Sentence-reversal probability when augmenting.
    #[arg(long, default_value_t = 0.10)]
    p_reverse: f64,

    /// Embedding width.
    #[arg(long, default_value_t = 64)]
    d_embed: usize,

    /// Recurrent state width per direction.
    #[arg(long, default_value_t = 64)]
    d_hidden: usize,

    /// Vocabulary size cap (induced from training data only).
    #[arg(long, default_value_t = 10_000)]
    vocab_size: usize,
}

impl TrainFlags {
    fn to_config(&self, seed: u64) -> Result<TrainConfig> {
        let augment = if self.augment {
            Some(AugmentConfig::new(
                self.p_remove,
                self.p_upper,
                self.p_reverse,
            )?)
        } else {
            None
        };
        let config = TrainConfig {
            epochs: self.epochs,
            patience: self.patience,
            batch_size: self.batch_size,
            lr: self.lr,
            lambda_pair: self.lambda_pair,
            augment,
            use_features: !self.no_features,
            d_embed: self.d_embed,
            d_hidden: self.d_hidden,
            vocab_size: self.vocab_size,
            seed,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct TrainCmd {
    /// Training corpus (JSON lines).
    #[arg(long)]
    train: PathBuf,

    /// Validation corpus for early stopping (JSON lines).
    #[arg(long)]
    val: PathBuf,

    /// Directory for checkpoint.json, vocab.txt, and report.json.
    #[arg(long)]
    out_dir: PathBuf,

    /// Root seed for initialization, shuffling, and augmentation.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[command(flatten)]
    flags: TrainFlags,
}

/// A training strategy whose contribution `cv` can measure: the variant
/// enables it, the baseline disables it, everything else held fixed.
#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Strategy {
    /// Lexical features on vs off.
    Features,
    /// Ranking term on (at --lambda-pair) vs off.
    Pairwise,
    /// Per-epoch data augmentation on (at --p-*) vs off.
    Augmentation,
}

impl Strategy {
    fn name(self) -> &'static str {
        match self {
            Strategy::Features => "features",
            Strategy::Pairwise => "pairwise",
            Strategy::Augmentation => "augmentation",
        }
    }

    /// Baseline and variant configurations for this strategy. The strategy's
    /// own switch overrides the corresponding command-line flag; all other
    /// fields are taken from `base` unchanged.
    fn configs(self, base: &TrainConfig, flags: &TrainFlags) -> Result<(TrainConfig, TrainConfig)> {
        let mut baseline = base.clone();
        let mut variant = base.clone();
        match self {
            Strategy::Features => {
                baseline.use_features = false;
                variant.use_features = true;
            }
            Strategy::Pairwise => {
                baseline.lambda_pair = 0.0;
                variant.lambda_pair = flags.lambda_pair;
            }
            Strategy::Augmentation => {
                baseline.augment = None;
                variant.augment = Some(AugmentConfig::new(
                    flags.p_remove,
                    flags.p_upper,
                    flags.p_reverse,
                )?);
            }
        }
        Ok((baseline, variant))
    }
}

#[derive(Args)]
struct CvCmd {
    /// Corpus to split into folds (JSON lines).
    #[arg(long)]
    input: PathBuf,

    /// Number of folds.
    #[arg(long, default_value_t = 4)]
    k: usize,

    /// Independent runs per fold.
    #[arg(long, default_value_t = 1)]
    runs: usize,

    /// Root seed (required: fold assignment and every cell derive from it).
    #[arg(long)]
    seed: Option<u64>,

    /// Directory for report.csv and summary.json.
    #[arg(long)]
    out_dir: PathBuf,

    /// Worker threads for concurrent cells (1 = sequential).
    #[arg(long, default_value_t = 1)]
    workers: usize,

    /// Also run the protocol with this strategy toggled off and report the
    /// variant-minus-baseline gain.
    #[arg(long, value_enum)]
    strategy_gains: Option<Strategy>,

    #[command(flatten)]
    flags: TrainFlags,
}

#[derive(Args)]
struct PredictCmd {
    /// Checkpoint file; repeat to average an ensemble.
    #[arg(long, required = true)]
    checkpoint: Vec<PathBuf>,

    /// Vocabulary the checkpoints were trained with.
    #[arg(long)]
    vocab: PathBuf,

    /// Sentences to score (JSON lines).
    #[arg(long)]
    input: PathBuf,

    /// Output file (JSON lines); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalCmd {
    /// Gold corpus (JSON lines).
    #[arg(long)]
    gold: PathBuf,

    /// Predictions as written by `predict` (JSON lines with id and scores).
    #[arg(long)]
    pred: PathBuf,
}

#[derive(Args)]
struct StatsCmd {
    /// Corpus to analyze (JSON lines).
    #[arg(long)]
    input: PathBuf,

    /// Emit JSON instead of CSV.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct AugmentPreviewCmd {
    /// Corpus holding the sentence (JSON lines).
    #[arg(long)]
    input: PathBuf,

    /// Sentence id to preview; the first sentence when omitted.
    #[arg(long)]
    id: Option<String>,

    /// Number of variants to print.
    #[arg(long, default_value_t = 5)]
    n: usize,

    /// Seed for the preview draws.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Word-removal probability.
    #[arg(long, default_value_t = 0.01)]
    p_remove: f64,

    /// Word-uppercasing probability.
    #[arg(long, default_value_t = 0.05)]
    p_upper: f64,

    /// Sentence-reversal probability.
    #[arg(long, default_value_t = 0.10)]
    p_reverse: f64,
}

fn main() {
    // Argument errors are validation errors (exit 1); help and version
    // requests are successes.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(match e {
            Error::Io(_) => 2,
            _ => 1,
        });
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(cmd) => cmd_train(cmd),
        Command::Cv(cmd) => cmd_cv(cmd),
        Command::Predict(cmd) => cmd_predict(cmd),
        Command::Eval(cmd) => cmd_eval(cmd),
        Command::Stats(cmd) => cmd_stats(cmd),
        Command::AugmentPreview(cmd) => cmd_augment_preview(cmd),
    }
}

/// Write a file, creating the parent directory as needed.
fn write_output(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, content)?;
    Ok(())
}

fn cmd_train(cmd: TrainCmd) -> Result<()> {
    let config = cmd.flags.to_config(cmd.seed)?;
    let train = load_corpus(&cmd.train)?;
    let val = load_corpus(&cmd.val)?;
    let model = train_one(&train, &val, &config)?;

    fs::create_dir_all(&cmd.out_dir)?;
    let checkpoint_path = cmd.out_dir.join("checkpoint.json");
    let vocab_path = cmd.out_dir.join("vocab.txt");
    let report_path = cmd.out_dir.join("report.json");
    save_checkpoint(&model.params, &model.vocab.digest(), &checkpoint_path)?;
    save_vocab(&model.vocab, &vocab_path)?;
    write_output(&report_path, &format!("{:#}\n", train_report_json(&model)))?;

    println!(
        "trained on {} sentences, validated on {}: overall match {:.6} (best epoch {} of {})",
        train.len(),
        val.len(),
        model.report.overall,
        model.best_epoch,
        model.epochs_run,
    );
    println!("wrote {}", checkpoint_path.display());
    println!("wrote {}", vocab_path.display());
    println!("wrote {}", report_path.display());
    Ok(())
}

fn train_report_json(model: &TrainedModel) -> serde_json::Value {
    serde_json::json!({
        "best_epoch": model.best_epoch,
        "epochs_run": model.epochs_run,
        "validation": model.report.to_json(),
        "vocab_digest": model.vocab.digest(),
    })
}

fn cmd_cv(cmd: CvCmd) -> Result<()> {
    let seed = cmd.seed.ok_or_else(|| {
        Error::Argument("cv requires --seed: fold assignment and every cell derive from it".into())
    })?;
    let config = cmd.flags.to_config(seed)?;
    let corpus = load_corpus(&cmd.input)?;
    fs::create_dir_all(&cmd.out_dir)?;

    match cmd.strategy_gains {
        None => {
            let report = run_cv(&corpus, cmd.k, cmd.runs, &config, cmd.workers)?;
            let csv_path = cmd.out_dir.join("report.csv");
            let json_path = cmd.out_dir.join("summary.json");
            write_output(&csv_path, &report.to_csv())?;
            write_output(&json_path, &format!("{:#}\n", report.to_json()))?;
            print_cv_summary(&report);
            println!("wrote {}", csv_path.display());
            println!("wrote {}", json_path.display());
        }
        Some(strategy) => {
            let (baseline_config, variant_config) = strategy.configs(&config, &cmd.flags)?;
            let baseline = run_cv(&corpus, cmd.k, cmd.runs, &baseline_config, cmd.workers)?;
            let variant = run_cv(&corpus, cmd.k, cmd.runs, &variant_config, cmd.workers)?;
            let gains = strategy_gains(&baseline, &variant)?;

            let baseline_path = cmd.out_dir.join("baseline.csv");
            let variant_path = cmd.out_dir.join("variant.csv");
            let gains_csv_path = cmd.out_dir.join("gains.csv");
            let gains_json_path = cmd.out_dir.join("gains.json");
            write_output(&baseline_path, &baseline.to_csv())?;
            write_output(&variant_path, &variant.to_csv())?;
            write_output(&gains_csv_path, &gains_csv(&[(strategy.name(), gains)]))?;
            let gains_json = serde_json::json!({
                "strategy": strategy.name(),
                "average_gain": gains.average_gain,
                "max_gain": gains.max_gain,
                "baseline": baseline.to_json(),
                "variant": variant.to_json(),
            });
            write_output(&gains_json_path, &format!("{gains_json:#}\n"))?;

            println!(
                "{}: average gain {:.6}, max per-fold gain {:.6} (variant {:.6} vs baseline {:.6})",
                strategy.name(),
                gains.average_gain,
                gains.max_gain,
                variant.summary().mean,
                baseline.summary().mean,
            );
            println!("wrote {}", baseline_path.display());
            println!("wrote {}", variant_path.display());
            println!("wrote {}", gains_csv_path.display());
            println!("wrote {}", gains_json_path.display());
        }
    }
    Ok(())
}

fn print_cv_summary(report: &FoldReport) {
    let s = report.summary();
    println!(
        "{} folds x {} runs: overall match mean {:.6} (min {:.6}, max {:.6}, std {:.6})",
        report.k, report.runs, s.mean, s.min, s.max, s.std,
    );
}

fn cmd_predict(cmd: PredictCmd) -> Result<()> {
    let vocab = load_vocab(&cmd.vocab)?;
    let members = cmd
        .checkpoint
        .iter()
        .map(|path| {
            let (params, vocab_digest) = load_checkpoint(path)?;
            Ok(EnsembleMember {
                params,
                vocab_digest,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let corpus = load_corpus(&cmd.input)?;
    let scores = ensemble_predict(&members, &vocab, &corpus)?;

    let mut out = String::new();
    for (sentence, word_scores) in corpus.iter().zip(&scores) {
        let top4 = top_m(word_scores, 4)?;
        let record = serde_json::json!({
            "id": sentence.id(),
            "words": sentence.words(),
            "scores": word_scores,
            "top4": top4,
        });
        out.push_str(&record.to_string());
        out.push('\n');
    }

    match &cmd.out {
        Some(path) => {
            write_output(path, &out)?;
            match members.len() {
                1 => println!("scored {} sentences with 1 model", corpus.len()),
                n => println!(
                    "scored {} sentences: scores averaged over {n} models",
                    corpus.len()
                ),
            }
            println!("wrote {}", path.display());
        }
        None => {
            let stdout = std::io::stdout();
            stdout.lock().write_all(out.as_bytes())?;
        }
    }
    Ok(())
}

fn cmd_eval(cmd: EvalCmd) -> Result<()> {
    let gold = load_corpus(&cmd.gold)?;
    let predictions = load_predictions(&cmd.pred, &gold)?;
    let report = evaluate(&predictions, &gold)?;
    println!("{:#}", report.to_json());
    Ok(())
}

/// Read a `predict`-format JSON-lines file and order its score rows to match
/// `gold`. Every gold sentence must be covered exactly once.
fn load_predictions(path: &Path, gold: &Corpus) -> Result<Vec<Vec<f64>>> {
    #[derive(serde::Deserialize)]
    struct PredRecord {
        id: String,
        scores: Vec<f64>,
    }

    let text = fs::read_to_string(path)?;
    let mut by_id = std::collections::HashMap::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: PredRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        if by_id.insert(record.id.clone(), record.scores).is_some() {
            return Err(Error::Validation(format!(
                "duplicate prediction for sentence {:?}",
                record.id
            )));
        }
    }
    gold.iter()
        .map(|s| {
            by_id
                .remove(s.id())
                .ok_or_else(|| Error::Argument(format!("no prediction for sentence {:?}", s.id())))
        })
        .collect()
}

fn cmd_stats(cmd: StatsCmd) -> Result<()> {
    let corpus = load_corpus(&cmd.input)?;
    let stats = word_type_stats(&corpus)?;
    if cmd.json {
        let mut obj = serde_json::Map::new();
        for (label, stat) in stats.rows() {
            obj.insert(
                label.to_string(),
                serde_json::json!({
                    "mean_score": stat.mean(),
                    "count": stat.count,
                }),
            );
        }
        println!("{:#}", serde_json::Value::Object(obj));
    } else {
        println!("word_type,mean_score,count");
        for (label, stat) in stats.rows() {
            match stat.mean() {
                Some(mean) => println!("{label},{mean:.6},{}", stat.count),
                None => println!("{label},,0"),
            }
        }
    }
    Ok(())
}

fn cmd_augment_preview(cmd: AugmentPreviewCmd) -> Result<()> {
    let config = AugmentConfig::new(cmd.p_remove, cmd.p_upper, cmd.p_reverse)?;
    let corpus = load_corpus(&cmd.input)?;
    let sentence = match &cmd.id {
        Some(id) => corpus
            .find(id)
            .ok_or_else(|| Error::Argument(format!("no sentence with id {id:?}")))?,
        None => corpus
            .get(0)
            .ok_or_else(|| Error::Argument("corpus is empty".into()))?,
    };
    for i in 0..cmd.n {
        let mut rng = seeded_rng(cmd.seed, &[stream::PREVIEW, i as u64]);
        let variant = augment_sentence(sentence, &config, &mut rng);
        println!("{}", record_to_json(&variant));
    }
    Ok(())
}
