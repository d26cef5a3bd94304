//! Cross-module behavior: capacity, fold hygiene, and feature ablation.

use emphasis_core::corpus::{Corpus, Sentence};
use emphasis_core::demo::demo_corpus;
use emphasis_core::harness::{run_cv, train_one, TrainConfig};
use emphasis_core::model::{Adam, AdamConfig, ModelParams};
use emphasis_core::objectives::mse_loss;
use emphasis_core::subword::{build_vocab, encode_sentence, tokenize_word};

fn sentence(id: &str, words: &[&str], gold: &[f64]) -> Sentence {
    Sentence::new(
        id,
        words.iter().map(|w| w.to_string()).collect(),
        gold.to_vec(),
    )
    .unwrap()
}

/// The encoder has enough capacity to memorize the fixed synthetic corpus:
/// squared error on sigmoid scores drops below 1e-3 well within 2000 steps.
#[test]
fn capacity_drives_training_error_below_threshold() {
    let corpus = demo_corpus();
    let vocab = build_vocab(&corpus, 10_000).unwrap();
    let seqs: Vec<_> = corpus.iter().map(|s| encode_sentence(&vocab, s)).collect();

    let mut params = ModelParams::init(vocab.len(), 32, 32, 13).unwrap();
    let mut opt = Adam::new(
        AdamConfig {
            lr: 5e-3,
            ..AdamConfig::default()
        },
        params.param_count(),
    )
    .unwrap();

    let train_mse = |params: &ModelParams| -> f64 {
        let mut total = 0.0;
        let mut n = 0.0;
        for seq in &seqs {
            let pred = params.forward(seq).unwrap();
            for (s, y) in pred.scores.iter().zip(&seq.targets) {
                total += (s - y) * (s - y);
                n += 1.0;
            }
        }
        total / n
    };

    let mut steps = 0;
    let mut reached = false;
    'training: while steps < 2000 {
        for chunk in seqs.chunks(8) {
            let mut grads = params.zeros_like();
            for seq in chunk {
                let pred = params.forward(seq).unwrap();
                let loss = mse_loss(&pred.logits, &seq.targets).unwrap();
                grads.add_assign(&params.backward(seq, &loss.grad).unwrap());
            }
            grads.scale(1.0 / chunk.len() as f64);
            opt.step(&mut params, &grads).unwrap();
            steps += 1;
            if train_mse(&params) < 1e-3 {
                reached = true;
                break 'training;
            }
            if steps >= 2000 {
                break 'training;
            }
        }
    }
    assert!(
        reached,
        "squared error still {} after {steps} steps",
        train_mse(&params)
    );
}

/// The cell vocabulary comes from the training folds only: characters seen
/// solely in validation cannot enter it, and words containing them degrade
/// to the unknown piece.
#[test]
fn validation_data_cannot_leak_into_the_vocabulary() {
    let train = Corpus::new(vec![
        sentence("tr0", &["mellow", "morning", "morning"], &[0.8, 0.3, 0.3]),
        sentence("tr1", &["mellow", "woke", "well"], &[0.7, 0.4, 0.2]),
        sentence("tr2", &["groom", "woke", "glen"], &[0.6, 0.5, 0.1]),
        sentence("tr3", &["glen", "groom", "mellow"], &[0.9, 0.2, 0.5]),
    ])
    .unwrap();
    // "zebra" introduces 'z', 'b', 'a' — none occur in the training folds.
    let validation =
        Corpus::new(vec![sentence("va0", &["zebra", "morning"], &[0.9, 0.1])]).unwrap();

    let config = TrainConfig {
        epochs: 1,
        batch_size: 4,
        d_embed: 4,
        d_hidden: 4,
        vocab_size: 200,
        seed: 5,
        ..TrainConfig::default()
    };
    let model = train_one(&train, &validation, &config).unwrap();

    assert!(!model.vocab.contains("z"));
    assert!(!model.vocab.contains("##z"));
    assert_eq!(
        tokenize_word(&model.vocab, "zebra"),
        vec![model.vocab.unk_piece().to_string()]
    );
    // Training-fold words still tokenize without the unknown piece.
    assert_eq!(
        tokenize_word(&model.vocab, "mellow")
            .first()
            .map(String::as_str),
        Some("mellow")
    );
}

/// With features off, their head weights never leave zero, so feeding real
/// feature values at prediction time changes nothing — the ablated model
/// and the zero-feature model are the same function.
#[test]
fn feature_ablation_is_exact() {
    let corpus = demo_corpus();
    let config = TrainConfig {
        epochs: 2,
        batch_size: 8,
        lr: 0.01,
        d_embed: 8,
        d_hidden: 8,
        use_features: false,
        seed: 17,
        ..TrainConfig::default()
    };
    let model = train_one(&corpus, &corpus, &config).unwrap();

    let head_dim = model.params.head_w.len();
    let feature_weights = &model.params.head_w[head_dim - 3..];
    assert_eq!(feature_weights, &[0.0, 0.0, 0.0]);

    for s in corpus.iter() {
        let with_features = encode_sentence(&model.vocab, s);
        let mut without = with_features.clone();
        without.zero_features();
        let a = model.params.forward(&with_features).unwrap();
        let b = model.params.forward(&without).unwrap();
        assert_eq!(a.logits, b.logits);
    }
}

/// With features on, training moves the feature head weights — the contrast
/// that makes the ablation test meaningful.
#[test]
fn features_on_trains_feature_weights() {
    let corpus = demo_corpus();
    let config = TrainConfig {
        epochs: 2,
        batch_size: 8,
        lr: 0.01,
        d_embed: 8,
        d_hidden: 8,
        use_features: true,
        seed: 17,
        ..TrainConfig::default()
    };
    let model = train_one(&corpus, &corpus, &config).unwrap();
    let head_dim = model.params.head_w.len();
    assert!(model.params.head_w[head_dim - 3..]
        .iter()
        .any(|&w| w != 0.0));
}

/// A small full protocol run: grid shape, score ranges, and report formats
/// hold together end to end.
#[test]
fn cross_validation_smoke() {
    let corpus = demo_corpus();
    let config = TrainConfig {
        epochs: 2,
        batch_size: 8,
        lr: 0.01,
        d_embed: 8,
        d_hidden: 8,
        vocab_size: 400,
        seed: 3,
        ..TrainConfig::default()
    };
    let report = run_cv(&corpus, 4, 1, &config, 1).unwrap();
    assert_eq!(report.cells.len(), 4);
    for cell in &report.cells {
        assert!((0.0..=1.0).contains(&cell.report.overall));
        assert!(cell.best_epoch >= 1 && cell.best_epoch <= 2);
    }
    let summary = report.summary();
    assert!(summary.min <= summary.mean && summary.mean <= summary.max);

    let csv = report.to_csv();
    assert_eq!(csv.lines().count(), 1 + 4 * 4);
    assert!(csv.starts_with("fold,run,m,score\n"));
    let json = report.to_json();
    assert_eq!(json["cells"].as_array().unwrap().len(), 4);
    assert_eq!(json["k"], 4);
}
