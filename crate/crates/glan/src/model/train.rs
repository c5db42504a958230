//! The training loop: shuffled mini-batches with Adam, per-epoch dev
//! evaluation, learning-rate decay on stalled dev accuracy, early stopping,
//! and best-checkpoint retention. Fully deterministic for a given config.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};

use super::checkpoint::Checkpoint;
use super::features::{user_feature_matrix, FeatureStats};
use super::forward::{argmax, build_view, forward_probs, predict_probs, ForwardCtx, ViewData};
use super::{batch_loss, GlanParams, ModelError, ModelResult, TrainConfig};
use crate::data::{split, Corpus, UserRecord, Vocab};
use crate::numerics::{AdamConfig, AdamState, Bindings, Real, Tape, Tensor};

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub dev_accuracy: f64,
    pub lr: f64,
    /// Gold-class probabilities clamped away from zero this epoch.
    pub clamped: usize,
}

/// A finished training run: the best-dev checkpoint and its log.
pub struct TrainOutcome<T: Real> {
    pub checkpoint: Checkpoint<T>,
    pub log: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_dev_accuracy: f64,
}

/// Train on `corpus` under `cfg`. The graph spans the train and dev splits;
/// the vocabulary comes from train-split texts alone. Dev accuracy is scored
/// every epoch and the parameters of the best epoch (ties resolve to the
/// latest) are returned.
pub fn train<T: Real>(corpus: &Corpus, cfg: &TrainConfig) -> ModelResult<TrainOutcome<T>> {
    cfg.validate()?;
    let splits = split(&corpus.cascades, cfg.seed)?;
    let label_set = corpus.label_set;

    let train_texts = splits.train.iter().flat_map(|&i| {
        let c = &corpus.cascades[i];
        std::iter::once(c.source.text.as_str())
            .chain(c.retweets.iter().map(|r| r.text.as_str()))
    });
    let vocab = Vocab::build(train_texts, cfg.min_count);

    let mut members: Vec<usize> = splits.train.iter().chain(&splits.dev).copied().collect();
    members.sort_unstable();
    let view = build_view(corpus, &members, &vocab, cfg.text_len);
    let tweet_of: HashMap<usize, usize> =
        members.iter().enumerate().map(|(t, &c)| (c, t)).collect();
    let train_tweets: Vec<usize> = splits.train.iter().map(|c| tweet_of[c]).collect();
    let dev_tweets: Vec<usize> = splits.dev.iter().map(|c| tweet_of[c]).collect();
    let golds: Vec<usize> = members
        .iter()
        .map(|&c| {
            let label = corpus.cascades[c].label;
            label_set.class_index(label).ok_or_else(|| {
                ModelError::Config(format!(
                    "label {} outside the corpus label set",
                    label.as_str()
                ))
            })
        })
        .collect::<ModelResult<_>>()?;

    let records: HashMap<&str, &UserRecord> =
        corpus.users.iter().map(|u| (u.id.as_str(), u)).collect();
    let stats = fit_train_stats(corpus, &splits.train, &records);
    let uf: Tensor<T> =
        user_feature_matrix(view.graph.user_ids(), &records, &stats, cfg.d_u, cfg.seed);

    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut params: GlanParams<T> = GlanParams::init(
        cfg,
        vocab.len(),
        view.graph.n_tweets(),
        view.graph.n_users(),
        label_set.n_classes(),
        &mut rng,
    )?;
    let mut adam = AdamState::new(AdamConfig {
        beta1: cfg.beta1,
        beta2: cfg.beta2,
        epsilon: 1e-8,
    });

    let mut lr = cfg.lr;
    let mut log = Vec::new();
    let mut best: Option<(f64, usize, GlanParams<T>)> = None;
    let mut stale_stop = 0usize;
    let mut stale_decay = 0usize;

    for epoch in 1..=cfg.max_epochs {
        let mut order = train_tweets.clone();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut clamped = 0usize;
        for (batch_no, batch) in order.chunks(cfg.batch_size).enumerate() {
            let tape = Tape::new();
            let mut reg = Bindings::new();
            let ctx = ForwardCtx {
                params: &params,
                store: &params.store,
                view: &view,
                uf: &uf,
                ablation: cfg.ablation,
                scale: cfg.scale,
            };
            let probs = forward_probs(&tape, &ctx, batch, &mut reg)?;
            let batch_golds: Vec<usize> = batch.iter().map(|&t| golds[t]).collect();
            let loss = batch_loss(&tape, &probs, &batch_golds);
            let loss_value = tape.value(loss).item().to_f64();
            if !loss_value.is_finite() {
                return Err(ModelError::Diverged {
                    epoch,
                    batch: batch_no,
                });
            }
            let mut grads = tape.backward(loss);
            let mut named = reg.grads(&mut grads);
            if let Some(g) = named.get_mut("text.embedding") {
                // The padding embedding must stay zero.
                g.data_mut()[..cfg.d].fill(T::ZERO);
            }
            adam.apply(&mut params, &named, lr)?;
            loss_sum += loss_value * batch.len() as f64;
            clamped += tape.clamp_events();
        }

        let train_accuracy = accuracy_on(&params, &view, &uf, cfg, &train_tweets, &golds)?;
        let dev_accuracy = accuracy_on(&params, &view, &uf, cfg, &dev_tweets, &golds)?;
        log.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train_tweets.len() as f64,
            train_accuracy,
            dev_accuracy,
            lr,
            clamped,
        });

        if best
            .as_ref()
            .map_or(true, |&(peak, _, _)| dev_accuracy >= peak)
        {
            best = Some((dev_accuracy, epoch, params.clone()));
            stale_stop = 0;
            stale_decay = 0;
        } else {
            stale_stop += 1;
            if stale_stop >= cfg.patience {
                break;
            }
            stale_decay += 1;
            if stale_decay >= cfg.decay_patience {
                lr = (lr * cfg.decay_factor).max(cfg.min_lr);
                stale_decay = 0;
            }
        }
    }

    let (best_dev_accuracy, best_epoch, best_params) =
        best.expect("max_epochs >= 1 guarantees at least one epoch");
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            config: cfg.clone(),
            label_set,
            params: best_params,
            vocab,
            tweet_ids: (0..view.graph.n_tweets())
                .map(|t| view.graph.tweet_id(t).to_string())
                .collect(),
            user_ids: view.graph.user_ids().to_vec(),
            stats,
        },
        log,
        best_epoch,
        best_dev_accuracy,
    })
}

/// Feature statistics over the users of the train-split cascades (first
/// appearance order) that have recorded features.
fn fit_train_stats(
    corpus: &Corpus,
    train: &[usize],
    records: &HashMap<&str, &UserRecord>,
) -> FeatureStats {
    let mut seen = HashSet::new();
    let mut rows: Vec<&[f64]> = Vec::new();
    for &i in train {
        for id in corpus.cascades[i].participants() {
            if seen.insert(id) {
                if let Some(features) = records.get(id).and_then(|r| r.features.as_deref()) {
                    rows.push(features);
                }
            }
        }
    }
    FeatureStats::fit(rows.iter().copied())
}

fn accuracy_on<T: Real>(
    params: &GlanParams<T>,
    view: &ViewData,
    uf: &Tensor<T>,
    cfg: &TrainConfig,
    targets: &[usize],
    golds: &[usize],
) -> ModelResult<f64> {
    let ctx = ForwardCtx {
        params,
        store: &params.store,
        view,
        uf,
        ablation: cfg.ablation,
        scale: cfg.scale,
    };
    let probs = predict_probs(&ctx, targets)?;
    let correct = probs
        .iter()
        .zip(targets)
        .filter(|(p, &t)| argmax(p) == golds[t])
        .count();
    Ok(correct as f64 / targets.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticConfig};
    use crate::model::Ablation;

    fn corpus(n: usize, seed: u64) -> Corpus {
        generate_synthetic(&SyntheticConfig {
            n_cascades: n,
            n_users: 8,
            vocab_size: 16,
            structure_signal: true,
            text_signal: true,
            seed,
        })
        .unwrap()
    }

    fn quick_config(epochs: usize) -> TrainConfig {
        let mut cfg = TrainConfig::small();
        cfg.max_epochs = epochs;
        cfg.batch_size = 8;
        cfg.seed = 1;
        cfg
    }

    #[test]
    fn fresh_model_loss_is_near_uniform_entropy() {
        let corpus = corpus(16, 2);
        let cfg = quick_config(1);
        let splits = split(&corpus.cascades, cfg.seed).unwrap();
        let vocab = Vocab::build(
            corpus.cascades.iter().map(|c| c.source.text.as_str()),
            1,
        );
        let mut members: Vec<usize> = splits.train.iter().chain(&splits.dev).copied().collect();
        members.sort_unstable();
        let view = build_view(&corpus, &members, &vocab, cfg.text_len);
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let params: GlanParams<f64> = GlanParams::init(
            &cfg,
            vocab.len(),
            view.graph.n_tweets(),
            view.graph.n_users(),
            2,
            &mut rng,
        )
        .unwrap();
        let uf = user_feature_matrix(
            view.graph.user_ids(),
            &HashMap::new(),
            &FeatureStats::default(),
            cfg.d_u,
            cfg.seed,
        );
        let golds: Vec<usize> = members
            .iter()
            .map(|&c| corpus.label_set.class_index(corpus.cascades[c].label).unwrap())
            .collect();

        let tape = Tape::new();
        let ctx = ForwardCtx {
            params: &params,
            store: &params.store,
            view: &view,
            uf: &uf,
            ablation: Ablation::Full,
            scale: cfg.scale,
        };
        let targets: Vec<usize> = (0..view.graph.n_tweets()).collect();
        let probs = forward_probs(&tape, &ctx, &targets, &mut Bindings::new()).unwrap();
        let loss = batch_loss(&tape, &probs, &golds);
        let value = tape.value(loss).item();
        assert!(
            (value - 2.0f64.ln()).abs() < 0.2,
            "initial loss {value} far from ln 2"
        );
    }

    #[test]
    fn training_reduces_loss_and_repeats_exactly() {
        let corpus = corpus(12, 3);
        let cfg = quick_config(8);
        let a = train::<f64>(&corpus, &cfg).unwrap();
        let b = train::<f64>(&corpus, &cfg).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.checkpoint, b.checkpoint);
        assert!(
            a.log.last().unwrap().train_loss < a.log.first().unwrap().train_loss,
            "loss did not decrease: {:?}",
            a.log
        );
        assert_eq!(a.log.first().unwrap().epoch, 1);
        for r in &a.log {
            assert!(r.lr <= cfg.lr && (0.0..=1.0).contains(&r.dev_accuracy));
        }
    }

    #[test]
    fn ablated_modules_keep_their_initial_parameters() {
        let corpus = corpus(12, 4);
        let mut cfg = quick_config(3);
        cfg.ablation = Ablation::OnlyText;
        let outcome = train::<f64>(&corpus, &cfg).unwrap();
        let ckpt = &outcome.checkpoint;

        let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
        let fresh: GlanParams<f64> = GlanParams::init(
            &cfg,
            ckpt.vocab.len(),
            ckpt.tweet_ids.len(),
            ckpt.user_ids.len(),
            2,
            &mut rng,
        )
        .unwrap();
        assert_eq!(ckpt.params.local, fresh.local);
        assert_eq!(ckpt.params.global, fresh.global);
        assert_eq!(ckpt.params.store, fresh.store);
        assert_ne!(ckpt.params.head_w, fresh.head_w);
        assert_ne!(ckpt.params.text.embedding, fresh.text.embedding);
    }

    #[test]
    fn padding_embedding_row_stays_zero_through_training() {
        let corpus = corpus(12, 5);
        let cfg = quick_config(4);
        let outcome = train::<f64>(&corpus, &cfg).unwrap();
        let row = outcome.checkpoint.params.text.embedding.row(0);
        assert!(row.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn runaway_learning_rate_reports_divergence() {
        let corpus = corpus(12, 6);
        let mut cfg = quick_config(6);
        cfg.lr = 1e155;
        match train::<f64>(&corpus, &cfg) {
            Err(ModelError::Diverged { epoch, .. }) => assert!(epoch <= 3),
            Err(other) => panic!("expected divergence, got error {other}"),
            Ok(_) => panic!("expected divergence, got a finished run"),
        }
    }

    #[test]
    fn patience_stops_training_early() {
        let corpus = corpus(12, 7);
        let mut cfg = quick_config(60);
        cfg.patience = 2;
        cfg.decay_patience = 1;
        let outcome = train::<f64>(&corpus, &cfg).unwrap();
        // Either the run stopped early or dev accuracy kept pace to the end.
        if outcome.log.len() < cfg.max_epochs {
            let n = outcome.log.len();
            assert!(n >= 3, "stopped implausibly early: {n} epochs");
            let peak = outcome.best_dev_accuracy;
            for r in &outcome.log[n - 2..] {
                assert!(r.dev_accuracy < peak);
            }
        }
        // Decay never lifts lr and respects the floor.
        for pair in outcome.log.windows(2) {
            assert!(pair[1].lr <= pair[0].lr);
            assert!(pair[1].lr >= cfg.min_lr);
        }
    }
}
