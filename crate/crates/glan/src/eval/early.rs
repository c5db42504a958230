//! Whole-corpus evaluation and early-detection delay sweeps.
//!
//! A trained checkpoint classifies a cascade from its graph context, so
//! held-out cascades are scored *inside* the full corpus graph: the trained
//! tweet and user embeddings of the training cascades provide the context,
//! while only the never-trained cascades count toward the metrics.

use std::collections::HashSet;

use super::metrics::{metrics, EvalReport};
use super::{EvalError, EvalResult};
use crate::data::{time_filter, Cascade, Corpus, Delay, Label};
use crate::model::{predict, Checkpoint};
use crate::numerics::Real;

/// Hour marks for early-detection curves, matching the synthetic corpus
/// timescale (retweet offsets span up to 36 hours).
pub fn default_delays() -> Vec<Delay> {
    [0, 1, 2, 4, 8, 12, 24, 36]
        .into_iter()
        .map(|h| Delay::Finite(h * 3600))
        .collect()
}

/// Classify every cascade of `corpus` and score against its labels.
pub fn evaluate<T: Real>(ckpt: &Checkpoint<T>, corpus: &Corpus) -> EvalResult<EvalReport> {
    let predictions = predict(ckpt, corpus)?;
    let preds: Vec<Label> = predictions.iter().map(|p| p.label).collect();
    metrics(&preds, &corpus.labels(), ckpt.label_set)
}

fn held_out_indices<T: Real>(ckpt: &Checkpoint<T>, corpus: &Corpus) -> Vec<usize> {
    let seen: HashSet<&str> = ckpt.tweet_ids.iter().map(String::as_str).collect();
    (0..corpus.n_cascades())
        .filter(|&i| !seen.contains(corpus.cascades[i].source.id.as_str()))
        .collect()
}

/// Classify the whole corpus but score only the cascades the checkpoint
/// never trained on. The training cascades stay in the graph, so held-out
/// source tweets (whose stored embedding is zero) still see trained user and
/// tweet context through their shared participants.
pub fn evaluate_held_out<T: Real>(
    ckpt: &Checkpoint<T>,
    corpus: &Corpus,
) -> EvalResult<EvalReport> {
    let targets = held_out_indices(ckpt, corpus);
    if targets.is_empty() {
        return Err(EvalError::NoHeldOut);
    }
    let predictions = predict(ckpt, corpus)?;
    let preds: Vec<Label> = targets.iter().map(|&i| predictions[i].label).collect();
    let golds: Vec<Label> = targets
        .iter()
        .map(|&i| corpus.cascades[i].label)
        .collect();
    metrics(&preds, &golds, ckpt.label_set)
}

/// The cascades of `corpus` whose source tweets the checkpoint never trained
/// on — for a corpus the checkpoint was trained from, its test split.
pub fn held_out<T: Real>(ckpt: &Checkpoint<T>, corpus: &Corpus) -> Corpus {
    let seen: HashSet<&str> = ckpt.tweet_ids.iter().map(String::as_str).collect();
    Corpus {
        cascades: corpus
            .cascades
            .iter()
            .filter(|c| !seen.contains(c.source.id.as_str()))
            .cloned()
            .collect(),
        users: corpus.users.clone(),
        label_set: corpus.label_set,
    }
}

fn check_order(delays: &[Delay]) -> EvalResult<()> {
    for pair in delays.windows(2) {
        if pair[0] >= pair[1] {
            return Err(EvalError::DelaysOutOfOrder {
                prev: pair[0],
                next: pair[1],
            });
        }
    }
    Ok(())
}

fn restrict(corpus: &Corpus, cascades: Vec<Cascade>) -> Corpus {
    Corpus {
        cascades,
        users: corpus.users.clone(),
        label_set: corpus.label_set,
    }
}

/// Score the held-out cascades once per delay, each time truncating them to
/// the retweets posted within the delay window. The checkpoint is reused as
/// is — no retraining — and the training cascades keep their full retweet
/// sets: only the inputs being classified shrink with the window. Delays
/// must be strictly ascending; an infinite delay reproduces
/// [`evaluate_held_out`] exactly.
pub fn early_detection_sweep<T: Real>(
    ckpt: &Checkpoint<T>,
    corpus: &Corpus,
    delays: &[Delay],
) -> EvalResult<Vec<EvalReport>> {
    check_order(delays)?;
    let seen: HashSet<&str> = ckpt.tweet_ids.iter().map(String::as_str).collect();
    delays
        .iter()
        .map(|&delay| {
            let cascades = corpus
                .cascades
                .iter()
                .map(|c| {
                    if seen.contains(c.source.id.as_str()) {
                        c.clone()
                    } else {
                        time_filter(c, delay)
                    }
                })
                .collect();
            let mut report = evaluate_held_out(ckpt, &restrict(corpus, cascades))?;
            report.delay = Some(delay);
            Ok(report)
        })
        .collect()
}

/// Like [`early_detection_sweep`], but truncates and scores every cascade of
/// `corpus`, training cascades included.
pub fn early_detection_sweep_all<T: Real>(
    ckpt: &Checkpoint<T>,
    corpus: &Corpus,
    delays: &[Delay],
) -> EvalResult<Vec<EvalReport>> {
    check_order(delays)?;
    delays
        .iter()
        .map(|&delay| {
            let cascades = corpus.cascades.iter().map(|c| time_filter(c, delay)).collect();
            let mut report = evaluate(ckpt, &restrict(corpus, cascades))?;
            report.delay = Some(delay);
            Ok(report)
        })
        .collect()
}
