//! Trained-model persistence: a flat binary parameter file plus a JSON
//! metadata file (config, label set, vocabulary, node-row alignment, and
//! feature statistics) that together rebuild a [`Checkpoint`].

use serde::{Deserialize, Serialize};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use super::features::FeatureStats;
use super::{GlanParams, ModelResult, TrainConfig};
use crate::data::{LabelSet, Vocab};
use crate::numerics::{read_params, write_params, Real};

pub const PARAMS_FILE: &str = "params.bin";
pub const MODEL_META_FILE: &str = "model.json";

/// Everything needed to classify new cascades: trained parameters and the
/// preprocessing state they were trained against.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T: Real> {
    pub config: TrainConfig,
    pub label_set: LabelSet,
    pub params: GlanParams<T>,
    pub vocab: Vocab,
    /// Tweet ids aligned to the rows of `params.store.m0`.
    pub tweet_ids: Vec<String>,
    /// User ids aligned to the rows of `params.store.u0`.
    pub user_ids: Vec<String>,
    pub stats: FeatureStats,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    config: TrainConfig,
    label_set: LabelSet,
    vocab: Vec<String>,
    tweet_ids: Vec<String>,
    user_ids: Vec<String>,
    stats: FeatureStats,
}

/// Write `model.json` and `params.bin` under `dir`, creating it if needed.
/// Identical checkpoints serialize to byte-identical files.
pub fn save_checkpoint<T: Real>(ckpt: &Checkpoint<T>, dir: impl AsRef<Path>) -> ModelResult<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let meta = Meta {
        config: ckpt.config.clone(),
        label_set: ckpt.label_set,
        vocab: ckpt.vocab.tokens().to_vec(),
        tweet_ids: ckpt.tweet_ids.clone(),
        user_ids: ckpt.user_ids.clone(),
        stats: ckpt.stats.clone(),
    };
    let mut meta_out = BufWriter::new(File::create(dir.join(MODEL_META_FILE))?);
    serde_json::to_writer_pretty(&mut meta_out, &meta)?;
    meta_out.write_all(b"\n")?;
    meta_out.flush()?;
    let mut params_out = BufWriter::new(File::create(dir.join(PARAMS_FILE))?);
    write_params(&ckpt.params, &mut params_out)?;
    params_out.flush()?;
    Ok(())
}

/// Rebuild a checkpoint saved by [`save_checkpoint`]. The parameter file
/// must match the metadata in precision, names, and shapes.
pub fn load_checkpoint<T: Real>(dir: impl AsRef<Path>) -> ModelResult<Checkpoint<T>> {
    let dir = dir.as_ref();
    let meta: Meta = serde_json::from_reader(BufReader::new(File::open(
        dir.join(MODEL_META_FILE),
    )?))?;
    let vocab = Vocab::from_tokens(meta.vocab);
    let mut params = GlanParams::with_shapes(
        &meta.config,
        vocab.len(),
        meta.tweet_ids.len(),
        meta.user_ids.len(),
        meta.label_set.n_classes(),
    )?;
    read_params(
        &mut params,
        &mut BufReader::new(File::open(dir.join(PARAMS_FILE))?),
    )?;
    Ok(Checkpoint {
        config: meta.config,
        label_set: meta.label_set,
        params,
        vocab,
        tweet_ids: meta.tweet_ids,
        user_ids: meta.user_ids,
        stats: meta.stats,
    })
}
