//! The full classifier: parameter bundle, softmax head, training objective,
//! whole-pipeline forward passes, the training loop, and checkpointing.

mod checkpoint;
mod config;
mod features;
mod forward;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, MODEL_META_FILE, PARAMS_FILE};
pub use config::{Ablation, TrainConfig};
pub use features::{log_scale, user_feature_matrix, FeatureStats};
pub use forward::{
    argmax, build_view, forward_probs, grad_check_end_to_end, predict, predict_probs,
    ForwardCtx, Prediction, ViewData,
};
pub use train::{train, EpochRecord, TrainOutcome};

use rand::Rng;
use thiserror::Error;

use crate::attention::AttentionError;
use crate::data::DataError;
use crate::global_encoding::{GlobalError, GlobalParams, NodeStore};
use crate::local_encoding::{LocalError, LocalParams};
use crate::numerics::{join_name, Bindings, NumericsError, ParamVisit, Real, Tape, Tensor, Var};
use crate::text_encoder::{TextEncoderError, TextEncoderParams};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Text(#[from] TextEncoderError),
    #[error(transparent)]
    Attention(#[from] AttentionError),
    #[error(transparent)]
    Global(#[from] GlobalError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },
    #[error("checkpoint embedding rows ({params}) do not match its vocabulary ({vocab} ids)")]
    VocabMismatch { params: usize, vocab: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("metadata: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<LocalError> for ModelError {
    fn from(e: LocalError) -> Self {
        match e {
            LocalError::Attention(a) => ModelError::Attention(a),
            LocalError::Text(t) => ModelError::Text(t),
        }
    }
}

pub type ModelResult<T> = Result<T, ModelError>;

/// Every trainable tensor of the pipeline, plus the classifier head.
#[derive(Clone, Debug, PartialEq)]
pub struct GlanParams<T: Real> {
    pub text: TextEncoderParams<T>,
    pub local: LocalParams<T>,
    pub global: GlobalParams<T>,
    /// Free node vectors aligned to the training graph.
    pub store: NodeStore<T>,
    /// 2d × classes.
    pub head_w: Tensor<T>,
    /// Per-class bias.
    pub head_b: Tensor<T>,
}

pub struct HeadVars {
    pub w: Var,
    pub b: Var,
}

impl<T: Real> GlanParams<T> {
    pub fn init(
        cfg: &TrainConfig,
        vocab_len: usize,
        n_tweets: usize,
        n_users: usize,
        n_classes: usize,
        rng: &mut impl Rng,
    ) -> ModelResult<GlanParams<T>> {
        Ok(GlanParams {
            text: TextEncoderParams::init(vocab_len, cfg.d, &cfg.kernel_widths, rng)?,
            local: LocalParams::init(cfg.d, cfg.local_heads, rng)?,
            global: GlobalParams::init(cfg.d, cfg.d_u, cfg.global_heads, cfg.rounds, rng)?,
            store: NodeStore::zeros(n_tweets, n_users, cfg.d, cfg.d_u),
            head_w: Tensor::uniform(vec![2 * cfg.d, n_classes], -0.1, 0.1, rng),
            head_b: Tensor::zeros(vec![n_classes]),
        })
    }

    /// Zero-valued parameters with the shapes `init` would produce, for
    /// filling from a checkpoint.
    pub fn with_shapes(
        cfg: &TrainConfig,
        vocab_len: usize,
        n_tweets: usize,
        n_users: usize,
        n_classes: usize,
    ) -> ModelResult<GlanParams<T>> {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(0);
        let mut params =
            GlanParams::init(cfg, vocab_len, n_tweets, n_users, n_classes, &mut rng)?;
        params.visit_params_mut(&mut |_, t| *t = Tensor::zeros(t.shape().to_vec()));
        Ok(params)
    }

    pub fn model_dim(&self) -> usize {
        self.text.model_dim()
    }

    pub fn n_classes(&self) -> usize {
        self.head_b.dim1()
    }

    pub fn bind_head(&self, tape: &Tape<T>, prefix: &str, reg: &mut Bindings) -> HeadVars {
        let w = tape.leaf(self.head_w.clone());
        reg.record(join_name(prefix, "w"), w);
        let b = tape.leaf(self.head_b.clone());
        reg.record(join_name(prefix, "b"), b);
        HeadVars { w, b }
    }
}

impl<T: Real> ParamVisit<T> for GlanParams<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor<T>)) {
        self.text.visit_with("text", f);
        self.local.visit_with("local", f);
        self.global.visit_with("global", f);
        self.store.visit_with("store", f);
        f("head.w", &self.head_w);
        f("head.b", &self.head_b);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        self.text.visit_with_mut("text", f);
        self.local.visit_with_mut("local", f);
        self.global.visit_with_mut("global", f);
        self.store.visit_with_mut("store", f);
        f("head.w", &mut self.head_w);
        f("head.b", &mut self.head_b);
    }
}

/// Class probabilities from the fused local representation and the graph
/// representation: softmax(W[m̃; m_global] + b).
pub fn classify<T: Real>(
    tape: &Tape<T>,
    m_local: Var,
    m_global: Var,
    head: &HeadVars,
) -> Var {
    let joint = tape.concat_vecs(&[m_local, m_global]);
    let logits = tape.add(tape.vecmat(joint, head.w), head.b);
    tape.softmax_vec(logits, None)
}

/// Mean negative log-likelihood of the gold classes over a batch.
pub fn batch_loss<T: Real>(tape: &Tape<T>, probs: &[Var], golds: &[usize]) -> Var {
    assert_eq!(probs.len(), golds.len(), "one gold label per probability vector");
    assert!(!probs.is_empty(), "empty batch has no loss");
    let terms: Vec<Var> = probs
        .iter()
        .zip(golds)
        .map(|(&p, &gold)| tape.nll_from_probs(p, gold))
        .collect();
    tape.mean_scalars(&terms)
}
