//! Local relation encoding: self-attention over a cascade's retweets,
//! bilinear cross-attention from the source tweet, and a scalar fusion gate
//! producing the merged representation m̃.

use rand::Rng;
use thiserror::Error;

use crate::attention::{
    multi_head_attention, AttentionError, AttnScale, MultiHeadParams, MultiHeadVars,
};
use crate::numerics::{join_name, Bindings, Real, Tape, Tensor, Var};
use crate::text_encoder::{encode_microblog, TextEncoderError, TextEncoderVars};

/// Retweets beyond this cap are dropped, keeping the most recent ones.
pub const MAX_RETWEETS: usize = 128;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LocalError {
    #[error(transparent)]
    Attention(#[from] AttentionError),
    #[error(transparent)]
    Text(#[from] TextEncoderError),
}

pub type LocalResult<T> = Result<T, LocalError>;

/// Self-attention projections, the bilinear form scoring retweets against
/// the source, and the fusion gate.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalParams<T: Real> {
    pub self_attn: MultiHeadParams<T>,
    /// d×d bilinear matrix between refined retweets and the source vector.
    pub bilinear: Tensor<T>,
    pub gate_w1: Tensor<T>,
    pub gate_w2: Tensor<T>,
    pub gate_bias: Tensor<T>,
}

pub struct LocalVars {
    pub self_attn: MultiHeadVars,
    pub bilinear: Var,
    pub gate_w1: Var,
    pub gate_w2: Var,
    pub gate_bias: Var,
}

impl<T: Real> LocalParams<T> {
    pub fn init(d: usize, heads: usize, rng: &mut impl Rng) -> Result<Self, AttentionError> {
        Ok(LocalParams {
            self_attn: MultiHeadParams::init(d, heads, rng)?,
            bilinear: Tensor::uniform(vec![d, d], -0.1, 0.1, rng),
            gate_w1: Tensor::uniform(vec![d], -0.1, 0.1, rng),
            gate_w2: Tensor::uniform(vec![d], -0.1, 0.1, rng),
            gate_bias: Tensor::scalar(T::ZERO),
        })
    }

    pub fn visit_with(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor<T>)) {
        self.self_attn.visit_with(&join_name(prefix, "self_attn"), f);
        f(&join_name(prefix, "bilinear"), &self.bilinear);
        f(&join_name(prefix, "gate.w1"), &self.gate_w1);
        f(&join_name(prefix, "gate.w2"), &self.gate_w2);
        f(&join_name(prefix, "gate.bias"), &self.gate_bias);
    }

    pub fn visit_with_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        self.self_attn
            .visit_with_mut(&join_name(prefix, "self_attn"), f);
        f(&join_name(prefix, "bilinear"), &mut self.bilinear);
        f(&join_name(prefix, "gate.w1"), &mut self.gate_w1);
        f(&join_name(prefix, "gate.w2"), &mut self.gate_w2);
        f(&join_name(prefix, "gate.bias"), &mut self.gate_bias);
    }

    pub fn bind(&self, tape: &Tape<T>, prefix: &str, reg: &mut Bindings) -> LocalVars {
        let self_attn = self.self_attn.bind(tape, &join_name(prefix, "self_attn"), reg);
        let mut leaf = |name: &str, t: &Tensor<T>| {
            let var = tape.leaf(t.clone());
            reg.record(join_name(prefix, name), var);
            var
        };
        LocalVars {
            self_attn,
            bilinear: leaf("bilinear", &self.bilinear),
            gate_w1: leaf("gate.w1", &self.gate_w1),
            gate_w2: leaf("gate.w2", &self.gate_w2),
            gate_bias: leaf("gate.bias", &self.gate_bias),
        }
    }
}

/// Mix every retweet row with its cascade context via self-attention.
/// `mask` marks padded retweet slots.
pub fn refine_retweets<T: Real>(
    tape: &Tape<T>,
    retweets: Var,
    vars: &LocalVars,
    scale: AttnScale,
    mask: Option<&[bool]>,
) -> LocalResult<Var> {
    Ok(multi_head_attention(
        tape,
        retweets,
        retweets,
        retweets,
        &vars.self_attn,
        scale,
        mask,
    )?)
}

/// Score each refined retweet against the source through the bilinear form,
/// softmax into weights `s`, and pool the rows into `r = sᵀ R̃`.
pub fn cross_attend<T: Real>(
    tape: &Tape<T>,
    source: Var,
    refined: Var,
    bilinear: Var,
    mask: Option<&[bool]>,
) -> (Var, Var) {
    let projected = tape.matvec(bilinear, source);
    let scores = tape.matvec(refined, projected);
    let weights = tape.softmax_vec(scores, mask);
    let pooled = tape.vecmat(weights, refined);
    (weights, pooled)
}

/// Convex gate between the source representation and the pooled retweet
/// representation: α = σ(w₁ᵀm + w₂ᵀr + b), m̃ = α·m + (1−α)·r.
pub fn fuse<T: Real>(tape: &Tape<T>, source: Var, pooled: Var, vars: &LocalVars) -> Var {
    let gm = tape.dot(vars.gate_w1, source);
    let gr = tape.dot(vars.gate_w2, pooled);
    let pre = tape.add(tape.add(gm, gr), vars.gate_bias);
    let alpha = tape.sigmoid(pre);
    let keep = tape.scale_by_scalar(source, alpha);
    let complement = tape.affine_scalar(alpha, -1.0, 1.0);
    let mix = tape.scale_by_scalar(pooled, complement);
    tape.add(keep, mix)
}

/// Full local pipeline for one cascade given encoded token ids: encode the
/// source and retweets, refine, cross-attend, fuse. A cascade with no
/// retweets short-circuits to the source representation. `mask` (if given)
/// marks padded entries of `retweet_ids`.
pub fn encode_local<T: Real>(
    tape: &Tape<T>,
    text: &TextEncoderVars,
    local: &LocalVars,
    source_ids: &[usize],
    retweet_ids: &[Vec<usize>],
    scale: AttnScale,
    mask: Option<&[bool]>,
) -> LocalResult<Var> {
    let source = encode_microblog(tape, text, source_ids)?;
    if retweet_ids.is_empty() {
        return Ok(source);
    }
    let rows: Vec<Var> = retweet_ids
        .iter()
        .map(|ids| encode_microblog(tape, text, ids))
        .collect::<Result<_, _>>()?;
    let retweets = tape.concat_rows(&rows);
    let refined = refine_retweets(tape, retweets, local, scale, mask)?;
    let (_, pooled) = cross_attend(tape, source, refined, local.bilinear, mask);
    Ok(fuse(tape, source, pooled, local))
}
