//! Scaled dot-product and multi-head attention over tape variables.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{join_name, Bindings, Real, Tape, Tensor, Var};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AttentionError {
    #[error("attention has no usable key rows")]
    NoKeys,
    #[error("model width {d} is not divisible by head count {heads}")]
    HeadSplit { d: usize, heads: usize },
}

pub type AttnResult<T> = Result<T, AttentionError>;

/// Which width the score scaling √· uses: the per-head slice width, or the
/// full model width shared by all heads.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttnScale {
    #[default]
    PerHead,
    ModelDim,
}

/// Per-head query/key/value projections (each d×d/h) plus the output
/// transform (d×d) applied to the concatenated heads.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiHeadParams<T: Real> {
    pub wq: Vec<Tensor<T>>,
    pub wk: Vec<Tensor<T>>,
    pub wv: Vec<Tensor<T>>,
    pub wo: Tensor<T>,
}

/// Tape variables for one [`MultiHeadParams`] instance.
pub struct MultiHeadVars {
    pub wq: Vec<Var>,
    pub wk: Vec<Var>,
    pub wv: Vec<Var>,
    pub wo: Var,
}

impl<T: Real> MultiHeadParams<T> {
    pub fn init(d: usize, heads: usize, rng: &mut impl Rng) -> AttnResult<Self> {
        if heads == 0 || d % heads != 0 {
            return Err(AttentionError::HeadSplit { d, heads });
        }
        let slice = d / heads;
        let mut mat = |rows: usize, cols: usize| Tensor::uniform(vec![rows, cols], -0.1, 0.1, rng);
        Ok(MultiHeadParams {
            wq: (0..heads).map(|_| mat(d, slice)).collect(),
            wk: (0..heads).map(|_| mat(d, slice)).collect(),
            wv: (0..heads).map(|_| mat(d, slice)).collect(),
            wo: mat(d, d),
        })
    }

    pub fn heads(&self) -> usize {
        self.wq.len()
    }

    pub fn visit_with(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor<T>)) {
        for (i, w) in self.wq.iter().enumerate() {
            f(&join_name(prefix, &format!("wq.{i}")), w);
        }
        for (i, w) in self.wk.iter().enumerate() {
            f(&join_name(prefix, &format!("wk.{i}")), w);
        }
        for (i, w) in self.wv.iter().enumerate() {
            f(&join_name(prefix, &format!("wv.{i}")), w);
        }
        f(&join_name(prefix, "wo"), &self.wo);
    }

    pub fn visit_with_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        for (i, w) in self.wq.iter_mut().enumerate() {
            f(&join_name(prefix, &format!("wq.{i}")), w);
        }
        for (i, w) in self.wk.iter_mut().enumerate() {
            f(&join_name(prefix, &format!("wk.{i}")), w);
        }
        for (i, w) in self.wv.iter_mut().enumerate() {
            f(&join_name(prefix, &format!("wv.{i}")), w);
        }
        f(&join_name(prefix, "wo"), &mut self.wo);
    }

    /// Leaf every matrix onto the tape, recording names under `prefix`.
    pub fn bind(&self, tape: &Tape<T>, prefix: &str, reg: &mut Bindings) -> MultiHeadVars {
        let mut leaf = |name: String, t: &Tensor<T>| {
            let var = tape.leaf(t.clone());
            reg.record(name, var);
            var
        };
        MultiHeadVars {
            wq: self
                .wq
                .iter()
                .enumerate()
                .map(|(i, w)| leaf(join_name(prefix, &format!("wq.{i}")), w))
                .collect(),
            wk: self
                .wk
                .iter()
                .enumerate()
                .map(|(i, w)| leaf(join_name(prefix, &format!("wk.{i}")), w))
                .collect(),
            wv: self
                .wv
                .iter()
                .enumerate()
                .map(|(i, w)| leaf(join_name(prefix, &format!("wv.{i}")), w))
                .collect(),
            wo: leaf(join_name(prefix, "wo"), &self.wo),
        }
    }
}

fn attend<T: Real>(
    tape: &Tape<T>,
    q: Var,
    k: Var,
    v: Var,
    scale_dim: usize,
    mask: Option<&[bool]>,
) -> Var {
    let scores = tape.matmul_nt(q, k);
    let scaled = tape.scale(scores, 1.0 / (scale_dim as f64).sqrt());
    let weights = tape.row_softmax(scaled, mask);
    tape.matmul(weights, v)
}

fn check_mask(mask: Option<&[bool]>) -> AttnResult<()> {
    if mask.is_some_and(|m| m.iter().all(|&hidden| hidden)) {
        return Err(AttentionError::NoKeys);
    }
    Ok(())
}

/// softmax(QKᵀ/√d′)·V over rows, where d′ is the shared column width of Q and
/// K. Masked key positions receive exactly zero weight.
pub fn scaled_dot_attention<T: Real>(
    tape: &Tape<T>,
    q: Var,
    k: Var,
    v: Var,
    mask: Option<&[bool]>,
) -> AttnResult<Var> {
    check_mask(mask)?;
    let width = tape.value(q).dims2().1;
    Ok(attend(tape, q, k, v, width, mask))
}

/// Projects Q/K/V through each head, attends per head, concatenates the head
/// outputs, and applies the output transform. The result keeps the query's
/// width.
pub fn multi_head_attention<T: Real>(
    tape: &Tape<T>,
    q: Var,
    k: Var,
    v: Var,
    vars: &MultiHeadVars,
    scale: AttnScale,
    mask: Option<&[bool]>,
) -> AttnResult<Var> {
    check_mask(mask)?;
    let d = tape.value(q).dims2().1;
    let heads = vars.wq.len();
    if heads == 0 || d % heads != 0 {
        return Err(AttentionError::HeadSplit { d, heads });
    }
    let scale_dim = match scale {
        AttnScale::PerHead => d / heads,
        AttnScale::ModelDim => d,
    };
    let outputs: Vec<Var> = (0..heads)
        .map(|i| {
            let qi = tape.matmul(q, vars.wq[i]);
            let ki = tape.matmul(k, vars.wk[i]);
            let vi = tape.matmul(v, vars.wv[i]);
            attend(tape, qi, ki, vi, scale_dim, mask)
        })
        .collect();
    let merged = tape.concat_cols(&outputs);
    Ok(tape.matmul(merged, vars.wo))
}
