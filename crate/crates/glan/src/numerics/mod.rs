//! Dense real tensors, reverse-mode differentiation, activations, Adam,
//! finite-difference gradient checking, and flat binary parameter
//! serialization. Everything here is precision-generic over [`Real`]
//! (32- or 64-bit floats selected per run).

mod adam;
mod checkpoint;
mod grad_check;
mod linalg;
mod real;
mod tape;
mod tensor;

pub mod activations;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{read_params, read_precision, write_params, CHECKPOINT_VERSION};
pub use grad_check::{grad_check, GradCheckConfig, GradCheckReport};
pub use real::{Precision, Real};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("shape mismatch in {context}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        context: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("empty input to {0}")]
    EmptyInput(&'static str),
    #[error("non-finite value produced by {0}")]
    NonFinite(String),
    #[error("invalid checkpoint: {0}")]
    InvalidCheckpoint(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type NumericsResult<T> = Result<T, NumericsError>;

/// Named access to a set of trainable tensors, in a fixed deterministic
/// order. Implemented by model parameter structs; consumed by the Adam
/// optimizer, the gradient checker, and checkpoint serialization.
pub trait ParamVisit<T: Real> {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor<T>));
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor<T>));

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |_, _| n += 1);
        n
    }

    fn entry_count(&self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |_, t| n += t.len());
        n
    }
}

/// Joins a dotted parameter-name path, leaving bare names untouched when the
/// prefix is empty.
pub fn join_name(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// Name → tape-variable pairs recorded while leafing parameters onto a tape;
/// routes gradients back to named parameters after a backward pass.
#[derive(Debug, Default)]
pub struct Bindings {
    pairs: Vec<(String, Var)>,
}

impl Bindings {
    pub fn new() -> Self {
        Bindings::default()
    }

    pub fn record(&mut self, name: String, var: Var) {
        self.pairs.push((name, var));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|(name, _)| name.as_str())
    }

    pub fn var(&self, name: &str) -> Option<Var> {
        self.pairs
            .iter()
            .find(|(n, _)| n == name)
            .map(|&(_, var)| var)
    }

    /// Drains gradients for every bound parameter; parameters the loss never
    /// touched are simply absent from the result.
    pub fn grads<T: Real>(&self, grads: &mut Gradients<T>) -> std::collections::BTreeMap<String, Tensor<T>> {
        let mut out = std::collections::BTreeMap::new();
        for (name, var) in &self.pairs {
            if let Some(g) = grads.take(*var) {
                out.insert(name.clone(), g);
            }
        }
        out
    }
}

/// Largest absolute elementwise difference between two same-shaped tensors.
pub fn max_abs_diff<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> f64 {
    assert_eq!(a.shape(), b.shape(), "max_abs_diff: shape mismatch");
    a.data()
        .iter()
        .zip(b.data().iter())
        .map(|(&x, &y)| (x.to_f64() - y.to_f64()).abs())
        .fold(0.0, f64::max)
}
