//! Token-sequence encoder: embedding lookup, multi-width convolutions with
//! ReLU, and max-over-time pooling concatenated to a d-vector per microblog.

use rand::Rng;
use thiserror::Error;

use crate::numerics::{join_name, Bindings, Real, Tape, Tensor, Var};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TextEncoderError {
    #[error("token id {id} outside vocabulary of {vocab} entries")]
    IdOutOfRange { id: usize, vocab: usize },
    #[error("sequence length {len} shorter than widest filter ({width})")]
    SequenceTooShort { len: usize, width: usize },
    #[error("output width {d} is not divisible by {widths} filter widths")]
    FilterSplit { d: usize, widths: usize },
}

pub type TextResult<T> = Result<T, TextEncoderError>;

/// Embedding table (row 0 reserved for padding and pinned to zero) plus one
/// filter bank per receptive width. Each width gets d/|widths| filters so the
/// pooled outputs concatenate back to a d-vector.
#[derive(Clone, Debug, PartialEq)]
pub struct TextEncoderParams<T: Real> {
    /// |vocab| × d.
    pub embedding: Tensor<T>,
    /// Per width, ascending: filters × width × d.
    pub filters: Vec<Tensor<T>>,
    /// Per width: one bias per filter.
    pub biases: Vec<Tensor<T>>,
}

pub struct TextEncoderVars {
    pub embedding: Var,
    pub filters: Vec<Var>,
    pub biases: Vec<Var>,
}

impl<T: Real> TextEncoderParams<T> {
    pub fn init(
        vocab: usize,
        d: usize,
        widths: &[usize],
        rng: &mut impl Rng,
    ) -> TextResult<Self> {
        if widths.is_empty() || d % widths.len() != 0 {
            return Err(TextEncoderError::FilterSplit {
                d,
                widths: widths.len(),
            });
        }
        debug_assert!(widths.windows(2).all(|w| w[0] < w[1]));
        let per_width = d / widths.len();
        let mut embedding = Tensor::uniform(vec![vocab, d], -0.1, 0.1, rng);
        embedding.data_mut()[..d].fill(T::ZERO);
        let filters = widths
            .iter()
            .map(|&w| Tensor::uniform(vec![per_width, w, d], -0.1, 0.1, rng))
            .collect();
        let biases = widths
            .iter()
            .map(|_| Tensor::zeros(vec![per_width]))
            .collect();
        Ok(TextEncoderParams {
            embedding,
            filters,
            biases,
        })
    }

    pub fn model_dim(&self) -> usize {
        self.embedding.shape()[1]
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.shape()[0]
    }

    pub fn widest_filter(&self) -> usize {
        self.filters
            .iter()
            .map(|f| f.shape()[1])
            .max()
            .expect("at least one filter bank")
    }

    pub fn visit_with(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor<T>)) {
        f(&join_name(prefix, "embedding"), &self.embedding);
        for (i, w) in self.filters.iter().enumerate() {
            f(&join_name(prefix, &format!("conv.{i}.filters")), w);
        }
        for (i, b) in self.biases.iter().enumerate() {
            f(&join_name(prefix, &format!("conv.{i}.bias")), b);
        }
    }

    pub fn visit_with_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        f(&join_name(prefix, "embedding"), &mut self.embedding);
        for (i, w) in self.filters.iter_mut().enumerate() {
            f(&join_name(prefix, &format!("conv.{i}.filters")), w);
        }
        for (i, b) in self.biases.iter_mut().enumerate() {
            f(&join_name(prefix, &format!("conv.{i}.bias")), b);
        }
    }

    pub fn bind(&self, tape: &Tape<T>, prefix: &str, reg: &mut Bindings) -> TextEncoderVars {
        let mut leaf = |name: String, t: &Tensor<T>| {
            let var = tape.leaf(t.clone());
            reg.record(name, var);
            var
        };
        TextEncoderVars {
            embedding: leaf(join_name(prefix, "embedding"), &self.embedding),
            filters: self
                .filters
                .iter()
                .enumerate()
                .map(|(i, w)| leaf(join_name(prefix, &format!("conv.{i}.filters")), w))
                .collect(),
            biases: self
                .biases
                .iter()
                .enumerate()
                .map(|(i, b)| leaf(join_name(prefix, &format!("conv.{i}.bias")), b))
                .collect(),
        }
    }
}

/// Stack the embedding rows for `ids` into an L×d matrix.
pub fn embed<T: Real>(tape: &Tape<T>, table: Var, ids: &[usize]) -> TextResult<Var> {
    let vocab = tape.value(table).dims2().0;
    if let Some(&id) = ids.iter().find(|&&id| id >= vocab) {
        return Err(TextEncoderError::IdOutOfRange { id, vocab });
    }
    Ok(tape.gather_rows(table, ids))
}

/// Convolve every filter bank over the rows of `x`, activate, max-pool each
/// feature map over time, and concatenate the pooled values in
/// (width-ascending, filter-index) order.
pub fn conv_maxpool<T: Real>(tape: &Tape<T>, x: Var, vars: &TextEncoderVars) -> TextResult<Var> {
    let len = tape.value(x).dims2().0;
    let widest = vars
        .filters
        .iter()
        .map(|&f| tape.value(f).shape()[1])
        .max()
        .expect("at least one filter bank");
    if len < widest {
        return Err(TextEncoderError::SequenceTooShort { len, width: widest });
    }
    let pooled: Vec<Var> = vars
        .filters
        .iter()
        .zip(&vars.biases)
        .map(|(&f, &b)| tape.conv_maxpool(x, f, b))
        .collect();
    Ok(tape.concat_vecs(&pooled))
}

/// Embed a fixed-length id sequence and reduce it to a d-vector.
pub fn encode_microblog<T: Real>(
    tape: &Tape<T>,
    vars: &TextEncoderVars,
    ids: &[usize],
) -> TextResult<Var> {
    let x = embed(tape, vars.embedding, ids)?;
    conv_maxpool(tape, x, vars)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{grad_check, max_abs_diff, GradCheckConfig, ParamVisit};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn params(vocab: usize, d: usize, widths: &[usize], seed: u64) -> TextEncoderParams<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        TextEncoderParams::init(vocab, d, widths, &mut rng).unwrap()
    }

    fn encode(p: &TextEncoderParams<f64>, ids: &[usize]) -> TextResult<Tensor<f64>> {
        let tape = Tape::forward_only();
        let vars = p.bind(&tape, "", &mut Bindings::new());
        let out = encode_microblog(&tape, &vars, ids)?;
        Ok(tape.value(out))
    }

    #[test]
    fn init_zeroes_the_padding_row_and_splits_filters() {
        let p = params(7, 6, &[2, 3], 1);
        assert!(p.embedding.row(0).iter().all(|&x| x == 0.0));
        assert!(p.embedding.row(1).iter().any(|&x| x != 0.0));
        assert_eq!(p.filters[0].shape(), &[3, 2, 6]);
        assert_eq!(p.filters[1].shape(), &[3, 3, 6]);
        assert_eq!(p.biases[0].shape(), &[3]);
        assert!(matches!(
            TextEncoderParams::<f64>::init(7, 7, &[2, 3], &mut ChaCha12Rng::seed_from_u64(0)),
            Err(TextEncoderError::FilterSplit { d: 7, widths: 2 })
        ));
    }

    #[test]
    fn embedding_lookup_copies_table_rows() {
        let p = params(7, 6, &[2, 3], 2);
        let tape = Tape::forward_only();
        let vars = p.bind(&tape, "", &mut Bindings::new());
        let x = embed(&tape, vars.embedding, &[0, 3, 3, 0]).unwrap();
        let m = tape.value(x);
        assert_eq!(m.shape(), &[4, 6]);
        assert!(m.row(0).iter().all(|&v| v == 0.0));
        assert_eq!(m.row(1), p.embedding.row(3));
        assert_eq!(m.row(1), m.row(2));
        assert_eq!(m.row(3), m.row(0));
    }

    #[test]
    fn out_of_range_id_is_rejected() {
        let p = params(7, 6, &[2, 3], 3);
        assert_eq!(
            encode(&p, &[0, 9, 1]).unwrap_err(),
            TextEncoderError::IdOutOfRange { id: 9, vocab: 7 }
        );
    }

    #[test]
    fn sequence_shorter_than_widest_filter_is_rejected() {
        let p = params(7, 6, &[2, 3], 4);
        assert_eq!(
            encode(&p, &[1, 2]).unwrap_err(),
            TextEncoderError::SequenceTooShort { len: 2, width: 3 }
        );
    }

    #[test]
    fn hand_convolution_with_one_scalar_filter() {
        // One width-2 sum filter over [1, 2, 3]: feature map [3, 5] pools to 5.
        let p = TextEncoderParams {
            embedding: Tensor::from_vec(vec![4, 1], vec![0.0, 1.0, 2.0, 3.0]),
            filters: vec![Tensor::from_vec(vec![1, 2, 1], vec![1.0, 1.0])],
            biases: vec![Tensor::zeros(vec![1])],
        };
        let out = encode(&p, &[1, 2, 3]).unwrap();
        assert_eq!(out.data(), &[5.0]);
    }

    #[test]
    fn all_zero_input_with_zero_bias_pools_to_zero() {
        let p = params(7, 6, &[2, 3], 5);
        let out = encode(&p, &[0, 0, 0, 0]).unwrap();
        assert!(out.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn full_scale_bank_outputs_model_width() {
        let p = params(11, 300, &[3, 4, 5], 6);
        assert_eq!(p.filters[0].shape(), &[100, 3, 300]);
        let ids: Vec<usize> = (0..50).map(|i| i % 11).collect();
        let out = encode(&p, &ids).unwrap();
        assert_eq!(out.shape(), &[300]);
    }

    #[test]
    fn encoding_is_deterministic_and_token_order_matters() {
        let p = params(9, 6, &[2, 3], 7);
        let a = encode(&p, &[0, 0, 1, 2, 3]).unwrap();
        let b = encode(&p, &[0, 0, 1, 2, 3]).unwrap();
        assert_eq!(a, b);
        let swapped = encode(&p, &[0, 0, 3, 2, 1]).unwrap();
        assert!(max_abs_diff(&a, &swapped) > 0.0);
    }

    #[test]
    fn extra_leading_padding_leaves_short_text_unchanged() {
        let p = params(9, 6, &[2, 3], 8);
        for ids in [vec![4usize, 7, 2], vec![5], vec![8, 8]] {
            let mut at_ten = vec![0; 10 - ids.len()];
            at_ten.extend(&ids);
            let mut at_fifteen = vec![0; 15 - ids.len()];
            at_fifteen.extend(&ids);
            let a = encode(&p, &at_ten).unwrap();
            let b = encode(&p, &at_fifteen).unwrap();
            assert_eq!(max_abs_diff(&a, &b), 0.0);
        }
    }

    struct Harness {
        params: TextEncoderParams<f64>,
        ids: Vec<usize>,
    }

    impl ParamVisit<f64> for Harness {
        fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor<f64>)) {
            self.params.visit_with("", f);
        }
        fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor<f64>)) {
            self.params.visit_with_mut("", f);
        }
    }

    fn harness_loss(h: &Harness, tape: &Tape<f64>, reg: &mut Bindings) -> Var {
        let vars = h.params.bind(tape, "", reg);
        let out = encode_microblog(tape, &vars, &h.ids).unwrap();
        let squared = tape.mul(out, out);
        tape.sum(squared)
    }

    #[test]
    fn encoder_gradients_pass_finite_difference_check() {
        let mut harness = Harness {
            params: params(6, 4, &[2, 3], 9),
            ids: vec![0, 0, 1, 4, 2, 5],
        };
        // Nonzero biases exercise their gradient path too.
        for b in &mut harness.params.biases {
            *b = Tensor::from_vec(b.shape().to_vec(), vec![0.05; b.len()]);
        }
        let tape = Tape::new();
        let mut reg = Bindings::new();
        let loss = harness_loss(&harness, &tape, &mut reg);
        let mut grads = tape.backward(loss);
        let named = reg.grads(&mut grads);
        let report = grad_check(
            &mut harness,
            &named,
            |h| {
                let tape = Tape::forward_only();
                let loss = harness_loss(h, &tape, &mut Bindings::new());
                tape.value(loss).item().to_f64()
            },
            &GradCheckConfig::default(),
        );
        assert!(report.passed(), "{report}");
    }
}
