//! Training configuration: presets, validation, and flat key=value
//! overrides used by config files and CLI flags.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use super::ModelError;
use crate::attention::AttnScale;

/// Which parts of the pipeline feed the classifier.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    /// Text, local, and global encodings all active.
    #[default]
    Full,
    /// Retweet attention off: the source text representation stands in for
    /// the fused local representation.
    NoLre,
    /// Graph attention off: the global half of the classifier input is zero.
    NoGre,
    /// Text only: both of the above.
    OnlyText,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [
        Ablation::Full,
        Ablation::NoLre,
        Ablation::NoGre,
        Ablation::OnlyText,
    ];

    pub fn uses_lre(self) -> bool {
        matches!(self, Ablation::Full | Ablation::NoGre)
    }

    pub fn uses_gre(self) -> bool {
        matches!(self, Ablation::Full | Ablation::NoLre)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoLre => "no_lre",
            Ablation::NoGre => "no_gre",
            Ablation::OnlyText => "only_text",
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ablation {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, ModelError> {
        match s {
            "full" => Ok(Ablation::Full),
            "no_lre" => Ok(Ablation::NoLre),
            "no_gre" => Ok(Ablation::NoGre),
            "only_text" => Ok(Ablation::OnlyText),
            other => Err(ModelError::Config(format!(
                "unknown ablation {other:?} (expected full, no_lre, no_gre, or only_text)"
            ))),
        }
    }
}

/// All knobs of a training run. `full()` is the production-scale configuration;
/// `small()` is a desk-scale preset used by tests and examples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Model width d; every representation the classifier sees has this width.
    pub d: usize,
    /// Static user feature width.
    pub d_u: usize,
    /// Token ids per microblog (shorter texts are left-padded).
    pub text_len: usize,
    /// Convolution window widths, ascending.
    pub kernel_widths: Vec<usize>,
    /// Filters per window width; widths × filters must equal d.
    pub filters_per_width: usize,
    /// Attention heads over retweet sequences.
    pub local_heads: usize,
    /// Attention heads over graph neighborhoods.
    pub global_heads: usize,
    /// Graph attention rounds.
    pub rounds: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Learning-rate multiplier applied after `decay_patience` epochs
    /// without a new best dev accuracy.
    pub decay_factor: f64,
    pub decay_patience: usize,
    pub min_lr: f64,
    pub max_epochs: usize,
    /// Stop after this many consecutive epochs below the best dev accuracy.
    pub patience: usize,
    /// Minimum token frequency for the vocabulary.
    pub min_count: usize,
    pub seed: u64,
    pub ablation: Ablation,
    pub scale: AttnScale,
}

impl TrainConfig {
    /// Full-scale defaults. The 300-dim text representation (3 widths x 100
    /// filters) must split evenly across heads, so the head count is 6, the
    /// nearest divisor of 300 to the usual 8.
    pub fn full() -> TrainConfig {
        TrainConfig {
            d: 300,
            d_u: 100,
            text_len: 50,
            kernel_widths: vec![3, 4, 5],
            filters_per_width: 100,
            local_heads: 6,
            global_heads: 6,
            rounds: 2,
            batch_size: 64,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            decay_factor: 0.5,
            decay_patience: 3,
            min_lr: 1e-5,
            max_epochs: 100,
            patience: 10,
            min_count: 1,
            seed: 0,
            ablation: Ablation::Full,
            scale: AttnScale::PerHead,
        }
    }

    pub fn small() -> TrainConfig {
        TrainConfig {
            d: 24,
            d_u: 16,
            text_len: 12,
            kernel_widths: vec![2, 3],
            filters_per_width: 12,
            local_heads: 4,
            global_heads: 4,
            rounds: 2,
            batch_size: 32,
            ..TrainConfig::full()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |msg: String| Err(ModelError::Config(msg));
        if self.kernel_widths.is_empty() {
            return fail("kernel_widths must not be empty".into());
        }
        if !self.kernel_widths.windows(2).all(|w| w[0] < w[1]) {
            return fail(format!(
                "kernel_widths must be strictly ascending, got {:?}",
                self.kernel_widths
            ));
        }
        if self.kernel_widths.len() * self.filters_per_width != self.d {
            return fail(format!(
                "{} widths × {} filters must equal d={}",
                self.kernel_widths.len(),
                self.filters_per_width,
                self.d
            ));
        }
        let widest = *self.kernel_widths.last().unwrap();
        if self.text_len < widest {
            return fail(format!(
                "text_len {} is shorter than the widest kernel {widest}",
                self.text_len
            ));
        }
        for (name, heads) in [("local_heads", self.local_heads), ("global_heads", self.global_heads)] {
            if heads == 0 || self.d % heads != 0 {
                return fail(format!("d={} is not divisible by {name}={heads}", self.d));
            }
        }
        if self.d_u == 0 {
            return fail("d_u must be positive".into());
        }
        if self.rounds == 0 {
            return fail("rounds must be at least 1".into());
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return fail("batch_size and max_epochs must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail(format!("lr must be positive and finite, got {}", self.lr));
        }
        for (name, beta) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return fail(format!("{name} must lie in [0, 1), got {beta}"));
            }
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return fail(format!(
                "decay_factor must lie in (0, 1], got {}",
                self.decay_factor
            ));
        }
        if self.min_count == 0 {
            return fail("min_count must be at least 1".into());
        }
        Ok(())
    }

    /// Apply one `key=value` override. Keys mirror the field names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ModelError> {
        fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ModelError> {
            value.parse().map_err(|_| {
                ModelError::Config(format!("bad value {value:?} for {key}"))
            })
        }
        match key {
            "d" => self.d = parse(key, value)?,
            "d_u" => self.d_u = parse(key, value)?,
            "text_len" => self.text_len = parse(key, value)?,
            "kernel_widths" => {
                self.kernel_widths = value
                    .split(',')
                    .map(|v| parse(key, v.trim()))
                    .collect::<Result<_, _>>()?;
            }
            "filters_per_width" => self.filters_per_width = parse(key, value)?,
            "local_heads" => self.local_heads = parse(key, value)?,
            "global_heads" => self.global_heads = parse(key, value)?,
            "rounds" => self.rounds = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "beta1" => self.beta1 = parse(key, value)?,
            "beta2" => self.beta2 = parse(key, value)?,
            "decay_factor" => self.decay_factor = parse(key, value)?,
            "decay_patience" => self.decay_patience = parse(key, value)?,
            "min_lr" => self.min_lr = parse(key, value)?,
            "max_epochs" => self.max_epochs = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            "min_count" => self.min_count = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "ablation" => self.ablation = value.parse()?,
            "scale" => {
                self.scale = match value {
                    "per_head" => AttnScale::PerHead,
                    "model_dim" => AttnScale::ModelDim,
                    other => {
                        return Err(ModelError::Config(format!(
                            "unknown scale {other:?} (expected per_head or model_dim)"
                        )))
                    }
                }
            }
            other => {
                return Err(ModelError::Config(format!("unknown config key {other:?}")));
            }
        }
        Ok(())
    }

    /// Apply a flat config file: one `key=value` per line, `#` comments and
    /// blank lines ignored.
    pub fn apply_file(&mut self, text: &str) -> Result<(), ModelError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ModelError::Config(format!(
                    "config line {}: expected key=value, got {line:?}",
                    lineno + 1
                )));
            };
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }
}
