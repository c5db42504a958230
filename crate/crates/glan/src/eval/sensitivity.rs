//! Hyper-parameter sensitivity sweeps: retrain per value, score dev and test.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::early::evaluate_held_out;
use super::{EvalError, EvalResult};
use crate::data::Corpus;
use crate::model::{train, TrainConfig};
use crate::numerics::Real;

/// Which knob a sensitivity sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    TweetLength,
    KernelSizes,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 2] = [SweepAxis::TweetLength, SweepAxis::KernelSizes];

    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::TweetLength => "tweet_length",
            SweepAxis::KernelSizes => "kernel_sizes",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SweepAxis::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown sweep axis {s:?} (tweet_length, kernel_sizes)"))
    }
}

/// One setting along a sweep axis: a text length, or a kernel-width set
/// (single width or a combination).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepValue {
    Length(usize),
    Kernels(Vec<usize>),
}

impl fmt::Display for SweepValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepValue::Length(n) => write!(f, "{n}"),
            SweepValue::Kernels(ws) => {
                let parts: Vec<String> = ws.iter().map(usize::to_string).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

impl SweepValue {
    /// Parse a `;`-separated value list for `axis`. Kernel combinations use
    /// `,` between widths, e.g. `"1;3;3,4,5"`; lengths may use either
    /// separator.
    pub fn parse_list(axis: SweepAxis, s: &str) -> EvalResult<Vec<SweepValue>> {
        let bad = |value: &str| EvalError::AxisValueMismatch {
            axis: axis.as_str(),
            value: value.to_string(),
        };
        let mut values = Vec::new();
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            match axis {
                SweepAxis::TweetLength => {
                    for item in part.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                        values.push(SweepValue::Length(
                            item.parse().map_err(|_| bad(item))?,
                        ));
                    }
                }
                SweepAxis::KernelSizes => {
                    let widths: Vec<usize> = part
                        .split(',')
                        .map(str::trim)
                        .filter(|p| !p.is_empty())
                        .map(|w| w.parse().map_err(|_| bad(part)))
                        .collect::<EvalResult<_>>()?;
                    if widths.is_empty() {
                        return Err(bad(part));
                    }
                    values.push(SweepValue::Kernels(widths));
                }
            }
        }
        if values.is_empty() {
            return Err(bad(s));
        }
        Ok(values)
    }
}

/// What happened at one sweep value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOutcome {
    Ran {
        dev_accuracy: f64,
        test_accuracy: f64,
    },
    Skipped {
        reason: String,
    },
}

/// One row of a sensitivity table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: String,
    pub outcome: SweepOutcome,
}

fn configure(base: &TrainConfig, axis: SweepAxis, value: &SweepValue) -> EvalResult<TrainConfig> {
    let mut cfg = base.clone();
    match (axis, value) {
        (SweepAxis::TweetLength, SweepValue::Length(n)) => cfg.text_len = *n,
        (SweepAxis::KernelSizes, SweepValue::Kernels(ws)) => {
            cfg.kernel_widths = ws.clone();
            cfg.d = cfg.filters_per_width * ws.len();
        }
        _ => {
            return Err(EvalError::AxisValueMismatch {
                axis: axis.as_str(),
                value: value.to_string(),
            })
        }
    }
    Ok(cfg)
}

/// Train one model per value (same corpus, same seed) and report dev/test
/// accuracy. Values that produce an invalid configuration — a kernel set
/// whose width count breaks head divisibility, a length shorter than the
/// widest kernel — are kept in the table as skipped rows.
pub fn sensitivity_sweep<T: Real>(
    corpus: &Corpus,
    base: &TrainConfig,
    axis: SweepAxis,
    values: &[SweepValue],
) -> EvalResult<Vec<SweepPoint>> {
    values
        .iter()
        .map(|value| {
            let cfg = configure(base, axis, value)?;
            let outcome = match cfg.validate() {
                Err(why) => SweepOutcome::Skipped {
                    reason: why.to_string(),
                },
                Ok(()) => {
                    let trained = train::<T>(corpus, &cfg)?;
                    let test_accuracy = evaluate_held_out(&trained.checkpoint, corpus)?.accuracy;
                    SweepOutcome::Ran {
                        dev_accuracy: trained.best_dev_accuracy,
                        test_accuracy,
                    }
                }
            };
            Ok(SweepPoint {
                value: value.to_string(),
                outcome,
            })
        })
        .collect()
}
