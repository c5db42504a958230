//! Scoring and study harnesses: classification metrics, early-detection
//! delay sweeps, and hyper-parameter sensitivity sweeps, with line-record
//! and plot-table output.

mod early;
mod metrics;
mod sensitivity;

pub use early::{
    default_delays, early_detection_sweep, early_detection_sweep_all, evaluate,
    evaluate_held_out, held_out,
};
pub use metrics::{metrics, ClassMetrics, EvalReport};
pub use sensitivity::{sensitivity_sweep, SweepAxis, SweepOutcome, SweepPoint, SweepValue};

use serde::Serialize;
use thiserror::Error;

use crate::data::{Delay, Label, LabelSet};
use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("got {preds} predictions for {golds} gold labels")]
    LengthMismatch { preds: usize, golds: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("every cascade in this corpus was seen in training")]
    NoHeldOut,
    #[error("label {} is outside the {set:?} class set", label.as_str())]
    UnknownLabel { label: Label, set: LabelSet },
    #[error("delays must be strictly ascending, got {prev} before {next}")]
    DelaysOutOfOrder { prev: Delay, next: Delay },
    #[error("{axis} sweep cannot take value {value:?}")]
    AxisValueMismatch { axis: &'static str, value: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type EvalResult<T> = Result<T, EvalError>;

/// Serialize items as JSON, one record per line.
pub fn records<S: Serialize>(items: &[S]) -> serde_json::Result<String> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item)?);
        out.push('\n');
    }
    Ok(out)
}

fn delay_cell(delay: Option<Delay>) -> String {
    match delay {
        None | Some(Delay::Infinite) => "inf".to_string(),
        Some(Delay::Finite(s)) => s.to_string(),
    }
}

/// Plot-ready accuracy curve: one `delay_s accuracy` row per report.
pub fn curve_table(reports: &[EvalReport]) -> String {
    let mut out = String::from("# delay_s accuracy\n");
    for report in reports {
        out.push_str(&format!(
            "{} {:.4}\n",
            delay_cell(report.delay),
            report.accuracy
        ));
    }
    out
}

/// Plot-ready sensitivity table: `value dev test` rows, skipped values as
/// comment lines.
pub fn sweep_table(points: &[SweepPoint]) -> String {
    let mut out = String::from("# value dev_accuracy test_accuracy\n");
    for point in points {
        match &point.outcome {
            SweepOutcome::Ran {
                dev_accuracy,
                test_accuracy,
            } => out.push_str(&format!(
                "{} {dev_accuracy:.4} {test_accuracy:.4}\n",
                point.value
            )),
            SweepOutcome::Skipped { reason } => {
                out.push_str(&format!("# {} skipped: {reason}\n", point.value))
            }
        }
    }
    out
}
