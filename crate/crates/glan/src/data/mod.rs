//! Corpus ingestion, vocabulary, the tweet–user graph, splits, delay
//! filtering, and the synthetic corpus generator.

mod corpus;
mod graph;
mod split;
mod synthetic;
mod vocab;

pub use corpus::{
    ingest, ingest_path, time_filter, write_corpus, Cascade, Corpus, Delay, Label, LabelSet,
    Post, UserRecord,
};
pub use graph::HeteroGraph;
pub use split::{split, SplitIndices};
pub use synthetic::{generate_synthetic, SyntheticConfig};
pub use vocab::{encode_text, tokenize, Vocab, PAD_ID, UNK_ID};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: malformed record: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: duplicate tweet id {id}")]
    DuplicateTweet { line: usize, id: String },
    #[error("line {line}: duplicate user id {id}")]
    DuplicateUser { line: usize, id: String },
    #[error("tweet {id}: parent {parent} does not resolve to a known tweet")]
    DanglingParent { id: String, parent: String },
    #[error("tweet {id}: cyclic parent chain")]
    CyclicParent { id: String },
    #[error("retweet {id} predates its source tweet")]
    RetweetBeforeSource { id: String },
    #[error("source tweet {id} has no label")]
    MissingLabel { id: String },
    #[error("tweet {id}: unknown label {label:?} (expected NR, FR, UR, or TR)")]
    UnknownLabel { id: String, label: String },
    #[error("need at least {min} cascades to split, got {n}")]
    TooFewCascades { n: usize, min: usize },
    #[error("{which} split is empty for {n} cascades")]
    EmptySplit { which: &'static str, n: usize },
    #[error("synthetic config: {0}")]
    InvalidSyntheticConfig(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type DataResult<T> = Result<T, DataError>;
