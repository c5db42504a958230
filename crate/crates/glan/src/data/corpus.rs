//! Corpus records, JSON-lines ingestion, and delay filtering.
//!
//! A corpus file is one JSON object per line, either
//! `{"type":"tweet","id","author","text","ts","parent"?,"label"?}` or
//! `{"type":"user","id","features"?}`. Tweets without a parent are cascade
//! sources and must carry a label; tweets with a parent attach to the
//! cascade of their chain's root.

use super::{DataError, DataResult};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Rumor classes. A corpus uses either the binary set {NR, FR} or the full
/// four-class set {NR, FR, UR, TR}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    /// Non-rumor.
    NR,
    /// False rumor.
    FR,
    /// Unverified rumor.
    UR,
    /// True rumor.
    TR,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::NR => "NR",
            Label::FR => "FR",
            Label::UR => "UR",
            Label::TR => "TR",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s {
            "NR" => Some(Label::NR),
            "FR" => Some(Label::FR),
            "UR" => Some(Label::UR),
            "TR" => Some(Label::TR),
            _ => None,
        }
    }
}

/// Which label universe a corpus uses, in canonical class-index order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelSet {
    Binary,
    Four,
}

impl LabelSet {
    pub fn classes(self) -> &'static [Label] {
        match self {
            LabelSet::Binary => &[Label::NR, Label::FR],
            LabelSet::Four => &[Label::NR, Label::FR, Label::UR, Label::TR],
        }
    }

    pub fn n_classes(self) -> usize {
        self.classes().len()
    }

    pub fn class_index(self, label: Label) -> Option<usize> {
        self.classes().iter().position(|&l| l == label)
    }

    /// Smallest label set covering every label that occurs.
    pub fn covering(labels: impl IntoIterator<Item = Label>) -> LabelSet {
        let four = labels
            .into_iter()
            .any(|l| matches!(l, Label::UR | Label::TR));
        if four {
            LabelSet::Four
        } else {
            LabelSet::Binary
        }
    }
}

/// One microblog post (source tweet or retweet/reply).
#[derive(Clone, Debug, PartialEq)]
pub struct Post {
    pub id: String,
    pub author: String,
    pub text: String,
    /// Seconds since epoch.
    pub ts: i64,
}

/// A source tweet with its retweets, ordered by ascending timestamp.
#[derive(Clone, Debug, PartialEq)]
pub struct Cascade {
    pub source: Post,
    pub retweets: Vec<Post>,
    pub label: Label,
}

impl Cascade {
    /// Authors of the source and every retweet, in post order.
    pub fn participants(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.source.author.as_str())
            .chain(self.retweets.iter().map(|r| r.author.as_str()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UserRecord {
    pub id: String,
    pub features: Option<Vec<f64>>,
}

/// Parsed corpus: cascades in file order of their source tweets, users
/// deduplicated (explicit records first, then implicit authors).
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub cascades: Vec<Cascade>,
    pub users: Vec<UserRecord>,
    pub label_set: LabelSet,
}

impl Corpus {
    pub fn n_cascades(&self) -> usize {
        self.cascades.len()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.cascades.iter().map(|c| c.label).collect()
    }
}

/// Evaluation delay: how much of each cascade is visible.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Delay {
    /// Keep retweets posted within this many seconds of the source.
    Finite(i64),
    /// Keep everything.
    Infinite,
}

impl std::fmt::Display for Delay {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Delay::Finite(s) => write!(f, "{s}s"),
            Delay::Infinite => write!(f, "inf"),
        }
    }
}

/// Copy of `cascade` keeping only retweets within `delay` of the source.
/// The source post and label are always retained.
pub fn time_filter(cascade: &Cascade, delay: Delay) -> Cascade {
    let retweets = match delay {
        Delay::Infinite => cascade.retweets.clone(),
        Delay::Finite(window) => cascade
            .retweets
            .iter()
            .filter(|r| r.ts - cascade.source.ts <= window)
            .cloned()
            .collect(),
    };
    Cascade {
        source: cascade.source.clone(),
        retweets,
        label: cascade.label,
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type")]
enum RawRecord {
    #[serde(rename = "tweet")]
    Tweet {
        id: String,
        author: String,
        text: String,
        ts: i64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        parent: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    #[serde(rename = "user")]
    User {
        id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        features: Option<Vec<f64>>,
    },
}

struct RawTweet {
    id: String,
    author: String,
    text: String,
    ts: i64,
    parent: Option<String>,
    label: Option<Label>,
}

/// Parse a JSON-lines corpus. An empty reader yields an empty corpus.
pub fn ingest(reader: impl BufRead) -> DataResult<Corpus> {
    let mut tweets: Vec<RawTweet> = Vec::new();
    let mut tweet_seen: HashMap<String, usize> = HashMap::new();
    let mut users: Vec<UserRecord> = Vec::new();
    let mut user_seen: HashMap<String, ()> = HashMap::new();

    for (line_no, line) in reader.lines().enumerate() {
        let line_no = line_no + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RawRecord = serde_json::from_str(&line).map_err(|e| DataError::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        match record {
            RawRecord::Tweet {
                id,
                author,
                text,
                ts,
                parent,
                label,
            } => {
                if tweet_seen.contains_key(&id) {
                    return Err(DataError::DuplicateTweet { line: line_no, id });
                }
                let label = match label {
                    None => None,
                    Some(s) => Some(Label::parse(&s).ok_or_else(|| DataError::UnknownLabel {
                        id: id.clone(),
                        label: s,
                    })?),
                };
                tweet_seen.insert(id.clone(), tweets.len());
                tweets.push(RawTweet {
                    id,
                    author,
                    text,
                    ts,
                    parent,
                    label,
                });
            }
            RawRecord::User { id, features } => {
                if user_seen.contains_key(&id) {
                    return Err(DataError::DuplicateUser { line: line_no, id });
                }
                user_seen.insert(id.clone(), ());
                users.push(UserRecord { id, features });
            }
        }
    }

    // Resolve each tweet to the root of its parent chain.
    let mut roots: Vec<usize> = Vec::with_capacity(tweets.len());
    for i in 0..tweets.len() {
        let mut at = i;
        let mut hops = 0;
        loop {
            match &tweets[at].parent {
                None => break,
                Some(pid) => {
                    at = *tweet_seen.get(pid).ok_or_else(|| DataError::DanglingParent {
                        id: tweets[i].id.clone(),
                        parent: pid.clone(),
                    })?;
                    hops += 1;
                    if hops > tweets.len() {
                        return Err(DataError::CyclicParent {
                            id: tweets[i].id.clone(),
                        });
                    }
                }
            }
        }
        roots.push(at);
    }

    // Cascades in file order of their source tweets.
    let mut cascade_of_root: HashMap<usize, usize> = HashMap::new();
    let mut cascades: Vec<Cascade> = Vec::new();
    for (i, t) in tweets.iter().enumerate() {
        if t.parent.is_none() {
            let label = t.label.ok_or_else(|| DataError::MissingLabel {
                id: t.id.clone(),
            })?;
            cascade_of_root.insert(i, cascades.len());
            cascades.push(Cascade {
                source: Post {
                    id: t.id.clone(),
                    author: t.author.clone(),
                    text: t.text.clone(),
                    ts: t.ts,
                },
                retweets: Vec::new(),
                label,
            });
        }
    }
    for (i, t) in tweets.iter().enumerate() {
        if t.parent.is_some() {
            let root = roots[i];
            let c = cascade_of_root[&root];
            if t.ts < cascades[c].source.ts {
                return Err(DataError::RetweetBeforeSource { id: t.id.clone() });
            }
            cascades[c].retweets.push(Post {
                id: t.id.clone(),
                author: t.author.clone(),
                text: t.text.clone(),
                ts: t.ts,
            });
        }
    }
    for c in &mut cascades {
        c.retweets.sort_by(|a, b| a.ts.cmp(&b.ts));
    }

    // Implicit users: authors mentioned without an explicit record, in
    // cascade scan order.
    for c in &cascades {
        for author in c.participants() {
            if !user_seen.contains_key(author) {
                user_seen.insert(author.to_string(), ());
                users.push(UserRecord {
                    id: author.to_string(),
                    features: None,
                });
            }
        }
    }

    let label_set = LabelSet::covering(cascades.iter().map(|c| c.label));
    Ok(Corpus {
        cascades,
        users,
        label_set,
    })
}

pub fn ingest_path(path: impl AsRef<Path>) -> DataResult<Corpus> {
    let file = std::fs::File::open(path)?;
    ingest(BufReader::new(file))
}

/// Serialize a corpus back to JSON lines (users first, then cascades).
pub fn write_corpus(corpus: &Corpus, w: &mut impl Write) -> DataResult<()> {
    for u in &corpus.users {
        let rec = RawRecord::User {
            id: u.id.clone(),
            features: u.features.clone(),
        };
        serde_json::to_writer(&mut *w, &rec).map_err(io_from_json)?;
        writeln!(w)?;
    }
    for c in &corpus.cascades {
        let rec = RawRecord::Tweet {
            id: c.source.id.clone(),
            author: c.source.author.clone(),
            text: c.source.text.clone(),
            ts: c.source.ts,
            parent: None,
            label: Some(c.label.as_str().to_string()),
        };
        serde_json::to_writer(&mut *w, &rec).map_err(io_from_json)?;
        writeln!(w)?;
        for r in &c.retweets {
            let rec = RawRecord::Tweet {
                id: r.id.clone(),
                author: r.author.clone(),
                text: r.text.clone(),
                ts: r.ts,
                parent: Some(c.source.id.clone()),
                label: None,
            };
            serde_json::to_writer(&mut *w, &rec).map_err(io_from_json)?;
            writeln!(w)?;
        }
    }
    Ok(())
}

fn io_from_json(e: serde_json::Error) -> DataError {
    DataError::Io(std::io::Error::new(std::io::ErrorKind::Other, e))
}
