//! Global relation encoding over the bipartite tweet–user graph: node
//! composition, projection into a shared space, LeakyReLU relation attention,
//! and multi-head ELU aggregation, iterated for a fixed number of synchronous
//! rounds.

use rand::Rng;
use thiserror::Error;

use crate::data::HeteroGraph;
use crate::numerics::{join_name, Bindings, Real, Tape, Tensor, Var};

/// Negative-side slope of the attention score activation.
pub const LEAKY_SLOPE: f64 = 0.2;
/// Per-center neighbor cap; the most active neighbors are kept.
pub const MAX_NEIGHBORS: usize = 256;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GlobalError {
    #[error("shared width {d} is not divisible by head count {heads}")]
    HeadSplit { d: usize, heads: usize },
    #[error("{kind} node {index} has no neighbors")]
    NoNeighbors { kind: &'static str, index: usize },
}

pub type GlobalResult<T> = Result<T, GlobalError>;

/// Trainable free vectors added to every node's content representation:
/// one d-row per tweet and one d_u-row per user of the training graph.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeStore<T: Real> {
    pub m0: Tensor<T>,
    pub u0: Tensor<T>,
}

pub struct NodeStoreVars {
    pub m0: Var,
    pub u0: Var,
}

impl<T: Real> NodeStore<T> {
    /// Free vectors start at zero, so untrained nodes contribute nothing.
    pub fn zeros(n_tweets: usize, n_users: usize, d: usize, d_u: usize) -> Self {
        NodeStore {
            m0: Tensor::zeros(vec![n_tweets, d]),
            u0: Tensor::zeros(vec![n_users, d_u]),
        }
    }

    pub fn visit_with(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor<T>)) {
        f(&join_name(prefix, "m0"), &self.m0);
        f(&join_name(prefix, "u0"), &self.u0);
    }

    pub fn visit_with_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        f(&join_name(prefix, "m0"), &mut self.m0);
        f(&join_name(prefix, "u0"), &mut self.u0);
    }

    pub fn bind(&self, tape: &Tape<T>, prefix: &str, reg: &mut Bindings) -> NodeStoreVars {
        let m0 = tape.leaf(self.m0.clone());
        reg.record(join_name(prefix, "m0"), m0);
        let u0 = tape.leaf(self.u0.clone());
        reg.record(join_name(prefix, "u0"), u0);
        NodeStoreVars { m0, u0 }
    }
}

/// One round of graph attention: per head, a score vector for each edge
/// direction and a transform for each neighbor type.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalLayer<T: Real> {
    /// Per head: 2d score vector for tweet centers attending user neighbors.
    pub a: Vec<Tensor<T>>,
    /// Per head: 2d score vector for user centers attending tweet neighbors.
    pub c: Vec<Tensor<T>>,
    /// Per head: d×(d/K) transform of user neighbors.
    pub wu: Vec<Tensor<T>>,
    /// Per head: d×(d/K) transform of tweet neighbors.
    pub wm: Vec<Tensor<T>>,
}

/// Projections into the shared space plus one [`GlobalLayer`] per round.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalParams<T: Real> {
    /// d×d tweet projection.
    pub w_m: Tensor<T>,
    /// d_u×d user projection.
    pub w_u: Tensor<T>,
    pub layers: Vec<GlobalLayer<T>>,
}

pub struct GlobalLayerVars {
    pub a: Vec<Var>,
    pub c: Vec<Var>,
    pub wu: Vec<Var>,
    pub wm: Vec<Var>,
}

pub struct GlobalVars {
    pub w_m: Var,
    pub w_u: Var,
    pub layers: Vec<GlobalLayerVars>,
}

impl<T: Real> GlobalParams<T> {
    pub fn init(
        d: usize,
        d_u: usize,
        heads: usize,
        rounds: usize,
        rng: &mut impl Rng,
    ) -> GlobalResult<Self> {
        if heads == 0 || d % heads != 0 {
            return Err(GlobalError::HeadSplit { d, heads });
        }
        let slice = d / heads;
        let mut layers = Vec::with_capacity(rounds);
        for _ in 0..rounds {
            layers.push(GlobalLayer {
                a: (0..heads)
                    .map(|_| Tensor::uniform(vec![2 * d], -0.1, 0.1, rng))
                    .collect(),
                c: (0..heads)
                    .map(|_| Tensor::uniform(vec![2 * d], -0.1, 0.1, rng))
                    .collect(),
                wu: (0..heads)
                    .map(|_| Tensor::uniform(vec![d, slice], -0.1, 0.1, rng))
                    .collect(),
                wm: (0..heads)
                    .map(|_| Tensor::uniform(vec![d, slice], -0.1, 0.1, rng))
                    .collect(),
            });
        }
        Ok(GlobalParams {
            w_m: Tensor::uniform(vec![d, d], -0.1, 0.1, rng),
            w_u: Tensor::uniform(vec![d_u, d], -0.1, 0.1, rng),
            layers,
        })
    }

    pub fn heads(&self) -> usize {
        self.layers.first().map_or(0, |l| l.a.len())
    }

    pub fn visit_with(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor<T>)) {
        f(&join_name(prefix, "w_m"), &self.w_m);
        f(&join_name(prefix, "w_u"), &self.w_u);
        for (t, layer) in self.layers.iter().enumerate() {
            let base = join_name(prefix, &format!("layer.{t}"));
            for (k, v) in layer.a.iter().enumerate() {
                f(&format!("{base}.a.{k}"), v);
            }
            for (k, v) in layer.c.iter().enumerate() {
                f(&format!("{base}.c.{k}"), v);
            }
            for (k, v) in layer.wu.iter().enumerate() {
                f(&format!("{base}.wu.{k}"), v);
            }
            for (k, v) in layer.wm.iter().enumerate() {
                f(&format!("{base}.wm.{k}"), v);
            }
        }
    }

    pub fn visit_with_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        f(&join_name(prefix, "w_m"), &mut self.w_m);
        f(&join_name(prefix, "w_u"), &mut self.w_u);
        for (t, layer) in self.layers.iter_mut().enumerate() {
            let base = join_name(prefix, &format!("layer.{t}"));
            for (k, v) in layer.a.iter_mut().enumerate() {
                f(&format!("{base}.a.{k}"), v);
            }
            for (k, v) in layer.c.iter_mut().enumerate() {
                f(&format!("{base}.c.{k}"), v);
            }
            for (k, v) in layer.wu.iter_mut().enumerate() {
                f(&format!("{base}.wu.{k}"), v);
            }
            for (k, v) in layer.wm.iter_mut().enumerate() {
                f(&format!("{base}.wm.{k}"), v);
            }
        }
    }

    pub fn bind(&self, tape: &Tape<T>, prefix: &str, reg: &mut Bindings) -> GlobalVars {
        let mut leaf = |name: String, t: &Tensor<T>| {
            let var = tape.leaf(t.clone());
            reg.record(name, var);
            var
        };
        let w_m = leaf(join_name(prefix, "w_m"), &self.w_m);
        let w_u = leaf(join_name(prefix, "w_u"), &self.w_u);
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(t, layer)| {
                let base = join_name(prefix, &format!("layer.{t}"));
                GlobalLayerVars {
                    a: layer
                        .a
                        .iter()
                        .enumerate()
                        .map(|(k, v)| leaf(format!("{base}.a.{k}"), v))
                        .collect(),
                    c: layer
                        .c
                        .iter()
                        .enumerate()
                        .map(|(k, v)| leaf(format!("{base}.c.{k}"), v))
                        .collect(),
                    wu: layer
                        .wu
                        .iter()
                        .enumerate()
                        .map(|(k, v)| leaf(format!("{base}.wu.{k}"), v))
                        .collect(),
                    wm: layer
                        .wm
                        .iter()
                        .enumerate()
                        .map(|(k, v)| leaf(format!("{base}.wm.{k}"), v))
                        .collect(),
                }
            })
            .collect();
        GlobalVars { w_m, w_u, layers }
    }
}

/// Per-center neighbor index lists from the graph, keeping at most `cap`
/// neighbors per node — the highest-weight (then lowest-index) ones.
pub fn neighbor_lists(graph: &HeteroGraph, cap: usize) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let select = |edges: &[(usize, u32)]| -> Vec<usize> {
        if edges.len() <= cap {
            return edges.iter().map(|&(n, _)| n).collect();
        }
        let mut ranked: Vec<(usize, u32)> = edges.to_vec();
        ranked.sort_by(|x, y| y.1.cmp(&x.1).then_with(|| x.0.cmp(&y.0)));
        ranked.truncate(cap);
        ranked.sort_unstable_by_key(|&(n, _)| n);
        ranked.into_iter().map(|(n, _)| n).collect()
    };
    let tweet_neighbors = (0..graph.n_tweets())
        .map(|j| select(graph.users_of(j)))
        .collect();
    let user_neighbors = (0..graph.n_users())
        .map(|i| select(graph.tweets_of(i)))
        .collect();
    (tweet_neighbors, user_neighbors)
}

/// Sum of a node's trainable free vector and its content representation.
pub fn compose_nodes<T: Real>(tape: &Tape<T>, free: Var, content: Var) -> Var {
    assert_eq!(
        tape.value(free).shape(),
        tape.value(content).shape(),
        "compose_nodes: free and content parts must align"
    );
    tape.add(free, content)
}

/// Project a composed node vector into the shared d-dimensional space.
pub fn project<T: Real>(tape: &Tape<T>, node: Var, w: Var) -> Var {
    tape.vecmat(node, w)
}

/// Attention of one center over its neighbor rows: per neighbor the score is
/// LeakyReLU(scoreᵀ[center; neighbor]), normalized by softmax.
pub fn relation_attention<T: Real>(
    tape: &Tape<T>,
    center: Var,
    neighbors: Var,
    score: Var,
) -> Var {
    let d = tape.value(center).dim1();
    let on_center = tape.slice_vec(score, 0, d);
    let on_neighbor = tape.slice_vec(score, d, d);
    let center_part = tape.dot(on_center, center);
    let neighbor_part = tape.matvec(neighbors, on_neighbor);
    let logits = tape.add_scalar(neighbor_part, center_part);
    let activated = tape.leaky_relu(logits, LEAKY_SLOPE);
    tape.softmax_vec(activated, None)
}

/// Multi-head neighborhood pooling: head k transforms the neighbor rows with
/// its own matrix, mixes them with its own weights, applies ELU, and the
/// heads concatenate to a d-vector.
pub fn aggregate<T: Real>(
    tape: &Tape<T>,
    neighbors: Var,
    weights: &[Var],
    transforms: &[Var],
) -> Var {
    assert_eq!(
        weights.len(),
        transforms.len(),
        "aggregate: one weight vector per transform"
    );
    let heads: Vec<Var> = weights
        .iter()
        .zip(transforms)
        .map(|(&w, &t)| {
            let transformed = tape.matmul(neighbors, t);
            let pooled = tape.vecmat(w, transformed);
            tape.elu(pooled)
        })
        .collect();
    tape.concat_vecs(&heads)
}

fn attend_side<T: Real>(
    tape: &Tape<T>,
    centers: Var,
    others: Var,
    neighbors: &[Vec<usize>],
    scores: &[Var],
    transforms: &[Var],
) -> Var {
    // Neighbor transforms are shared across centers, so apply each head's
    // matrix to the full other-side matrix once and gather rows per center.
    let transformed: Vec<Var> = transforms
        .iter()
        .map(|&t| tape.matmul(others, t))
        .collect();
    let rows: Vec<Var> = neighbors
        .iter()
        .enumerate()
        .map(|(j, ids)| {
            let center = tape.select_row(centers, j);
            let neighbor_rows = tape.gather_rows(others, ids);
            let heads: Vec<Var> = scores
                .iter()
                .zip(&transformed)
                .map(|(&score, &trans)| {
                    let weights = relation_attention(tape, center, neighbor_rows, score);
                    let gathered = tape.gather_rows(trans, ids);
                    let pooled = tape.vecmat(weights, gathered);
                    tape.elu(pooled)
                })
                .collect();
            tape.concat_vecs(&heads)
        })
        .collect();
    tape.concat_rows(&rows)
}

/// Run the stacked rounds over the whole graph. `m_composed` (n_m×d) and
/// `u_composed` (n_u×d_u) are the composed node representations; neighbor
/// lists index into the opposite side. Every round reads only the previous
/// round's representations. Returns the final per-tweet and per-user rows.
pub fn encode_global<T: Real>(
    tape: &Tape<T>,
    vars: &GlobalVars,
    m_composed: Var,
    u_composed: Var,
    tweet_neighbors: &[Vec<usize>],
    user_neighbors: &[Vec<usize>],
) -> GlobalResult<(Var, Var)> {
    for (index, ids) in tweet_neighbors.iter().enumerate() {
        if ids.is_empty() {
            return Err(GlobalError::NoNeighbors {
                kind: "tweet",
                index,
            });
        }
    }
    for (index, ids) in user_neighbors.iter().enumerate() {
        if ids.is_empty() {
            return Err(GlobalError::NoNeighbors {
                kind: "user",
                index,
            });
        }
    }
    let mut tweets = tape.matmul(m_composed, vars.w_m);
    let mut users = tape.matmul(u_composed, vars.w_u);
    for layer in &vars.layers {
        let next_tweets = attend_side(tape, tweets, users, tweet_neighbors, &layer.a, &layer.wu);
        let next_users = attend_side(tape, users, tweets, user_neighbors, &layer.c, &layer.wm);
        tweets = next_tweets;
        users = next_users;
    }
    Ok((tweets, users))
}
