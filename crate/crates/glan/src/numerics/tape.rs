//! Reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! A [`Tape`] records one forward computation as an append-only list of
//! nodes. Each node holds its forward value and a backward closure that
//! routes the node's output gradient to its inputs. `backward` replays the
//! nodes in reverse creation order, which is always a valid topological
//! order because operands must exist before an op can reference them.

use super::activations;
use super::linalg;
use super::real::Real;
use super::tensor::Tensor;
use std::cell::{Cell, RefCell};
use std::sync::Arc;

/// Handle to a value on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

type BackFn<T> = Box<dyn Fn(&Tensor<T>, &mut GradSink<'_, T>)>;

struct Node<T: Real> {
    value: Tensor<T>,
    back: Option<BackFn<T>>,
}

/// Accumulates gradient contributions flowing to the inputs of one node.
pub struct GradSink<'a, T: Real> {
    grads: &'a mut Vec<Option<Tensor<T>>>,
    consumer: usize,
}

impl<T: Real> GradSink<'_, T> {
    pub fn add(&mut self, v: Var, g: Tensor<T>) {
        debug_assert!(
            v.0 < self.consumer,
            "gradient routed to node {} from earlier node {}",
            v.0,
            self.consumer
        );
        match &mut self.grads[v.0] {
            Some(acc) => acc.accumulate(&g),
            slot @ None => *slot = Some(g),
        }
    }
}

/// Gradients of one scalar output with respect to every tape node.
pub struct Gradients<T: Real> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    /// Gradient for `v`, if any path reached it.
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

/// Wengert list recording a single forward pass.
pub struct Tape<T: Real> {
    nodes: RefCell<Vec<Node<T>>>,
    record_grads: bool,
    clamp_events: Cell<usize>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: RefCell::new(Vec::new()),
            record_grads: true,
            clamp_events: Cell::new(0),
        }
    }

    /// A tape that keeps values but drops backward closures; `backward` is
    /// unavailable. Used for inference passes.
    pub fn forward_only() -> Self {
        Tape {
            record_grads: false,
            ..Self::new()
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.borrow().len()
    }

    /// Times a cross-entropy probability had to be clamped away from zero.
    pub fn clamp_events(&self) -> usize {
        self.clamp_events.get()
    }

    /// Forward value of `v` (cheap reference-counted clone).
    pub fn value(&self, v: Var) -> Tensor<T> {
        self.nodes.borrow()[v.0].value.clone()
    }

    fn push_node(&self, value: Tensor<T>, back: Option<BackFn<T>>) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, back });
        Var(nodes.len() - 1)
    }

    fn push_op(
        &self,
        value: Tensor<T>,
        back: impl Fn(&Tensor<T>, &mut GradSink<'_, T>) + 'static,
    ) -> Var {
        let back: Option<BackFn<T>> = if self.record_grads {
            Some(Box::new(back))
        } else {
            None
        };
        self.push_node(value, back)
    }

    /// Record an input value (parameter or constant).
    pub fn leaf(&self, value: Tensor<T>) -> Var {
        self.push_node(value, None)
    }

    /// Reverse pass from a scalar `loss`. Returns gradients for every node
    /// reached, keyed by [`Var`].
    pub fn backward(&self, loss: Var) -> Gradients<T> {
        assert!(
            self.record_grads,
            "backward() called on a forward-only tape"
        );
        let nodes = self.nodes.borrow();
        assert_eq!(
            nodes[loss.0].value.len(),
            1,
            "backward seed must be a scalar, got shape {:?}",
            nodes[loss.0].value.shape()
        );
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; nodes.len()];
        grads[loss.0] = Some(Tensor::filled(
            nodes[loss.0].value.shape().to_vec(),
            T::ONE,
        ));
        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].clone() else { continue };
            if let Some(back) = &nodes[id].back {
                let mut sink = GradSink {
                    grads: &mut grads,
                    consumer: id,
                };
                back(&g, &mut sink);
            }
        }
        Gradients { grads }
    }

    // ===== elementwise =====

    pub fn add(&self, a: Var, b: Var) -> Var {
        let out = self.value(a).zip_map(&self.value(b), |x, y| x + y);
        self.push_op(out, move |g, sink| {
            sink.add(a, g.clone());
            sink.add(b, g.clone());
        })
    }

    pub fn sub(&self, a: Var, b: Var) -> Var {
        let out = self.value(a).zip_map(&self.value(b), |x, y| x - y);
        self.push_op(out, move |g, sink| {
            sink.add(a, g.clone());
            sink.add(b, g.scale_values(-T::ONE));
        })
    }

    pub fn mul(&self, a: Var, b: Var) -> Var {
        let av = self.value(a);
        let bv = self.value(b);
        let out = av.zip_map(&bv, |x, y| x * y);
        self.push_op(out, move |g, sink| {
            sink.add(a, g.zip_map(&bv, |gi, y| gi * y));
            sink.add(b, g.zip_map(&av, |gi, x| gi * x));
        })
    }

    pub fn scale(&self, a: Var, c: f64) -> Var {
        let c = T::from_f64(c);
        let out = self.value(a).scale_values(c);
        self.push_op(out, move |g, sink| sink.add(a, g.scale_values(c)))
    }

    pub fn sum(&self, a: Var) -> Var {
        let av = self.value(a);
        let total: T = av.data().iter().copied().sum();
        let shape = av.shape().to_vec();
        self.push_op(Tensor::scalar(total), move |g, sink| {
            sink.add(a, Tensor::filled(shape.clone(), g.item()));
        })
    }

    /// Arithmetic mean of scalar vars (used for batch loss reduction).
    pub fn mean_scalars(&self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "mean_scalars: empty input");
        let inv = T::from_f64(1.0 / parts.len() as f64);
        let mut total = T::ZERO;
        for &p in parts {
            total += self.value(p).item();
        }
        let parts: Vec<Var> = parts.to_vec();
        self.push_op(Tensor::scalar(total * inv), move |g, sink| {
            let share = g.item() * inv;
            for &p in &parts {
                sink.add(p, Tensor::scalar(share));
            }
        })
    }

    /// Broadcast-add a scalar var to every entry of a rank-1 var.
    pub fn add_scalar(&self, x: Var, s: Var) -> Var {
        let sv = self.value(s).item();
        let out = self.value(x).map(|v| v + sv);
        self.push_op(out, move |g, sink| {
            sink.add(x, g.clone());
            sink.add(s, Tensor::scalar(g.data().iter().copied().sum()));
        })
    }

    /// Multiply every entry of `x` by a scalar var.
    pub fn scale_by_scalar(&self, x: Var, s: Var) -> Var {
        let xv = self.value(x);
        let sv = self.value(s).item();
        let out = xv.scale_values(sv);
        self.push_op(out, move |g, sink| {
            sink.add(x, g.scale_values(sv));
            let ds: T = g
                .data()
                .iter()
                .zip(xv.data().iter())
                .map(|(&gi, &xi)| gi * xi)
                .sum();
            sink.add(s, Tensor::scalar(ds));
        })
    }

    /// `k·s + c` on a scalar var.
    pub fn affine_scalar(&self, s: Var, k: f64, c: f64) -> Var {
        let (k, c) = (T::from_f64(k), T::from_f64(c));
        let out = Tensor::scalar(k * self.value(s).item() + c);
        self.push_op(out, move |g, sink| {
            sink.add(s, Tensor::scalar(k * g.item()));
        })
    }

    // ===== activations =====

    pub fn relu(&self, a: Var) -> Var {
        let av = self.value(a);
        let out = av.map(activations::relu);
        self.push_op(out, move |g, sink| {
            sink.add(a, g.zip_map(&av, |gi, x| if x > T::ZERO { gi } else { T::ZERO }));
        })
    }

    pub fn leaky_relu(&self, a: Var, slope: f64) -> Var {
        let slope = T::from_f64(slope);
        let av = self.value(a);
        let out = av.map(|x| activations::leaky_relu(x, slope));
        self.push_op(out, move |g, sink| {
            sink.add(
                a,
                g.zip_map(&av, |gi, x| if x >= T::ZERO { gi } else { gi * slope }),
            );
        })
    }

    pub fn elu(&self, a: Var) -> Var {
        let av = self.value(a);
        let out = av.map(activations::elu);
        let saved = out.clone();
        self.push_op(out, move |g, sink| {
            let mut dx = Vec::with_capacity(g.len());
            for i in 0..g.len() {
                let gi = g.data()[i];
                dx.push(if av.data()[i] >= T::ZERO {
                    gi
                } else {
                    gi * (saved.data()[i] + T::ONE)
                });
            }
            sink.add(a, Tensor::from_vec(av.shape().to_vec(), dx));
        })
    }

    pub fn sigmoid(&self, a: Var) -> Var {
        let out = self.value(a).map(activations::sigmoid);
        let saved = out.clone();
        self.push_op(out, move |g, sink| {
            sink.add(a, g.zip_map(&saved, |gi, y| gi * y * (T::ONE - y)));
        })
    }

    // ===== softmax =====

    /// Max-subtracted softmax over a rank-1 var. Masked entries receive
    /// exactly zero weight and zero gradient.
    pub fn softmax_vec(&self, a: Var, mask: Option<&[bool]>) -> Var {
        let av = self.value(a);
        let n = av.dim1();
        let mut out = vec![T::ZERO; n];
        activations::softmax_masked_into(av.data(), mask, &mut out);
        let out = Tensor::from_vec(vec![n], out);
        let saved = out.clone();
        self.push_op(out, move |g, sink| {
            sink.add(a, softmax_grad_row(g.data(), saved.data(), saved.shape()));
        })
    }

    /// Row-wise softmax of a rank-2 var; `mask` (over columns) marks keys
    /// excluded from every row.
    pub fn row_softmax(&self, a: Var, mask: Option<&[bool]>) -> Var {
        let av = self.value(a);
        let (m, n) = av.dims2();
        let mut out = vec![T::ZERO; m * n];
        for i in 0..m {
            activations::softmax_masked_into(av.row(i), mask, &mut out[i * n..(i + 1) * n]);
        }
        let out = Tensor::from_vec(vec![m, n], out);
        let saved = out.clone();
        self.push_op(out, move |g, sink| {
            let mut dx = vec![T::ZERO; m * n];
            for i in 0..m {
                let gr = &g.data()[i * n..(i + 1) * n];
                let yr = saved.row(i);
                let s: T = gr.iter().zip(yr.iter()).map(|(&gi, &yi)| gi * yi).sum();
                for j in 0..n {
                    dx[i * n + j] = yr[j] * (gr[j] - s);
                }
            }
            sink.add(a, Tensor::from_vec(vec![m, n], dx));
        })
    }

    // ===== linear algebra =====

    pub fn matmul(&self, a: Var, b: Var) -> Var {
        let av = self.value(a);
        let bv = self.value(b);
        let out = linalg::mm(&av, &bv);
        self.push_op(out, move |g, sink| {
            sink.add(a, linalg::mm_nt(g, &bv));
            sink.add(b, linalg::mm_tn(&av, g));
        })
    }

    /// `a · bᵀ` for `a: m×k`, `b: n×k`.
    pub fn matmul_nt(&self, a: Var, b: Var) -> Var {
        let av = self.value(a);
        let bv = self.value(b);
        let out = linalg::mm_nt(&av, &bv);
        self.push_op(out, move |g, sink| {
            sink.add(a, linalg::mm(g, &bv));
            sink.add(b, linalg::mm_tn(g, &av));
        })
    }

    pub fn matvec(&self, a: Var, x: Var) -> Var {
        let av = self.value(a);
        let xv = self.value(x);
        let out = linalg::matvec(&av, &xv);
        self.push_op(out, move |g, sink| {
            sink.add(a, linalg::outer(g, &xv));
            sink.add(x, linalg::vecmat(g, &av));
        })
    }

    /// `xᵀ · a` for `x: m`, `a: m×n`.
    pub fn vecmat(&self, x: Var, a: Var) -> Var {
        let xv = self.value(x);
        let av = self.value(a);
        let out = linalg::vecmat(&xv, &av);
        self.push_op(out, move |g, sink| {
            sink.add(x, linalg::matvec(&av, g));
            sink.add(a, linalg::outer(&xv, g));
        })
    }

    pub fn dot(&self, x: Var, y: Var) -> Var {
        let xv = self.value(x);
        let yv = self.value(y);
        assert_eq!(xv.dim1(), yv.dim1(), "dot: length mismatch");
        let out: T = xv
            .data()
            .iter()
            .zip(yv.data().iter())
            .map(|(&a, &b)| a * b)
            .sum();
        self.push_op(Tensor::scalar(out), move |g, sink| {
            let gi = g.item();
            sink.add(x, yv.scale_values(gi));
            sink.add(y, xv.scale_values(gi));
        })
    }

    // ===== structural =====

    /// Gather rows of a rank-2 var by index (rows may repeat). Gradient is
    /// scatter-added back to the source rows.
    pub fn gather_rows(&self, table: Var, ids: &[usize]) -> Var {
        let tv = self.value(table);
        let (rows, cols) = tv.dims2();
        assert!(!ids.is_empty(), "gather_rows: empty index list");
        let mut out = Vec::with_capacity(ids.len() * cols);
        for &id in ids {
            assert!(id < rows, "gather_rows: row {id} out of {rows}");
            out.extend_from_slice(tv.row(id));
        }
        let ids: Arc<Vec<usize>> = Arc::new(ids.to_vec());
        let out = Tensor::from_vec(vec![ids.len(), cols], out);
        self.push_op(out, move |g, sink| {
            let mut dt = Tensor::zeros(vec![rows, cols]);
            let dst = dt.data_mut();
            for (r, &id) in ids.iter().enumerate() {
                let src = &g.data()[r * cols..(r + 1) * cols];
                let tgt = &mut dst[id * cols..(id + 1) * cols];
                for j in 0..cols {
                    tgt[j] += src[j];
                }
            }
            sink.add(table, dt);
        })
    }

    /// Row `i` of a rank-2 var as a rank-1 var.
    pub fn select_row(&self, a: Var, i: usize) -> Var {
        let av = self.value(a);
        let (rows, cols) = av.dims2();
        assert!(i < rows, "select_row: row {i} out of {rows}");
        let out = Tensor::from_vec(vec![cols], av.row(i).to_vec());
        self.push_op(out, move |g, sink| {
            let mut da = Tensor::zeros(vec![rows, cols]);
            da.data_mut()[i * cols..(i + 1) * cols].copy_from_slice(g.data());
            sink.add(a, da);
        })
    }

    /// Contiguous segment of a rank-1 var.
    pub fn slice_vec(&self, a: Var, start: usize, len: usize) -> Var {
        let av = self.value(a);
        let n = av.dim1();
        assert!(start + len <= n, "slice_vec: {start}+{len} out of {n}");
        let out = Tensor::from_vec(vec![len], av.data()[start..start + len].to_vec());
        self.push_op(out, move |g, sink| {
            let mut da = Tensor::zeros(vec![n]);
            da.data_mut()[start..start + len].copy_from_slice(g.data());
            sink.add(a, da);
        })
    }

    /// Concatenate rank-1 vars into one longer vector.
    pub fn concat_vecs(&self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_vecs: empty input");
        let mut data = Vec::new();
        let mut lens = Vec::with_capacity(parts.len());
        for &p in parts {
            let pv = self.value(p);
            lens.push(pv.dim1());
            data.extend_from_slice(pv.data());
        }
        let parts: Vec<Var> = parts.to_vec();
        let out = Tensor::from_vec(vec![data.len()], data);
        self.push_op(out, move |g, sink| {
            let mut off = 0;
            for (&p, &len) in parts.iter().zip(lens.iter()) {
                sink.add(
                    p,
                    Tensor::from_vec(vec![len], g.data()[off..off + len].to_vec()),
                );
                off += len;
            }
        })
    }

    /// Stack equal-length rank-1 vars as the rows of a rank-2 var.
    pub fn concat_rows(&self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_rows: empty input");
        let cols = self.value(parts[0]).dim1();
        let mut data = Vec::with_capacity(parts.len() * cols);
        for &p in parts {
            let pv = self.value(p);
            assert_eq!(pv.dim1(), cols, "concat_rows: ragged row lengths");
            data.extend_from_slice(pv.data());
        }
        let parts: Vec<Var> = parts.to_vec();
        let out = Tensor::from_vec(vec![parts.len(), cols], data);
        self.push_op(out, move |g, sink| {
            for (r, &p) in parts.iter().enumerate() {
                sink.add(
                    p,
                    Tensor::from_vec(vec![cols], g.data()[r * cols..(r + 1) * cols].to_vec()),
                );
            }
        })
    }

    /// Concatenate rank-2 vars with equal row counts along columns.
    pub fn concat_cols(&self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_cols: empty input");
        let rows = self.value(parts[0]).dims2().0;
        let widths: Vec<usize> = parts
            .iter()
            .map(|&p| {
                let pv = self.value(p);
                assert_eq!(pv.dims2().0, rows, "concat_cols: row count mismatch");
                pv.dims2().1
            })
            .collect();
        let total: usize = widths.iter().sum();
        let mut data = vec![T::ZERO; rows * total];
        let mut off = 0;
        for (&p, &w) in parts.iter().zip(widths.iter()) {
            let pv = self.value(p);
            for r in 0..rows {
                data[r * total + off..r * total + off + w].copy_from_slice(pv.row(r));
            }
            off += w;
        }
        let parts: Vec<Var> = parts.to_vec();
        let out = Tensor::from_vec(vec![rows, total], data);
        self.push_op(out, move |g, sink| {
            let mut off = 0;
            for (&p, &w) in parts.iter().zip(widths.iter()) {
                let mut dp = vec![T::ZERO; rows * w];
                for r in 0..rows {
                    dp[r * w..(r + 1) * w]
                        .copy_from_slice(&g.data()[r * total + off..r * total + off + w]);
                }
                sink.add(p, Tensor::from_vec(vec![rows, w], dp));
                off += w;
            }
        })
    }

    // ===== fused text-encoder kernel =====

    /// One convolution width over a token matrix: slide `filters (F×h×d)`
    /// over `x (L×d)`, add per-filter bias, apply ReLU, and max-pool over
    /// positions. Returns the `F` pooled features. Ties in the max take the
    /// earliest position.
    pub fn conv_maxpool(&self, x: Var, filters: Var, bias: Var) -> Var {
        let xv = self.value(x);
        let fv = self.value(filters);
        let bv = self.value(bias);
        let (rows, d) = xv.dims2();
        assert_eq!(fv.rank(), 3, "conv_maxpool: filters must be F×h×d");
        let nf = fv.shape()[0];
        let h = fv.shape()[1];
        assert_eq!(fv.shape()[2], d, "conv_maxpool: filter depth vs input");
        assert_eq!(bv.dim1(), nf, "conv_maxpool: bias length vs filter count");
        assert!(
            rows >= h,
            "conv_maxpool: input of {rows} rows shorter than filter width {h}"
        );
        let positions = rows - h + 1;
        let span = h * d;
        let mut pooled = vec![T::ZERO; nf];
        let mut argmax = vec![0usize; nf];
        for f in 0..nf {
            let w = &fv.data()[f * span..(f + 1) * span];
            let mut best = T::neg_infinity();
            let mut best_p = 0;
            for p in 0..positions {
                let window = &xv.data()[p * d..p * d + span];
                let mut acc = bv.data()[f];
                for q in 0..span {
                    acc += w[q] * window[q];
                }
                let act = activations::relu(acc);
                if act > best {
                    best = act;
                    best_p = p;
                }
            }
            pooled[f] = best;
            argmax[f] = best_p;
        }
        let out = Tensor::from_vec(vec![nf], pooled);
        let saved = out.clone();
        self.push_op(out, move |g, sink| {
            let mut dx = Tensor::zeros(vec![rows, d]);
            let mut df = Tensor::zeros(vec![nf, h, d]);
            let mut db = Tensor::zeros(vec![nf]);
            for f in 0..nf {
                let gf = g.data()[f];
                // ReLU gate: pooled value is positive iff pre-activation was.
                if gf == T::ZERO || saved.data()[f] <= T::ZERO {
                    continue;
                }
                let p = argmax[f];
                db.data_mut()[f] += gf;
                let w = fv.data()[f * span..(f + 1) * span].to_vec();
                let window = xv.data()[p * d..p * d + span].to_vec();
                let dfr = &mut df.data_mut()[f * span..(f + 1) * span];
                for q in 0..span {
                    dfr[q] += gf * window[q];
                }
                let dxr = &mut dx.data_mut()[p * d..p * d + span];
                for q in 0..span {
                    dxr[q] += gf * w[q];
                }
            }
            sink.add(x, dx);
            sink.add(filters, df);
            sink.add(bias, db);
        })
    }

    // ===== loss =====

    /// Negative log-likelihood of the gold class from a probability vector.
    /// Probabilities below 1e-12 are clamped; clamps are counted on the tape.
    pub fn nll_from_probs(&self, probs: Var, gold: usize) -> Var {
        let pv = self.value(probs);
        let n = pv.dim1();
        assert!(gold < n, "nll_from_probs: gold {gold} out of {n} classes");
        let floor = T::from_f64(1e-12);
        let p = pv.data()[gold];
        let clamped = p < floor;
        if clamped {
            self.clamp_events.set(self.clamp_events.get() + 1);
        }
        // NaN compares false above, so a poisoned probability skips the clamp
        // and surfaces as a NaN loss instead of being silently floored.
        let safe = if clamped { floor } else { p };
        let out = Tensor::scalar(-safe.ln());
        self.push_op(out, move |g, sink| {
            let mut dp = Tensor::zeros(vec![n]);
            if !clamped {
                dp.data_mut()[gold] = -g.item() / p;
            }
            sink.add(probs, dp);
        })
    }
}

fn softmax_grad_row<T: Real>(g: &[T], y: &[T], shape: &[usize]) -> Tensor<T> {
    let s: T = g.iter().zip(y.iter()).map(|(&gi, &yi)| gi * yi).sum();
    let dx: Vec<T> = g
        .iter()
        .zip(y.iter())
        .map(|(&gi, &yi)| yi * (gi - s))
        .collect();
    Tensor::from_vec(shape.to_vec(), dx)
}

// ==== tests ====
