//! Reverse-mode tape.
//!
//! Every operation appends one node holding its forward value and the
//! handles of its inputs. Nodes are appended after their inputs, so the
//! tape order is a topological order and `backward` is a single reverse
//! sweep. Gradients accumulate additively for values used more than once.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tensor::{gemm, gemm_at, gemm_bt, Tensor};
use crate::error::{FgatError, Result};
use crate::scalar::Scalar;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Probability clip applied before the logarithms in [`Tape::bce_loss`].
pub const BCE_CLIP: f64 = 1e-7;

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddBias(Var, Var),
    ScalarMul(Var, T),
    Concat { parts: Vec<Var>, axis: usize },
    SliceRows { input: Var, start: usize },
    LeakyRelu(Var, T),
    Relu(Var),
    Sigmoid(Var),
    Dropout { input: Var, mask: Vec<T> },
    GatherRows { table: Var, ids: Vec<usize> },
    ScatterAddRows { input: Var, ids: Vec<usize> },
    MulRows { input: Var, weights: Var },
    SegmentSoftmax { input: Var, segments: Vec<usize>, num_segments: usize },
    LayerNorm { input: Var, gamma: Var, beta: Var, normalized: Vec<T>, inv_std: Vec<T> },
    RowDot(Var, Var),
    Bce { probs: Var, labels: Vec<T> },
    Sum(Var),
    Mean(Var),
}

#[derive(Debug)]
pub struct Tape<T> {
    values: Vec<Tensor<T>>,
    ops: Vec<Op<T>>,
    requires_grad: Vec<bool>,
    grads: Vec<Option<Vec<T>>>,
    backward_done: bool,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn shape_err<V>(op: &'static str, detail: String) -> Result<V> {
    Err(FgatError::Shape { op, detail })
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            values: Vec::new(),
            ops: Vec::new(),
            requires_grad: Vec::new(),
            grads: Vec::new(),
            backward_done: false,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.push_leaf(value, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push_leaf(value, false)
    }

    fn push_leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.values.push(value);
        self.ops.push(Op::Leaf);
        self.requires_grad.push(requires_grad);
        self.grads.push(None);
        Var(self.values.len() - 1)
    }

    fn push(&mut self, name: &'static str, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Result<Var> {
        if !value.is_finite() {
            return Err(FgatError::NonFinite(name));
        }
        let requires = inputs.iter().any(|v| self.requires_grad[v.0]);
        self.values.push(value);
        self.ops.push(op);
        self.requires_grad.push(requires);
        self.grads.push(None);
        Ok(Var(self.values.len() - 1))
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.values[v.0]
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.requires_grad[v.0]
    }

    /// Accumulated gradient; zeros for a trainable value the loss never
    /// touched, `None` for constants.
    pub fn grad(&self, v: Var) -> Option<Tensor<T>> {
        if !self.requires_grad[v.0] {
            return None;
        }
        let shape = self.values[v.0].shape().to_vec();
        Some(match &self.grads[v.0] {
            Some(g) => Tensor::new(shape, g.clone()).expect("grad matches value shape"),
            None => Tensor::zeros(shape),
        })
    }

    fn dims2(&self, op: &'static str, v: Var) -> Result<(usize, usize)> {
        let t = &self.values[v.0];
        match t.shape() {
            [r, c] => Ok((*r, *c)),
            s => shape_err(op, format!("expected a matrix, got shape {s:?}")),
        }
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.values[a.0].shape(), self.values[b.0].shape());
        if sa != sb {
            return shape_err(op, format!("{sa:?} vs {sb:?}"));
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims2("matmul", a)?;
        let (k2, n) = self.dims2("matmul", b)?;
        if k != k2 {
            return shape_err("matmul", format!("[{m},{k}] x [{k2},{n}]"));
        }
        let out = gemm(self.values[a.0].data(), self.values[b.0].data(), m, k, n);
        self.push("matmul", Tensor::new(vec![m, n], out)?, Op::MatMul(a, b), &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let (va, vb) = (&self.values[a.0], &self.values[b.0]);
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| x + y).collect();
        let out = Tensor::new(va.shape().to_vec(), data)?;
        self.push("add", out, Op::Add(a, b), &[a, b])
    }

    /// Adds a length-`w` bias to every row of an `r×w` value.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let vx = &self.values[x.0];
        let vb = &self.values[bias.0];
        let w = vx.row_width();
        if vb.len() != w {
            return shape_err("add_bias", format!("row width {w}, bias length {}", vb.len()));
        }
        let data = vx
            .data()
            .chunks(w)
            .flat_map(|row| row.iter().zip(vb.data()).map(|(&a, &b)| a + b))
            .collect();
        let out = Tensor::new(vx.shape().to_vec(), data)?;
        self.push("add_bias", out, Op::AddBias(x, bias), &[x, bias])
    }

    pub fn scalar_mul(&mut self, a: Var, c: T) -> Result<Var> {
        let out = self.values[a.0].map(|v| v * c);
        self.push("scalar_mul", out, Op::ScalarMul(a, c), &[a])
    }

    /// Concatenates matrices along rows (`axis = 0`) or columns (`axis = 1`).
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        if parts.is_empty() {
            return shape_err("concat", "no inputs".into());
        }
        let dims: Vec<(usize, usize)> = parts
            .iter()
            .map(|&p| self.dims2("concat", p))
            .collect::<Result<_>>()?;
        let out = match axis {
            0 => {
                let cols = dims[0].1;
                if dims.iter().any(|d| d.1 != cols) {
                    return shape_err("concat", format!("column counts differ: {dims:?}"));
                }
                let rows = dims.iter().map(|d| d.0).sum();
                let data = parts
                    .iter()
                    .flat_map(|p| self.values[p.0].data().iter().copied())
                    .collect();
                Tensor::new(vec![rows, cols], data)?
            }
            1 => {
                let rows = dims[0].0;
                if dims.iter().any(|d| d.0 != rows) {
                    return shape_err("concat", format!("row counts differ: {dims:?}"));
                }
                let cols: usize = dims.iter().map(|d| d.1).sum();
                let mut data = Vec::with_capacity(rows * cols);
                for r in 0..rows {
                    for (p, d) in parts.iter().zip(&dims) {
                        data.extend_from_slice(&self.values[p.0].data()[r * d.1..(r + 1) * d.1]);
                    }
                }
                Tensor::new(vec![rows, cols], data)?
            }
            _ => return shape_err("concat", format!("axis {axis} unsupported")),
        };
        self.push("concat", out, Op::Concat { parts: parts.to_vec(), axis }, parts)
    }

    /// Rows `start..end` of a value; keeps the trailing dimensions.
    pub fn slice_rows(&mut self, input: Var, start: usize, end: usize) -> Result<Var> {
        let v = &self.values[input.0];
        if start > end || end > v.rows() {
            return shape_err("slice_rows", format!("{start}..{end} of {} rows", v.rows()));
        }
        let w = v.row_width();
        let mut shape = v.shape().to_vec();
        shape[0] = end - start;
        let out = Tensor::new(shape, v.data()[start * w..end * w].to_vec())?;
        self.push("slice_rows", out, Op::SliceRows { input, start }, &[input])
    }

    pub fn leaky_relu(&mut self, a: Var, slope: T) -> Result<Var> {
        let out = self.values[a.0].map(|v| if v > T::zero() { v } else { v * slope });
        self.push("leaky_relu", out, Op::LeakyRelu(a, slope), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let out = self.values[a.0].map(|v| if v > T::zero() { v } else { T::zero() });
        self.push("relu", out, Op::Relu(a), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let out = self.values[a.0].map(sigmoid);
        self.push("sigmoid", out, Op::Sigmoid(a), &[a])
    }

    /// Inverted dropout: survivors are scaled by `1/(1−p)`. The identity when
    /// `train` is false or `p` is zero.
    pub fn dropout(&mut self, a: Var, p: f64, seed: u64, train: bool) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(FgatError::InvalidArgument(format!("dropout p={p} outside [0,1)")));
        }
        if !train || p == 0.0 {
            return Ok(a);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = T::lit(1.0 / (1.0 - p));
        let v = &self.values[a.0];
        let mask: Vec<T> = (0..v.len())
            .map(|_| if rng.gen::<f64>() < p { T::zero() } else { scale })
            .collect();
        let data = v.data().iter().zip(&mask).map(|(&x, &m)| x * m).collect();
        let out = Tensor::new(v.shape().to_vec(), data)?;
        self.push("dropout", out, Op::Dropout { input: a, mask }, &[a])
    }

    /// `out[i] = table[ids[i]]` row-wise.
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let t = &self.values[table.0];
        let (rows, w) = (t.rows(), t.row_width());
        let mut data = Vec::with_capacity(ids.len() * w);
        for &i in ids {
            if i >= rows {
                return Err(FgatError::IndexOutOfRange { index: i, len: rows });
            }
            data.extend_from_slice(t.row(i));
        }
        let mut shape = t.shape().to_vec();
        shape[0] = ids.len();
        let out = Tensor::new(shape, data)?;
        self.push("gather_rows", out, Op::GatherRows { table, ids: ids.to_vec() }, &[table])
    }

    /// `out[ids[i]] += input[i]` into `num_rows` zero rows.
    pub fn scatter_add_rows(&mut self, input: Var, ids: &[usize], num_rows: usize) -> Result<Var> {
        let v = &self.values[input.0];
        if ids.len() != v.rows() {
            return shape_err("scatter_add_rows", format!("{} ids for {} rows", ids.len(), v.rows()));
        }
        let w = v.row_width();
        let mut data = vec![T::zero(); num_rows * w];
        for (r, &i) in ids.iter().enumerate() {
            if i >= num_rows {
                return Err(FgatError::IndexOutOfRange { index: i, len: num_rows });
            }
            for (o, &x) in data[i * w..(i + 1) * w].iter_mut().zip(v.row(r)) {
                *o = *o + x;
            }
        }
        let mut shape = v.shape().to_vec();
        shape[0] = num_rows;
        let out = Tensor::new(shape, data)?;
        self.push("scatter_add_rows", out, Op::ScatterAddRows { input, ids: ids.to_vec() }, &[input])
    }

    /// Scales row `i` of `input` by `weights[i]`.
    pub fn mul_rows(&mut self, input: Var, weights: Var) -> Result<Var> {
        let (v, w) = (&self.values[input.0], &self.values[weights.0]);
        if w.len() != v.rows() {
            return shape_err("mul_rows", format!("{} weights for {} rows", w.len(), v.rows()));
        }
        let width = v.row_width();
        let data = v
            .data()
            .chunks(width)
            .zip(w.data())
            .flat_map(|(row, &s)| row.iter().map(move |&x| x * s))
            .collect();
        let out = Tensor::new(v.shape().to_vec(), data)?;
        self.push("mul_rows", out, Op::MulRows { input, weights }, &[input, weights])
    }

    /// Softmax of scalar logits within groups sharing a segment id.
    pub fn segment_softmax(&mut self, logits: Var, segments: &[usize], num_segments: usize) -> Result<Var> {
        let v = &self.values[logits.0];
        if v.len() != segments.len() {
            return shape_err(
                "segment_softmax",
                format!("{} logits, {} segment ids", v.len(), segments.len()),
            );
        }
        let out = segment_softmax_values(v.data(), segments, num_segments)?;
        let out = Tensor::new(v.shape().to_vec(), out)?;
        let op = Op::SegmentSoftmax {
            input: logits,
            segments: segments.to_vec(),
            num_segments,
        };
        self.push("segment_softmax", out, op, &[logits])
    }

    /// Row-wise `γ ⊙ (h − μ)/√(σ² + ε) + β`.
    pub fn layer_norm(&mut self, input: Var, gamma: Var, beta: Var, eps: T) -> Result<Var> {
        let v = &self.values[input.0];
        let w = v.row_width();
        let (g, b) = (&self.values[gamma.0], &self.values[beta.0]);
        if g.len() != w || b.len() != w || w == 0 {
            return shape_err(
                "layer_norm",
                format!("row width {w}, gamma {}, beta {}", g.len(), b.len()),
            );
        }
        let (normalized, inv_std) = normalize_rows(v.data(), w, eps);
        let data = normalized
            .chunks(w)
            .flat_map(|row| {
                row.iter()
                    .zip(g.data().iter().zip(b.data()))
                    .map(|(&x, (&gi, &bi))| gi * x + bi)
            })
            .collect();
        let out = Tensor::new(v.shape().to_vec(), data)?;
        let op = Op::LayerNorm {
            input,
            gamma,
            beta,
            normalized,
            inv_std,
        };
        self.push("layer_norm", out, op, &[input, gamma, beta])
    }

    /// Per-row dot products of two equally shaped values; returns length `rows`.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("row_dot", a, b)?;
        let (va, vb) = (&self.values[a.0], &self.values[b.0]);
        let w = va.row_width();
        let data = va
            .data()
            .chunks(w)
            .zip(vb.data().chunks(w))
            .map(|(x, y)| x.iter().zip(y).map(|(&p, &q)| p * q).sum())
            .collect();
        self.push("row_dot", Tensor::vector(data), Op::RowDot(a, b), &[a, b])
    }

    /// Mean binary cross-entropy with probabilities clipped to
    /// `[1e-7, 1 − 1e-7]`.
    pub fn bce_loss(&mut self, probs: Var, labels: &[T]) -> Result<Var> {
        let p = &self.values[probs.0];
        if p.len() != labels.len() || labels.is_empty() {
            return shape_err("bce_loss", format!("{} probs, {} labels", p.len(), labels.len()));
        }
        if labels.iter().any(|&y| y != T::zero() && y != T::one()) {
            return Err(FgatError::InvalidArgument("labels must be 0 or 1".into()));
        }
        let loss = bce_value(p.data(), labels);
        let op = Op::Bce {
            probs,
            labels: labels.to_vec(),
        };
        self.push("bce_loss", Tensor::scalar(loss), op, &[probs])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.values[a.0].data().iter().copied().sum();
        self.push("sum", Tensor::scalar(s), Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let v = &self.values[a.0];
        if v.is_empty() {
            return shape_err("mean", "empty input".into());
        }
        let s: T = v.data().iter().copied().sum();
        let m = s / T::from_usize_lossy(v.len());
        self.push("mean", Tensor::scalar(m), Op::Mean(a), &[a])
    }

    /// Reverse sweep from a single-element `loss`. A tape supports one sweep.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.backward_done {
            return Err(FgatError::BackwardTwice);
        }
        if self.values[loss.0].len() != 1 {
            return shape_err(
                "backward",
                format!("loss must be scalar, got shape {:?}", self.values[loss.0].shape()),
            );
        }
        self.backward_done = true;
        if !self.requires_grad[loss.0] {
            return Ok(());
        }
        self.grads[loss.0] = Some(vec![T::one()]);

        for i in (0..=loss.0).rev() {
            let Some(g) = self.grads[i].take() else { continue };
            self.propagate(i, &g);
            self.grads[i] = Some(g);
        }
        Ok(())
    }

    fn propagate(&mut self, i: usize, g: &[T]) {
        let Self {
            values,
            ops,
            requires_grad,
            grads,
            ..
        } = self;
        // Accumulates `f(k)` for k in 0..len into the gradient of `v`.
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [T])| {
            if !requires_grad[v.0] {
                return;
            }
            let len = values[v.0].len();
            let slot = grads[v.0].get_or_insert_with(|| vec![T::zero(); len]);
            f(slot);
        };
        match &ops[i] {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (va, vb) = (&values[a.0], &values[b.0]);
                let (m, k) = (va.shape()[0], va.shape()[1]);
                let n = vb.shape()[1];
                if requires_grad[a.0] {
                    let ga = gemm_bt(g, vb.data(), m, n, k);
                    acc(*a, &mut |s| add_into(s, &ga));
                }
                if requires_grad[b.0] {
                    let gb = gemm_at(va.data(), g, m, k, n);
                    acc(*b, &mut |s| add_into(s, &gb));
                }
            }
            Op::Add(a, b) => {
                acc(*a, &mut |s| add_into(s, g));
                acc(*b, &mut |s| add_into(s, g));
            }
            Op::AddBias(x, b) => {
                acc(*x, &mut |s| add_into(s, g));
                let w = values[b.0].len();
                acc(*b, &mut |s| {
                    for row in g.chunks(w) {
                        add_into(s, row);
                    }
                });
            }
            Op::ScalarMul(a, c) => {
                let c = *c;
                acc(*a, &mut |s| {
                    for (o, &gi) in s.iter_mut().zip(g) {
                        *o = *o + gi * c;
                    }
                });
            }
            Op::Concat { parts, axis } => {
                let out_cols = values[i].shape()[1];
                let mut offset = 0;
                for p in parts {
                    let (r, c) = (values[p.0].shape()[0], values[p.0].shape()[1]);
                    let start = offset;
                    acc(*p, &mut |s| {
                        if *axis == 0 {
                            add_into(s, &g[start * c..(start + r) * c]);
                        } else {
                            for row in 0..r {
                                let src = &g[row * out_cols + start..row * out_cols + start + c];
                                add_into(&mut s[row * c..(row + 1) * c], src);
                            }
                        }
                    });
                    offset += if *axis == 0 { r } else { c };
                }
            }
            Op::SliceRows { input, start } => {
                let w = values[input.0].row_width();
                let from = start * w;
                acc(*input, &mut |s| add_into(&mut s[from..from + g.len()], g));
            }
            Op::LeakyRelu(a, slope) => {
                let (x, slope) = (values[a.0].data(), *slope);
                acc(*a, &mut |s| {
                    for ((o, &gi), &xi) in s.iter_mut().zip(g).zip(x) {
                        *o = *o + if xi > T::zero() { gi } else { gi * slope };
                    }
                });
            }
            Op::Relu(a) => {
                let x = values[a.0].data();
                acc(*a, &mut |s| {
                    for ((o, &gi), &xi) in s.iter_mut().zip(g).zip(x) {
                        if xi > T::zero() {
                            *o = *o + gi;
                        }
                    }
                });
            }
            Op::Sigmoid(a) => {
                let y = values[i].data();
                acc(*a, &mut |s| {
                    for ((o, &gi), &yi) in s.iter_mut().zip(g).zip(y) {
                        *o = *o + gi * yi * (T::one() - yi);
                    }
                });
            }
            Op::Dropout { input, mask } => {
                acc(*input, &mut |s| {
                    for ((o, &gi), &m) in s.iter_mut().zip(g).zip(mask) {
                        *o = *o + gi * m;
                    }
                });
            }
            Op::GatherRows { table, ids } => {
                let w = values[table.0].row_width();
                acc(*table, &mut |s| {
                    for (r, &id) in ids.iter().enumerate() {
                        add_into(&mut s[id * w..(id + 1) * w], &g[r * w..(r + 1) * w]);
                    }
                });
            }
            Op::ScatterAddRows { input, ids } => {
                let w = values[input.0].row_width();
                acc(*input, &mut |s| {
                    for (r, &id) in ids.iter().enumerate() {
                        add_into(&mut s[r * w..(r + 1) * w], &g[id * w..(id + 1) * w]);
                    }
                });
            }
            Op::MulRows { input, weights } => {
                let (x, wts) = (&values[input.0], &values[weights.0]);
                let width = x.row_width();
                acc(*input, &mut |s| {
                    for (r, &wr) in wts.data().iter().enumerate() {
                        for k in r * width..(r + 1) * width {
                            s[k] = s[k] + g[k] * wr;
                        }
                    }
                });
                acc(*weights, &mut |s| {
                    for (r, o) in s.iter_mut().enumerate() {
                        let span = r * width..(r + 1) * width;
                        let d: T = g[span.clone()].iter().zip(&x.data()[span]).map(|(&a, &b)| a * b).sum();
                        *o = *o + d;
                    }
                });
            }
            Op::SegmentSoftmax {
                input,
                segments,
                num_segments,
            } => {
                let y = values[i].data();
                let mut dots = vec![T::zero(); *num_segments];
                for ((&gi, &yi), &sid) in g.iter().zip(y).zip(segments) {
                    dots[sid] = dots[sid] + gi * yi;
                }
                acc(*input, &mut |s| {
                    for (k, o) in s.iter_mut().enumerate() {
                        *o = *o + y[k] * (g[k] - dots[segments[k]]);
                    }
                });
            }
            Op::LayerNorm {
                input,
                gamma,
                beta,
                normalized,
                inv_std,
            } => {
                let w = values[gamma.0].len();
                let gam = values[gamma.0].data();
                acc(*beta, &mut |s| {
                    for row in g.chunks(w) {
                        add_into(s, row);
                    }
                });
                acc(*gamma, &mut |s| {
                    for (grow, nrow) in g.chunks(w).zip(normalized.chunks(w)) {
                        for ((o, &gi), &ni) in s.iter_mut().zip(grow).zip(nrow) {
                            *o = *o + gi * ni;
                        }
                    }
                });
                let width = T::from_usize_lossy(w);
                acc(*input, &mut |s| {
                    for (r, ((srow, grow), nrow)) in s
                        .chunks_mut(w)
                        .zip(g.chunks(w))
                        .zip(normalized.chunks(w))
                        .enumerate()
                    {
                        let dn: Vec<T> = grow.iter().zip(gam).map(|(&a, &b)| a * b).collect();
                        let sum_dn: T = dn.iter().copied().sum();
                        let sum_dn_n: T = dn.iter().zip(nrow).map(|(&a, &b)| a * b).sum();
                        let scale = inv_std[r] / width;
                        for ((o, &d), &n) in srow.iter_mut().zip(&dn).zip(nrow) {
                            *o = *o + scale * (width * d - sum_dn - n * sum_dn_n);
                        }
                    }
                });
            }
            Op::RowDot(a, b) => {
                let w = values[a.0].row_width();
                let (va, vb) = (values[a.0].data(), values[b.0].data());
                acc(*a, &mut |s| {
                    for (k, o) in s.iter_mut().enumerate() {
                        *o = *o + g[k / w] * vb[k];
                    }
                });
                acc(*b, &mut |s| {
                    for (k, o) in s.iter_mut().enumerate() {
                        *o = *o + g[k / w] * va[k];
                    }
                });
            }
            Op::Bce { probs, labels } => {
                let p = values[probs.0].data();
                let (lo, hi) = (T::lit(BCE_CLIP), T::one() - T::lit(BCE_CLIP));
                let inv_m = g[0] / T::from_usize_lossy(labels.len());
                acc(*probs, &mut |s| {
                    for ((o, &pi), &yi) in s.iter_mut().zip(p).zip(labels) {
                        if pi < lo || pi > hi {
                            continue;
                        }
                        let d = -yi / pi + (T::one() - yi) / (T::one() - pi);
                        *o = *o + d * inv_m;
                    }
                });
            }
            Op::Sum(a) => {
                let g0 = g[0];
                acc(*a, &mut |s| s.iter_mut().for_each(|o| *o = *o + g0));
            }
            Op::Mean(a) => {
                let g0 = g[0] / T::from_usize_lossy(values[a.0].len());
                acc(*a, &mut |s| s.iter_mut().for_each(|o| *o = *o + g0));
            }
        }
    }
}

fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = *d + s;
    }
}

pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Max-shifted softmax within each segment.
pub fn segment_softmax_values<T: Scalar>(logits: &[T], segments: &[usize], num_segments: usize) -> Result<Vec<T>> {
    let mut max = vec![T::neg_infinity(); num_segments];
    for (&x, &s) in logits.iter().zip(segments) {
        if s >= num_segments {
            return Err(FgatError::IndexOutOfRange {
                index: s,
                len: num_segments,
            });
        }
        max[s] = max[s].max(x);
    }
    let exps: Vec<T> = logits.iter().zip(segments).map(|(&x, &s)| (x - max[s]).exp()).collect();
    let mut sums = vec![T::zero(); num_segments];
    for (&e, &s) in exps.iter().zip(segments) {
        sums[s] = sums[s] + e;
    }
    Ok(exps.iter().zip(segments).map(|(&e, &s)| e / sums[s]).collect())
}

/// Pre-affine layer normalization of each `width`-wide row. Returns the
/// normalized rows and `1/√(σ² + ε)` per row.
pub fn normalize_rows<T: Scalar>(data: &[T], width: usize, eps: T) -> (Vec<T>, Vec<T>) {
    let w = T::from_usize_lossy(width);
    let mut out = Vec::with_capacity(data.len());
    let mut inv = Vec::with_capacity(data.len() / width.max(1));
    for row in data.chunks(width) {
        let mu = row.iter().copied().sum::<T>() / w;
        let var = row.iter().map(|&x| (x - mu) * (x - mu)).sum::<T>() / w;
        let inv_std = T::one() / (var + eps).sqrt();
        out.extend(row.iter().map(|&x| (x - mu) * inv_std));
        inv.push(inv_std);
    }
    (out, inv)
}

fn bce_value<T: Scalar>(probs: &[T], labels: &[T]) -> T {
    let (lo, hi) = (T::lit(BCE_CLIP), T::one() - T::lit(BCE_CLIP));
    let total: T = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.max(lo).min(hi);
            -(y * p.ln() + (T::one() - y) * (T::one() - p).ln())
        })
        .sum();
    total / T::from_usize_lossy(labels.len())
}
