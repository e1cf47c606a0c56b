//! Reverse-mode automatic differentiation over the fixed operator set the
//! denoising policy needs: linear algebra, 1-D convolution, attention
//! primitives, max/mean pooling, pointwise nonlinearities, and per-channel
//! (FiLM) affine modulation.
//!
//! Every forward pass builds a fresh tape; nodes only reference earlier
//! nodes, so reverse creation order is a valid topological order for
//! backpropagation. All math is f64 and single-threaded per tape, which
//! keeps losses and gradients bit-reproducible.

use super::tensor::{GradStore, ParamStore, Tensor};

pub type NodeId = usize;

/// Pointwise nonlinearities. Both are smooth, which keeps finite-difference
/// gradient checks meaningful everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Act {
    Silu,
    Tanh,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    /// (N, D) + broadcast (1, D) over rows.
    AddRowBroadcast(NodeId, NodeId),
    /// y[c, l] = gamma[0, c] * h[c, l] + beta[0, c].
    ChannelAffine {
        h: NodeId,
        gamma: NodeId,
        beta: NodeId,
    },
    Pointwise(NodeId, Act),
    SoftmaxRows(NodeId),
    /// Column-wise max over rows; memoizes the winning row per column.
    MaxOverRows(NodeId, Vec<usize>),
    MeanOverRows(NodeId),
    ConcatCols(Vec<NodeId>),
    ConcatRows(Vec<NodeId>),
    SliceCols {
        src: NodeId,
        start: usize,
    },
    /// x: (C_in, L), w: (C_out, C_in·k), b: (1, C_out); zero padding k/2.
    Conv1d {
        x: NodeId,
        w: NodeId,
        b: NodeId,
        kernel: usize,
        stride: usize,
    },
    /// Nearest-neighbor ×2 along columns.
    UpsampleCols(NodeId),
    MeanAll(NodeId),
}

pub struct Tape {
    values: Vec<Tensor>,
    ops: Vec<Op>,
    /// (node, parameter id in the store) for every parameter leaf.
    params: Vec<(NodeId, usize)>,
}

impl Tape {
    pub fn new() -> Tape {
        Tape {
            values: Vec::new(),
            ops: Vec::new(),
            params: Vec::new(),
        }
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        self.values.push(value);
        self.ops.push(op);
        self.values.len() - 1
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.values[id]
    }

    /// Constant / input leaf; receives no gradient of interest.
    pub fn leaf(&mut self, t: Tensor) -> NodeId {
        self.push(t, Op::Leaf)
    }

    /// Parameter leaf: value cloned from the store, gradient routed back to it.
    pub fn param(&mut self, store: &ParamStore, param_id: usize) -> NodeId {
        let node = self.push(store.get(param_id).clone(), Op::Leaf);
        self.params.push((node, param_id));
        node
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (ta, tb) = (&self.values[a], &self.values[b]);
        assert_eq!((ta.rows, ta.cols), (tb.rows, tb.cols), "add shape mismatch");
        let data = ta.data.iter().zip(&tb.data).map(|(x, y)| x + y).collect();
        let t = Tensor::from_vec(ta.rows, ta.cols, data);
        self.push(t, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (ta, tb) = (&self.values[a], &self.values[b]);
        assert_eq!((ta.rows, ta.cols), (tb.rows, tb.cols), "mul shape mismatch");
        let data = ta.data.iter().zip(&tb.data).map(|(x, y)| x * y).collect();
        let t = Tensor::from_vec(ta.rows, ta.cols, data);
        self.push(t, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let ta = &self.values[a];
        let data = ta.data.iter().map(|x| x * factor).collect();
        let t = Tensor::from_vec(ta.rows, ta.cols, data);
        self.push(t, Op::Scale(a, factor))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let nb = self.scale(b, -1.0);
        self.add(a, nb)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (ta, tb) = (&self.values[a], &self.values[b]);
        assert_eq!(ta.cols, tb.rows, "matmul inner dims");
        let t = matmul_raw(ta, tb);
        self.push(t, Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let ta = &self.values[a];
        let mut t = Tensor::zeros(ta.cols, ta.rows);
        for r in 0..ta.rows {
            for c in 0..ta.cols {
                *t.at_mut(c, r) = ta.at(r, c);
            }
        }
        self.push(t, Op::Transpose(a))
    }

    pub fn add_row_broadcast(&mut self, x: NodeId, row: NodeId) -> NodeId {
        let (tx, tr) = (&self.values[x], &self.values[row]);
        assert_eq!(tr.rows, 1, "broadcast operand must be a row vector");
        assert_eq!(tx.cols, tr.cols, "broadcast width mismatch");
        let mut t = tx.clone();
        for r in 0..t.rows {
            for c in 0..t.cols {
                *t.at_mut(r, c) += tr.at(0, c);
            }
        }
        self.push(t, Op::AddRowBroadcast(x, row))
    }

    pub fn channel_affine(&mut self, h: NodeId, gamma: NodeId, beta: NodeId) -> NodeId {
        let (th, tg, tb) = (&self.values[h], &self.values[gamma], &self.values[beta]);
        assert_eq!(tg.rows, 1);
        assert_eq!(tb.rows, 1);
        assert_eq!(tg.cols, th.rows, "one scale per channel");
        assert_eq!(tb.cols, th.rows, "one shift per channel");
        let mut t = Tensor::zeros(th.rows, th.cols);
        for c in 0..th.rows {
            let (g, b) = (tg.at(0, c), tb.at(0, c));
            for l in 0..th.cols {
                *t.at_mut(c, l) = g * th.at(c, l) + b;
            }
        }
        self.push(t, Op::ChannelAffine { h, gamma, beta })
    }

    pub fn pointwise(&mut self, a: NodeId, act: Act) -> NodeId {
        let ta = &self.values[a];
        let data = ta
            .data
            .iter()
            .map(|&x| match act {
                Act::Silu => x * sigmoid(x),
                Act::Tanh => x.tanh(),
            })
            .collect();
        let t = Tensor::from_vec(ta.rows, ta.cols, data);
        self.push(t, Op::Pointwise(a, act))
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let ta = &self.values[a];
        let mut t = ta.clone();
        for r in 0..t.rows {
            let row = &mut t.data[r * t.cols..(r + 1) * t.cols];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        self.push(t, Op::SoftmaxRows(a))
    }

    pub fn max_over_rows(&mut self, a: NodeId) -> NodeId {
        let ta = &self.values[a];
        assert!(ta.rows > 0, "max over empty tensor");
        let mut argmax = vec![0usize; ta.cols];
        let mut t = Tensor::zeros(1, ta.cols);
        for c in 0..ta.cols {
            let mut best = f64::NEG_INFINITY;
            for r in 0..ta.rows {
                let v = ta.at(r, c);
                if v > best {
                    best = v;
                    argmax[c] = r;
                }
            }
            *t.at_mut(0, c) = best;
        }
        self.push(t, Op::MaxOverRows(a, argmax))
    }

    pub fn mean_over_rows(&mut self, a: NodeId) -> NodeId {
        let ta = &self.values[a];
        let mut t = Tensor::zeros(1, ta.cols);
        for c in 0..ta.cols {
            let mut sum = 0.0;
            for r in 0..ta.rows {
                sum += ta.at(r, c);
            }
            *t.at_mut(0, c) = sum / ta.rows as f64;
        }
        self.push(t, Op::MeanOverRows(a))
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty());
        let rows = self.values[parts[0]].rows;
        let cols: usize = parts.iter().map(|&p| self.values[p].cols).sum();
        let mut t = Tensor::zeros(rows, cols);
        let mut at = 0;
        for &p in parts {
            let tp = &self.values[p];
            assert_eq!(tp.rows, rows, "concat_cols row mismatch");
            for r in 0..rows {
                for c in 0..tp.cols {
                    *t.at_mut(r, at + c) = tp.at(r, c);
                }
            }
            at += tp.cols;
        }
        self.push(t, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty());
        let cols = self.values[parts[0]].cols;
        let rows: usize = parts.iter().map(|&p| self.values[p].rows).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for &p in parts {
            let tp = &self.values[p];
            assert_eq!(tp.cols, cols, "concat_rows col mismatch");
            data.extend_from_slice(&tp.data);
        }
        self.push(Tensor::from_vec(rows, cols, data), Op::ConcatRows(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, src: NodeId, start: usize, len: usize) -> NodeId {
        let ts = &self.values[src];
        assert!(start + len <= ts.cols, "slice out of range");
        let mut t = Tensor::zeros(ts.rows, len);
        for r in 0..ts.rows {
            for c in 0..len {
                *t.at_mut(r, c) = ts.at(r, start + c);
            }
        }
        self.push(t, Op::SliceCols { src, start })
    }

    pub fn conv1d(&mut self, x: NodeId, w: NodeId, b: NodeId, kernel: usize, stride: usize) -> NodeId {
        let (tx, tw, tb) = (&self.values[x], &self.values[w], &self.values[b]);
        let (c_in, l) = (tx.rows, tx.cols);
        let c_out = tw.rows;
        assert_eq!(tw.cols, c_in * kernel, "conv weight shape");
        assert_eq!((tb.rows, tb.cols), (1, c_out), "conv bias shape");
        let pad = kernel / 2;
        let l_out = (l + 2 * pad - kernel) / stride + 1;
        let mut t = Tensor::zeros(c_out, l_out);
        for co in 0..c_out {
            for ti in 0..l_out {
                let mut acc = tb.at(0, co);
                for ci in 0..c_in {
                    for dk in 0..kernel {
                        let s = ti * stride + dk;
                        if s >= pad && s < l + pad {
                            acc += tw.at(co, ci * kernel + dk) * tx.at(ci, s - pad);
                        }
                    }
                }
                *t.at_mut(co, ti) = acc;
            }
        }
        self.push(
            t,
            Op::Conv1d {
                x,
                w,
                b,
                kernel,
                stride,
            },
        )
    }

    pub fn upsample_cols(&mut self, a: NodeId) -> NodeId {
        let ta = &self.values[a];
        let mut t = Tensor::zeros(ta.rows, ta.cols * 2);
        for r in 0..ta.rows {
            for c in 0..ta.cols {
                *t.at_mut(r, 2 * c) = ta.at(r, c);
                *t.at_mut(r, 2 * c + 1) = ta.at(r, c);
            }
        }
        self.push(t, Op::UpsampleCols(a))
    }

    pub fn mean_all(&mut self, a: NodeId) -> NodeId {
        let ta = &self.values[a];
        let mean = ta.data.iter().sum::<f64>() / ta.len() as f64;
        self.push(Tensor::from_vec(1, 1, vec![mean]), Op::MeanAll(a))
    }

    /// Fully-connected layer: `x · Wᵀ + b` with x `(N, in)`, w `(out, in)`,
    /// b `(1, out)`.
    pub fn linear(&mut self, x: NodeId, w: NodeId, b: NodeId) -> NodeId {
        let wt = self.transpose(w);
        let y = self.matmul(x, wt);
        self.add_row_broadcast(y, b)
    }

    /// Backpropagate from a scalar root into every parameter leaf.
    pub fn backward(&mut self, root: NodeId, params: &ParamStore) -> GradStore {
        let root_t = &self.values[root];
        assert_eq!((root_t.rows, root_t.cols), (1, 1), "root must be scalar");
        let mut grads: Vec<Vec<f64>> = self.values.iter().map(|v| vec![0.0; v.len()]).collect();
        grads[root][0] = 1.0;

        for i in (0..self.ops.len()).rev() {
            // Leaves have no inputs; leave their accumulated gradient in
            // place for the parameter extraction below.
            if matches!(self.ops[i], Op::Leaf) {
                continue;
            }
            if grads[i].iter().all(|&g| g == 0.0) {
                continue;
            }
            let g = std::mem::take(&mut grads[i]);
            let op = self.ops[i].clone();
            match op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    axpy(&mut grads[a], &g, 1.0);
                    axpy(&mut grads[b], &g, 1.0);
                }
                Op::Mul(a, b) => {
                    for j in 0..g.len() {
                        grads[a][j] += g[j] * self.values[b].data[j];
                    }
                    for j in 0..g.len() {
                        grads[b][j] += g[j] * self.values[a].data[j];
                    }
                }
                Op::Scale(a, f) => axpy(&mut grads[a], &g, f),
                Op::MatMul(a, b) => {
                    let (ta, tb) = (&self.values[a], &self.values[b]);
                    let gt = Tensor::from_vec(ta.rows, tb.cols, g.clone());
                    // dA += G · Bᵀ ; dB += Aᵀ · G
                    let da = matmul_nt(&gt, tb);
                    let db = matmul_tn(ta, &gt);
                    axpy(&mut grads[a], &da.data, 1.0);
                    axpy(&mut grads[b], &db.data, 1.0);
                }
                Op::Transpose(a) => {
                    let ta = &self.values[a];
                    let (rows, cols) = (ta.rows, ta.cols);
                    for r in 0..rows {
                        for c in 0..cols {
                            grads[a][r * cols + c] += g[c * rows + r];
                        }
                    }
                }
                Op::AddRowBroadcast(x, row) => {
                    let cols = self.values[x].cols;
                    axpy(&mut grads[x], &g, 1.0);
                    for (j, &gv) in g.iter().enumerate() {
                        grads[row][j % cols] += gv;
                    }
                }
                Op::ChannelAffine { h, gamma, beta } => {
                    let th = &self.values[h];
                    let tg = &self.values[gamma];
                    let (ch, l) = (th.rows, th.cols);
                    for c in 0..ch {
                        let gc = tg.at(0, c);
                        let mut dg = 0.0;
                        let mut db = 0.0;
                        for j in 0..l {
                            let gv = g[c * l + j];
                            grads[h][c * l + j] += gc * gv;
                            dg += gv * th.at(c, j);
                            db += gv;
                        }
                        grads[gamma][c] += dg;
                        grads[beta][c] += db;
                    }
                }
                Op::Pointwise(a, act) => {
                    let ta = &self.values[a];
                    let ty = &self.values[i];
                    for j in 0..g.len() {
                        let d = match act {
                            Act::Silu => {
                                let s = sigmoid(ta.data[j]);
                                s + ta.data[j] * s * (1.0 - s)
                            }
                            Act::Tanh => 1.0 - ty.data[j] * ty.data[j],
                        };
                        grads[a][j] += g[j] * d;
                    }
                }
                Op::SoftmaxRows(a) => {
                    let ty = &self.values[i];
                    let (rows, cols) = (ty.rows, ty.cols);
                    for r in 0..rows {
                        let mut dot = 0.0;
                        for c in 0..cols {
                            dot += g[r * cols + c] * ty.at(r, c);
                        }
                        for c in 0..cols {
                            grads[a][r * cols + c] += ty.at(r, c) * (g[r * cols + c] - dot);
                        }
                    }
                }
                Op::MaxOverRows(a, argmax) => {
                    let cols = self.values[a].cols;
                    for (c, &r) in argmax.iter().enumerate() {
                        grads[a][r * cols + c] += g[c];
                    }
                }
                Op::MeanOverRows(a) => {
                    let ta = &self.values[a];
                    let (rows, cols) = (ta.rows, ta.cols);
                    let inv = 1.0 / rows as f64;
                    for r in 0..rows {
                        for c in 0..cols {
                            grads[a][r * cols + c] += g[c] * inv;
                        }
                    }
                }
                Op::ConcatCols(parts) => {
                    let rows = self.values[i].rows;
                    let total = self.values[i].cols;
                    let mut at = 0;
                    for p in parts {
                        let cols = self.values[p].cols;
                        for r in 0..rows {
                            for c in 0..cols {
                                grads[p][r * cols + c] += g[r * total + at + c];
                            }
                        }
                        at += cols;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut at = 0;
                    for p in parts {
                        let len = self.values[p].len();
                        axpy(&mut grads[p], &g[at..at + len], 1.0);
                        at += len;
                    }
                }
                Op::SliceCols { src, start } => {
                    let ts = &self.values[src];
                    let out_cols = self.values[i].cols;
                    for r in 0..ts.rows {
                        for c in 0..out_cols {
                            grads[src][r * ts.cols + start + c] += g[r * out_cols + c];
                        }
                    }
                }
                Op::Conv1d {
                    x,
                    w,
                    b,
                    kernel,
                    stride,
                } => {
                    let tx = &self.values[x];
                    let tw = &self.values[w];
                    let (c_in, l) = (tx.rows, tx.cols);
                    let c_out = tw.rows;
                    let pad = kernel / 2;
                    let l_out = self.values[i].cols;
                    for co in 0..c_out {
                        for ti in 0..l_out {
                            let gv = g[co * l_out + ti];
                            if gv == 0.0 {
                                continue;
                            }
                            grads[b][co] += gv;
                            for ci in 0..c_in {
                                for dk in 0..kernel {
                                    let s = ti * stride + dk;
                                    if s >= pad && s < l + pad {
                                        let xi = ci * l + (s - pad);
                                        grads[w][co * tw.cols + ci * kernel + dk] +=
                                            gv * tx.data[xi];
                                        grads[x][xi] += gv * tw.at(co, ci * kernel + dk);
                                    }
                                }
                            }
                        }
                    }
                }
                Op::UpsampleCols(a) => {
                    let ta = &self.values[a];
                    let (rows, cols) = (ta.rows, ta.cols);
                    for r in 0..rows {
                        for c in 0..cols {
                            grads[a][r * cols + c] += g[r * 2 * cols + 2 * c]
                                + g[r * 2 * cols + 2 * c + 1];
                        }
                    }
                }
                Op::MeanAll(a) => {
                    let inv = g[0] / self.values[a].len() as f64;
                    for v in &mut grads[a] {
                        *v += inv;
                    }
                }
            }
        }

        let mut out = GradStore::zeros_like(params);
        for &(node, pid) in &self.params {
            axpy(&mut out.grads[pid].data, &grads[node], 1.0);
        }
        out
    }
}

impl Default for Tape {
    fn default() -> Self {
        Tape::new()
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn axpy(dst: &mut [f64], src: &[f64], factor: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += factor * s;
    }
}

/// C = A · B with an i-k-j loop for cache-friendly row-major access.
fn matmul_raw(a: &Tensor, b: &Tensor) -> Tensor {
    let mut c = Tensor::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let av = a.at(i, k);
            if av == 0.0 {
                continue;
            }
            let brow = &b.data[k * b.cols..(k + 1) * b.cols];
            let crow = &mut c.data[i * b.cols..(i + 1) * b.cols];
            for (cv, bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
    c
}

/// A · Bᵀ.
fn matmul_nt(a: &Tensor, b: &Tensor) -> Tensor {
    assert_eq!(a.cols, b.cols);
    let mut c = Tensor::zeros(a.rows, b.rows);
    for i in 0..a.rows {
        let arow = &a.data[i * a.cols..(i + 1) * a.cols];
        for j in 0..b.rows {
            let brow = &b.data[j * b.cols..(j + 1) * b.cols];
            let mut acc = 0.0;
            for (av, bv) in arow.iter().zip(brow) {
                acc += av * bv;
            }
            *c.at_mut(i, j) = acc;
        }
    }
    c
}

/// Aᵀ · B.
fn matmul_tn(a: &Tensor, b: &Tensor) -> Tensor {
    assert_eq!(a.rows, b.rows);
    let mut c = Tensor::zeros(a.cols, b.cols);
    for k in 0..a.rows {
        for i in 0..a.cols {
            let av = a.at(k, i);
            if av == 0.0 {
                continue;
            }
            let brow = &b.data[k * b.cols..(k + 1) * b.cols];
            let crow = &mut c.data[i * b.cols..(i + 1) * b.cols];
            for (cv, bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
    c
}
