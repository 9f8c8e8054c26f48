//! The per-forward computation tape.
//!
//! Ops append nodes to the tape in execution order, which is also a valid
//! topological order, so the backward pass is a single reverse sweep. A graph
//! is consumed by `backward`; reuse requires a fresh forward.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Index of a node on the tape.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Matmul { a: usize, b: usize },
    Add { a: usize, b: usize },
    Mul { a: usize, b: usize },
    AddBias { a: usize, bias: usize },
    Tanh { a: usize },
    Sigmoid { a: usize },
    Relu { a: usize },
    Scale { a: usize, c: f64 },
    ConcatCols { a: usize, b: usize },
    Reshape { a: usize },
    Sum { a: usize },
    SoftmaxRows { a: usize },
    SoftmaxXent { logits: usize, targets: Vec<usize> },
    Mse { pred: usize, target: usize },
    Conv2d { input: usize, kernels: usize, bias: usize, stride: usize },
}

struct Node {
    tensor: Tensor,
    op: Op,
}

/// A reverse-mode autodiff tape over [`Tensor`] values.
pub struct Graph {
    nodes: Vec<Node>,
    recording: bool,
    consumed: bool,
}

fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            recording: true,
            consumed: false,
        }
    }

    /// A graph that records no ops; forward values are computed but
    /// `backward` is unavailable. Used for feature extraction and
    /// validation-loss evaluation.
    pub fn inference() -> Self {
        Graph {
            nodes: Vec::new(),
            recording: false,
            consumed: false,
        }
    }

    pub fn is_recording(&self) -> bool {
        self.recording
    }

    /// Adds a leaf that never receives a gradient.
    pub fn constant(&mut self, t: Tensor) -> NodeId {
        self.push_leaf(t, false)
    }

    /// Adds a trainable leaf. In an inference graph this degrades to a
    /// constant.
    pub fn parameter(&mut self, t: Tensor) -> NodeId {
        let trainable = self.recording;
        self.push_leaf(t, trainable)
    }

    fn push_leaf(&mut self, mut t: Tensor, requires_grad: bool) -> NodeId {
        t.requires_grad = requires_grad;
        t.grad = None;
        let id = self.nodes.len();
        self.nodes.push(Node { tensor: t, op: Op::Leaf });
        NodeId(id)
    }

    fn push(
        &mut self,
        op_name: &'static str,
        shape: Vec<usize>,
        data: Vec<f64>,
        op: Op,
        requires_grad: bool,
    ) -> Result<NodeId> {
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { op: op_name });
        }
        let mut tensor = Tensor::new(shape, data)?;
        tensor.requires_grad = requires_grad && self.recording;
        let stored_op = if self.recording { op } else { Op::Leaf };
        let id = self.nodes.len();
        self.nodes.push(Node { tensor, op: stored_op });
        Ok(NodeId(id))
    }

    pub fn tensor(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].tensor
    }

    pub fn data(&self, id: NodeId) -> &[f64] {
        self.nodes[id.0].tensor.data()
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        self.nodes[id.0].tensor.shape()
    }

    /// Gradient buffer of a node, populated by `backward`.
    pub fn grad(&self, id: NodeId) -> Option<&[f64]> {
        self.nodes[id.0].tensor.grad.as_deref()
    }

    fn requires(&self, id: usize) -> bool {
        self.nodes[id].tensor.requires_grad
    }

    fn dims2(&self, id: NodeId, op: &'static str) -> Result<(usize, usize)> {
        let s = self.shape(id);
        if s.len() != 2 {
            return Err(Error::Dimension {
                op,
                lhs: s.to_vec(),
                rhs: vec![],
            });
        }
        Ok((s[0], s[1]))
    }

    // ── forward ops ──────────────────────────────────────────────────

    /// `a[m×k] · b[k×n] -> [m×n]`.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, ka) = self.dims2(a, "matmul")?;
        let (kb, n) = self.dims2(b, "matmul")?;
        if ka != kb {
            return Err(Error::Dimension {
                op: "matmul",
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let out = matmul_raw(self.data(a), self.data(b), m, ka, n);
        let rg = self.requires(a.0) || self.requires(b.0);
        self.push("matmul", vec![m, n], out, Op::Matmul { a: a.0, b: b.0 }, rg)
    }

    fn binary_same_shape(
        &mut self,
        op_name: &'static str,
        a: NodeId,
        b: NodeId,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<NodeId> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Dimension {
                op: op_name,
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let data: Vec<f64> = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(&x, &y)| f(x, y))
            .collect();
        let rg = self.requires(a.0) || self.requires(b.0);
        self.push(op_name, self.shape(a).to_vec(), data, op, rg)
    }

    /// Elementwise sum; both operands must have equal shapes.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape("add", a, b, |x, y| x + y, Op::Add { a: a.0, b: b.0 })
    }

    /// Elementwise product; both operands must have equal shapes.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape("mul", a, b, |x, y| x * y, Op::Mul { a: a.0, b: b.0 })
    }

    /// Broadcasts a bias row over every row of a matrix: `[n×d] + [d]`.
    /// This is the only broadcasting the engine supports.
    pub fn add_bias(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        let (n, d) = self.dims2(a, "add_bias")?;
        let bs = self.shape(bias);
        let blen = if bs.len() == 1 {
            bs[0]
        } else if bs.len() == 2 && bs[0] == 1 {
            bs[1]
        } else {
            0
        };
        if blen != d {
            return Err(Error::Dimension {
                op: "add_bias",
                lhs: self.shape(a).to_vec(),
                rhs: bs.to_vec(),
            });
        }
        let bd = self.data(bias).to_vec();
        let data: Vec<f64> = self
            .data(a)
            .iter()
            .enumerate()
            .map(|(i, &x)| x + bd[i % d])
            .collect();
        let rg = self.requires(a.0) || self.requires(bias.0);
        self.push(
            "add_bias",
            vec![n, d],
            data,
            Op::AddBias { a: a.0, bias: bias.0 },
            rg,
        )
    }

    fn unary(
        &mut self,
        op_name: &'static str,
        a: NodeId,
        f: impl Fn(f64) -> f64,
        op: Op,
    ) -> Result<NodeId> {
        let data: Vec<f64> = self.data(a).iter().map(|&x| f(x)).collect();
        let rg = self.requires(a.0);
        self.push(op_name, self.shape(a).to_vec(), data, op, rg)
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary("tanh", a, f64::tanh, Op::Tanh { a: a.0 })
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary("sigmoid", a, stable_sigmoid, Op::Sigmoid { a: a.0 })
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary("relu", a, |x| x.max(0.0), Op::Relu { a: a.0 })
    }

    /// Multiplication by a compile-time constant.
    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        self.unary("scale", a, |x| c * x, Op::Scale { a: a.0, c })
    }

    /// `[n×p] ++ [n×q] -> [n×(p+q)]`, column-wise.
    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (na, p) = self.dims2(a, "concat_cols")?;
        let (nb, q) = self.dims2(b, "concat_cols")?;
        if na != nb {
            return Err(Error::Dimension {
                op: "concat_cols",
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let mut data = Vec::with_capacity(na * (p + q));
        for i in 0..na {
            data.extend_from_slice(&self.data(a)[i * p..(i + 1) * p]);
            data.extend_from_slice(&self.data(b)[i * q..(i + 1) * q]);
        }
        let rg = self.requires(a.0) || self.requires(b.0);
        self.push(
            "concat_cols",
            vec![na, p + q],
            data,
            Op::ConcatCols { a: a.0, b: b.0 },
            rg,
        )
    }

    /// Reinterprets the row-major buffer under a new shape of equal size.
    pub fn reshape(&mut self, a: NodeId, shape: Vec<usize>) -> Result<NodeId> {
        let numel: usize = shape.iter().product();
        if numel != self.tensor(a).numel() || shape.contains(&0) {
            return Err(Error::Dimension {
                op: "reshape",
                lhs: self.shape(a).to_vec(),
                rhs: shape,
            });
        }
        let data = self.data(a).to_vec();
        let rg = self.requires(a.0);
        self.push("reshape", shape, data, Op::Reshape { a: a.0 }, rg)
    }

    /// Sum of all elements, producing a scalar.
    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        let total: f64 = self.data(a).iter().sum();
        let rg = self.requires(a.0);
        self.push("sum", vec![1], vec![total], Op::Sum { a: a.0 }, rg)
    }

    /// Row-wise softmax of a matrix of logits.
    pub fn softmax_rows(&mut self, a: NodeId) -> Result<NodeId> {
        let (n, c) = self.dims2(a, "softmax_rows")?;
        let mut data = vec![0.0; n * c];
        for i in 0..n {
            let row = &self.data(a)[i * c..(i + 1) * c];
            softmax_row(row, &mut data[i * c..(i + 1) * c]);
        }
        let rg = self.requires(a.0);
        self.push(
            "softmax_rows",
            vec![n, c],
            data,
            Op::SoftmaxRows { a: a.0 },
            rg,
        )
    }

    /// Mean over rows of `-log softmax(logits)[target]`, stabilized by
    /// max-subtraction.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, targets: &[usize]) -> Result<NodeId> {
        let (n, c) = self.dims2(logits, "softmax_cross_entropy")?;
        if targets.len() != n {
            return Err(Error::contract(format!(
                "softmax_cross_entropy: {n} logit rows but {} targets",
                targets.len()
            )));
        }
        for &t in targets {
            if t >= c {
                return Err(Error::Label {
                    label: t,
                    n_classes: c,
                });
            }
        }
        let mut total = 0.0;
        for (i, &t) in targets.iter().enumerate() {
            let row = &self.data(logits)[i * c..(i + 1) * c];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = row.iter().map(|&z| (z - max).exp()).sum::<f64>().ln() + max;
            total += lse - row[t];
        }
        let rg = self.requires(logits.0);
        self.push(
            "softmax_cross_entropy",
            vec![1],
            vec![total / n as f64],
            Op::SoftmaxXent {
                logits: logits.0,
                targets: targets.to_vec(),
            },
            rg,
        )
    }

    /// Mean squared error over all elements of two same-shape tensors.
    pub fn mse(&mut self, pred: NodeId, target: NodeId) -> Result<NodeId> {
        if self.shape(pred) != self.shape(target) {
            return Err(Error::Dimension {
                op: "mse",
                lhs: self.shape(pred).to_vec(),
                rhs: self.shape(target).to_vec(),
            });
        }
        let n = self.tensor(pred).numel() as f64;
        let total: f64 = self
            .data(pred)
            .iter()
            .zip(self.data(target))
            .map(|(&p, &t)| (p - t) * (p - t))
            .sum();
        let rg = self.requires(pred.0) || self.requires(target.0);
        self.push(
            "mse",
            vec![1],
            vec![total / n],
            Op::Mse {
                pred: pred.0,
                target: target.0,
            },
            rg,
        )
    }

    /// Valid-padding 2D convolution. Input `[n,h,w,c]`, kernels `[f,kh,kw,c]`,
    /// bias `[f]`, producing `[n,ho,wo,f]`.
    pub fn conv2d(
        &mut self,
        input: NodeId,
        kernels: NodeId,
        bias: NodeId,
        stride: usize,
    ) -> Result<NodeId> {
        let is = self.shape(input).to_vec();
        let ks = self.shape(kernels).to_vec();
        if is.len() != 4 || ks.len() != 4 || is[3] != ks[3] || stride == 0 {
            return Err(Error::Dimension {
                op: "conv2d",
                lhs: is,
                rhs: ks,
            });
        }
        let (n, h, w, c) = (is[0], is[1], is[2], is[3]);
        let (f, kh, kw) = (ks[0], ks[1], ks[2]);
        if kh > h || kw > w || self.shape(bias) != [f] {
            return Err(Error::Dimension {
                op: "conv2d",
                lhs: is,
                rhs: ks,
            });
        }
        let ho = (h - kh) / stride + 1;
        let wo = (w - kw) / stride + 1;
        let inp = self.data(input);
        let ker = self.data(kernels);
        let bia = self.data(bias);
        let mut out = vec![0.0; n * ho * wo * f];
        for b in 0..n {
            for oy in 0..ho {
                for ox in 0..wo {
                    for fi in 0..f {
                        let mut acc = bia[fi];
                        for ky in 0..kh {
                            for kx in 0..kw {
                                for ci in 0..c {
                                    let iy = oy * stride + ky;
                                    let ix = ox * stride + kx;
                                    acc += inp[((b * h + iy) * w + ix) * c + ci]
                                        * ker[((fi * kh + ky) * kw + kx) * c + ci];
                                }
                            }
                        }
                        out[((b * ho + oy) * wo + ox) * f + fi] = acc;
                    }
                }
            }
        }
        let rg = self.requires(input.0) || self.requires(kernels.0) || self.requires(bias.0);
        self.push(
            "conv2d",
            vec![n, ho, wo, f],
            out,
            Op::Conv2d {
                input: input.0,
                kernels: kernels.0,
                bias: bias.0,
                stride,
            },
            rg,
        )
    }

    // ── backward ─────────────────────────────────────────────────────

    /// Populates `grad` on every `requires_grad` tensor reachable from the
    /// scalar `loss`, then marks the tape consumed.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if !self.recording {
            return Err(Error::contract(
                "backward on an inference graph; no ops were recorded",
            ));
        }
        if self.consumed {
            return Err(Error::contract(
                "graph already consumed by backward; run a fresh forward",
            ));
        }
        if !self.tensor(loss).is_scalar() {
            return Err(Error::contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        self.consumed = true;
        self.nodes[loss.0].tensor.grad = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let grad = match self.nodes[i].tensor.grad.take() {
                Some(g) => g,
                None => continue,
            };
            let op = self.nodes[i].op.clone();
            match op {
                Op::Leaf => {}
                Op::Matmul { a, b } => {
                    let (m, k) = {
                        let s = self.nodes[a].tensor.shape();
                        (s[0], s[1])
                    };
                    let n = self.nodes[b].tensor.shape()[1];
                    if self.requires(a) {
                        // dA = dC · Bᵀ
                        let bt = transpose(self.nodes[b].tensor.data(), k, n);
                        let da = matmul_raw(&grad, &bt, m, n, k);
                        self.accumulate(a, &da);
                    }
                    if self.requires(b) {
                        // dB = Aᵀ · dC
                        let at = transpose(self.nodes[a].tensor.data(), m, k);
                        let db = matmul_raw(&at, &grad, k, m, n);
                        self.accumulate(b, &db);
                    }
                }
                Op::Add { a, b } => {
                    if self.requires(a) {
                        self.accumulate(a, &grad);
                    }
                    if self.requires(b) {
                        self.accumulate(b, &grad);
                    }
                }
                Op::Mul { a, b } => {
                    if self.requires(a) {
                        let da: Vec<f64> = grad
                            .iter()
                            .zip(self.nodes[b].tensor.data())
                            .map(|(&g, &y)| g * y)
                            .collect();
                        self.accumulate(a, &da);
                    }
                    if self.requires(b) {
                        let db: Vec<f64> = grad
                            .iter()
                            .zip(self.nodes[a].tensor.data())
                            .map(|(&g, &x)| g * x)
                            .collect();
                        self.accumulate(b, &db);
                    }
                }
                Op::AddBias { a, bias } => {
                    if self.requires(a) {
                        self.accumulate(a, &grad);
                    }
                    if self.requires(bias) {
                        let d = self.nodes[bias].tensor.numel();
                        let mut db = vec![0.0; d];
                        for (i, &g) in grad.iter().enumerate() {
                            db[i % d] += g;
                        }
                        self.accumulate(bias, &db);
                    }
                }
                Op::Tanh { a } => {
                    if self.requires(a) {
                        let da: Vec<f64> = grad
                            .iter()
                            .zip(self.nodes[i].tensor.data())
                            .map(|(&g, &y)| g * (1.0 - y * y))
                            .collect();
                        self.accumulate(a, &da);
                    }
                }
                Op::Sigmoid { a } => {
                    if self.requires(a) {
                        let da: Vec<f64> = grad
                            .iter()
                            .zip(self.nodes[i].tensor.data())
                            .map(|(&g, &y)| g * y * (1.0 - y))
                            .collect();
                        self.accumulate(a, &da);
                    }
                }
                Op::Relu { a } => {
                    if self.requires(a) {
                        let da: Vec<f64> = grad
                            .iter()
                            .zip(self.nodes[a].tensor.data())
                            .map(|(&g, &x)| if x > 0.0 { g } else { 0.0 })
                            .collect();
                        self.accumulate(a, &da);
                    }
                }
                Op::Scale { a, c } => {
                    if self.requires(a) {
                        let da: Vec<f64> = grad.iter().map(|&g| g * c).collect();
                        self.accumulate(a, &da);
                    }
                }
                Op::ConcatCols { a, b } => {
                    let p = self.nodes[a].tensor.shape()[1];
                    let q = self.nodes[b].tensor.shape()[1];
                    let rows = self.nodes[a].tensor.shape()[0];
                    if self.requires(a) {
                        let mut da = vec![0.0; rows * p];
                        for r in 0..rows {
                            da[r * p..(r + 1) * p]
                                .copy_from_slice(&grad[r * (p + q)..r * (p + q) + p]);
                        }
                        self.accumulate(a, &da);
                    }
                    if self.requires(b) {
                        let mut db = vec![0.0; rows * q];
                        for r in 0..rows {
                            db[r * q..(r + 1) * q]
                                .copy_from_slice(&grad[r * (p + q) + p..(r + 1) * (p + q)]);
                        }
                        self.accumulate(b, &db);
                    }
                }
                Op::Reshape { a } => {
                    if self.requires(a) {
                        self.accumulate(a, &grad);
                    }
                }
                Op::Sum { a } => {
                    if self.requires(a) {
                        let da = vec![grad[0]; self.nodes[a].tensor.numel()];
                        self.accumulate(a, &da);
                    }
                }
                Op::SoftmaxRows { a } => {
                    if self.requires(a) {
                        let s = self.nodes[i].tensor.shape();
                        let (n, c) = (s[0], s[1]);
                        let probs = self.nodes[i].tensor.data();
                        let mut da = vec![0.0; n * c];
                        for r in 0..n {
                            let p = &probs[r * c..(r + 1) * c];
                            let g = &grad[r * c..(r + 1) * c];
                            let dot: f64 = p.iter().zip(g).map(|(&pi, &gi)| pi * gi).sum();
                            for j in 0..c {
                                da[r * c + j] = p[j] * (g[j] - dot);
                            }
                        }
                        self.accumulate(a, &da);
                    }
                }
                Op::SoftmaxXent { logits, targets } => {
                    if self.requires(logits) {
                        let s = self.nodes[logits].tensor.shape();
                        let (n, c) = (s[0], s[1]);
                        let z = self.nodes[logits].tensor.data();
                        let mut da = vec![0.0; n * c];
                        let scale = grad[0] / n as f64;
                        for (r, &t) in targets.iter().enumerate() {
                            let row = &z[r * c..(r + 1) * c];
                            let mut probs = vec![0.0; c];
                            softmax_row(row, &mut probs);
                            for j in 0..c {
                                let indicator = if j == t { 1.0 } else { 0.0 };
                                da[r * c + j] = scale * (probs[j] - indicator);
                            }
                        }
                        self.accumulate(logits, &da);
                    }
                }
                Op::Mse { pred, target } => {
                    let n = self.nodes[pred].tensor.numel() as f64;
                    let scale = 2.0 * grad[0] / n;
                    if self.requires(pred) {
                        let da: Vec<f64> = self.nodes[pred]
                            .tensor
                            .data()
                            .iter()
                            .zip(self.nodes[target].tensor.data())
                            .map(|(&p, &t)| scale * (p - t))
                            .collect();
                        self.accumulate(pred, &da);
                    }
                    if self.requires(target) {
                        let dt: Vec<f64> = self.nodes[pred]
                            .tensor
                            .data()
                            .iter()
                            .zip(self.nodes[target].tensor.data())
                            .map(|(&p, &t)| -scale * (p - t))
                            .collect();
                        self.accumulate(target, &dt);
                    }
                }
                Op::Conv2d {
                    input,
                    kernels,
                    bias,
                    stride,
                } => {
                    let is = self.nodes[input].tensor.shape().to_vec();
                    let ks = self.nodes[kernels].tensor.shape().to_vec();
                    let (n, h, w, c) = (is[0], is[1], is[2], is[3]);
                    let (f, kh, kw) = (ks[0], ks[1], ks[2]);
                    let ho = (h - kh) / stride + 1;
                    let wo = (w - kw) / stride + 1;
                    let need_in = self.requires(input);
                    let need_k = self.requires(kernels);
                    let need_b = self.requires(bias);
                    let inp = self.nodes[input].tensor.data();
                    let ker = self.nodes[kernels].tensor.data();
                    let mut din = vec![0.0; inp.len()];
                    let mut dker = vec![0.0; ker.len()];
                    let mut dbias = vec![0.0; f];
                    for b in 0..n {
                        for oy in 0..ho {
                            for ox in 0..wo {
                                for fi in 0..f {
                                    let g = grad[((b * ho + oy) * wo + ox) * f + fi];
                                    dbias[fi] += g;
                                    for ky in 0..kh {
                                        for kx in 0..kw {
                                            for ci in 0..c {
                                                let ii = ((b * h + oy * stride + ky) * w
                                                    + ox * stride
                                                    + kx)
                                                    * c
                                                    + ci;
                                                let kk = ((fi * kh + ky) * kw + kx) * c + ci;
                                                if need_in {
                                                    din[ii] += g * ker[kk];
                                                }
                                                if need_k {
                                                    dker[kk] += g * inp[ii];
                                                }
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                    if need_in {
                        self.accumulate(input, &din);
                    }
                    if need_k {
                        self.accumulate(kernels, &dker);
                    }
                    if need_b {
                        self.accumulate(bias, &dbias);
                    }
                }
            }
            // A non-leaf's buffer was only scratch space for the sweep; leaves
            // keep theirs so callers can read parameter gradients.
            if matches!(self.nodes[i].op, Op::Leaf) {
                self.nodes[i].tensor.grad = Some(grad);
            }
        }

        // Unreached trainable leaves still expose a (zero) gradient.
        for node in &mut self.nodes {
            if node.tensor.requires_grad && node.tensor.grad.is_none() {
                node.tensor.grad = Some(vec![0.0; node.tensor.numel()]);
            }
        }
        Ok(())
    }

    fn accumulate(&mut self, id: usize, contribution: &[f64]) {
        let t = &mut self.nodes[id].tensor;
        match &mut t.grad {
            Some(g) => {
                for (gi, &ci) in g.iter_mut().zip(contribution) {
                    *gi += ci;
                }
            }
            None => t.grad = Some(contribution.to_vec()),
        }
    }
}

impl Default for Graph {
    fn default() -> Self {
        Graph::new()
    }
}

fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                orow[j] += av * brow[j];
            }
        }
    }
    out
}

fn transpose(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = a[i * cols + j];
        }
    }
    out
}

fn softmax_row(row: &[f64], out: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &z) in out.iter_mut().zip(row) {
        *o = (z - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn param(g: &mut Graph, shape: Vec<usize>, data: Vec<f64>) -> NodeId {
        g.parameter(Tensor::new(shape, data).unwrap())
    }

    #[test]
    fn matmul_identity() {
        let mut g = Graph::new();
        let i2 = param(&mut g, vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]);
        let b = param(&mut g, vec![2, 2], vec![3.0, 4.0, 5.0, 6.0]);
        let c = g.matmul(i2, b).unwrap();
        assert_eq!(g.data(c), &[3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn matmul_rectangular() {
        // Independent manual product: [[1,2],[3,4]] x [[5],[6]] = [[17],[39]].
        let mut g = Graph::new();
        let a = param(&mut g, vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let b = param(&mut g, vec![2, 1], vec![5.0, 6.0]);
        let c = g.matmul(a, b).unwrap();
        assert_eq!(g.data(c), &[17.0, 39.0]);
    }

    #[test]
    fn matmul_shape_mismatch_names_both_shapes() {
        let mut g = Graph::new();
        let a = param(&mut g, vec![2, 3], vec![0.0; 6]);
        let b = param(&mut g, vec![4, 2], vec![0.0; 8]);
        let err = g.matmul(a, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[4, 2]"), "{msg}");
    }

    #[test]
    fn elementwise_basics() {
        let mut g = Graph::new();
        let a = param(&mut g, vec![3], vec![1.0, 2.0, 3.0]);
        let z = param(&mut g, vec![3], vec![0.0, 0.0, 0.0]);
        let m = g.mul(a, z).unwrap();
        assert_eq!(g.data(m), &[0.0, 0.0, 0.0]);

        let s = g.sigmoid(z).unwrap();
        assert_eq!(g.data(s), &[0.5, 0.5, 0.5]);

        let b = param(&mut g, vec![2], vec![3.0, 4.0]);
        let c = param(&mut g, vec![2], vec![1.0, 2.0]);
        let sum = g.add(c, b).unwrap();
        assert_eq!(g.data(sum), &[4.0, 6.0]);

        let d = param(&mut g, vec![2], vec![1.0, 2.0]);
        let err = g.add(d, a).unwrap_err();
        assert!(matches!(err, crate::Error::Dimension { .. }));
    }

    #[test]
    fn softmax_xent_uniform_logits() {
        let mut g = Graph::new();
        let z = param(&mut g, vec![2, 3], vec![0.0; 6]);
        let loss = g.softmax_cross_entropy(z, &[0, 2]).unwrap();
        let expected = 3.0f64.ln();
        assert!((g.data(loss)[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn softmax_xent_confident_logit() {
        // -log softmax([10,0,0])[0] = ln(1 + 2 e^-10), evaluated directly.
        let mut g = Graph::new();
        let z = param(&mut g, vec![1, 3], vec![10.0, 0.0, 0.0]);
        let loss = g.softmax_cross_entropy(z, &[0]).unwrap();
        let expected = (1.0 + 2.0 * (-10.0f64).exp()).ln();
        assert!((g.data(loss)[0] - expected).abs() < 1e-15);
        assert!((g.data(loss)[0] - 9.08e-5).abs() < 1e-6);
    }

    #[test]
    fn softmax_xent_target_out_of_range() {
        let mut g = Graph::new();
        let z = param(&mut g, vec![1, 3], vec![0.0; 3]);
        let err = g.softmax_cross_entropy(z, &[5]).unwrap_err();
        assert!(matches!(err, crate::Error::Label { label: 5, n_classes: 3 }));
    }

    #[test]
    fn backward_sum_gives_ones() {
        let mut g = Graph::new();
        let w = param(&mut g, vec![2, 2], vec![1.0, -2.0, 3.0, 0.5]);
        let loss = g.sum(w).unwrap();
        g.backward(loss).unwrap();
        assert_eq!(g.grad(w).unwrap(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn backward_quadratic() {
        let mut g = Graph::new();
        let w = param(&mut g, vec![1], vec![3.0]);
        let sq = g.mul(w, w).unwrap();
        let loss = g.sum(sq).unwrap();
        g.backward(loss).unwrap();
        assert_eq!(g.grad(w).unwrap(), &[6.0]);
    }

    #[test]
    fn backward_requires_scalar_loss() {
        let mut g = Graph::new();
        let w = param(&mut g, vec![2], vec![1.0, 2.0]);
        let err = g.backward(w).unwrap_err();
        assert!(matches!(err, crate::Error::Contract(_)));
    }

    #[test]
    fn second_backward_is_an_error() {
        let mut g = Graph::new();
        let w = param(&mut g, vec![1], vec![1.0]);
        let loss = g.sum(w).unwrap();
        g.backward(loss).unwrap();
        let err = g.backward(loss).unwrap_err();
        assert!(matches!(err, crate::Error::Contract(_)));
    }

    #[test]
    fn inference_graph_rejects_backward() {
        let mut g = Graph::inference();
        let w = g.parameter(Tensor::scalar(1.0));
        assert!(!g.tensor(w).requires_grad);
        let s = g.sum(w).unwrap();
        assert!(g.backward(s).is_err());
    }

    // Central finite differences, the independent oracle for adjoints.
    fn finite_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
        let mut grad = vec![0.0; x.len()];
        let mut xp = x.to_vec();
        for i in 0..x.len() {
            xp[i] = x[i] + h;
            let fp = f(&xp);
            xp[i] = x[i] - h;
            let fm = f(&xp);
            xp[i] = x[i];
            grad[i] = (fp - fm) / (2.0 * h);
        }
        grad
    }

    fn assert_close(analytic: &[f64], numeric: &[f64], rtol: f64) {
        for (i, (&a, &n)) in analytic.iter().zip(numeric).enumerate() {
            let denom = a.abs().max(n.abs()).max(1e-6);
            assert!(
                (a - n).abs() / denom < rtol,
                "grad[{i}]: analytic {a} vs numeric {n}"
            );
        }
    }

    #[test]
    fn composite_graph_matches_finite_differences() {
        // tanh(x·W + b) -> sigmoid -> concat with relu(x·W) -> softmax CE
        let x0 = vec![0.4, -0.7, 0.2, 0.9, -0.3, 0.1];
        let w0 = vec![0.3, -0.2, 0.5, 0.1, -0.4, 0.6, 0.2, -0.1, 0.3];
        let b0 = vec![0.05, -0.02, 0.07];
        let run = |xv: &[f64], wv: &[f64], bv: &[f64]| -> (Graph, NodeId, NodeId, NodeId, NodeId) {
            let mut g = Graph::new();
            let x = param(&mut g, vec![2, 3], xv.to_vec());
            let w = param(&mut g, vec![3, 3], wv.to_vec());
            let b = param(&mut g, vec![3], bv.to_vec());
            let xw = g.matmul(x, w).unwrap();
            let pre = g.add_bias(xw, b).unwrap();
            let t = g.tanh(pre).unwrap();
            let s = g.sigmoid(t).unwrap();
            let r = g.relu(xw).unwrap();
            let cat = g.concat_cols(s, r).unwrap();
            let half = g.scale(cat, 0.5).unwrap();
            let prod = g.mul(half, cat).unwrap();
            let resh = g.reshape(prod, vec![2, 6]).unwrap();
            let loss = g.softmax_cross_entropy(resh, &[1, 4]).unwrap();
            (g, loss, x, w, b)
        };
        let (mut g, loss, x, w, b) = run(&x0, &w0, &b0);
        g.backward(loss).unwrap();
        let (gx, gw, gb) = (
            g.grad(x).unwrap().to_vec(),
            g.grad(w).unwrap().to_vec(),
            g.grad(b).unwrap().to_vec(),
        );

        let h = 1e-5;
        let fx = finite_diff(
            |xv| {
                let (g, loss, ..) = run(xv, &w0, &b0);
                g.data(loss)[0]
            },
            &x0,
            h,
        );
        let fw = finite_diff(
            |wv| {
                let (g, loss, ..) = run(&x0, wv, &b0);
                g.data(loss)[0]
            },
            &w0,
            h,
        );
        let fb = finite_diff(
            |bv| {
                let (g, loss, ..) = run(&x0, &w0, bv);
                g.data(loss)[0]
            },
            &b0,
            h,
        );
        assert_close(&gx, &fx, 1e-4);
        assert_close(&gw, &fw, 1e-4);
        assert_close(&gb, &fb, 1e-4);
    }

    #[test]
    fn conv_and_mse_match_finite_differences() {
        let inp0: Vec<f64> = (0..2 * 4 * 4 * 3).map(|i| ((i * 37 % 19) as f64 - 9.0) / 10.0).collect();
        let ker0: Vec<f64> = (0..2 * 3 * 3 * 3).map(|i| ((i * 29 % 17) as f64 - 8.0) / 12.0).collect();
        let bias0 = vec![0.1, -0.2];
        #[allow(clippy::identity_op)] // factors spell the [n,h,w,c] shape
        let target: Vec<f64> = (0..2 * 1 * 1 * 2).map(|i| i as f64 / 4.0).collect();
        let run = |iv: &[f64], kv: &[f64], bv: &[f64]| {
            let mut g = Graph::new();
            let i = param(&mut g, vec![2, 4, 4, 3], iv.to_vec());
            let k = param(&mut g, vec![2, 3, 3, 3], kv.to_vec());
            let b = param(&mut g, vec![2], bv.to_vec());
            let t = g.constant(Tensor::new(vec![2, 1, 1, 2], target.clone()).unwrap());
            let c = g.conv2d(i, k, b, 2).unwrap();
            let s = g.sigmoid(c).unwrap();
            let loss = g.mse(s, t).unwrap();
            (g, loss, i, k, b)
        };
        let (mut g, loss, i, k, b) = run(&inp0, &ker0, &bias0);
        g.backward(loss).unwrap();
        let (gi, gk, gb) = (
            g.grad(i).unwrap().to_vec(),
            g.grad(k).unwrap().to_vec(),
            g.grad(b).unwrap().to_vec(),
        );
        let h = 1e-5;
        let fi = finite_diff(|v| { let (g, l, ..) = run(v, &ker0, &bias0); g.data(l)[0] }, &inp0, h);
        let fk = finite_diff(|v| { let (g, l, ..) = run(&inp0, v, &bias0); g.data(l)[0] }, &ker0, h);
        let fb = finite_diff(|v| { let (g, l, ..) = run(&inp0, &ker0, v); g.data(l)[0] }, &bias0, h);
        assert_close(&gi, &fi, 1e-4);
        assert_close(&gk, &fk, 1e-4);
        assert_close(&gb, &fb, 1e-4);
    }

    #[test]
    fn softmax_rows_sum_to_one_and_backprop() {
        let mut g = Graph::new();
        let z = param(&mut g, vec![2, 4], vec![1.0, -2.0, 0.5, 3.0, 0.0, 0.0, 0.0, 0.0]);
        let p = g.softmax_rows(z).unwrap();
        for r in 0..2 {
            let s: f64 = g.data(p)[r * 4..(r + 1) * 4].iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        let q = g.mul(p, p).unwrap();
        let loss = g.sum(q).unwrap();
        g.backward(loss).unwrap();
        assert!(g.grad(z).is_some());
    }

    #[test]
    fn non_finite_forward_is_reported() {
        let mut g = Graph::new();
        let a = param(&mut g, vec![1], vec![1e308]);
        let b = param(&mut g, vec![1], vec![1e308]);
        let err = g.add(a, b).unwrap_err();
        assert!(matches!(err, crate::Error::NonFinite { op: "add" }));
    }
}
