//! Recorded computation graph and the backward pass.

use crate::error::{Error, Result};

use super::tensor::Tensor;

/// Handle to a node owned by a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(pub(crate) usize);

/// One executed operation with everything backward needs to replay it.
enum Op {
    MatMul {
        a: NodeId,
        b: NodeId,
        out: NodeId,
    },
    Conv2d {
        input: NodeId,
        kernels: NodeId,
        out: NodeId,
        stride: usize,
    },
    Relu {
        x: NodeId,
        out: NodeId,
    },
    /// Mean over the batch of label-smoothed cross-entropy. `probs` and
    /// `targets` are saved from forward for the `(p - t) / B` gradient.
    SoftmaxCrossEntropy {
        logits: NodeId,
        out: NodeId,
        probs: Vec<f64>,
        targets: Vec<f64>,
        batch: usize,
    },
    AddRowBias {
        x: NodeId,
        bias: NodeId,
        out: NodeId,
    },
    Scale {
        x: NodeId,
        factor: f64,
        out: NodeId,
    },
    Add {
        a: NodeId,
        b: NodeId,
        out: NodeId,
    },
    Reshape {
        x: NodeId,
        out: NodeId,
    },
}

/// Ordered record of executed operations plus the tensors they produced.
///
/// A graph is owned by one logical execution thread. `backward` walks the
/// operation record in exact reverse execution order, accumulating adjoints
/// in a per-call scratch buffer; gradients of `track_grad` leaves are then
/// added into the leaf tensors, so calling `backward` twice without clearing
/// doubles them.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Tensor>,
    ops: Vec<Op>,
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    /// Register a leaf whose gradient is not wanted (batches, constants).
    pub fn input(&mut self, mut t: Tensor) -> NodeId {
        t.set_track_grad(false);
        self.push(t)
    }

    /// Register a trainable leaf; backward deposits dLoss/dParam on it.
    pub fn param(&mut self, mut t: Tensor) -> NodeId {
        t.set_track_grad(true);
        self.push(t)
    }

    fn push(&mut self, t: Tensor) -> NodeId {
        debug_assert!(t.all_finite(), "non-finite values entered the graph");
        self.nodes.push(t);
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0]
    }

    /// Gradient buffer of a node, if backward has populated one.
    pub fn grad(&self, id: NodeId) -> Option<&[f64]> {
        self.nodes[id.0].grad()
    }

    pub fn zero_grads(&mut self) {
        for n in &mut self.nodes {
            n.clear_grad();
        }
    }

    // ── Operations ──────────────────────────────────────────────────────

    /// `a[m×k] · b[k×n] -> [m×n]`.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (self.nodes[a.0].shape(), self.nodes[b.0].shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::DimMismatch {
                op: "matmul",
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        let av = self.nodes[a.0].values();
        let bv = self.nodes[b.0].values();
        for i in 0..m {
            for p in 0..k {
                let aip = av[i * k + p];
                let row = p * n;
                for j in 0..n {
                    out[i * n + j] += aip * bv[row + j];
                }
            }
        }
        let out = self.push(Tensor::new(vec![m, n], out)?);
        self.ops.push(Op::MatMul { a, b, out });
        Ok(out)
    }

    /// Valid (unpadded) cross-correlation.
    ///
    /// `input` is `[C_in×H×W]` or batched `[B×C_in×H×W]`; `kernels` is
    /// `[C_out×C_in×kh×kw]`. Output spatial size is
    /// `floor((H - kh) / stride) + 1`.
    pub fn conv2d(&mut self, input: NodeId, kernels: NodeId, stride: usize) -> Result<NodeId> {
        let si = self.nodes[input.0].shape().to_vec();
        let sk = self.nodes[kernels.0].shape().to_vec();
        if stride == 0 {
            return Err(Error::Contract("conv2d stride must be positive".into()));
        }
        let batched = match si.len() {
            3 => false,
            4 => true,
            _ => {
                return Err(Error::DimMismatch {
                    op: "conv2d",
                    lhs: si,
                    rhs: sk,
                })
            }
        };
        let (b, ci, h, w) = if batched {
            (si[0], si[1], si[2], si[3])
        } else {
            (1, si[0], si[1], si[2])
        };
        if sk.len() != 4 || sk[1] != ci || sk[2] > h || sk[3] > w {
            return Err(Error::DimMismatch {
                op: "conv2d",
                lhs: si,
                rhs: sk,
            });
        }
        let (co, kh, kw) = (sk[0], sk[2], sk[3]);
        let ho = (h - kh) / stride + 1;
        let wo = (w - kw) / stride + 1;

        let iv = self.nodes[input.0].values();
        let kv = self.nodes[kernels.0].values();
        let mut out = vec![0.0; b * co * ho * wo];
        for bi in 0..b {
            let in_base = bi * ci * h * w;
            let out_base = bi * co * ho * wo;
            for o in 0..co {
                for oy in 0..ho {
                    for ox in 0..wo {
                        let mut acc = 0.0;
                        for c in 0..ci {
                            let plane = in_base + c * h * w;
                            let kbase = (o * ci + c) * kh * kw;
                            for ky in 0..kh {
                                let row = plane + (oy * stride + ky) * w + ox * stride;
                                let krow = kbase + ky * kw;
                                for kx in 0..kw {
                                    acc += iv[row + kx] * kv[krow + kx];
                                }
                            }
                        }
                        out[out_base + (o * ho + oy) * wo + ox] = acc;
                    }
                }
            }
        }
        let out_shape = if batched {
            vec![b, co, ho, wo]
        } else {
            vec![co, ho, wo]
        };
        let out = self.push(Tensor::new(out_shape, out)?);
        self.ops.push(Op::Conv2d {
            input,
            kernels,
            out,
            stride,
        });
        Ok(out)
    }

    /// Elementwise `max(0, x)`; the subgradient at 0 is 0.
    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let t = &self.nodes[x.0];
        let out = Tensor::new(
            t.shape().to_vec(),
            t.values().iter().map(|&v| v.max(0.0)).collect(),
        )
        .expect("same shape");
        let out = self.push(out);
        self.ops.push(Op::Relu { x, out });
        out
    }

    /// Mean over the batch of cross-entropy between `softmax(logits)` and the
    /// `smoothing`-smoothed one-hot targets (true class `1 - e + e/K`, others
    /// `e/K`). Row-max subtraction keeps the softmax stable.
    pub fn softmax_cross_entropy(
        &mut self,
        logits: NodeId,
        labels: &[usize],
        smoothing: f64,
    ) -> Result<NodeId> {
        let shape = self.nodes[logits.0].shape().to_vec();
        if shape.len() != 2 {
            return Err(Error::Contract(format!(
                "softmax_cross_entropy expects [B×K] logits, got {shape:?}"
            )));
        }
        let (b, k) = (shape[0], shape[1]);
        if labels.len() != b {
            return Err(Error::DimMismatch {
                op: "softmax_cross_entropy",
                lhs: shape,
                rhs: vec![labels.len()],
            });
        }
        if !(0.0..1.0).contains(&smoothing) {
            return Err(Error::Contract(format!(
                "smoothing must lie in [0,1), got {smoothing}"
            )));
        }
        for &l in labels {
            if l >= k {
                return Err(Error::IndexOutOfRange {
                    what: "class label",
                    index: l,
                    limit: k,
                });
            }
        }

        let lv = self.nodes[logits.0].values();
        let off = smoothing / k as f64;
        let on = 1.0 - smoothing + off;
        let mut probs = vec![0.0; b * k];
        let mut targets = vec![off; b * k];
        let mut loss = 0.0;
        for row in 0..b {
            targets[row * k + labels[row]] = on;
            let r = &lv[row * k..(row + 1) * k];
            let max = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for (j, &l) in r.iter().enumerate() {
                let e = (l - max).exp();
                probs[row * k + j] = e;
                denom += e;
            }
            let log_denom = denom.ln();
            for j in 0..k {
                probs[row * k + j] /= denom;
                // -t * log p, with log p = (l - max) - log denom
                loss -= targets[row * k + j] * (r[j] - max - log_denom);
            }
        }
        loss /= b as f64;

        let out = self.push(Tensor::scalar(loss));
        self.ops.push(Op::SoftmaxCrossEntropy {
            logits,
            out,
            probs,
            targets,
            batch: b,
        });
        Ok(out)
    }

    /// `out[b,k] = x[b,k] + bias[k]`.
    pub fn add_row_bias(&mut self, x: NodeId, bias: NodeId) -> Result<NodeId> {
        let sx = self.nodes[x.0].shape().to_vec();
        let sb = self.nodes[bias.0].shape().to_vec();
        if sx.len() != 2 || sb.len() != 1 || sb[0] != sx[1] {
            return Err(Error::DimMismatch {
                op: "add_row_bias",
                lhs: sx,
                rhs: sb,
            });
        }
        let (b, k) = (sx[0], sx[1]);
        let xv = self.nodes[x.0].values();
        let bv = self.nodes[bias.0].values();
        let mut out = vec![0.0; b * k];
        for row in 0..b {
            for j in 0..k {
                out[row * k + j] = xv[row * k + j] + bv[j];
            }
        }
        let out = self.push(Tensor::new(vec![b, k], out)?);
        self.ops.push(Op::AddRowBias { x, bias, out });
        Ok(out)
    }

    /// Multiply by a constant.
    pub fn scale(&mut self, x: NodeId, factor: f64) -> NodeId {
        let t = &self.nodes[x.0];
        let out = Tensor::new(
            t.shape().to_vec(),
            t.values().iter().map(|&v| factor * v).collect(),
        )
        .expect("same shape");
        let out = self.push(out);
        self.ops.push(Op::Scale { x, factor, out });
        out
    }

    /// Elementwise sum of two same-shape tensors.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (self.nodes[a.0].shape(), self.nodes[b.0].shape());
        if sa != sb {
            return Err(Error::DimMismatch {
                op: "add",
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        let out = Tensor::new(
            sa.to_vec(),
            self.nodes[a.0]
                .values()
                .iter()
                .zip(self.nodes[b.0].values())
                .map(|(&x, &y)| x + y)
                .collect(),
        )?;
        let out = self.push(out);
        self.ops.push(Op::Add { a, b, out });
        Ok(out)
    }

    /// Same values, new shape.
    pub fn reshape(&mut self, x: NodeId, shape: Vec<usize>) -> Result<NodeId> {
        let n: usize = shape.iter().product();
        if n != self.nodes[x.0].len() {
            return Err(Error::DimMismatch {
                op: "reshape",
                lhs: self.nodes[x.0].shape().to_vec(),
                rhs: shape,
            });
        }
        let out = Tensor::new(shape, self.nodes[x.0].values().to_vec())?;
        let out = self.push(out);
        self.ops.push(Op::Reshape { x, out });
        Ok(out)
    }

    // ── Backward ────────────────────────────────────────────────────────

    /// Populate gradients of every `track_grad` leaf with dLoss/dLeaf.
    ///
    /// `loss` must be a scalar produced through this graph. Adjoints are
    /// accumulated in a scratch buffer seeded with 1 at the loss, then added
    /// into the leaf tensors' grad buffers.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if self.nodes[loss.0].len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[loss.0].shape()
            )));
        }
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        adj[loss.0] = Some(vec![1.0]);

        macro_rules! out_adj {
            ($id:expr) => {
                match &adj[$id.0] {
                    Some(a) => a.clone(),
                    // Node never contributed to the loss.
                    None => continue,
                }
            };
        }
        macro_rules! acc {
            ($id:expr, $i:expr, $v:expr) => {{
                let buf = adj[$id.0].get_or_insert_with(|| vec![0.0; self.nodes[$id.0].len()]);
                buf[$i] += $v;
            }};
        }

        for op in self.ops.iter().rev() {
            match op {
                Op::MatMul { a, b, out } => {
                    let g = out_adj!(out);
                    let (m, k) = {
                        let s = self.nodes[a.0].shape();
                        (s[0], s[1])
                    };
                    let n = self.nodes[b.0].shape()[1];
                    let av = self.nodes[a.0].values().to_vec();
                    let bv = self.nodes[b.0].values().to_vec();
                    // dA = g · Bᵀ
                    for i in 0..m {
                        for p in 0..k {
                            let mut acc_v = 0.0;
                            for j in 0..n {
                                acc_v += g[i * n + j] * bv[p * n + j];
                            }
                            acc!(a, i * k + p, acc_v);
                        }
                    }
                    // dB = Aᵀ · g
                    for p in 0..k {
                        for j in 0..n {
                            let mut acc_v = 0.0;
                            for i in 0..m {
                                acc_v += av[i * k + p] * g[i * n + j];
                            }
                            acc!(b, p * n + j, acc_v);
                        }
                    }
                }
                Op::Conv2d {
                    input,
                    kernels,
                    out,
                    stride,
                } => {
                    let g = out_adj!(out);
                    let si = self.nodes[input.0].shape().to_vec();
                    let sk = self.nodes[kernels.0].shape().to_vec();
                    let batched = si.len() == 4;
                    let (b, ci, h, w) = if batched {
                        (si[0], si[1], si[2], si[3])
                    } else {
                        (1, si[0], si[1], si[2])
                    };
                    let (co, kh, kw) = (sk[0], sk[2], sk[3]);
                    let ho = (h - kh) / stride + 1;
                    let wo = (w - kw) / stride + 1;
                    let iv = self.nodes[input.0].values().to_vec();
                    let kv = self.nodes[kernels.0].values().to_vec();
                    for bi in 0..b {
                        let in_base = bi * ci * h * w;
                        let out_base = bi * co * ho * wo;
                        for o in 0..co {
                            for oy in 0..ho {
                                for ox in 0..wo {
                                    let go = g[out_base + (o * ho + oy) * wo + ox];
                                    for c in 0..ci {
                                        let plane = in_base + c * h * w;
                                        let kbase = (o * ci + c) * kh * kw;
                                        for ky in 0..kh {
                                            let row =
                                                plane + (oy * stride + ky) * w + ox * stride;
                                            let krow = kbase + ky * kw;
                                            for kx in 0..kw {
                                                acc!(input, row + kx, go * kv[krow + kx]);
                                                acc!(kernels, krow + kx, go * iv[row + kx]);
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                Op::Relu { x, out } => {
                    let g = out_adj!(out);
                    let xv = self.nodes[x.0].values().to_vec();
                    for (i, (&gv, &v)) in g.iter().zip(&xv).enumerate() {
                        if v > 0.0 {
                            acc!(x, i, gv);
                        }
                    }
                }
                Op::SoftmaxCrossEntropy {
                    logits,
                    out,
                    probs,
                    targets,
                    batch,
                } => {
                    let g = out_adj!(out);
                    let scale = g[0] / *batch as f64;
                    for i in 0..probs.len() {
                        acc!(logits, i, scale * (probs[i] - targets[i]));
                    }
                }
                Op::AddRowBias { x, bias, out } => {
                    let g = out_adj!(out);
                    let k = self.nodes[bias.0].len();
                    for (i, &gv) in g.iter().enumerate() {
                        acc!(x, i, gv);
                        acc!(bias, i % k, gv);
                    }
                }
                Op::Scale { x, factor, out } => {
                    let g = out_adj!(out);
                    for (i, &gv) in g.iter().enumerate() {
                        acc!(x, i, factor * gv);
                    }
                }
                Op::Add { a, b, out } => {
                    let g = out_adj!(out);
                    for (i, &gv) in g.iter().enumerate() {
                        acc!(a, i, gv);
                        acc!(b, i, gv);
                    }
                }
                Op::Reshape { x, out } => {
                    let g = out_adj!(out);
                    for (i, &gv) in g.iter().enumerate() {
                        acc!(x, i, gv);
                    }
                }
            }
        }

        for (node, a) in self.nodes.iter_mut().zip(&adj) {
            if node.track_grad() {
                if let Some(a) = a {
                    node.accumulate_grad(a);
                }
            }
        }
        Ok(())
    }
}
