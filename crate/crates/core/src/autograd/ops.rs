use alloc::vec;
use alloc::vec::Vec;

use super::{Graph, Span, Var};
use crate::tensor::{gemm, Mat, Tensor};

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// Geometry of a 1-D convolution over packed sequences laid out
/// channels-last: `count` sequences of `len` rows, `channels` columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub count: usize,
    pub len: usize,
    pub channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeometry {
    pub fn out_len(&self) -> usize {
        (self.len + 2 * self.pad - self.kernel) / self.stride + 1
    }
}

pub(super) enum Op {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Scale(Var, f64),
    Gelu(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        rstd: Vec<f64>,
    },
    Unfold {
        x: Var,
        geom: ConvGeometry,
    },
    Attention {
        qkv: Var,
        heads: usize,
        seqs: Vec<Span>,
    },
    BlendRows {
        x: Var,
        token: Var,
        weights: Vec<f64>,
    },
    ConcatCols(Vec<Var>),
    MeanRows {
        x: Var,
        groups: Vec<Span>,
    },
    Lstm {
        xw: Var,
        w_hh: Var,
        seqs: Vec<Span>,
        reverse: bool,
        gates: Vec<f64>,
        cells: Vec<f64>,
    },
    AttnPool {
        x: Var,
        scores: Var,
        seqs: Vec<Span>,
        probs: Vec<f64>,
    },
    Fused {
        x: Var,
        grad: Tensor,
    },
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = libm::exp(*v - max);
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Attention probabilities of one head over one sequence: `softmax(Q Kᵀ/√dₕ)`
/// as a row-major `len × len` buffer.
pub fn attention_probs(qkv: &Tensor, heads: usize, seq: Span, head: usize) -> Vec<f64> {
    let d = qkv.cols() / 3;
    let dh = d / heads;
    let mut probs = vec![0.0; seq.len * seq.len];
    fill_probs(qkv.data(), d, dh, seq, head, &mut probs);
    probs
}

fn fill_probs(qkv: &[f64], d: usize, dh: usize, seq: Span, head: usize, probs: &mut [f64]) {
    let ld = 3 * d;
    let q = Mat::block(qkv, ld, seq.start, seq.len, head * dh, dh);
    let k = Mat::block(qkv, ld, seq.start, seq.len, d + head * dh, dh);
    gemm(q, k.t(), probs, seq.len, 0.0);
    let scale = 1.0 / libm::sqrt(dh as f64);
    for row in probs.chunks_mut(seq.len) {
        for v in row.iter_mut() {
            *v *= scale;
        }
        softmax_in_place(row);
    }
}

fn grad_slot<'a>(graph: &Graph, grads: &'a mut [Option<Tensor>], v: Var) -> &'a mut Tensor {
    let slot = &mut grads[v.0];
    if slot.is_none() {
        let (r, c) = graph.value(v).shape();
        *slot = Some(Tensor::zeros(r, c));
    }
    slot.as_mut().unwrap()
}

impl Graph {
    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|&v| self.needs_grad(v))
    }

    /// `a · b`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).matmul(self.value(b));
        let ng = self.any_grad(&[a, b]);
        self.push(out, Op::MatMul(a, b), ng)
    }

    /// Adds a `1 × cols` bias to every row.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Var {
        let xv = self.value(x);
        let bv = self.value(b);
        assert_eq!(bv.shape(), (1, xv.cols()), "bias shape");
        let mut out = xv.clone();
        let cols = out.cols();
        for row in out.data_mut().chunks_mut(cols) {
            for (o, bb) in row.iter_mut().zip(bv.data()) {
                *o += bb;
            }
        }
        let ng = self.any_grad(&[x, b]);
        self.push(out, Op::AddBias(x, b), ng)
    }

    /// `x · w + b`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Var {
        let y = self.matmul(x, w);
        self.add_bias(y, b)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.value(a).shape(), self.value(b).shape(), "add shapes");
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        let ng = self.any_grad(&[a, b]);
        self.push(out, Op::Add(a, b), ng)
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let mut out = self.value(x).clone();
        out.scale(s);
        let ng = self.needs_grad(x);
        self.push(out, Op::Scale(x, s), ng)
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, x: Var) -> Var {
        let mut out = self.value(x).clone();
        for v in out.data_mut() {
            let t = libm::tanh(GELU_C * (*v + GELU_A * *v * *v * *v));
            *v = 0.5 * *v * (1.0 + t);
        }
        let ng = self.needs_grad(x);
        self.push(out, Op::Gelu(x), ng)
    }

    /// Layer normalization over the columns of each row.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let xv = self.value(x);
        let (rows, cols) = xv.shape();
        let g = self.value(gamma).data();
        let b = self.value(beta).data();
        assert_eq!(g.len(), cols, "layer norm gain width");
        let mut xhat = vec![0.0; rows * cols];
        let mut rstd = vec![0.0; rows];
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let row = xv.row(r);
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let rs = 1.0 / libm::sqrt(var + LN_EPS);
            rstd[r] = rs;
            let xh = &mut xhat[r * cols..(r + 1) * cols];
            let o = out.row_mut(r);
            for c in 0..cols {
                xh[c] = (row[c] - mean) * rs;
                o[c] = xh[c] * g[c] + b[c];
            }
        }
        let ng = self.any_grad(&[x, gamma, beta]);
        self.push(
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            },
            ng,
        )
    }

    /// im2col: gathers each convolution window into one row of
    /// `kernel × channels` values (window-position major), zero padded.
    pub fn unfold(&mut self, x: Var, geom: ConvGeometry) -> Var {
        let xv = self.value(x);
        assert_eq!(
            xv.shape(),
            (geom.count * geom.len, geom.channels),
            "unfold input shape"
        );
        let out_len = geom.out_len();
        let width = geom.kernel * geom.channels;
        let mut out = Tensor::zeros(geom.count * out_len, width);
        let c = geom.channels;
        for s in 0..geom.count {
            for o in 0..out_len {
                let dst = out.row_mut(s * out_len + o);
                for j in 0..geom.kernel {
                    let pos = (o * geom.stride + j) as isize - geom.pad as isize;
                    if pos < 0 || pos as usize >= geom.len {
                        continue;
                    }
                    let src = xv.row(s * geom.len + pos as usize);
                    dst[j * c..(j + 1) * c].copy_from_slice(src);
                }
            }
        }
        let ng = self.needs_grad(x);
        self.push(out, Op::Unfold { x, geom }, ng)
    }

    /// Multi-head softmax self-attention. `qkv` packs queries, keys and values
    /// as `[rows × 3d]`; each span is attended independently.
    pub fn attention(&mut self, qkv: Var, heads: usize, seqs: &[Span]) -> Var {
        let qv = self.value(qkv);
        let d = qv.cols() / 3;
        assert_eq!(qv.cols(), 3 * d, "qkv width");
        assert_eq!(d % heads, 0, "heads must divide width");
        let dh = d / heads;
        let mut out = Tensor::zeros(qv.rows(), d);
        let mut probs = Vec::new();
        for &seq in seqs {
            probs.resize(seq.len * seq.len, 0.0);
            for h in 0..heads {
                fill_probs(qv.data(), d, dh, seq, h, &mut probs);
                let v = Mat::block(qv.data(), 3 * d, seq.start, seq.len, 2 * d + h * dh, dh);
                let dst = &mut out.data_mut()[seq.start * d + h * dh..];
                gemm(Mat::new(&probs, seq.len, seq.len), v, dst, d, 0.0);
            }
        }
        let ng = self.needs_grad(qkv);
        self.push(
            out,
            Op::Attention {
                qkv,
                heads,
                seqs: seqs.to_vec(),
            },
            ng,
        )
    }

    /// Row-wise blend toward a `1 × cols` token:
    /// `out[r] = (1 − w[r]) · x[r] + w[r] · token`.
    pub fn blend_rows(&mut self, x: Var, token: Var, weights: &[f64]) -> Var {
        let mut out = self.value(x).clone();
        assert_eq!(weights.len(), out.rows(), "blend weight count");
        let tok = self.value(token).data().to_vec();
        assert_eq!(tok.len(), out.cols(), "token width");
        for (r, &w) in weights.iter().enumerate() {
            if w != 0.0 {
                for (a, t) in out.row_mut(r).iter_mut().zip(&tok) {
                    *a = (1.0 - w) * *a + w * t;
                }
            }
        }
        let ng = self.any_grad(&[x, token]);
        self.push(
            out,
            Op::BlendRows {
                x,
                token,
                weights: weights.to_vec(),
            },
            ng,
        )
    }

    /// Replaces every row with `mask[row]` set by the token.
    pub fn replace_rows(&mut self, x: Var, token: Var, mask: &[bool]) -> Var {
        let weights: Vec<f64> = mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
        self.blend_rows(x, token, &weights)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows();
        let width: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Tensor::zeros(rows, width);
        let mut off = 0;
        for &p in parts {
            let pv = self.value(p);
            assert_eq!(pv.rows(), rows, "concat rows");
            let w = pv.cols();
            for r in 0..rows {
                out.row_mut(r)[off..off + w].copy_from_slice(pv.row(r));
            }
            off += w;
        }
        let ng = self.any_grad(parts);
        self.push(out, Op::ConcatCols(parts.to_vec()), ng)
    }

    /// Mean of the rows of each group.
    pub fn mean_rows(&mut self, x: Var, groups: &[Span]) -> Var {
        let xv = self.value(x);
        let mut out = Tensor::zeros(groups.len(), xv.cols());
        for (g, span) in groups.iter().enumerate() {
            let o = out.row_mut(g);
            for r in span.start..span.end() {
                for (a, b) in o.iter_mut().zip(xv.row(r)) {
                    *a += b;
                }
            }
            for a in o.iter_mut() {
                *a /= span.len as f64;
            }
        }
        let ng = self.needs_grad(x);
        self.push(
            out,
            Op::MeanRows {
                x,
                groups: groups.to_vec(),
            },
            ng,
        )
    }

    /// LSTM recurrence given precomputed input projections
    /// `xw = x · W_ih + b` (`[rows × 4h]`, gate order i, f, g, o).
    /// With `reverse`, each span is scanned from its last row to its first.
    pub fn lstm(&mut self, xw: Var, w_hh: Var, seqs: &[Span], reverse: bool) -> Var {
        let xv = self.value(xw);
        let whh = self.value(w_hh);
        let h = whh.rows();
        assert_eq!(whh.cols(), 4 * h, "recurrent weight shape");
        assert_eq!(xv.cols(), 4 * h, "input projection width");
        let rows = xv.rows();
        let mut out = Tensor::zeros(rows, h);
        let mut gates = vec![0.0; rows * 4 * h];
        let mut cells = vec![0.0; rows * h];
        let mut z = vec![0.0; 4 * h];
        for &seq in seqs {
            let mut prev: Option<usize> = None;
            for step in 0..seq.len {
                let t = if reverse {
                    seq.end() - 1 - step
                } else {
                    seq.start + step
                };
                z.copy_from_slice(xv.row(t));
                if let Some(p) = prev {
                    let hp = out.row(p);
                    for (k, &hv) in hp.iter().enumerate() {
                        let wrow = whh.row(k);
                        for (zz, w) in z.iter_mut().zip(wrow) {
                            *zz += hv * w;
                        }
                    }
                }
                let gt = &mut gates[t * 4 * h..(t + 1) * 4 * h];
                for j in 0..h {
                    gt[j] = sigmoid(z[j]);
                    gt[h + j] = sigmoid(z[h + j]);
                    gt[2 * h + j] = libm::tanh(z[2 * h + j]);
                    gt[3 * h + j] = sigmoid(z[3 * h + j]);
                }
                for j in 0..h {
                    let c_prev = prev.map_or(0.0, |p| cells[p * h + j]);
                    let c = gt[h + j] * c_prev + gt[j] * gt[2 * h + j];
                    cells[t * h + j] = c;
                    out.row_mut(t)[j] = gt[3 * h + j] * libm::tanh(c);
                }
                prev = Some(t);
            }
        }
        let ng = self.any_grad(&[xw, w_hh]);
        self.push(
            out,
            Op::Lstm {
                xw,
                w_hh,
                seqs: seqs.to_vec(),
                reverse,
                gates,
                cells,
            },
            ng,
        )
    }

    /// Attention pooling: per span, `softmax(scores) · x`.
    pub fn attn_pool(&mut self, x: Var, scores: Var, seqs: &[Span]) -> Var {
        let xv = self.value(x);
        let sv = self.value(scores);
        assert_eq!(sv.shape(), (xv.rows(), 1), "pool scores shape");
        let mut out = Tensor::zeros(seqs.len(), xv.cols());
        let mut probs = vec![0.0; xv.rows()];
        for (g, seq) in seqs.iter().enumerate() {
            let p = &mut probs[seq.start..seq.end()];
            p.copy_from_slice(&sv.data()[seq.start..seq.end()]);
            softmax_in_place(p);
            let o = out.row_mut(g);
            for (i, &w) in p.iter().enumerate() {
                for (a, b) in o.iter_mut().zip(xv.row(seq.start + i)) {
                    *a += w * b;
                }
            }
        }
        let ng = self.any_grad(&[x, scores]);
        self.push(
            out,
            Op::AttnPool {
                x,
                scores,
                seqs: seqs.to_vec(),
                probs,
            },
            ng,
        )
    }

    /// A scalar computed outside the tape together with its gradient with
    /// respect to `x`. Losses are attached this way.
    pub fn fused_scalar(&mut self, x: Var, value: f64, grad: Tensor) -> Var {
        assert_eq!(grad.shape(), self.value(x).shape(), "fused gradient shape");
        let ng = self.needs_grad(x);
        self.push(Tensor::scalar(value), Op::Fused { x, grad }, ng)
    }
}

pub(super) fn backward(
    graph: &Graph,
    op: &Op,
    out: &Tensor,
    dout: &Tensor,
    grads: &mut [Option<Tensor>],
) {
    match op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            let av = graph.value(*a);
            let bv = graph.value(*b);
            let (m, k) = av.shape();
            let n = bv.cols();
            let dm = Mat::new(dout.data(), m, n);
            if graph.needs_grad(*a) {
                let ga = grad_slot(graph, grads, *a);
                gemm(dm, Mat::new(bv.data(), k, n).t(), ga.data_mut(), k, 1.0);
            }
            if graph.needs_grad(*b) {
                let gb = grad_slot(graph, grads, *b);
                gemm(Mat::new(av.data(), m, k).t(), dm, gb.data_mut(), n, 1.0);
            }
        }
        Op::AddBias(x, b) => {
            if graph.needs_grad(*x) {
                grad_slot(graph, grads, *x).add_assign(dout);
            }
            if graph.needs_grad(*b) {
                let gb = grad_slot(graph, grads, *b);
                let cols = dout.cols();
                for row in dout.data().chunks(cols) {
                    for (g, d) in gb.data_mut().iter_mut().zip(row) {
                        *g += d;
                    }
                }
            }
        }
        Op::Add(a, b) => {
            for v in [*a, *b] {
                if graph.needs_grad(v) {
                    grad_slot(graph, grads, v).add_assign(dout);
                }
            }
        }
        Op::Scale(x, s) => {
            if graph.needs_grad(*x) {
                let g = grad_slot(graph, grads, *x);
                for (a, d) in g.data_mut().iter_mut().zip(dout.data()) {
                    *a += s * d;
                }
            }
        }
        Op::Gelu(x) => {
            if graph.needs_grad(*x) {
                let xv = graph.value(*x);
                let g = grad_slot(graph, grads, *x);
                for ((a, &d), &v) in g.data_mut().iter_mut().zip(dout.data()).zip(xv.data()) {
                    let t = libm::tanh(GELU_C * (v + GELU_A * v * v * v));
                    let dt = (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * v * v);
                    *a += d * (0.5 * (1.0 + t) + 0.5 * v * dt);
                }
            }
        }
        Op::LayerNorm {
            x,
            gamma,
            beta,
            xhat,
            rstd,
        } => {
            let (rows, cols) = dout.shape();
            let gv = graph.value(*gamma).data().to_vec();
            if graph.needs_grad(*gamma) {
                let gg = grad_slot(graph, grads, *gamma);
                for r in 0..rows {
                    let xh = &xhat[r * cols..(r + 1) * cols];
                    for ((a, d), h) in gg.data_mut().iter_mut().zip(dout.row(r)).zip(xh) {
                        *a += d * h;
                    }
                }
            }
            if graph.needs_grad(*beta) {
                let gb = grad_slot(graph, grads, *beta);
                for r in 0..rows {
                    for (a, d) in gb.data_mut().iter_mut().zip(dout.row(r)) {
                        *a += d;
                    }
                }
            }
            if graph.needs_grad(*x) {
                let gx = grad_slot(graph, grads, *x);
                let mut dxh = vec![0.0; cols];
                for r in 0..rows {
                    let xh = &xhat[r * cols..(r + 1) * cols];
                    let d = dout.row(r);
                    let mut mean_d = 0.0;
                    let mut mean_dx = 0.0;
                    for c in 0..cols {
                        dxh[c] = d[c] * gv[c];
                        mean_d += dxh[c];
                        mean_dx += dxh[c] * xh[c];
                    }
                    mean_d /= cols as f64;
                    mean_dx /= cols as f64;
                    let gr = gx.row_mut(r);
                    for c in 0..cols {
                        gr[c] += rstd[r] * (dxh[c] - mean_d - xh[c] * mean_dx);
                    }
                }
            }
        }
        Op::Unfold { x, geom } => {
            if graph.needs_grad(*x) {
                let gx = grad_slot(graph, grads, *x);
                let out_len = geom.out_len();
                let c = geom.channels;
                for s in 0..geom.count {
                    for o in 0..out_len {
                        let src = dout.row(s * out_len + o);
                        for j in 0..geom.kernel {
                            let pos = (o * geom.stride + j) as isize - geom.pad as isize;
                            if pos < 0 || pos as usize >= geom.len {
                                continue;
                            }
                            let dst = gx.row_mut(s * geom.len + pos as usize);
                            for (a, b) in dst.iter_mut().zip(&src[j * c..(j + 1) * c]) {
                                *a += b;
                            }
                        }
                    }
                }
            }
        }
        Op::Attention { qkv, heads, seqs } => {
            if !graph.needs_grad(*qkv) {
                return;
            }
            let qv = graph.value(*qkv);
            let d = qv.cols() / 3;
            let dh = d / heads;
            let ld = 3 * d;
            let scale = 1.0 / libm::sqrt(dh as f64);
            let mut gq = Tensor::zeros(qv.rows(), ld);
            let mut probs = Vec::new();
            let mut dp = Vec::new();
            for &seq in seqs {
                let l = seq.len;
                probs.resize(l * l, 0.0);
                dp.resize(l * l, 0.0);
                for h in 0..*heads {
                    fill_probs(qv.data(), d, dh, seq, h, &mut probs);
                    let d_o = Mat::block(dout.data(), d, seq.start, l, h * dh, dh);
                    let q = Mat::block(qv.data(), ld, seq.start, l, h * dh, dh);
                    let k = Mat::block(qv.data(), ld, seq.start, l, d + h * dh, dh);
                    let v = Mat::block(qv.data(), ld, seq.start, l, 2 * d + h * dh, dh);
                    // dV = Pᵀ dO
                    gemm(
                        Mat::new(&probs, l, l).t(),
                        d_o,
                        &mut gq.data_mut()[seq.start * ld + 2 * d + h * dh..],
                        ld,
                        1.0,
                    );
                    // dP = dO Vᵀ, then the softmax adjoint in place.
                    gemm(d_o, v.t(), &mut dp, l, 0.0);
                    for r in 0..l {
                        let pr = &probs[r * l..(r + 1) * l];
                        let dr = &mut dp[r * l..(r + 1) * l];
                        let dot: f64 = pr.iter().zip(dr.iter()).map(|(p, g)| p * g).sum();
                        for (g, p) in dr.iter_mut().zip(pr) {
                            *g = p * (*g - dot) * scale;
                        }
                    }
                    gemm(
                        Mat::new(&dp, l, l),
                        k,
                        &mut gq.data_mut()[seq.start * ld + h * dh..],
                        ld,
                        1.0,
                    );
                    gemm(
                        Mat::new(&dp, l, l).t(),
                        q,
                        &mut gq.data_mut()[seq.start * ld + d + h * dh..],
                        ld,
                        1.0,
                    );
                }
            }
            grad_slot(graph, grads, *qkv).add_assign(&gq);
        }
        Op::BlendRows { x, token, weights } => {
            if graph.needs_grad(*x) {
                let gx = grad_slot(graph, grads, *x);
                for (r, &w) in weights.iter().enumerate() {
                    for (a, d) in gx.row_mut(r).iter_mut().zip(dout.row(r)) {
                        *a += (1.0 - w) * d;
                    }
                }
            }
            if graph.needs_grad(*token) {
                let gt = grad_slot(graph, grads, *token);
                for (r, &w) in weights.iter().enumerate() {
                    if w != 0.0 {
                        for (a, d) in gt.data_mut().iter_mut().zip(dout.row(r)) {
                            *a += w * d;
                        }
                    }
                }
            }
        }
        Op::ConcatCols(parts) => {
            let mut off = 0;
            for &p in parts {
                let w = graph.value(p).cols();
                if graph.needs_grad(p) {
                    let gp = grad_slot(graph, grads, p);
                    for r in 0..dout.rows() {
                        for (a, d) in gp.row_mut(r).iter_mut().zip(&dout.row(r)[off..off + w]) {
                            *a += d;
                        }
                    }
                }
                off += w;
            }
        }
        Op::MeanRows { x, groups } => {
            if graph.needs_grad(*x) {
                let gx = grad_slot(graph, grads, *x);
                for (g, span) in groups.iter().enumerate() {
                    let inv = 1.0 / span.len as f64;
                    for r in span.start..span.end() {
                        for (a, d) in gx.row_mut(r).iter_mut().zip(dout.row(g)) {
                            *a += d * inv;
                        }
                    }
                }
            }
        }
        Op::Lstm {
            xw,
            w_hh,
            seqs,
            reverse,
            gates,
            cells,
        } => lstm_backward(
            graph, grads, out, dout, *xw, *w_hh, seqs, *reverse, gates, cells,
        ),
        Op::AttnPool {
            x,
            scores,
            seqs,
            probs,
        } => {
            let xv = graph.value(*x);
            if graph.needs_grad(*x) {
                let gx = grad_slot(graph, grads, *x);
                for (g, seq) in seqs.iter().enumerate() {
                    for r in seq.start..seq.end() {
                        let p = probs[r];
                        for (a, d) in gx.row_mut(r).iter_mut().zip(dout.row(g)) {
                            *a += p * d;
                        }
                    }
                }
            }
            if graph.needs_grad(*scores) {
                let gs = grad_slot(graph, grads, *scores);
                for (g, seq) in seqs.iter().enumerate() {
                    let dg = dout.row(g);
                    let dps: Vec<f64> = (seq.start..seq.end())
                        .map(|r| xv.row(r).iter().zip(dg).map(|(a, b)| a * b).sum())
                        .collect();
                    let mean: f64 = dps
                        .iter()
                        .zip(&probs[seq.start..seq.end()])
                        .map(|(d, p)| d * p)
                        .sum();
                    for (i, r) in (seq.start..seq.end()).enumerate() {
                        gs.data_mut()[r] += probs[r] * (dps[i] - mean);
                    }
                }
            }
        }
        Op::Fused { x, grad } => {
            if graph.needs_grad(*x) {
                let up = dout.item();
                let gx = grad_slot(graph, grads, *x);
                for (a, g) in gx.data_mut().iter_mut().zip(grad.data()) {
                    *a += up * g;
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn lstm_backward(
    graph: &Graph,
    grads: &mut [Option<Tensor>],
    out: &Tensor,
    dout: &Tensor,
    xw: Var,
    w_hh: Var,
    seqs: &[Span],
    reverse: bool,
    gates: &[f64],
    cells: &[f64],
) {
    let whh = graph.value(w_hh);
    let h = whh.rows();
    let rows = out.rows();
    let mut dz_all = Tensor::zeros(rows, 4 * h);
    let mut dw = Tensor::zeros(h, 4 * h);
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    for &seq in seqs {
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        dc_next.iter_mut().for_each(|v| *v = 0.0);
        // Walk the scan order backwards.
        for step in (0..seq.len).rev() {
            let t = if reverse {
                seq.end() - 1 - step
            } else {
                seq.start + step
            };
            let prev = if step == 0 {
                None
            } else if reverse {
                Some(t + 1)
            } else {
                Some(t - 1)
            };
            let gt = &gates[t * 4 * h..(t + 1) * 4 * h];
            let dz = dz_all.row_mut(t);
            for j in 0..h {
                let (i, f, g, o) = (gt[j], gt[h + j], gt[2 * h + j], gt[3 * h + j]);
                let c = cells[t * h + j];
                let tc = libm::tanh(c);
                let dh = dout.get(t, j) + dh_next[j];
                let dc = dh * o * (1.0 - tc * tc) + dc_next[j];
                let c_prev = prev.map_or(0.0, |p| cells[p * h + j]);
                dz[j] = dc * g * i * (1.0 - i);
                dz[h + j] = dc * c_prev * f * (1.0 - f);
                dz[2 * h + j] = dc * i * (1.0 - g * g);
                dz[3 * h + j] = dh * tc * o * (1.0 - o);
                dc_next[j] = dc * f;
            }
            match prev {
                Some(p) => {
                    let hp = out.row(p);
                    for k in 0..h {
                        let wrow = whh.row(k);
                        dh_next[k] = wrow.iter().zip(dz.iter()).map(|(w, z)| w * z).sum();
                        let dwr = dw.row_mut(k);
                        for (a, z) in dwr.iter_mut().zip(dz.iter()) {
                            *a += hp[k] * z;
                        }
                    }
                }
                None => dh_next.iter_mut().for_each(|v| *v = 0.0),
            }
        }
    }
    if graph.needs_grad(xw) {
        grad_slot(graph, grads, xw).add_assign(&dz_all);
    }
    if graph.needs_grad(w_hh) {
        grad_slot(graph, grads, w_hh).add_assign(&dw);
    }
}
