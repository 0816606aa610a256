use super::kernels::{self, ConvGeom};
use super::Tensor;
use crate::error::{contract_err, dim_err, Error, Result};

/// Handle to a node on a [`Graph`] tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    ChannelBias(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    Exp(Var),
    Log(Var),
    Square(Var),
    Scale(Var, f32),
    AddScalar(Var),
    Sum(Var),
    Mean(Var),
    SumLast(Var),
    Reshape(Var),
    Concat(Vec<Var>),
    Narrow {
        src: Var,
        start: usize,
    },
    Upsample2x(Var),
    MatMul(Var, Var),
    Conv2d {
        input: Var,
        kernel: Var,
        stride: usize,
        pad: usize,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    grad: Option<Tensor>,
}

/// Output length of a cross-correlation along one axis, or `None` when the
/// window does not fit.
pub fn conv_output_len(len: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = len + 2 * pad;
    if stride == 0 || kernel == 0 || kernel > padded {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

/// A dynamic tape of tensor operations supporting reverse-mode differentiation.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// How the smaller operand of a binary op is laid over the larger one.
#[derive(Clone, Copy)]
enum Bcast {
    Same,
    /// Right operand repeats every `period` elements of the left.
    Right(usize),
    /// Left operand repeats.
    Left(usize),
}

fn is_suffix(short: &[usize], long: &[usize]) -> bool {
    short.len() <= long.len() && long[long.len() - short.len()..] == *short
}

fn broadcast_rule(a: &Tensor, b: &Tensor, op: &str) -> Result<Bcast> {
    if a.shape() == b.shape() {
        Ok(Bcast::Same)
    } else if b.numel() == 1 || is_suffix(b.shape(), a.shape()) {
        Ok(Bcast::Right(b.numel()))
    } else if a.numel() == 1 || is_suffix(a.shape(), b.shape()) {
        Ok(Bcast::Left(a.numel()))
    } else {
        dim_err(format!(
            "{op}: shapes {:?} and {:?} are not trailing-compatible",
            a.shape(),
            b.shape()
        ))
    }
}

fn zip_bcast(a: &Tensor, b: &Tensor, rule: Bcast, f: impl Fn(f32, f32) -> f32) -> Tensor {
    let (shape, data) = match rule {
        Bcast::Same => (
            a.shape(),
            a.data().iter().zip(b.data()).map(|(x, y)| f(*x, *y)).collect(),
        ),
        Bcast::Right(p) => (
            a.shape(),
            a.data()
                .iter()
                .enumerate()
                .map(|(i, x)| f(*x, b.data()[i % p]))
                .collect(),
        ),
        Bcast::Left(p) => (
            b.shape(),
            b.data()
                .iter()
                .enumerate()
                .map(|(i, y)| f(a.data()[i % p], *y))
                .collect(),
        ),
    };
    Tensor::new(shape, data).expect("broadcast shape")
}

/// Sums a full-size gradient down to an operand repeating with `period`.
fn reduce_to_period(g: &[f32], period: usize) -> Vec<f32> {
    let mut acc = vec![0f64; period];
    for (i, v) in g.iter().enumerate() {
        acc[i % period] += *v as f64;
    }
    acc.into_iter().map(|v| v as f32).collect()
}

fn sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// A leaf whose gradient is populated by [`Graph::backward`].
    pub fn param(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    /// Gradient of the last backward pass with respect to `v`, if `v` was reachable.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    fn binary(&mut self, a: Var, b: Var, name: &str, f: impl Fn(f32, f32) -> f32, op: Op) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let rule = broadcast_rule(ta, tb, name)?;
        let out = zip_bcast(ta, tb, rule, f);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, op, rg))
    }

    /// Elementwise sum; the smaller operand may broadcast over trailing dimensions.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    /// Adds a per-channel bias `[C]` to an `N x C x H x W` tensor.
    pub fn add_channel_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (tx, tb) = (self.value(x), self.value(bias));
        if tx.rank() != 4 || tb.rank() != 1 || tb.numel() != tx.shape()[1] {
            return dim_err(format!(
                "add_channel_bias: input {:?} and bias {:?}",
                tx.shape(),
                tb.shape()
            ));
        }
        let plane = tx.shape()[2] * tx.shape()[3];
        let c = tx.shape()[1];
        let data = tx
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| v + tb.data()[(i / plane) % c])
            .collect();
        let out = Tensor::new(tx.shape(), data)?;
        let rg = self.rg(x) || self.rg(bias);
        Ok(self.push(out, Op::ChannelBias(x, bias), rg))
    }

    fn unary(&mut self, x: Var, f: impl Fn(f32) -> f32, op: Op) -> Var {
        let t = self.value(x);
        let out = Tensor::new(t.shape(), t.data().iter().map(|v| f(*v)).collect()).expect("unary shape");
        let rg = self.rg(x);
        self.push(out, op, rg)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, |v| v.max(0.0), Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, sigmoid, Op::Sigmoid(x))
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(x, f32::exp, Op::Exp(x))
    }

    pub fn log(&mut self, x: Var) -> Result<Var> {
        if let Some(bad) = self.value(x).data().iter().find(|v| v.is_nan() || **v <= 0.0) {
            return Err(Error::Domain(format!("log of non-positive value {bad}")));
        }
        Ok(self.unary(x, f32::ln, Op::Log(x)))
    }

    pub fn square(&mut self, x: Var) -> Var {
        self.unary(x, |v| v * v, Op::Square(x))
    }

    /// Multiplies every element by a constant.
    pub fn scale(&mut self, x: Var, c: f32) -> Var {
        self.unary(x, move |v| v * c, Op::Scale(x, c))
    }

    pub fn add_scalar(&mut self, x: Var, c: f32) -> Var {
        self.unary(x, move |v| v + c, Op::AddScalar(x))
    }

    /// Sum of all elements as a `[1]` tensor (accumulated in `f64`).
    pub fn sum(&mut self, x: Var) -> Var {
        let s: f64 = self.value(x).data().iter().map(|v| *v as f64).sum();
        let rg = self.rg(x);
        self.push(Tensor::scalar(s as f32), Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let s: f64 = t.data().iter().map(|v| *v as f64).sum();
        let m = s / t.numel() as f64;
        let rg = self.rg(x);
        self.push(Tensor::scalar(m as f32), Op::Mean(x), rg)
    }

    /// Sums over the last axis: `[.., D] -> [..]` (a rank-1 input yields `[1]`).
    pub fn sum_last(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let d = *t.shape().last().unwrap();
        let data: Vec<f32> = t
            .data()
            .chunks(d)
            .map(|row| row.iter().map(|v| *v as f64).sum::<f64>() as f32)
            .collect();
        let shape = if t.rank() == 1 {
            vec![1]
        } else {
            t.shape()[..t.rank() - 1].to_vec()
        };
        let out = Tensor::new(&shape, data).expect("sum_last shape");
        let rg = self.rg(x);
        self.push(out, Op::SumLast(x), rg)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(x).clone().reshape(shape)?;
        let rg = self.rg(x);
        Ok(self.push(out, Op::Reshape(x), rg))
    }

    /// Concatenates along the leading axis.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return dim_err("concat of zero tensors");
        };
        let tail = self.shape(first)[1..].to_vec();
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let t = self.value(p);
            if t.shape()[1..] != tail[..] {
                return dim_err(format!(
                    "concat: shape {:?} incompatible with trailing {:?}",
                    t.shape(),
                    tail
                ));
            }
            rows += t.shape()[0];
            data.extend_from_slice(t.data());
        }
        let mut shape = vec![rows];
        shape.extend_from_slice(&tail);
        let out = Tensor::new(&shape, data)?;
        let rg = parts.iter().any(|p| self.rg(*p));
        Ok(self.push(out, Op::Concat(parts.to_vec()), rg))
    }

    /// Rows `start..start + len` of the leading axis.
    pub fn narrow(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let t = self.value(x);
        let n = t.shape()[0];
        if len == 0 || start + len > n {
            return dim_err(format!("narrow {start}..{} of leading axis {n}", start + len));
        }
        let width = t.numel() / n;
        let data = t.data()[start * width..(start + len) * width].to_vec();
        let mut shape = t.shape().to_vec();
        shape[0] = len;
        let out = Tensor::new(&shape, data)?;
        let rg = self.rg(x);
        Ok(self.push(out, Op::Narrow { src: x, start }, rg))
    }

    /// Nearest-neighbour x2 upsampling of an `N x C x H x W` tensor.
    pub fn upsample2x(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        if t.rank() != 4 {
            return dim_err(format!("upsample2x expects NCHW, got {:?}", t.shape()));
        }
        let s = t.shape();
        let (planes, h, w) = (s[0] * s[1], s[2], s[3]);
        let out = Tensor::new(&[s[0], s[1], 2 * h, 2 * w], kernels::upsample2x(t.data(), planes, h, w))?;
        let rg = self.rg(x);
        Ok(self.push(out, Op::Upsample2x(x), rg))
    }

    /// Matrix product of `m x k` and `k x n` operands.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rank() != 2 || tb.rank() != 2 || ta.shape()[1] != tb.shape()[0] {
            return dim_err(format!(
                "matmul: shapes {:?} and {:?} do not agree",
                ta.shape(),
                tb.shape()
            ));
        }
        let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
        let mut out = vec![0.0; m * n];
        kernels::gemm(m, k, n, ta.data(), false, tb.data(), false, &mut out, false);
        let out = Tensor::new(&[m, n], out)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    fn conv_geom(&self, input: Var, kernel: Var, stride: usize, pad: usize) -> Result<(usize, usize, ConvGeom)> {
        let (ti, tk) = (self.value(input), self.value(kernel));
        if ti.rank() != 4 || tk.rank() != 4 || ti.shape()[1] != tk.shape()[1] {
            return dim_err(format!(
                "conv2d: input {:?} and kernel {:?} are incompatible",
                ti.shape(),
                tk.shape()
            ));
        }
        let (n, c, h, w) = (ti.shape()[0], ti.shape()[1], ti.shape()[2], ti.shape()[3]);
        let (f, kh, kw) = (tk.shape()[0], tk.shape()[2], tk.shape()[3]);
        let (Some(out_h), Some(out_w)) = (conv_output_len(h, kh, stride, pad), conv_output_len(w, kw, stride, pad))
        else {
            return dim_err(format!(
                "conv2d: non-positive output for input {h}x{w}, kernel {kh}x{kw}, stride {stride}, pad {pad}"
            ));
        };
        Ok((
            n,
            f,
            ConvGeom {
                channels: c,
                height: h,
                width: w,
                kh,
                kw,
                stride,
                pad,
                out_h,
                out_w,
            },
        ))
    }

    /// 2-D cross-correlation of `N x C x H x W` input with an `F x C x kh x kw` kernel.
    pub fn conv2d(&mut self, input: Var, kernel: Var, stride: usize, pad: usize) -> Result<Var> {
        let (n, f, g) = self.conv_geom(input, kernel, stride, pad)?;
        let (ti, tk) = (self.value(input), self.value(kernel));
        let in_len = g.channels * g.height * g.width;
        let ohw = g.col_cols();
        let mut cols = vec![0.0; g.col_rows() * ohw];
        let mut out = vec![0.0; n * f * ohw];
        for (img, dst) in ti.data().chunks(in_len).zip(out.chunks_mut(f * ohw)) {
            kernels::im2col(img, &g, &mut cols);
            kernels::gemm(f, g.col_rows(), ohw, tk.data(), false, &cols, false, dst, false);
        }
        let out = Tensor::new(&[n, f, g.out_h, g.out_w], out)?;
        let rg = self.rg(input) || self.rg(kernel);
        Ok(self.push(
            out,
            Op::Conv2d {
                input,
                kernel,
                stride,
                pad,
            },
            rg,
        ))
    }

    /// Populates gradients of the scalar `loss` on every reachable node that
    /// requires one. Gradients from multiple uses accumulate additively.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).numel() != 1 {
            return contract_err(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            ));
        }
        let mut grads: Vec<Option<Vec<f32>>> = vec![None; loss.0 + 1];
        for node in &mut self.nodes {
            node.grad = None;
        }
        if !self.rg(loss) {
            return Ok(());
        }
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(i, &g, &mut grads)?;
            let shape = self.nodes[i].value.shape().to_vec();
            self.nodes[i].grad = Some(Tensor::new(&shape, g)?);
        }
        Ok(())
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f32>>], v: Var, contribution: Vec<f32>) {
        if !self.rg(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => {
                for (e, c) in existing.iter_mut().zip(contribution) {
                    *e += c;
                }
            }
            slot @ None => *slot = Some(contribution),
        }
    }

    fn backprop_binary(
        &self,
        a: Var,
        b: Var,
        g: &[f32],
        grads: &mut [Option<Vec<f32>>],
        da: impl Fn(f32, f32) -> f32,
        db: impl Fn(f32, f32) -> f32,
    ) -> Result<()> {
        let (ta, tb) = (self.value(a), self.value(b));
        let rule = broadcast_rule(ta, tb, "backward")?;
        let (pa, pb) = match rule {
            Bcast::Same => (ta.numel(), tb.numel()),
            Bcast::Right(p) => (ta.numel(), p),
            Bcast::Left(p) => (p, tb.numel()),
        };
        let full = g.len();
        let av = |i: usize| ta.data()[i % pa];
        let bv = |i: usize| tb.data()[i % pb];
        if self.rg(a) {
            let ga: Vec<f32> = (0..full).map(|i| g[i] * da(av(i), bv(i))).collect();
            let ga = if pa == full { ga } else { reduce_to_period(&ga, pa) };
            self.accumulate(grads, a, ga);
        }
        if self.rg(b) {
            let gb: Vec<f32> = (0..full).map(|i| g[i] * db(av(i), bv(i))).collect();
            let gb = if pb == full { gb } else { reduce_to_period(&gb, pb) };
            self.accumulate(grads, b, gb);
        }
        Ok(())
    }

    fn backprop_node(&self, i: usize, g: &[f32], grads: &mut [Option<Vec<f32>>]) -> Result<()> {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => self.backprop_binary(*a, *b, g, grads, |_, _| 1.0, |_, _| 1.0)?,
            Op::Sub(a, b) => self.backprop_binary(*a, *b, g, grads, |_, _| 1.0, |_, _| -1.0)?,
            Op::Mul(a, b) => self.backprop_binary(*a, *b, g, grads, |_, y| y, |x, _| x)?,
            Op::ChannelBias(x, bias) => {
                self.accumulate(grads, *x, g.to_vec());
                if self.rg(*bias) {
                    let s = self.shape(*x);
                    let (c, plane) = (s[1], s[2] * s[3]);
                    let mut gb = vec![0f64; c];
                    for (j, chunk) in g.chunks(plane).enumerate() {
                        gb[j % c] += chunk.iter().map(|v| *v as f64).sum::<f64>();
                    }
                    self.accumulate(grads, *bias, gb.into_iter().map(|v| v as f32).collect());
                }
            }
            Op::Relu(x) => {
                let xv = self.value(*x).data();
                let gx = g.iter().zip(xv).map(|(g, x)| if *x > 0.0 { *g } else { 0.0 }).collect();
                self.accumulate(grads, *x, gx);
            }
            Op::Sigmoid(x) => {
                let y = node.value.data();
                let gx = g.iter().zip(y).map(|(g, y)| g * y * (1.0 - y)).collect();
                self.accumulate(grads, *x, gx);
            }
            Op::Exp(x) => {
                let y = node.value.data();
                let gx = g.iter().zip(y).map(|(g, y)| g * y).collect();
                self.accumulate(grads, *x, gx);
            }
            Op::Log(x) => {
                let xv = self.value(*x).data();
                let gx = g.iter().zip(xv).map(|(g, x)| g / x).collect();
                self.accumulate(grads, *x, gx);
            }
            Op::Square(x) => {
                let xv = self.value(*x).data();
                let gx = g.iter().zip(xv).map(|(g, x)| 2.0 * g * x).collect();
                self.accumulate(grads, *x, gx);
            }
            Op::Scale(x, c) => {
                self.accumulate(grads, *x, g.iter().map(|v| v * c).collect());
            }
            Op::AddScalar(x) | Op::Reshape(x) => self.accumulate(grads, *x, g.to_vec()),
            Op::Sum(x) => {
                let n = self.value(*x).numel();
                self.accumulate(grads, *x, vec![g[0]; n]);
            }
            Op::Mean(x) => {
                let n = self.value(*x).numel();
                self.accumulate(grads, *x, vec![g[0] / n as f32; n]);
            }
            Op::SumLast(x) => {
                let t = self.value(*x);
                let d = *t.shape().last().unwrap();
                let gx = (0..t.numel()).map(|j| g[j / d]).collect();
                self.accumulate(grads, *x, gx);
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for p in parts {
                    let n = self.value(*p).numel();
                    self.accumulate(grads, *p, g[offset..offset + n].to_vec());
                    offset += n;
                }
            }
            Op::Narrow { src, start } => {
                let t = self.value(*src);
                let width = t.numel() / t.shape()[0];
                let mut gx = vec![0.0; t.numel()];
                gx[start * width..start * width + g.len()].copy_from_slice(g);
                self.accumulate(grads, *src, gx);
            }
            Op::Upsample2x(x) => {
                let s = self.shape(*x);
                let gx = kernels::upsample2x_backward(g, s[0] * s[1], s[2], s[3]);
                self.accumulate(grads, *x, gx);
            }
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                if self.rg(*a) {
                    let mut ga = vec![0.0; m * k];
                    kernels::gemm(m, n, k, g, false, tb.data(), true, &mut ga, false);
                    self.accumulate(grads, *a, ga);
                }
                if self.rg(*b) {
                    let mut gb = vec![0.0; k * n];
                    kernels::gemm(k, m, n, ta.data(), true, g, false, &mut gb, false);
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::Conv2d {
                input,
                kernel,
                stride,
                pad,
            } => {
                let (n, f, geom) = self.conv_geom(*input, *kernel, *stride, *pad)?;
                let (ti, tk) = (self.value(*input), self.value(*kernel));
                let (want_x, want_k) = (self.rg(*input), self.rg(*kernel));
                let in_len = geom.channels * geom.height * geom.width;
                let (rows, ohw) = (geom.col_rows(), geom.col_cols());
                let mut cols = vec![0.0; rows * ohw];
                let mut dcols = vec![0.0; rows * ohw];
                let mut gk = if want_k { vec![0.0; tk.numel()] } else { Vec::new() };
                let mut gx = if want_x { vec![0.0; ti.numel()] } else { Vec::new() };
                for img in 0..n {
                    let dout = &g[img * f * ohw..(img + 1) * f * ohw];
                    if want_k {
                        kernels::im2col(&ti.data()[img * in_len..(img + 1) * in_len], &geom, &mut cols);
                        kernels::gemm(f, ohw, rows, dout, false, &cols, true, &mut gk, true);
                    }
                    if want_x {
                        kernels::gemm(rows, f, ohw, tk.data(), true, dout, false, &mut dcols, false);
                        kernels::col2im_add(&dcols, &geom, &mut gx[img * in_len..(img + 1) * in_len]);
                    }
                }
                if want_k {
                    self.accumulate(grads, *kernel, gk);
                }
                if want_x {
                    self.accumulate(grads, *input, gx);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f32]) -> Tensor {
        Tensor::new(shape, data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_examples() {
        let mut g = Graph::new();
        let eye = g.constant(t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]));
        let b = g.constant(t(&[2, 2], &[3.0, 4.0, 5.0, 6.0]));
        let c = g.matmul(eye, b).unwrap();
        assert_eq!(g.value(c).data(), &[3.0, 4.0, 5.0, 6.0]);

        let a = g.constant(t(&[1, 2], &[1.0, 2.0]));
        let b = g.constant(t(&[2, 1], &[3.0, 4.0]));
        let c = g.matmul(a, b).unwrap();
        assert_eq!(g.value(c).data(), &[11.0]);

        let z = g.constant(Tensor::zeros(&[3, 3]));
        let b = g.constant(t(&[3, 3], &[1.0, -2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]));
        let c = g.matmul(z, b).unwrap();
        assert!(g.value(c).data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::zeros(&[2, 3]));
        let b = g.constant(Tensor::zeros(&[2, 3]));
        let err = g.matmul(a, b).unwrap_err().to_string();
        assert!(err.contains("[2, 3]") && err.contains("dimension"), "{err}");
    }

    #[test]
    fn conv2d_examples() {
        let mut g = Graph::new();
        let img: Vec<f32> = (0..16).map(|i| i as f32).collect();
        let x = g.constant(t(&[1, 1, 4, 4], &img));
        let k = g.constant(t(&[1, 1, 1, 1], &[1.0]));
        let y = g.conv2d(x, k, 1, 0).unwrap();
        assert_eq!(g.value(y).data(), &img[..]);

        let x = g.constant(Tensor::ones(&[1, 1, 3, 3]));
        let k = g.constant(Tensor::ones(&[1, 1, 3, 3]));
        let y = g.conv2d(x, k, 1, 0).unwrap();
        assert_eq!(g.value(y).shape(), &[1, 1, 1, 1]);
        assert_eq!(g.value(y).item(), 9.0);

        let x = g.constant(Tensor::zeros(&[1, 3, 64, 64]));
        let k = g.constant(Tensor::zeros(&[8, 3, 4, 4]));
        let y = g.conv2d(x, k, 2, 1).unwrap();
        assert_eq!(g.shape(y), &[1, 8, 32, 32]);
    }

    #[test]
    fn conv2d_rejects_oversized_kernel() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::zeros(&[1, 1, 2, 2]));
        let k = g.constant(Tensor::zeros(&[1, 1, 5, 5]));
        assert!(matches!(g.conv2d(x, k, 1, 0), Err(Error::Dimension(_))));
    }

    #[test]
    fn primitive_examples() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::vector(&[-1.0, 0.0, 2.0]));
        let r = g.relu(x);
        assert_eq!(g.value(r).data(), &[0.0, 0.0, 2.0]);

        let x = g.constant(Tensor::vector(&[1.0, 2.0, 3.0, 6.0]));
        let m = g.mean(x);
        assert_eq!(g.value(m).item(), 3.0);

        let x = g.constant(Tensor::scalar(0.0));
        let s = g.sigmoid(x);
        assert_eq!(g.value(s).item(), 0.5);
    }

    #[test]
    fn log_rejects_non_positive() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::vector(&[1.0, 0.0]));
        assert!(matches!(g.log(x), Err(Error::Domain(_))));
    }

    #[test]
    fn incompatible_broadcast_is_dimension_error() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::zeros(&[2, 3]));
        let b = g.constant(Tensor::zeros(&[2]));
        assert!(matches!(g.add(a, b), Err(Error::Dimension(_))));
        let c = g.constant(Tensor::zeros(&[3]));
        let sum = g.add(a, c).unwrap();
        assert_eq!(g.shape(sum), &[2, 3]);
    }

    #[test]
    fn backward_examples() {
        let mut g = Graph::new();
        let x = g.param(Tensor::zeros(&[2, 3]));
        let s = g.sum(x);
        g.backward(s).unwrap();
        assert!(g.grad(x).unwrap().data().iter().all(|v| *v == 1.0));

        let mut g = Graph::new();
        let x = g.param(Tensor::vector(&[1.0, -2.0]));
        let sq = g.square(x);
        let s = g.sum(sq);
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[2.0, -4.0]);
    }

    #[test]
    fn reused_tensor_accumulates() {
        let mut g = Graph::new();
        let x = g.param(Tensor::vector(&[3.0]));
        let y = g.mul(x, x).unwrap();
        let z = g.add(y, x).unwrap();
        let s = g.sum(z);
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[7.0]);
    }

    #[test]
    fn non_scalar_backward_is_contract_error() {
        let mut g = Graph::new();
        let x = g.param(Tensor::zeros(&[2]));
        assert!(matches!(g.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut g = Graph::new();
        let w = g.constant(Tensor::ones(&[2, 2]));
        let x = g.param(Tensor::ones(&[1, 2]));
        let y = g.matmul(x, w).unwrap();
        let s = g.sum(y);
        g.backward(s).unwrap();
        assert!(g.grad(w).is_none());
        assert_eq!(g.grad(x).unwrap().data(), &[2.0, 2.0]);
    }
}
