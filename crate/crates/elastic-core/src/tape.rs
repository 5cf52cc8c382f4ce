//! Reverse-mode automatic differentiation over batched matrix values.
//!
//! A [`GradTape`] records a forward computation as a flat list of primitive
//! ops whose values are `[rows x cols]` row-major matrices (rows = batch).
//! `backward` walks the list once in reverse and accumulates adjoints, both
//! for intermediate values and for network parameters registered on the tape.
//!
//! Networks are registered per tape ([`GradTape::register_params`]) with a
//! snapshot of their weights; an `Affine` op references a layer of a
//! registered net. Marking a registration non-trainable skips its weight
//! adjoints but still propagates gradients through it, which is exactly what
//! a policy update flowing through frozen critics needs.
//!
//! The inner accumulation order of every op matches [`DenseNet::forward`], so
//! a tape forward pass is bit-identical to the plain one.

use alloc::vec;
use alloc::vec::Vec;

use crate::net::{Activation, DenseNet, LayerSpec};

/// Row-major matrix buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix shape");
        Mat { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamsId(usize);

#[derive(Clone, Debug)]
enum Op {
    /// Leaf holding externally supplied values; no inputs.
    Input,
    /// `y = x * W^T + b` against layer `layer` of registration `params`.
    Affine { params: usize, layer: usize, x: NodeId },
    Tanh { x: NodeId },
    Relu { x: NodeId },
    Exp { x: NodeId },
    Ln { x: NodeId },
    Square { x: NodeId },
    Neg { x: NodeId },
    Scale { x: NodeId, c: f64 },
    AddConst { x: NodeId },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    /// Elementwise minimum; ties route the gradient to `a`.
    Min { a: NodeId, b: NodeId },
    /// Pass-through gradient inside `[lo, hi]` (inclusive), zero outside.
    Clamp { x: NodeId, lo: f64, hi: f64 },
    /// `ln(1 - tanh(x)^2)`, the stable tanh change-of-variables term.
    LnOneMinusTanhSq { x: NodeId },
    ColSlice { x: NodeId, from: usize, to: usize },
    ColConcat { parts: Vec<NodeId> },
    /// Row-wise sum: `[r x c] -> [r x 1]`.
    SumCols { x: NodeId },
    /// Mean over all elements: `[r x c] -> [1 x 1]`.
    MeanAll { x: NodeId },
}

struct Node {
    op: Op,
    value: Mat,
}

struct Registration {
    specs: Vec<LayerSpec>,
    weights: Vec<f64>,
    trainable: bool,
}

/// Adjoints produced by one `backward` call.
pub struct Gradients {
    node: Vec<Mat>,
    params: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn node(&self, id: NodeId) -> &Mat {
        &self.node[id.0]
    }

    /// Flat parameter gradient aligned with `DenseNet::weights`. Empty for
    /// non-trainable registrations.
    pub fn params(&self, id: ParamsId) -> &[f64] {
        &self.params[id.0]
    }
}

#[derive(Default)]
pub struct GradTape {
    nodes: Vec<Node>,
    regs: Vec<Registration>,
}

impl GradTape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&self, id: NodeId) -> &Mat {
        &self.nodes[id.0].value
    }

    /// Scalar convenience for `[1 x 1]` nodes.
    pub fn scalar(&self, id: NodeId) -> f64 {
        let m = self.value(id);
        assert_eq!((m.rows, m.cols), (1, 1), "not a scalar node");
        m.data[0]
    }

    pub fn register_params(&mut self, net: &DenseNet, trainable: bool) -> ParamsId {
        self.regs.push(Registration {
            specs: net.specs().to_vec(),
            weights: net.weights().to_vec(),
            trainable,
        });
        ParamsId(self.regs.len() - 1)
    }

    fn push(&mut self, op: Op, value: Mat) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    pub fn input(&mut self, rows: usize, cols: usize, data: Vec<f64>) -> NodeId {
        self.push(Op::Input, Mat::new(rows, cols, data))
    }

    pub fn affine(&mut self, params: ParamsId, layer: usize, x: NodeId) -> NodeId {
        let reg = &self.regs[params.0];
        let spec = reg.specs[layer];
        let xm = self.value(x);
        assert_eq!(xm.cols, spec.fan_in, "affine input width");
        let offset: usize =
            reg.specs[..layer].iter().map(|s| (s.fan_in + 1) * s.fan_out).sum();
        let w = &reg.weights[offset..offset + spec.fan_in * spec.fan_out];
        let b = &reg.weights
            [offset + spec.fan_in * spec.fan_out..offset + (spec.fan_in + 1) * spec.fan_out];
        let mut out = Mat::zeros(xm.rows, spec.fan_out);
        for r in 0..xm.rows {
            let xrow = &xm.data[r * spec.fan_in..(r + 1) * spec.fan_in];
            let orow = &mut out.data[r * spec.fan_out..(r + 1) * spec.fan_out];
            for o in 0..spec.fan_out {
                let wrow = &w[o * spec.fan_in..(o + 1) * spec.fan_in];
                let mut acc = b[o];
                for k in 0..spec.fan_in {
                    acc += wrow[k] * xrow[k];
                }
                orow[o] = acc;
            }
        }
        self.push(Op::Affine { params: params.0, layer, x }, out)
    }

    fn unary<F: Fn(f64) -> f64>(&mut self, x: NodeId, f: F, op: Op) -> NodeId {
        let xm = self.value(x);
        let value = Mat::new(xm.rows, xm.cols, xm.data.iter().map(|&v| f(v)).collect());
        self.push(op, value)
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        self.unary(x, crate::math::tanh, Op::Tanh { x })
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        self.unary(x, |v| if v > 0.0 { v } else { 0.0 }, Op::Relu { x })
    }

    pub fn exp(&mut self, x: NodeId) -> NodeId {
        self.unary(x, crate::math::exp, Op::Exp { x })
    }

    pub fn ln(&mut self, x: NodeId) -> NodeId {
        self.unary(x, crate::math::ln, Op::Ln { x })
    }

    pub fn square(&mut self, x: NodeId) -> NodeId {
        self.unary(x, |v| v * v, Op::Square { x })
    }

    pub fn neg(&mut self, x: NodeId) -> NodeId {
        self.unary(x, |v| -v, Op::Neg { x })
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        self.unary(x, |v| c * v, Op::Scale { x, c })
    }

    pub fn add_const(&mut self, x: NodeId, c: f64) -> NodeId {
        self.unary(x, |v| v + c, Op::AddConst { x })
    }

    pub fn clamp(&mut self, x: NodeId, lo: f64, hi: f64) -> NodeId {
        self.unary(x, |v| v.clamp(lo, hi), Op::Clamp { x, lo, hi })
    }

    pub fn ln_one_minus_tanh_sq(&mut self, x: NodeId) -> NodeId {
        self.unary(x, crate::math::ln_one_minus_tanh_sq, Op::LnOneMinusTanhSq { x })
    }

    fn binary<F: Fn(f64, f64) -> f64>(&mut self, a: NodeId, b: NodeId, f: F, op: Op) -> NodeId {
        let (am, bm) = (self.value(a), self.value(b));
        assert_eq!((am.rows, am.cols), (bm.rows, bm.cols), "binary op shape");
        let data = am.data.iter().zip(bm.data.iter()).map(|(&x, &y)| f(x, y)).collect();
        let value = Mat::new(am.rows, am.cols, data);
        self.push(op, value)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(a, b, |x, y| x + y, Op::Add { a, b })
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(a, b, |x, y| x - y, Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(a, b, |x, y| x * y, Op::Mul { a, b })
    }

    pub fn min(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(a, b, |x, y| if x <= y { x } else { y }, Op::Min { a, b })
    }

    pub fn col_slice(&mut self, x: NodeId, from: usize, to: usize) -> NodeId {
        let xm = self.value(x);
        assert!(from < to && to <= xm.cols, "column slice range");
        let mut out = Mat::zeros(xm.rows, to - from);
        for r in 0..xm.rows {
            for c in from..to {
                out.data[r * (to - from) + (c - from)] = xm.at(r, c);
            }
        }
        self.push(Op::ColSlice { x, from, to }, out)
    }

    pub fn col_concat(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty());
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut out = Mat::zeros(rows, cols);
        let mut base = 0;
        for &p in parts {
            let pm = self.value(p);
            assert_eq!(pm.rows, rows, "concat row mismatch");
            for r in 0..rows {
                for c in 0..pm.cols {
                    out.data[r * cols + base + c] = pm.at(r, c);
                }
            }
            base += pm.cols;
        }
        self.push(Op::ColConcat { parts: parts.to_vec() }, out)
    }

    pub fn sum_cols(&mut self, x: NodeId) -> NodeId {
        let xm = self.value(x);
        let mut out = Mat::zeros(xm.rows, 1);
        for r in 0..xm.rows {
            let mut acc = 0.0;
            for c in 0..xm.cols {
                acc += xm.at(r, c);
            }
            out.data[r] = acc;
        }
        self.push(Op::SumCols { x }, out)
    }

    pub fn mean_all(&mut self, x: NodeId) -> NodeId {
        let xm = self.value(x);
        let mut acc = 0.0;
        for &v in &xm.data {
            acc += v;
        }
        let value = Mat::new(1, 1, vec![acc / xm.data.len() as f64]);
        self.push(Op::MeanAll { x }, value)
    }

    /// Records the full forward pass of a registered net on `x`.
    pub fn forward_net(&mut self, params: ParamsId, x: NodeId) -> NodeId {
        let layers = self.regs[params.0].specs.len();
        let mut cur = x;
        for layer in 0..layers {
            cur = self.affine(params, layer, cur);
            cur = match self.regs[params.0].specs[layer].activation {
                Activation::Tanh => self.tanh(cur),
                Activation::Relu => self.relu(cur),
                Activation::Identity => cur,
            };
        }
        cur
    }

    /// Reverse sweep from a scalar loss node. Each op is visited exactly once.
    pub fn backward(&self, loss: NodeId) -> Gradients {
        {
            let m = self.value(loss);
            assert_eq!((m.rows, m.cols), (1, 1), "backward needs a scalar loss");
        }
        let mut grads = Gradients {
            node: self
                .nodes
                .iter()
                .map(|n| Mat::zeros(n.value.rows, n.value.cols))
                .collect(),
            params: self
                .regs
                .iter()
                .map(|r| if r.trainable { vec![0.0; r.weights.len()] } else { Vec::new() })
                .collect(),
        };
        grads.node[loss.0].data[0] = 1.0;

        for idx in (0..=loss.0).rev() {
            let g = core::mem::replace(&mut grads.node[idx], Mat::zeros(0, 0));
            if g.data.iter().all(|&v| v == 0.0) {
                grads.node[idx] = g;
                continue;
            }
            match &self.nodes[idx].op {
                Op::Input => {}
                Op::Affine { params, layer, x } => {
                    let reg = &self.regs[*params];
                    let spec = reg.specs[*layer];
                    let offset: usize =
                        reg.specs[..*layer].iter().map(|s| (s.fan_in + 1) * s.fan_out).sum();
                    let w = &reg.weights[offset..offset + spec.fan_in * spec.fan_out];
                    let xm = &self.nodes[x.0].value;
                    // dX = dY * W
                    {
                        let dx = &mut grads.node[x.0];
                        for r in 0..xm.rows {
                            for o in 0..spec.fan_out {
                                let dy = g.at(r, o);
                                if dy == 0.0 {
                                    continue;
                                }
                                let wrow = &w[o * spec.fan_in..(o + 1) * spec.fan_in];
                                let drow =
                                    &mut dx.data[r * spec.fan_in..(r + 1) * spec.fan_in];
                                for k in 0..spec.fan_in {
                                    drow[k] += dy * wrow[k];
                                }
                            }
                        }
                    }
                    // dW[o][k] += sum_r dY[r][o] * X[r][k]; db[o] += sum_r dY[r][o]
                    if reg.trainable {
                        let pg = &mut grads.params[*params];
                        let (wg, bg) = pg[offset..offset + (spec.fan_in + 1) * spec.fan_out]
                            .split_at_mut(spec.fan_in * spec.fan_out);
                        for r in 0..xm.rows {
                            let xrow = &xm.data[r * spec.fan_in..(r + 1) * spec.fan_in];
                            for o in 0..spec.fan_out {
                                let dy = g.at(r, o);
                                if dy == 0.0 {
                                    continue;
                                }
                                bg[o] += dy;
                                let wrow = &mut wg[o * spec.fan_in..(o + 1) * spec.fan_in];
                                for k in 0..spec.fan_in {
                                    wrow[k] += dy * xrow[k];
                                }
                            }
                        }
                    }
                }
                Op::Tanh { x } => {
                    let y = &self.nodes[idx].value;
                    let dx = &mut grads.node[x.0];
                    for i in 0..g.data.len() {
                        dx.data[i] += g.data[i] * (1.0 - y.data[i] * y.data[i]);
                    }
                }
                Op::Relu { x } => {
                    let xv = &self.nodes[x.0].value;
                    let dx = &mut grads.node[x.0];
                    for i in 0..g.data.len() {
                        if xv.data[i] > 0.0 {
                            dx.data[i] += g.data[i];
                        }
                    }
                }
                Op::Exp { x } => {
                    let y = &self.nodes[idx].value;
                    let dx = &mut grads.node[x.0];
                    for i in 0..g.data.len() {
                        dx.data[i] += g.data[i] * y.data[i];
                    }
                }
                Op::Ln { x } => {
                    let xv = &self.nodes[x.0].value;
                    let dx = &mut grads.node[x.0];
                    for i in 0..g.data.len() {
                        dx.data[i] += g.data[i] / xv.data[i];
                    }
                }
                Op::Square { x } => {
                    let xv = &self.nodes[x.0].value;
                    let dx = &mut grads.node[x.0];
                    for i in 0..g.data.len() {
                        dx.data[i] += g.data[i] * 2.0 * xv.data[i];
                    }
                }
                Op::Neg { x } => {
                    let dx = &mut grads.node[x.0];
                    for i in 0..g.data.len() {
                        dx.data[i] -= g.data[i];
                    }
                }
                Op::Scale { x, c } => {
                    let dx = &mut grads.node[x.0];
                    for i in 0..g.data.len() {
                        dx.data[i] += g.data[i] * c;
                    }
                }
                Op::AddConst { x } => {
                    let dx = &mut grads.node[x.0];
                    for i in 0..g.data.len() {
                        dx.data[i] += g.data[i];
                    }
                }
                Op::Add { a, b } => {
                    for &t in &[a, b] {
                        let dt = &mut grads.node[t.0];
                        for i in 0..g.data.len() {
                            dt.data[i] += g.data[i];
                        }
                    }
                }
                Op::Sub { a, b } => {
                    {
                        let da = &mut grads.node[a.0];
                        for i in 0..g.data.len() {
                            da.data[i] += g.data[i];
                        }
                    }
                    let db = &mut grads.node[b.0];
                    for i in 0..g.data.len() {
                        db.data[i] -= g.data[i];
                    }
                }
                Op::Mul { a, b } => {
                    let (av, bv) =
                        (self.nodes[a.0].value.data.clone(), self.nodes[b.0].value.data.clone());
                    {
                        let da = &mut grads.node[a.0];
                        for i in 0..g.data.len() {
                            da.data[i] += g.data[i] * bv[i];
                        }
                    }
                    let db = &mut grads.node[b.0];
                    for i in 0..g.data.len() {
                        db.data[i] += g.data[i] * av[i];
                    }
                }
                Op::Min { a, b } => {
                    let (av, bv) =
                        (self.nodes[a.0].value.data.clone(), self.nodes[b.0].value.data.clone());
                    for i in 0..g.data.len() {
                        if av[i] <= bv[i] {
                            grads.node[a.0].data[i] += g.data[i];
                        } else {
                            grads.node[b.0].data[i] += g.data[i];
                        }
                    }
                }
                Op::Clamp { x, lo, hi } => {
                    let xv = &self.nodes[x.0].value;
                    let dx = &mut grads.node[x.0];
                    for i in 0..g.data.len() {
                        if xv.data[i] >= *lo && xv.data[i] <= *hi {
                            dx.data[i] += g.data[i];
                        }
                    }
                }
                Op::LnOneMinusTanhSq { x } => {
                    let xv = &self.nodes[x.0].value;
                    let dx = &mut grads.node[x.0];
                    for i in 0..g.data.len() {
                        dx.data[i] += g.data[i] * (-2.0 * crate::math::tanh(xv.data[i]));
                    }
                }
                Op::ColSlice { x, from, to } => {
                    let xm = &self.nodes[x.0].value;
                    let cols = xm.cols;
                    let width = to - from;
                    let dx = &mut grads.node[x.0];
                    for r in 0..g.rows {
                        for c in 0..width {
                            dx.data[r * cols + from + c] += g.at(r, c);
                        }
                    }
                }
                Op::ColConcat { parts } => {
                    let mut base = 0;
                    for &p in parts {
                        let width = self.nodes[p.0].value.cols;
                        let dp = &mut grads.node[p.0];
                        for r in 0..g.rows {
                            for c in 0..width {
                                dp.data[r * width + c] += g.at(r, base + c);
                            }
                        }
                        base += width;
                    }
                }
                Op::SumCols { x } => {
                    let dx = &mut grads.node[x.0];
                    let cols = dx.cols;
                    for r in 0..g.rows {
                        for c in 0..cols {
                            dx.data[r * cols + c] += g.data[r];
                        }
                    }
                }
                Op::MeanAll { x } => {
                    let dx = &mut grads.node[x.0];
                    let scale = g.data[0] / dx.data.len() as f64;
                    for v in dx.data.iter_mut() {
                        *v += scale;
                    }
                }
            }
            grads.node[idx] = g;
        }
        grads
    }
}

/// Finite-difference check of reverse-mode parameter gradients.
///
/// Builds `loss = mean((net(x))^2)` on a tape, then compares the tape's
/// parameter gradient against central differences (step `1e-5`) computed with
/// plain forward passes. Returns the maximum relative error over all
/// parameters, where relative error is `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn grad_check(net: &DenseNet, input: &[f64]) -> f64 {
    const H: f64 = 1e-5;
    let loss_of = |n: &DenseNet| -> f64 {
        let y = n.forward(input);
        let mut acc = 0.0;
        for &v in &y {
            acc += v * v;
        }
        acc / y.len() as f64
    };

    let mut tape = GradTape::new();
    let pid = tape.register_params(net, true);
    let x = tape.input(1, input.len(), input.to_vec());
    let y = tape.forward_net(pid, x);
    let sq = tape.square(y);
    let loss = tape.mean_all(sq);
    let grads = tape.backward(loss);
    let analytic = grads.params(pid);

    let mut probe = net.clone();
    let mut max_rel: f64 = 0.0;
    for i in 0..net.param_count() {
        let orig = probe.weights()[i];
        probe.weights_mut()[i] = orig + H;
        let hi = loss_of(&probe);
        probe.weights_mut()[i] = orig - H;
        let lo = loss_of(&probe);
        probe.weights_mut()[i] = orig;
        let numeric = (hi - lo) / (2.0 * H);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-6);
        max_rel = max_rel.max((analytic[i] - numeric).abs() / denom);
    }
    max_rel
}
