//! Reverse-mode gradient tape over dense vectors.
//!
//! Nodes are appended in evaluation order, so a reverse sweep over the node list
//! is a valid topological order for backpropagation. Parameters enter the tape
//! by reference; frozen parameters become constants and receive no gradient.

use alloc::borrow::Cow;
use alloc::vec;
use alloc::vec::Vec;

use super::array::Array;
use super::loss::LossKind;
use super::params::{Grads, ParamSet};
use crate::error::{dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(usize),
    Affine { x: Var, w: Var, b: Option<Var> },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    Softmax(Var),
    Replicate { x: Var, factor: usize },
    Pick { x: Var, index: usize },
    Sum(Var),
    Loss { kind: LossKind, pred: Var, target: Var },
}

#[derive(Debug, Clone)]
struct Node<'p> {
    value: Cow<'p, [f64]>,
    rows: usize,
    cols: usize,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape<'p> {
    nodes: Vec<Node<'p>>,
}

impl<'p> Tape<'p> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Cow<'p, [f64]>, rows: usize, cols: usize, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            rows,
            cols,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node<'p> {
        &self.nodes[v.0]
    }

    fn grad_of(&self, a: Var) -> bool {
        self.node(a).requires_grad
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.node(v).value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.node(v).value[0]
    }

    pub fn width(&self, v: Var) -> usize {
        self.node(v).value.len()
    }

    /// Constant vector owned by the tape.
    pub fn input(&mut self, data: Vec<f64>) -> Var {
        let n = data.len();
        self.push(Cow::Owned(data), n, 1, Op::Leaf, false)
    }

    /// Constant vector borrowed for the tape's lifetime.
    pub fn input_ref(&mut self, data: &'p [f64]) -> Var {
        let n = data.len();
        self.push(Cow::Borrowed(data), n, 1, Op::Leaf, false)
    }

    /// Registers parameter `name`; frozen parameters are recorded as constants.
    pub fn param(&mut self, params: &'p ParamSet, name: &str) -> Result<Var> {
        let i = params
            .index_of(name)
            .ok_or_else(|| Error::Argument(alloc::format!("unknown parameter `{name}`")))?;
        let p = params.param(i);
        let (rows, cols) = p.value.matrix_dims();
        let op = if p.trainable { Op::Param(i) } else { Op::Leaf };
        Ok(self.push(Cow::Borrowed(p.value.data()), rows, cols, op, p.trainable))
    }

    /// Registers a standalone array as a constant.
    pub fn constant(&mut self, a: &'p Array) -> Var {
        let (rows, cols) = a.matrix_dims();
        self.push(Cow::Borrowed(a.data()), rows, cols, Op::Leaf, false)
    }

    /// `W x + b` with `W` of shape `out x in`.
    pub fn affine(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (out, inp) = (self.node(w).rows, self.node(w).cols);
        dim("affine input", inp, self.width(x))?;
        if let Some(b) = b {
            dim("affine bias", out, self.width(b))?;
        }
        let mut y = match b {
            Some(b) => self.value(b).to_vec(),
            None => vec![0.0; out],
        };
        {
            let wv = self.value(w);
            let xv = self.value(x);
            for (r, yr) in y.iter_mut().enumerate() {
                let row = &wv[r * inp..(r + 1) * inp];
                *yr += dot(row, xv);
            }
        }
        let rg = self.grad_of(x) || self.grad_of(w) || b.is_some_and(|b| self.grad_of(b));
        Ok(self.push(Cow::Owned(y), out, 1, Op::Affine { x, w, b }, rg))
    }

    fn binary(&mut self, a: Var, b: Var, context: &'static str, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        dim(context, self.width(a), self.width(b))?;
        let y: Vec<f64> = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(p, q)| f(*p, *q))
            .collect();
        let n = y.len();
        let rg = self.grad_of(a) || self.grad_of(b);
        Ok(self.push(Cow::Owned(y), n, 1, op, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "add", |p, q| p + q, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "sub", |p, q| p - q, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "mul", |p, q| p * q, Op::Mul(a, b))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let y: Vec<f64> = self.value(a).iter().map(|v| f(*v)).collect();
        let n = y.len();
        let rg = self.grad_of(a);
        self.push(Cow::Owned(y), n, 1, op, rg)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        self.unary(a, |v| v * factor, Op::Scale(a, factor))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, libm::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |v| v.max(0.0), Op::Relu(a))
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let y = softmax(self.value(a))?;
        let n = y.len();
        let rg = self.grad_of(a);
        Ok(self.push(Cow::Owned(y), n, 1, Op::Softmax(a), rg))
    }

    /// Repeats each entry `factor` times: `[a, b] -> [a, a, b, b]` for factor 2.
    pub fn replicate(&mut self, x: Var, factor: usize) -> Var {
        let y: Vec<f64> = self
            .value(x)
            .iter()
            .flat_map(|v| core::iter::repeat_n(*v, factor))
            .collect();
        let n = y.len();
        let rg = self.grad_of(x);
        self.push(Cow::Owned(y), n, 1, Op::Replicate { x, factor }, rg)
    }

    pub fn pick(&mut self, x: Var, index: usize) -> Result<Var> {
        let w = self.width(x);
        if index >= w {
            return Err(Error::Dimension {
                context: "pick index",
                expected: w,
                got: index,
            });
        }
        let v = self.value(x)[index];
        let rg = self.grad_of(x);
        Ok(self.push(Cow::Owned(vec![v]), 1, 1, Op::Pick { x, index }, rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s: f64 = self.value(x).iter().sum();
        let rg = self.grad_of(x);
        self.push(Cow::Owned(vec![s]), 1, 1, Op::Sum(x), rg)
    }

    /// Mean-reduced loss between `pred` and a constant `target`.
    pub fn loss(&mut self, kind: LossKind, pred: Var, target: Var) -> Result<Var> {
        let v = super::loss::loss(kind, self.value(pred), self.value(target))?;
        let rg = self.grad_of(pred);
        Ok(self.push(Cow::Owned(vec![v]), 1, 1, Op::Loss { kind, pred, target }, rg))
    }

    /// Smallest distance of any ReLU input or L1 residual from its kink at zero.
    pub fn kink_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for node in &self.nodes {
            match node.op {
                Op::Relu(a) => {
                    for v in self.value(a) {
                        best = best.min(v.abs());
                    }
                }
                Op::Loss {
                    kind: LossKind::L1,
                    pred,
                    target,
                } => {
                    for (p, t) in self.value(pred).iter().zip(self.value(target)) {
                        best = best.min((p - t).abs());
                    }
                }
                _ => {}
            }
        }
        best
    }

    /// Backpropagates `d loss`, adding `scale * d loss / d param` into `grads`.
    pub fn backward_into(&self, loss: Var, grads: &mut Grads, scale: f64) -> Result<()> {
        dim("backward root (scalar)", 1, self.width(loss))?;
        let v = self.scalar(loss);
        if !v.is_finite() {
            return Err(Error::Probe(alloc::format!("non-finite loss {v}")));
        }
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(vec![scale]);
        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            match node.op {
                Op::Leaf => {}
                Op::Param(pi) => {
                    let slot = grads.slot_mut(pi, g.len());
                    add_into(slot, &g);
                }
                Op::Affine { x, w, b } => {
                    let wn = self.node(w);
                    let (out, inp) = (wn.rows, wn.cols);
                    if self.grad_of(x) {
                        let dx = acc(&mut adj, x, inp);
                        for (r, gr) in g.iter().enumerate() {
                            if *gr != 0.0 {
                                let row = &wn.value[r * inp..(r + 1) * inp];
                                axpy(dx, *gr, row);
                            }
                        }
                    }
                    if wn.requires_grad {
                        let xv = self.value(x);
                        let dw: &mut [f64] = match wn.op {
                            // Accumulate directly: weight matrices can be large and
                            // most rows receive zero adjoint in value-based losses.
                            Op::Param(pi) => grads.slot_mut(pi, out * inp),
                            _ => acc(&mut adj, w, out * inp),
                        };
                        for (r, gr) in g.iter().enumerate() {
                            if *gr != 0.0 {
                                axpy(&mut dw[r * inp..(r + 1) * inp], *gr, xv);
                            }
                        }
                    }
                    if let Some(b) = b {
                        if self.grad_of(b) {
                            add_into(acc(&mut adj, b, out), &g);
                        }
                    }
                }
                Op::Add(a, b) => {
                    if self.grad_of(a) {
                        add_into(acc(&mut adj, a, g.len()), &g);
                    }
                    if self.grad_of(b) {
                        add_into(acc(&mut adj, b, g.len()), &g);
                    }
                }
                Op::Sub(a, b) => {
                    if self.grad_of(a) {
                        add_into(acc(&mut adj, a, g.len()), &g);
                    }
                    if self.grad_of(b) {
                        axpy(acc(&mut adj, b, g.len()), -1.0, &g);
                    }
                }
                Op::Mul(a, b) => {
                    if self.grad_of(a) {
                        let bv = self.value(b);
                        let da = acc(&mut adj, a, g.len());
                        for ((d, gi), bi) in da.iter_mut().zip(&g).zip(bv) {
                            *d += gi * bi;
                        }
                    }
                    if self.grad_of(b) {
                        let av = self.value(a);
                        let db = acc(&mut adj, b, g.len());
                        for ((d, gi), ai) in db.iter_mut().zip(&g).zip(av) {
                            *d += gi * ai;
                        }
                    }
                }
                Op::Scale(a, f) => axpy(acc(&mut adj, a, g.len()), f, &g),
                Op::Tanh(a) => {
                    let y = &node.value;
                    let da = acc(&mut adj, a, g.len());
                    for ((d, gi), yi) in da.iter_mut().zip(&g).zip(y.iter()) {
                        *d += gi * (1.0 - yi * yi);
                    }
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    let da = acc(&mut adj, a, g.len());
                    for ((d, gi), yi) in da.iter_mut().zip(&g).zip(y.iter()) {
                        *d += gi * yi * (1.0 - yi);
                    }
                }
                Op::Relu(a) => {
                    let xv = self.value(a);
                    let da = acc(&mut adj, a, g.len());
                    for ((d, gi), xi) in da.iter_mut().zip(&g).zip(xv) {
                        if *xi > 0.0 {
                            *d += gi;
                        }
                    }
                }
                Op::Softmax(a) => {
                    let y = &node.value;
                    let s = dot(&g, y);
                    let da = acc(&mut adj, a, g.len());
                    for ((d, gi), yi) in da.iter_mut().zip(&g).zip(y.iter()) {
                        *d += yi * (gi - s);
                    }
                }
                Op::Replicate { x, factor } => {
                    let n = self.width(x);
                    let dx = acc(&mut adj, x, n);
                    for (j, d) in dx.iter_mut().enumerate() {
                        *d += g[j * factor..(j + 1) * factor].iter().sum::<f64>();
                    }
                }
                Op::Pick { x, index } => {
                    let n = self.width(x);
                    acc(&mut adj, x, n)[index] += g[0];
                }
                Op::Sum(x) => {
                    let n = self.width(x);
                    acc(&mut adj, x, n).iter_mut().for_each(|d| *d += g[0]);
                }
                Op::Loss { kind, pred, target } => {
                    let n = self.width(pred);
                    let pv = self.value(pred);
                    let tv = self.value(target);
                    let scale = g[0] / n as f64;
                    let dp = acc(&mut adj, pred, n);
                    for ((d, p), t) in dp.iter_mut().zip(pv).zip(tv) {
                        *d += scale * kind.derivative(p - t);
                    }
                }
            }
        }
        Ok(())
    }
}

fn acc(adj: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut [f64] {
    adj[v.0].get_or_insert_with(|| vec![0.0; len])
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four partial sums let the compiler vectorise without reassociation flags.
    let mut s = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        s[0] += a[i] * b[i];
        s[1] += a[i + 1] * b[i + 1];
        s[2] += a[i + 2] * b[i + 2];
        s[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    (s[0] + s[1]) + (s[2] + s[3]) + tail
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
fn add_into(y: &mut [f64], x: &[f64]) {
    axpy(y, 1.0, x);
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + libm::exp(-v))
    } else {
        let e = libm::exp(v);
        e / (1.0 + e)
    }
}

/// Numerically stable softmax. Errors on empty input.
pub fn softmax(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::Dimension {
            context: "softmax input",
            expected: 1,
            got: 0,
        });
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = v.iter().map(|x| libm::exp(x - max)).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= total);
    Ok(out)
}

/// `W x + b` evaluated without a tape.
pub fn affine(x: &Array, w: &Array, b: &Array) -> Result<Array> {
    let (out, inp) = w.matrix_dims();
    dim("affine input", inp, x.len())?;
    dim("affine bias", out, b.len())?;
    let mut tape = Tape::new();
    let xv = tape.constant(x);
    let wv = tape.constant(w);
    let bv = tape.constant(b);
    let y = tape.affine(xv, wv, Some(bv))?;
    Ok(Array::vector(tape.value(y).to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_identity_and_diag() {
        let y = affine(&Array::vector(vec![1.0, 2.0]), &Array::identity(2), &Array::vector(vec![0.0, 0.0])).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0]);
        let y = affine(
            &Array::vector(vec![1.0, -1.0]),
            &Array::diag(&[2.0, 3.0]),
            &Array::vector(vec![1.0, 1.0]),
        )
        .unwrap();
        assert_eq!(y.data(), &[3.0, -2.0]);
    }

    #[test]
    fn affine_shape_mismatch() {
        let err = affine(&Array::vector(vec![1.0; 3]), &Array::identity(2), &Array::vector(vec![0.0; 2]));
        assert!(matches!(err, Err(Error::Dimension { .. })));
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        let s = softmax(&[100.0, 0.0]).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-12 && s[1].abs() < 1e-12);
        assert!(softmax(&[]).is_err());
    }

    #[test]
    fn frozen_params_get_no_gradient() {
        let mut p = ParamSet::new();
        p.insert("w", Array::identity(2), false).unwrap();
        p.insert("b", Array::vector(vec![0.0, 0.0]), true).unwrap();
        let mut tape = Tape::new();
        let x = tape.input(vec![1.0, 2.0]);
        let w = tape.param(&p, "w").unwrap();
        let b = tape.param(&p, "b").unwrap();
        let y = tape.affine(x, w, Some(b)).unwrap();
        let s = tape.sum(y);
        let mut g = Grads::for_params(&p);
        tape.backward_into(s, &mut g, 1.0).unwrap();
        assert!(g.get(0).is_none());
        assert_eq!(g.get(1).unwrap(), &[1.0, 1.0]);
    }

    #[test]
    fn replicate_layout() {
        let mut tape = Tape::new();
        let x = tape.input(vec![1.0, 2.0]);
        let y = tape.replicate(x, 3);
        assert_eq!(tape.value(y), &[1.0, 1.0, 1.0, 2.0, 2.0, 2.0]);
    }
}
