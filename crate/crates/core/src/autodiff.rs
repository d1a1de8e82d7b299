//! Scalar reverse-mode automatic differentiation over a recorded tape.
//!
//! The engine covers exactly the primitive set the score generators need:
//! affine arithmetic, exp/log/sqrt, sigmoid, softplus (positivity maps),
//! softmax (composed), piecewise-linear interpolation (composed affine) and
//! reparameterized Gaussian draws (affine in fixed noise). Parameter counts
//! are tens while each objective evaluation touches millions of
//! intermediates, so gradients run in reverse mode over a flat `Vec` tape.
//!
//! Model code is written once against the [`Scope`] trait and runs in two
//! modes: [`ValueScope`] evaluates with plain `f64` (hard, evaluation-time
//! sampling) and [`TapeScope`] records onto a [`Tape`] (relaxed,
//! training-time objectives). Data-dependent choices (segment search,
//! argmax, softmax max-shift) read current values through [`Scope::value`]
//! and therefore agree between the two modes on the same noise.

use crate::error::{Error, Result};

/// Handle to a tape entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Node(u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OpKind {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Exp,
    Ln,
    Sqrt,
    Sigmoid,
    Softplus,
    /// a + c
    AddC,
    /// a * c
    MulC,
    /// a * c + b
    MulAddC,
    /// indicator 1{a > c}; forward-only, gradient is defined as zero
    StepAboveC,
}

#[derive(Debug, Clone, Copy)]
struct Op {
    kind: OpKind,
    a: u32,
    b: u32,
    c: f64,
}

/// Recorded computation: one value and one op per node, in program order.
#[derive(Debug, Default)]
pub struct Tape {
    vals: Vec<f64>,
    ops: Vec<Op>,
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    /// Drops all recorded nodes but keeps allocations.
    pub fn clear(&mut self) {
        self.vals.clear();
        self.ops.clear();
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    /// Creates an input node (parameter or fixed noise/constant).
    pub fn leaf(&mut self, v: f64) -> Node {
        self.push(v, OpKind::Leaf, 0, 0, 0.0)
    }

    pub fn value(&self, n: Node) -> f64 {
        self.vals[n.0 as usize]
    }

    fn push(&mut self, v: f64, kind: OpKind, a: u32, b: u32, c: f64) -> Node {
        let idx = self.vals.len() as u32;
        self.vals.push(v);
        self.ops.push(Op { kind, a, b, c });
        Node(idx)
    }

    pub fn add(&mut self, a: Node, b: Node) -> Node {
        let v = self.vals[a.0 as usize] + self.vals[b.0 as usize];
        self.push(v, OpKind::Add, a.0, b.0, 0.0)
    }

    pub fn sub(&mut self, a: Node, b: Node) -> Node {
        let v = self.vals[a.0 as usize] - self.vals[b.0 as usize];
        self.push(v, OpKind::Sub, a.0, b.0, 0.0)
    }

    pub fn mul(&mut self, a: Node, b: Node) -> Node {
        let v = self.vals[a.0 as usize] * self.vals[b.0 as usize];
        self.push(v, OpKind::Mul, a.0, b.0, 0.0)
    }

    pub fn div(&mut self, a: Node, b: Node) -> Node {
        let v = self.vals[a.0 as usize] / self.vals[b.0 as usize];
        self.push(v, OpKind::Div, a.0, b.0, 0.0)
    }

    pub fn neg(&mut self, a: Node) -> Node {
        let v = -self.vals[a.0 as usize];
        self.push(v, OpKind::Neg, a.0, 0, 0.0)
    }

    pub fn exp(&mut self, a: Node) -> Node {
        let v = self.vals[a.0 as usize].exp();
        self.push(v, OpKind::Exp, a.0, 0, 0.0)
    }

    pub fn ln(&mut self, a: Node) -> Node {
        let v = self.vals[a.0 as usize].ln();
        self.push(v, OpKind::Ln, a.0, 0, 0.0)
    }

    pub fn sqrt(&mut self, a: Node) -> Node {
        let v = self.vals[a.0 as usize].sqrt();
        self.push(v, OpKind::Sqrt, a.0, 0, 0.0)
    }

    pub fn sigmoid(&mut self, a: Node) -> Node {
        let v = sigmoid(self.vals[a.0 as usize]);
        self.push(v, OpKind::Sigmoid, a.0, 0, 0.0)
    }

    pub fn softplus(&mut self, a: Node) -> Node {
        let v = softplus(self.vals[a.0 as usize]);
        self.push(v, OpKind::Softplus, a.0, 0, 0.0)
    }

    pub fn add_c(&mut self, a: Node, c: f64) -> Node {
        let v = self.vals[a.0 as usize] + c;
        self.push(v, OpKind::AddC, a.0, 0, c)
    }

    pub fn mul_c(&mut self, a: Node, c: f64) -> Node {
        let v = self.vals[a.0 as usize] * c;
        self.push(v, OpKind::MulC, a.0, 0, c)
    }

    pub fn mul_add_c(&mut self, a: Node, c: f64, b: Node) -> Node {
        let v = self.vals[a.0 as usize] * c + self.vals[b.0 as usize];
        self.push(v, OpKind::MulAddC, a.0, b.0, c)
    }

    /// Hard indicator `1{a > c}`. Not differentiable; its recorded gradient
    /// is zero, which [`finite_difference_check`] exposes.
    pub fn step_above_c(&mut self, a: Node, c: f64) -> Node {
        let v = if self.vals[a.0 as usize] > c { 1.0 } else { 0.0 };
        self.push(v, OpKind::StepAboveC, a.0, 0, c)
    }

    /// Reverse pass from `out`; returns the adjoint of every node.
    pub fn backward(&self, out: Node) -> Vec<f64> {
        let mut grads = vec![0.0; self.vals.len()];
        grads[out.0 as usize] = 1.0;
        for (idx, op) in self.ops.iter().enumerate().rev() {
            let go = grads[idx];
            if go == 0.0 {
                continue;
            }
            let a = op.a as usize;
            let b = op.b as usize;
            match op.kind {
                OpKind::Leaf => {}
                OpKind::Add => {
                    grads[a] += go;
                    grads[b] += go;
                }
                OpKind::Sub => {
                    grads[a] += go;
                    grads[b] -= go;
                }
                OpKind::Mul => {
                    grads[a] += go * self.vals[b];
                    grads[b] += go * self.vals[a];
                }
                OpKind::Div => {
                    let bv = self.vals[b];
                    grads[a] += go / bv;
                    grads[b] -= go * self.vals[a] / (bv * bv);
                }
                OpKind::Neg => grads[a] -= go,
                OpKind::Exp => grads[a] += go * self.vals[idx],
                OpKind::Ln => grads[a] += go / self.vals[a],
                OpKind::Sqrt => grads[a] += go * 0.5 / self.vals[idx],
                OpKind::Sigmoid => {
                    let s = self.vals[idx];
                    grads[a] += go * s * (1.0 - s);
                }
                OpKind::Softplus => grads[a] += go * sigmoid(self.vals[a]),
                OpKind::AddC => grads[a] += go,
                OpKind::MulC => grads[a] += go * op.c,
                OpKind::MulAddC => {
                    grads[a] += go * op.c;
                    grads[b] += go;
                }
                OpKind::StepAboveC => {}
            }
        }
        grads
    }
}

/// Numeric context for scope-generic model code.
pub trait Scope {
    type V: Copy + std::fmt::Debug;

    /// Embeds a constant (fixed noise draw, threshold, ...).
    fn constant(&mut self, x: f64) -> Self::V;
    /// Current numeric value; used for data-dependent control flow.
    fn value(&self, v: Self::V) -> f64;

    fn add(&mut self, a: Self::V, b: Self::V) -> Self::V;
    fn sub(&mut self, a: Self::V, b: Self::V) -> Self::V;
    fn mul(&mut self, a: Self::V, b: Self::V) -> Self::V;
    fn div(&mut self, a: Self::V, b: Self::V) -> Self::V;
    fn neg(&mut self, a: Self::V) -> Self::V;
    fn add_c(&mut self, a: Self::V, c: f64) -> Self::V;
    fn mul_c(&mut self, a: Self::V, c: f64) -> Self::V;
    /// `a * c + b`
    fn mul_add_c(&mut self, a: Self::V, c: f64, b: Self::V) -> Self::V;
    fn exp(&mut self, a: Self::V) -> Self::V;
    fn ln(&mut self, a: Self::V) -> Self::V;
    fn sqrt(&mut self, a: Self::V) -> Self::V;
    fn sigmoid(&mut self, a: Self::V) -> Self::V;
    fn softplus(&mut self, a: Self::V) -> Self::V;
}

/// Plain `f64` evaluation; the hard, gradient-free path.
#[derive(Debug, Default, Clone, Copy)]
pub struct ValueScope;

impl Scope for ValueScope {
    type V = f64;

    fn constant(&mut self, x: f64) -> f64 {
        x
    }
    fn value(&self, v: f64) -> f64 {
        v
    }
    fn add(&mut self, a: f64, b: f64) -> f64 {
        a + b
    }
    fn sub(&mut self, a: f64, b: f64) -> f64 {
        a - b
    }
    fn mul(&mut self, a: f64, b: f64) -> f64 {
        a * b
    }
    fn div(&mut self, a: f64, b: f64) -> f64 {
        a / b
    }
    fn neg(&mut self, a: f64) -> f64 {
        -a
    }
    fn add_c(&mut self, a: f64, c: f64) -> f64 {
        a + c
    }
    fn mul_c(&mut self, a: f64, c: f64) -> f64 {
        a * c
    }
    fn mul_add_c(&mut self, a: f64, c: f64, b: f64) -> f64 {
        a * c + b
    }
    fn exp(&mut self, a: f64) -> f64 {
        a.exp()
    }
    fn ln(&mut self, a: f64) -> f64 {
        a.ln()
    }
    fn sqrt(&mut self, a: f64) -> f64 {
        a.sqrt()
    }
    fn sigmoid(&mut self, a: f64) -> f64 {
        sigmoid(a)
    }
    fn softplus(&mut self, a: f64) -> f64 {
        softplus(a)
    }
}

/// Tape-recording evaluation; the differentiable path.
pub struct TapeScope<'a>(pub &'a mut Tape);

impl Scope for TapeScope<'_> {
    type V = Node;

    fn constant(&mut self, x: f64) -> Node {
        self.0.leaf(x)
    }
    fn value(&self, v: Node) -> f64 {
        self.0.value(v)
    }
    fn add(&mut self, a: Node, b: Node) -> Node {
        self.0.add(a, b)
    }
    fn sub(&mut self, a: Node, b: Node) -> Node {
        self.0.sub(a, b)
    }
    fn mul(&mut self, a: Node, b: Node) -> Node {
        self.0.mul(a, b)
    }
    fn div(&mut self, a: Node, b: Node) -> Node {
        self.0.div(a, b)
    }
    fn neg(&mut self, a: Node) -> Node {
        self.0.neg(a)
    }
    fn add_c(&mut self, a: Node, c: f64) -> Node {
        self.0.add_c(a, c)
    }
    fn mul_c(&mut self, a: Node, c: f64) -> Node {
        self.0.mul_c(a, c)
    }
    fn mul_add_c(&mut self, a: Node, c: f64, b: Node) -> Node {
        self.0.mul_add_c(a, c, b)
    }
    fn exp(&mut self, a: Node) -> Node {
        self.0.exp(a)
    }
    fn ln(&mut self, a: Node) -> Node {
        self.0.ln(a)
    }
    fn sqrt(&mut self, a: Node) -> Node {
        self.0.sqrt(a)
    }
    fn sigmoid(&mut self, a: Node) -> Node {
        self.0.sigmoid(a)
    }
    fn softplus(&mut self, a: Node) -> Node {
        self.0.softplus(a)
    }
}

/// Softmax weights with a detached max shift (shift invariance keeps the
/// gradient exact).
pub fn softmax<S: Scope>(s: &mut S, xs: &[S::V]) -> Vec<S::V> {
    let m = xs
        .iter()
        .map(|&x| s.value(x))
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<S::V> = xs
        .iter()
        .map(|&x| {
            let shifted = s.add_c(x, -m);
            s.exp(shifted)
        })
        .collect();
    let mut sum = exps[0];
    for &e in &exps[1..] {
        sum = s.add(sum, e);
    }
    exps.iter().map(|&e| s.div(e, sum)).collect()
}

/// A deterministic objective built from the supported primitives. Noise
/// must be fixed inside the implementation (common random numbers) so that
/// repeated evaluations at perturbed parameters see identical draws.
pub trait Objective {
    fn eval_tape(&self, tape: &mut Tape, params: &[Node]) -> Node;
}

impl<F: Fn(&mut Tape, &[Node]) -> Node> Objective for F {
    fn eval_tape(&self, tape: &mut Tape, params: &[Node]) -> Node {
        self(tape, params)
    }
}

fn bind_params(tape: &mut Tape, params: &[f64]) -> Vec<Node> {
    params.iter().map(|&p| tape.leaf(p)).collect()
}

/// Evaluates `obj` and its exact reverse-mode gradient at `params`,
/// reusing `tape` storage.
pub fn value_and_grad_with(
    tape: &mut Tape,
    obj: &dyn Objective,
    params: &[f64],
) -> (f64, Vec<f64>) {
    tape.clear();
    let nodes = bind_params(tape, params);
    let out = obj.eval_tape(tape, &nodes);
    let grads = tape.backward(out);
    let grad = nodes.iter().map(|n| grads[n.0 as usize]).collect();
    (tape.value(out), grad)
}

/// Evaluates `obj` and its exact reverse-mode gradient at `params`.
pub fn value_and_grad(obj: &dyn Objective, params: &[f64]) -> (f64, Vec<f64>) {
    let mut tape = Tape::new();
    value_and_grad_with(&mut tape, obj, params)
}

/// Forward evaluation only.
pub fn eval_value(tape: &mut Tape, obj: &dyn Objective, params: &[f64]) -> f64 {
    tape.clear();
    let nodes = bind_params(tape, params);
    let out = obj.eval_tape(tape, &nodes);
    tape.value(out)
}

/// Outcome of [`finite_difference_check`].
#[derive(Debug, Clone)]
pub struct FdReport {
    pub max_rel_err: f64,
    /// Parameter index achieving the maximum relative error.
    pub worst_index: usize,
    pub passing: bool,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
}

/// Central-difference verification of the reverse-mode gradient.
///
/// Relative error per coordinate is `|fd - ad| / max(|fd|, |ad|, 1e-6)`;
/// the floor keeps vanishing gradients from amplifying roundoff.
pub fn finite_difference_check(
    obj: &dyn Objective,
    params: &[f64],
    epsilon: f64,
    tolerance: f64,
) -> Result<FdReport> {
    if epsilon <= 0.0 {
        return Err(Error::Invalid("epsilon must be positive".into()));
    }
    let mut tape = Tape::new();
    let (_, analytic) = value_and_grad_with(&mut tape, obj, params);
    let mut numeric = vec![0.0; params.len()];
    let mut theta = params.to_vec();
    for i in 0..params.len() {
        let base = theta[i];
        theta[i] = base + epsilon;
        let up = eval_value(&mut tape, obj, &theta);
        theta[i] = base - epsilon;
        let down = eval_value(&mut tape, obj, &theta);
        theta[i] = base;
        numeric[i] = (up - down) / (2.0 * epsilon);
    }
    let mut max_rel_err = 0.0;
    let mut worst_index = 0;
    for i in 0..params.len() {
        let denom = analytic[i].abs().max(numeric[i].abs()).max(1e-6);
        let rel = (analytic[i] - numeric[i]).abs() / denom;
        if rel > max_rel_err {
            max_rel_err = rel;
            worst_index = i;
        }
    }
    Ok(FdReport {
        max_rel_err,
        worst_index,
        passing: max_rel_err < tolerance,
        analytic,
        numeric,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_value_and_grad() {
        let f = |t: &mut Tape, p: &[Node]| t.mul(p[0], p[0]);
        let (v, g) = value_and_grad(&f, &[3.0]);
        assert_eq!(v, 9.0);
        assert_eq!(g, vec![6.0]);
    }

    #[test]
    fn sigmoid_at_zero() {
        let f = |t: &mut Tape, p: &[Node]| t.sigmoid(p[0]);
        let (v, g) = value_and_grad(&f, &[0.0]);
        assert_eq!(v, 0.5);
        assert_eq!(g, vec![0.25]);
    }

    fn composite(t: &mut Tape, p: &[Node]) -> Node {
        // exp/ln/sqrt/sigmoid/softplus/div composition with fan-out
        let a = t.mul(p[0], p[1]);
        let b = t.softplus(a);
        let c = t.add_c(b, 0.75);
        let d = t.ln(c);
        let e = t.sigmoid(p[2]);
        let f = t.mul_add_c(d, -1.25, e);
        let g = t.exp(p[0]);
        let h = t.add(f, g);
        let i = t.add_c(e, 1.5);
        let j = t.div(h, i);
        let k = t.sqrt(i);
        let l = t.mul(j, k);
        t.mul_add_c(l, 2.0, a)
    }

    #[test]
    fn composite_matches_central_differences() {
        let report =
            finite_difference_check(&composite, &[0.4, -1.3, 0.7], 1e-6, 1e-5).unwrap();
        assert!(
            report.passing,
            "max rel err {} at {}",
            report.max_rel_err, report.worst_index
        );
    }

    #[test]
    fn quadratic_fd_error_is_tiny() {
        let f = |t: &mut Tape, p: &[Node]| {
            let a = t.mul(p[0], p[0]);
            let b = t.mul(p[1], p[1]);
            let ab = t.add(a, b);
            t.mul_add_c(p[0], 3.0, ab)
        };
        let report = finite_difference_check(&f, &[1.5, -2.0], 1e-5, 1e-9).unwrap();
        assert!(report.passing, "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn hard_indicator_fails_fd_check() {
        let f = |t: &mut Tape, p: &[Node]| t.step_above_c(p[0], 0.0);
        let report = finite_difference_check(&f, &[0.0], 1e-5, 1e-4).unwrap();
        assert!(!report.passing);
    }

    #[test]
    fn deterministic_bitwise() {
        let params = [0.4, -1.3, 0.7];
        let (v1, g1) = value_and_grad(&composite, &params);
        let (v2, g2) = value_and_grad(&composite, &params);
        assert_eq!(v1.to_bits(), v2.to_bits());
        let bits = |g: &[f64]| g.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&g1), bits(&g2));
    }

    #[test]
    fn softmax_weights_sum_to_one_and_track_max() {
        let mut tape = Tape::new();
        let mut s = TapeScope(&mut tape);
        let xs: Vec<Node> = [1.0, 3.0, 2.0].iter().map(|&x| s.constant(x)).collect();
        let w = softmax(&mut s, &xs);
        let vals: Vec<f64> = w.iter().map(|&n| s.value(n)).collect();
        assert!((vals.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(vals[1] > vals[2] && vals[2] > vals[0]);
    }

    #[test]
    fn scopes_agree_on_shared_formula() {
        fn formula<S: Scope>(s: &mut S, x: S::V) -> S::V {
            let a = s.softplus(x);
            let b = s.mul_c(a, 0.5);
            let c = s.sigmoid(b);
            let d = s.exp(x);
            let e = s.add(c, d);
            let f = s.constant(2.0);
            s.div(e, f)
        }
        let mut vs = ValueScope;
        let plain = {
            let x = vs.constant(0.37);
            formula(&mut vs, x)
        };
        let mut tape = Tape::new();
        let mut ts = TapeScope(&mut tape);
        let x = ts.constant(0.37);
        let taped = formula(&mut ts, x);
        assert_eq!(plain.to_bits(), tape.value(taped).to_bits());
    }
}
