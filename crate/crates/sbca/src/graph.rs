//! Scalar reverse-mode automatic differentiation on a flat tape.
//!
//! Every intermediate value is a node in an append-only arena. An operation
//! records its operand indices; because operands must already exist when an
//! op is pushed, the tape is topologically sorted by construction and the
//! backward pass is a single reverse sweep.
//!
//! [`Var`] is a cheap handle (tape pointer + index). Cloning a handle does
//! not copy the value. Gradients are returned from [`Tape::backward`] as a
//! separate [`Grads`] buffer so a tape can be swept repeatedly, or reset and
//! refilled, without stale-gradient bugs.
//!
//! The [`Real`] trait abstracts over `f64` and [`Var`] so forward code
//! (network layers, the trading environment, log-densities) is written once
//! and used both for plain evaluation and for differentiation.

use std::cell::RefCell;
use std::rc::Rc;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
enum Op {
    Leaf,
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    Neg(u32),
    Ln(u32),
    Exp(u32),
    Sqrt(u32),
    Tanh(u32),
    Relu(u32),
    Abs(u32),
    LnGamma(u32),
    AddC(u32),
    MulC(u32, f64),
}

#[derive(Default)]
struct TapeInner {
    vals: Vec<f64>,
    ops: Vec<Op>,
}

/// Append-only arena of scalar nodes.
#[derive(Clone, Default)]
pub struct Tape {
    inner: Rc<RefCell<TapeInner>>,
}

/// Handle to one node on a [`Tape`].
#[derive(Clone)]
pub struct Var {
    tape: Tape,
    idx: u32,
}

/// Gradient buffer produced by one backward sweep.
pub struct Grads(Vec<f64>);

impl Grads {
    /// Gradient of the swept output with respect to `v`. Nodes the output
    /// does not depend on have gradient zero.
    pub fn get(&self, v: &Var) -> f64 {
        self.0[v.idx as usize]
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of nodes currently on the tape.
    pub fn len(&self) -> usize {
        self.inner.borrow().vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Insert a leaf node (input or parameter).
    pub fn var(&self, val: f64) -> Var {
        self.push(val, Op::Leaf)
    }

    /// Insert leaf nodes for a whole slice.
    pub fn vars(&self, vals: &[f64]) -> Vec<Var> {
        vals.iter().map(|&v| self.var(v)).collect()
    }

    /// Drop all nodes, keeping allocated capacity. Handles created before
    /// the reset must not be used afterwards.
    pub fn reset(&self) {
        let mut inner = self.inner.borrow_mut();
        inner.vals.clear();
        inner.ops.clear();
    }

    fn push(&self, val: f64, op: Op) -> Var {
        let mut inner = self.inner.borrow_mut();
        let idx = inner.vals.len() as u32;
        inner.vals.push(val);
        inner.ops.push(op);
        Var {
            tape: self.clone(),
            idx,
        }
    }

    /// Reverse sweep from `out`, returning the gradient of `out` with
    /// respect to every node. Repeated sweeps over the same tape are
    /// independent.
    pub fn backward(&self, out: &Var) -> Result<Grads> {
        let inner = self.inner.borrow();
        let n = inner.vals.len();
        let mut grads = vec![0.0; n];
        grads[out.idx as usize] = 1.0;
        for i in (0..n).rev() {
            let g = grads[i];
            if g == 0.0 {
                continue;
            }
            let arg = |a: u32| -> Result<usize> {
                if a as usize >= i {
                    return Err(Error::Graph(format!(
                        "op at node {i} refers to node {a} ahead of it"
                    )));
                }
                Ok(a as usize)
            };
            match inner.ops[i] {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    grads[arg(a)?] += g;
                    grads[arg(b)?] += g;
                }
                Op::Sub(a, b) => {
                    grads[arg(a)?] += g;
                    grads[arg(b)?] -= g;
                }
                Op::Mul(a, b) => {
                    let (a, b) = (arg(a)?, arg(b)?);
                    grads[a] += g * inner.vals[b];
                    grads[b] += g * inner.vals[a];
                }
                Op::Div(a, b) => {
                    let (a, b) = (arg(a)?, arg(b)?);
                    let vb = inner.vals[b];
                    grads[a] += g / vb;
                    grads[b] -= g * inner.vals[i] / vb;
                }
                Op::Neg(a) => grads[arg(a)?] -= g,
                Op::Ln(a) => {
                    let a = arg(a)?;
                    grads[a] += g / inner.vals[a];
                }
                Op::Exp(a) => grads[arg(a)?] += g * inner.vals[i],
                Op::Sqrt(a) => grads[arg(a)?] += g / (2.0 * inner.vals[i]),
                Op::Tanh(a) => {
                    let y = inner.vals[i];
                    grads[arg(a)?] += g * (1.0 - y * y);
                }
                Op::Relu(a) => {
                    let a = arg(a)?;
                    if inner.vals[a] > 0.0 {
                        grads[a] += g;
                    }
                }
                Op::Abs(a) => {
                    let a = arg(a)?;
                    let v = inner.vals[a];
                    if v != 0.0 {
                        grads[a] += g * v.signum();
                    }
                }
                Op::LnGamma(a) => {
                    let a = arg(a)?;
                    grads[a] += g * statrs::function::gamma::digamma(inner.vals[a]);
                }
                Op::AddC(a) => grads[arg(a)?] += g,
                Op::MulC(a, c) => grads[arg(a)?] += g * c,
            }
        }
        Ok(grads.into())
    }
}

impl From<Vec<f64>> for Grads {
    fn from(v: Vec<f64>) -> Self {
        Grads(v)
    }
}

impl Var {
    pub fn value(&self) -> f64 {
        self.tape.inner.borrow().vals[self.idx as usize]
    }

    pub fn tape(&self) -> &Tape {
        &self.tape
    }

    fn unary(&self, val: f64, op: Op) -> Var {
        self.tape.push(val, op)
    }

    fn binary(&self, other: &Var, val: f64, op: Op) -> Var {
        debug_assert!(
            Rc::ptr_eq(&self.tape.inner, &other.tape.inner),
            "operands live on different tapes"
        );
        self.tape.push(val, op)
    }
}

/// Scalar interface shared by `f64` and [`Var`].
///
/// Generic forward code takes operands by reference and never constructs a
/// value from thin air, so it needs no handle to a tape; constants enter
/// through [`Real::add_c`] and [`Real::mul_c`].
pub trait Real: Clone {
    fn val(&self) -> f64;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn add_c(&self, c: f64) -> Self;
    fn mul_c(&self, c: f64) -> Self;
    fn ln(&self) -> Self;
    fn exp(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn tanh(&self) -> Self;
    fn relu(&self) -> Self;
    fn abs(&self) -> Self;
    fn ln_gamma(&self) -> Self;

    fn sq(&self) -> Self {
        self.mul(self)
    }
}

impl Real for f64 {
    fn val(&self) -> f64 {
        *self
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn add_c(&self, c: f64) -> Self {
        self + c
    }
    fn mul_c(&self, c: f64) -> Self {
        self * c
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn tanh(&self) -> Self {
        f64::tanh(*self)
    }
    fn relu(&self) -> Self {
        self.max(0.0)
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn ln_gamma(&self) -> Self {
        statrs::function::gamma::ln_gamma(*self)
    }
}

impl Real for Var {
    fn val(&self) -> f64 {
        self.value()
    }
    fn add(&self, o: &Self) -> Self {
        self.binary(o, self.value() + o.value(), Op::Add(self.idx, o.idx))
    }
    fn sub(&self, o: &Self) -> Self {
        self.binary(o, self.value() - o.value(), Op::Sub(self.idx, o.idx))
    }
    fn mul(&self, o: &Self) -> Self {
        self.binary(o, self.value() * o.value(), Op::Mul(self.idx, o.idx))
    }
    fn div(&self, o: &Self) -> Self {
        self.binary(o, self.value() / o.value(), Op::Div(self.idx, o.idx))
    }
    fn neg(&self) -> Self {
        self.unary(-self.value(), Op::Neg(self.idx))
    }
    fn add_c(&self, c: f64) -> Self {
        self.unary(self.value() + c, Op::AddC(self.idx))
    }
    fn mul_c(&self, c: f64) -> Self {
        self.unary(self.value() * c, Op::MulC(self.idx, c))
    }
    fn ln(&self) -> Self {
        self.unary(self.value().ln(), Op::Ln(self.idx))
    }
    fn exp(&self) -> Self {
        self.unary(self.value().exp(), Op::Exp(self.idx))
    }
    fn sqrt(&self) -> Self {
        self.unary(self.value().sqrt(), Op::Sqrt(self.idx))
    }
    fn tanh(&self) -> Self {
        self.unary(self.value().tanh(), Op::Tanh(self.idx))
    }
    fn relu(&self) -> Self {
        self.unary(self.value().max(0.0), Op::Relu(self.idx))
    }
    fn abs(&self) -> Self {
        self.unary(self.value().abs(), Op::Abs(self.idx))
    }
    fn ln_gamma(&self) -> Self {
        self.unary(
            statrs::function::gamma::ln_gamma(self.value()),
            Op::LnGamma(self.idx),
        )
    }
}

/// Sum of a non-empty slice.
pub fn sum<R: Real>(xs: &[R]) -> R {
    let mut acc = xs[0].clone();
    for x in &xs[1..] {
        acc = acc.add(x);
    }
    acc
}

/// Dot product of two equal-length non-empty slices.
pub fn dot<R: Real>(a: &[R], b: &[R]) -> R {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = a[0].mul(&b[0]);
    for (x, y) in a[1..].iter().zip(&b[1..]) {
        acc = acc.add(&x.mul(y));
    }
    acc
}
