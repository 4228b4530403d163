//! Reverse-mode differentiation over a recorded graph of dense matrix ops.
//!
//! Every node holds a row-major `Array2<f64>`; scalars are `1 x 1` nodes and a
//! batch of row vectors is an `n x k` node. Gradients of a scalar loss are
//! propagated backwards through the recorded ops in reverse insertion order,
//! which is a valid topological order because a node can only reference
//! nodes created before it.

use ndarray::{s, Array2, Axis, Zip};

use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param,
    /// `x · wᵀ` with `w` stored as `out x in`.
    MatMulT(Var, Var),
    /// `x + b` with `b` a `1 x k` row broadcast over the rows of `x`.
    AddRow(Var, Var),
    Affine(Var, Var, Var),
    Relu(Var),
    Tanh(Var),
    Exp(Var),
    Softplus(Var),
    Square(Var),
    Clamp(Var, f64, f64),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Minimum(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    /// Elementwise product with a constant, broadcast if the constant is `1 x k`.
    MulConst(Var, Array2<f64>),
    /// Elementwise sum with a constant; only the shape of `x` survives.
    AddConst(Var),
    /// Product of an `n x k` node with a `1 x 1` node.
    MulScalarVar(Var, Var),
    BroadcastRows(Var),
    ConcatCols(Var, Var),
    SumCols(Var),
    Mean(Var),
    Detach,
}

#[derive(Debug, Clone)]
struct Node {
    value: Array2<f64>,
    op: Op,
    requires_grad: bool,
}

/// Computation-graph record for one loss evaluation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    /// Value of a `1 x 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        let value = self.value(v);
        debug_assert_eq!(value.dim(), (1, 1));
        value[[0, 0]]
    }

    fn push(&mut self, value: Array2<f64>, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn req(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn unary(&mut self, x: Var, value: Array2<f64>, op: Op) -> Var {
        let req = self.req(x);
        self.push(value, op, req)
    }

    fn binary(&mut self, a: Var, b: Var, value: Array2<f64>, op: Op) -> Var {
        let req = self.req(a) || self.req(b);
        self.push(value, op, req)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Constant, false)
    }

    /// Leaf whose gradient is reported by [`Tape::backward`].
    pub fn param(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Param, true)
    }

    /// Copies the value of `x` into a new leaf that blocks gradient flow.
    pub fn detach(&mut self, x: Var) -> Var {
        let value = self.value(x).clone();
        self.push(value, Op::Detach, false)
    }

    pub fn matmul_t(&mut self, x: Var, w: Var) -> Var {
        let value = self.value(x).dot(&self.value(w).t());
        self.binary(x, w, value, Op::MatMulT(x, w))
    }

    /// `x·wᵀ + b` in one node, with `b` a `1 x out` row.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Var {
        let mut value = self.value(x).dot(&self.value(w).t());
        add_row_in_place(&mut value, self.value(b));
        let req = self.req(x) || self.req(w) || self.req(b);
        self.push(value, Op::Affine(x, w, b), req)
    }

    pub fn add_row(&mut self, x: Var, b: Var) -> Var {
        let mut value = self.value(x).clone();
        add_row_in_place(&mut value, self.value(b));
        self.binary(x, b, value, Op::AddRow(x, b))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x).mapv(|v| v.max(0.0));
        self.unary(x, value, Op::Relu(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let value = self.value(x).mapv(f64::tanh);
        self.unary(x, value, Op::Tanh(x))
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let value = self.value(x).mapv(f64::exp);
        self.unary(x, value, Op::Exp(x))
    }

    /// `ln(1 + e^x)`, evaluated without overflow.
    pub fn softplus(&mut self, x: Var) -> Var {
        let value = self.value(x).mapv(softplus);
        self.unary(x, value, Op::Softplus(x))
    }

    pub fn square(&mut self, x: Var) -> Var {
        let value = self.value(x).mapv(|v| v * v);
        self.unary(x, value, Op::Square(x))
    }

    /// Clamp into `[lo, hi]`; the gradient is zero where the bound is active.
    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        let value = self.value(x).mapv(|v| v.clamp(lo, hi));
        self.unary(x, value, Op::Clamp(x, lo, hi))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) + self.value(b);
        self.binary(a, b, value, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) - self.value(b);
        self.binary(a, b, value, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) * self.value(b);
        self.binary(a, b, value, Op::Mul(a, b))
    }

    /// Elementwise minimum; ties route the gradient to `a`.
    pub fn minimum(&mut self, a: Var, b: Var) -> Var {
        let mut value = self.value(a).clone();
        Zip::from(&mut value)
            .and(self.value(b))
            .for_each(|x, &y| *x = x.min(y));
        self.binary(a, b, value, Op::Minimum(a, b))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let value = self.value(x) * factor;
        self.unary(x, value, Op::Scale(x, factor))
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Var {
        let value = self.value(x) + c;
        self.unary(x, value, Op::AddScalar(x))
    }

    pub fn mul_const(&mut self, x: Var, c: Array2<f64>) -> Var {
        let value = self.value(x) * &c;
        self.unary(x, value, Op::MulConst(x, c))
    }

    pub fn add_const(&mut self, x: Var, c: &Array2<f64>) -> Var {
        let value = self.value(x) + c;
        self.unary(x, value, Op::AddConst(x))
    }

    pub fn mul_scalar_var(&mut self, x: Var, s: Var) -> Var {
        let value = self.value(x) * self.scalar(s);
        self.binary(x, s, value, Op::MulScalarVar(x, s))
    }

    /// Repeats a `1 x k` row `rows` times.
    pub fn broadcast_rows(&mut self, x: Var, rows: usize) -> Var {
        let row = self.value(x);
        debug_assert_eq!(row.nrows(), 1);
        let value = row
            .broadcast((rows, row.ncols()))
            .expect("row broadcast")
            .to_owned();
        self.unary(x, value, Op::BroadcastRows(x))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let value = ndarray::concatenate(Axis(1), &[self.value(a).view(), self.value(b).view()])
            .expect("concat_cols: row counts differ");
        self.binary(a, b, value, Op::ConcatCols(a, b))
    }

    /// Row sums as an `n x 1` column.
    pub fn sum_cols(&mut self, x: Var) -> Var {
        let value = self.value(x).sum_axis(Axis(1)).insert_axis(Axis(1));
        self.unary(x, value, Op::SumCols(x))
    }

    /// Mean over every entry as a `1 x 1` node.
    pub fn mean(&mut self, x: Var) -> Var {
        let value = Array2::from_elem((1, 1), self.value(x).mean().unwrap_or(0.0));
        self.unary(x, value, Op::Mean(x))
    }

    /// Reverse sweep from the scalar `loss`.
    ///
    /// Fails with [`Error::NonFiniteNode`] naming the earliest node holding a
    /// NaN or infinity when the loss itself is not finite.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let loss_value = self.value(loss);
        if loss_value.dim() != (1, 1) {
            return Err(Error::config(format!(
                "backward needs a 1x1 loss, got {:?}",
                loss_value.dim()
            )));
        }
        if !loss_value[[0, 0]].is_finite() {
            let node = self.nodes[..=loss.0]
                .iter()
                .position(|n| n.value.iter().any(|v| !v.is_finite()))
                .unwrap_or(loss.0);
            return Err(Error::NonFiniteNode { node });
        }

        let mut grads: Vec<Option<Array2<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Array2::ones((1, 1)));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let g = match grads[idx].take() {
                Some(g) => g,
                None => continue,
            };
            self.propagate(&node.op, &g, &mut grads);
            if matches!(node.op, Op::Param) {
                grads[idx] = Some(g);
            }
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, op: &Op, g: &Array2<f64>, grads: &mut [Option<Array2<f64>>]) {
        let mut send = |tape: &Tape, v: Var, contribution: Array2<f64>| {
            if !tape.req(v) {
                return;
            }
            match &mut grads[v.0] {
                Some(acc) => *acc += &contribution,
                slot @ None => *slot = Some(contribution),
            }
        };
        match op {
            Op::Constant | Op::Param | Op::Detach => {}
            Op::MatMulT(x, w) => {
                if self.req(*x) {
                    send(self, *x, g.dot(self.value(*w)));
                }
                if self.req(*w) {
                    send(self, *w, g.t().dot(self.value(*x)));
                }
            }
            Op::Affine(x, w, b) => {
                if self.req(*x) {
                    send(self, *x, g.dot(self.value(*w)));
                }
                if self.req(*w) {
                    send(self, *w, g.t().dot(self.value(*x)));
                }
                if self.req(*b) {
                    send(self, *b, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                }
            }
            Op::AddRow(x, b) => {
                send(self, *x, g.clone());
                if self.req(*b) {
                    send(self, *b, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                }
            }
            Op::Relu(x) => {
                let mut d = g.clone();
                Zip::from(&mut d)
                    .and(self.value(*x))
                    .for_each(|d, &v| {
                        if v <= 0.0 {
                            *d = 0.0;
                        }
                    });
                send(self, *x, d);
            }
            Op::Tanh(x) => {
                let mut d = g.clone();
                Zip::from(&mut d).and(self.value(*x)).for_each(|d, &v| {
                    let t = v.tanh();
                    *d *= 1.0 - t * t;
                });
                send(self, *x, d);
            }
            Op::Exp(x) => {
                let mut d = g.clone();
                Zip::from(&mut d)
                    .and(self.value(*x))
                    .for_each(|d, &v| *d *= v.exp());
                send(self, *x, d);
            }
            Op::Softplus(x) => {
                let mut d = g.clone();
                Zip::from(&mut d)
                    .and(self.value(*x))
                    .for_each(|d, &v| *d *= sigmoid(v));
                send(self, *x, d);
            }
            Op::Square(x) => {
                let mut d = g.clone();
                Zip::from(&mut d)
                    .and(self.value(*x))
                    .for_each(|d, &v| *d *= 2.0 * v);
                send(self, *x, d);
            }
            Op::Clamp(x, lo, hi) => {
                let mut d = g.clone();
                Zip::from(&mut d).and(self.value(*x)).for_each(|d, &v| {
                    if v < *lo || v > *hi {
                        *d = 0.0;
                    }
                });
                send(self, *x, d);
            }
            Op::Add(a, b) => {
                send(self, *a, g.clone());
                send(self, *b, g.clone());
            }
            Op::Sub(a, b) => {
                send(self, *a, g.clone());
                if self.req(*b) {
                    send(self, *b, -g);
                }
            }
            Op::Mul(a, b) => {
                if self.req(*a) {
                    send(self, *a, g * self.value(*b));
                }
                if self.req(*b) {
                    send(self, *b, g * self.value(*a));
                }
            }
            Op::Minimum(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let mut da = g.clone();
                let mut db = g.clone();
                Zip::from(&mut da)
                    .and(&mut db)
                    .and(va)
                    .and(vb)
                    .for_each(|da, db, &x, &y| {
                        if x <= y {
                            *db = 0.0;
                        } else {
                            *da = 0.0;
                        }
                    });
                send(self, *a, da);
                send(self, *b, db);
            }
            Op::Scale(x, factor) => send(self, *x, g * *factor),
            Op::AddScalar(x) | Op::AddConst(x) => send(self, *x, g.clone()),
            Op::MulConst(x, c) => send(self, *x, g * c),
            Op::MulScalarVar(x, s) => {
                if self.req(*x) {
                    send(self, *x, g * self.scalar(*s));
                }
                if self.req(*s) {
                    let total = (g * self.value(*x)).sum();
                    send(self, *s, Array2::from_elem((1, 1), total));
                }
            }
            Op::BroadcastRows(x) => send(self, *x, g.sum_axis(Axis(0)).insert_axis(Axis(0))),
            Op::ConcatCols(a, b) => {
                let split = self.value(*a).ncols();
                if self.req(*a) {
                    send(self, *a, g.slice(s![.., ..split]).to_owned());
                }
                if self.req(*b) {
                    send(self, *b, g.slice(s![.., split..]).to_owned());
                }
            }
            Op::SumCols(x) => {
                let shape = self.value(*x).dim();
                let d = g.broadcast(shape).expect("sum_cols grad").to_owned();
                send(self, *x, d);
            }
            Op::Mean(x) => {
                let shape = self.value(*x).dim();
                let n = (shape.0 * shape.1).max(1) as f64;
                send(self, *x, Array2::from_elem(shape, g[[0, 0]] / n));
            }
        }
    }
}

/// Gradients produced by one backward sweep.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    /// Gradient with respect to a parameter leaf. Parameters the loss does
    /// not depend on get an exact zero of the right shape.
    pub fn wrt(&self, tape: &Tape, v: Var) -> Array2<f64> {
        match self.grads.get(v.0) {
            Some(Some(g)) => g.clone(),
            _ => Array2::zeros(tape.value(v).dim()),
        }
    }

    /// Moves the gradient out without copying; zero if unreached.
    pub fn take(&mut self, tape: &Tape, v: Var) -> Array2<f64> {
        match self.grads.get_mut(v.0).and_then(Option::take) {
            Some(g) => g,
            None => Array2::zeros(tape.value(v).dim()),
        }
    }
}

/// `m[i, :] += row[0, :]` for every `i`. Much faster than a broadcasting
/// `+` for row-major data.
pub(crate) fn add_row_in_place(m: &mut Array2<f64>, row: &Array2<f64>) {
    debug_assert_eq!(row.nrows(), 1);
    let row = row.row(0);
    for mut r in m.rows_mut() {
        r += &row;
    }
}

pub(crate) fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}
