//! A small reverse-mode automatic differentiation tape over [`Tensor`]s.
//!
//! Every operation appends a node holding its forward value. [`Graph::backward`]
//! walks the nodes in reverse and returns the gradient of a scalar loss with
//! respect to every node; parameter gradients are then read out by [`ParamId`].
//!
//! Log-domain operations treat `-inf` as an absorbing zero: gradients flowing
//! through a `-inf` input of [`Graph::log_add_exp`] or [`Graph::log_sum_exp`]
//! are exactly zero, never NaN.

use super::params::ParamId;
use super::scalar::{log_add_exp, log_sum_exp_unchecked, sigmoid, softplus, HALF_LN_2PI, LOG_ZERO};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    LogSigmoid(Var),
    FlooredSoftplus(Var, f64),
    GaussLogpdf { x: Var, mu: Var, sigma: Var },
    LogAddExp(Var, Var),
    LogSumExp(Var),
    ShiftRows(Var, isize),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    ConcatCols(Var, Var),
    StackRows(Vec<Var>),
    GatherRows(Var, Vec<usize>),
    Reshape(Var),
    Element(Var, usize, usize),
    Sum(Var),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Constant => "constant",
            Op::Param(_) => "param",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::AddRow(..) => "add_row",
            Op::Scale(..) => "scale",
            Op::Tanh(_) => "tanh",
            Op::Sigmoid(_) => "sigmoid",
            Op::Relu(_) => "relu",
            Op::LogSigmoid(_) => "log_sigmoid",
            Op::FlooredSoftplus(..) => "floored_softplus",
            Op::GaussLogpdf { .. } => "gaussian_logpdf",
            Op::LogAddExp(..) => "log_add_exp",
            Op::LogSumExp(_) => "log_sum_exp",
            Op::ShiftRows(..) => "shift_rows",
            Op::SliceCols(..) => "slice_cols",
            Op::SliceRows(..) => "slice_rows",
            Op::ConcatCols(..) => "concat_cols",
            Op::StackRows(_) => "stack_rows",
            Op::GatherRows(..) => "gather_rows",
            Op::Reshape(_) => "reshape",
            Op::Element(..) => "element",
            Op::Sum(_) => "sum",
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Gradients of one scalar with respect to every node of a [`Graph`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    /// Parameter gradients in node order. A parameter bound more than once
    /// appears once per binding; callers accumulate.
    pub fn params<'a>(&'a self, graph: &'a Graph) -> impl Iterator<Item = (ParamId, &'a Tensor)> + 'a {
        graph.nodes.iter().enumerate().filter_map(move |(i, n)| match n.op {
            Op::Param(id) => self.grads[i].as_ref().map(|g| (id, g)),
            _ => None,
        })
    }
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let t = self.value(v);
        debug_assert_eq!(t.len(), 1);
        t.data()[0]
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant)
    }

    pub fn param(&mut self, id: ParamId, value: Tensor) -> Var {
        self.push(value, Op::Param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    fn zip(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.shape(), tb.shape(), "elementwise shape mismatch");
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(ta.rows(), ta.cols(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.zip(a, b, |x, y| x + y);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.zip(a, b, |x, y| x - y);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.zip(a, b, |x, y| x * y);
        self.push(v, Op::Mul(a, b))
    }

    /// `a (m×n) + row (1×n)` broadcast over rows.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (ta, tr) = (self.value(a), self.value(row));
        assert_eq!(tr.rows(), 1, "add_row expects a row vector");
        assert_eq!(ta.cols(), tr.cols(), "add_row width mismatch");
        let mut v = ta.clone();
        for r in 0..v.rows() {
            for (x, b) in v.row_mut(r).iter_mut().zip(tr.data()) {
                *x += b;
            }
        }
        self.push(v, Op::AddRow(a, row))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).map(|x| x * c);
        self.push(v, Op::Scale(a, c))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    /// `ln σ(a)`; use `log_sigmoid(scale(a, -1))` for `ln(1 - σ(a))`.
    pub fn log_sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| -softplus(-x));
        self.push(v, Op::LogSigmoid(a))
    }

    /// `max(softplus(a), floor)`; the subgradient on the clamped side is 0.
    pub fn floored_softplus(&mut self, a: Var, floor: f64) -> Var {
        let v = self.value(a).map(|x| softplus(x).max(floor));
        self.push(v, Op::FlooredSoftplus(a, floor))
    }

    /// Row-wise diagonal Gaussian log density. `mu` and `sigma` are `m×D`;
    /// `x` is either `m×D` or a single `1×D` row broadcast to every row.
    /// Returns `m×1`.
    pub fn gaussian_logpdf(&mut self, x: Var, mu: Var, sigma: Var) -> Var {
        let (tx, tm, ts) = (self.value(x), self.value(mu), self.value(sigma));
        assert_eq!(tm.shape(), ts.shape(), "gaussian mu/sigma shape mismatch");
        assert_eq!(tx.cols(), tm.cols(), "gaussian dimension mismatch");
        assert!(tx.rows() == 1 || tx.rows() == tm.rows(), "gaussian row mismatch");
        let mut out = Vec::with_capacity(tm.rows());
        for r in 0..tm.rows() {
            let xr = tx.row(if tx.rows() == 1 { 0 } else { r });
            let lp: f64 = xr
                .iter()
                .zip(tm.row(r))
                .zip(ts.row(r))
                .map(|((&x, &m), &s)| {
                    let z = (x - m) / s;
                    -HALF_LN_2PI - s.ln() - 0.5 * z * z
                })
                .sum();
            out.push(lp);
        }
        let v = Tensor::new(tm.rows(), 1, out);
        self.push(v, Op::GaussLogpdf { x, mu, sigma })
    }

    /// Elementwise `ln(exp(a) + exp(b))`.
    pub fn log_add_exp(&mut self, a: Var, b: Var) -> Var {
        let v = self.zip(a, b, log_add_exp);
        self.push(v, Op::LogAddExp(a, b))
    }

    /// `ln Σ exp` over all elements, producing a `1×1` value.
    pub fn log_sum_exp(&mut self, a: Var) -> Var {
        let v = Tensor::scalar(log_sum_exp_unchecked(self.value(a).data()));
        self.push(v, Op::LogSumExp(a))
    }

    /// `out[i] = a[i - k]`, with rows shifted in from outside filled with `fill`.
    pub fn shift_rows(&mut self, a: Var, k: isize, fill: f64) -> Var {
        let ta = self.value(a);
        let (rows, cols) = ta.shape();
        let mut v = Tensor::filled(rows, cols, fill);
        for i in 0..rows {
            let src = i as isize - k;
            if src >= 0 && (src as usize) < rows {
                v.row_mut(i).copy_from_slice(ta.row(src as usize));
            }
        }
        self.push(v, Op::ShiftRows(a, k))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let ta = self.value(a);
        assert!(start + len <= ta.cols(), "slice_cols out of range");
        let mut data = Vec::with_capacity(ta.rows() * len);
        for r in 0..ta.rows() {
            data.extend_from_slice(&ta.row(r)[start..start + len]);
        }
        let v = Tensor::new(ta.rows(), len, data);
        self.push(v, Op::SliceCols(a, start))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let ta = self.value(a);
        assert!(start + len <= ta.rows(), "slice_rows out of range");
        let c = ta.cols();
        let v = Tensor::new(len, c, ta.data()[start * c..(start + len) * c].to_vec());
        self.push(v, Op::SliceRows(a, start))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.rows(), tb.rows(), "concat_cols row mismatch");
        let mut data = Vec::with_capacity(ta.len() + tb.len());
        for r in 0..ta.rows() {
            data.extend_from_slice(ta.row(r));
            data.extend_from_slice(tb.row(r));
        }
        let v = Tensor::new(ta.rows(), ta.cols() + tb.cols(), data);
        self.push(v, Op::ConcatCols(a, b))
    }

    /// Stacks equally wide matrices on top of each other.
    pub fn stack_rows(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "stack_rows of nothing");
        let cols = self.value(parts[0]).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let t = self.value(p);
            assert_eq!(t.cols(), cols, "stack_rows width mismatch");
            data.extend_from_slice(t.data());
            rows += t.rows();
        }
        let v = Tensor::new(rows, cols, data);
        self.push(v, Op::StackRows(parts.to_vec()))
    }

    /// Row lookup, e.g. an embedding table indexed by symbol IDs.
    pub fn gather_rows(&mut self, table: Var, idx: &[usize]) -> Var {
        let t = self.value(table);
        let mut data = Vec::with_capacity(idx.len() * t.cols());
        for &i in idx {
            data.extend_from_slice(t.row(i));
        }
        let v = Tensor::new(idx.len(), t.cols(), data);
        self.push(v, Op::GatherRows(table, idx.to_vec()))
    }

    /// Reinterprets the row-major data with a new shape.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let t = self.value(a);
        assert_eq!(t.len(), rows * cols, "reshape size mismatch");
        let v = Tensor::new(rows, cols, t.data().to_vec());
        self.push(v, Op::Reshape(a))
    }

    pub fn element(&mut self, a: Var, r: usize, c: usize) -> Var {
        let v = Tensor::scalar(self.value(a).get(r, c));
        self.push(v, Op::Element(a, r, c))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Tensor::scalar(self.value(a).data().iter().sum());
        self.push(v, Op::Sum(a))
    }

    /// Sum of several `1×1` scalars.
    pub fn add_scalars(&mut self, parts: &[Var]) -> Var {
        let stacked = self.stack_rows(parts);
        self.sum(stacked)
    }

    /// First node whose value holds NaN or `+inf`, as `(index, op name)`.
    pub fn first_non_finite(&self) -> Option<(usize, &'static str)> {
        self.nodes
            .iter()
            .position(|n| n.value.has_nan_or_pos_inf())
            .map(|i| (i, self.nodes[i].op.name()))
    }

    /// Reverse pass from a `1×1` loss.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got {}x{}",
                lv.rows(),
                lv.cols()
            )));
        }
        if !lv.data()[0].is_finite() {
            let diag = match self.first_non_finite() {
                Some((i, name)) => format!("first non-finite node #{i} ({name})"),
                None => format!("loss node #{} is {}", loss.0, lv.data()[0]),
            };
            return Err(Error::Numerical(format!("non-finite loss: {diag}")));
        }

        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            self.propagate(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        grads.resize(self.nodes.len(), None);
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        fn acc(grads: &mut [Option<Tensor>], v: Var, d: Tensor) {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&d),
                slot => *slot = Some(d),
            }
        }
        let out = &node.value;
        let elementwise = |a: Var, f: &dyn Fn(f64, f64, f64) -> f64| {
            // f(upstream, input, output)
            let x = self.value(a);
            let data = g
                .data()
                .iter()
                .zip(x.data())
                .zip(out.data())
                .map(|((&gi, &xi), &yi)| f(gi, xi, yi))
                .collect();
            Tensor::new(x.rows(), x.cols(), data)
        };

        match &node.op {
            Op::Constant | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                acc(grads, *a, g.matmul_bt(tb));
                acc(grads, *b, ta.matmul_at(g));
            }
            Op::Add(a, b) => {
                acc(grads, *a, g.clone());
                acc(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(grads, *a, g.clone());
                acc(grads, *b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let da = g.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
                let db = g.data().iter().zip(ta.data()).map(|(x, y)| x * y).collect();
                acc(grads, *a, Tensor::new(ta.rows(), ta.cols(), da));
                acc(grads, *b, Tensor::new(tb.rows(), tb.cols(), db));
            }
            Op::AddRow(a, row) => {
                acc(grads, *a, g.clone());
                let mut dr = Tensor::zeros(1, g.cols());
                for r in 0..g.rows() {
                    for (d, x) in dr.data_mut().iter_mut().zip(g.row(r)) {
                        *d += x;
                    }
                }
                acc(grads, *row, dr);
            }
            Op::Scale(a, c) => acc(grads, *a, g.map(|x| x * c)),
            Op::Tanh(a) => acc(grads, *a, elementwise(*a, &|gi, _, y| gi * (1.0 - y * y))),
            Op::Sigmoid(a) => acc(grads, *a, elementwise(*a, &|gi, _, y| gi * y * (1.0 - y))),
            Op::Relu(a) => acc(grads, *a, elementwise(*a, &|gi, x, _| if x > 0.0 { gi } else { 0.0 })),
            Op::LogSigmoid(a) => acc(grads, *a, elementwise(*a, &|gi, x, _| gi * sigmoid(-x))),
            Op::FlooredSoftplus(a, floor) => {
                let floor = *floor;
                acc(
                    grads,
                    *a,
                    elementwise(*a, &|gi, x, _| if softplus(x) > floor { gi * sigmoid(x) } else { 0.0 }),
                )
            }
            Op::GaussLogpdf { x, mu, sigma } => {
                let (tx, tm, ts) = (self.value(*x), self.value(*mu), self.value(*sigma));
                let (rows, cols) = tm.shape();
                let mut dx = Tensor::zeros(tx.rows(), cols);
                let mut dm = Tensor::zeros(rows, cols);
                let mut ds = Tensor::zeros(rows, cols);
                for r in 0..rows {
                    let gr = g.get(r, 0);
                    if gr == 0.0 {
                        continue;
                    }
                    let xr_idx = if tx.rows() == 1 { 0 } else { r };
                    for c in 0..cols {
                        let s = ts.get(r, c);
                        let diff = tx.get(xr_idx, c) - tm.get(r, c);
                        let inv_var = 1.0 / (s * s);
                        let dmu = gr * diff * inv_var;
                        dm.set(r, c, dmu);
                        let cur = dx.get(xr_idx, c);
                        dx.set(xr_idx, c, cur - dmu);
                        ds.set(r, c, gr * (diff * diff * inv_var - 1.0) / s);
                    }
                }
                acc(grads, *x, dx);
                acc(grads, *mu, dm);
                acc(grads, *sigma, ds);
            }
            Op::LogAddExp(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let weight = |inp: f64, y: f64, gi: f64| {
                    if inp == LOG_ZERO || y == LOG_ZERO || gi == 0.0 {
                        0.0
                    } else {
                        gi * (inp - y).exp()
                    }
                };
                let mut da = Vec::with_capacity(g.len());
                let mut db = Vec::with_capacity(g.len());
                for i in 0..g.len() {
                    let (gi, y) = (g.data()[i], out.data()[i]);
                    da.push(weight(ta.data()[i], y, gi));
                    db.push(weight(tb.data()[i], y, gi));
                }
                acc(grads, *a, Tensor::new(ta.rows(), ta.cols(), da));
                acc(grads, *b, Tensor::new(tb.rows(), tb.cols(), db));
            }
            Op::LogSumExp(a) => {
                let ta = self.value(*a);
                let y = out.data()[0];
                let gi = g.data()[0];
                let d = ta.map(|x| {
                    if x == LOG_ZERO || y == LOG_ZERO || gi == 0.0 {
                        0.0
                    } else {
                        gi * (x - y).exp()
                    }
                });
                acc(grads, *a, d);
            }
            Op::ShiftRows(a, k) => {
                let rows = g.rows();
                let mut d = Tensor::zeros(rows, g.cols());
                for i in 0..rows {
                    let src = i as isize - k;
                    if src >= 0 && (src as usize) < rows {
                        d.row_mut(src as usize).copy_from_slice(g.row(i));
                    }
                }
                acc(grads, *a, d);
            }
            Op::SliceCols(a, start) => {
                let ta = self.value(*a);
                let mut d = Tensor::zeros(ta.rows(), ta.cols());
                for r in 0..g.rows() {
                    d.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                }
                acc(grads, *a, d);
            }
            Op::SliceRows(a, start) => {
                let ta = self.value(*a);
                let mut d = Tensor::zeros(ta.rows(), ta.cols());
                let c = ta.cols();
                d.data_mut()[start * c..start * c + g.len()].copy_from_slice(g.data());
                acc(grads, *a, d);
            }
            Op::ConcatCols(a, b) => {
                let (ca, cb) = (self.value(*a).cols(), self.value(*b).cols());
                let mut da = Vec::with_capacity(g.rows() * ca);
                let mut db = Vec::with_capacity(g.rows() * cb);
                for r in 0..g.rows() {
                    let row = g.row(r);
                    da.extend_from_slice(&row[..ca]);
                    db.extend_from_slice(&row[ca..]);
                }
                acc(grads, *a, Tensor::new(g.rows(), ca, da));
                acc(grads, *b, Tensor::new(g.rows(), cb, db));
            }
            Op::StackRows(parts) => {
                let c = g.cols();
                let mut offset = 0;
                for &p in parts {
                    let rows = self.value(p).rows();
                    let d = Tensor::new(rows, c, g.data()[offset * c..(offset + rows) * c].to_vec());
                    acc(grads, p, d);
                    offset += rows;
                }
            }
            Op::GatherRows(table, idx) => {
                let t = self.value(*table);
                let mut d = Tensor::zeros(t.rows(), t.cols());
                for (r, &i) in idx.iter().enumerate() {
                    for (x, y) in d.row_mut(i).iter_mut().zip(g.row(r)) {
                        *x += y;
                    }
                }
                acc(grads, *table, d);
            }
            Op::Reshape(a) => {
                let t = self.value(*a);
                acc(grads, *a, Tensor::new(t.rows(), t.cols(), g.data().to_vec()));
            }
            Op::Element(a, r, c) => {
                let t = self.value(*a);
                let mut d = Tensor::zeros(t.rows(), t.cols());
                d.set(*r, *c, g.data()[0]);
                acc(grads, *a, d);
            }
            Op::Sum(a) => {
                let t = self.value(*a);
                acc(grads, *a, Tensor::filled(t.rows(), t.cols(), g.data()[0]));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(g: &mut Graph, rows: usize, cols: usize, data: Vec<f64>) -> Var {
        g.param(ParamId::new(0), Tensor::new(rows, cols, data))
    }

    /// Central finite differences of `f` at `x`.
    fn finite_diff(x: &Tensor, f: &dyn Fn(&Tensor) -> f64) -> Vec<f64> {
        let eps = 1e-6;
        (0..x.len())
            .map(|i| {
                let mut p = x.clone();
                p.data_mut()[i] += eps;
                let mut m = x.clone();
                m.data_mut()[i] -= eps;
                (f(&p) - f(&m)) / (2.0 * eps)
            })
            .collect()
    }

    fn check(x: Tensor, build: &dyn Fn(&mut Graph, Var) -> Var) {
        let eval = |t: &Tensor| {
            let mut g = Graph::new();
            let v = leaf(&mut g, t.rows(), t.cols(), t.data().to_vec());
            let out = build(&mut g, v);
            g.scalar(out)
        };
        let mut g = Graph::new();
        let v = leaf(&mut g, x.rows(), x.cols(), x.data().to_vec());
        let out = build(&mut g, v);
        let grads = g.backward(out).unwrap();
        let analytic = grads.wrt(v).unwrap();
        let numeric = finite_diff(&x, &eval);
        for (a, n) in analytic.data().iter().zip(&numeric) {
            assert!((a - n).abs() < 1e-6 * (1.0 + n.abs()), "{a} vs {n}");
        }
    }

    #[test]
    fn square_gradient() {
        let mut g = Graph::new();
        let t = leaf(&mut g, 1, 1, vec![3.0]);
        let sq = g.mul(t, t);
        let grads = g.backward(sq).unwrap();
        assert_eq!(grads.wrt(t).unwrap().data(), &[6.0]);
    }

    #[test]
    fn log_add_exp_with_zero_branch_passes_through() {
        let mut g = Graph::new();
        let t = leaf(&mut g, 1, 1, vec![1.0]);
        let z = g.constant(Tensor::scalar(LOG_ZERO));
        let l = g.log_add_exp(t, z);
        assert_eq!(g.scalar(l), 1.0);
        let grads = g.backward(l).unwrap();
        assert_eq!(grads.wrt(t).unwrap().data(), &[1.0]);
        assert_eq!(grads.wrt(z).unwrap().data(), &[0.0]);
    }

    #[test]
    fn log_sum_exp_gradient_is_softmax_and_zero_for_neg_inf() {
        let mut g = Graph::new();
        let t = leaf(&mut g, 1, 3, vec![0.0, LOG_ZERO, 0.0]);
        let l = g.log_sum_exp(t);
        let grads = g.backward(l).unwrap();
        assert_eq!(grads.wrt(t).unwrap().data(), &[0.5, 0.0, 0.5]);
    }

    #[test]
    fn all_neg_inf_gives_zero_gradient_not_nan() {
        let mut g = Graph::new();
        let t = leaf(&mut g, 1, 2, vec![LOG_ZERO, LOG_ZERO]);
        let l = g.log_sum_exp(t);
        let other = leaf(&mut g, 1, 1, vec![2.0]);
        let l2 = g.log_add_exp(l, other);
        let grads = g.backward(l2).unwrap();
        assert_eq!(grads.wrt(t).unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn non_finite_loss_is_reported() {
        let mut g = Graph::new();
        let t = leaf(&mut g, 1, 1, vec![LOG_ZERO]);
        let s = g.sum(t);
        let err = g.backward(s).err().unwrap();
        assert!(matches!(err, Error::Numerical(_)));
        let mut g = Graph::new();
        let t = leaf(&mut g, 1, 1, vec![f64::NAN]);
        let s = g.sum(t);
        let msg = g.backward(s).err().unwrap().to_string();
        assert!(msg.contains("#0"), "{msg}");
    }

    #[test]
    fn composite_ops_match_finite_differences() {
        let x = Tensor::new(2, 3, vec![0.3, -0.7, 1.1, 0.2, 0.5, -1.3]);
        check(x.clone(), &|g, v| {
            let w = g.constant(Tensor::new(3, 2, vec![0.5, -1.0, 0.25, 2.0, -0.3, 0.7]));
            let h = g.matmul(v, w);
            let t = g.tanh(h);
            let s = g.sigmoid(v);
            let ls = g.log_sigmoid(v);
            let sp = g.floored_softplus(v, 0.001);
            let a = g.add(s, ls);
            let b = g.mul(a, sp);
            let c = g.sum(b);
            let d = g.sum(t);
            let r = g.relu(v);
            let e = g.sum(r);
            let f = g.add_scalars(&[c, d, e]);
            g.scale(f, 0.5)
        });
        check(x.clone(), &|g, v| {
            let row = g.slice_rows(v, 1, 1);
            let m = g.add_row(v, row);
            let sh = g.shift_rows(m, 1, LOG_ZERO);
            let l = g.log_add_exp(sh, m);
            let cat = g.concat_cols(l, v);
            let sl = g.slice_cols(cat, 2, 3);
            let st = g.stack_rows(&[sl, v]);
            let rs = g.reshape(st, 3, 4);
            let gat = g.gather_rows(rs, &[2, 0, 2]);
            let e = g.element(gat, 1, 3);
            let lse = g.log_sum_exp(gat);
            g.add(e, lse)
        });
        check(x, &|g, v| {
            let mu = g.slice_cols(v, 0, 2);
            let sraw = g.slice_cols(v, 1, 2);
            let sigma = g.floored_softplus(sraw, 0.001);
            let xrow = g.constant(Tensor::row_vector(vec![0.4, -0.2]));
            let lp = g.gaussian_logpdf(xrow, mu, sigma);
            let xfull = g.slice_cols(v, 0, 2);
            let lp2 = g.gaussian_logpdf(xfull, sigma, sigma);
            let sub = g.sub(lp, lp2);
            g.sum(sub)
        });
    }
}
