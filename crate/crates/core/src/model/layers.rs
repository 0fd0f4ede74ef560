use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::numerics::{Graph, ParamId, ParamStore, Tensor, Var};

/// Glorot-uniform matrix.
pub(crate) fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    uniform(rows, cols, bound, rng)
}

pub(crate) fn uniform(rows: usize, cols: usize, bound: f64, rng: &mut impl Rng) -> Tensor {
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    Tensor::new(rows, cols, (0..rows * cols).map(|_| dist.sample(rng)).collect())
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let w = store.add(format!("{name}.w"), glorot(fan_in, fan_out, rng));
        let b = store.add(format!("{name}.b"), Tensor::zeros(1, fan_out));
        Linear { w, b }
    }

    pub fn bind(&self, store: &ParamStore, g: &mut Graph) -> BoundLinear {
        BoundLinear {
            w: store.bind(g, self.w),
            b: store.bind(g, self.b),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct BoundLinear {
    pub w: Var,
    pub b: Var,
}

impl BoundLinear {
    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let h = g.matmul(x, self.w);
        g.add_row(h, self.b)
    }
}

/// LSTM cell with gate order (input, forget, candidate, output).
#[derive(Clone, Copy, Debug)]
pub(crate) struct Lstm {
    pub wx: ParamId,
    pub wh: ParamId,
    pub b: ParamId,
    pub hidden: usize,
}

impl Lstm {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let wx = store.add(format!("{name}.wx"), uniform(input, 4 * hidden, bound, rng));
        let wh = store.add(format!("{name}.wh"), uniform(hidden, 4 * hidden, bound, rng));
        let b = store.add(format!("{name}.b"), Tensor::zeros(1, 4 * hidden));
        Lstm { wx, wh, b, hidden }
    }

    pub fn bind(&self, store: &ParamStore, g: &mut Graph) -> BoundLstm {
        BoundLstm {
            wx: store.bind(g, self.wx),
            wh: store.bind(g, self.wh),
            b: store.bind(g, self.b),
            hidden: self.hidden,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct BoundLstm {
    pub wx: Var,
    pub wh: Var,
    pub b: Var,
    pub hidden: usize,
}

impl BoundLstm {
    /// One step on a `1×input` row; returns the new `(h, c)`.
    pub fn step(&self, g: &mut Graph, x: Var, h: Var, c: Var) -> (Var, Var) {
        let n = self.hidden;
        let xi = g.matmul(x, self.wx);
        let hh = g.matmul(h, self.wh);
        let pre = g.add(xi, hh);
        let gates = g.add_row(pre, self.b);
        let i_pre = g.slice_cols(gates, 0, n);
        let f_pre = g.slice_cols(gates, n, n);
        let c_pre = g.slice_cols(gates, 2 * n, n);
        let o_pre = g.slice_cols(gates, 3 * n, n);
        let i = g.sigmoid(i_pre);
        let f = g.sigmoid(f_pre);
        let cand = g.tanh(c_pre);
        let o = g.sigmoid(o_pre);
        let keep = g.mul(f, c);
        let write = g.mul(i, cand);
        let c_new = g.add(keep, write);
        let c_act = g.tanh(c_new);
        let h_new = g.mul(o, c_act);
        (h_new, c_new)
    }

    pub fn zero_state(&self, g: &mut Graph) -> (Var, Var) {
        let h = g.constant(Tensor::zeros(1, self.hidden));
        let c = g.constant(Tensor::zeros(1, self.hidden));
        (h, c)
    }
}
