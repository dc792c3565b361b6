use super::tensor::{matmul_into, Tensor};
use crate::error::{shape_err, Error, Result};

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Operation kinds understood by the engine. The set is closed: every node on
/// a tape is one of these, so a graph can never contain an op without a
/// backward rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op {
    Leaf,
    MatMul(Var, Var),
    AddRow(Var, Var),
    BroadcastRows(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Min(Var, Var),
    Neg(Var),
    Scale(Var, f64),
    Shift(Var, f64),
    Tanh(Var),
    Exp(Var),
    Ln(Var),
    Sqrt(Var),
    Square(Var),
    ClampMin(Var, f64),
    Clamp(Var, f64, f64),
    Sum(Var),
    Mean(Var),
    SumRows(Var),
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Tensor,
    needs_grad: bool,
}

/// Append-only record of a computation, replayed in reverse by
/// [`Tape::backward`].
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Adjoints produced by one backward pass.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
    visits: usize,
}

impl Gradients {
    /// Adjoint of `var`, or `None` when the root does not depend on it.
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    /// Adjoint of `var`; zeros when the root does not depend on it.
    pub fn wrt(&self, var: Var) -> Tensor {
        self.get(var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(&self.shapes[var.0]))
    }

    /// Number of nodes whose adjoint was propagated.
    pub fn visits(&self) -> usize {
        self.visits
    }
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

    /// Drops every recorded node so the tape can be reused.
    pub fn reset(&mut self) {
        self.nodes.clear();
        self.consumed = false;
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn op(&self, v: Var) -> Op {
        self.nodes[v.0].op
    }

    /// Records a leaf whose gradient is wanted.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.push(Op::Leaf, t, true)
    }

    /// Records a leaf treated as a constant.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(Op::Leaf, t, false)
    }

    fn push(&mut self, op: Op, value: Tensor, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn unary(&mut self, x: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let src = &self.nodes[x.0].value;
        let data = src.data().iter().map(|&v| f(v)).collect();
        let t = Tensor::from_parts(src.shape().to_vec(), data);
        let ng = self.ng(x);
        self.push(op, t, ng)
    }

    fn binary(&mut self, a: Var, b: Var, name: &'static str, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if ta.shape() != tb.shape() {
            return Err(shape_err(name, format!("{:?} vs {:?}", ta.shape(), tb.shape())));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let t = Tensor::from_parts(ta.shape().to_vec(), data);
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(op, t, ng))
    }

    /// `(B, I) x (I, O) -> (B, O)`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let (rows, inner) = match ta.shape() {
            [r, i] => (*r, *i),
            s => return Err(shape_err("matmul", format!("lhs must be 2-D, got {s:?}"))),
        };
        let cols = match tb.shape() {
            [i, o] if *i == inner => *o,
            s => return Err(shape_err("matmul", format!("lhs {:?} incompatible with rhs {s:?}", ta.shape()))),
        };
        let data = matmul_into(ta.data(), tb.data(), rows, inner, cols);
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Op::MatMul(a, b), Tensor::from_parts(vec![rows, cols], data), ng))
    }

    /// Adds a length-`O` bias to every row of a `(B, O)` matrix.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[bias.0].value);
        let cols = match (ta.shape(), tb.shape()) {
            ([_, c], [o]) if c == o => *c,
            (sa, sb) => return Err(shape_err("add_row", format!("{sa:?} + {sb:?}"))),
        };
        let mut data = ta.data().to_vec();
        for row in data.chunks_mut(cols) {
            for (x, &b) in row.iter_mut().zip(tb.data()) {
                *x += b;
            }
        }
        let ng = self.ng(a) || self.ng(bias);
        Ok(self.push(Op::AddRow(a, bias), Tensor::from_parts(ta.shape().to_vec(), data), ng))
    }

    /// Repeats a length-`C` vector into a `(rows, C)` matrix.
    pub fn broadcast_rows(&mut self, v: Var, rows: usize) -> Result<Var> {
        let tv = &self.nodes[v.0].value;
        let cols = match tv.shape() {
            [c] => *c,
            s => return Err(shape_err("broadcast_rows", format!("expected 1-D, got {s:?}"))),
        };
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend_from_slice(tv.data());
        }
        let ng = self.ng(v);
        Ok(self.push(Op::BroadcastRows(v), Tensor::from_parts(vec![rows, cols], data), ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "add", Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "sub", Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "mul", Op::Mul(a, b), |x, y| x * y)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "div", Op::Div(a, b), |x, y| x / y)
    }

    /// Elementwise minimum; ties route the gradient to `a`.
    pub fn min(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "min", Op::Min(a, b), |x, y| if x <= y { x } else { y })
    }

    pub fn neg(&mut self, x: Var) -> Var {
        self.unary(x, Op::Neg(x), |v| -v)
    }

    pub fn scale(&mut self, x: Var, k: f64) -> Var {
        self.unary(x, Op::Scale(x, k), |v| v * k)
    }

    pub fn shift(&mut self, x: Var, k: f64) -> Var {
        self.unary(x, Op::Shift(x, k), |v| v + k)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, Op::Tanh(x), f64::tanh)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(x, Op::Exp(x), f64::exp)
    }

    pub fn ln(&mut self, x: Var) -> Var {
        self.unary(x, Op::Ln(x), f64::ln)
    }

    /// Square root whose derivative at 0 is taken as 0.
    pub fn sqrt(&mut self, x: Var) -> Var {
        self.unary(x, Op::Sqrt(x), f64::sqrt)
    }

    pub fn square(&mut self, x: Var) -> Var {
        self.unary(x, Op::Square(x), |v| v * v)
    }

    /// `max(x, lo)`; no gradient where the floor is active.
    pub fn clamp_min(&mut self, x: Var, lo: f64) -> Var {
        self.unary(x, Op::ClampMin(x, lo), |v| if v > lo { v } else { lo })
    }

    /// Clamp into `[lo, hi]`; gradient passes on the closed interval.
    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        self.unary(x, Op::Clamp(x, lo, hi), |v| v.max(lo).min(hi))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.nodes[x.0].value.data().iter().sum();
        let ng = self.ng(x);
        self.push(Op::Sum(x), Tensor::scalar(s), ng)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let t = &self.nodes[x.0].value;
        let m = t.data().iter().sum::<f64>() / t.len() as f64;
        let ng = self.ng(x);
        self.push(Op::Mean(x), Tensor::scalar(m), ng)
    }

    /// `(B, C) -> (B)` by summing each row.
    pub fn sum_rows(&mut self, x: Var) -> Result<Var> {
        let t = &self.nodes[x.0].value;
        let (rows, cols) = match t.shape() {
            [r, c] => (*r, *c),
            s => return Err(shape_err("sum_rows", format!("expected 2-D, got {s:?}"))),
        };
        let data = t.data().chunks(cols.max(1)).take(rows).map(|r| r.iter().sum()).collect();
        let ng = self.ng(x);
        Ok(self.push(Op::SumRows(x), Tensor::from_parts(vec![rows], data), ng))
    }

    /// Reverse sweep from a scalar `root`. A tape supports one sweep; call
    /// [`Tape::reset`] before recording a new graph.
    pub fn backward(&mut self, root: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(Error::TapeConsumed);
        }
        let rv = &self.nodes[root.0].value;
        if rv.len() != 1 {
            return Err(Error::NonScalarRoot(rv.shape().to_vec()));
        }
        self.consumed = true;

        let n = root.0 + 1;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        grads[root.0] = Some(vec![1.0]);
        let mut visits = 0;

        for i in (0..n).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if node.needs_grad {
                visits += 1;
                self.propagate(i, &g, &mut grads);
            }
            grads[i] = Some(g);
        }

        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        let mut out: Vec<Option<Tensor>> = grads
            .into_iter()
            .enumerate()
            .map(|(i, g)| g.map(|d| Tensor::from_parts(self.nodes[i].value.shape().to_vec(), d)))
            .collect();
        out.resize(self.nodes.len(), None);
        Ok(Gradients {
            grads: out,
            shapes,
            visits,
        })
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let y = node.value.data();
        let val = |v: Var| self.nodes[v.0].value.data();

        // Accumulate `contrib` into the adjoint of `v` if it wants one.
        let mut acc = |v: Var, contrib: &dyn Fn(usize) -> f64| {
            if !self.nodes[v.0].needs_grad {
                return;
            }
            let len = self.nodes[v.0].value.len();
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; len]);
            for (k, s) in slot.iter_mut().enumerate() {
                *s += contrib(k);
            }
        };

        match node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                let (rows, inner) = (ta.shape()[0], ta.shape()[1]);
                let cols = tb.shape()[1];
                if self.nodes[a.0].needs_grad {
                    // dA = dY · Bᵀ
                    let mut da = vec![0.0; rows * inner];
                    for r in 0..rows {
                        let grow = &g[r * cols..(r + 1) * cols];
                        for k in 0..inner {
                            let brow = &tb.data()[k * cols..(k + 1) * cols];
                            da[r * inner + k] = grow.iter().zip(brow).map(|(x, y)| x * y).sum();
                        }
                    }
                    acc(a, &|k| da[k]);
                }
                if self.nodes[b.0].needs_grad {
                    // dB = Aᵀ · dY
                    let mut db = vec![0.0; inner * cols];
                    for r in 0..rows {
                        let grow = &g[r * cols..(r + 1) * cols];
                        for k in 0..inner {
                            let a_rk = ta.data()[r * inner + k];
                            if a_rk == 0.0 {
                                continue;
                            }
                            for (d, &gv) in db[k * cols..(k + 1) * cols].iter_mut().zip(grow) {
                                *d += a_rk * gv;
                            }
                        }
                    }
                    acc(b, &|k| db[k]);
                }
            }
            Op::AddRow(a, bias) => {
                acc(a, &|k| g[k]);
                let cols = self.nodes[bias.0].value.len();
                let mut db = vec![0.0; cols];
                for row in g.chunks(cols) {
                    for (d, &gv) in db.iter_mut().zip(row) {
                        *d += gv;
                    }
                }
                acc(bias, &|k| db[k]);
            }
            Op::BroadcastRows(v) => {
                let cols = self.nodes[v.0].value.len();
                let mut dv = vec![0.0; cols];
                for row in g.chunks(cols) {
                    for (d, &gv) in dv.iter_mut().zip(row) {
                        *d += gv;
                    }
                }
                acc(v, &|k| dv[k]);
            }
            Op::Add(a, b) => {
                acc(a, &|k| g[k]);
                acc(b, &|k| g[k]);
            }
            Op::Sub(a, b) => {
                acc(a, &|k| g[k]);
                acc(b, &|k| -g[k]);
            }
            Op::Mul(a, b) => {
                let (va, vb) = (val(a), val(b));
                acc(a, &|k| g[k] * vb[k]);
                acc(b, &|k| g[k] * va[k]);
            }
            Op::Div(a, b) => {
                let (va, vb) = (val(a), val(b));
                acc(a, &|k| g[k] / vb[k]);
                acc(b, &|k| -g[k] * va[k] / (vb[k] * vb[k]));
            }
            Op::Min(a, b) => {
                let (va, vb) = (val(a), val(b));
                acc(a, &|k| if va[k] <= vb[k] { g[k] } else { 0.0 });
                acc(b, &|k| if va[k] <= vb[k] { 0.0 } else { g[k] });
            }
            Op::Neg(x) => acc(x, &|k| -g[k]),
            Op::Scale(x, s) => acc(x, &|k| g[k] * s),
            Op::Shift(x, _) => acc(x, &|k| g[k]),
            Op::Tanh(x) => acc(x, &|k| g[k] * (1.0 - y[k] * y[k])),
            Op::Exp(x) => acc(x, &|k| g[k] * y[k]),
            Op::Ln(x) => {
                let vx = val(x);
                acc(x, &|k| g[k] / vx[k]);
            }
            Op::Sqrt(x) => acc(x, &|k| if y[k] > 0.0 { g[k] / (2.0 * y[k]) } else { 0.0 }),
            Op::Square(x) => {
                let vx = val(x);
                acc(x, &|k| 2.0 * g[k] * vx[k]);
            }
            Op::ClampMin(x, lo) => {
                let vx = val(x);
                acc(x, &|k| if vx[k] > lo { g[k] } else { 0.0 });
            }
            Op::Clamp(x, lo, hi) => {
                let vx = val(x);
                acc(x, &|k| if vx[k] >= lo && vx[k] <= hi { g[k] } else { 0.0 });
            }
            Op::Sum(x) => acc(x, &|_| g[0]),
            Op::Mean(x) => {
                let n = self.nodes[x.0].value.len() as f64;
                acc(x, &|_| g[0] / n);
            }
            Op::SumRows(x) => {
                let cols = self.nodes[x.0].value.shape()[1];
                acc(x, &|k| g[k / cols.max(1)]);
            }
        }
    }
}

/// Gradient of a scalar function of tensors, evaluated at `at`.
///
/// `f` records its computation on a fresh tape, receiving one [`Var`] per
/// input, and returns the scalar output node.
pub fn grad<F>(f: F, at: &[Tensor]) -> Result<Vec<Tensor>>
where
    F: FnOnce(&mut Tape, &[Var]) -> Result<Var>,
{
    if at.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("grad input"));
    }
    let mut tape = Tape::new();
    let inputs: Vec<Var> = at.iter().cloned().map(|t| tape.param(t)).collect();
    let out = f(&mut tape, &inputs)?;
    let grads = tape.backward(out)?;
    Ok(inputs.iter().map(|&v| grads.wrt(v)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_derivative() {
        let g = grad(|t, x| Ok(t.square(x[0])), &[Tensor::scalar(3.0)]).unwrap();
        assert_eq!(g[0].item(), Some(6.0));
    }

    #[test]
    fn tanh_at_zero() {
        let x = Tensor::vector(vec![0.0, 0.0]).unwrap();
        let g = grad(
            |t, x| {
                let h = t.tanh(x[0]);
                Ok(t.sum(h))
            },
            &[x],
        )
        .unwrap();
        assert_eq!(g[0].data(), &[1.0, 1.0]);
    }

    #[test]
    fn non_scalar_root_is_rejected() {
        let x = Tensor::vector(vec![1.0, 2.0]).unwrap();
        let err = grad(|t, x| Ok(t.exp(x[0])), &[x]).unwrap_err();
        assert_eq!(err, Error::NonScalarRoot(vec![2]));
    }

    #[test]
    fn second_backward_needs_reset() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(2.0));
        let y = tape.square(x);
        tape.backward(y).unwrap();
        assert_eq!(tape.backward(y).unwrap_err(), Error::TapeConsumed);
        tape.reset();
        let x = tape.param(Tensor::scalar(2.0));
        let y = tape.square(x);
        assert!(tape.backward(y).is_ok());
    }

    #[test]
    fn each_node_visited_once() {
        // x used three times: every node on the path is swept exactly once.
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(0.7));
        let a = tape.exp(x);
        let b = tape.mul(a, x).unwrap();
        let c = tape.add(b, x).unwrap();
        let gs = tape.backward(c).unwrap();
        assert_eq!(gs.visits(), tape.len());
        let xv: f64 = 0.7;
        let expected = xv.exp() + xv * xv.exp() + 1.0;
        assert!((gs.wrt(x).item().unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn constants_receive_no_adjoint() {
        let mut tape = Tape::new();
        let c = tape.constant(Tensor::scalar(2.0));
        let x = tape.param(Tensor::scalar(3.0));
        let y = tape.mul(c, x).unwrap();
        let gs = tape.backward(y).unwrap();
        assert!(gs.get(c).is_none());
        assert_eq!(gs.wrt(x).item(), Some(2.0));
    }

    #[test]
    fn sqrt_at_zero_has_zero_slope() {
        let g = grad(|t, x| Ok(t.sqrt(x[0])), &[Tensor::scalar(0.0)]).unwrap();
        assert_eq!(g[0].item(), Some(0.0));
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let mut tape = Tape::new();
        let a = tape.param(Tensor::zeros(&[2, 3]));
        let b = tape.param(Tensor::zeros(&[2, 3]));
        assert!(matches!(tape.matmul(a, b), Err(Error::Shape { .. })));
        let c = tape.param(Tensor::zeros(&[3]));
        assert!(tape.add(a, c).is_err());
    }
}
