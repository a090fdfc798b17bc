//! Tape-style computation graph with reverse-mode differentiation.
//!
//! Nodes are appended in evaluation order, so insertion order is a valid
//! topological order and [`Graph::backward`] is a single reverse sweep.
//! Parameters are borrowed from a caller-owned slice rather than copied
//! into the graph; the resulting [`Gradients`] are indexed the same way.

use super::array::{matmul_into, split_last, Array, Real};
use super::TensorError;

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Op {
    Input,
    Param(usize),
    MatMul,
    Bmm { trans_b: bool },
    Add,
    Sub,
    Mul,
    ScalarMul(f64),
    Sigmoid,
    Tanh,
    Elu,
    Exp,
    Square,
    SoftmaxLast,
    Concat { axis: usize },
    Slice { axis: usize, start: usize },
    Reshape,
    Clamp { lo: f64, hi: f64 },
    Minimum,
    Maximum,
    ReduceSum,
    ReduceMean,
    GaussianLogProb,
    GaussianEntropy,
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Param(_) => "param",
            Op::MatMul => "matmul",
            Op::Bmm { .. } => "bmm",
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::ScalarMul(_) => "scalar_mul",
            Op::Sigmoid => "sigmoid",
            Op::Tanh => "tanh",
            Op::Elu => "elu",
            Op::Exp => "exp",
            Op::Square => "square",
            Op::SoftmaxLast => "softmax_last",
            Op::Concat { .. } => "concat",
            Op::Slice { .. } => "slice",
            Op::Reshape => "reshape",
            Op::Clamp { .. } => "clamp",
            Op::Minimum => "minimum",
            Op::Maximum => "maximum",
            Op::ReduceSum => "reduce_sum",
            Op::ReduceMean => "reduce_mean",
            Op::GaussianLogProb => "gaussian_log_prob",
            Op::GaussianEntropy => "gaussian_entropy",
        }
    }
}

#[derive(Debug)]
struct Node<T> {
    op: Op,
    inputs: Vec<Var>,
    // None for parameter leaves, which live in the borrowed slice.
    value: Option<Array<T>>,
}

/// Gradient of a scalar loss with respect to every parameter slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    grads: Vec<Array<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(params: &[Array<T>]) -> Self {
        Self {
            grads: params.iter().map(|p| Array::zeros(p.shape())).collect(),
        }
    }

    pub fn from_arrays(grads: Vec<Array<T>>) -> Self {
        Self { grads }
    }

    pub fn get(&self, param: usize) -> &Array<T> {
        &self.grads[param]
    }

    pub fn as_slice(&self) -> &[Array<T>] {
        &self.grads
    }

    pub fn global_norm(&self) -> f64 {
        self.grads
            .iter()
            .flat_map(|g| g.data().iter())
            .map(|x| x.as_f64() * x.as_f64())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        let f = T::from_f64(factor);
        for g in &mut self.grads {
            g.data_mut().iter_mut().for_each(|x| *x = *x * f);
        }
    }

    /// Rescale so the global norm does not exceed `max_norm`.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            self.scale(max_norm / norm);
        }
        norm
    }
}

pub struct Graph<'p, T: Real> {
    params: &'p [Array<T>],
    nodes: Vec<Node<T>>,
}

fn dim_err(msg: String) -> TensorError {
    TensorError::Dimension(msg)
}

fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

impl<'p, T: Real> Graph<'p, T> {
    pub fn new(params: &'p [Array<T>]) -> Self {
        Self {
            params,
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array<T> {
        let node = &self.nodes[v.0];
        match node.op {
            Op::Param(i) => &self.params[i],
            _ => node.value.as_ref().expect("non-param nodes carry a value"),
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    /// Name of the primitive that produced `v`.
    pub fn op_name(&self, v: Var) -> &'static str {
        self.nodes[v.0].op.name()
    }

    fn push(&mut self, op: Op, inputs: Vec<Var>, value: Array<T>) -> Result<Var, TensorError> {
        let id = self.nodes.len();
        if let Some(i) = value.first_non_finite() {
            return Err(TensorError::Numeric(format!(
                "node {id} ({}) produced a non-finite value at flat index {i}",
                op.name()
            )));
        }
        self.nodes.push(Node {
            op,
            inputs,
            value: Some(value),
        });
        Ok(Var(id))
    }

    /// Constant leaf; receives no gradient.
    pub fn input(&mut self, value: Array<T>) -> Result<Var, TensorError> {
        self.push(Op::Input, Vec::new(), value)
    }

    /// Trainable leaf referring to slot `index` of the parameter slice.
    pub fn param(&mut self, index: usize) -> Result<Var, TensorError> {
        if index >= self.params.len() {
            return Err(TensorError::Contract(format!(
                "parameter slot {index} out of range ({} slots)",
                self.params.len()
            )));
        }
        let id = self.nodes.len();
        self.nodes.push(Node {
            op: Op::Param(index),
            inputs: Vec::new(),
            value: None,
        });
        Ok(Var(id))
    }

    /// `a[.., k] · w[k, n] -> [.., n]`; leading axes of `a` act as a batch.
    pub fn matmul(&mut self, a: Var, w: Var) -> Result<Var, TensorError> {
        let (sa, sw) = (self.shape(a), self.shape(w));
        if sa.is_empty() || sw.len() != 2 || sa[sa.len() - 1] != sw[0] {
            return Err(dim_err(format!("matmul {sa:?} x {sw:?}")));
        }
        let (m, k) = split_last(sa);
        let n = sw[1];
        let mut shape = sa.to_vec();
        *shape.last_mut().unwrap() = n;
        let mut out = vec![T::zero(); m * n];
        matmul_into(
            self.value(a).data(),
            self.value(w).data(),
            &mut out,
            m,
            k,
            n,
            false,
            false,
            false,
        );
        self.push(Op::MatMul, vec![a, w], Array::new_unchecked(&shape, out))
    }

    /// Batched product `a[B,m,k] · b[B,k,n]`, or `a · bᵀ` with `b[B,n,k]`
    /// when `trans_b` is set.
    pub fn bmm(&mut self, a: Var, b: Var, trans_b: bool) -> Result<Var, TensorError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 3 || sb.len() != 3 || sa[0] != sb[0] {
            return Err(dim_err(format!("bmm {sa:?} x {sb:?}")));
        }
        let (batch, m, k) = (sa[0], sa[1], sa[2]);
        let (kb, n) = if trans_b { (sb[2], sb[1]) } else { (sb[1], sb[2]) };
        if k != kb {
            return Err(dim_err(format!(
                "bmm inner dimensions {sa:?} x {sb:?} (trans_b={trans_b})"
            )));
        }
        let mut out = vec![T::zero(); batch * m * n];
        {
            let (da, db) = (self.value(a).data(), self.value(b).data());
            for i in 0..batch {
                matmul_into(
                    &da[i * m * k..(i + 1) * m * k],
                    &db[i * k * n..(i + 1) * k * n],
                    &mut out[i * m * n..(i + 1) * m * n],
                    m,
                    k,
                    n,
                    false,
                    trans_b,
                    false,
                );
            }
        }
        self.push(
            Op::Bmm { trans_b },
            vec![a, b],
            Array::new_unchecked(&[batch, m, n], out),
        )
    }

    fn broadcast_binary(&mut self, a: Var, b: Var, op: Op, f: impl Fn(T, T) -> T) -> Result<Var, TensorError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sb.len() > sa.len() || sa[sa.len() - sb.len()..] != *sb {
            return Err(dim_err(format!("{} {sa:?} with {sb:?}", op.name())));
        }
        let shape = sa.to_vec();
        let (da, db) = (self.value(a).data(), self.value(b).data());
        let bl = db.len();
        let out: Vec<T> = da.iter().enumerate().map(|(i, &x)| f(x, db[i % bl])).collect();
        self.push(op, vec![a, b], Array::new_unchecked(&shape, out))
    }

    /// Elementwise sum; `b` may match a trailing suffix of `a`'s shape
    /// (bias broadcast over the leading batch axes).
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.broadcast_binary(a, b, Op::Add, |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.broadcast_binary(a, b, Op::Sub, |x, y| x - y)
    }

    fn same_shape_binary(&mut self, a: Var, b: Var, op: Op, f: impl Fn(T, T) -> T) -> Result<Var, TensorError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(dim_err(format!("{} {sa:?} with {sb:?}", op.name())));
        }
        let shape = sa.to_vec();
        let out = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        self.push(op, vec![a, b], Array::new_unchecked(&shape, out))
    }

    /// Elementwise (Hadamard) product of equal shapes.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.same_shape_binary(a, b, Op::Mul, |x, y| x * y)
    }

    pub fn minimum(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.same_shape_binary(a, b, Op::Minimum, |x, y| if x <= y { x } else { y })
    }

    pub fn maximum(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.same_shape_binary(a, b, Op::Maximum, |x, y| if x >= y { x } else { y })
    }

    fn unary(&mut self, a: Var, op: Op, f: impl Fn(T) -> T) -> Result<Var, TensorError> {
        let out = self.value(a).map(f);
        self.push(op, vec![a], out)
    }

    pub fn scalar_mul(&mut self, a: Var, c: f64) -> Result<Var, TensorError> {
        let ct = T::from_f64(c);
        self.unary(a, Op::ScalarMul(c), |x| x * ct)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, TensorError> {
        self.unary(a, Op::Sigmoid, sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, TensorError> {
        self.unary(a, Op::Tanh, |x| x.tanh())
    }

    /// ELU with α = 1.
    pub fn elu(&mut self, a: Var) -> Result<Var, TensorError> {
        self.unary(a, Op::Elu, elu)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var, TensorError> {
        self.unary(a, Op::Exp, |x| x.exp())
    }

    pub fn square(&mut self, a: Var) -> Result<Var, TensorError> {
        self.unary(a, Op::Square, |x| x * x)
    }

    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var, TensorError> {
        if lo > hi {
            return Err(TensorError::Contract(format!("clamp bounds {lo} > {hi}")));
        }
        let (l, h) = (T::from_f64(lo), T::from_f64(hi));
        self.unary(a, Op::Clamp { lo, hi }, |x| x.max(l).min(h))
    }

    pub fn softmax_last(&mut self, a: Var) -> Result<Var, TensorError> {
        let x = self.value(a);
        if x.rank() == 0 {
            return Err(dim_err("softmax over a rank-0 array".into()));
        }
        let (rows, cols) = split_last(x.shape());
        let mut out = x.data().to_vec();
        for r in 0..rows {
            softmax_in_place(&mut out[r * cols..(r + 1) * cols]);
        }
        let shape = x.shape().to_vec();
        self.push(Op::SoftmaxLast, vec![a], Array::new_unchecked(&shape, out))
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var, TensorError> {
        let first = parts.first().ok_or_else(|| dim_err("concat of zero arrays".into()))?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(dim_err(format!("concat axis {axis} for shape {base:?}")));
        }
        let mut total = 0;
        for &p in parts {
            let s = self.shape(p);
            let compatible =
                s.len() == base.len() && s.iter().zip(&base).enumerate().all(|(i, (x, y))| i == axis || x == y);
            if !compatible {
                return Err(dim_err(format!("concat {base:?} with {s:?} on axis {axis}")));
            }
            total += s[axis];
        }
        let (outer, _, inner) = axis_split(&base, axis);
        let mut shape = base.clone();
        shape[axis] = total;
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &p in parts {
                let v = self.value(p);
                let len = v.shape()[axis] * inner;
                out.extend_from_slice(&v.data()[o * len..(o + 1) * len]);
            }
        }
        self.push(Op::Concat { axis }, parts.to_vec(), Array::new_unchecked(&shape, out))
    }

    /// Half-open range `start..end` along `axis`; rank is preserved.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, end: usize) -> Result<Var, TensorError> {
        let s = self.shape(a).to_vec();
        if axis >= s.len() || start >= end || end > s[axis] {
            return Err(dim_err(format!("slice {start}..{end} on axis {axis} of {s:?}")));
        }
        let (outer, len, inner) = axis_split(&s, axis);
        let width = (end - start) * inner;
        let data = self.value(a).data();
        let mut out = Vec::with_capacity(outer * width);
        for o in 0..outer {
            let base = o * len * inner + start * inner;
            out.extend_from_slice(&data[base..base + width]);
        }
        let mut shape = s;
        shape[axis] = end - start;
        self.push(Op::Slice { axis, start }, vec![a], Array::new_unchecked(&shape, out))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var, TensorError> {
        let out = self.value(a).clone().reshaped(shape)?;
        self.push(Op::Reshape, vec![a], out)
    }

    pub fn reduce_sum(&mut self, a: Var) -> Result<Var, TensorError> {
        let s: T = self.value(a).data().iter().copied().sum();
        self.push(Op::ReduceSum, vec![a], Array::scalar(s))
    }

    pub fn reduce_mean(&mut self, a: Var) -> Result<Var, TensorError> {
        let v = self.value(a);
        let s: T = v.data().iter().copied().sum();
        let n = T::from_f64(v.len() as f64);
        self.push(Op::ReduceMean, vec![a], Array::scalar(s / n))
    }

    /// Per-row log-density of a diagonal Gaussian: `x, mu: [B, D]`,
    /// `log_sigma: [D]` -> `[B]`.
    pub fn gaussian_log_prob(&mut self, x: Var, mu: Var, log_sigma: Var) -> Result<Var, TensorError> {
        let (sx, sm, ss) = (self.shape(x), self.shape(mu), self.shape(log_sigma));
        if sx.len() != 2 || sx != sm || ss.len() != 1 || ss[0] != sx[1] {
            return Err(dim_err(format!(
                "gaussian_log_prob x {sx:?}, mu {sm:?}, log_sigma {ss:?}"
            )));
        }
        let (rows, d) = (sx[0], sx[1]);
        let (dx, dm, dl) = (
            self.value(x).data(),
            self.value(mu).data(),
            self.value(log_sigma).data(),
        );
        let half_ln_2pi = T::from_f64(0.5 * (2.0 * std::f64::consts::PI).ln());
        let half = T::from_f64(0.5);
        let out = (0..rows)
            .map(|r| {
                (0..d)
                    .map(|j| {
                        let z = (dx[r * d + j] - dm[r * d + j]) / dl[j].exp();
                        -half * z * z - dl[j] - half_ln_2pi
                    })
                    .sum()
            })
            .collect();
        self.push(
            Op::GaussianLogProb,
            vec![x, mu, log_sigma],
            Array::new_unchecked(&[rows], out),
        )
    }

    /// Entropy of a diagonal Gaussian with log standard deviations `[D]`.
    pub fn gaussian_entropy(&mut self, log_sigma: Var) -> Result<Var, TensorError> {
        let s = self.shape(log_sigma);
        if s.len() != 1 {
            return Err(dim_err(format!("gaussian_entropy of {s:?}")));
        }
        let c = T::from_f64(0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln());
        let h = self.value(log_sigma).data().iter().map(|&l| c + l).sum();
        self.push(Op::GaussianEntropy, vec![log_sigma], Array::scalar(h))
    }

    /// Gradient of the scalar `loss` with respect to every parameter slot.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>, TensorError> {
        if self.value(loss).len() != 1 {
            return Err(TensorError::Contract(format!(
                "backward needs a scalar loss, node {} has shape {:?}",
                loss.0,
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![T::one()]);
        let mut out = Gradients::zeros_like(self.params);

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            if let Some(i) = g.iter().position(|x| !x.is_finite()) {
                return Err(TensorError::Numeric(format!(
                    "non-finite gradient at node {id} ({}), flat index {i}",
                    node.op.name()
                )));
            }
            let y = self.value(Var(id)).data();
            let inp = &node.inputs;
            match node.op {
                Op::Input => {}
                Op::Param(p) => {
                    let dst = out.grads[p].data_mut();
                    dst.iter_mut().zip(&g).for_each(|(d, &x)| *d = *d + x);
                }
                Op::MatMul => {
                    let (a, w) = (self.value(inp[0]), self.value(inp[1]));
                    let (m, k) = split_last(a.shape());
                    let n = w.shape()[1];
                    let ga = buf(&mut grads, inp[0], m * k);
                    matmul_into(&g, w.data(), ga, m, n, k, false, true, true);
                    let gw = buf(&mut grads, inp[1], k * n);
                    matmul_into(a.data(), &g, gw, k, m, n, true, false, true);
                }
                Op::Bmm { trans_b } => {
                    let (a, b) = (self.value(inp[0]), self.value(inp[1]));
                    let (batch, m, k) = (a.shape()[0], a.shape()[1], a.shape()[2]);
                    let n = if trans_b { b.shape()[1] } else { b.shape()[2] };
                    let (mk, kn, mn) = (m * k, k * n, m * n);
                    {
                        let ga = buf(&mut grads, inp[0], batch * mk);
                        for i in 0..batch {
                            let gi = &g[i * mn..(i + 1) * mn];
                            let bi = &b.data()[i * kn..(i + 1) * kn];
                            let dst = &mut ga[i * mk..(i + 1) * mk];
                            // out = a·b  => ga = g·bᵀ ; out = a·bᵀ => ga = g·b
                            matmul_into(gi, bi, dst, m, n, k, false, !trans_b, true);
                        }
                    }
                    let gb = buf(&mut grads, inp[1], batch * kn);
                    for i in 0..batch {
                        let gi = &g[i * mn..(i + 1) * mn];
                        let ai = &a.data()[i * mk..(i + 1) * mk];
                        let dst = &mut gb[i * kn..(i + 1) * kn];
                        if trans_b {
                            // gb = gᵀ·a : [n,m]·[m,k]
                            matmul_into(gi, ai, dst, n, m, k, true, false, true);
                        } else {
                            // gb = aᵀ·g : [k,m]·[m,n]
                            matmul_into(ai, gi, dst, k, m, n, true, false, true);
                        }
                    }
                }
                Op::Add | Op::Sub => {
                    let ga = buf(&mut grads, inp[0], g.len());
                    ga.iter_mut().zip(&g).for_each(|(d, &x)| *d = *d + x);
                    let bl = self.value(inp[1]).len();
                    let gb = buf(&mut grads, inp[1], bl);
                    let neg = node.op == Op::Sub;
                    for (i, &x) in g.iter().enumerate() {
                        let d = &mut gb[i % bl];
                        *d = if neg { *d - x } else { *d + x };
                    }
                }
                Op::Mul => {
                    let (a, b) = (self.value(inp[0]).data(), self.value(inp[1]).data());
                    let ga = buf(&mut grads, inp[0], g.len());
                    for i in 0..g.len() {
                        ga[i] = ga[i] + g[i] * b[i];
                    }
                    let gb = buf(&mut grads, inp[1], g.len());
                    for i in 0..g.len() {
                        gb[i] = gb[i] + g[i] * a[i];
                    }
                }
                Op::Minimum | Op::Maximum => {
                    let (a, b) = (self.value(inp[0]).data(), self.value(inp[1]).data());
                    let pick_a: Vec<bool> = a
                        .iter()
                        .zip(b)
                        .map(|(x, y)| if node.op == Op::Minimum { x <= y } else { x >= y })
                        .collect();
                    let ga = buf(&mut grads, inp[0], g.len());
                    for i in 0..g.len() {
                        if pick_a[i] {
                            ga[i] = ga[i] + g[i];
                        }
                    }
                    let gb = buf(&mut grads, inp[1], g.len());
                    for i in 0..g.len() {
                        if !pick_a[i] {
                            gb[i] = gb[i] + g[i];
                        }
                    }
                }
                Op::ScalarMul(c) => {
                    let c = T::from_f64(c);
                    let ga = buf(&mut grads, inp[0], g.len());
                    ga.iter_mut().zip(&g).for_each(|(d, &x)| *d = *d + x * c);
                }
                Op::Sigmoid => {
                    let ga = buf(&mut grads, inp[0], g.len());
                    for i in 0..g.len() {
                        ga[i] = ga[i] + g[i] * y[i] * (T::one() - y[i]);
                    }
                }
                Op::Tanh => {
                    let ga = buf(&mut grads, inp[0], g.len());
                    for i in 0..g.len() {
                        ga[i] = ga[i] + g[i] * (T::one() - y[i] * y[i]);
                    }
                }
                Op::Elu => {
                    let x = self.value(inp[0]).data();
                    let ga = buf(&mut grads, inp[0], g.len());
                    for i in 0..g.len() {
                        let d = if x[i] >= T::zero() { T::one() } else { y[i] + T::one() };
                        ga[i] = ga[i] + g[i] * d;
                    }
                }
                Op::Exp => {
                    let ga = buf(&mut grads, inp[0], g.len());
                    for i in 0..g.len() {
                        ga[i] = ga[i] + g[i] * y[i];
                    }
                }
                Op::Square => {
                    let x = self.value(inp[0]).data();
                    let two = T::from_f64(2.0);
                    let ga = buf(&mut grads, inp[0], g.len());
                    for i in 0..g.len() {
                        ga[i] = ga[i] + g[i] * two * x[i];
                    }
                }
                Op::Clamp { lo, hi } => {
                    let x = self.value(inp[0]).data();
                    let (l, h) = (T::from_f64(lo), T::from_f64(hi));
                    let ga = buf(&mut grads, inp[0], g.len());
                    for i in 0..g.len() {
                        if x[i] >= l && x[i] <= h {
                            ga[i] = ga[i] + g[i];
                        }
                    }
                }
                Op::SoftmaxLast => {
                    let (rows, cols) = split_last(self.shape(Var(id)));
                    let ga = buf(&mut grads, inp[0], g.len());
                    for r in 0..rows {
                        let span = r * cols..(r + 1) * cols;
                        let (gr, yr) = (&g[span.clone()], &y[span.clone()]);
                        let dot: T = gr.iter().zip(yr).map(|(&a, &b)| a * b).sum();
                        for (j, d) in ga[span].iter_mut().enumerate() {
                            *d = *d + yr[j] * (gr[j] - dot);
                        }
                    }
                }
                Op::Concat { axis } => {
                    let shape = self.shape(Var(id)).to_vec();
                    let (outer, total, inner) = axis_split(&shape, axis);
                    let mut offset = 0;
                    for &p in inp {
                        let len = self.shape(p)[axis] * inner;
                        let gp = buf(&mut grads, p, outer * len);
                        for o in 0..outer {
                            let src = &g[o * total * inner + offset..][..len];
                            for (d, &x) in gp[o * len..(o + 1) * len].iter_mut().zip(src) {
                                *d = *d + x;
                            }
                        }
                        offset += len;
                    }
                }
                Op::Slice { axis, start } => {
                    let src_shape = self.shape(inp[0]).to_vec();
                    let (outer, len, inner) = axis_split(&src_shape, axis);
                    let width = g.len() / outer;
                    let ga = buf(&mut grads, inp[0], outer * len * inner);
                    for o in 0..outer {
                        let base = o * len * inner + start * inner;
                        for (d, &x) in ga[base..base + width].iter_mut().zip(&g[o * width..(o + 1) * width]) {
                            *d = *d + x;
                        }
                    }
                }
                Op::Reshape => {
                    let ga = buf(&mut grads, inp[0], g.len());
                    ga.iter_mut().zip(&g).for_each(|(d, &x)| *d = *d + x);
                }
                Op::ReduceSum | Op::ReduceMean => {
                    let n = self.value(inp[0]).len();
                    let scale = if node.op == Op::ReduceMean {
                        g[0] / T::from_f64(n as f64)
                    } else {
                        g[0]
                    };
                    let ga = buf(&mut grads, inp[0], n);
                    ga.iter_mut().for_each(|d| *d = *d + scale);
                }
                Op::GaussianLogProb => {
                    let (x, mu, ls) = (
                        self.value(inp[0]).data(),
                        self.value(inp[1]).data(),
                        self.value(inp[2]).data(),
                    );
                    let d = ls.len();
                    let rows = g.len();
                    // z_ij = (x - mu) / sigma
                    let mut dmu = vec![T::zero(); rows * d];
                    let mut dls = vec![T::zero(); d];
                    for r in 0..rows {
                        for j in 0..d {
                            let sigma = ls[j].exp();
                            let diff = x[r * d + j] - mu[r * d + j];
                            let z = diff / sigma;
                            dmu[r * d + j] = g[r] * diff / (sigma * sigma);
                            dls[j] = dls[j] + g[r] * (z * z - T::one());
                        }
                    }
                    let gx = buf(&mut grads, inp[0], rows * d);
                    gx.iter_mut().zip(&dmu).for_each(|(a, &b)| *a = *a - b);
                    let gm = buf(&mut grads, inp[1], rows * d);
                    gm.iter_mut().zip(&dmu).for_each(|(a, &b)| *a = *a + b);
                    let gl = buf(&mut grads, inp[2], d);
                    gl.iter_mut().zip(&dls).for_each(|(a, &b)| *a = *a + b);
                }
                Op::GaussianEntropy => {
                    let n = self.value(inp[0]).len();
                    let ga = buf(&mut grads, inp[0], n);
                    ga.iter_mut().for_each(|d| *d = *d + g[0]);
                }
            }
        }
        for (p, grad) in out.grads.iter().enumerate() {
            if let Some(i) = grad.first_non_finite() {
                return Err(TensorError::Numeric(format!(
                    "non-finite gradient for parameter slot {p}, flat index {i}"
                )));
            }
        }
        Ok(out)
    }
}

fn buf<T: Real>(grads: &mut [Option<Vec<T>>], v: Var, len: usize) -> &mut Vec<T> {
    grads[v.0].get_or_insert_with(|| vec![T::zero(); len])
}

pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn elu<T: Real>(x: T) -> T {
    if x >= T::zero() {
        x
    } else {
        x.exp_m1()
    }
}

pub fn softmax_in_place<T: Real>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        sum = sum + *x;
    }
    for x in row.iter_mut() {
        *x = *x / sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arr(shape: &[usize], data: &[f64]) -> Array<f64> {
        Array::from_f64(shape, data).unwrap()
    }

    #[test]
    fn matmul_identity_and_product() {
        let params: Vec<Array<f64>> = Vec::new();
        let mut g = Graph::new(&params);
        let eye = g.input(arr(&[2, 2], &[1.0, 0.0, 0.0, 1.0])).unwrap();
        let m = g.input(arr(&[2, 2], &[1.0, 2.0, 3.0, 4.0])).unwrap();
        let p = g.matmul(eye, m).unwrap();
        assert_eq!(g.value(p).data(), &[1.0, 2.0, 3.0, 4.0]);

        let col = g.input(arr(&[2, 1], &[5.0, 6.0])).unwrap();
        let q = g.matmul(m, col).unwrap();
        assert_eq!(g.value(q).data(), &[17.0, 39.0]);
        assert_eq!(g.shape(q), &[2, 1]);
    }

    #[test]
    fn matmul_shape_mismatch() {
        let params: Vec<Array<f64>> = Vec::new();
        let mut g = Graph::new(&params);
        let a = g.input(Array::zeros(&[2, 3])).unwrap();
        let b = g.input(Array::zeros(&[2, 3])).unwrap();
        assert!(matches!(g.matmul(a, b), Err(TensorError::Dimension(_))));
    }

    #[test]
    fn softmax_closed_forms() {
        let params: Vec<Array<f64>> = Vec::new();
        let mut g = Graph::new(&params);
        let z = g.input(arr(&[3], &[0.0, 0.0, 0.0])).unwrap();
        let s = g.softmax_last(z).unwrap();
        for &p in g.value(s).data() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        for c in [-7.5, 0.0, 3.25, 40.0] {
            let z = g.input(arr(&[2], &[c, c + 2f64.ln()])).unwrap();
            let s = g.softmax_last(z).unwrap();
            let d = g.value(s).data();
            assert!((d[0] - 1.0 / 3.0).abs() < 1e-12);
            assert!((d[1] - 2.0 / 3.0).abs() < 1e-12);
        }
        let v = [0.3, -1.2, 2.2, 0.0];
        let a = g.input(arr(&[4], &v)).unwrap();
        let shifted: Vec<f64> = v.iter().map(|x| x + 5.0).collect();
        let b = g.input(arr(&[4], &shifted)).unwrap();
        let (sa, sb) = (g.softmax_last(a).unwrap(), g.softmax_last(b).unwrap());
        for (x, y) in g.value(sa).data().iter().zip(g.value(sb).data()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn elu_values() {
        let params: Vec<Array<f64>> = Vec::new();
        let mut g = Graph::new(&params);
        let x = g.input(arr(&[3], &[0.0, 2.5, -1.0])).unwrap();
        let y = g.elu(x).unwrap();
        let d = g.value(y).data();
        assert_eq!(d[0], 0.0);
        assert_eq!(d[1], 2.5);
        assert!((d[2] - (-0.632_120_558_828_557_7)).abs() < 1e-12);
    }

    #[test]
    fn square_sum_gradient() {
        let params = vec![arr(&[1], &[3.0])];
        let mut g = Graph::new(&params);
        let x = g.param(0).unwrap();
        let sq = g.square(x).unwrap();
        let loss = g.reduce_sum(sq).unwrap();
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.get(0).data(), &[6.0]);
    }

    #[test]
    fn unused_parameter_gets_zero_gradient() {
        let params = vec![arr(&[2], &[1.0, 2.0]), arr(&[3], &[4.0, 5.0, 6.0])];
        let mut g = Graph::new(&params);
        let x = g.param(0).unwrap();
        let _unused = g.param(1).unwrap();
        let loss = g.reduce_mean(x).unwrap();
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.get(1).data(), &[0.0, 0.0, 0.0]);
        assert_eq!(grads.get(0).data(), &[0.5, 0.5]);
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let params = vec![arr(&[2], &[1.0, 2.0])];
        let mut g = Graph::new(&params);
        let x = g.param(0).unwrap();
        assert!(matches!(g.backward(x), Err(TensorError::Contract(_))));
    }

    #[test]
    fn overflow_is_reported_with_node() {
        let params: Vec<Array<f64>> = Vec::new();
        let mut g = Graph::new(&params);
        let x = g.input(arr(&[1], &[1000.0])).unwrap();
        let err = g.exp(x).unwrap_err();
        match err {
            TensorError::Numeric(msg) => assert!(msg.contains("node 1 (exp)"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn slice_concat_roundtrip() {
        let params: Vec<Array<f64>> = Vec::new();
        let mut g = Graph::new(&params);
        let data: Vec<f64> = (0..24).map(f64::from).collect();
        let x = g.input(arr(&[2, 3, 4], &data)).unwrap();
        let a = g.slice(x, 1, 0, 1).unwrap();
        let b = g.slice(x, 1, 1, 3).unwrap();
        let c = g.concat(&[a, b], 1).unwrap();
        assert_eq!(g.value(c), g.value(x));
        let last = g.slice(x, 2, 3, 4).unwrap();
        assert_eq!(g.value(last).data(), &[3.0, 7.0, 11.0, 15.0, 19.0, 23.0]);
    }

    #[test]
    fn gaussian_peak_and_entropy() {
        let params: Vec<Array<f64>> = Vec::new();
        let mut g = Graph::new(&params);
        let ls = g.input(arr(&[2], &[0.0, 0.0])).unwrap();
        let h = g.gaussian_entropy(ls).unwrap();
        let expected = (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        assert!((g.value(h).item() - expected).abs() < 1e-12);

        let x = g.input(arr(&[1, 2], &[0.3, -0.2])).unwrap();
        let ls = g.input(arr(&[2], &[0.5f64.ln(), 0.25f64.ln()])).unwrap();
        let lp = g.gaussian_log_prob(x, x, ls).unwrap();
        let peak =
            -((0.5 * (2.0 * std::f64::consts::PI).sqrt()).ln() + (0.25 * (2.0 * std::f64::consts::PI).sqrt()).ln());
        assert!((g.value(lp).item() - peak).abs() < 1e-12);
    }
}
