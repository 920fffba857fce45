use std::collections::HashMap;

use super::tensor::dims2;
use super::{ParameterStore, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Broadcast {
    Same,
    Row,
    Scalar,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param,
    MatMul(Var, Var),
    Add(Var, Var, Broadcast),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Recip(Var),
    MinConst(Var, f64),
    MaskMul(Var, Vec<f64>),
    Transpose(Var),
    HCat(Vec<Var>),
    VStack(Vec<Var>),
    SliceRows(Var, usize),
    Scatter(Var, Vec<usize>),
    Softmax(Var, [usize; 3]),
    Sum(Var),
    CrossEntropy(Var, Vec<usize>, Vec<f64>),
    Frobenius(Var, Var),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Param => "param",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::Sigmoid(_) => "sigmoid",
            Op::Tanh(_) => "tanh",
            Op::Relu(_) => "relu",
            Op::Recip(_) => "recip",
            Op::MinConst(..) => "min_const",
            Op::MaskMul(..) => "mask_mul",
            Op::Transpose(_) => "transpose",
            Op::HCat(_) => "hcat",
            Op::VStack(_) => "vstack",
            Op::SliceRows(..) => "slice_rows",
            Op::Scatter(..) => "scatter",
            Op::Softmax(..) => "softmax",
            Op::Sum(_) => "sum",
            Op::CrossEntropy(..) => "cross_entropy",
            Op::Frobenius(..) => "frobenius",
        }
    }
}

#[derive(Debug)]
struct Node {
    shape: Vec<usize>,
    value: Vec<f64>,
    op: Op,
}

/// Gradient tape for reverse-mode differentiation.
///
/// Every operation evaluates eagerly and appends a node; `backward` walks the
/// nodes in reverse. Operations work on the matrix view of their inputs
/// (scalars are 1x1, vectors are single rows) except `softmax`, which takes
/// an explicit axis over any shape.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<usize, Var>,
    non_finite: Option<&'static str>,
}

/// Gradients of one scalar with respect to every node on the tape.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn wrt(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
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

    /// The first operator that produced a NaN or infinity. Only tracked in
    /// debug builds.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        self.non_finite
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, op: Op) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        if cfg!(debug_assertions) && self.non_finite.is_none() && !value.iter().all(|x| x.is_finite()) {
            self.non_finite = Some(op.name());
        }
        self.nodes.push(Node { shape, value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn dims(&self, v: Var) -> (usize, usize) {
        dims2(self.shape(v))
    }

    pub fn scalar_value(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    pub fn tensor(&self, v: Var) -> Tensor {
        let n = &self.nodes[v.0];
        Tensor::new(&n.shape, n.value.clone()).expect("tape nodes hold consistent shapes")
    }

    /// Records a non-trainable input.
    pub fn constant(&mut self, t: &Tensor) -> Var {
        self.push(t.shape().to_vec(), t.data().to_vec(), Op::Leaf)
    }

    pub fn constant_from(&mut self, shape: &[usize], data: Vec<f64>) -> Result<Var> {
        let t = Tensor::new(shape, data)?;
        Ok(self.push(t.shape().to_vec(), t.into_data(), Op::Leaf))
    }

    pub fn zeros(&mut self, shape: &[usize]) -> Var {
        self.constant(&Tensor::zeros(shape))
    }

    /// Records parameter `name` from `store`. Repeated calls for the same
    /// name return the same node, so gradients accumulate in one place.
    pub fn param(&mut self, store: &ParameterStore, name: &str) -> Result<Var> {
        let idx = store
            .index_of(name)
            .ok_or_else(|| Error::Contract(format!("missing parameter `{name}`")))?;
        if let Some(&v) = self.params.get(&idx) {
            return Ok(v);
        }
        let t = store.by_index(idx).1;
        let v = self.push(t.shape().to_vec(), t.data().to_vec(), Op::Param);
        self.params.insert(idx, v);
        Ok(v)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims(a);
        let (k2, n) = self.dims(b);
        if k != k2 {
            return Err(Error::dim("matmul", self.shape(a), self.shape(b)));
        }
        let av = self.value(a);
        let bv = self.value(b);
        let mut out = vec![0.0; m * n];
        matmul_into(av, bv, &mut out, m, k, n);
        Ok(self.push(vec![m, n], out, Op::MatMul(a, b)))
    }

    /// `a + b`, where `b` is either the same shape as `a`, a single row
    /// broadcast over the rows of `a`, or a single element.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (rows, cols) = self.dims(a);
        let bn = self.value(b).len();
        let bcast = if self.shape(a) == self.shape(b) || (bn == rows * cols && self.dims(b) == (rows, cols)) {
            Broadcast::Same
        } else if bn == cols && self.dims(b).0 == 1 {
            Broadcast::Row
        } else if bn == 1 {
            Broadcast::Scalar
        } else {
            return Err(Error::dim("add", self.shape(a), self.shape(b)));
        };
        let av = self.value(a);
        let bv = self.value(b);
        let out: Vec<f64> = match bcast {
            Broadcast::Same => av.iter().zip(bv).map(|(x, y)| x + y).collect(),
            Broadcast::Row => av
                .iter()
                .enumerate()
                .map(|(i, x)| x + bv[i % cols])
                .collect(),
            Broadcast::Scalar => av.iter().map(|x| x + bv[0]).collect(),
        };
        let shape = self.shape(a).to_vec();
        Ok(self.push(shape, out, Op::Add(a, b, bcast)))
    }

    fn check_same(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.value(a).len() != self.value(b).len() || self.dims(a) != self.dims(b) {
            return Err(Error::dim(op, self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same("sub", a, b)?;
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x - y)
            .collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(shape, out, Op::Sub(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same("mul", a, b)?;
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x * y)
            .collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(shape, out, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let out = self.value(a).iter().map(|x| x * factor).collect();
        let shape = self.shape(a).to_vec();
        self.push(shape, out, Op::Scale(a, factor))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let out = self.value(a).iter().map(|&x| f(x)).collect();
        let shape = self.shape(a).to_vec();
        self.push(shape, out, op)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| if x < 0.0 { 0.0 } else { x }, Op::Relu(a))
    }

    pub fn recip(&mut self, a: Var) -> Var {
        self.unary(a, f64::recip, Op::Recip(a))
    }

    /// Elementwise `min(x, cap)`; the gradient is zero where the cap binds.
    /// NaN passes through.
    pub fn min_const(&mut self, a: Var, cap: f64) -> Var {
        self.unary(a, |x| if x > cap { cap } else { x }, Op::MinConst(a, cap))
    }

    /// Multiplies by a fixed mask (used for dropout).
    pub fn mask_mul(&mut self, a: Var, mask: Vec<f64>) -> Result<Var> {
        if mask.len() != self.value(a).len() {
            return Err(Error::dim("mask_mul", self.shape(a), &[mask.len()]));
        }
        let out = self.value(a).iter().zip(&mask).map(|(x, m)| x * m).collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(shape, out, Op::MaskMul(a, mask)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let (r, c) = self.dims(a);
        let av = self.value(a);
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = av[i * c + j];
            }
        }
        self.push(vec![c, r], out, Op::Transpose(a))
    }

    /// Concatenates along columns; all parts need the same row count.
    pub fn hcat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Contract("hcat of nothing".into()))?;
        let rows = self.dims(first).0;
        let mut cols = 0;
        for &p in parts {
            let (r, c) = self.dims(p);
            if r != rows {
                return Err(Error::dim("hcat", self.shape(first), self.shape(p)));
            }
            cols += c;
        }
        let mut out = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for &p in parts {
                let c = self.dims(p).1;
                out.extend_from_slice(&self.value(p)[i * c..(i + 1) * c]);
            }
        }
        Ok(self.push(vec![rows, cols], out, Op::HCat(parts.to_vec())))
    }

    /// Stacks along rows; all parts need the same column count.
    pub fn vstack(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Contract("vstack of nothing".into()))?;
        let cols = self.dims(first).1;
        let mut rows = 0;
        for &p in parts {
            let (r, c) = self.dims(p);
            if c != cols {
                return Err(Error::dim("vstack", self.shape(first), self.shape(p)));
            }
            rows += r;
        }
        let mut out = Vec::with_capacity(rows * cols);
        for &p in parts {
            out.extend_from_slice(self.value(p));
        }
        Ok(self.push(vec![rows, cols], out, Op::VStack(parts.to_vec())))
    }

    /// Rows `start..start + len`.
    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let (r, c) = self.dims(a);
        if len == 0 || start + len > r {
            return Err(Error::Index(format!(
                "rows {start}..{} out of range for {r} rows",
                start + len
            )));
        }
        let out = self.value(a)[start * c..(start + len) * c].to_vec();
        Ok(self.push(vec![len, c], out, Op::SliceRows(a, start)))
    }

    pub fn row(&mut self, a: Var, i: usize) -> Result<Var> {
        self.slice_rows(a, i, 1)
    }

    /// Places the columns of a single-row `a` at `cols` in a zero row of
    /// length `width`.
    pub fn scatter_row(&mut self, a: Var, cols: &[usize], width: usize) -> Result<Var> {
        let (r, c) = self.dims(a);
        if r != 1 || c != cols.len() {
            return Err(Error::dim("scatter_row", self.shape(a), &[1, cols.len()]));
        }
        if let Some(&bad) = cols.iter().find(|&&j| j >= width) {
            return Err(Error::Index(format!("column {bad} out of range for width {width}")));
        }
        let mut out = vec![0.0; width];
        for (&j, &x) in cols.iter().zip(self.value(a)) {
            out[j] += x;
        }
        Ok(self.push(vec![1, width], out, Op::Scatter(a, cols.to_vec())))
    }

    /// Max-shifted softmax along `axis` of the tensor's own shape.
    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        if axis >= shape.len() {
            return Err(Error::Index(format!("softmax axis {axis} for shape {shape:?}")));
        }
        let len = shape[axis];
        if len == 0 {
            return Err(Error::Domain("softmax over an empty axis".into()));
        }
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let mut out = self.value(a).to_vec();
        softmax_strided(&mut out, outer, len, inner);
        Ok(self.push(shape, out, Op::Softmax(a, [outer, len, inner])))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().sum();
        self.push(Vec::new(), vec![s], Op::Sum(a))
    }

    /// `-sum_i log softmax(logits)[i, labels[i]]` with a fused log-softmax.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let (n, k) = self.dims(logits);
        if labels.len() != n {
            return Err(Error::dim("cross_entropy", self.shape(logits), &[labels.len()]));
        }
        if let Some((row, &lab)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
            return Err(Error::Index(format!(
                "label {lab} in row {row} outside 0..{k}"
            )));
        }
        let lv = self.value(logits);
        let mut probs = lv.to_vec();
        let mut loss = 0.0;
        for (i, &lab) in labels.iter().enumerate() {
            let row = &lv[i * k..(i + 1) * k];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            loss += lse - row[lab];
        }
        softmax_strided(&mut probs, n, k, 1);
        Ok(self.push(
            Vec::new(),
            vec![loss],
            Op::CrossEntropy(logits, labels.to_vec(), probs),
        ))
    }

    /// Frobenius norm of `a - b`.
    pub fn frobenius_distance(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::dim("frobenius_distance", self.shape(a), self.shape(b)));
        }
        let d = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        Ok(self.push(Vec::new(), vec![d], Op::Frobenius(a, b)))
    }

    /// `x W (+ b)`, with `b` broadcast over rows.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let y = self.matmul(x, w)?;
        match b {
            Some(b) => {
                if self.value(b).len() != self.dims(y).1 {
                    return Err(Error::dim("linear", self.shape(w), self.shape(b)));
                }
                self.add(y, b)
            }
            None => Ok(y),
        }
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn gradients(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.backprop_node(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    /// Populates `grad` on every parameter of `store`: the derivative of
    /// `loss`, or zeros for parameters that do not contribute.
    ///
    /// `store` must be the store the tape's parameters were drawn from.
    pub fn backward(&self, loss: Var, store: &mut ParameterStore) -> Result<()> {
        let grads = self.gradients(loss)?;
        store.zero_grads();
        for (&idx, &v) in &self.params {
            if let Some(g) = grads.wrt(v) {
                let (_, t) = store.by_index_mut(idx);
                if t.numel() != g.len() {
                    return Err(Error::Contract("tape and store disagree on a parameter shape".into()));
                }
                t.set_grad(g.to_vec());
            }
        }
        Ok(())
    }

    fn backprop_node(&self, idx: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[idx];
        let y = &node.value;
        match &node.op {
            Op::Leaf | Op::Param => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.dims(*a);
                let n = self.dims(*b).1;
                let av = self.value(*a);
                let bv = self.value(*b);
                // dA = G B^T
                accumulate(grads, *a, av.len(), |ga| {
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let brow = &bv[p * n..(p + 1) * n];
                            ga[i * k + p] += dot(grow, brow);
                        }
                    }
                });
                // dB = A^T G
                accumulate(grads, *b, bv.len(), |gb| {
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let aip = av[i * k + p];
                            if aip != 0.0 {
                                let dst = &mut gb[p * n..(p + 1) * n];
                                for (d, &x) in dst.iter_mut().zip(grow) {
                                    *d += aip * x;
                                }
                            }
                        }
                    }
                });
            }
            Op::Add(a, b, bc) => {
                accumulate(grads, *a, g.len(), |ga| add_assign(ga, g));
                let bn = self.value(*b).len();
                accumulate(grads, *b, bn, |gb| match bc {
                    Broadcast::Same => add_assign(gb, g),
                    Broadcast::Row => {
                        for (i, &x) in g.iter().enumerate() {
                            gb[i % bn] += x;
                        }
                    }
                    Broadcast::Scalar => gb[0] += g.iter().sum::<f64>(),
                });
            }
            Op::Sub(a, b) => {
                accumulate(grads, *a, g.len(), |ga| add_assign(ga, g));
                accumulate(grads, *b, g.len(), |gb| {
                    for (d, &x) in gb.iter_mut().zip(g) {
                        *d -= x;
                    }
                });
            }
            Op::Mul(a, b) => {
                let av = self.value(*a);
                let bv = self.value(*b);
                accumulate(grads, *a, g.len(), |ga| {
                    for i in 0..g.len() {
                        ga[i] += g[i] * bv[i];
                    }
                });
                accumulate(grads, *b, g.len(), |gb| {
                    for i in 0..g.len() {
                        gb[i] += g[i] * av[i];
                    }
                });
            }
            Op::Scale(a, f) => accumulate(grads, *a, g.len(), |ga| {
                for (d, &x) in ga.iter_mut().zip(g) {
                    *d += f * x;
                }
            }),
            Op::Sigmoid(a) => accumulate(grads, *a, g.len(), |ga| {
                for i in 0..g.len() {
                    ga[i] += g[i] * y[i] * (1.0 - y[i]);
                }
            }),
            Op::Tanh(a) => accumulate(grads, *a, g.len(), |ga| {
                for i in 0..g.len() {
                    ga[i] += g[i] * (1.0 - y[i] * y[i]);
                }
            }),
            Op::Relu(a) => accumulate(grads, *a, g.len(), |ga| {
                for i in 0..g.len() {
                    if y[i] > 0.0 {
                        ga[i] += g[i];
                    }
                }
            }),
            Op::Recip(a) => accumulate(grads, *a, g.len(), |ga| {
                for i in 0..g.len() {
                    ga[i] -= g[i] * y[i] * y[i];
                }
            }),
            Op::MinConst(a, cap) => {
                let av = self.value(*a);
                accumulate(grads, *a, g.len(), |ga| {
                    for i in 0..g.len() {
                        if av[i] < *cap {
                            ga[i] += g[i];
                        }
                    }
                })
            }
            Op::MaskMul(a, mask) => accumulate(grads, *a, g.len(), |ga| {
                for i in 0..g.len() {
                    ga[i] += g[i] * mask[i];
                }
            }),
            Op::Transpose(a) => {
                let (r, c) = self.dims(*a);
                accumulate(grads, *a, g.len(), |ga| {
                    for i in 0..r {
                        for j in 0..c {
                            ga[i * c + j] += g[j * r + i];
                        }
                    }
                })
            }
            Op::HCat(parts) => {
                let (rows, cols) = dims2(&node.shape);
                let mut offset = 0;
                for &p in parts {
                    let c = self.dims(p).1;
                    accumulate(grads, p, rows * c, |gp| {
                        for i in 0..rows {
                            let src = &g[i * cols + offset..i * cols + offset + c];
                            add_assign(&mut gp[i * c..(i + 1) * c], src);
                        }
                    });
                    offset += c;
                }
            }
            Op::VStack(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let n = self.value(p).len();
                    accumulate(grads, p, n, |gp| add_assign(gp, &g[offset..offset + n]));
                    offset += n;
                }
            }
            Op::SliceRows(a, start) => {
                let (_, c) = self.dims(*a);
                let n = self.value(*a).len();
                accumulate(grads, *a, n, |ga| {
                    add_assign(&mut ga[start * c..start * c + g.len()], g)
                });
            }
            Op::Scatter(a, cols) => accumulate(grads, *a, cols.len(), |ga| {
                for (d, &j) in ga.iter_mut().zip(cols) {
                    *d += g[j];
                }
            }),
            Op::Softmax(a, [outer, len, inner]) => {
                let (outer, len, inner) = (*outer, *len, *inner);
                accumulate(grads, *a, g.len(), |ga| {
                    for o in 0..outer {
                        for q in 0..inner {
                            let at = |k: usize| (o * len + k) * inner + q;
                            let s: f64 = (0..len).map(|k| g[at(k)] * y[at(k)]).sum();
                            for k in 0..len {
                                ga[at(k)] += y[at(k)] * (g[at(k)] - s);
                            }
                        }
                    }
                })
            }
            Op::Sum(a) => {
                let n = self.value(*a).len();
                accumulate(grads, *a, n, |ga| {
                    for d in ga.iter_mut() {
                        *d += g[0];
                    }
                })
            }
            Op::CrossEntropy(logits, labels, probs) => {
                let k = self.dims(*logits).1;
                accumulate(grads, *logits, probs.len(), |gl| {
                    for (i, &lab) in labels.iter().enumerate() {
                        for c in 0..k {
                            let target = if c == lab { 1.0 } else { 0.0 };
                            gl[i * k + c] += g[0] * (probs[i * k + c] - target);
                        }
                    }
                })
            }
            Op::Frobenius(a, b) => {
                let d = y[0];
                if d > 0.0 {
                    let av = self.value(*a);
                    let bv = self.value(*b);
                    let coef = g[0] / d;
                    accumulate(grads, *a, av.len(), |ga| {
                        for i in 0..av.len() {
                            ga[i] += coef * (av[i] - bv[i]);
                        }
                    });
                    accumulate(grads, *b, bv.len(), |gb| {
                        for i in 0..bv.len() {
                            gb[i] -= coef * (av[i] - bv[i]);
                        }
                    });
                }
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], v: Var, len: usize, f: impl FnOnce(&mut [f64])) {
    let slot = grads[v.0].get_or_insert_with(|| vec![0.0; len]);
    f(slot);
}

fn add_assign(dst: &mut [f64], src: &[f64]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn matmul_into(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            for (o, &bv) in orow.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *o += aip * bv;
            }
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_strided(data: &mut [f64], outer: usize, len: usize, inner: usize) {
    for o in 0..outer {
        for q in 0..inner {
            let at = |k: usize| (o * len + k) * inner + q;
            let max = (0..len).map(|k| data[at(k)]).fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for k in 0..len {
                let e = (data[at(k)] - max).exp();
                data[at(k)] = e;
                total += e;
            }
            for k in 0..len {
                data[at(k)] /= total;
            }
        }
    }
}
