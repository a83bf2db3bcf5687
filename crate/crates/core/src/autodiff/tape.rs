use crate::autodiff::array::{matmul_at_into, matmul_bt_into, matmul_into, Array};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op<S> {
    /// Placeholder bound by `forward`.
    Input { shape: Vec<usize> },
    /// Constant or parameter value fixed at record time.
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, S),
    MatMul(Var, Var),
    Transpose(Var),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    SoftmaxCe(Var, Vec<usize>),
    MeanRows(Var),
    Sum(Var),
    Embedding(Var, Vec<usize>),
    Concat(Var, Var),
}

impl<S> Op<S> {
    fn name(&self) -> &'static str {
        match self {
            Op::Input { .. } => "input",
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::MatMul(..) => "matmul",
            Op::Transpose(..) => "transpose",
            Op::Relu(..) => "relu",
            Op::Sigmoid(..) => "sigmoid",
            Op::Tanh(..) => "tanh",
            Op::SoftmaxCe(..) => "softmax_cross_entropy",
            Op::MeanRows(..) => "mean_rows",
            Op::Sum(..) => "sum",
            Op::Embedding(..) => "embedding",
            Op::Concat(..) => "concat",
        }
    }

    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Input { .. } | Op::Leaf => vec![],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::MatMul(a, b) | Op::Concat(a, b) => {
                vec![*a, *b]
            }
            Op::Scale(a, _)
            | Op::Transpose(a)
            | Op::Relu(a)
            | Op::Sigmoid(a)
            | Op::Tanh(a)
            | Op::SoftmaxCe(a, _)
            | Op::MeanRows(a)
            | Op::Sum(a)
            | Op::Embedding(a, _) => vec![*a],
        }
    }
}

#[derive(Clone, Debug)]
struct Node<S> {
    op: Op<S>,
    value: Option<Array<S>>,
    requires_grad: bool,
}

/// Define-by-run reverse-mode tape.
///
/// Nodes are appended in topological order; `forward` evaluates every node
/// in recording order, binding `input` placeholders to the supplied arrays.
/// Leaves (constants and parameters) carry their value from the moment they
/// are recorded.
#[derive(Clone, Debug, Default)]
pub struct Tape<S> {
    nodes: Vec<Node<S>>,
    evaluated: bool,
}

/// Adjoints of every node that participates in the output, indexed by [`Var`].
#[derive(Clone, Debug)]
pub struct Gradients<S> {
    grads: Vec<Option<Array<S>>>,
}

impl<S: Scalar> Gradients<S> {
    pub fn get(&self, v: Var) -> Option<&Array<S>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient of `v`, or zeros of `shape` when `v` did not influence the output.
    pub fn get_or_zeros(&self, v: Var, shape: &[usize]) -> Array<S> {
        self.get(v).cloned().unwrap_or_else(|| Array::zeros(shape))
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            evaluated: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op<S>, value: Option<Array<S>>, requires_grad: bool) -> Var {
        for inp in op.inputs() {
            assert!(inp.0 < self.nodes.len(), "node inputs must precede the node");
        }
        self.evaluated = false;
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn unary(&mut self, op: Op<S>) -> Var {
        let rg = op.inputs().iter().any(|v| self.nodes[v.0].requires_grad);
        self.push(op, None, rg)
    }

    /// Placeholder bound positionally by [`Tape::forward`]. Gradients flow to inputs.
    pub fn input(&mut self, shape: &[usize]) -> Var {
        self.push(
            Op::Input {
                shape: shape.to_vec(),
            },
            None,
            true,
        )
    }

    pub fn constant(&mut self, value: Array<S>) -> Var {
        self.push(Op::Leaf, Some(value), false)
    }

    /// Trainable leaf: `backward` reports its gradient.
    pub fn param(&mut self, value: Array<S>) -> Var {
        self.push(Op::Leaf, Some(value), true)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.unary(Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.unary(Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.unary(Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, s: S) -> Var {
        self.unary(Op::Scale(a, s))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        self.unary(Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        self.unary(Op::Transpose(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(Op::Tanh(a))
    }

    /// Row-wise softmax cross-entropy: logits `[b, c]` and `b` labels give `[b]` losses.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: Vec<usize>) -> Var {
        self.unary(Op::SoftmaxCe(logits, labels))
    }

    /// Mean over the leading (batch) axis. `[b]` reduces to a scalar.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        self.unary(Op::MeanRows(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        self.unary(Op::Sum(a))
    }

    /// Row lookup into a `[vocab, dim]` table, producing `[indices.len(), dim]`.
    pub fn embedding(&mut self, table: Var, indices: Vec<usize>) -> Var {
        self.unary(Op::Embedding(table, indices))
    }

    /// Concatenation along the last axis (vectors, or matrices with equal row counts).
    pub fn concat(&mut self, a: Var, b: Var) -> Var {
        self.unary(Op::Concat(a, b))
    }

    pub fn value(&self, v: Var) -> Option<&Array<S>> {
        self.nodes.get(v.0).and_then(|n| n.value.as_ref())
    }

    /// Evaluates every node; returns the value of the last recorded node.
    pub fn forward(&mut self, inputs: &[Array<S>]) -> Result<Array<S>> {
        if self.nodes.is_empty() {
            return Err(Error::State("forward on an empty tape".into()));
        }
        let mut next_input = 0usize;
        for id in 0..self.nodes.len() {
            let value = match &self.nodes[id].op {
                Op::Leaf => continue,
                Op::Input { shape } => {
                    let given = inputs.get(next_input).ok_or_else(|| Error::Shape {
                        node: id,
                        op: "input",
                        msg: format!("no value supplied for input {next_input}"),
                    })?;
                    if given.shape() != shape.as_slice() {
                        return Err(Error::Shape {
                            node: id,
                            op: "input",
                            msg: format!("declared {:?}, got {:?}", shape, given.shape()),
                        });
                    }
                    next_input += 1;
                    given.clone()
                }
                op => eval(&self.nodes, id, op)?,
            };
            self.nodes[id].value = Some(value);
        }
        if next_input != inputs.len() {
            return Err(Error::arg(format!(
                "tape declares {next_input} inputs, {} supplied",
                inputs.len()
            )));
        }
        self.evaluated = true;
        Ok(self.nodes.last().and_then(|n| n.value.clone()).expect("evaluated"))
    }

    /// Reverse pass from the last recorded node, which must be a scalar.
    pub fn backward(&self) -> Result<Gradients<S>> {
        if self.nodes.is_empty() {
            return Err(Error::State("backward on an empty tape".into()));
        }
        self.backward_from(Var(self.nodes.len() - 1))
    }

    pub fn backward_from(&self, output: Var) -> Result<Gradients<S>> {
        if !self.evaluated {
            return Err(Error::State("backward called before forward".into()));
        }
        let out = self.nodes[output.0].value.as_ref().expect("evaluated");
        if out.len() != 1 {
            return Err(Error::State(format!(
                "backward needs a scalar output, node #{} has shape {:?}",
                output.0,
                out.shape()
            )));
        }
        let mut grads: Vec<Option<Array<S>>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(Array::full(out.shape(), S::one()));
        for id in (0..=output.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            if node.requires_grad {
                adjoint(&self.nodes, id, &g, &mut grads);
            }
            grads[id] = Some(g);
        }
        for (g, n) in grads.iter_mut().zip(&self.nodes) {
            if !n.requires_grad {
                *g = None;
            }
        }
        Ok(Gradients { grads })
    }
}

fn val<S>(nodes: &[Node<S>], v: Var) -> &Array<S> {
    nodes[v.0].value.as_ref().expect("inputs evaluated before use")
}

fn shape_err(node: usize, op: &'static str, msg: String) -> Error {
    Error::Shape { node, op, msg }
}

fn eval<S: Scalar>(nodes: &[Node<S>], id: usize, op: &Op<S>) -> Result<Array<S>> {
    let name = op.name();
    Ok(match op {
        Op::Input { .. } | Op::Leaf => unreachable!(),
        Op::Add(a, b) | Op::Sub(a, b) => {
            let (x, y) = (val(nodes, *a), val(nodes, *b));
            let sign = if matches!(op, Op::Add(..)) { S::one() } else { -S::one() };
            if x.shape() == y.shape() {
                let data = x.data().iter().zip(y.data()).map(|(&p, &q)| p + sign * q).collect();
                Array::new(x.shape().to_vec(), data)?
            } else if let Some(cols) = row_broadcast(x, y) {
                let data = x
                    .data()
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| p + sign * y.data()[i % cols])
                    .collect();
                Array::new(x.shape().to_vec(), data)?
            } else {
                return Err(shape_err(
                    id,
                    name,
                    format!("operands {:?} and {:?} are incompatible", x.shape(), y.shape()),
                ));
            }
        }
        Op::Mul(a, b) => {
            let (x, y) = (val(nodes, *a), val(nodes, *b));
            if x.shape() != y.shape() {
                return Err(shape_err(
                    id,
                    name,
                    format!("operands {:?} and {:?} differ", x.shape(), y.shape()),
                ));
            }
            let data = x.data().iter().zip(y.data()).map(|(&p, &q)| p * q).collect();
            Array::new(x.shape().to_vec(), data)?
        }
        Op::Scale(a, s) => val(nodes, *a).map(|x| x * *s),
        Op::MatMul(a, b) => {
            let (x, y) = (val(nodes, *a), val(nodes, *b));
            let (m, k, n, out_shape) = matmul_dims(x, y).ok_or_else(|| {
                shape_err(
                    id,
                    name,
                    format!("cannot multiply {:?} by {:?}", x.shape(), y.shape()),
                )
            })?;
            let mut out = vec![S::zero(); m * n];
            matmul_into(x.data(), y.data(), &mut out, m, k, n);
            Array::new(out_shape, out)?
        }
        Op::Transpose(a) => {
            let x = val(nodes, *a);
            let (r, c) = x
                .rows_cols()
                .ok_or_else(|| shape_err(id, name, format!("needs a matrix, got {:?}", x.shape())))?;
            let mut out = vec![S::zero(); r * c];
            for i in 0..r {
                for j in 0..c {
                    out[j * r + i] = x.data()[i * c + j];
                }
            }
            Array::matrix(c, r, out)?
        }
        Op::Relu(a) => val(nodes, *a).map(|x| if x > S::zero() { x } else { S::zero() }),
        Op::Sigmoid(a) => val(nodes, *a).map(sigmoid),
        Op::Tanh(a) => val(nodes, *a).map(|x| x.tanh()),
        Op::SoftmaxCe(a, labels) => {
            let x = val(nodes, *a);
            let (b, c) = x
                .rows_cols()
                .ok_or_else(|| shape_err(id, name, format!("logits must be [b, c], got {:?}", x.shape())))?;
            if labels.len() != b {
                return Err(shape_err(
                    id,
                    name,
                    format!("{} labels for {b} rows", labels.len()),
                ));
            }
            let mut out = Vec::with_capacity(b);
            for (row, &y) in x.data().chunks(c).zip(labels) {
                if y >= c {
                    return Err(Error::data(format!(
                        "label {y} out of range for {c} classes (node #{id})"
                    )));
                }
                out.push(log_sum_exp(row) - row[y]);
            }
            Array::vector(out)
        }
        Op::MeanRows(a) => {
            let x = val(nodes, *a);
            let Some((&b, rest)) = x.shape().split_first() else {
                return Err(shape_err(id, name, "cannot reduce a scalar".into()));
            };
            if b == 0 {
                return Err(shape_err(id, name, "empty batch".into()));
            }
            let inner: usize = rest.iter().product();
            let mut out = vec![S::zero(); inner];
            for row in x.data().chunks(inner) {
                for (o, &v) in out.iter_mut().zip(row) {
                    *o += v;
                }
            }
            let inv = S::from_usize_lossy(b);
            Array::new(rest.to_vec(), out.into_iter().map(|v| v / inv).collect())?
        }
        Op::Sum(a) => Array::scalar(val(nodes, *a).data().iter().copied().sum()),
        Op::Embedding(t, indices) => {
            let table = val(nodes, *t);
            let (v, d) = table
                .rows_cols()
                .ok_or_else(|| shape_err(id, name, format!("table must be [vocab, dim], got {:?}", table.shape())))?;
            let mut out = Vec::with_capacity(indices.len() * d);
            for &ix in indices {
                if ix >= v {
                    return Err(Error::data(format!(
                        "token {ix} out of range for vocabulary {v} (node #{id})"
                    )));
                }
                out.extend_from_slice(&table.data()[ix * d..(ix + 1) * d]);
            }
            Array::matrix(indices.len(), d, out)?
        }
        Op::Concat(a, b) => {
            let (x, y) = (val(nodes, *a), val(nodes, *b));
            match (x.shape(), y.shape()) {
                ([n1], [n2]) => {
                    let mut out = x.data().to_vec();
                    out.extend_from_slice(y.data());
                    Array::new(vec![n1 + n2], out)?
                }
                ([r1, c1], [r2, c2]) if r1 == r2 => {
                    let mut out = Vec::with_capacity(r1 * (c1 + c2));
                    for i in 0..*r1 {
                        out.extend_from_slice(&x.data()[i * c1..(i + 1) * c1]);
                        out.extend_from_slice(&y.data()[i * c2..(i + 1) * c2]);
                    }
                    Array::matrix(*r1, c1 + c2, out)?
                }
                (sx, sy) => {
                    return Err(shape_err(id, name, format!("cannot concatenate {sx:?} and {sy:?}")))
                }
            }
        }
    })
}

/// Column count when `y` is a bias row (`[c]` or `[1, c]`) for matrix `x` of shape `[r, c]`.
fn row_broadcast<S: Scalar>(x: &Array<S>, y: &Array<S>) -> Option<usize> {
    let (_, c) = x.rows_cols()?;
    match y.shape() {
        [n] if *n == c => Some(c),
        [1, n] if *n == c => Some(c),
        _ => None,
    }
}

fn matmul_dims<S: Scalar>(x: &Array<S>, y: &Array<S>) -> Option<(usize, usize, usize, Vec<usize>)> {
    match (x.shape(), y.shape()) {
        ([m, k], [k2, n]) if k == k2 => Some((*m, *k, *n, vec![*m, *n])),
        ([m, k], [k2]) if k == k2 => Some((*m, *k, 1, vec![*m])),
        ([k], [k2, n]) if k == k2 => Some((1, *k, *n, vec![*n])),
        _ => None,
    }
}

pub(crate) fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

pub(crate) fn log_sum_exp<S: Scalar>(row: &[S]) -> S {
    let m = row.iter().copied().fold(S::neg_infinity(), S::max);
    m + row.iter().map(|&v| (v - m).exp()).sum::<S>().ln()
}

fn accumulate<S: Scalar>(grads: &mut [Option<Array<S>>], nodes: &[Node<S>], v: Var, g: Array<S>) {
    if !nodes[v.0].requires_grad {
        return;
    }
    match &mut grads[v.0] {
        Some(acc) => acc.add_assign(&g),
        slot => *slot = Some(g),
    }
}

fn adjoint<S: Scalar>(nodes: &[Node<S>], id: usize, g: &Array<S>, grads: &mut [Option<Array<S>>]) {
    let out = val(nodes, Var(id));
    match &nodes[id].op {
        Op::Input { .. } | Op::Leaf => {}
        Op::Add(a, b) | Op::Sub(a, b) => {
            let sign = if matches!(nodes[id].op, Op::Add(..)) { S::one() } else { -S::one() };
            accumulate(grads, nodes, *a, g.clone());
            let y = val(nodes, *b);
            let gb = if y.shape() == g.shape() {
                g.map(|v| sign * v)
            } else {
                let cols = y.len();
                let mut acc = vec![S::zero(); cols];
                for row in g.data().chunks(cols) {
                    for (o, &v) in acc.iter_mut().zip(row) {
                        *o += v;
                    }
                }
                Array::new(y.shape().to_vec(), acc.into_iter().map(|v| sign * v).collect())
                    .expect("bias shape")
            };
            accumulate(grads, nodes, *b, gb);
        }
        Op::Mul(a, b) => {
            let (x, y) = (val(nodes, *a), val(nodes, *b));
            let ga = zip_map(g, y, |p, q| p * q);
            let gb = zip_map(g, x, |p, q| p * q);
            accumulate(grads, nodes, *a, ga);
            accumulate(grads, nodes, *b, gb);
        }
        Op::Scale(a, s) => accumulate(grads, nodes, *a, g.map(|v| v * *s)),
        Op::MatMul(a, b) => {
            let (x, y) = (val(nodes, *a), val(nodes, *b));
            let (m, k, n, _) = matmul_dims(x, y).expect("checked in forward");
            if nodes[a.0].requires_grad {
                let mut ga = vec![S::zero(); m * k];
                matmul_bt_into(g.data(), y.data(), &mut ga, m, n, k);
                accumulate(grads, nodes, *a, Array::new(x.shape().to_vec(), ga).expect("shape"));
            }
            if nodes[b.0].requires_grad {
                let mut gb = vec![S::zero(); k * n];
                matmul_at_into(x.data(), g.data(), &mut gb, m, k, n);
                accumulate(grads, nodes, *b, Array::new(y.shape().to_vec(), gb).expect("shape"));
            }
        }
        Op::Transpose(a) => {
            let (r, c) = out.rows_cols().expect("matrix");
            let mut gt = vec![S::zero(); r * c];
            for i in 0..r {
                for j in 0..c {
                    gt[j * r + i] = g.data()[i * c + j];
                }
            }
            accumulate(grads, nodes, *a, Array::matrix(c, r, gt).expect("shape"));
        }
        Op::Relu(a) => {
            let x = val(nodes, *a);
            // subgradient 0 at exactly 0
            accumulate(grads, nodes, *a, zip_map(g, x, |gv, xv| if xv > S::zero() { gv } else { S::zero() }));
        }
        Op::Sigmoid(a) => {
            accumulate(grads, nodes, *a, zip_map(g, out, |gv, s| gv * s * (S::one() - s)));
        }
        Op::Tanh(a) => {
            accumulate(grads, nodes, *a, zip_map(g, out, |gv, t| gv * (S::one() - t * t)));
        }
        Op::SoftmaxCe(a, labels) => {
            let x = val(nodes, *a);
            let (_, c) = x.rows_cols().expect("matrix");
            let mut gx = Vec::with_capacity(x.len());
            for ((row, &y), &gv) in x.data().chunks(c).zip(labels).zip(g.data()) {
                let lse = log_sum_exp(row);
                for (j, &z) in row.iter().enumerate() {
                    let p = (z - lse).exp();
                    let t = if j == y { S::one() } else { S::zero() };
                    gx.push(gv * (p - t));
                }
            }
            accumulate(grads, nodes, *a, Array::new(x.shape().to_vec(), gx).expect("shape"));
        }
        Op::MeanRows(a) => {
            let x = val(nodes, *a);
            let b = x.shape()[0];
            let inv = S::from_usize_lossy(b);
            let mut gx = Vec::with_capacity(x.len());
            for _ in 0..b {
                gx.extend(g.data().iter().map(|&v| v / inv));
            }
            accumulate(grads, nodes, *a, Array::new(x.shape().to_vec(), gx).expect("shape"));
        }
        Op::Sum(a) => {
            let x = val(nodes, *a);
            accumulate(grads, nodes, *a, Array::full(x.shape(), g.data()[0]));
        }
        Op::Embedding(t, indices) => {
            let table = val(nodes, *t);
            let (_, d) = table.rows_cols().expect("matrix");
            let mut gt = Array::zeros(table.shape());
            for (row, &ix) in g.data().chunks(d).zip(indices) {
                for (o, &v) in gt.data_mut()[ix * d..(ix + 1) * d].iter_mut().zip(row) {
                    *o += v;
                }
            }
            accumulate(grads, nodes, *t, gt);
        }
        Op::Concat(a, b) => {
            let (x, y) = (val(nodes, *a), val(nodes, *b));
            match (x.shape(), y.shape()) {
                ([n1], [_]) => {
                    accumulate(grads, nodes, *a, Array::vector(g.data()[..*n1].to_vec()));
                    accumulate(grads, nodes, *b, Array::vector(g.data()[*n1..].to_vec()));
                }
                ([r, c1], [_, c2]) => {
                    let w = c1 + c2;
                    let mut ga = Vec::with_capacity(r * c1);
                    let mut gb = Vec::with_capacity(r * c2);
                    for row in g.data().chunks(w) {
                        ga.extend_from_slice(&row[..*c1]);
                        gb.extend_from_slice(&row[*c1..]);
                    }
                    accumulate(grads, nodes, *a, Array::matrix(*r, *c1, ga).expect("shape"));
                    accumulate(grads, nodes, *b, Array::matrix(*r, *c2, gb).expect("shape"));
                }
                _ => unreachable!("checked in forward"),
            }
        }
    }
}

fn zip_map<S: Scalar>(a: &Array<S>, b: &Array<S>, f: impl Fn(S, S) -> S) -> Array<S> {
    let data = a.data().iter().zip(b.data()).map(|(&p, &q)| f(p, q)).collect();
    Array::new(a.shape().to_vec(), data).expect("same shape")
}
