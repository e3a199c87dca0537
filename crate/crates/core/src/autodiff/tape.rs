//! Define-by-run reverse-mode tape over [`Tensor`] values.
//!
//! Every operation appends a node holding its forward value. Node ids are
//! creation indices, so the tape is already in topological order and the
//! backward sweep is a single reverse pass.

use std::sync::Arc;

use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

/// A vector map applied column-by-column, with a hand-written adjoint.
///
/// Used for physics right-hand sides that live outside the tensor algebra.
pub trait ColumnMap: Send + Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    /// `J(x)^T * cotangent`.
    fn vjp(&self, x: &[f64], cotangent: &[f64]) -> Vec<f64>;
}

#[derive(Clone)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddBias(usize, usize),
    Relu(usize),
    Sum(usize),
    MeanSquare(usize),
    Concat(Vec<usize>),
    Slice { src: usize, offset: usize },
    Map(usize, Arc<dyn ColumnMap>),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Gradients keyed by the parameter handles passed to [`Tape::backward`].
#[derive(Clone, Debug)]
pub struct Gradients {
    entries: Vec<(Var, Tensor)>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.entries.iter().find(|(v, _)| *v == var).map(|(_, t)| t)
    }

    /// Gradients in the order the parameters were requested.
    pub fn into_tensors(self) -> Vec<Tensor> {
        self.entries.into_iter().map(|(_, t)| t).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Default)]
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

    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn grad_any(&self, vars: &[usize]) -> bool {
        vars.iter().any(|&i| self.nodes[i].requires_grad)
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.grad_any(&[a.0, b.0]);
        Ok(self.push(value, Op::MatMul(a.0, b.0), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        let rg = self.grad_any(&[a.0, b.0]);
        Ok(self.push(value, Op::Add(a.0, b.0), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).sub(self.value(b))?;
        let rg = self.grad_any(&[a.0, b.0]);
        Ok(self.push(value, Op::Sub(a.0, b.0), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).mul(self.value(b))?;
        let rg = self.grad_any(&[a.0, b.0]);
        Ok(self.push(value, Op::Mul(a.0, b.0), rg))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a).scale(s);
        let rg = self.nodes[a.0].requires_grad;
        self.push(value, Op::Scale(a.0, s), rg)
    }

    /// Adds the length-`m` vector `bias` to every column of the `m x n` matrix `x`
    /// (or to the vector `x` itself).
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let xv = self.value(x);
        let bv = self.value(bias);
        if bv.rank() != 1 || xv.rank() == 0 || xv.rank() > 2 || xv.rows() != bv.len() {
            return Err(Error::dim("add_bias", format!("{:?} + {:?}", xv.shape(), bv.shape())));
        }
        let cols = xv.cols();
        let mut value = xv.clone();
        for (i, row) in value.data_mut().chunks_mut(cols).enumerate() {
            let b = bv.data()[i];
            row.iter_mut().for_each(|v| *v += b);
        }
        let rg = self.grad_any(&[x.0, bias.0]);
        Ok(self.push(value, Op::AddBias(x.0, bias.0), rg))
    }

    /// Elementwise `max(0, x)`; the subgradient at 0 is 0.
    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|v| v.max(0.0));
        let rg = self.nodes[a.0].requires_grad;
        self.push(value, Op::Relu(a.0), rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum());
        let rg = self.nodes[a.0].requires_grad;
        self.push(value, Op::Sum(a.0), rg)
    }

    /// Mean of squared entries.
    pub fn mse(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.is_empty() {
            return Err(Error::Contract("mse of an empty tensor".into()));
        }
        let value = Tensor::scalar(t.data().iter().map(|v| v * v).sum::<f64>() / t.len() as f64);
        let rg = self.nodes[a.0].requires_grad;
        Ok(self.push(value, Op::MeanSquare(a.0), rg))
    }

    /// Concatenation along the leading axis.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or_else(|| Error::Contract("concat of nothing".into()))?;
        let tail: Vec<usize> = self.value(*first).shape().iter().skip(1).copied().collect();
        let mut rows = 0;
        let mut data = Vec::new();
        for p in parts {
            let t = self.value(*p);
            if t.rank() == 0 || t.shape()[1..] != tail[..] {
                return Err(Error::dim("concat", format!("{:?} vs trailing {:?}", t.shape(), tail)));
            }
            rows += t.shape()[0];
            data.extend_from_slice(t.data());
        }
        let mut shape = vec![rows];
        shape.extend(tail);
        let value = Tensor::new(shape, data)?;
        let ids: Vec<usize> = parts.iter().map(|p| p.0).collect();
        let rg = self.grad_any(&ids);
        Ok(self.push(value, Op::Concat(ids), rg))
    }

    /// Rows `start..start + len` along the leading axis.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let t = self.value(a);
        if t.rank() == 0 || start + len > t.shape()[0] {
            return Err(Error::dim("slice", format!("{start}..{} of {:?}", start + len, t.shape())));
        }
        let inner: usize = t.shape()[1..].iter().product();
        let mut shape = t.shape().to_vec();
        shape[0] = len;
        let value = Tensor::new(shape, t.data()[start * inner..(start + len) * inner].to_vec())?;
        let rg = self.nodes[a.0].requires_grad;
        Ok(self.push(value, Op::Slice { src: a.0, offset: start * inner }, rg))
    }

    /// Applies `map` to a vector, or to every column of a matrix.
    pub fn map_columns(&mut self, a: Var, map: Arc<dyn ColumnMap>) -> Result<Var> {
        let t = self.value(a);
        if t.rows() != map.dim() || t.rank() == 0 || t.rank() > 2 {
            return Err(Error::dim("map_columns", format!("{:?} for dim {}", t.shape(), map.dim())));
        }
        let value = for_each_column(t, |col| map.apply(col));
        let rg = self.nodes[a.0].requires_grad;
        Ok(self.push(value, Op::Map(a.0, map), rg))
    }

    /// Reverse sweep from the scalar `loss`; returns d(loss)/d(param) for each
    /// requested handle. Parameters the loss does not depend on get zeros.
    pub fn backward(&self, loss: Var, params: &[Var]) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut adj: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(Tensor::filled(self.value(loss).shape(), 1.0));

        for id in (0..=loss.0).rev() {
            let Some(g) = adj[id].take() else { continue };
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            match &node.op {
                Op::Leaf => {
                    adj[id] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let av = &self.nodes[*a].value;
                    let bv = &self.nodes[*b].value;
                    let (m, k, n) = (av.rows(), av.cols(), bv.cols());
                    if self.nodes[*a].requires_grad {
                        let mut da = vec![0.0; m * k];
                        gemm(m, n, k, g.data(), false, bv.data(), true, &mut da, 0.0);
                        accumulate(&mut adj, *a, Tensor::new(av.shape().to_vec(), da)?);
                    }
                    if self.nodes[*b].requires_grad {
                        let mut db = vec![0.0; k * n];
                        gemm(k, m, n, av.data(), true, g.data(), false, &mut db, 0.0);
                        accumulate(&mut adj, *b, Tensor::new(bv.shape().to_vec(), db)?);
                    }
                }
                Op::Add(a, b) => {
                    self.send(&mut adj, *a, || g.clone());
                    self.send(&mut adj, *b, || g.clone());
                }
                Op::Sub(a, b) => {
                    self.send(&mut adj, *a, || g.clone());
                    self.send(&mut adj, *b, || g.scale(-1.0));
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[*a].value, &self.nodes[*b].value);
                    self.send(&mut adj, *a, || g.mul(bv).expect("shape checked in forward"));
                    self.send(&mut adj, *b, || g.mul(av).expect("shape checked in forward"));
                }
                Op::Scale(a, s) => self.send(&mut adj, *a, || g.scale(*s)),
                Op::AddBias(x, b) => {
                    self.send(&mut adj, *x, || g.clone());
                    let cols = g.cols();
                    self.send(&mut adj, *b, || {
                        Tensor::vector(g.data().chunks(cols).map(|r| r.iter().sum()).collect())
                    });
                }
                Op::Relu(a) => {
                    let av = &self.nodes[*a].value;
                    self.send(&mut adj, *a, || {
                        let data = av
                            .data()
                            .iter()
                            .zip(g.data())
                            .map(|(&x, &gi)| if x > 0.0 { gi } else { 0.0 })
                            .collect();
                        Tensor::new(av.shape().to_vec(), data).expect("same shape")
                    });
                }
                Op::Sum(a) => {
                    let av = &self.nodes[*a].value;
                    self.send(&mut adj, *a, || Tensor::filled(av.shape(), g.data()[0]));
                }
                Op::MeanSquare(a) => {
                    let av = &self.nodes[*a].value;
                    let s = 2.0 * g.data()[0] / av.len() as f64;
                    self.send(&mut adj, *a, || av.scale(s));
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let shape = self.nodes[p].value.shape().to_vec();
                        let len = self.nodes[p].value.len();
                        let piece = &g.data()[offset..offset + len];
                        self.send(&mut adj, p, || Tensor::new(shape, piece.to_vec()).expect("same shape"));
                        offset += len;
                    }
                }
                Op::Slice { src, offset } => {
                    let sv = &self.nodes[*src].value;
                    self.send(&mut adj, *src, || {
                        let mut full = Tensor::zeros(sv.shape());
                        full.data_mut()[*offset..*offset + g.len()].copy_from_slice(g.data());
                        full
                    });
                }
                Op::Map(a, map) => {
                    let av = &self.nodes[*a].value;
                    self.send(&mut adj, *a, || {
                        let cols = av.cols();
                        let rows = av.rows();
                        let mut out = Tensor::zeros(av.shape());
                        let mut x = vec![0.0; rows];
                        let mut c = vec![0.0; rows];
                        for j in 0..cols {
                            for i in 0..rows {
                                x[i] = av.data()[i * cols + j];
                                c[i] = g.data()[i * cols + j];
                            }
                            let d = map.vjp(&x, &c);
                            for i in 0..rows {
                                out.data_mut()[i * cols + j] = d[i];
                            }
                        }
                        out
                    });
                }
            }
        }

        let entries = params
            .iter()
            .map(|&p| {
                let g = adj
                    .get(p.0)
                    .and_then(|g| g.clone())
                    .unwrap_or_else(|| Tensor::zeros(self.value(p).shape()));
                (p, g)
            })
            .collect();
        Ok(Gradients { entries })
    }

    fn send(&self, adj: &mut [Option<Tensor>], to: usize, grad: impl FnOnce() -> Tensor) {
        if self.nodes[to].requires_grad {
            accumulate(adj, to, grad());
        }
    }
}

fn accumulate(adj: &mut [Option<Tensor>], to: usize, g: Tensor) {
    match &mut adj[to] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

pub(crate) fn for_each_column(t: &Tensor, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Tensor {
    if t.rank() == 1 {
        return Tensor::vector(f(t.data()));
    }
    let (rows, cols) = (t.rows(), t.cols());
    let mut out = Tensor::zeros(t.shape());
    let mut col = vec![0.0; rows];
    for j in 0..cols {
        for i in 0..rows {
            col[i] = t.data()[i * cols + j];
        }
        let y = f(&col);
        for i in 0..rows {
            out.data_mut()[i * cols + j] = y[i];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_forward_and_gradients() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(vec![-1.0, 0.0, 2.0]));
        let y = tape.relu(x);
        assert_eq!(tape.value(y).data(), &[0.0, 0.0, 2.0]);

        for (x0, expect) in [(3.0, 5.0), (-3.0, 0.0)] {
            let mut tape = Tape::new();
            let x = tape.param(Tensor::vector(vec![x0]));
            let y = tape.relu(x);
            let loss = tape.scale(y, 5.0);
            let loss = tape.sum(loss);
            let g = tape.backward(loss, &[x]).unwrap();
            assert_eq!(g.get(x).unwrap().data(), &[expect]);
        }
    }

    #[test]
    fn mse_values() {
        let mut tape = Tape::new();
        for (data, expect) in [(vec![0.0, 0.0, 0.0], 0.0), (vec![1.0, 1.0], 1.0), (vec![3.0], 9.0)] {
            let x = tape.constant(Tensor::vector(data));
            let m = tape.mse(x).unwrap();
            assert_eq!(tape.value(m).data()[0], expect);
        }
    }

    #[test]
    fn mse_of_identity_product_gradient() {
        let mut tape = Tape::new();
        let w = tape.param(Tensor::identity(2));
        let u = tape.constant(Tensor::vector(vec![1.0, 0.0]));
        let wu = tape.matmul(w, u).unwrap();
        let loss = tape.mse(wu).unwrap();
        let g = tape.backward(loss, &[w]).unwrap();
        assert_eq!(g.get(w).unwrap().data(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn unrelated_param_gets_zero_gradient() {
        let mut tape = Tape::new();
        let a = tape.param(Tensor::vector(vec![1.0, 2.0]));
        let b = tape.param(Tensor::vector(vec![3.0]));
        let loss = tape.mse(a).unwrap();
        let g = tape.backward(loss, &[a, b]).unwrap();
        assert_eq!(g.get(b).unwrap().data(), &[0.0]);
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut tape = Tape::new();
        let a = tape.param(Tensor::vector(vec![1.0, 2.0]));
        assert!(matches!(tape.backward(a, &[a]), Err(Error::Contract(_))));
    }

    #[test]
    fn concat_and_slice_route_gradients() {
        let mut tape = Tape::new();
        let a = tape.param(Tensor::vector(vec![1.0, 2.0]));
        let b = tape.param(Tensor::vector(vec![3.0]));
        let c = tape.concat(&[a, b]).unwrap();
        assert_eq!(tape.value(c).data(), &[1.0, 2.0, 3.0]);
        let s = tape.slice(c, 1, 2).unwrap();
        assert_eq!(tape.value(s).data(), &[2.0, 3.0]);
        let loss = tape.sum(s);
        let g = tape.backward(loss, &[a, b]).unwrap();
        assert_eq!(g.get(a).unwrap().data(), &[0.0, 1.0]);
        assert_eq!(g.get(b).unwrap().data(), &[1.0]);
    }
}
