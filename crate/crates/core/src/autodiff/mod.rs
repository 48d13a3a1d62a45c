//! Reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Tape`] records every primitive in execution order together with the
//! activations its pullback needs. [`Tape::backward`] walks the recording in
//! reverse and accumulates gradients additively, so a value used twice
//! receives the sum of both pullbacks. Recording order is a topological order
//! by construction.
//!
//! ```
//! use mapeq_core::autodiff::Tape;
//! use mapeq_core::Tensor;
//!
//! let mut tape = Tape::new();
//! let w = tape.leaf(Tensor::from_rows(&[vec![1.0, 2.0]]), true);
//! let sq = tape.elementwise_mul(w, w).unwrap();
//! let loss = tape.sum_all(sq).unwrap();
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get(w).unwrap().as_slice(), &[2.0, 4.0]);
//! ```

mod check;

use std::f64::consts::LN_2;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;

pub use check::{finite_difference_check, GradientCheck};

use crate::sparse::CsrMatrix;
use crate::tensor::Tensor;

pub const SELU_LAMBDA: f64 = 1.050_700_987_355_480_5;
pub const SELU_ALPHA: f64 = 1.673_263_242_354_377_3;

/// Variance floor of [`Tape::batch_feature_norm`].
pub const BATCH_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AutodiffError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("non-finite value produced by {op} (node {node})")]
    NonFinite { op: &'static str, node: usize },
    #[error("variable does not belong to this tape")]
    ForeignVar,
    #[error("backward requires a 1x1 loss, got {0:?}")]
    NotScalar((usize, usize)),
    #[error("tape has already been differentiated")]
    AlreadyDifferentiated,
    #[error("invalid argument to {op}: {message}")]
    InvalidArgument { op: &'static str, message: String },
}

type Result<T> = std::result::Result<T, AutodiffError>;

static NEXT_TAPE: AtomicU32 = AtomicU32::new(0);

/// Handle to a value recorded on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u32,
    index: usize,
}

impl Var {
    pub fn index(self) -> usize {
        self.index
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    SparseMatMul(Arc<CsrMatrix>, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    AddRow(Var, Var),
    Softmax { logits: Var, temperature: Var },
    Selu(Var),
    Exp(Var),
    Dropout(Var, Tensor),
    BatchNorm {
        input: Var,
        gamma: Var,
        beta: Var,
        normalized: Tensor,
        inv_std: Vec<f64>,
    },
    Log2Eps(Var, f64),
    XLogXEps(Var, f64),
    Trace(Var),
    RowSum(Var),
    ColSum(Var),
    Diag(Var),
    SumAll(Var),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Transpose(_) => "transpose",
            Op::SparseMatMul(..) => "sparse_dense_matmul",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "elementwise_mul",
            Op::Scale(..) => "scalar_mul",
            Op::AddScalar(..) => "add_scalar",
            Op::AddRow(..) => "add_row_broadcast",
            Op::Softmax { .. } => "row_softmax_with_temperature",
            Op::Selu(_) => "selu",
            Op::Exp(_) => "exp",
            Op::Dropout(..) => "dropout_mask_apply",
            Op::BatchNorm { .. } => "batch_feature_norm",
            Op::Log2Eps(..) => "log2_eps",
            Op::XLogXEps(..) => "xlogx_eps",
            Op::Trace(_) => "trace",
            Op::RowSum(_) => "row_sum",
            Op::ColSum(_) => "col_sum",
            Op::Diag(_) => "diag_extract",
            Op::SumAll(_) => "sum_all",
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug)]
pub struct Tape {
    id: u32,
    nodes: Vec<Node>,
    differentiated: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients of a scalar loss with respect to every recorded value that
/// depends on a `requires_grad` leaf.
#[derive(Debug)]
pub struct Gradients {
    tape: u32,
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        if var.tape != self.tape {
            return None;
        }
        self.grads.get(var.index).and_then(Option::as_ref)
    }

    /// Removes and returns a gradient, or a zero tensor of `shape` when the
    /// loss does not depend on `var`.
    pub fn take_or_zeros(&mut self, var: Var, shape: (usize, usize)) -> Tensor {
        if var.tape == self.tape {
            if let Some(g) = self.grads.get_mut(var.index).and_then(Option::take) {
                return g;
            }
        }
        Tensor::zeros(shape.0, shape.1)
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(AutodiffError::ShapeMismatch {
            op,
            lhs: a.shape(),
            rhs: b.shape(),
        });
    }
    Ok(())
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
            differentiated: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var {
            tape: self.id,
            index: self.nodes.len() - 1,
        }
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    fn node(&self, v: Var) -> Result<&Node> {
        if v.tape != self.id {
            return Err(AutodiffError::ForeignVar);
        }
        self.nodes.get(v.index).ok_or(AutodiffError::ForeignVar)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.node(v).expect("variable from another tape").value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).shape()
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Result<Var> {
        let index = self.nodes.len();
        if !value.is_finite() {
            return Err(AutodiffError::NonFinite {
                op: op.name(),
                node: index,
            });
        }
        let requires_grad = inputs.iter().any(|&v| self.nodes[v.index].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var { tape: self.id, index })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (&self.node(a)?.value, &self.node(b)?.value);
        if x.cols() != y.rows() {
            return Err(AutodiffError::ShapeMismatch {
                op: "matmul",
                lhs: x.shape(),
                rhs: y.shape(),
            });
        }
        let value = x.matmul(y);
        self.push(value, Op::MatMul(a, b), &[a, b])
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let value = self.node(a)?.value.transpose();
        self.push(value, Op::Transpose(a), &[a])
    }

    /// Product of a constant sparse matrix with a recorded dense value.
    pub fn sparse_dense_matmul(&mut self, m: &Arc<CsrMatrix>, b: Var) -> Result<Var> {
        let y = &self.node(b)?.value;
        if m.cols() != y.rows() {
            return Err(AutodiffError::ShapeMismatch {
                op: "sparse_dense_matmul",
                lhs: (m.rows(), m.cols()),
                rhs: y.shape(),
            });
        }
        let value = m.matmul_dense(y);
        self.push(value, Op::SparseMatMul(Arc::clone(m), b), &[b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (&self.node(a)?.value, &self.node(b)?.value);
        same_shape("add", x, y)?;
        let value = x.zip_map(y, |p, q| p + q);
        self.push(value, Op::Add(a, b), &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (&self.node(a)?.value, &self.node(b)?.value);
        same_shape("sub", x, y)?;
        let value = x.zip_map(y, |p, q| p - q);
        self.push(value, Op::Sub(a, b), &[a, b])
    }

    pub fn elementwise_mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (&self.node(a)?.value, &self.node(b)?.value);
        same_shape("elementwise_mul", x, y)?;
        let value = x.zip_map(y, |p, q| p * q);
        self.push(value, Op::Mul(a, b), &[a, b])
    }

    pub fn scalar_mul(&mut self, a: Var, c: f64) -> Result<Var> {
        let value = self.node(a)?.value.map(|x| c * x);
        self.push(value, Op::Scale(a, c), &[a])
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        let value = self.node(a)?.value.map(|x| x + c);
        self.push(value, Op::AddScalar(a), &[a])
    }

    /// Adds a `1 x m` row to every row of an `n x m` value.
    pub fn add_row_broadcast(&mut self, a: Var, row: Var) -> Result<Var> {
        let (x, r) = (&self.node(a)?.value, &self.node(row)?.value);
        if r.rows() != 1 || r.cols() != x.cols() {
            return Err(AutodiffError::ShapeMismatch {
                op: "add_row_broadcast",
                lhs: x.shape(),
                rhs: r.shape(),
            });
        }
        let mut value = x.clone();
        for i in 0..value.rows() {
            for (v, b) in value.row_mut(i).iter_mut().zip(r.as_slice()) {
                *v += b;
            }
        }
        self.push(value, Op::AddRow(a, row), &[a, row])
    }

    /// Row-wise `softmax(logits / temperature)` with a `1 x 1` temperature.
    pub fn row_softmax_with_temperature(&mut self, logits: Var, temperature: Var) -> Result<Var> {
        let t_node = &self.node(temperature)?.value;
        if t_node.shape() != (1, 1) {
            return Err(AutodiffError::ShapeMismatch {
                op: "row_softmax_with_temperature",
                lhs: self.node(logits)?.value.shape(),
                rhs: t_node.shape(),
            });
        }
        let t = t_node.item();
        if t.is_nan() || t <= 0.0 {
            return Err(AutodiffError::InvalidArgument {
                op: "row_softmax_with_temperature",
                message: format!("temperature must be positive, got {t}"),
            });
        }
        let z = &self.node(logits)?.value;
        let mut value = Tensor::zeros(z.rows(), z.cols());
        for i in 0..z.rows() {
            let row = z.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let out = value.row_mut(i);
            let mut norm = 0.0;
            for (o, &x) in out.iter_mut().zip(row) {
                *o = ((x - max) / t).exp();
                norm += *o;
            }
            for o in out.iter_mut() {
                *o /= norm;
            }
        }
        self.push(
            value,
            Op::Softmax {
                logits,
                temperature,
            },
            &[logits, temperature],
        )
    }

    pub fn selu(&mut self, a: Var) -> Result<Var> {
        let value = self.node(a)?.value.map(|x| {
            if x > 0.0 {
                SELU_LAMBDA * x
            } else {
                SELU_LAMBDA * SELU_ALPHA * x.exp_m1()
            }
        });
        self.push(value, Op::Selu(a), &[a])
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        let value = self.node(a)?.value.map(f64::exp);
        self.push(value, Op::Exp(a), &[a])
    }

    /// Multiplies by a pre-sampled mask (already scaled by `1 / (1 - p)`).
    pub fn dropout_mask_apply(&mut self, a: Var, mask: Tensor) -> Result<Var> {
        let x = &self.node(a)?.value;
        same_shape("dropout_mask_apply", x, &mask)?;
        let value = x.zip_map(&mask, |p, m| p * m);
        self.push(value, Op::Dropout(a, mask), &[a])
    }

    /// Normalises every column over all rows with biased batch statistics,
    /// then applies the learnable `1 x m` scale and shift.
    pub fn batch_feature_norm(&mut self, a: Var, gamma: Var, beta: Var) -> Result<Var> {
        let x = &self.node(a)?.value;
        let (g, b) = (&self.node(gamma)?.value, &self.node(beta)?.value);
        let (n, m) = x.shape();
        if g.shape() != (1, m) || b.shape() != (1, m) {
            return Err(AutodiffError::ShapeMismatch {
                op: "batch_feature_norm",
                lhs: x.shape(),
                rhs: g.shape(),
            });
        }
        let mean: Vec<f64> = x.col_sums().into_iter().map(|s| s / n as f64).collect();
        let mut var = vec![0.0; m];
        for i in 0..n {
            for (j, v) in x.row(i).iter().enumerate() {
                var[j] += (v - mean[j]).powi(2);
            }
        }
        let inv_std: Vec<f64> = var
            .iter()
            .map(|v| 1.0 / (v / n as f64 + BATCH_NORM_EPS).sqrt())
            .collect();
        let mut normalized = Tensor::zeros(n, m);
        let mut value = Tensor::zeros(n, m);
        for i in 0..n {
            for j in 0..m {
                let h = (x[(i, j)] - mean[j]) * inv_std[j];
                normalized[(i, j)] = h;
                value[(i, j)] = g.as_slice()[j] * h + b.as_slice()[j];
            }
        }
        self.push(
            value,
            Op::BatchNorm {
                input: a,
                gamma,
                beta,
                normalized,
                inv_std,
            },
            &[a, gamma, beta],
        )
    }

    /// `log2(x + eps)`.
    pub fn log2_eps(&mut self, a: Var, eps: f64) -> Result<Var> {
        let value = self.node(a)?.value.map(|x| (x + eps).log2());
        self.push(value, Op::Log2Eps(a, eps), &[a])
    }

    /// `x · log2(x + eps)`.
    pub fn xlogx_eps(&mut self, a: Var, eps: f64) -> Result<Var> {
        let value = self.node(a)?.value.map(|x| x * (x + eps).log2());
        self.push(value, Op::XLogXEps(a, eps), &[a])
    }

    pub fn trace(&mut self, a: Var) -> Result<Var> {
        let x = &self.node(a)?.value;
        if x.rows() != x.cols() {
            return Err(AutodiffError::ShapeMismatch {
                op: "trace",
                lhs: x.shape(),
                rhs: x.shape(),
            });
        }
        let value = Tensor::scalar((0..x.rows()).map(|i| x[(i, i)]).sum());
        self.push(value, Op::Trace(a), &[a])
    }

    /// `n x m -> n x 1`.
    pub fn row_sum(&mut self, a: Var) -> Result<Var> {
        let value = Tensor::column(&self.node(a)?.value.row_sums());
        self.push(value, Op::RowSum(a), &[a])
    }

    /// `n x m -> 1 x m`.
    pub fn col_sum(&mut self, a: Var) -> Result<Var> {
        let sums = self.node(a)?.value.col_sums();
        let value = Tensor::from_vec(1, sums.len(), sums);
        self.push(value, Op::ColSum(a), &[a])
    }

    /// Diagonal of a square matrix as an `n x 1` column.
    pub fn diag_extract(&mut self, a: Var) -> Result<Var> {
        let x = &self.node(a)?.value;
        if x.rows() != x.cols() {
            return Err(AutodiffError::ShapeMismatch {
                op: "diag_extract",
                lhs: x.shape(),
                rhs: x.shape(),
            });
        }
        let d: Vec<f64> = (0..x.rows()).map(|i| x[(i, i)]).collect();
        self.push(Tensor::column(&d), Op::Diag(a), &[a])
    }

    pub fn sum_all(&mut self, a: Var) -> Result<Var> {
        let value = Tensor::scalar(self.node(a)?.value.sum());
        self.push(value, Op::SumAll(a), &[a])
    }

    /// Runs the reverse pass from a `1 x 1` loss. A tape may be differentiated
    /// once.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        let shape = self.node(loss)?.value.shape();
        if shape != (1, 1) {
            return Err(AutodiffError::NotScalar(shape));
        }
        if self.differentiated {
            return Err(AutodiffError::AlreadyDifferentiated);
        }
        self.differentiated = true;

        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.index] = Some(Tensor::scalar(1.0));
        for index in (0..=loss.index).rev() {
            if !self.nodes[index].requires_grad {
                continue;
            }
            let Some(g) = grads[index].take() else {
                continue;
            };
            self.pullback(index, &g, &mut grads);
            grads[index] = Some(g);
        }
        Ok(Gradients {
            tape: self.id,
            grads,
        })
    }

    fn pullback(&self, index: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let nodes = &self.nodes;
        let value = |v: Var| &nodes[v.index].value;
        let mut acc = |v: Var, delta: Tensor| {
            if !nodes[v.index].requires_grad {
                return;
            }
            match &mut grads[v.index] {
                Some(existing) => existing.add_assign(&delta),
                slot => *slot = Some(delta),
            }
        };
        let out = &nodes[index].value;
        match &nodes[index].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                acc(*a, g.matmul_t(value(*b)));
                acc(*b, value(*a).t_matmul(g));
            }
            Op::Transpose(a) => acc(*a, g.transpose()),
            Op::SparseMatMul(m, b) => acc(*b, m.t_matmul_dense(g)),
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                acc(*a, g.zip_map(value(*b), |x, y| x * y));
                acc(*b, g.zip_map(value(*a), |x, y| x * y));
            }
            Op::Scale(a, c) => acc(*a, g.map(|x| c * x)),
            Op::AddScalar(a) => acc(*a, g.clone()),
            Op::AddRow(a, row) => {
                acc(*a, g.clone());
                let sums = g.col_sums();
                acc(*row, Tensor::from_vec(1, sums.len(), sums));
            }
            Op::Softmax {
                logits,
                temperature,
            } => {
                let t = value(*temperature).item();
                let z = value(*logits);
                // Gradient with respect to the scaled logits u = z / t.
                let mut du = Tensor::zeros(out.rows(), out.cols());
                for i in 0..out.rows() {
                    let y = out.row(i);
                    let gy: f64 = g.row(i).iter().zip(y).map(|(a, b)| a * b).sum();
                    for ((d, &gi), &yi) in du.row_mut(i).iter_mut().zip(g.row(i)).zip(y) {
                        *d = yi * (gi - gy);
                    }
                }
                let dt: f64 = du
                    .as_slice()
                    .iter()
                    .zip(z.as_slice())
                    .map(|(d, x)| -d * x / (t * t))
                    .sum();
                acc(*temperature, Tensor::scalar(dt));
                acc(*logits, du.map(|d| d / t));
            }
            Op::Selu(a) => acc(
                *a,
                g.zip_map(value(*a), |gi, x| {
                    if x > 0.0 {
                        gi * SELU_LAMBDA
                    } else {
                        gi * SELU_LAMBDA * SELU_ALPHA * x.exp()
                    }
                }),
            ),
            Op::Exp(a) => acc(*a, g.zip_map(out, |gi, y| gi * y)),
            Op::Dropout(a, mask) => acc(*a, g.zip_map(mask, |gi, m| gi * m)),
            Op::BatchNorm {
                input,
                gamma,
                beta,
                normalized,
                inv_std,
            } => {
                let (n, m) = g.shape();
                let gamma_v = value(*gamma).as_slice();
                let mut sum_g = vec![0.0; m];
                let mut sum_gh = vec![0.0; m];
                for i in 0..n {
                    for j in 0..m {
                        sum_g[j] += g[(i, j)];
                        sum_gh[j] += g[(i, j)] * normalized[(i, j)];
                    }
                }
                let nf = n as f64;
                let mut dx = Tensor::zeros(n, m);
                for i in 0..n {
                    for j in 0..m {
                        dx[(i, j)] = gamma_v[j] * inv_std[j] / nf
                            * (nf * g[(i, j)] - sum_g[j] - normalized[(i, j)] * sum_gh[j]);
                    }
                }
                acc(*input, dx);
                acc(*gamma, Tensor::from_vec(1, m, sum_gh));
                acc(*beta, Tensor::from_vec(1, m, sum_g));
            }
            Op::Log2Eps(a, eps) => {
                acc(*a, g.zip_map(value(*a), |gi, x| gi / ((x + eps) * LN_2)));
            }
            Op::XLogXEps(a, eps) => acc(
                *a,
                g.zip_map(value(*a), |gi, x| {
                    gi * ((x + eps).log2() + x / ((x + eps) * LN_2))
                }),
            ),
            Op::Trace(a) => {
                let (r, c) = value(*a).shape();
                let mut d = Tensor::zeros(r, c);
                for i in 0..r {
                    d[(i, i)] = g.item();
                }
                acc(*a, d);
            }
            Op::RowSum(a) => {
                let (r, c) = value(*a).shape();
                let mut d = Tensor::zeros(r, c);
                for i in 0..r {
                    d.row_mut(i).fill(g[(i, 0)]);
                }
                acc(*a, d);
            }
            Op::ColSum(a) => {
                let (r, c) = value(*a).shape();
                let mut d = Tensor::zeros(r, c);
                for i in 0..r {
                    d.row_mut(i).copy_from_slice(g.as_slice());
                }
                acc(*a, d);
            }
            Op::Diag(a) => {
                let (r, c) = value(*a).shape();
                let mut d = Tensor::zeros(r, c);
                for i in 0..r {
                    d[(i, i)] = g[(i, 0)];
                }
                acc(*a, d);
            }
            Op::SumAll(a) => {
                let (r, c) = value(*a).shape();
                acc(*a, Tensor::filled(r, c, g.item()));
            }
        }
    }
}
