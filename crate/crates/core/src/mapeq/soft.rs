//! Soft map equation over a row-stochastic assignment matrix `S`.
//!
//! Module flows are pooled as `C = SᵀFS`: row sums minus the diagonal give
//! exit rates, column sums minus the diagonal give entry rates, and column
//! sums alone give each module's node flow. The loss is
//! `q log q − Σ enter log enter − Σ exit log exit + Σ p_m log p_m` with `ε`
//! inside every logarithm. The node term `−Σ p log p` does not depend on `S`
//! and stays off the tape.

use std::sync::Arc;

use crate::autodiff::{AutodiffError, Tape, Var};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use crate::tensor::Tensor;

use super::{plogp, Codelength, ModuleCodelength, Partition};

/// Smoothing constant inside the logarithms of the soft loss.
pub const SOFT_EPS: f64 = 1e-8;

const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// `n x s` matrix with entries in `[0, 1]` and unit row sums.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftAssignment(Tensor);

impl SoftAssignment {
    pub fn new(s: Tensor) -> Result<Self> {
        if s.cols() == 0 {
            return Err(Error::DimensionMismatch("soft assignment has no columns".into()));
        }
        for i in 0..s.rows() {
            let row = s.row(i);
            if let Some(bad) = row.iter().find(|&&x| !(0.0..=1.0).contains(&x)) {
                return Err(Error::NotStochastic(format!("row {i} has entry {bad}")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::NotStochastic(format!("row {i} sums to {sum}")));
            }
        }
        Ok(Self(s))
    }

    /// One-hot encoding of `partition` with `s ≥ module_count` columns.
    pub fn one_hot(partition: &Partition, s: usize) -> Result<Self> {
        if s < partition.module_count() || s == 0 {
            return Err(Error::DimensionMismatch(format!(
                "{s} columns for {} modules",
                partition.module_count()
            )));
        }
        let mut t = Tensor::zeros(partition.n(), s);
        for (u, &m) in partition.labels().iter().enumerate() {
            t[(u, m)] = 1.0;
        }
        Ok(Self(t))
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn s(&self) -> usize {
        self.0.cols()
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor {
        self.0
    }
}

/// How a node's visit rate is charged inside module codebooks when it is
/// spread over several modules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeFlowMode {
    /// Each fraction `s_ui p_u` is a separate codeword.
    Split,
    /// Each fraction reuses the whole node's codeword probability `p_u`.
    Indivisible,
}

/// Taped soft loss. `loss` excludes the constant node term, so the total in
/// bits is `value(loss) + node_term`.
#[derive(Debug, Clone, Copy)]
pub struct SoftLoss {
    pub loss: Var,
    pub node_term: f64,
    pub index_rate: Var,
    pub enter: Var,
    pub exit: Var,
    pub usage: Var,
}

fn check_dims(flow: &CsrMatrix, p: &[f64], n: usize) -> Result<()> {
    if flow.rows() != flow.cols() || flow.rows() != p.len() || p.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "flow {}x{}, visit rates {}, assignment rows {n}",
            flow.rows(),
            flow.cols(),
            p.len()
        )));
    }
    Ok(())
}

fn node_term(p: &[f64]) -> f64 {
    -p.iter().map(|&x| plogp(x)).sum::<f64>()
}

/// Records the soft loss of assignment `s` on `tape`.
pub fn record_soft_loss(
    tape: &mut Tape,
    flow: &Arc<CsrMatrix>,
    p: &[f64],
    s: Var,
    eps: f64,
) -> std::result::Result<SoftLoss, AutodiffError> {
    let fs = tape.sparse_dense_matmul(flow, s)?;
    let st = tape.transpose(s)?;
    let c = tape.matmul(st, fs)?;

    let tr = tape.trace(c)?;
    let neg = tape.scalar_mul(tr, -1.0)?;
    let q = tape.add_scalar(neg, 1.0)?;
    let diag = tape.diag_extract(c)?;
    let out = tape.row_sum(c)?;
    let into_row = tape.col_sum(c)?;
    let into = tape.transpose(into_row)?;
    let exit = tape.sub(out, diag)?;
    let enter = tape.sub(into, diag)?;
    let usage = tape.add(exit, into)?;

    let q_term = tape.xlogx_eps(q, eps)?;
    let enter_x = tape.xlogx_eps(enter, eps)?;
    let enter_term = tape.sum_all(enter_x)?;
    let exit_x = tape.xlogx_eps(exit, eps)?;
    let exit_term = tape.sum_all(exit_x)?;
    let usage_x = tape.xlogx_eps(usage, eps)?;
    let usage_term = tape.sum_all(usage_x)?;

    let a = tape.sub(q_term, enter_term)?;
    let b = tape.sub(a, exit_term)?;
    let loss = tape.add(b, usage_term)?;
    Ok(SoftLoss {
        loss,
        node_term: node_term(p),
        index_rate: q,
        enter,
        exit,
        usage,
    })
}

struct Pooled {
    q: f64,
    enter: Vec<f64>,
    exit: Vec<f64>,
    into: Vec<f64>,
    usage: Vec<f64>,
}

fn pooled(flow: &CsrMatrix, p: &[f64], s: &SoftAssignment) -> Result<(Pooled, SoftLoss, Tape)> {
    check_dims(flow, p, s.n())?;
    let flow = Arc::new(flow.clone());
    let mut tape = Tape::new();
    let sv = tape.constant(s.tensor().clone());
    let soft = record_soft_loss(&mut tape, &flow, p, sv, SOFT_EPS)?;
    let enter = tape.value(soft.enter).as_slice().to_vec();
    let exit = tape.value(soft.exit).as_slice().to_vec();
    let usage = tape.value(soft.usage).as_slice().to_vec();
    let into = usage.iter().zip(&exit).map(|(u, x)| u - x).collect();
    let pooled = Pooled {
        q: tape.value(soft.index_rate).item(),
        enter,
        exit,
        into,
        usage,
    };
    Ok((pooled, soft, tape))
}

/// Soft codelength with `ε`-smoothed logarithms. The reported total includes
/// the exact node term.
pub fn codelength_soft(flow: &CsrMatrix, p: &[f64], s: &SoftAssignment) -> Result<Codelength> {
    let (m, soft, _) = pooled(flow, p, s)?;
    let xl = |x: f64| x * (x + SOFT_EPS).log2();
    let index = xl(m.q) - m.enter.iter().map(|&x| xl(x)).sum::<f64>();
    let node_share = node_plogp_by_column(p, s);
    let per_module: Vec<ModuleCodelength> = (0..s.s())
        .map(|k| ModuleCodelength {
            enter: m.enter[k],
            exit: m.exit[k],
            node_flow: m.into[k],
            usage: m.usage[k],
            codelength: xl(m.usage[k]) - xl(m.exit[k]) - node_share[k],
        })
        .collect();
    let module = per_module.iter().map(|c| c.codelength).sum();
    Ok(Codelength::assemble(index, module, m.q, soft.node_term, per_module))
}

fn node_plogp_by_column(p: &[f64], s: &SoftAssignment) -> Vec<f64> {
    let mut out = vec![0.0; s.s()];
    for (u, &pu) in p.iter().enumerate() {
        for (k, &w) in s.tensor().row(u).iter().enumerate() {
            out[k] += w * plogp(pu);
        }
    }
    out
}

/// Node-level codelength term of a soft assignment given module usage rates.
///
/// `Split` charges `−Σ s_ui p_u log2(s_ui p_u / p_i)`, `Indivisible` charges
/// `−Σ s_ui p_u log2(p_u / p_i)`. Zero-mass terms contribute 0.
pub fn soft_node_term(p: &[f64], s: &SoftAssignment, usage: &[f64], mode: NodeFlowMode) -> f64 {
    (0..s.s()).map(|k| column_node_term(p, s, k, usage[k], mode)).sum()
}

/// Exact soft codelength (`0·log 0 = 0`, no smoothing) under a node-flow
/// accounting mode. `Indivisible` reproduces the unsmoothed soft loss.
pub fn codelength_soft_with_mode(
    flow: &CsrMatrix,
    p: &[f64],
    s: &SoftAssignment,
    mode: NodeFlowMode,
) -> Result<Codelength> {
    let (m, soft, _) = pooled(flow, p, s)?;
    let index = plogp(m.q) - m.enter.iter().map(|&x| plogp(x)).sum::<f64>();
    let per_module: Vec<ModuleCodelength> = (0..s.s())
        .map(|k| {
            let usage = m.usage[k];
            let mut bits = -plogp(m.exit[k]);
            if usage > 0.0 {
                bits += m.exit[k] * usage.log2();
            }
            bits += column_node_term(p, s, k, usage, mode);
            ModuleCodelength {
                enter: m.enter[k],
                exit: m.exit[k],
                node_flow: m.into[k],
                usage,
                codelength: bits,
            }
        })
        .collect();
    let module = per_module.iter().map(|c| c.codelength).sum();
    Ok(Codelength::assemble(index, module, m.q, soft.node_term, per_module))
}

fn column_node_term(p: &[f64], s: &SoftAssignment, k: usize, usage: f64, mode: NodeFlowMode) -> f64 {
    let mut bits = 0.0;
    for (u, &pu) in p.iter().enumerate() {
        let mass = s.tensor()[(u, k)] * pu;
        if mass <= 0.0 {
            continue;
        }
        let codeword = match mode {
            NodeFlowMode::Split => mass,
            NodeFlowMode::Indivisible => pu,
        };
        bits -= mass * (codeword / usage).log2();
    }
    bits
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::FlowModel;
    use crate::generators;
    use crate::mapeq::codelength_expanded_form;

    fn h(p: &[f64]) -> f64 {
        node_term(p)
    }

    #[test]
    fn validation() {
        assert!(SoftAssignment::new(Tensor::from_rows(&[vec![0.5, 0.5], vec![1.0, 0.0]])).is_ok());
        assert!(SoftAssignment::new(Tensor::from_rows(&[vec![0.5, 0.6]])).is_err());
        assert!(SoftAssignment::new(Tensor::from_rows(&[vec![1.5, -0.5]])).is_err());
        assert!(SoftAssignment::one_hot(&Partition::singletons(3), 2).is_err());
    }

    #[test]
    fn single_column_is_node_entropy() {
        let (g, _) = generators::barbell();
        let flow = FlowModel::with_defaults(&g).unwrap();
        let s = SoftAssignment::one_hot(&Partition::one_module(6), 1).unwrap();
        let l = codelength_soft(flow.flow(), flow.visit_rates(), &s).unwrap();
        assert!((l.total - h(flow.visit_rates())).abs() < 1e-7);
        assert!(l.index_rate.abs() < 1e-15);

        let s = SoftAssignment::one_hot(&Partition::one_module(6), 4).unwrap();
        let l4 = codelength_soft(flow.flow(), flow.visit_rates(), &s).unwrap();
        assert!((l4.total - l.total).abs() < 1e-12);
    }

    #[test]
    fn one_hot_matches_hard() {
        let (g, truth) = generators::barbell();
        let flow = FlowModel::with_defaults(&g).unwrap();
        let s = SoftAssignment::one_hot(&truth, 6).unwrap();
        let soft = codelength_soft(flow.flow(), flow.visit_rates(), &s).unwrap();
        let hard = codelength_expanded_form(&flow, &truth).unwrap();
        assert!((soft.total - hard.total).abs() < 1e-6);
        assert!((soft.total - soft.index - soft.module).abs() < 1e-15);
        let exact =
            codelength_soft_with_mode(flow.flow(), flow.visit_rates(), &s, NodeFlowMode::Split).unwrap();
        assert!((exact.total - hard.total).abs() < 1e-14);
    }

    #[test]
    fn modes_agree_on_one_hot_and_differ_by_split_entropy() {
        let (g, truth) = generators::barbell();
        let flow = FlowModel::with_defaults(&g).unwrap();
        let p = flow.visit_rates();
        let s = SoftAssignment::one_hot(&truth, 2).unwrap();
        let usage = [4.0 / 7.0; 2];
        let a = soft_node_term(p, &s, &usage, NodeFlowMode::Split);
        let b = soft_node_term(p, &s, &usage, NodeFlowMode::Indivisible);
        assert_eq!(a, b);

        // Node 2 split evenly: split mode pays exactly p_2 more bits.
        let mut t = s.tensor().clone();
        t[(2, 0)] = 0.5;
        t[(2, 1)] = 0.5;
        let s = SoftAssignment::new(t).unwrap();
        let a = soft_node_term(p, &s, &usage, NodeFlowMode::Split);
        let b = soft_node_term(p, &s, &usage, NodeFlowMode::Indivisible);
        assert!((a - b - p[2]).abs() < 1e-15);
    }

    #[test]
    fn dimension_errors() {
        let (g, _) = generators::barbell();
        let flow = FlowModel::with_defaults(&g).unwrap();
        let s = SoftAssignment::one_hot(&Partition::one_module(5), 1).unwrap();
        assert!(matches!(
            codelength_soft(flow.flow(), flow.visit_rates(), &s),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
