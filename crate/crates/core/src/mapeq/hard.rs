//! Exact codelength of hard partitions.
//!
//! Entry and exit rates are read off the flow matrix `F` so that the hard and
//! soft evaluators share one flow source. `0·log 0` is taken as 0 exactly.

use crate::error::Result;
use crate::flow::FlowModel;

use super::{plogp, Codelength, ModuleCodelength, Partition};

/// Per-module flow quantities of a hard partition.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleFlows {
    pub enter: Vec<f64>,
    pub exit: Vec<f64>,
    /// Sum of member visit rates.
    pub node_flow: Vec<f64>,
}

impl ModuleFlows {
    pub fn compute(flow: &FlowModel, partition: &Partition) -> Result<Self> {
        partition.check_len(flow.n())?;
        Ok(Self::from_labels(flow, partition.labels(), partition.module_count()))
    }

    pub(crate) fn from_labels(flow: &FlowModel, labels: &[usize], modules: usize) -> Self {
        let mut enter = vec![0.0; modules];
        let mut exit = vec![0.0; modules];
        let mut node_flow = vec![0.0; modules];
        for (u, &p) in flow.visit_rates().iter().enumerate() {
            node_flow[labels[u]] += p;
        }
        for (u, v, f) in flow.flow().iter() {
            let (a, b) = (labels[u], labels[v]);
            if a != b {
                exit[a] += f;
                enter[b] += f;
            }
        }
        Self {
            enter,
            exit,
            node_flow,
        }
    }

    /// `p_m = m_exit + Σ_{u∈m} p_u`.
    pub fn usage(&self, m: usize) -> f64 {
        self.exit[m] + self.node_flow[m]
    }

    /// Total module entry rate `q`.
    pub fn index_rate(&self) -> f64 {
        self.enter.iter().sum()
    }
}

fn node_plogp_by_module(flow: &FlowModel, partition: &Partition) -> Vec<f64> {
    let mut out = vec![0.0; partition.module_count()];
    for (u, &p) in flow.visit_rates().iter().enumerate() {
        out[partition.label(u)] += plogp(p);
    }
    out
}

fn node_entropy(flow: &FlowModel) -> f64 {
    -flow.visit_rates().iter().map(|&p| plogp(p)).sum::<f64>()
}

/// `L = q·H(Q) + Σ_m p_m·H(P_m)`, evaluated entropy by entropy.
pub fn codelength_entropy_form(flow: &FlowModel, partition: &Partition) -> Result<Codelength> {
    let mf = ModuleFlows::compute(flow, partition)?;
    let q = mf.index_rate();
    let index = if q > 0.0 {
        -q * mf.enter.iter().map(|&qm| plogp(qm / q)).sum::<f64>()
    } else {
        0.0
    };

    let mut members: Vec<Vec<f64>> = vec![Vec::new(); partition.module_count()];
    for (u, &p) in flow.visit_rates().iter().enumerate() {
        members[partition.label(u)].push(p);
    }
    let per_module: Vec<ModuleCodelength> = (0..partition.module_count())
        .map(|m| {
            let usage = mf.usage(m);
            let codelength = if usage > 0.0 {
                let h = plogp(mf.exit[m] / usage)
                    + members[m].iter().map(|&p| plogp(p / usage)).sum::<f64>();
                -usage * h
            } else {
                0.0
            };
            ModuleCodelength {
                enter: mf.enter[m],
                exit: mf.exit[m],
                node_flow: mf.node_flow[m],
                usage,
                codelength,
            }
        })
        .collect();
    let module = per_module.iter().map(|m| m.codelength).sum();
    Ok(Codelength::assemble(index, module, q, node_entropy(flow), per_module))
}

/// Expanded form, using the undirected simplification when the flow model is
/// symmetric.
pub fn codelength_expanded_form(flow: &FlowModel, partition: &Partition) -> Result<Codelength> {
    if flow.is_symmetric() {
        codelength_undirected_form(flow, partition)
    } else {
        codelength_expanded_general(flow, partition)
    }
}

/// `L = q log q − Σ q_m log q_m − Σ m_exit log m_exit − Σ p_u log p_u + Σ p_m log p_m`.
pub fn codelength_expanded_general(flow: &FlowModel, partition: &Partition) -> Result<Codelength> {
    let mf = ModuleFlows::compute(flow, partition)?;
    let q = mf.index_rate();
    let index = plogp(q) - mf.enter.iter().map(|&x| plogp(x)).sum::<f64>();
    let nodes = node_plogp_by_module(flow, partition);
    let per_module: Vec<ModuleCodelength> = (0..partition.module_count())
        .map(|m| {
            let usage = mf.usage(m);
            ModuleCodelength {
                enter: mf.enter[m],
                exit: mf.exit[m],
                node_flow: mf.node_flow[m],
                usage,
                codelength: plogp(usage) - plogp(mf.exit[m]) - nodes[m],
            }
        })
        .collect();
    let module = per_module.iter().map(|m| m.codelength).sum();
    Ok(Codelength::assemble(index, module, q, node_entropy(flow), per_module))
}

/// `L = q log q − 2 Σ q_m log q_m − Σ p_u log p_u + Σ p_m log p_m`, valid when
/// every module's entry rate equals its exit rate.
pub fn codelength_undirected_form(flow: &FlowModel, partition: &Partition) -> Result<Codelength> {
    let mf = ModuleFlows::compute(flow, partition)?;
    let q = mf.index_rate();
    let index = plogp(q) - mf.enter.iter().map(|&x| plogp(x)).sum::<f64>();
    let nodes = node_plogp_by_module(flow, partition);
    let per_module: Vec<ModuleCodelength> = (0..partition.module_count())
        .map(|m| {
            let usage = mf.enter[m] + mf.node_flow[m];
            ModuleCodelength {
                enter: mf.enter[m],
                exit: mf.exit[m],
                node_flow: mf.node_flow[m],
                usage,
                codelength: plogp(usage) - plogp(mf.enter[m]) - nodes[m],
            }
        })
        .collect();
    let module = per_module.iter().map(|m| m.codelength).sum();
    Ok(Codelength::assemble(index, module, q, node_entropy(flow), per_module))
}

/// Scalar expanded-form codelength over raw labels; the hot path of the
/// exhaustive search.
pub(crate) fn expanded_total(flow: &FlowModel, labels: &[usize], modules: usize, node_term: f64) -> f64 {
    let mf = ModuleFlows::from_labels(flow, labels, modules);
    let q = mf.index_rate();
    let mut total = plogp(q) + node_term;
    for m in 0..modules {
        total += plogp(mf.usage(m)) - plogp(mf.enter[m]) - plogp(mf.exit[m]);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;
    use crate::graph::Graph;

    fn undirected(n: usize, edges: &[(usize, usize)]) -> FlowModel {
        let g = Graph::from_links(n, false, edges.iter().map(|&(u, v)| (u, v, 1.0))).unwrap();
        FlowModel::with_defaults(&g).unwrap()
    }

    #[test]
    fn one_module_is_node_entropy() {
        let flow = undirected(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        let one = Partition::one_module(4);
        for l in [
            codelength_entropy_form(&flow, &one).unwrap(),
            codelength_expanded_form(&flow, &one).unwrap(),
            codelength_expanded_general(&flow, &one).unwrap(),
        ] {
            assert!((l.total - 2.0).abs() < 1e-15, "{}", l.total);
            assert_eq!(l.index, 0.0);
            assert_eq!(l.index_rate, 0.0);
        }
    }

    #[test]
    fn barbell_two_module_value() {
        // Hand expansion of the undirected form with p = (2,2,3,3,2,2)/14,
        // q_m = 1/14 and p_m = 4/7:
        // (1/7)log(1/7) − 4(1/14)log(1/14) − Σ p log p + 2(4/7)log(4/7).
        const EXPECTED: f64 = 2.3207303568337903;
        let (g, truth) = generators::barbell();
        let flow = FlowModel::with_defaults(&g).unwrap();
        let entropy = codelength_entropy_form(&flow, &truth).unwrap();
        let expanded = codelength_expanded_form(&flow, &truth).unwrap();
        assert!((entropy.total - EXPECTED).abs() < 1e-14);
        assert!((expanded.total - EXPECTED).abs() < 1e-14);
        assert!((entropy.index_rate - 1.0 / 7.0).abs() < 1e-15);
        for m in &entropy.per_module {
            assert!((m.usage - 4.0 / 7.0).abs() < 1e-15);
        }
    }

    #[test]
    fn directed_singletons_agree_across_forms() {
        let g = Graph::from_links(2, true, [(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let flow = FlowModel::with_defaults(&g).unwrap();
        let part = Partition::singletons(2);
        let a = codelength_entropy_form(&flow, &part).unwrap();
        let b = codelength_expanded_form(&flow, &part).unwrap();
        assert!((a.total - b.total).abs() < 1e-12);
        assert!((a.index - b.index).abs() < 1e-12);
        // Every step leaves a module: one index bit, and each module codebook
        // spends one bit on (exit, node) at usage 1.
        assert!((a.index - 1.0).abs() < 1e-12);
        assert!((a.total - 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_visit_rates_are_exact() {
        // Node 0 has no in-links and therefore no visit rate.
        let g = Graph::from_links(3, true, [(0, 1, 1.0), (1, 2, 1.0), (2, 1, 1.0)]).unwrap();
        let flow = FlowModel::with_defaults(&g).unwrap();
        assert_eq!(flow.visit_rates()[0], 0.0);
        let part = Partition::new(vec![0, 1, 1]).unwrap();
        let a = codelength_entropy_form(&flow, &part).unwrap();
        let b = codelength_expanded_form(&flow, &part).unwrap();
        assert!(a.total.is_finite() && (a.total - b.total).abs() < 1e-12);
    }

    #[test]
    fn partition_length_checked() {
        let flow = undirected(3, &[(0, 1), (1, 2)]);
        assert!(codelength_entropy_form(&flow, &Partition::one_module(2)).is_err());
    }
}
