//! Map-equation codelengths: exact evaluators over hard partitions, the
//! differentiable soft form, and an exhaustive partition oracle.

mod brute;
mod hard;
mod partition;
mod soft;

use serde::Serialize;

pub use brute::{brute_force_optimum, RestrictedGrowth, DEFAULT_MAX_N};
pub use hard::{
    codelength_entropy_form, codelength_expanded_form, codelength_expanded_general,
    codelength_undirected_form, ModuleFlows,
};
pub use partition::{load_partition, read_labels, write_partition, Partition};
pub use soft::{
    codelength_soft, codelength_soft_with_mode, record_soft_loss, soft_node_term, NodeFlowMode,
    SoftAssignment, SoftLoss, SOFT_EPS,
};

/// `x · log2(x)` with `0 · log 0 = 0`.
pub fn plogp(x: f64) -> f64 {
    if x > 0.0 {
        x * x.log2()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModuleCodelength {
    /// Module entry rate.
    pub enter: f64,
    pub exit: f64,
    /// Summed visit rate of the module's nodes (fractional for soft input).
    pub node_flow: f64,
    /// Codebook usage rate `p_m`.
    pub usage: f64,
    /// Contribution to the module-level term, in bits.
    pub codelength: f64,
}

/// Codelength in bits with its index/module split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Codelength {
    pub total: f64,
    pub index: f64,
    pub module: f64,
    /// Total module entry rate `q`.
    pub index_rate: f64,
    /// `H(P)`, the one-module codelength; constant for a fixed flow model.
    pub node_entropy: f64,
    pub per_module: Vec<ModuleCodelength>,
}

impl Codelength {
    pub(crate) fn assemble(
        index: f64,
        module: f64,
        index_rate: f64,
        node_entropy: f64,
        per_module: Vec<ModuleCodelength>,
    ) -> Self {
        Self {
            total: index + module,
            index,
            module,
            index_rate,
            node_entropy,
            per_module,
        }
    }
}
