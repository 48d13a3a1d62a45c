//! Random-walk flow on a graph.
//!
//! The walker follows an out-link with probability `1 - alpha` and otherwise
//! teleports to a link chosen proportionally to its weight, which lands it on
//! a node with probability proportional to the node's in-strength. A node
//! without out-links spends its whole step teleporting, so no probability
//! mass leaks out of the chain and the flow matrix always sums to one.
//!
//! For undirected graphs the stationary visit rates are proportional to node
//! strength; that closed form is used by default and is a fixed point of the
//! teleporting chain for every `alpha`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::sparse::CsrMatrix;

pub const DEFAULT_ALPHA: f64 = 0.15;
pub const DEFAULT_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowOptions {
    /// Teleportation probability.
    pub alpha: f64,
    /// L1 change between sweeps below which the power iteration stops.
    pub tolerance: f64,
    pub max_iter: usize,
    /// Use the power iteration on undirected graphs too.
    pub force_power_iteration: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            tolerance: DEFAULT_TOLERANCE,
            max_iter: DEFAULT_MAX_ITER,
            force_power_iteration: false,
        }
    }
}

/// Result of the power iteration. When `converged` is false `rates` holds the
/// last iterate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VisitRates {
    pub rates: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// L1 change of the final sweep.
    pub residual: f64,
}

/// Row-normalised transition matrix; rows of nodes without out-links are zero.
pub fn transition_matrix(graph: &Graph) -> CsrMatrix {
    let out = graph.out_strength();
    graph
        .adjacency()
        .map_values(|i, _, w| if out[i] > 0.0 { w / out[i] } else { 0.0 })
}

/// `p_u = s_u / Σ_v s_v` for undirected graphs.
pub fn visit_rates_closed_form(graph: &Graph) -> Result<Vec<f64>> {
    if graph.is_directed() {
        return Err(Error::DirectedGraph);
    }
    let total = graph.total_weight();
    Ok(graph.out_strength().into_iter().map(|s| s / total).collect())
}

/// Smart-teleportation power iteration starting from the normalised
/// in-strength vector and renormalising after every sweep.
pub fn visit_rates_power_iteration(
    graph: &Graph,
    alpha: f64,
    tolerance: f64,
    max_iter: usize,
) -> Result<VisitRates> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidConfig(format!("alpha must be in (0, 1], got {alpha}")));
    }
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(Error::InvalidConfig(format!("tolerance must be positive, got {tolerance}")));
    }
    let n = graph.n();
    let total = graph.total_weight();
    let teleport: Vec<f64> = graph.in_strength().iter().map(|d| d / total).collect();
    let transition = transition_matrix(graph);
    let dangling: Vec<usize> = graph
        .out_strength()
        .iter()
        .enumerate()
        .filter(|(_, &s)| s == 0.0)
        .map(|(u, _)| u)
        .collect();

    let mut p = teleport.clone();
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let dangling_mass: f64 = dangling.iter().map(|&u| p[u]).sum();
        let restart = alpha + (1.0 - alpha) * dangling_mass;
        for (x, t) in next.iter_mut().zip(&teleport) {
            *x = restart * t;
        }
        for (u, v, t) in transition.iter() {
            next[v] += (1.0 - alpha) * p[u] * t;
        }
        let norm: f64 = next.iter().sum();
        for x in &mut next {
            *x /= norm;
        }
        residual = p.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut p, &mut next);
        if residual < tolerance {
            return Ok(VisitRates {
                rates: p,
                iterations,
                converged: true,
                residual,
            });
        }
    }
    Ok(VisitRates {
        rates: p,
        iterations,
        converged: false,
        residual,
    })
}

/// `F = (alpha + (1 - alpha)·D)/w_tot · A + (1 - alpha)·diag(p)·T`, where `D`
/// is the visit rate mass sitting on nodes without out-links.
pub fn flow_matrix(graph: &Graph, p: &[f64], alpha: f64) -> CsrMatrix {
    let out = graph.out_strength();
    let total = graph.total_weight();
    let dangling_mass: f64 = out
        .iter()
        .zip(p)
        .filter(|(&s, _)| s == 0.0)
        .map(|(_, &pu)| pu)
        .sum();
    let teleport = (alpha + (1.0 - alpha) * dangling_mass) / total;
    graph
        .adjacency()
        .map_values(|u, _, w| teleport * w + (1.0 - alpha) * p[u] * w / out[u])
}

/// Visit rates, transition and flow matrices for one teleportation setting.
#[derive(Debug, Clone)]
pub struct FlowModel {
    visit_rates: Vec<f64>,
    transition: CsrMatrix,
    flow: Arc<CsrMatrix>,
    alpha: f64,
    symmetric: bool,
    power_iteration: Option<VisitRates>,
}

impl FlowModel {
    pub fn new(graph: &Graph, options: &FlowOptions) -> Result<Self> {
        let transition = transition_matrix(graph);
        if !graph.is_directed() && !options.force_power_iteration {
            let visit_rates = visit_rates_closed_form(graph)?;
            let total = graph.total_weight();
            // With strength-proportional rates the teleportation and walk terms
            // coincide and F reduces to A / w_tot for any alpha.
            let flow = graph.adjacency().map_values(|_, _, w| w / total);
            return Ok(Self {
                visit_rates,
                transition,
                flow: Arc::new(flow),
                alpha: options.alpha,
                symmetric: true,
                power_iteration: None,
            });
        }
        let rates = visit_rates_power_iteration(
            graph,
            options.alpha,
            options.tolerance,
            options.max_iter,
        )?;
        if !rates.converged {
            log::warn!(
                "power iteration stopped after {} sweeps with L1 change {:.3e}",
                rates.iterations,
                rates.residual
            );
        }
        let flow = flow_matrix(graph, &rates.rates, options.alpha);
        Ok(Self {
            visit_rates: rates.rates.clone(),
            transition,
            flow: Arc::new(flow),
            alpha: options.alpha,
            symmetric: !graph.is_directed(),
            power_iteration: Some(rates),
        })
    }

    pub fn with_defaults(graph: &Graph) -> Result<Self> {
        Self::new(graph, &FlowOptions::default())
    }

    pub fn n(&self) -> usize {
        self.visit_rates.len()
    }

    pub fn visit_rates(&self) -> &[f64] {
        &self.visit_rates
    }

    pub fn transition(&self) -> &CsrMatrix {
        &self.transition
    }

    pub fn flow(&self) -> &CsrMatrix {
        &self.flow
    }

    pub fn shared_flow(&self) -> Arc<CsrMatrix> {
        Arc::clone(&self.flow)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// True when entry and exit flows of any node set coincide (undirected
    /// input), which enables the shorter undirected codelength form.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn power_iteration(&self) -> Option<&VisitRates> {
        self.power_iteration.as_ref()
    }
}
