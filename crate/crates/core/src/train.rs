//! Full-batch Adam training of an encoder against the soft codelength.
//!
//! Every epoch first evaluates the loss with dropout off; that value drives
//! best-state tracking and early stopping. The parameter update then uses a
//! freshly sampled dropout mask, or reuses the evaluation tape when the
//! encoder has no dropout.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::flow::FlowModel;
use crate::graph::Graph;
use crate::mapeq::{codelength_expanded_form, record_soft_loss, Partition, SoftAssignment, SOFT_EPS};
use crate::neural::{
    encode, init_params, normalize_adjacency, sample_dropout_mask, Architecture, EncoderConfig,
    EncoderParams, MessageOperator,
};
use crate::tensor::Tensor;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Golden-ratio stride between restart seeds.
const TRIAL_SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;
const DROPOUT_STREAM: u64 = 0xD1B5_4A32_D192_ED03;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    /// Smallest loss decrease, in bits, that resets the patience counter.
    pub epsilon_loss: f64,
    /// Independent restarts; the lowest-loss one is returned.
    pub trials: usize,
}

impl TrainConfig {
    pub fn for_arch(arch: Architecture) -> Self {
        Self {
            lr: arch.default_lr(),
            max_epochs: 10_000,
            patience: 100,
            seed: 0,
            epsilon_loss: 1e-6,
            trials: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig(format!("lr = {} must be positive", self.lr)));
        }
        if self.patience == 0 || self.trials == 0 {
            return Err(Error::InvalidConfig("patience and trials must be at least 1".into()));
        }
        if self.epsilon_loss.is_nan() || self.epsilon_loss < 0.0 {
            return Err(Error::InvalidConfig("epsilon_loss must be non-negative".into()));
        }
        Ok(())
    }

    /// Seed of restart `trial`; restart 0 uses `seed` itself.
    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.seed.wrapping_add((trial as u64).wrapping_mul(TRIAL_SEED_STRIDE))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
}

impl AdamState {
    pub fn new(params: &[Tensor]) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.rows(), p.cols())).collect();
        Self {
            m: zeros(),
            v: zeros(),
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[Tensor] {
        &self.m
    }

    pub fn second_moment(&self) -> &[Tensor] {
        &self.v
    }
}

/// Bias-corrected Adam update of every parameter in place.
pub fn adam_step(params: &mut [Tensor], grads: &[Tensor], state: &mut AdamState, lr: f64) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} parameters, {} gradients, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (k, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || p.shape() != state.m[k].shape() {
            return Err(Error::DimensionMismatch(format!(
                "parameter {k} is {:?}, gradient {:?}",
                p.shape(),
                g.shape()
            )));
        }
        if !g.is_finite() {
            return Err(Error::NonFinite(format!("gradient of parameter {k}")));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        let p = p.as_mut_slice();
        let (m, v) = (m.as_mut_slice(), v.as_mut_slice());
        for (k, &gk) in g.as_slice().iter().enumerate() {
            m[k] = ADAM_BETA1 * m[k] + (1.0 - ADAM_BETA1) * gk;
            v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * gk * gk;
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            p[k] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
    Ok(())
}

/// Row-wise argmax (lowest column on ties), relabelled densely in ascending
/// column order.
pub fn hard_partition(s: &SoftAssignment) -> Partition {
    let t = s.tensor();
    let raw: Vec<usize> = (0..t.rows()).map(|i| t.row_argmax(i)).collect();
    let mut used = vec![false; t.cols()];
    for &c in &raw {
        used[c] = true;
    }
    let mut dense = vec![usize::MAX; t.cols()];
    let mut next = 0;
    for (c, u) in used.iter().enumerate() {
        if *u {
            dense[c] = next;
            next += 1;
        }
    }
    Partition::new(raw.iter().map(|&c| dense[c]).collect()).expect("dense by construction")
}

#[derive(Debug, Clone)]
pub struct TrainedResult {
    pub best_params: EncoderParams,
    /// Lowest evaluated soft codelength, node term included.
    pub best_loss_bits: f64,
    pub loss_history: Vec<f64>,
    pub best_s: SoftAssignment,
    pub best_epoch: usize,
    pub epochs_run: usize,
    /// Hard partition extracted from `best_s`.
    pub partition: Partition,
    /// Exact codelength of `partition`.
    pub hard_codelength: f64,
    /// Restart that produced this result and its seed.
    pub trial: usize,
    pub trial_seed: u64,
    /// Best loss of every restart, by restart index.
    pub trial_losses: Vec<f64>,
}

/// Trains with the default flow model of `graph`.
pub fn train(graph: &Graph, x: &FeatureMatrix, enc: &EncoderConfig, cfg: &TrainConfig) -> Result<TrainedResult> {
    let flow = FlowModel::with_defaults(graph)?;
    train_with_flow(graph, &flow, x, enc, cfg)
}

pub fn train_with_flow(
    graph: &Graph,
    flow: &FlowModel,
    x: &FeatureMatrix,
    enc: &EncoderConfig,
    cfg: &TrainConfig,
) -> Result<TrainedResult> {
    enc.validate()?;
    cfg.validate()?;
    if x.rows() != graph.n() || flow.n() != graph.n() {
        return Err(Error::DimensionMismatch(format!(
            "graph has {} nodes, features {} rows, flow model {}",
            graph.n(),
            x.rows(),
            flow.n()
        )));
    }
    let op = normalize_adjacency(graph, enc.arch);
    let runs: Vec<Result<TrainedResult>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(flow, &op, x, enc, cfg, t))
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let trial_losses: Vec<f64> = runs.iter().map(|r| r.best_loss_bits).collect();
    // Strict comparison keeps the lowest trial index on ties.
    let mut best = runs
        .into_iter()
        .reduce(|a, b| if b.best_loss_bits < a.best_loss_bits { b } else { a })
        .expect("at least one trial");
    best.trial_losses = trial_losses;
    Ok(best)
}

struct Snapshot {
    loss: f64,
    epoch: usize,
    s: Tensor,
    params: EncoderParams,
}

fn run_trial(
    flow: &FlowModel,
    op: &MessageOperator,
    x: &FeatureMatrix,
    enc: &EncoderConfig,
    cfg: &TrainConfig,
    trial: usize,
) -> Result<TrainedResult> {
    let seed = cfg.trial_seed(trial);
    let mut params = init_params(enc, x.cols(), seed)?;
    let mut adam = AdamState::new(params.tensors());
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ DROPOUT_STREAM);
    let f = flow.shared_flow();
    let p = flow.visit_rates();
    let n = flow.n();
    let dropout = enc.uses_dropout();

    let mut history = Vec::new();
    let mut best: Option<Snapshot> = None;
    let mut reference = f64::INFINITY;
    let mut stale = 0;
    let mut epochs_run = 0;

    for epoch in 0..cfg.max_epochs {
        epochs_run = epoch + 1;
        let mut tape = Tape::new();
        let e = encode(&params, op, x.values(), None, &mut tape)?;
        let soft = record_soft_loss(&mut tape, &f, p, e.assignments, SOFT_EPS)?;
        let loss = tape.value(soft.loss).item() + soft.node_term;
        history.push(loss);
        if best.as_ref().is_none_or(|b| loss < b.loss) {
            best = Some(Snapshot {
                loss,
                epoch,
                s: tape.value(e.assignments).clone(),
                params: params.clone(),
            });
        }
        if loss < reference - cfg.epsilon_loss {
            reference = loss;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
        if epoch + 1 == cfg.max_epochs {
            break;
        }

        let (mut grads, vars) = if dropout {
            let mut tape = Tape::new();
            let mask = sample_dropout_mask(&mut rng, n, enc.hidden_dim, enc.dropout_p);
            let e = encode(&params, op, x.values(), Some(mask), &mut tape)?;
            let soft = record_soft_loss(&mut tape, &f, p, e.assignments, SOFT_EPS)?;
            (tape.backward(soft.loss)?, e.params)
        } else {
            (tape.backward(soft.loss)?, e.params)
        };
        let grads: Vec<Tensor> = vars
            .iter()
            .zip(params.tensors())
            .map(|(&v, t)| grads.take_or_zeros(v, t.shape()))
            .collect();
        adam_step(params.tensors_mut(), &grads, &mut adam, cfg.lr)?;
    }

    let best = best.ok_or_else(|| Error::InvalidConfig("max_epochs must be at least 1".into()))?;
    let best_s = SoftAssignment::new(best.s)?;
    let partition = hard_partition(&best_s);
    let hard_codelength = codelength_expanded_form(flow, &partition)?.total;
    Ok(TrainedResult {
        best_params: best.params,
        best_loss_bits: best.loss,
        loss_history: history,
        best_s,
        best_epoch: best.epoch,
        epochs_run,
        partition,
        hard_codelength,
        trial,
        trial_seed: seed,
        trial_losses: Vec::new(),
    })
}
