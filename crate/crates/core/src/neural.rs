//! Encoders mapping `(A, X)` to soft cluster assignments.
//!
//! Two-layer stacks run `affine → batch norm → SELU → dropout → affine`, with
//! each affine step preceded by the architecture's message operator. The
//! linear encoder is a single affine map. Assignments are
//! `softmax(logits / T)` with `T = exp(log_temperature)`.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{AutodiffError, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::sparse::CsrMatrix;
use crate::tensor::Tensor;

pub const CHECKPOINT_FORMAT: &str = "mapeq-encoder";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Linear,
    Mlp,
    Gcn,
    Gin,
    Sage,
}

impl Architecture {
    pub const ALL: [Architecture; 5] = [
        Architecture::Linear,
        Architecture::Mlp,
        Architecture::Gcn,
        Architecture::Gin,
        Architecture::Sage,
    ];

    /// Adam learning rate used when none is configured.
    pub fn default_lr(self) -> f64 {
        match self {
            Architecture::Linear => 1e-1,
            Architecture::Mlp => 1e-2,
            Architecture::Gcn | Architecture::Gin | Architecture::Sage => 1e-3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Linear => "linear",
            Architecture::Mlp => "mlp",
            Architecture::Gcn => "gcn",
            Architecture::Gin => "gin",
            Architecture::Sage => "sage",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown architecture `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub arch: Architecture,
    pub hidden_dim: usize,
    /// Maximum number of clusters.
    pub s: usize,
    pub dropout_p: f64,
    pub use_batch_norm: bool,
    pub temperature_init: f64,
}

impl EncoderConfig {
    /// Defaults for an `n`-node graph: `hidden = ⌈4√n⌉`, `s = ⌈√n⌉`,
    /// dropout 0.5, batch norm on, temperature 1.
    pub fn for_graph(arch: Architecture, n: usize) -> Self {
        let root = (n as f64).sqrt();
        Self {
            arch,
            hidden_dim: ((4.0 * root).ceil() as usize).max(1),
            s: (root.ceil() as usize).max(1),
            dropout_p: 0.5,
            use_batch_norm: true,
            temperature_init: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 || self.s == 0 {
            return Err(Error::InvalidConfig("hidden_dim and s must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::InvalidConfig(format!(
                "dropout_p = {} outside [0, 1)",
                self.dropout_p
            )));
        }
        if !(self.temperature_init > 0.0 && self.temperature_init.is_finite()) {
            return Err(Error::InvalidConfig("temperature_init must be positive".into()));
        }
        Ok(())
    }

    /// Whether a forward pass in training mode samples a dropout mask.
    pub fn uses_dropout(&self) -> bool {
        self.arch != Architecture::Linear && self.dropout_p > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

/// Encoder weights in a fixed order; the last entry is `log_temperature`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    config: EncoderConfig,
    input_dim: usize,
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    config: EncoderConfig,
    input_dim: usize,
    params: Vec<NamedTensor>,
}

impl EncoderParams {
    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(&mut self.tensors[i])
    }

    pub fn temperature(&self) -> f64 {
        self.tensors.last().expect("log_temperature present").item().exp()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    /// Puts every parameter on `tape` as a differentiable leaf.
    pub fn record(&self, tape: &mut Tape) -> Vec<Var> {
        self.tensors.iter().map(|t| tape.leaf(t.clone(), true)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let checkpoint = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            input_dim: self.input_dim,
            params: self
                .names
                .iter()
                .zip(&self.tensors)
                .map(|(name, t)| NamedTensor {
                    name: name.clone(),
                    rows: t.rows(),
                    cols: t.cols(),
                    data: t.as_slice().to_vec(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&checkpoint)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(text)?;
        if c.format != CHECKPOINT_FORMAT || c.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported checkpoint {} v{}",
                c.format, c.version
            )));
        }
        c.config.validate()?;
        let template = init_params(&c.config, c.input_dim, 0)?;
        if template.names.len() != c.params.len() {
            return Err(Error::InvalidConfig("checkpoint parameter count".into()));
        }
        let mut tensors = Vec::with_capacity(c.params.len());
        for (expected, (name, p)) in template.tensors.iter().zip(template.names.iter().zip(c.params)) {
            if p.name != *name
                || (p.rows, p.cols) != expected.shape()
                || p.data.len() != p.rows * p.cols
            {
                return Err(Error::InvalidConfig(format!(
                    "checkpoint parameter `{}` does not match `{name}` {:?}",
                    p.name,
                    expected.shape()
                )));
            }
            tensors.push(Tensor::from_vec(p.rows, p.cols, p.data));
        }
        let params = Self {
            config: c.config,
            input_dim: c.input_dim,
            names: template.names,
            tensors,
        };
        if !params.is_finite() {
            return Err(Error::NonFinite("checkpoint parameters".into()));
        }
        Ok(params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Graph operator applied before each affine step.
#[derive(Debug, Clone)]
pub enum MessageOperator {
    /// Linear and MLP encoders see features only.
    Identity,
    /// `D̃^{-1/2}(A+I)D̃^{-1/2}` with `D̃` the row sums of `A+I`.
    Gcn(Arc<CsrMatrix>),
    /// Row-normalised `A` (neighbour mean), paired with a separate self weight.
    Sage(Arc<CsrMatrix>),
    /// `A + I`.
    Gin(Arc<CsrMatrix>),
}

pub fn normalize_adjacency(graph: &Graph, arch: Architecture) -> MessageOperator {
    let a = graph.adjacency();
    let n = graph.n();
    let with_self = || {
        let mut t: Vec<_> = a.iter().collect();
        t.extend((0..n).map(|i| (i, i, 1.0)));
        CsrMatrix::from_triplets(n, n, &t)
    };
    match arch {
        Architecture::Linear | Architecture::Mlp => MessageOperator::Identity,
        Architecture::Gcn => {
            let at = with_self();
            let deg = at.row_sums();
            MessageOperator::Gcn(Arc::new(at.map_values(|i, j, v| v / (deg[i] * deg[j]).sqrt())))
        }
        Architecture::Sage => {
            let deg = a.row_sums();
            MessageOperator::Sage(Arc::new(a.map_values(|i, _, v| v / deg[i])))
        }
        Architecture::Gin => MessageOperator::Gin(Arc::new(with_self())),
    }
}

fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Tensor {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out).map(|_| rng.random_range(-bound..=bound)).collect();
    Tensor::from_vec(fan_in, fan_out, data)
}

/// Seeded Glorot-uniform weights, zero biases, unit batch-norm scale.
pub fn init_params(config: &EncoderConfig, input_dim: usize, seed: u64) -> Result<EncoderParams> {
    config.validate()?;
    if input_dim == 0 {
        return Err(Error::NoFeatures);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (d, h, s) = (input_dim, config.hidden_dim, config.s);
    let mut names = Vec::new();
    let mut tensors = Vec::new();
    let mut push = |name: &str, t: Tensor| {
        names.push(name.to_string());
        tensors.push(t);
    };
    let bn = config.use_batch_norm;
    match config.arch {
        Architecture::Linear => {
            push("w", glorot(&mut rng, d, s));
            push("b", Tensor::zeros(1, s));
        }
        Architecture::Mlp | Architecture::Gcn => {
            push("w1", glorot(&mut rng, d, h));
            push("b1", Tensor::zeros(1, h));
            if bn {
                push("bn_gamma", Tensor::filled(1, h, 1.0));
                push("bn_beta", Tensor::zeros(1, h));
            }
            push("w2", glorot(&mut rng, h, s));
            push("b2", Tensor::zeros(1, s));
        }
        Architecture::Sage => {
            push("w1_self", glorot(&mut rng, d, h));
            push("w1_neigh", glorot(&mut rng, d, h));
            push("b1", Tensor::zeros(1, h));
            if bn {
                push("bn_gamma", Tensor::filled(1, h, 1.0));
                push("bn_beta", Tensor::zeros(1, h));
            }
            push("w2_self", glorot(&mut rng, h, s));
            push("w2_neigh", glorot(&mut rng, h, s));
            push("b2", Tensor::zeros(1, s));
        }
        Architecture::Gin => {
            push("w1a", glorot(&mut rng, d, h));
            push("b1a", Tensor::zeros(1, h));
            push("w1b", glorot(&mut rng, h, h));
            push("b1b", Tensor::zeros(1, h));
            if bn {
                push("bn_gamma", Tensor::filled(1, h, 1.0));
                push("bn_beta", Tensor::zeros(1, h));
            }
            push("w2a", glorot(&mut rng, h, h));
            push("b2a", Tensor::zeros(1, h));
            push("w2b", glorot(&mut rng, h, s));
            push("b2b", Tensor::zeros(1, s));
        }
    }
    push("log_temperature", Tensor::scalar(config.temperature_init.ln()));
    Ok(EncoderParams {
        config: config.clone(),
        input_dim,
        names,
        tensors,
    })
}

/// Inverted dropout mask: entries are `0` with probability `p`, else
/// `1 / (1 - p)`.
pub fn sample_dropout_mask(rng: &mut impl Rng, rows: usize, cols: usize, p: f64) -> Tensor {
    if p <= 0.0 {
        return Tensor::filled(rows, cols, 1.0);
    }
    let keep = 1.0 / (1.0 - p);
    let data = (0..rows * cols)
        .map(|_| if rng.random_bool(p) { 0.0 } else { keep })
        .collect();
    Tensor::from_vec(rows, cols, data)
}

type AdResult<T> = std::result::Result<T, AutodiffError>;

struct Cursor<'a> {
    params: &'a EncoderParams,
    vars: &'a [Var],
}

impl Cursor<'_> {
    fn var(&self, name: &str) -> Var {
        let i = self
            .params
            .names
            .iter()
            .position(|n| n == name)
            .unwrap_or_else(|| panic!("parameter `{name}` missing"));
        self.vars[i]
    }
}

fn affine(tape: &mut Tape, x: Var, w: Var, b: Var) -> AdResult<Var> {
    let xw = tape.matmul(x, w)?;
    tape.add_row_broadcast(xw, b)
}

/// Records the encoder on `tape` and returns the `n x s` logits. `vars` are
/// the parameter leaves from [`EncoderParams::record`]; `mask` is applied to
/// the hidden layer when given.
pub fn forward(
    params: &EncoderParams,
    vars: &[Var],
    op: &MessageOperator,
    x: Var,
    mask: Option<Tensor>,
    tape: &mut Tape,
) -> AdResult<Var> {
    let p = Cursor { params, vars };
    let cfg = &params.config;
    let propagate = |tape: &mut Tape, h: Var| -> AdResult<Var> {
        match op {
            MessageOperator::Gcn(m) | MessageOperator::Gin(m) => tape.sparse_dense_matmul(m, h),
            MessageOperator::Identity | MessageOperator::Sage(_) => Ok(h),
        }
    };
    let layer = |tape: &mut Tape, h: Var, idx: usize| -> AdResult<Var> {
        match cfg.arch {
            Architecture::Linear => affine(tape, h, p.var("w"), p.var("b")),
            Architecture::Mlp | Architecture::Gcn => {
                let m = propagate(tape, h)?;
                affine(tape, m, p.var(&format!("w{idx}")), p.var(&format!("b{idx}")))
            }
            Architecture::Sage => {
                let MessageOperator::Sage(mean) = op else {
                    return Err(AutodiffError::InvalidArgument {
                        op: "forward",
                        message: "sage encoder needs the mean operator".into(),
                    });
                };
                let own = tape.matmul(h, p.var(&format!("w{idx}_self")))?;
                let agg = tape.sparse_dense_matmul(mean, h)?;
                let neigh = tape.matmul(agg, p.var(&format!("w{idx}_neigh")))?;
                let sum = tape.add(own, neigh)?;
                tape.add_row_broadcast(sum, p.var(&format!("b{idx}")))
            }
            Architecture::Gin => {
                let m = propagate(tape, h)?;
                let inner = affine(tape, m, p.var(&format!("w{idx}a")), p.var(&format!("b{idx}a")))?;
                let act = tape.selu(inner)?;
                affine(tape, act, p.var(&format!("w{idx}b")), p.var(&format!("b{idx}b")))
            }
        }
    };
    let check_op = matches!(
        (cfg.arch, op),
        (Architecture::Linear | Architecture::Mlp, MessageOperator::Identity)
            | (Architecture::Gcn, MessageOperator::Gcn(_))
            | (Architecture::Sage, MessageOperator::Sage(_))
            | (Architecture::Gin, MessageOperator::Gin(_))
    );
    if !check_op {
        return Err(AutodiffError::InvalidArgument {
            op: "forward",
            message: format!("message operator does not match the {} encoder", cfg.arch),
        });
    }

    if cfg.arch == Architecture::Linear {
        return layer(tape, x, 1);
    }
    let mut h = layer(tape, x, 1)?;
    if cfg.use_batch_norm {
        h = tape.batch_feature_norm(h, p.var("bn_gamma"), p.var("bn_beta"))?;
    }
    h = tape.selu(h)?;
    if let Some(mask) = mask {
        h = tape.dropout_mask_apply(h, mask)?;
    }
    layer(tape, h, 2)
}

/// Row-wise `softmax(logits / temperature)`.
pub fn soft_assignments(tape: &mut Tape, logits: Var, temperature: Var) -> AdResult<Var> {
    tape.row_softmax_with_temperature(logits, temperature)
}

/// Recorded encoder pass, from parameters to assignments.
#[derive(Debug, Clone)]
pub struct Encoded {
    pub params: Vec<Var>,
    pub logits: Var,
    pub temperature: Var,
    pub assignments: Var,
}

pub fn encode(
    params: &EncoderParams,
    op: &MessageOperator,
    x: &Tensor,
    mask: Option<Tensor>,
    tape: &mut Tape,
) -> AdResult<Encoded> {
    if x.cols() != params.input_dim {
        return Err(AutodiffError::ShapeMismatch {
            op: "forward",
            lhs: x.shape(),
            rhs: (x.rows(), params.input_dim),
        });
    }
    let vars = params.record(tape);
    let xv = tape.constant(x.clone());
    let logits = forward(params, &vars, op, xv, mask, tape)?;
    let log_t = *vars.last().expect("log_temperature present");
    let temperature = tape.exp(log_t)?;
    let assignments = soft_assignments(tape, logits, temperature)?;
    Ok(Encoded {
        params: vars,
        logits,
        temperature,
        assignments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;

    fn run(params: &EncoderParams, op: &MessageOperator, x: &Tensor, mask: Option<Tensor>) -> (Tensor, Tensor) {
        let mut tape = Tape::new();
        let e = encode(params, op, x, mask, &mut tape).unwrap();
        (tape.value(e.logits).clone(), tape.value(e.assignments).clone())
    }

    #[test]
    fn operators() {
        let two = Graph::from_links(2, true, [(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let MessageOperator::Gcn(m) = normalize_adjacency(&two, Architecture::Gcn) else {
            panic!()
        };
        assert_eq!(m.to_dense(), Tensor::filled(2, 2, 0.5));

        let dangling = Graph::from_links(3, true, [(0, 1, 2.0), (0, 2, 2.0)]).unwrap();
        let MessageOperator::Sage(m) = normalize_adjacency(&dangling, Architecture::Sage) else {
            panic!()
        };
        assert_eq!(m.to_dense().row(0), &[0.0, 0.5, 0.5]);
        assert_eq!(m.to_dense().row(1), &[0.0, 0.0, 0.0]);

        let k2 = Graph::from_links(2, false, [(0, 1, 1.0)]).unwrap();
        let MessageOperator::Gin(m) = normalize_adjacency(&k2, Architecture::Gin) else {
            panic!()
        };
        let x = Tensor::from_rows(&[vec![1.0], vec![10.0]]);
        assert_eq!(m.matmul_dense(&x).as_slice(), &[11.0, 11.0]);
    }

    #[test]
    fn zero_params_give_zero_logits_and_uniform_rows() {
        let (g, _) = generators::barbell();
        for arch in Architecture::ALL {
            let cfg = EncoderConfig::for_graph(arch, g.n());
            let mut params = init_params(&cfg, 6, 1).unwrap();
            for t in params.tensors_mut() {
                *t = t.map(|_| 0.0);
            }
            let x = g.adjacency().to_dense();
            let (logits, s) = run(&params, &normalize_adjacency(&g, arch), &x, None);
            assert!(logits.as_slice().iter().all(|&v| v == 0.0), "{arch}");
            let u = 1.0 / cfg.s as f64;
            assert!(s.as_slice().iter().all(|&v| (v - u).abs() < 1e-15));
        }
    }

    #[test]
    fn linear_identity_features_return_weight_rows() {
        let (g, _) = generators::barbell();
        let cfg = EncoderConfig::for_graph(Architecture::Linear, 6);
        let params = init_params(&cfg, 6, 3).unwrap();
        let (logits, _) = run(&params, &MessageOperator::Identity, &Tensor::identity(6), None);
        assert_eq!(&logits, params.get("w").unwrap());
        let _ = g;
    }

    #[test]
    fn zero_dropout_mask_is_identity() {
        let (g, _) = generators::barbell();
        let cfg = EncoderConfig::for_graph(Architecture::Mlp, 6);
        let params = init_params(&cfg, 6, 3).unwrap();
        let x = g.adjacency().to_dense();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mask = sample_dropout_mask(&mut rng, 6, cfg.hidden_dim, 0.0);
        let a = run(&params, &MessageOperator::Identity, &x, None);
        let b = run(&params, &MessageOperator::Identity, &x, Some(mask));
        assert_eq!(a, b);
    }

    #[test]
    fn softmax_limits_and_shift_invariance() {
        let z = Tensor::from_rows(&[vec![0.2, 1.0, -0.5], vec![3.0, 3.0, 2.0]]);
        let mut tape = Tape::new();
        let zv = tape.constant(z.clone());
        let t = tape.constant(Tensor::scalar(1e-3));
        let s = soft_assignments(&mut tape, zv, t).unwrap();
        let s = tape.value(s);
        assert!((s[(0, 1)] - 1.0).abs() < 1e-12);
        assert!((s[(1, 0)] - 0.5).abs() < 1e-12 && (s[(1, 1)] - 0.5).abs() < 1e-12);

        let shifted = Tensor::from_rows(&[vec![5.2, 6.0, 4.5], z.row(1).to_vec()]);
        let mut tape = Tape::new();
        let a = tape.constant(z);
        let b = tape.constant(shifted);
        let t = tape.constant(Tensor::scalar(0.7));
        let sa = soft_assignments(&mut tape, a, t).unwrap();
        let sb = soft_assignments(&mut tape, b, t).unwrap();
        assert!(tape.value(sa).max_abs_diff(tape.value(sb)) < 1e-15);
    }

    #[test]
    fn init_is_seeded() {
        let cfg = EncoderConfig::for_graph(Architecture::Gin, 16);
        let a = init_params(&cfg, 16, 7).unwrap();
        assert_eq!(a, init_params(&cfg, 16, 7).unwrap());
        assert_ne!(a, init_params(&cfg, 16, 8).unwrap());
        assert_eq!(a.temperature(), 1.0);
        let bound = (6.0 / (16.0 + 16.0f64)).sqrt();
        assert!(a.get("w1a").unwrap().as_slice().iter().all(|v| v.abs() <= bound));
        assert!(a.get("b1a").unwrap().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn defaults_follow_graph_size() {
        let cfg = EncoderConfig::for_graph(Architecture::Mlp, 60);
        assert_eq!((cfg.hidden_dim, cfg.s), (31, 8));
        assert_eq!(Architecture::Sage.default_lr(), 1e-3);
        assert_eq!("GCN".parse::<Architecture>().unwrap(), Architecture::Gcn);
        assert!("gat".parse::<Architecture>().is_err());
        let mut bad = cfg.clone();
        bad.dropout_p = 1.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        for arch in Architecture::ALL {
            let cfg = EncoderConfig::for_graph(arch, 9);
            let params = init_params(&cfg, 4, 2).unwrap();
            let json = params.to_json().unwrap();
            assert_eq!(EncoderParams::from_json(&json).unwrap(), params);
        }
        let params = init_params(&EncoderConfig::for_graph(Architecture::Linear, 9), 4, 2).unwrap();
        let broken = params.to_json().unwrap().replace("\"version\": 1", "\"version\": 9");
        assert!(EncoderParams::from_json(&broken).is_err());
    }

    #[test]
    fn mismatched_operator_is_rejected() {
        let cfg = EncoderConfig::for_graph(Architecture::Sage, 6);
        let params = init_params(&cfg, 6, 0).unwrap();
        let mut tape = Tape::new();
        assert!(encode(&params, &MessageOperator::Identity, &Tensor::identity(6), None, &mut tape).is_err());
    }
}
