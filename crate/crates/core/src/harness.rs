//! Multi-seed experiment runner and benchmark file ingestion.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{identity_features, load_features, FeatureMatrix};
use crate::flow::FlowModel;
use crate::generators;
use crate::graph::{check_connected, load_edge_list, Graph};
use crate::mapeq::{load_partition, Partition};
use crate::metrics::ami;
use crate::neural::{Architecture, EncoderConfig};
use crate::train::{train_with_flow, TrainConfig};

/// Loads an LFR benchmark pair: `network.dat` with 1-indexed `u v [w]` lines
/// and `community.dat` with `u c` lines. Nodes are renumbered to `0..n`. For
/// undirected input a pair listed in both directions is one edge.
pub fn load_lfr(network: impl AsRef<Path>, community: impl AsRef<Path>, directed: bool) -> Result<(Graph, Partition)> {
    let network = network.as_ref();
    let mut links = Vec::new();
    let mut seen: HashMap<(usize, usize), ()> = HashMap::new();
    let mut n = 0;
    for (lineno, fields) in data_lines(network)? {
        let parse_err = |message: String| Error::Parse {
            path: network.to_path_buf(),
            line: lineno,
            message,
        };
        if fields.len() < 2 || fields.len() > 3 {
            return Err(parse_err("expected `u v [weight]`".into()));
        }
        let node = |s: &str| -> Result<usize> {
            match s.parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v - 1),
                _ => Err(parse_err(format!("invalid 1-indexed node `{s}`"))),
            }
        };
        let (u, v) = (node(&fields[0])?, node(&fields[1])?);
        let w = match fields.get(2) {
            Some(raw) => raw
                .parse::<f64>()
                .map_err(|_| parse_err(format!("invalid weight `{raw}`")))?,
            None => 1.0,
        };
        if w < 0.0 {
            return Err(Error::NegativeWeight {
                path: network.to_path_buf(),
                line: lineno,
                weight: w,
            });
        }
        n = n.max(u + 1).max(v + 1);
        let key = if directed { (u, v) } else { (u.min(v), u.max(v)) };
        if seen.insert(key, ()).is_none() {
            links.push((u, v, w));
        }
    }

    let community = community.as_ref();
    let mut labels: Vec<Option<String>> = vec![None; n];
    for (lineno, fields) in data_lines(community)? {
        let parse_err = |message: &str| Error::Parse {
            path: community.to_path_buf(),
            line: lineno,
            message: message.into(),
        };
        if fields.len() < 2 {
            return Err(parse_err("expected `u community`"));
        }
        let u = match fields[0].parse::<usize>() {
            Ok(v) if v >= 1 && v <= n => v - 1,
            _ => return Err(Error::UnknownNode(fields[0].clone())),
        };
        if fields.len() > 2 {
            log::warn!("node {} has overlapping memberships; keeping the first", fields[0]);
        }
        labels[u] = Some(fields[1].clone());
    }
    let labels = labels
        .into_iter()
        .enumerate()
        .map(|(u, l)| l.ok_or_else(|| Error::InvalidPartition(format!("node {} has no community", u + 1))))
        .collect::<Result<Vec<_>>>()?;
    let ids = (0..n).map(|u| u.to_string()).collect();
    let graph = Graph::from_indexed(ids, directed, links)?;
    Ok((graph, Partition::from_labels(&labels)))
}

fn data_lines(path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        out.push((i + 1, t.split_whitespace().map(str::to_string).collect()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum GraphSource {
    File {
        edges: PathBuf,
        #[serde(default)]
        truth: Option<PathBuf>,
        #[serde(default)]
        features: Option<PathBuf>,
        #[serde(default)]
        directed: bool,
        #[serde(default = "yes")]
        weighted: bool,
    },
    Lfr {
        network: PathBuf,
        community: PathBuf,
        #[serde(default)]
        directed: bool,
    },
    Planted {
        blocks: usize,
        size: usize,
        p_in: f64,
        p_out: f64,
        #[serde(default)]
        seed: u64,
    },
    Barbell,
    Complete {
        n: usize,
    },
}

fn yes() -> bool {
    true
}

/// Encoder settings; unset fields take the graph-size defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EncoderSpec {
    pub arch: Option<Architecture>,
    pub hidden_dim: Option<usize>,
    pub s: Option<usize>,
    pub dropout_p: Option<f64>,
    pub use_batch_norm: Option<bool>,
    pub temperature_init: Option<f64>,
}

impl EncoderSpec {
    pub fn resolve(&self, n: usize) -> EncoderConfig {
        let mut c = EncoderConfig::for_graph(self.arch.unwrap_or(Architecture::Mlp), n);
        if let Some(v) = self.hidden_dim {
            c.hidden_dim = v;
        }
        if let Some(v) = self.s {
            c.s = v;
        }
        if let Some(v) = self.dropout_p {
            c.dropout_p = v;
        }
        if let Some(v) = self.use_batch_norm {
            c.use_batch_norm = v;
        }
        if let Some(v) = self.temperature_init {
            c.temperature_init = v;
        }
        c
    }
}

/// Optimiser settings; unset fields take the architecture defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TrainSpec {
    pub lr: Option<f64>,
    pub max_epochs: Option<usize>,
    pub patience: Option<usize>,
    pub epsilon_loss: Option<f64>,
    /// Restarts inside one trial; the lowest-loss restart is scored.
    pub restarts: Option<usize>,
}

impl TrainSpec {
    pub fn resolve(&self, arch: Architecture, seed: u64) -> TrainConfig {
        let mut c = TrainConfig::for_arch(arch);
        c.seed = seed;
        if let Some(v) = self.lr {
            c.lr = v;
        }
        if let Some(v) = self.max_epochs {
            c.max_epochs = v;
        }
        if let Some(v) = self.patience {
            c.patience = v;
        }
        if let Some(v) = self.epsilon_loss {
            c.epsilon_loss = v;
        }
        if let Some(v) = self.restarts {
            c.trials = v;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub graph: GraphSource,
    #[serde(default)]
    pub encoder: EncoderSpec,
    #[serde(default)]
    pub train: TrainSpec,
    /// Independent trials; trial `t` trains with seed `seed + t`.
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Table destination, `.json` or CSV otherwise.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Abort on disconnected input instead of warning.
    #[serde(default)]
    pub strict: bool,
}

fn one() -> usize {
    1
}

impl ExperimentSpec {
    /// Parses TOML or JSON (by extension, TOML otherwise) and resolves
    /// relative paths against the spec's directory.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let mut spec = if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)?
        } else {
            Self::from_toml(&text)?
        };
        if let Some(dir) = path.parent() {
            spec.resolve_paths(dir);
        }
        Ok(spec)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        Ok(())
    }

    fn resolve_paths(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        match &mut self.graph {
            GraphSource::File {
                edges,
                truth,
                features,
                ..
            } => {
                fix(edges);
                truth.as_mut().map(fix);
                features.as_mut().map(fix);
            }
            GraphSource::Lfr {
                network, community, ..
            } => {
                fix(network);
                fix(community);
            }
            _ => {}
        }
        if let Some(out) = &mut self.output {
            fix(out);
        }
    }

    /// Graph, optional ground truth and node features.
    pub fn load(&self) -> Result<(Graph, Option<Partition>, FeatureMatrix)> {
        let (graph, truth, features) = match &self.graph {
            GraphSource::File {
                edges,
                truth,
                features,
                directed,
                weighted,
            } => {
                let g = load_edge_list(edges, *directed, *weighted)?;
                let t = truth.as_ref().map(|p| load_partition(p, &g)).transpose()?;
                let x = features.as_ref().map(|p| load_features(p, &g)).transpose()?;
                (g, t, x)
            }
            GraphSource::Lfr {
                network,
                community,
                directed,
            } => {
                let (g, t) = load_lfr(network, community, *directed)?;
                (g, Some(t), None)
            }
            GraphSource::Planted {
                blocks,
                size,
                p_in,
                p_out,
                seed,
            } => {
                let (g, t) = generators::generate_planted(*blocks, *size, *p_in, *p_out, *seed)?;
                (g, Some(t), None)
            }
            GraphSource::Barbell => {
                let (g, t) = generators::barbell();
                (g, Some(t), None)
            }
            GraphSource::Complete { n } => (generators::complete(*n), Some(Partition::one_module(*n)), None),
        };
        check_connected(&graph, self.strict)?;
        let features = features.unwrap_or_else(|| identity_features(&graph));
        Ok((graph, truth, features))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    /// Absent without ground truth.
    pub ami: Option<f64>,
    pub modules: usize,
    /// Best soft codelength in bits.
    pub loss_bits: f64,
    /// Exact codelength of the extracted partition.
    pub hard_bits: f64,
    pub epochs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub ami: Option<Stat>,
    pub modules: Stat,
    pub loss_bits: Stat,
    pub hard_bits: Stat,
    pub epochs: Stat,
}

impl Summary {
    pub fn of(rows: &[TrialRow]) -> Self {
        let col = |f: &dyn Fn(&TrialRow) -> f64| Stat::of(&rows.iter().map(f).collect::<Vec<_>>());
        let ami = rows
            .iter()
            .map(|r| r.ami)
            .collect::<Option<Vec<f64>>>()
            .map(|v| Stat::of(&v));
        Self {
            trials: rows.len(),
            ami,
            modules: col(&|r| r.modules as f64),
            loss_bits: col(&|r| r.loss_bits),
            hard_bits: col(&|r| r.hard_bits),
            epochs: col(&|r| r.epochs as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub name: Option<String>,
    pub arch: Architecture,
    pub rows: Vec<TrialRow>,
    pub summary: Summary,
}

impl ResultTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["trial", "seed", "ami", "modules", "loss_bits", "hard_bits", "epochs"])?;
        for r in &self.rows {
            w.write_record([
                r.trial.to_string(),
                r.seed.to_string(),
                r.ami.map_or_else(String::new, |a| a.to_string()),
                r.modules.to_string(),
                r.loss_bits.to_string(),
                r.hard_bits.to_string(),
                r.epochs.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes JSON for a `.json` path and CSV otherwise.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if path.extension().is_some_and(|e| e == "json") {
            fs::write(path, self.to_json()?)?;
        } else {
            self.write_csv(File::create(path)?)?;
        }
        Ok(())
    }
}

/// Runs every trial (concurrently) and assembles the table in trial order.
/// Writes the table to `spec.output` when set.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let (graph, truth, x) = spec.load()?;
    let flow = FlowModel::with_defaults(&graph)?;
    let enc = spec.encoder.resolve(graph.n());
    let rows = (0..spec.trials)
        .into_par_iter()
        .map(|t| {
            let seed = spec.seed.wrapping_add(t as u64);
            let cfg = spec.train.resolve(enc.arch, seed);
            let r = train_with_flow(&graph, &flow, &x, &enc, &cfg)?;
            Ok(TrialRow {
                trial: t,
                seed,
                ami: truth.as_ref().map(|tr| ami(&r.partition, tr)).transpose()?,
                modules: r.partition.module_count(),
                loss_bits: r.best_loss_bits,
                hard_bits: r.hard_codelength,
                epochs: r.epochs_run,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let table = ResultTable {
        name: spec.name.clone(),
        arch: enc.arch,
        summary: Summary::of(&rows),
        rows,
    };
    if let Some(out) = &spec.output {
        table.save(out)?;
    }
    Ok(table)
}
