use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use mapeq_core::flow::{FlowOptions, DEFAULT_ALPHA, DEFAULT_MAX_ITER, DEFAULT_TOLERANCE};
use mapeq_core::graph::{check_connected, connected_components};
use mapeq_core::harness::{run_experiment, ExperimentSpec};
use mapeq_core::mapeq::{
    brute_force_optimum, codelength_entropy_form, codelength_expanded_form, load_partition, DEFAULT_MAX_N,
};
use mapeq_core::metrics::{ami_with, count_modules, mixing};
use mapeq_core::train::train_with_flow;
use mapeq_core::{
    identity_features, load_edge_list, load_features, AmiNormalization, Architecture, EncoderConfig, FlowModel,
    Graph, Partition, TrainConfig,
};

#[derive(Parser)]
#[command(name = "mapeq", version, about = "Map-equation graph clustering by gradient descent")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an encoder and print the partition, loss and config as JSON.
    Cluster(ClusterArgs),
    /// Exact codelength of a partition file.
    Codelength(CodelengthArgs),
    /// Compare a predicted partition with ground truth.
    Eval(EvalArgs),
    /// Exhaustive best partition of a tiny graph.
    Optimum(OptimumArgs),
    /// Visit rates and power-iteration diagnostics.
    Flow(FlowArgs),
    /// Run an experiment spec (TOML or JSON) and print its result table.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GraphArgs {
    /// Edge list, `src dst [weight]` per line.
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    directed: bool,
    /// Ignore a third weight column.
    #[arg(long)]
    unweighted: bool,
    /// Fail on disconnected input instead of warning.
    #[arg(long)]
    strict: bool,
    /// Teleportation probability of the power iteration.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
    /// Use the power iteration even for undirected graphs.
    #[arg(long)]
    power_iteration: bool,
}

impl GraphArgs {
    fn load(&self) -> Result<Graph> {
        let g = load_edge_list(&self.graph, self.directed, !self.unweighted)
            .with_context(|| format!("loading {}", self.graph.display()))?;
        check_connected(&g, self.strict)?;
        Ok(g)
    }

    fn flow(&self, graph: &Graph) -> Result<FlowModel> {
        let options = FlowOptions {
            alpha: self.alpha,
            tolerance: self.tolerance,
            max_iter: self.max_iter,
            force_power_iteration: self.power_iteration,
        };
        Ok(FlowModel::new(graph, &options)?)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ArchArg {
    Linear,
    Mlp,
    Gcn,
    Gin,
    Sage,
}

impl From<ArchArg> for Architecture {
    fn from(a: ArchArg) -> Self {
        match a {
            ArchArg::Linear => Architecture::Linear,
            ArchArg::Mlp => Architecture::Mlp,
            ArchArg::Gcn => Architecture::Gcn,
            ArchArg::Gin => Architecture::Gin,
            ArchArg::Sage => Architecture::Sage,
        }
    }
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Node features (CSV with `id,...` header or `id col value` triplets);
    /// the adjacency matrix is used when absent.
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "mlp")]
    arch: ArchArg,
    /// Hidden width [default: ceil(4 sqrt n)].
    #[arg(long)]
    hidden_dim: Option<usize>,
    /// Maximum number of clusters [default: ceil(sqrt n)].
    #[arg(long)]
    s: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    dropout: f64,
    #[arg(long)]
    no_batch_norm: bool,
    #[arg(long, default_value_t = 1.0)]
    temperature_init: f64,
    /// Adam learning rate [default: 0.1 linear, 0.01 mlp, 0.001 gcn/gin/sage].
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    max_epochs: usize,
    #[arg(long, default_value_t = 100)]
    patience: usize,
    #[arg(long, default_value_t = 1e-6)]
    epsilon_loss: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Independent restarts; the lowest-loss one is reported.
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// Include the soft assignment matrix in the JSON.
    #[arg(long)]
    emit_s: bool,
    /// Write the JSON here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Write `id label` lines of the extracted partition.
    #[arg(long)]
    partition_out: Option<PathBuf>,
    /// Write the per-epoch loss as CSV.
    #[arg(long)]
    history_out: Option<PathBuf>,
    /// Write the best parameters as a JSON checkpoint.
    #[arg(long)]
    checkpoint_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Form {
    Entropy,
    Expanded,
}

#[derive(Args)]
struct CodelengthArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Partition file, `id label` per line.
    #[arg(long)]
    partition: PathBuf,
    #[arg(long, value_enum, default_value = "expanded")]
    form: Form,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Normalise by the larger entropy instead of the mean.
    #[arg(long)]
    ami_max: bool,
}

#[derive(Args)]
struct OptimumArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long, default_value_t = DEFAULT_MAX_N)]
    max_n: usize,
}

#[derive(Args)]
struct FlowArgs {
    #[command(flatten)]
    graph: GraphArgs,
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment spec, `.json` or TOML.
    spec: PathBuf,
    /// Overrides the spec's output path.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Print CSV instead of JSON.
    #[arg(long)]
    csv: bool,
}

fn labelled(graph: &Graph, partition: &Partition) -> Vec<(String, usize)> {
    graph.node_ids().iter().cloned().zip(partition.labels().iter().copied()).collect()
}

fn emit<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn cluster(args: ClusterArgs) -> Result<()> {
    let graph = args.graph.load()?;
    let flow = args.graph.flow(&graph)?;
    let x = match &args.features {
        Some(p) => load_features(p, &graph).with_context(|| format!("loading {}", p.display()))?,
        None => identity_features(&graph),
    };
    let arch = Architecture::from(args.arch);
    let mut enc = EncoderConfig::for_graph(arch, graph.n());
    if let Some(h) = args.hidden_dim {
        enc.hidden_dim = h;
    }
    if let Some(s) = args.s {
        enc.s = s;
    }
    enc.dropout_p = args.dropout;
    enc.use_batch_norm = !args.no_batch_norm;
    enc.temperature_init = args.temperature_init;
    let mut cfg = TrainConfig::for_arch(arch);
    if let Some(lr) = args.lr {
        cfg.lr = lr;
    }
    cfg.max_epochs = args.max_epochs;
    cfg.patience = args.patience;
    cfg.epsilon_loss = args.epsilon_loss;
    cfg.seed = args.seed;
    cfg.trials = args.trials;

    let r = train_with_flow(&graph, &flow, &x, &enc, &cfg)?;
    log::info!(
        "trial {} reached {:.6} bits at epoch {} of {}",
        r.trial,
        r.best_loss_bits,
        r.best_epoch,
        r.epochs_run
    );

    if let Some(p) = &args.partition_out {
        let mut out = BufWriter::new(File::create(p)?);
        mapeq_core::mapeq::write_partition(&graph, &r.partition, &mut out)?;
        out.flush()?;
    }
    if let Some(p) = &args.history_out {
        let mut out = BufWriter::new(File::create(p)?);
        writeln!(out, "epoch,loss_bits")?;
        for (e, l) in r.loss_history.iter().enumerate() {
            writeln!(out, "{e},{l}")?;
        }
        out.flush()?;
    }
    if let Some(p) = &args.checkpoint_out {
        r.best_params.save(p)?;
    }

    let s = args.emit_s.then(|| {
        let t = r.best_s.tensor();
        (0..t.rows()).map(|i| t.row(i).to_vec()).collect::<Vec<_>>()
    });
    let report = json!({
        "config": { "encoder": enc, "train": cfg, "alpha": flow.alpha() },
        "loss_bits": r.best_loss_bits,
        "hard_codelength_bits": r.hard_codelength,
        "modules": r.partition.module_count(),
        "best_epoch": r.best_epoch,
        "epochs_run": r.epochs_run,
        "trial": r.trial,
        "trial_losses": r.trial_losses,
        "partition": labelled(&graph, &r.partition),
        "s": s,
    });
    emit(&report, args.output.as_deref())
}

fn codelength(args: CodelengthArgs) -> Result<()> {
    let graph = args.graph.load()?;
    let flow = args.graph.flow(&graph)?;
    let partition = load_partition(&args.partition, &graph)?;
    let l = match args.form {
        Form::Entropy => codelength_entropy_form(&flow, &partition)?,
        Form::Expanded => codelength_expanded_form(&flow, &partition)?,
    };
    emit(&l, None)
}

fn eval(args: EvalArgs) -> Result<()> {
    let graph = args.graph.load()?;
    let pred = load_partition(&args.pred, &graph)?;
    let truth = load_partition(&args.truth, &graph)?;
    let norm = if args.ami_max {
        AmiNormalization::Max
    } else {
        AmiNormalization::Arithmetic
    };
    let report = json!({
        "ami": ami_with(&pred, &truth, norm)?,
        "modules_pred": count_modules(&pred),
        "modules_true": count_modules(&truth),
        "mu_pred": mixing(&graph, &pred)?,
        "mu_true": mixing(&graph, &truth)?,
    });
    emit(&report, None)
}

fn optimum(args: OptimumArgs) -> Result<()> {
    let graph = args.graph.load()?;
    let flow = args.graph.flow(&graph)?;
    let (partition, l) = brute_force_optimum(&flow, args.max_n)?;
    emit(
        &json!({
            "partition": labelled(&graph, &partition),
            "modules": partition.module_count(),
            "codelength": l,
        }),
        None,
    )
}

fn flow(args: FlowArgs) -> Result<()> {
    let graph = args.graph.load()?;
    let flow = args.graph.flow(&graph)?;
    let (_, components) = connected_components(&graph);
    let iteration = flow.power_iteration().map(|v| {
        json!({ "iterations": v.iterations, "converged": v.converged, "residual": v.residual })
    });
    let rates: Vec<(String, f64)> = graph
        .node_ids()
        .iter()
        .cloned()
        .zip(flow.visit_rates().iter().copied())
        .collect();
    emit(
        &json!({
            "n": graph.n(),
            "arcs": graph.arc_count(),
            "directed": graph.is_directed(),
            "total_weight": graph.total_weight(),
            "components": components,
            "alpha": flow.alpha(),
            "closed_form": iteration.is_none(),
            "power_iteration": iteration,
            "flow_sum": flow.flow().sum(),
            "visit_rates": rates,
        }),
        None,
    )
}

fn bench(args: BenchArgs) -> Result<()> {
    let mut spec = ExperimentSpec::from_path(&args.spec).with_context(|| format!("reading {}", args.spec.display()))?;
    if args.output.is_some() {
        spec.output = args.output;
    }
    let table = run_experiment(&spec)?;
    if args.csv {
        table.write_csv(io::stdout().lock())?;
    } else {
        println!("{}", table.to_json()?);
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Cluster(a) => {
            if a.trials == 0 {
                bail!("--trials must be at least 1");
            }
            cluster(a)
        }
        Command::Codelength(a) => codelength(a),
        Command::Eval(a) => eval(a),
        Command::Optimum(a) => optimum(a),
        Command::Flow(a) => flow(a),
        Command::Bench(a) => bench(a),
    }
}
