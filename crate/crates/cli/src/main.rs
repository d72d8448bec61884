use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hogrl::graph::{homophily_distribution, ClassHomophily, FRAUD};
use hogrl::io;
use hogrl::model::{forward_full, ForwardMode};
use hogrl::propagation::{layerwise_homophily, propagate_features, HighOrderConfig, PropagationMode};
use hogrl::synth::{describe, generate};
use hogrl::training::gradcheck::{gradcheck, GradcheckProblem, GradcheckSize, DEFAULT_STEP, DEFAULT_TOLERANCE};
use hogrl::training::{evaluate_nodes, prepare_inputs, split_for, train, TrainConfig};
use hogrl::{FeatureMatrix, MultiRelationGraph};

#[derive(Parser)]
#[command(name = "hogrl", version, about = "Fraud detection with decoupled high-order graph propagation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write checkpoint, epoch log and test metrics.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split.
    Eval(EvalArgs),
    /// Node homophily histograms, optionally per order.
    Homophily(HomophilyArgs),
    /// Write the propagated features of every order.
    Propagate(PropagateArgs),
    /// Generate a synthetic camouflage graph.
    Gen(GenArgs),
    /// Compare analytic gradients with finite differences.
    Gradcheck(GradcheckArgs),
    /// Export the relation embeddings of a checkpoint.
    Embed(EmbedArgs),
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    features: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    labels: PathBuf,
    /// `key = value` file; flags below take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    mode: Option<PropagationMode>,
    /// Propagate with the raw adjacency instead of the row-normalized one.
    #[arg(long)]
    raw_adjacency: bool,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Split {
    Train,
    Val,
    Test,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    split: Split,
    /// Defaults to the threshold stored in the checkpoint.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Args)]
struct HomophilyArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Also report mixed and decoupled fraud homophily for orders 1..=L.
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long, default_value_t = 10)]
    bins: usize,
}

#[derive(Args)]
struct PropagateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    layers: usize,
    #[arg(long, default_value = "walk")]
    mode: PropagationMode,
    #[arg(long)]
    raw_adjacency: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Size {
    Small,
    Medium,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, value_enum, default_value = "small")]
    size: Size,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: PathBuf,
}

/// Exit status for failures that are not caused by bad input.
const NUMERICAL_FAILURE: u8 = 2;

#[derive(Debug)]
struct NumericalFailure(String);

impl std::fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericalFailure {}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let numerical = e.downcast_ref::<NumericalFailure>().is_some()
                || e.chain().any(|c| c.downcast_ref::<hogrl::Error>().is_some_and(hogrl::Error::is_numerical));
            ExitCode::from(if numerical { NUMERICAL_FAILURE } else { 1 })
        }
    }
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Train(a) => run_train(a),
        Command::Eval(a) => run_eval(a),
        Command::Homophily(a) => run_homophily(a),
        Command::Propagate(a) => run_propagate(a),
        Command::Gen(a) => run_gen(a),
        Command::Gradcheck(a) => run_gradcheck(a),
        Command::Embed(a) => run_embed(a),
    }
}

fn load_data(args: &DataArgs) -> anyhow::Result<(MultiRelationGraph, FeatureMatrix)> {
    let graphs = io::read_graph(&args.graph)?;
    let features = io::read_features(&args.features)?;
    if features.n() != graphs.n() {
        bail!(
            "{} has {} rows but the graph has {} nodes",
            args.features.display(),
            features.n(),
            graphs.n()
        );
    }
    Ok((graphs, features))
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("plain data serializes")
}

fn to_json_pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("plain data serializes")
}

fn run_train(a: TrainArgs) -> anyhow::Result<()> {
    let mut cfg = match &a.config {
        Some(path) => io::read_config(path, TrainConfig::default())?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(epochs) = a.epochs {
        cfg.epochs = epochs;
    }
    if let Some(layers) = a.layers {
        cfg.layers = layers;
    }
    if let Some(gamma) = a.gamma {
        cfg.gamma = gamma;
    }
    if let Some(mode) = a.mode {
        cfg.mode = mode;
    }
    if a.raw_adjacency {
        cfg.normalize = false;
    }
    if let Some(t) = a.threshold {
        cfg.threshold = t;
    }
    cfg.validate()?;

    let (graphs, features) = load_data(&a.data)?;
    let labels = io::read_labels(&a.labels, graphs.n())?;
    let masks = split_for(&labels, &cfg)?;
    let inputs = prepare_inputs(&graphs, &features, &cfg)?;
    let outcome = train(&inputs, &labels, &masks, &cfg)?;
    let ckpt = &outcome.checkpoint;
    let test = evaluate_nodes(&inputs, &ckpt.params, &ckpt.model, &labels, &masks.test, cfg.threshold)?;

    create_dir(&a.out)?;
    io::write_checkpoint(&a.out.join("checkpoint.txt"), ckpt)?;
    let log: String = outcome.reports.iter().map(|r| to_json(r) + "\n").collect();
    fs::write(a.out.join("epochs.jsonl"), log)?;
    fs::write(a.out.join("test_eval.json"), to_json_pretty(&test) + "\n")?;
    println!("{}", to_json_pretty(&test));
    Ok(())
}

fn run_eval(a: EvalArgs) -> anyhow::Result<()> {
    let ckpt = io::read_checkpoint(&a.checkpoint)?;
    let (graphs, features) = load_data(&a.data)?;
    if features.dim() != ckpt.model.in_dim || graphs.len() != ckpt.model.relations {
        bail!(
            "checkpoint expects {} features and {} relations; data has {} and {}",
            ckpt.model.in_dim,
            ckpt.model.relations,
            features.dim(),
            graphs.len()
        );
    }
    let labels = io::read_labels(&a.labels, graphs.n())?;
    let masks = split_for(&labels, &ckpt.config)?;
    let nodes = match a.split {
        Split::Train => &masks.train,
        Split::Val => &masks.val,
        Split::Test => &masks.test,
    };
    let inputs = prepare_inputs(&graphs, &features, &ckpt.config)?;
    let threshold = a.threshold.unwrap_or(ckpt.config.threshold);
    let result = evaluate_nodes(&inputs, &ckpt.params, &ckpt.model, &labels, nodes, threshold)?;
    println!("{}", to_json_pretty(&result));
    Ok(())
}

#[derive(Serialize)]
struct ClassSummary {
    mean: Option<f64>,
    mode: Option<f64>,
    undefined: usize,
    histogram: Vec<usize>,
}

impl From<&ClassHomophily> for ClassSummary {
    fn from(c: &ClassHomophily) -> Self {
        Self {
            mean: c.mean,
            mode: c.mode(),
            undefined: c.undefined,
            histogram: c.histogram.counts.clone(),
        }
    }
}

#[derive(Serialize)]
struct LayerSummary {
    order: usize,
    mixed: ClassSummary,
    decoupled: ClassSummary,
}

#[derive(Serialize)]
struct RelationHomophily {
    relation: String,
    benign: ClassSummary,
    fraud: ClassSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    layers: Option<Vec<LayerSummary>>,
}

fn run_homophily(a: HomophilyArgs) -> anyhow::Result<()> {
    let graphs = io::read_graph(&a.graph)?;
    let labels = io::read_labels(&a.labels, graphs.n())?;
    let mut out = Vec::new();
    for (g, name) in graphs.relations().iter().zip(graphs.names()) {
        let report = homophily_distribution(g, &labels, a.bins)?;
        let layers = match a.layers {
            Some(l) if labels.count(FRAUD) > 0 => Some(
                layerwise_homophily(g, &labels, l, a.bins)?
                    .layers
                    .iter()
                    .map(|layer| LayerSummary {
                        order: layer.order,
                        mixed: (&layer.mixed).into(),
                        decoupled: (&layer.decoupled).into(),
                    })
                    .collect(),
            ),
            Some(_) => Some(Vec::new()),
            None => None,
        };
        out.push(RelationHomophily {
            relation: name.clone(),
            benign: (&report.benign).into(),
            fraud: (&report.fraud).into(),
            layers,
        });
    }
    println!("{}", to_json_pretty(&out));
    Ok(())
}

fn run_propagate(a: PropagateArgs) -> anyhow::Result<()> {
    let (graphs, features) = load_data(&a.data)?;
    let cfg = HighOrderConfig::new(a.layers, a.mode, !a.raw_adjacency);
    create_dir(&a.out)?;
    for (g, name) in graphs.relations().iter().zip(graphs.names()) {
        let p = propagate_features(g, features.data(), &cfg)?;
        for (l, m) in p.orders().iter().enumerate() {
            let path = a.out.join(format!("{name}.order{}.txt", l + 1));
            io::write_matrix(&path, m)?;
        }
    }
    Ok(())
}

fn run_gen(a: GenArgs) -> anyhow::Result<()> {
    let spec = io::read_spec(&a.spec)?;
    let data = generate(&spec)?;
    create_dir(&a.out)?;
    io::write_graph(&a.out.join("graph.txt"), &data.graphs)?;
    io::write_matrix(&a.out.join("features.txt"), data.features.data())?;
    io::write_labels(&a.out.join("labels.txt"), &data.labels)?;
    fs::write(a.out.join("structure.json"), to_json_pretty(&describe(&spec)) + "\n")?;
    Ok(())
}

fn run_gradcheck(a: GradcheckArgs) -> anyhow::Result<()> {
    let size = match a.size {
        Size::Small => GradcheckSize::Small,
        Size::Medium => GradcheckSize::Medium,
    };
    let problem = GradcheckProblem::generate(size, a.seed)?;
    let report = gradcheck(&problem, DEFAULT_STEP)?;
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "max_relative_error {:e}", report.max_relative_error)?;
    writeln!(
        stdout,
        "worst {} analytic {:e} numeric {:e}",
        report.worst, report.worst_analytic, report.worst_numeric
    )?;
    writeln!(stdout, "checked {}", report.checked)?;
    if !report.passes(DEFAULT_TOLERANCE) {
        return Err(NumericalFailure(format!(
            "gradient check failed: {:e} exceeds {:e}",
            report.max_relative_error, DEFAULT_TOLERANCE
        ))
        .into());
    }
    Ok(())
}

fn run_embed(a: EmbedArgs) -> anyhow::Result<()> {
    let ckpt = io::read_checkpoint(&a.checkpoint)?;
    let (graphs, features) = load_data(&a.data)?;
    let inputs = prepare_inputs(&graphs, &features, &ckpt.config)?;
    let trace = forward_full(&inputs, &ckpt.params, &ckpt.model, ForwardMode::Eval)?;
    io::write_matrix(&a.out, &trace.embedding)?;
    Ok(())
}
