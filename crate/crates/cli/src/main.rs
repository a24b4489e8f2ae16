use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use smoothgraph::autoparam::theta_interval_graph;
use smoothgraph::eval::{
    classification_error, connectivity_histogram, degree_stats, graph_diameter,
    label_propagation, rel_l1_error,
};
use smoothgraph::neighbors::{knn_approx, knn_exact, mean_recall, AnnParams};
use smoothgraph::pipeline::{self, LearnConfig, LogParams, Model, NeighborSearch};
use smoothgraph::solvers::SolverOptions;
use smoothgraph::{io as sgio, Error, FeatureMatrix, SparseWeightedGraph};

/// Learn sparse weighted graphs from smooth signals.
#[derive(Parser, Debug)]
#[command(name = "smoothgraph", version, about)]
struct Cli {
    /// Worker threads, 0 = one per core.
    #[arg(long, global = true, env = "SMOOTHGRAPH_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the symmetrized k·r nearest-neighbor support and report recall.
    Knn(KnnArgs),
    /// Print the θ interval that yields about k edges per node.
    SelectTheta(SelectThetaArgs),
    /// Learn edge weights on a nearest-neighbor support.
    Learn(LearnArgs),
    /// Evaluate a learned graph.
    Eval(EvalArgs),
    /// Time neighbor search and solver iterations on synthetic data.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct SupportArgs {
    /// Feature matrix, CSV (one row per node) or binary SGF1.
    #[arg(long)]
    input: PathBuf,
    /// Target edges per node.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Candidate oversampling: the support holds k·r neighbors per node.
    #[arg(long, default_value_t = 3)]
    r: usize,
    /// Exact neighbor search instead of NN-Descent.
    #[arg(long, conflicts_with = "approx")]
    exact: bool,
    #[arg(long)]
    approx: bool,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

impl SupportArgs {
    fn search(&self) -> NeighborSearch {
        if self.exact {
            NeighborSearch::Exact
        } else {
            NeighborSearch::Approx(AnnParams::with_seed(self.seed))
        }
    }
}

#[derive(Args, Debug)]
struct KnnArgs {
    #[command(flatten)]
    support: SupportArgs,
    /// Support TSV `i\tj\tz` with z the squared distance.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SelectThetaArgs {
    #[command(flatten)]
    support: SupportArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum ModelArg {
    Log,
    L2,
    DaitchHard,
    DaitchSoft,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Log => Model::Log,
            ModelArg::L2 => Model::L2,
            ModelArg::DaitchHard => Model::DaitchHard,
            ModelArg::DaitchSoft => Model::DaitchSoft,
        }
    }
}

#[derive(Args, Debug)]
struct LearnArgs {
    #[command(flatten)]
    support: SupportArgs,
    #[arg(long, value_enum, default_value_t = ModelArg::Log)]
    model: ModelArg,
    /// Fixed θ for the log model; chosen from k when absent.
    #[arg(long, conflicts_with_all = ["alpha", "beta"])]
    theta: Option<f64>,
    /// Log barrier weight (log model, with --beta) or the ℓ2 model's α.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Degree penalty of the soft Daitch model.
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = SolverOptions::default().max_iter)]
    max_iter: usize,
    #[arg(long, default_value_t = SolverOptions::default().tol)]
    tol: f64,
    /// Learned graph as TSV `i\tj\tw`.
    #[arg(long)]
    out: PathBuf,
    /// Run summary and solver report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Per-iteration objective as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Metric {
    Diameter,
    Labelprop,
    Connectivity,
    Energy,
    Degrees,
    RelL1,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Graph TSV `i\tj\tw`.
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_enum)]
    metric: Metric,
    /// Node count; defaults to the label count, else one past the largest index.
    #[arg(long)]
    n: Option<usize>,
    /// Labels as CSV `node_id,label`.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Features, needed by the energy metric.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Reference graph for rel-l1.
    #[arg(long)]
    other_graph: Option<PathBuf>,
    /// Fraction of labels kept as seeds for labelprop.
    #[arg(long)]
    labeled_fraction: Option<f64>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Treat the third column as a squared distance and weight it exp(−z/σ²).
    #[arg(long)]
    sigma2: Option<f64>,
    /// CSV output: connectivity histogram or labelprop predictions.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Comma-separated node counts.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    n: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    d: usize,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 3)]
    r: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Solver iterations per size.
    #[arg(long, default_value_t = 100)]
    iters: usize,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Io(String),
    Infeasible(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Io(_) => 3,
            Self::Infeasible(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Config(m) | Self::Io(m) | Self::Infeasible(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Io(_) | Error::Format(_) => Self::Io(msg),
            Error::IsolatedNode(_) | Error::EmptySupport | Error::ZeroDegree(_) => {
                Self::Infeasible(msg)
            }
            _ => Self::Config(msg),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

type CliResult = std::result::Result<(), Failure>;

fn io_context(path: &Path) -> impl Fn(Error) -> Failure + '_ {
    move |e| {
        let f = Failure::from(e);
        match f {
            Failure::Io(m) => Failure::Io(format!("{}: {m}", path.display())),
            other => other,
        }
    }
}

fn print_json(value: &serde_json::Value) -> CliResult {
    let mut out = io::stdout().lock();
    serde_json::to_writer(&mut out, value).map_err(|e| Failure::Io(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

fn read_input(path: &Path) -> Result<FeatureMatrix, Failure> {
    sgio::read_features(path).map_err(io_context(path))
}

fn run_knn(args: &KnnArgs) -> CliResult {
    let s = &args.support;
    if s.k == 0 || s.r == 0 {
        return Err(Failure::Config("k and r must be positive".into()));
    }
    let x = read_input(&s.input)?;
    let (support, secs) = pipeline::build_support(&x, s.k, s.r, &s.search())?;
    log::info!("support with {} edges in {secs:.3}s", support.len());
    sgio::save_support(&args.out, &support).map_err(io_context(&args.out))?;

    let m = (s.k * s.r).min(x.n() - 1);
    let recall = match s.search() {
        NeighborSearch::Exact => 1.0,
        NeighborSearch::Approx(params) => {
            mean_recall(&knn_approx(&x, m, &params)?, &knn_exact(&x, m)?)?
        }
    };
    print_json(&json!({"n": x.n(), "m": m, "mean_recall": recall}))
}

fn run_select_theta(args: &SelectThetaArgs) -> CliResult {
    let s = &args.support;
    if s.k == 0 || s.r == 0 {
        return Err(Failure::Config("k and r must be positive".into()));
    }
    let x = read_input(&s.input)?;
    let (support, _) = pipeline::build_support(&x, s.k, s.r, &s.search())?;
    let g = theta_interval_graph(&support, s.k)?;
    if g.support_too_small {
        log::warn!(
            "{} of {} nodes skipped, consider a larger r",
            g.skipped,
            x.n()
        );
    }
    // serde_json writes an unbounded upper end as null
    print_json(&json!({
        "k": s.k,
        "theta_lower": g.interval.lower,
        "theta_upper": g.interval.upper,
        "theta": g.interval.pick(),
        "skipped_columns": g.skipped,
    }))
}

fn learn_config(args: &LearnArgs) -> Result<LearnConfig, Failure> {
    let model = Model::from(args.model);
    let s = &args.support;
    if s.k == 0 || s.r == 0 {
        return Err(Failure::Config("k and r must be positive".into()));
    }
    let log_params = match (args.theta, args.alpha, args.beta) {
        (Some(theta), _, _) => LogParams::Theta(theta),
        (None, Some(alpha), Some(beta)) => LogParams::Explicit { alpha, beta },
        (None, None, None) => LogParams::Auto,
        (None, Some(_), None) if model == Model::L2 => LogParams::Auto,
        _ if model == Model::Log => {
            return Err(Failure::Config("--alpha and --beta go together".into()))
        }
        _ => LogParams::Auto,
    };
    if model != Model::Log && (args.theta.is_some() || args.beta.is_some()) {
        return Err(Failure::Config(format!(
            "--theta and --beta apply to the log model only, not {model}"
        )));
    }
    let solver = SolverOptions {
        max_iter: args.max_iter,
        tol: args.tol,
        record_objective: args.trace.is_some(),
        ..SolverOptions::default()
    };
    solver.validate()?;
    Ok(LearnConfig {
        model,
        k: s.k,
        r: s.r,
        search: s.search(),
        log_params,
        l2_alpha: args.alpha.unwrap_or(1.0),
        mu: args.mu,
        solver,
    })
}

fn run_learn(args: &LearnArgs) -> CliResult {
    let cfg = learn_config(args)?;
    let x = read_input(&args.support.input)?;
    let (graph, summary) = pipeline::learn_graph(&x, &cfg)?;
    log::info!(
        "{} edges, mean degree {:.2}, {} iterations ({:?})",
        graph.len(),
        summary.obtained_mean_degree,
        summary.iterations,
        summary.solver.stop_reason
    );
    sgio::save_graph(&args.out, &graph).map_err(io_context(&args.out))?;
    let report = serde_json::to_value(&summary).map_err(|e| Failure::Io(e.to_string()))?;
    if let Some(path) = &args.report {
        let mut f = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut f, &report).map_err(|e| Failure::Io(e.to_string()))?;
        writeln!(f)?;
        f.flush()?;
    }
    if let Some(path) = &args.trace {
        let mut f = BufWriter::new(File::create(path)?);
        writeln!(f, "iteration,objective")?;
        for (t, obj) in summary.solver.objective_trace.iter().enumerate() {
            writeln!(f, "{},{}", t + 1, sgio::format_weight(*obj))?;
        }
        f.flush()?;
    }
    print_json(&report)
}

fn load_eval_graph(path: &Path, n: Option<usize>, sigma2: Option<f64>) -> Result<SparseWeightedGraph, Failure> {
    let g = sgio::load_graph(path, n).map_err(io_context(path))?;
    match sigma2 {
        None => Ok(g),
        Some(s2) if s2 > 0.0 && s2.is_finite() => Ok(SparseWeightedGraph::new(
            g.n(),
            g.pairs().to_vec(),
            g.weights().iter().map(|z| (-z / s2).exp()).collect(),
        )?),
        Some(s2) => Err(Failure::Config(format!("sigma2 must be positive, got {s2}"))),
    }
}

fn count_labels(path: &Path) -> Result<usize, Failure> {
    // one past the largest node id
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .filter_map(|l| l.split(',').next()?.trim().parse::<usize>().ok())
        .max()
        .map_or(0, |m| m + 1))
}

fn run_eval(args: &EvalArgs) -> CliResult {
    if let Some(f) = args.labeled_fraction {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Failure::Config(format!("labeled fraction must lie in (0, 1], got {f}")));
        }
    }
    let needs = |flag: &Option<PathBuf>, name: &str| {
        flag.clone()
            .ok_or_else(|| Failure::Config(format!("metric {:?} needs --{name}", args.metric)))
    };
    let labels_path = match args.metric {
        Metric::Labelprop | Metric::Connectivity => Some(needs(&args.labels, "labels")?),
        _ => args.labels.clone(),
    };
    let other_path = match args.metric {
        Metric::RelL1 => Some(needs(&args.other_graph, "other-graph")?),
        _ => None,
    };
    let input_path = match args.metric {
        Metric::Energy => Some(needs(&args.input, "input")?),
        _ => None,
    };

    let n = match (args.n, &labels_path) {
        (Some(n), _) => Some(n),
        (None, Some(p)) => Some(count_labels(p)?),
        (None, None) => None,
    };
    let g = load_eval_graph(&args.graph, n, args.sigma2)?;
    let labels = match &labels_path {
        Some(p) => Some(sgio::read_labels(p, g.n()).map_err(io_context(p))?),
        None => None,
    };

    match args.metric {
        Metric::Diameter => {
            let d = graph_diameter(&g);
            print_json(&serde_json::to_value(d).map_err(|e| Failure::Io(e.to_string()))?)
        }
        Metric::Degrees => {
            let d = degree_stats(&g);
            print_json(&serde_json::to_value(d).map_err(|e| Failure::Io(e.to_string()))?)
        }
        Metric::Energy => {
            let path = input_path.unwrap();
            let x = read_input(&path)?;
            let energy = smoothgraph::dirichlet_energy(&x, &g)?;
            print_json(&json!({ "energy": energy }))
        }
        Metric::RelL1 => {
            let path = other_path.unwrap();
            let other = load_eval_graph(&path, Some(g.n()), args.sigma2)?;
            print_json(&json!({ "rel_l1": rel_l1_error(&g, &other)? }))
        }
        Metric::Connectivity => {
            let h = connectivity_histogram(&g, labels.as_ref().unwrap())?;
            if let Some(out) = &args.out {
                let mut f = BufWriter::new(File::create(out)?);
                writeln!(f, "class,fraction")?;
                for (c, v) in &h.per_class {
                    writeln!(f, "{c},{v}")?;
                }
                writeln!(f, "wrong,{}", h.wrong)?;
                f.flush()?;
            }
            print_json(&serde_json::to_value(&h).map_err(|e| Failure::Io(e.to_string()))?)
        }
        Metric::Labelprop => {
            let truth = labels.unwrap();
            let seeds = match args.labeled_fraction {
                Some(f) => truth.masked(f, args.seed)?,
                None => truth.clone(),
            };
            let prop = label_propagation(&g, &seeds)?;
            let evaluated: Vec<usize> = (0..g.n())
                .filter(|&i| truth.get(i).is_some() && seeds.get(i).is_none())
                .collect();
            let truth_vec: Vec<u32> = truth.labels().iter().map(|l| l.unwrap_or(u32::MAX)).collect();
            let error = classification_error(&prop.predicted, &truth_vec, &evaluated);
            if let Some(out) = &args.out {
                let mut f = BufWriter::new(File::create(out)?);
                sgio::write_labels(&mut f, &prop.predicted)?;
                f.flush()?;
            }
            print_json(&json!({
                "error": error,
                "evaluated": evaluated.len(),
                "seeds": seeds.known_count(),
                "unclassifiable": prop.unclassifiable,
                "sweeps": prop.sweeps,
            }))
        }
    }
}

fn run_bench(args: &BenchArgs) -> CliResult {
    if args.n.is_empty() {
        return Err(Failure::Config("--n needs at least one size".into()));
    }
    let rows = pipeline::bench(&args.n, args.d, args.k, args.r, args.seed, args.iters)?;
    let mut out: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    };
    writeln!(out, "{}", pipeline::BenchRow::CSV_HEADER)?;
    for row in &rows {
        writeln!(out, "{}", row.to_csv())?;
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
    {
        log::warn!("thread pool: {e}");
    }
    let result = match &cli.command {
        Command::Knn(a) => run_knn(a),
        Command::SelectTheta(a) => run_select_theta(a),
        Command::Learn(a) => run_learn(a),
        Command::Eval(a) => run_eval(a),
        Command::Bench(a) => run_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
