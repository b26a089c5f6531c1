use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use backdoor::bench::{export_plot_data, run_benchmark, BenchmarkReport, GraphKind, Method, ScenarioConfig};
use backdoor::discovery::{optimize, tune, DiscoveryConfig, DiscoveryProblem, InitGamma, Lambda2Rule, TuningGrid};
use backdoor::estimation::backdoor_fit;
use backdoor::graph::{CausalGraph, Role};
use backdoor::scm::{nhs_fixture_sem, sample_parameters, simulation_sem, BlockDims, Dataset, RoleMap, SimulationNoise};
use backdoor::Error;

#[derive(Parser)]
#[command(name = "backdoor", version, about = "Backdoor adjustment discovery with an auxiliary variable")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a dataset from a built-in or custom SEM and write it as CSV.
    Simulate(SimulateArgs),
    /// Learn an adjustment set from a CSV with a roles file.
    Discover(DiscoverArgs),
    /// Backdoor ATE for an explicit adjustment set.
    Estimate(EstimateArgs),
    /// Run the benchmark grid and write the report CSV and summary JSON.
    Benchmark(BenchmarkArgs),
    /// Turn a report CSV into histogram and scatter CSVs.
    ExportPlots(ExportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphArg {
    Sim4block,
    Nhs,
}

#[derive(Args)]
struct SimulateArgs {
    /// Built-in graph; ignored when --graph-file is given.
    #[arg(long, value_enum, default_value = "sim4block")]
    graph: GraphArg,
    /// Graph JSON with coefficients sampled from --seed.
    #[arg(long)]
    graph_file: Option<PathBuf>,
    /// Size of every block of the four-block simulation.
    #[arg(long, default_value_t = 30)]
    dims: usize,
    #[arg(long, default_value_t = 0.6)]
    sigma_x2: f64,
    #[arg(long, default_value_t = 0.5)]
    omega: f64,
    #[arg(long, default_value_t = 20_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    sign_flip_prob: f64,
    /// Rescale every column to unit variance.
    #[arg(long)]
    standardize: bool,
    /// Keep latent (U) columns.
    #[arg(long)]
    keep_latent: bool,
    #[arg(long)]
    out: PathBuf,
    /// Roles sidecar; defaults to `<out>.roles.json`.
    #[arg(long)]
    roles_out: Option<PathBuf>,
    /// Also write the sampled SEM as JSON.
    #[arg(long)]
    sem_out: Option<PathBuf>,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    /// JSON object mapping column id to W, X, Y, Z or U.
    #[arg(long)]
    roles: PathBuf,
}

#[derive(Args)]
struct DiscoverArgs {
    #[command(flatten)]
    data: DataArgs,
    /// DiscoveryConfig JSON; its fields override the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// `ols` or `random:<seed>`.
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    support_threshold: Option<f64>,
    #[arg(long, value_parser = parse_rule)]
    lambda2_rule: Option<Lambda2Rule>,
    /// Cross-validate λ₁, η and the init over the default grid first.
    #[arg(long)]
    tune: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated Z column ids; empty for the marginal estimate.
    #[arg(long, default_value = "")]
    zstar: String,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// ScenarioConfig JSON; its fields override the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    graph: Option<GraphArg>,
    #[arg(long)]
    graph_file: Option<PathBuf>,
    #[arg(long)]
    dims: Option<usize>,
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    sigma_x2: Option<Vec<f64>>,
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    omega: Option<Vec<f64>>,
    #[arg(long)]
    n_total: Option<usize>,
    #[arg(long, num_args = 2..=3, value_delimiter = ',')]
    split: Option<Vec<f64>>,
    #[arg(long)]
    n_settings: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long, value_parser = parse_rule)]
    lambda2_rule: Option<Lambda2Rule>,
    #[arg(long)]
    record_timing: bool,
    #[arg(long, default_value = "report.csv")]
    out: PathBuf,
    #[arg(long, default_value = "summary.json")]
    summary: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Histogram bin width; Freedman-Diaconis when omitted.
    #[arg(long)]
    bin_width: Option<f64>,
}

fn parse_rule(s: &str) -> std::result::Result<Lambda2Rule, String> {
    serde_json::from_value(Value::String(s.to_owned())).map_err(|_| "expected raise_on_rejection or stop_on_rejection".into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Discover(a) => discover(a),
        Command::Estimate(a) => estimate(a),
        Command::Benchmark(a) => benchmark(a),
        Command::ExportPlots(a) => export(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, Error::Config(_)) { 2 } else { 1 })
        }
    }
}

type Result<T> = backdoor::Result<T>;

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

/// Object fields of `over` replace those of `base`, recursively.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, o) => *b = o,
    }
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

fn write_json(path: Option<&Path>, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => {
            if let Err(e) = writeln!(std::io::stdout().lock(), "{text}") {
                if e.kind() != std::io::ErrorKind::BrokenPipe {
                    return Err(e.into());
                }
            }
        }
    }
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let noise = SimulationNoise::with_treatment_noise(a.sigma_x2);
    let sem = match (&a.graph_file, a.graph) {
        (Some(path), _) => {
            let g = CausalGraph::from_json(&std::fs::read_to_string(path)?).map_err(config_err)?;
            let mut sem = sample_parameters(&g, a.seed, a.sign_flip_prob)?;
            sem.set_omega(a.omega)?;
            sem.set_noise_var(&g.id(g.treatment()).to_owned(), a.sigma_x2)?;
            sem
        }
        (None, GraphArg::Sim4block) => simulation_sem(BlockDims::uniform(a.dims), noise, a.omega, a.sign_flip_prob, a.seed)?,
        (None, GraphArg::Nhs) => nhs_fixture_sem(a.omega, a.sigma_x2)?,
    };
    let mut data = sem.sample_data(a.n, a.seed, false)?;
    if !a.keep_latent {
        data = data.observed();
    }
    if a.standardize {
        data = data.standardize()?;
    }
    data.write_csv(BufWriter::new(File::create(&a.out)?))?;
    let roles_path = a.roles_out.unwrap_or_else(|| a.out.with_extension("roles.json"));
    write_json(Some(&roles_path), &data.role_map())?;
    if let Some(p) = a.sem_out {
        std::fs::write(p, sem.to_json()?)?;
    }
    Ok(())
}

fn load(d: &DataArgs) -> Result<Dataset> {
    let roles: RoleMap = serde_json::from_value(read_json(&d.roles)?).map_err(config_err)?;
    Dataset::read_csv(BufReader::new(File::open(&d.data)?), &roles)
}

fn parse_init(s: &str) -> Result<InitGamma> {
    match s.split_once(':') {
        None if s == "ols" => Ok(InitGamma::Ols),
        Some(("random", seed)) => Ok(InitGamma::Random { seed: seed.parse().map_err(config_err)? }),
        _ => Err(config_err(format!("unknown init `{s}`; use ols or random:<seed>"))),
    }
}

fn discover(a: DiscoverArgs) -> Result<()> {
    let mut cfg = DiscoveryConfig::default();
    if let Some(v) = a.lambda1 {
        cfg.lambda1 = v;
    }
    if let Some(v) = a.lambda2 {
        cfg.lambda2 = v;
    }
    if let Some(v) = a.eta {
        cfg.eta = v;
    }
    if let Some(v) = a.max_iters {
        cfg.max_iters = v;
    }
    if let Some(s) = &a.init {
        cfg.init_gamma = parse_init(s)?;
    }
    if a.support_threshold.is_some() {
        cfg.support_threshold = a.support_threshold;
    }
    if let Some(r) = a.lambda2_rule {
        cfg.lambda2_rule = r;
    }
    if let Some(path) = &a.config {
        let mut v = serde_json::to_value(&cfg)?;
        merge(&mut v, read_json(path)?);
        cfg = serde_json::from_value(v).map_err(config_err)?;
    }
    cfg.validate()?;
    let data = load(&a.data)?;
    if a.tune {
        cfg = tune(&data, &cfg, &TuningGrid::default(), a.seed)?.config;
    }
    let result = optimize(&DiscoveryProblem::from_dataset(&data)?, &cfg)?;
    write_json(a.out.as_deref(), &result)
}

fn estimate(a: EstimateArgs) -> Result<()> {
    let data = load(&a.data)?;
    let ids: Vec<&str> = a.zstar.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    let cols = ids
        .iter()
        .map(|id| {
            let c = data.index_of(id)?;
            if data.columns()[c].role != Role::Z {
                return Err(config_err(format!("`{id}` is not a Z column")));
            }
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = backdoor_fit(&data, &cols)?;
    write_json(None, &json!({ "zstar": ids, "ate": fit.ate, "std_error": fit.std_error }))
}

fn benchmark(a: BenchmarkArgs) -> Result<()> {
    let mut cfg = ScenarioConfig::default();
    match (&a.graph_file, a.graph) {
        (Some(p), _) => cfg.graph_kind = GraphKind::CustomFile(p.clone()),
        (None, Some(GraphArg::Nhs)) => cfg.graph_kind = GraphKind::Nhs,
        (None, Some(GraphArg::Sim4block)) => cfg.graph_kind = GraphKind::Sim4block,
        (None, None) => {}
    }
    if let Some(d) = a.dims {
        cfg.block_dims = BlockDims::uniform(d);
    }
    if let Some(v) = a.sigma_x2 {
        cfg.sigma_x2 = v;
    }
    if let Some(v) = a.omega {
        cfg.omega = v;
    }
    if let Some(v) = a.n_total {
        cfg.n_total = v;
    }
    if let Some(v) = a.split {
        cfg.split = v;
    }
    if let Some(v) = a.n_settings {
        cfg.n_settings = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(ms) = &a.methods {
        cfg.methods = ms.iter().map(|m| m.parse::<Method>()).collect::<Result<_>>()?;
    }
    if let Some(r) = a.lambda2_rule {
        cfg.discovery.lambda2_rule = r;
    }
    cfg.record_timing |= a.record_timing;
    if let Some(path) = &a.config {
        let mut v = serde_json::to_value(&cfg)?;
        merge(&mut v, read_json(path)?);
        cfg = serde_json::from_value(v).map_err(config_err)?;
    }
    let report = run_benchmark(&cfg)?;
    let mut out = BufWriter::new(File::create(&a.out)?);
    report.write_csv(&mut out)?;
    out.flush()?;
    std::fs::write(&a.summary, report.summary_json()? + "\n")?;
    Ok(())
}

fn export(a: ExportArgs) -> Result<()> {
    let report = BenchmarkReport::read_csv(BufReader::new(File::open(&a.report)?), Lambda2Rule::RaiseOnRejection)?;
    let files = export_plot_data(&report, &a.out_dir, a.bin_width)?;
    eprintln!("wrote {} and {}", files.histogram.display(), files.scatter.display());
    Ok(())
}
