//! The `spic` command line.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error. Every float
//! written to a report is printed with six significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;

use crate::aggregators::{attention_entropy, Histogram};
use crate::bench::{
    format_sig, run_experiment, sweep, write_csv, DataSpec, ModelFamily, ModelSpec, RunReport, SweepAxis,
};
use crate::error::SpicError;
use crate::graphdata::{generate_sbm, save_graph, FeatureMode, SbmSpec};
use crate::learn::{TrainConfig, Variant};
use crate::propagation::{convergence_report, default_normalize, propagate};
use crate::rng::seeded;

const DEFAULT_SBM_FEATURES: usize = 128;

#[derive(Debug, Parser)]
#[command(
    name = "spic",
    version,
    about = "Graph message passing as power iteration with a trained head"
)]
struct Cli {
    /// Worker threads for runs and sparse products.
    #[arg(long, global = true, env = "SPIC_THREADS")]
    threads: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model over several seeds and report mean ± std.
    Run(RunArgs),
    /// Write a stochastic block model graph directory.
    Sbm(SbmArgs),
    /// Per-node entropy of an aggregator's rows.
    Entropy(EntropyArgs),
    /// Power-iteration convergence toward the dominant eigenvector.
    OracleCheck(OracleArgs),
    /// Run one experiment per value along an axis.
    Sweep(SweepArgs),
    /// Write the propagated features (βI + M)^k X as TSV.
    Propagate(PropagateArgs),
}

#[derive(Debug, Clone, Args)]
struct DataArgs {
    /// Graph directory.
    #[arg(long, conflicts_with = "sbm", required_unless_present = "sbm")]
    data: Option<PathBuf>,
    /// Generated graph: BLOCKSxSIZE:P_IN:P_OUT:LABELED[:SEED] (seed defaults to --seed).
    #[arg(long)]
    sbm: Option<String>,
    /// Feature width of a generated graph.
    #[arg(long, default_value_t = DEFAULT_SBM_FEATURES)]
    sbm_features: usize,
    /// Feature distribution of a generated graph.
    #[arg(long, default_value = "random-uniform")]
    feature_mode: FeatureMode,
    /// Keep only the first N feature columns.
    #[arg(long)]
    keep_features: Option<usize>,
    /// Replace the features by D i.i.d. Uniform[0,1) columns.
    #[arg(long)]
    random_features: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Normalize {
    Auto,
    On,
    Off,
}

impl Normalize {
    fn resolve(self) -> Option<bool> {
        match self {
            Normalize::Auto => None,
            Normalize::On => Some(true),
            Normalize::Off => Some(false),
        }
    }
}

#[derive(Debug, Clone, Args)]
struct ModelArgs {
    /// dad, da, agnn, gat_sym, gat_asym, rl_sym, rl_am, appnp or poly.
    #[arg(long, default_value = "dad")]
    model: ModelFamily,
    /// linear, relu1, general or w.
    #[arg(long, default_value = "linear")]
    variant: Variant,
    /// Iteration counts to try; the best mean validation score is kept.
    #[arg(long, value_delimiter = ',', default_value = "2,3")]
    k: Vec<usize>,
    /// Shift β in (βI + M).
    #[arg(long, default_value_t = 0)]
    beta: u32,
    /// Teleport probability (appnp only).
    #[arg(long)]
    alpha: Option<f64>,
    /// AGNN cosine temperature.
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    /// Per-iteration column scaling; auto turns it on for k > 5.
    #[arg(long, value_enum, default_value_t = Normalize::Auto)]
    normalize: Normalize,
}

#[derive(Debug, Clone, Args)]
struct TrainArgs {
    #[arg(long, default_value_t = 20)]
    runs: usize,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 5e-4)]
    weight_decay: f64,
    /// Width of Ω_p and Ω_R.
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    /// Seed of the first run; run i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sigmoid cut-off for multilabel predictions.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    train: TrainArgs,
    /// CSV report path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// k, beta, feature_dim or model_family.
    #[arg(long)]
    axis: SweepAxis,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<String>,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    train: TrainArgs,
    /// Combined CSV report path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SbmArgs {
    #[arg(long, default_value_t = 2)]
    blocks: usize,
    #[arg(long, default_value_t = 200)]
    size: usize,
    #[arg(long, default_value_t = 0.05)]
    pin: f64,
    #[arg(long, default_value_t = 0.005)]
    pout: f64,
    #[arg(long, default_value_t = 10)]
    labeled: usize,
    #[arg(long, default_value_t = DEFAULT_SBM_FEATURES)]
    features: usize,
    #[arg(long, default_value = "random-uniform")]
    feature_mode: FeatureMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output graph directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EntropyArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "da")]
    model: ModelFamily,
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    /// Seed for random aggregators.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    bins: usize,
    /// Directory receiving entropy.tsv and entropy_histogram.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "dad")]
    model: ModelFamily,
    #[arg(long, default_value_t = 0)]
    beta: u32,
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    #[arg(long, default_value_t = 30)]
    kmax: usize,
    /// Seed for the random start vector and random aggregators.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV path for the k,similarity table.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PropagateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "dad")]
    model: ModelFamily,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    beta: u32,
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    #[arg(long, value_enum, default_value_t = Normalize::Auto)]
    normalize: Normalize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// TSV path, one row per node.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(SpicError),
}

impl From<SpicError> for Failure {
    fn from(e: SpicError) -> Self {
        Failure::Runtime(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parses `args` (program name first), executes the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return 2;
        }
        // Fails harmlessly when the global pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sbm(a) => cmd_sbm(a),
        Command::Entropy(a) => cmd_entropy(a),
        Command::OracleCheck(a) => cmd_oracle_check(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Propagate(a) => cmd_propagate(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            2
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// `BLOCKSxSIZE:P_IN:P_OUT:LABELED[:SEED]`.
fn parse_sbm(text: &str, default_seed: u64) -> CliResult<SbmSpec> {
    let bad = || {
        Failure::Usage(format!(
            "--sbm expects BLOCKSxSIZE:P_IN:P_OUT:LABELED[:SEED], got {text:?}"
        ))
    };
    let parts: Vec<&str> = text.split(':').collect();
    if !(4..=5).contains(&parts.len()) {
        return Err(bad());
    }
    let (blocks, size) = parts[0].split_once('x').ok_or_else(bad)?;
    let num = |s: &str| f64::from_str(s).map_err(|_| bad());
    let int = |s: &str| usize::from_str(s).map_err(|_| bad());
    let seed = match parts.get(4) {
        Some(s) => u64::from_str(s).map_err(|_| bad())?,
        None => default_seed,
    };
    let p_in = num(parts[1])?;
    let p_out = num(parts[2])?;
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) {
        return Err(Failure::Usage("edge probabilities must lie in [0,1]".into()));
    }
    Ok(SbmSpec::uniform(
        int(blocks)?,
        int(size)?,
        p_in,
        p_out,
        int(parts[3])?,
        seed,
    ))
}

fn data_spec(a: &DataArgs, seed: u64) -> CliResult<DataSpec> {
    let mut spec = match (&a.data, &a.sbm) {
        (Some(dir), None) => DataSpec::dir(dir),
        (None, Some(text)) => DataSpec::sbm(parse_sbm(text, seed)?, a.sbm_features, a.feature_mode),
        _ => return Err(Failure::Usage("give exactly one of --data or --sbm".into())),
    };
    spec.keep_first = a.keep_features;
    spec.random_features = a.random_features;
    spec.feature_seed = seed;
    Ok(spec)
}

fn model_spec(a: &ModelArgs) -> CliResult<ModelSpec> {
    let mut m = ModelSpec::new(a.model, a.k.clone());
    if a.model != ModelFamily::Poly {
        m.variant = a.variant;
    } else if a.variant != Variant::Linear && a.variant != Variant::Poly {
        return Err(Failure::Usage("--model poly takes no --variant".into()));
    }
    if a.variant == Variant::Poly && a.model != ModelFamily::Poly {
        return Err(Failure::Usage("use --model poly for the polynomial head".into()));
    }
    match (a.alpha, a.model) {
        (Some(alpha), ModelFamily::Appnp) => {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Failure::Usage(format!("alpha must be in (0,1), got {alpha}")));
            }
            m.alpha = alpha;
        }
        (Some(_), _) => return Err(Failure::Usage("--alpha is only valid with --model appnp".into())),
        (None, _) => {}
    }
    m.beta = a.beta;
    m.eps = a.eps;
    m.normalize = a.normalize.resolve();
    m.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(m)
}

fn train_config(a: &TrainArgs) -> CliResult<TrainConfig> {
    let config = TrainConfig {
        learning_rate: a.lr,
        weight_decay: a.weight_decay,
        epochs: a.epochs,
        runs: a.runs,
        seed: a.seed,
        hidden: a.hidden,
        threshold: a.threshold,
        ..TrainConfig::default()
    };
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(config)
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| SpicError::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| SpicError::io(path, e))?;
    Ok(())
}

fn print_reports(reports: &[RunReport]) {
    for r in reports {
        println!("{}", r.summary());
    }
}

fn cmd_run(a: RunArgs) -> CliResult<()> {
    let config = train_config(&a.train)?;
    let model = model_spec(&a.model)?;
    let data = data_spec(&a.data, config.seed)?;
    let report = run_experiment(&model, &data, &config)?;
    print_reports(std::slice::from_ref(&report));
    if let Some(out) = &a.out {
        write_csv(std::slice::from_ref(&report), out)?;
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> CliResult<()> {
    let config = train_config(&a.train)?;
    let model = model_spec(&a.model)?;
    let data = data_spec(&a.data, config.seed)?;
    let reports = sweep(a.axis, &a.values, &model, &data, &config).map_err(|e| match e {
        SpicError::InvalidInput(msg) => Failure::Usage(msg),
        other => Failure::Runtime(other),
    })?;
    print_reports(&reports);
    write_csv(&reports, &a.out)?;
    Ok(())
}

fn cmd_sbm(a: SbmArgs) -> CliResult<()> {
    if !(0.0..=1.0).contains(&a.pin) || !(0.0..=1.0).contains(&a.pout) {
        return Err(Failure::Usage("edge probabilities must lie in [0,1]".into()));
    }
    let spec = SbmSpec::uniform(a.blocks, a.size, a.pin, a.pout, a.labeled, a.seed);
    let g = generate_sbm(&spec, a.features, a.feature_mode)?;
    save_graph(&g, &a.out)?;
    println!(
        "wrote {} nodes, {} edges to {}",
        g.num_nodes(),
        g.num_edges(),
        a.out.display()
    );
    Ok(())
}

fn aggregator_model(family: ModelFamily, beta: u32, eps: f64) -> ModelSpec {
    let mut m = ModelSpec::new(family, vec![1]);
    m.beta = beta;
    m.eps = eps;
    m
}

fn cmd_entropy(a: EntropyArgs) -> CliResult<()> {
    let g = data_spec(&a.data, a.seed)?.load()?;
    let agg = aggregator_model(a.model, 0, a.eps).build_aggregator(&g, a.seed)?;
    let entropy = attention_entropy(&agg)?;
    let hist = Histogram::new(&entropy, a.bins)?;
    let mut tsv = String::new();
    for h in &entropy {
        writeln!(tsv, "{}", format_sig(*h)).expect("writing to a String");
    }
    let mut csv = String::from("bin_start,bin_end,count\n");
    for (b, count) in hist.counts.iter().enumerate() {
        writeln!(
            csv,
            "{},{},{count}",
            format_sig(hist.edges[b]),
            format_sig(hist.edges[b + 1])
        )
        .expect("writing to a String");
    }
    write_text(&a.out.join("entropy.tsv"), &tsv)?;
    write_text(&a.out.join("entropy_histogram.csv"), &csv)?;
    let mean = entropy.iter().sum::<f64>() / entropy.len() as f64;
    println!("{} nodes, mean entropy {}", entropy.len(), format_sig(mean));
    Ok(())
}

fn cmd_oracle_check(a: OracleArgs) -> CliResult<()> {
    let g = data_spec(&a.data, a.seed)?.load()?;
    let agg = aggregator_model(a.model, a.beta, a.eps).build_aggregator(&g, a.seed)?;
    let mut rng = seeded(a.seed);
    let v0: Vec<f64> = (0..g.num_nodes()).map(|_| 0.5 + rng.random::<f64>()).collect();
    let (sims, decomposition) = convergence_report(&agg, &v0, a.kmax)?;
    let mut csv = String::from("k,similarity\n");
    for (k, s) in sims.iter().enumerate() {
        writeln!(csv, "{k},{}", format_sig(*s)).expect("writing to a String");
    }
    write_text(&a.out, &csv)?;
    println!(
        "spectral gap |λ2|/|λ1| = {}",
        format_sig(decomposition.spectral_gap_ratio())
    );
    Ok(())
}

fn cmd_propagate(a: PropagateArgs) -> CliResult<()> {
    let g = data_spec(&a.data, a.seed)?.load()?;
    let agg = aggregator_model(a.model, a.beta, a.eps).build_aggregator(&g, a.seed)?;
    let normalize = a.normalize.resolve().unwrap_or_else(|| default_normalize(a.k));
    let emb = propagate(&agg, g.features(), a.k, normalize)?;
    let mut tsv = String::new();
    for row in emb.values.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format_sig(*v)).collect();
        writeln!(tsv, "{}", cells.join("\t")).expect("writing to a String");
    }
    write_text(&a.out, &tsv)?;
    Ok(())
}
