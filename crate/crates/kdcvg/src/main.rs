//! Command-line front end wiring the pipeline stages together: corpus
//! ingestion, retrieval training and querying, script composition, motion
//! training and generation, the metric suite, the retrieval benchmark, and
//! the bundled aggregate-score reproduction.
//!
//! Exit codes: 0 success, 1 usage error (bad flags or flag combinations),
//! 2 data error (anything arising from file contents or processing). All
//! randomness is seeded via flags or the config file, flags win, and every
//! file output is byte-identical across reruns with the same inputs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use kdcvg::ackb::{self, KnowledgeBase};
use kdcvg::config::Config;
use kdcvg::error::Error;
use kdcvg::evalkit::{
    self, bench_sweep, evaluate_trajectories, minmax_aggregate, table2_fixture, BenchReport,
    EvaluationReport, METRIC_LABELS,
};
use kdcvg::motion::{self, GenerateMode, LatentTrajectory, MdTrainConfig, VelocityModel};
use kdcvg::policy::{self, TrainConfig};
use kdcvg::scgat::{self, AttentionParams, RetrievalResult, Strategy};
use kdcvg::script::{compose_script, render_prompt, Composition};

/// CLI failure split by exit-code class.
enum CliError {
    /// Flag combinations clap cannot express; exit 1.
    Usage(String),
    /// Anything arising from data or processing; exit 2.
    Data(Error),
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        CliError::Data(err)
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Data(Error::Io(err))
    }
}

type CliResult = Result<(), CliError>;

#[derive(Parser)]
#[command(
    name = "kdcvg",
    about = "Knowledge-driven creative video generation pipeline",
    version
)]
struct Cli {
    /// Optional TOML config file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Integrate forward from seeded Gaussian noise.
    Noise,
    /// Invert a reference trajectory, then integrate forward.
    Rfi,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaseArg {
    /// Zero base map: the untrained field predicts zero velocity.
    Zero,
    /// Seeded Gaussian base map.
    Seeded,
}

#[derive(Subcommand)]
enum Command {
    /// Build a knowledge base from a JSONL corpus and persist it.
    Ingest {
        /// JSONL corpus; one record per line.
        input: PathBuf,
        /// Output knowledge-base file (default: paths.kb from config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train retrieval attention on a knowledge base; writes the learned
    /// parameters plus a JSONL reward log.
    TrainRetrieval {
        /// Knowledge-base file (default: paths.kb from config).
        #[arg(long)]
        kb: Option<PathBuf>,
        /// Output parameter file.
        #[arg(long)]
        out: PathBuf,
        /// Reward log path (default: <out> with extension log.jsonl).
        #[arg(long)]
        log: Option<PathBuf>,
        /// Training steps (default: rl.steps from config).
        #[arg(long)]
        steps: Option<usize>,
        /// Learning rate (default: rl.lr from config).
        #[arg(long)]
        lr: Option<f64>,
        /// Episodes per step (default: rl.batch from config).
        #[arg(long)]
        batch: Option<usize>,
        /// Training seed (default: rl.seed from config).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Rank knowledge-base records for a query and print the result.
    Retrieve {
        /// Knowledge-base file (default: paths.kb from config).
        #[arg(long)]
        kb: Option<PathBuf>,
        /// Trained parameter file (required for the scgat strategy).
        #[arg(long)]
        params: Option<PathBuf>,
        /// Query selling point.
        #[arg(long)]
        query: String,
        /// Results to return (default: retrieval.k from config).
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value = "scgat")]
        strategy: Strategy,
        /// Seed for the random strategy.
        #[arg(long, default_value_t = 0)]
        rng_seed: u64,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Retrieve, adapt, and synthesize a script for a query; prints the
    /// script and the prompt bundle behind it.
    ComposeScript {
        /// Knowledge-base file (default: paths.kb from config).
        #[arg(long)]
        kb: Option<PathBuf>,
        /// Trained parameter file (identity attention when omitted).
        #[arg(long)]
        params: Option<PathBuf>,
        /// Query selling point.
        #[arg(long)]
        query: String,
        /// References to retrieve (default: retrieval.k from config).
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Distill a reference trajectory's motion into a low-rank adapter;
    /// writes the model plus a JSONL loss log.
    TrainMotion {
        /// Reference trajectory JSON.
        #[arg(long)]
        reference: PathBuf,
        /// Output model file.
        #[arg(long)]
        out: PathBuf,
        /// Loss log path (default: <out> with extension log.jsonl).
        #[arg(long)]
        log: Option<PathBuf>,
        /// Base velocity map (zero is the untrained default).
        #[arg(long, value_enum, default_value = "zero")]
        base: BaseArg,
        /// Training steps (default: motion.steps from config).
        #[arg(long)]
        steps: Option<usize>,
        /// Learning rate (default: motion.lr from config).
        #[arg(long)]
        lr: Option<f64>,
        /// Adapter rank (default: motion.rank from config).
        #[arg(long)]
        rank: Option<usize>,
        /// Adapter scale (default: motion.scale from config).
        #[arg(long)]
        scale: Option<f64>,
        /// t draws per step (default: motion.t_samples from config).
        #[arg(long)]
        t_samples: Option<usize>,
        /// Seed for the base map, noise endpoint, and t draws
        /// (default: motion.seed from config).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate a latent trajectory from a trained model.
    Generate {
        /// Model file.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Reference trajectory (required for rfi mode).
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Noise seed (noise mode only).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Frames to generate in noise mode (default: motion.n from config).
        #[arg(long)]
        frames: Option<usize>,
        /// Euler steps (default: motion.euler_steps from config).
        #[arg(long)]
        euler_steps: Option<usize>,
        /// Output trajectory JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score trajectories against a script with the metric suite.
    Evaluate {
        /// Trajectory JSON files; metrics are reported per file.
        #[arg(long, num_args = 1.., required = true)]
        traj: Vec<PathBuf>,
        /// Script text the trajectories should depict.
        #[arg(long)]
        script: String,
        /// Write the report JSON here as well as stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed of the frame-embedding projection.
        #[arg(long, default_value_t = 0)]
        projection_seed: u64,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Run the synthetic retrieval benchmark over all four strategies.
    BenchRetrieval {
        /// Benchmark seed (corpus geometry, training, and baselines).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = evalkit::BENCH_CORPUS)]
        corpus_size: usize,
        #[arg(long, default_value_t = evalkit::BENCH_DIM)]
        dim: usize,
        #[arg(long, default_value_t = scgat::DEFAULT_K)]
        k: usize,
        /// Training steps on the benchmark corpus.
        #[arg(long, default_value_t = policy::DEFAULT_STEPS)]
        steps: usize,
        /// Learning rate on the benchmark corpus (tuned for its size).
        #[arg(long, default_value_t = evalkit::BENCH_LEARNING_RATE)]
        lr: f64,
        /// Write the report JSON here as well as stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Min-Max aggregate scores over published raw metrics (bundled
    /// six-method fixture unless --raw is given).
    ReproduceTable2 {
        /// CSV of raw metrics: method,textual_alignment,
        /// temporal_consistency,dynamic_degree,motion_smoothness.
        #[arg(long)]
        raw: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // --help and --version land here too; they are not failures.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    let config = match load_config(cli.config.as_deref()) {
        Ok(config) => config,
        Err(err) => fail(err),
    };
    if let Err(err) = run(cli.command, &config) {
        fail(err);
    }
}

fn fail(err: CliError) -> ! {
    match err {
        CliError::Usage(msg) => {
            eprintln!("usage error: {msg}");
            std::process::exit(1);
        }
        CliError::Data(err) => {
            eprintln!("error: {err}");
            std::process::exit(2);
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<Config, CliError> {
    match path {
        Some(path) => Ok(Config::load(path)?),
        None => Ok(Config::default()),
    }
}

fn run(command: Command, config: &Config) -> CliResult {
    match command {
        Command::Ingest { input, out } => cmd_ingest(&input, out, config),
        Command::TrainRetrieval {
            kb,
            out,
            log,
            steps,
            lr,
            batch,
            seed,
        } => cmd_train_retrieval(kb, &out, log, steps, lr, batch, seed, config),
        Command::Retrieve {
            kb,
            params,
            query,
            k,
            strategy,
            rng_seed,
            format,
        } => cmd_retrieve(kb, params, &query, k, strategy, rng_seed, format, config),
        Command::ComposeScript {
            kb,
            params,
            query,
            k,
            format,
        } => cmd_compose(kb, params, &query, k, format, config),
        Command::TrainMotion {
            reference,
            out,
            log,
            base,
            steps,
            lr,
            rank,
            scale,
            t_samples,
            seed,
        } => cmd_train_motion(
            &reference, &out, log, base, steps, lr, rank, scale, t_samples, seed, config,
        ),
        Command::Generate {
            model,
            mode,
            reference,
            seed,
            frames,
            euler_steps,
            out,
        } => cmd_generate(&model, mode, reference, seed, frames, euler_steps, &out, config),
        Command::Evaluate {
            traj,
            script,
            out,
            projection_seed,
            format,
        } => cmd_evaluate(&traj, &script, out, projection_seed, format, config),
        Command::BenchRetrieval {
            seed,
            corpus_size,
            dim,
            k,
            steps,
            lr,
            out,
            format,
        } => cmd_bench(seed, corpus_size, dim, k, steps, lr, out, format),
        Command::ReproduceTable2 { raw, format } => cmd_table2(raw, format),
    }
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

fn kb_path(flag: Option<PathBuf>, config: &Config) -> PathBuf {
    flag.unwrap_or_else(|| config.paths.kb.clone())
}

fn load_kb(path: &Path) -> Result<KnowledgeBase, CliError> {
    Ok(ackb::load_kb(path)?)
}

fn load_params(path: &Path) -> Result<AttentionParams, CliError> {
    Ok(scgat::load_params(BufReader::new(File::open(path)?))?)
}

fn load_trajectory(path: &Path) -> Result<LatentTrajectory, CliError> {
    Ok(motion::load_trajectory(BufReader::new(File::open(path)?))?)
}

/// Sibling log path: `params.json` -> `params.log.jsonl`.
fn default_log_path(out: &Path) -> PathBuf {
    out.with_extension("log.jsonl")
}

fn write_jsonl<T: Serialize>(path: &Path, entries: &[T]) -> CliResult {
    let mut writer = BufWriter::new(File::create(path)?);
    for entry in entries {
        serde_json::to_writer(&mut writer, entry).map_err(Error::from)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Machine output goes to stdout as pretty JSON with a trailing newline.
fn print_json<T: Serialize>(value: &T) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    println!("{text}");
    Ok(())
}

fn write_json_file<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let mut writer = BufWriter::new(File::create(path)?);
    let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    writer.write_all(text.as_bytes())?;
    writer.write_all(b"\n")?;
    writer.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn cmd_ingest(input: &Path, out: Option<PathBuf>, config: &Config) -> CliResult {
    let out = out.unwrap_or_else(|| config.paths.kb.clone());
    let reader = BufReader::new(File::open(input)?);
    let kb = ackb::ingest(reader, &config.embedder.spec())?;
    ackb::save_kb(&kb, &out)?;
    eprintln!("ingested {} records -> {}", kb.len(), out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_train_retrieval(
    kb: Option<PathBuf>,
    out: &Path,
    log: Option<PathBuf>,
    steps: Option<usize>,
    lr: Option<f64>,
    batch: Option<usize>,
    seed: Option<u64>,
    config: &Config,
) -> CliResult {
    let kb = load_kb(&kb_path(kb, config))?;
    let mut train = config.rl_train_config();
    if let Some(steps) = steps {
        train.steps = steps;
    }
    if let Some(lr) = lr {
        train.learning_rate = lr;
    }
    if let Some(batch) = batch {
        train.batch = batch;
    }
    if let Some(seed) = seed {
        train.rng_seed = seed;
    }
    let llm = config.llm.client()?;
    let outcome = policy::train_retrieval(&kb, &train, llm.as_ref())?;
    scgat::save_params(&outcome.params, BufWriter::new(File::create(out)?))?;
    let log_path = log.unwrap_or_else(|| default_log_path(out));
    write_jsonl(&log_path, &outcome.log)?;
    eprintln!(
        "trained {} steps ({} episodes skipped) -> {} (log {})",
        train.steps,
        outcome.skipped_episodes,
        out.display(),
        log_path.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_retrieve(
    kb: Option<PathBuf>,
    params: Option<PathBuf>,
    query: &str,
    k: Option<usize>,
    strategy: Strategy,
    rng_seed: u64,
    format: Format,
    config: &Config,
) -> CliResult {
    let kb = load_kb(&kb_path(kb, config))?;
    let k = k.unwrap_or(config.retrieval.k);
    let result = match strategy {
        Strategy::Scgat => {
            let params = params.ok_or_else(|| {
                CliError::Usage("--strategy scgat requires --params".into())
            })?;
            scgat::retrieve(query, &kb, &load_params(&params)?, k)?
        }
        other => scgat::baseline_retrieve(other, query, &kb, k, rng_seed)?,
    };
    match format {
        Format::Json => print_json(&result)?,
        Format::Table => print_retrieval_table(&result),
    }
    Ok(())
}

fn print_retrieval_table(result: &RetrievalResult) {
    println!("strategy: {}", result.strategy);
    println!("{:<20} {:>12}", "id", "weight");
    for item in &result.items {
        println!("{:<20} {:>12.6}", item.id, item.weight);
    }
}

fn cmd_compose(
    kb: Option<PathBuf>,
    params: Option<PathBuf>,
    query: &str,
    k: Option<usize>,
    format: Format,
    config: &Config,
) -> CliResult {
    let kb = load_kb(&kb_path(kb, config))?;
    let k = k.unwrap_or(config.retrieval.k);
    let params = match params {
        Some(path) => load_params(&path)?,
        None => {
            let d = kb
                .records
                .first()
                .map(|r| r.embedding.dim())
                .ok_or(Error::EmptyCorpus)?;
            AttentionParams::identity(d)
        }
    };
    let result = scgat::retrieve(query, &kb, &params, k)?;
    let references: Vec<_> = result
        .ids()
        .into_iter()
        .map(|id| kb.get(id).expect("retrieval returns known ids"))
        .collect();
    let llm = config.llm.client()?;
    let composition = compose_script(query, &references, llm.as_ref())?;
    match format {
        Format::Json => print_json(&composition_json(&composition, &result))?,
        Format::Table => {
            println!("# Script\n{}\n", composition.script.raw);
            println!("# Prompt\n{}", render_prompt(&composition.bundle));
            if composition.llm_fallback {
                println!("\n(external adapter failed; deterministic fallback used)");
            }
        }
    }
    Ok(())
}

fn composition_json(composition: &Composition, retrieval: &RetrievalResult) -> serde_json::Value {
    serde_json::json!({
        "script": composition.script.raw,
        "components": composition.script.structured,
        "bundle": composition.bundle,
        "retrieval": retrieval,
        "llm_fallback": composition.llm_fallback,
    })
}

#[derive(Serialize)]
struct LossLogEntry {
    step: usize,
    loss: f64,
}

#[allow(clippy::too_many_arguments)]
fn cmd_train_motion(
    reference: &Path,
    out: &Path,
    log: Option<PathBuf>,
    base: BaseArg,
    steps: Option<usize>,
    lr: Option<f64>,
    rank: Option<usize>,
    scale: Option<f64>,
    t_samples: Option<usize>,
    seed: Option<u64>,
    config: &Config,
) -> CliResult {
    let reference = load_trajectory(reference)?;
    let mut train: MdTrainConfig = config.motion.train_config();
    if let Some(steps) = steps {
        train.steps = steps;
    }
    if let Some(lr) = lr {
        train.learning_rate = lr;
    }
    if let Some(t_samples) = t_samples {
        train.t_samples = t_samples;
    }
    if let Some(seed) = seed {
        train.rng_seed = seed;
    }
    let rank = rank.unwrap_or(config.motion.rank);
    let scale = scale.unwrap_or(config.motion.scale);
    let d_lat = reference.dim();
    let model = match base {
        BaseArg::Zero => VelocityModel::zero_base(d_lat, rank, scale, train.rng_seed),
        BaseArg::Seeded => VelocityModel::seeded_base(d_lat, rank, scale, train.rng_seed),
    };
    let report = motion::train_mr_lora(&reference, &model, &train)?;
    motion::save_model(&report.model, BufWriter::new(File::create(out)?))?;
    let log_path = log.unwrap_or_else(|| default_log_path(out));
    let entries: Vec<LossLogEntry> = report
        .losses
        .iter()
        .enumerate()
        .map(|(i, &loss)| LossLogEntry { step: i + 1, loss })
        .collect();
    write_jsonl(&log_path, &entries)?;
    eprintln!(
        "trained {} steps, loss {:.6} -> {:.6} -> {} (log {})",
        train.steps,
        report.losses.first().copied().unwrap_or(f64::NAN),
        report.losses.last().copied().unwrap_or(f64::NAN),
        out.display(),
        log_path.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_generate(
    model: &Path,
    mode: ModeArg,
    reference: Option<PathBuf>,
    seed: u64,
    frames: Option<usize>,
    euler_steps: Option<usize>,
    out: &Path,
    config: &Config,
) -> CliResult {
    let mode = match mode {
        ModeArg::Noise => GenerateMode::FromNoise,
        ModeArg::Rfi => GenerateMode::FromInversion,
    };
    if matches!(mode, GenerateMode::FromInversion) && reference.is_none() {
        return Err(CliError::Usage("--mode rfi requires --reference".into()));
    }
    let model = motion::load_model(BufReader::new(File::open(model)?))?;
    let reference = reference.map(|path| load_trajectory(&path)).transpose()?;
    let n_frames = frames
        .or_else(|| reference.as_ref().map(|r| r.n_frames()))
        .unwrap_or(config.motion.n);
    let steps = euler_steps.unwrap_or(config.motion.euler_steps);
    let traj = motion::generate(&model, mode, reference.as_ref(), n_frames, steps, seed)?;
    motion::save_trajectory(&traj, BufWriter::new(File::create(out)?))?;
    eprintln!(
        "generated {} frames x {} dims -> {}",
        traj.n_frames(),
        traj.dim(),
        out.display()
    );
    Ok(())
}

fn cmd_evaluate(
    traj_paths: &[PathBuf],
    script: &str,
    out: Option<PathBuf>,
    projection_seed: u64,
    format: Format,
    config: &Config,
) -> CliResult {
    let mut named = Vec::with_capacity(traj_paths.len());
    for path in traj_paths {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        named.push((name, load_trajectory(path)?));
    }
    let report = evaluate_trajectories(&named, script, &config.embedder.spec(), projection_seed)?;
    if let Some(out) = out {
        write_json_file(&out, &report)?;
    }
    match format {
        Format::Json => print_json(&report)?,
        Format::Table => print_eval_table(&report),
    }
    Ok(())
}

fn print_eval_table(report: &EvaluationReport) {
    print!("{:<16}", "trajectory");
    for label in METRIC_LABELS {
        print!(" {label:>20}");
    }
    if report.min_max_scores.is_some() {
        print!(" {:>10}", "min-max");
    }
    println!();
    for (i, t) in report.trajectories.iter().enumerate() {
        print!("{:<16}", t.name);
        for value in t.values() {
            print!(" {value:>20.4}");
        }
        if let Some(scores) = &report.min_max_scores {
            print!(" {:>10.2}", scores[i]);
        }
        println!();
    }
    for warning in &report.warnings {
        println!("warning: {warning}");
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    seed: u64,
    corpus_size: usize,
    dim: usize,
    k: usize,
    steps: usize,
    lr: f64,
    out: Option<PathBuf>,
    format: Format,
) -> CliResult {
    let train = TrainConfig {
        steps,
        learning_rate: lr,
        rng_seed: seed,
        k,
        ..TrainConfig::default()
    };
    let report = bench_sweep(seed, corpus_size, dim, k, &train)?;
    if let Some(out) = out {
        write_json_file(&out, &report)?;
    }
    match format {
        Format::Json => print_json(&report)?,
        Format::Table => print_bench_table(&report),
    }
    Ok(())
}

fn print_bench_table(report: &BenchReport) {
    println!(
        "benchmark seed={} corpus={} dim={} k={}",
        report.seed, report.corpus_size, report.dim, report.k
    );
    println!(
        "training: {} steps @ lr {} | mean reward {:.4} -> {:.4}",
        report.train_steps,
        report.train_learning_rate,
        report.train_initial_mean_reward,
        report.train_final_mean_reward
    );
    println!("{:<10} {:>12}", "strategy", "mean reward");
    for entry in &report.strategies {
        println!("{:<10} {:>12.4}", entry.strategy.name(), entry.mean_reward);
    }
}

#[derive(Serialize)]
struct AggregateRow {
    method: String,
    raw: Vec<f64>,
    score: f64,
}

#[derive(Serialize)]
struct AggregateReport {
    metrics: Vec<&'static str>,
    rows: Vec<AggregateRow>,
    warnings: Vec<String>,
}

fn cmd_table2(raw: Option<PathBuf>, format: Format) -> CliResult {
    let (methods, rows) = match raw {
        Some(path) => parse_metric_csv(&path)?,
        None => {
            let (methods, rows) = table2_fixture();
            (methods.iter().map(|m| m.to_string()).collect(), rows)
        }
    };
    let outcome = minmax_aggregate(&rows)?;
    let report = AggregateReport {
        metrics: METRIC_LABELS.to_vec(),
        rows: methods
            .into_iter()
            .zip(rows)
            .zip(&outcome.scores)
            .map(|((method, raw), &score)| AggregateRow { method, raw, score })
            .collect(),
        warnings: outcome.warnings,
    };
    match format {
        Format::Json => print_json(&report)?,
        Format::Table => {
            print!("{:<16}", "method");
            for label in &report.metrics {
                print!(" {label:>20}");
            }
            println!(" {:>10}", "min-max");
            for row in &report.rows {
                print!("{:<16}", row.method);
                for value in &row.raw {
                    print!(" {value:>20.2}");
                }
                println!(" {:>10.2}", row.score);
            }
            for warning in &report.warnings {
                println!("warning: {warning}");
            }
        }
    }
    Ok(())
}

/// Parses `method,<4 metric columns>` CSV; a header line whose second field
/// is not numeric is skipped. No quoting — method names must be comma-free.
fn parse_metric_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut methods = Vec::new();
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != METRIC_LABELS.len() + 1 {
            return Err(Error::Metric(format!(
                "line {}: expected {} comma-separated fields, got {}",
                idx + 1,
                METRIC_LABELS.len() + 1,
                fields.len()
            ))
            .into());
        }
        if idx == 0 && fields[1].parse::<f64>().is_err() {
            continue;
        }
        let mut row = Vec::with_capacity(METRIC_LABELS.len());
        for field in &fields[1..] {
            row.push(field.parse::<f64>().map_err(|_| {
                Error::Metric(format!("line {}: non-numeric value {field:?}", idx + 1))
            })?);
        }
        methods.push(fields[0].to_string());
        rows.push(row);
    }
    Ok((methods, rows))
}
