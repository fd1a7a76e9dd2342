//! Command-line front end. The binary only calls [`main`].
//!
//! Exit codes: 0 success, 1 a requested check failed, 2 usage or I/O error.

use crate::error::Error;
use crate::eval::{evaluate, Prediction};
use crate::model::{GrpoConfig, RewardBreakdown, RewardScheme, Source, TrainingInstance};
use crate::pipeline::ingest_jsonl;
use crate::reward::{score_batch, ScoreItem};
use crate::service::{self, ServiceConfig, DEFAULT_ADDR, DEFAULT_MAX_BATCH};
use crate::sim::{default_tasks, read_tasks, run_simulation};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(
    name = "toolreward",
    version,
    about = "Rule-based rewards and GRPO tooling for tool-calling models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceArg {
    Xlam,
    Toolace,
    /// Detect the shape of each line.
    Auto,
}

impl SourceArg {
    fn source(self) -> Option<Source> {
        match self {
            SourceArg::Xlam => Some(Source::XlamLike),
            SourceArg::Toolace => Some(Source::ToolaceLike),
            SourceArg::Auto => None,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize a raw corpus into unified training instances.
    Convert {
        #[arg(long, value_enum)]
        source: SourceArg,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Score replies against unified instances.
    Score {
        #[arg(long)]
        instances: PathBuf,
        #[arg(long)]
        replies: PathBuf,
        #[arg(long, default_value = "binary_with_format")]
        scheme: RewardScheme,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-category accuracy of a prediction file.
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, default_value = "binary_with_format")]
        scheme: RewardScheme,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the toy GRPO loop and write its trace.
    Simulate {
        /// Task file (JSONL); the bundled five-task fixture when omitted.
        #[arg(long)]
        tasks: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        steps: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        lr: f64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the trace as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Exit 1 unless every task converges.
        #[arg(long)]
        require_converged: bool,
    },
    /// Run the reward service until interrupted.
    Serve {
        #[arg(long, env = "TOOLREWARD_ADDR", default_value = DEFAULT_ADDR)]
        addr: String,
        #[arg(long, env = "TOOLREWARD_MAX_BATCH", default_value_t = DEFAULT_MAX_BATCH)]
        max_batch: usize,
        #[arg(long, env = "TOOLREWARD_SCHEME", default_value = "binary_with_format")]
        scheme: RewardScheme,
    },
}

#[derive(Debug)]
pub enum CliError {
    /// Usage or I/O problem; exit 2.
    Usage(String),
    /// A requested check did not hold; exit 1.
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Check(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Check(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn write_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Usage(format!("cannot write {}: {e}", path.display()))
}

fn write_jsonl<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> CliResult {
    let mut w = create(path)?;
    for row in rows {
        serde_json::to_writer(&mut w, &row).map_err(|e| CliError::Usage(e.to_string()))?;
        w.write_all(b"\n").map_err(write_err(path))?;
    }
    w.flush().map_err(write_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Usage(e.to_string()))?;
    w.write_all(b"\n").map_err(write_err(path))?;
    w.flush().map_err(write_err(path))
}

/// Read JSONL into `T`, skipping blank lines.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let mut out = Vec::new();
    for (n, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let row =
            serde_json::from_str(&line).map_err(|e| CliError::Usage(format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.push(row);
    }
    Ok(out)
}

/// One line of `score` output: the reply id plus the flattened breakdown.
#[derive(Debug, Serialize, serde::Deserialize, PartialEq)]
pub struct ScoreLine {
    pub id: String,
    #[serde(flatten)]
    pub breakdown: RewardBreakdown,
}

pub fn convert(source: SourceArg, input: &Path, out: &Path, report: &Path) -> CliResult {
    let (instances, rep) = ingest_jsonl(source.source(), open(input)?)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", input.display())))?;
    write_jsonl(out, &instances)?;
    write_json(report, &rep)?;
    log::info!(
        "convert: {} raw records, {} kept, {} instances",
        rep.total_raw(),
        rep.total_kept(),
        rep.total_instances()
    );
    Ok(())
}

pub fn score_files(instances: &Path, replies: &Path, scheme: RewardScheme) -> CliResult<Vec<ScoreLine>> {
    let gold: Vec<TrainingInstance> = read_jsonl(instances)?;
    let mut by_id = HashMap::with_capacity(gold.len());
    for inst in &gold {
        if by_id.insert(inst.id.as_str(), inst).is_some() {
            return Err(CliError::Usage(format!("duplicate instance id `{}`", inst.id)));
        }
    }
    let preds: Vec<Prediction> = read_jsonl(replies)?;
    let items = preds
        .iter()
        .map(|p| {
            by_id
                .get(p.id.as_str())
                .map(|inst| ScoreItem {
                    instance: inst,
                    reply: &p.reply,
                    scheme,
                })
                .ok_or_else(|| CliError::Usage(format!("reply id `{}` has no instance", p.id)))
        })
        .collect::<CliResult<Vec<_>>>()?;
    if items.is_empty() {
        return Ok(Vec::new());
    }
    let results = score_batch(&items)?;
    Ok(preds
        .into_iter()
        .zip(results)
        .map(|(p, breakdown)| ScoreLine { id: p.id, breakdown })
        .collect())
}

pub fn score(instances: &Path, replies: &Path, scheme: RewardScheme, out: &Path) -> CliResult {
    let lines = score_files(instances, replies, scheme)?;
    write_jsonl(out, &lines)
}

pub fn eval(gold: &Path, pred: &Path, scheme: RewardScheme, out: &Path) -> CliResult {
    let gold: Vec<TrainingInstance> = read_jsonl(gold)?;
    let preds: HashMap<String, String> = read_jsonl::<Prediction>(pred)?
        .into_iter()
        .map(|p| (p.id, p.reply))
        .collect();
    let report = evaluate(&gold, &preds, scheme)?;
    print!("{}", report.render_table());
    write_json(out, &report)
}

#[allow(clippy::too_many_arguments)]
pub fn simulate(
    tasks: Option<&Path>,
    steps: usize,
    seed: u64,
    lr: f64,
    out: &Path,
    csv: Option<&Path>,
    require_converged: bool,
) -> CliResult {
    let tasks = match tasks {
        Some(path) => read_tasks(open(path)?)?,
        None => default_tasks(),
    };
    let config = GrpoConfig {
        max_steps: steps,
        ..GrpoConfig::default()
    };
    let trace = run_simulation(&tasks, &config, lr, steps, seed)?;
    let mut w = create(out)?;
    trace.write_jsonl(&mut w)?;
    w.flush().map_err(write_err(out))?;
    if let Some(path) = csv {
        trace.write_csv(create(path)?)?;
    }
    let probs: Vec<String> = trace
        .final_win_prob
        .iter()
        .map(|(id, p)| format!("{id}={p:.4}"))
        .collect();
    match trace.converged_at {
        Some(step) => println!("converged after {step} steps; win_prob {}", probs.join(" ")),
        None => println!(
            "not converged after {} steps; win_prob {}",
            trace.len(),
            probs.join(" ")
        ),
    }
    if require_converged && trace.converged_at.is_none() {
        return Err(CliError::Check("simulation did not converge".into()));
    }
    Ok(())
}

pub fn serve(addr: &str, max_batch: usize, scheme: RewardScheme) -> CliResult {
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Usage(e.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| CliError::Usage(format!("cannot bind {addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| CliError::Usage(e.to_string()))?;
        log::info!("listening on {local}");
        let config = ServiceConfig {
            max_batch,
            default_scheme: scheme,
        };
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        service::serve(listener, config, shutdown)
            .await
            .map_err(|e| CliError::Usage(e.to_string()))
    })
}

pub fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Convert {
            source,
            input,
            out,
            report,
        } => convert(source, &input, &out, &report),
        Command::Score {
            instances,
            replies,
            scheme,
            out,
        } => score(&instances, &replies, scheme, &out),
        Command::Eval {
            gold,
            pred,
            scheme,
            out,
        } => eval(&gold, &pred, scheme, &out),
        Command::Simulate {
            tasks,
            steps,
            seed,
            lr,
            out,
            csv,
            require_converged,
        } => simulate(
            tasks.as_deref(),
            steps,
            seed,
            lr,
            &out,
            csv.as_deref(),
            require_converged,
        ),
        Command::Serve {
            addr,
            max_batch,
            scheme,
        } => serve(&addr, max_batch, scheme),
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
