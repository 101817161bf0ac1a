//! `hhsparse`: generate R-MAT workloads, benchmark the hierarchical
//! accumulator, and run multi-process scaling jobs.
//!
//! Every command is deterministic in its non-timing outputs given fixed
//! seeds. Benchmark commands emit CSV (header row, comma separators, `.`
//! decimal point) to stdout or `--out`; `report` turns those CSVs into
//! plot-ready two-column data files.
//!
//! Exit codes: 0 success, 1 verification or job failure, 2 usage error,
//! 3 I/O error.

use std::fmt::Display;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use hhsparse::bench::{
    self, run_ingest, run_sweep, run_vertical, BenchConfig, BenchError, Mode, SweepEntry,
    SweepPlan, ThroughputSample, WorkloadSpec,
};
use hhsparse::cluster::{
    collect, launch, run_worker, write_config_file, ClusterError, JobReport, JobSpec, WorkerArgs,
    WorkerCommand, WorkerOutcome, WorkerStatus,
};
use hhsparse::streamgen::{rmat_generate, write_edge_file, write_tsv, RmatParams, StreamError};
use hhsparse::{CutSchedule, ScheduleError};

#[derive(Parser)]
#[command(name = "hhsparse", version, about = "Hierarchical hypersparse matrix benchmark suite")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic R-MAT edge file
    Gen(GenArgs),
    /// Time batched ingest on one process
    Bench(BenchArgs),
    /// Sweep cut-schedule parameters over one workload
    Sweep(SweepArgs),
    /// Vertical scaling: the same workload over increasing worker counts
    Scale(ScaleArgs),
    /// Multi-process job: launch workers, shard the stream, aggregate results
    Cluster(ClusterArgs),
    /// Worker-process entry point (normally invoked by `cluster`)
    Worker(WorkerCliArgs),
    /// Project benchmark CSVs into plot-ready data files
    Report(ReportArgs),
}

/// Errors ranked by exit code: verification/job failures (1), bad flags or
/// parameters (2), and I/O problems (3).
enum CliError {
    Failed(String),
    Usage(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Failed(_) => ExitCode::from(1),
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Io(_) => ExitCode::from(3),
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Failed(m) | CliError::Usage(m) | CliError::Io(m) => m,
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<StreamError> for CliError {
    fn from(e: StreamError) -> Self {
        match e {
            StreamError::Io(_)
            | StreamError::BadMagic { .. }
            | StreamError::BadVersion { .. }
            | StreamError::Truncated { .. } => CliError::Io(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<ScheduleError> for CliError {
    fn from(e: ScheduleError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::InvalidConfig { .. } | BenchError::WorkloadTooShort { .. } => {
                CliError::Usage(e.to_string())
            }
            BenchError::Stream(inner) => inner.into(),
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<ClusterError> for CliError {
    fn from(e: ClusterError) -> Self {
        match e {
            ClusterError::InvalidJob { .. } | ClusterError::Config { .. } => {
                CliError::Usage(e.to_string())
            }
            ClusterError::Bench(inner) => inner.into(),
            other => CliError::Io(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

fn run(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::Gen(args) => cmd_gen(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Scale(args) => cmd_scale(args),
        Command::Cluster(args) => cmd_cluster(args),
        Command::Worker(args) => cmd_worker(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn parse_list<T: FromStr>(spec: &str, what: &str) -> Result<Vec<T>, CliError>
where
    T::Err: Display,
{
    spec.split(',')
        .map(|part| {
            part.trim()
                .parse::<T>()
                .map_err(|e| CliError::Usage(format!("{what}: {e}")))
        })
        .collect()
}

fn parse_fixed<const N: usize>(spec: &str, what: &str) -> Result<[u64; N], CliError> {
    let parts: Vec<u64> = parse_list(spec, what)?;
    parts.try_into().map_err(|v: Vec<u64>| {
        CliError::Usage(format!(
            "{what}: expected {N} comma-separated values, got {}",
            v.len()
        ))
    })
}

fn parse_probs(spec: &str) -> Result<[f64; 4], CliError> {
    let parts: Vec<f64> = parse_list(spec, "--probs")?;
    parts.try_into().map_err(|v: Vec<f64>| {
        CliError::Usage(format!("--probs: expected 4 values, got {}", v.len()))
    })
}

/// Workload selection shared by the benchmark-style commands.
#[derive(Args)]
struct WorkloadArgs {
    /// Pre-generated edge file
    #[arg(long = "in", value_name = "PATH", conflicts_with = "rmat")]
    input: Option<PathBuf>,
    /// Generate in memory: scale,edges,seed
    #[arg(long, value_name = "S,E,K")]
    rmat: Option<String>,
    /// Quadrant probabilities for --rmat (default Graph500)
    #[arg(long, value_name = "A,B,C,D", requires = "rmat")]
    probs: Option<String>,
    /// Edges to ingest (default: the workload's full length)
    #[arg(long)]
    edges: Option<u64>,
}

impl WorkloadArgs {
    fn is_empty(&self) -> bool {
        self.input.is_none() && self.rmat.is_none()
    }

    fn to_spec(&self) -> Result<WorkloadSpec, CliError> {
        match (&self.input, &self.rmat) {
            (Some(path), None) => Ok(WorkloadSpec::File(path.clone())),
            (None, Some(rmat)) => {
                let [scale, edges, seed] = parse_fixed::<3>(rmat, "--rmat")?;
                let scale = u32::try_from(scale)
                    .map_err(|_| CliError::Usage(format!("--rmat: scale {scale} out of range")))?;
                let mut params = RmatParams::new(scale, edges, seed);
                if let Some(probs) = &self.probs {
                    params = params.with_probs(parse_probs(probs)?);
                }
                params.validate()?;
                Ok(WorkloadSpec::Rmat(params))
            }
            (None, None) => Err(CliError::Usage(
                "a workload is required: --in PATH or --rmat S,E,K".to_string(),
            )),
            (Some(_), Some(_)) => Err(CliError::Usage(
                "--in and --rmat are mutually exclusive".to_string(),
            )),
        }
    }

    fn total_edges(&self, spec: &WorkloadSpec) -> Result<u64, CliError> {
        match self.edges {
            Some(edges) => Ok(edges),
            None => Ok(spec.available_edges()?),
        }
    }
}

/// Cut-schedule selection shared by the benchmark-style commands.
#[derive(Args)]
struct ScheduleArgs {
    /// Geometric schedule base,ratio,kmin,kmax
    #[arg(long, value_name = "B,R,KMIN,KMAX", conflicts_with = "cut_list")]
    cuts: Option<String>,
    /// Explicit thresholds c1,c2,...
    #[arg(long = "cut-list", value_name = "C1,C2,...")]
    cut_list: Option<String>,
}

impl ScheduleArgs {
    fn to_schedule(&self) -> Result<CutSchedule, CliError> {
        match (&self.cuts, &self.cut_list) {
            (Some(cuts), None) => {
                let [base, ratio, kmin, kmax] = parse_fixed::<4>(cuts, "--cuts")?;
                let kmin = u32::try_from(kmin)
                    .map_err(|_| CliError::Usage(format!("--cuts: kmin {kmin} out of range")))?;
                let kmax = u32::try_from(kmax)
                    .map_err(|_| CliError::Usage(format!("--cuts: kmax {kmax} out of range")))?;
                Ok(CutSchedule::from_ratio(base, ratio, kmin, kmax)?)
            }
            (None, Some(list)) => Ok(CutSchedule::new(parse_list(list, "--cut-list")?)?),
            (None, None) => Ok(bench::desk_schedule()),
            (Some(_), Some(_)) => Err(CliError::Usage(
                "--cuts and --cut-list are mutually exclusive".to_string(),
            )),
        }
    }
}

#[derive(Args)]
struct GenArgs {
    /// Matrix dimension exponent: edges fall in a 2^S x 2^S matrix
    #[arg(long)]
    scale: u32,
    /// Number of edges to generate
    #[arg(long)]
    edges: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Quadrant probabilities (default Graph500 0.57,0.19,0.19,0.05)
    #[arg(long, value_name = "A,B,C,D")]
    probs: Option<String>,
    /// Output edge file
    #[arg(long)]
    out: PathBuf,
    /// Also write <out>.tsv with row<TAB>col<TAB>val lines
    #[arg(long)]
    tsv: bool,
}

fn cmd_gen(args: GenArgs) -> Result<ExitCode, CliError> {
    let mut params = RmatParams::new(args.scale, args.edges, args.seed);
    if let Some(probs) = &args.probs {
        params = params.with_probs(parse_probs(probs)?);
    }
    params.validate()?;

    write_edge_file(&args.out, params.scale, params.num_edges, rmat_generate(&params)?)?;
    if args.tsv {
        let mut tsv_path = args.out.clone().into_os_string();
        tsv_path.push(".tsv");
        write_tsv(Path::new(&tsv_path), rmat_generate(&params)?)?;
    }
    eprintln!("wrote {} edges to {}", params.num_edges, args.out.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    workload: WorkloadArgs,
    #[command(flatten)]
    schedule: ScheduleArgs,
    /// Updates per batch
    #[arg(long, default_value_t = bench::DESK_BATCH_SIZE)]
    batch: u64,
    #[arg(long, default_value = "hier")]
    mode: String,
    /// Shared-nothing shards within this process
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 3)]
    trials: u32,
    /// Batches ingested and discarded before the first timed trial
    #[arg(long, default_value_t = 0)]
    warmup: u32,
    /// Compare the final flush against a brute-force oracle
    #[arg(long)]
    verify: bool,
    /// Write CSV here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

impl BenchArgs {
    fn to_config(&self) -> Result<BenchConfig, CliError> {
        let workload = self.workload.to_spec()?;
        let total_edges = self.workload.total_edges(&workload)?;
        let mode = Mode::from_str(&self.mode).map_err(CliError::Usage)?;
        let config = BenchConfig {
            workload,
            batch_size: self.batch,
            total_edges,
            schedule: self.schedule.to_schedule()?,
            mode,
            num_workers: self.workers,
            trial_count: self.trials,
            warmup_batches: self.warmup,
            verify: self.verify,
        };
        config.validate()?;
        Ok(config)
    }
}

/// One CSV line per timed trial plus a `median` line.
#[derive(Serialize, Deserialize, PartialEq, Debug)]
struct BenchRow {
    trial: String,
    mode: String,
    workers: usize,
    batch: u64,
    edges: u64,
    wall_seconds: f64,
    rate: f64,
    flush_seconds: f64,
    /// Per-layer cascade totals joined with `;` (empty in flat mode).
    cascades: String,
}

fn join_counts(counts: &[u64]) -> String {
    counts
        .iter()
        .map(u64::to_string)
        .collect::<Vec<_>>()
        .join(";")
}

fn bench_row(label: &str, s: &ThroughputSample) -> BenchRow {
    BenchRow {
        trial: label.to_string(),
        mode: s.mode.to_string(),
        workers: s.num_workers,
        batch: s.batch_size,
        edges: s.edges_ingested,
        wall_seconds: s.wall_seconds,
        rate: s.updates_per_second,
        flush_seconds: s.flush_seconds,
        cascades: join_counts(&s.cascade_counts),
    }
}

fn emit_rows<R: Serialize>(out: &Option<PathBuf>, rows: &[R]) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let mut writer = csv::Writer::from_path(path)?;
            for row in rows {
                writer.serialize(row)?;
            }
            writer.flush()?;
        }
        None => {
            let stdout = io::stdout().lock();
            let mut writer = csv::Writer::from_writer(stdout);
            for row in rows {
                writer.serialize(row)?;
            }
            writer.flush()?;
        }
    }
    Ok(())
}

fn verified_cell(verified: Option<bool>) -> String {
    match verified {
        None => String::new(),
        Some(v) => v.to_string(),
    }
}

fn cmd_bench(args: BenchArgs) -> Result<ExitCode, CliError> {
    let config = args.to_config()?;
    let report = run_ingest(&config)?;

    let mut rows: Vec<BenchRow> = report
        .trials
        .iter()
        .enumerate()
        .map(|(i, t)| bench_row(&i.to_string(), t))
        .collect();
    rows.push(bench_row("median", &report.median));
    emit_rows(&args.out, &rows)?;

    eprintln!(
        "median {:.0} updates/s over {} edges ({} mode, {} workers)",
        report.median.updates_per_second,
        report.median.edges_ingested,
        report.median.mode,
        report.median.num_workers
    );
    if report.verified == Some(false) {
        eprintln!("verification failed: flush does not match the oracle");
        return Ok(ExitCode::from(1));
    }
    if report.verified == Some(true) {
        eprintln!("verification passed");
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    workload: WorkloadArgs,
    /// Schedule bases to sweep
    #[arg(long, default_value = "8192", value_name = "B1,B2,...")]
    bases: String,
    /// Schedule ratios to sweep
    #[arg(long, default_value = "2,3,4,5,6,7,8", value_name = "R1,R2,...")]
    ratios: String,
    /// Cut counts to sweep (exponents kmin..kmin+n-1)
    #[arg(long = "cut-counts", default_value = "4", value_name = "N1,N2,...")]
    cut_counts: String,
    /// Lowest exponent of each swept schedule
    #[arg(long, default_value_t = bench::DESK_KMIN)]
    kmin: u32,
    #[arg(long, default_value_t = bench::DESK_BATCH_SIZE)]
    batch: u64,
    #[arg(long, default_value_t = 3)]
    trials: u32,
    #[arg(long, default_value_t = 0)]
    warmup: u32,
    #[arg(long)]
    verify: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize, Deserialize, PartialEq, Debug)]
struct SweepRow {
    base: u64,
    ratio: u64,
    ncuts: u32,
    rate: f64,
    edges: u64,
    wall_seconds: f64,
    flush_seconds: f64,
    verified: String,
    /// `ok`, or the diagnostic for a skipped combination.
    status: String,
}

fn sweep_row(entry: &SweepEntry) -> SweepRow {
    match &entry.outcome {
        Ok(report) => SweepRow {
            base: entry.base,
            ratio: entry.ratio,
            ncuts: entry.cut_count,
            rate: report.median.updates_per_second,
            edges: report.median.edges_ingested,
            wall_seconds: report.median.wall_seconds,
            flush_seconds: report.median.flush_seconds,
            verified: verified_cell(report.verified),
            status: "ok".to_string(),
        },
        Err(diagnostic) => SweepRow {
            base: entry.base,
            ratio: entry.ratio,
            ncuts: entry.cut_count,
            rate: 0.0,
            edges: 0,
            wall_seconds: 0.0,
            flush_seconds: 0.0,
            verified: String::new(),
            status: diagnostic.clone(),
        },
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode, CliError> {
    let workload = args.workload.to_spec()?;
    let total_edges = args.workload.total_edges(&workload)?;
    let plan = SweepPlan {
        workload,
        bases: parse_list(&args.bases, "--bases")?,
        ratios: parse_list(&args.ratios, "--ratios")?,
        cut_counts: parse_list(&args.cut_counts, "--cut-counts")?,
        kmin: args.kmin,
        batch_size: args.batch,
        total_edges,
        trial_count: args.trials,
        warmup_batches: args.warmup,
        verify: args.verify,
    };
    let entries = run_sweep(&plan)?;
    let rows: Vec<SweepRow> = entries.iter().map(sweep_row).collect();
    emit_rows(&args.out, &rows)?;

    let failed_verify = entries.iter().any(|e| {
        matches!(&e.outcome, Ok(report) if report.verified == Some(false))
    });
    if failed_verify {
        eprintln!("verification failed for at least one combination");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Args)]
struct ScaleArgs {
    #[command(flatten)]
    workload: WorkloadArgs,
    #[command(flatten)]
    schedule: ScheduleArgs,
    /// Worker counts to run, in order
    #[arg(long, default_value = "1,2,4", value_name = "W1,W2,...")]
    workers: String,
    #[arg(long, default_value_t = bench::DESK_BATCH_SIZE)]
    batch: u64,
    #[arg(long, default_value_t = 3)]
    trials: u32,
    #[arg(long, default_value_t = 0)]
    warmup: u32,
    #[arg(long)]
    verify: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize, Deserialize, PartialEq, Debug)]
struct ScaleRow {
    workers: usize,
    rate: f64,
    edges: u64,
    wall_seconds: f64,
    flush_seconds: f64,
    verified: String,
}

fn cmd_scale(args: ScaleArgs) -> Result<ExitCode, CliError> {
    let worker_counts: Vec<usize> = parse_list(&args.workers, "--workers")?;
    if worker_counts.is_empty() || worker_counts.contains(&0) {
        return Err(CliError::Usage(
            "--workers: counts must be >= 1".to_string(),
        ));
    }
    let workload = args.workload.to_spec()?;
    let total_edges = args.workload.total_edges(&workload)?;
    let config = BenchConfig {
        workload,
        batch_size: args.batch,
        total_edges,
        schedule: args.schedule.to_schedule()?,
        mode: Mode::Hier,
        num_workers: 1,
        trial_count: args.trials,
        warmup_batches: args.warmup,
        verify: args.verify,
    };
    config.validate()?;

    let reports = run_vertical(&worker_counts, &config)?;
    let rows: Vec<ScaleRow> = reports
        .iter()
        .map(|r| ScaleRow {
            workers: r.median.num_workers,
            rate: r.median.updates_per_second,
            edges: r.median.edges_ingested,
            wall_seconds: r.median.wall_seconds,
            flush_seconds: r.median.flush_seconds,
            verified: verified_cell(r.verified),
        })
        .collect();
    emit_rows(&args.out, &rows)?;

    if reports.iter().any(|r| r.verified == Some(false)) {
        eprintln!("verification failed for at least one worker count");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Args)]
struct ClusterArgs {
    /// Worker processes to launch
    #[arg(long, default_value_t = 4)]
    processes: usize,
    /// Existing job config file; otherwise one is written from the flags
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    workload: WorkloadArgs,
    #[command(flatten)]
    schedule: ScheduleArgs,
    #[arg(long, default_value_t = bench::DESK_BATCH_SIZE)]
    batch: u64,
    /// Ingest threads per worker process
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    verify: bool,
    /// Directory for the per-worker result files
    #[arg(long = "result-dir")]
    result_dir: PathBuf,
    #[arg(long = "job-id", default_value = "job")]
    job_id: String,
    #[arg(long = "poll-ms", default_value_t = 50)]
    poll_ms: u64,
    #[arg(long = "timeout-secs", default_value_t = 300)]
    timeout_secs: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Cluster CSV: one `summary` row, then one `worker` row per process.
/// Cells that do not apply to a row kind stay empty.
#[derive(Serialize, Deserialize, PartialEq, Debug)]
struct ClusterRow {
    kind: String,
    worker_index: Option<usize>,
    processes: Option<usize>,
    edges: Option<u64>,
    wall_seconds: Option<f64>,
    rate: Option<f64>,
    span_rate: Option<f64>,
    sum_rate: Option<f64>,
    status: String,
}

fn cluster_rows(report: &JobReport, processes: usize) -> Vec<ClusterRow> {
    let mut rows = vec![ClusterRow {
        kind: "summary".to_string(),
        worker_index: None,
        processes: Some(processes),
        edges: Some(report.total_edges),
        wall_seconds: Some(report.span_seconds),
        rate: None,
        span_rate: Some(report.span_rate),
        sum_rate: Some(report.sum_rate),
        status: if report.complete { "complete" } else { "incomplete" }.to_string(),
    }];
    for outcome in &report.workers {
        let row = match outcome {
            WorkerOutcome::Ok(r) => ClusterRow {
                kind: "worker".to_string(),
                worker_index: Some(r.worker_index),
                processes: None,
                edges: Some(r.edges),
                wall_seconds: Some(r.wall_seconds),
                rate: Some(r.rate),
                span_rate: None,
                sum_rate: None,
                status: match &r.status {
                    WorkerStatus::Ok => "ok".to_string(),
                    WorkerStatus::Failed(reason) => format!("failed: {reason}"),
                },
            },
            WorkerOutcome::Missing { worker_index } => ClusterRow {
                kind: "worker".to_string(),
                worker_index: Some(*worker_index),
                processes: None,
                edges: None,
                wall_seconds: None,
                rate: None,
                span_rate: None,
                sum_rate: None,
                status: "missing".to_string(),
            },
            WorkerOutcome::Malformed { worker_index, reason } => ClusterRow {
                kind: "worker".to_string(),
                worker_index: Some(*worker_index),
                processes: None,
                edges: None,
                wall_seconds: None,
                rate: None,
                span_rate: None,
                sum_rate: None,
                status: format!("malformed: {reason}"),
            },
        };
        rows.push(row);
    }
    rows
}

fn cmd_cluster(args: ClusterArgs) -> Result<ExitCode, CliError> {
    let config_path = match &args.config {
        Some(path) => {
            if !args.workload.is_empty() {
                return Err(CliError::Usage(
                    "--config and workload flags are mutually exclusive".to_string(),
                ));
            }
            path.clone()
        }
        None => {
            let workload = args.workload.to_spec()?;
            let total_edges = args.workload.total_edges(&workload)?;
            let config = BenchConfig {
                workload,
                batch_size: args.batch,
                total_edges,
                schedule: args.schedule.to_schedule()?,
                mode: Mode::Hier,
                num_workers: args.workers,
                trial_count: 1,
                warmup_batches: 0,
                verify: args.verify,
            };
            config.validate()?;
            fs::create_dir_all(&args.result_dir)?;
            let path = args.result_dir.join(format!("{}.conf", args.job_id));
            write_config_file(&path, &config)?;
            path
        }
    };

    let job = JobSpec::from_config_file(
        &args.job_id,
        args.processes,
        config_path,
        args.result_dir.clone(),
        Duration::from_millis(args.poll_ms),
        Duration::from_secs(args.timeout_secs),
    )?;
    let worker = WorkerCommand {
        program: std::env::current_exe()?,
        prefix_args: vec!["worker".to_string()],
    };
    let mut handle = launch(&job, &worker)?;
    let timeout = job.timeout;
    let report = collect(&mut handle, timeout)?;

    emit_rows(&args.out, &cluster_rows(&report, args.processes))?;
    eprintln!(
        "{} processes: {} edges, span {:.0} updates/s, sum {:.0} updates/s",
        args.processes, report.total_edges, report.span_rate, report.sum_rate
    );
    if !report.complete {
        eprintln!("job incomplete: see per-worker status rows");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

/// The flags of the worker invocation contract. `cluster` passes exactly
/// these; keep names stable.
#[derive(Args)]
struct WorkerCliArgs {
    #[arg(long = "worker-index")]
    worker_index: usize,
    #[arg(long = "shard-start")]
    shard_start: u64,
    #[arg(long = "shard-end")]
    shard_end: u64,
    #[arg(long = "result-dir")]
    result_dir: PathBuf,
    #[arg(long)]
    config: PathBuf,
}

fn cmd_worker(args: WorkerCliArgs) -> Result<ExitCode, CliError> {
    let result = run_worker(&WorkerArgs {
        worker_index: args.worker_index,
        shard_start: args.shard_start,
        shard_end: args.shard_end,
        result_dir: args.result_dir,
        config_path: args.config,
    })?;
    match result.status {
        WorkerStatus::Ok => Ok(ExitCode::SUCCESS),
        WorkerStatus::Failed(reason) => {
            eprintln!("worker {} failed: {reason}", result.worker_index);
            Ok(ExitCode::from(1))
        }
    }
}

#[derive(Args)]
struct ReportArgs {
    /// Input CSVs, all of one schema
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Where the .dat files go
    #[arg(long = "out-dir", default_value = ".")]
    out_dir: PathBuf,
}

/// Which benchmark command produced a CSV, detected from its header.
enum ReportKind {
    Sweep,
    Scale,
    Cluster,
}

fn cmd_report(args: ReportArgs) -> Result<ExitCode, CliError> {
    let mut headers: Option<csv::StringRecord> = None;
    let mut records: Vec<csv::StringRecord> = Vec::new();
    for path in &args.inputs {
        let mut reader = csv::Reader::from_path(path)?;
        let file_headers = reader.headers()?.clone();
        match &headers {
            None => headers = Some(file_headers),
            Some(expected) => {
                if let Some(column) = first_header_mismatch(expected, &file_headers) {
                    return Err(CliError::Usage(format!(
                        "{}: schema mismatch at column `{column}`",
                        path.display()
                    )));
                }
            }
        }
        for record in reader.records() {
            records.push(record?);
        }
    }
    let headers = headers.expect("at least one input is required");

    let kind = if find_column(&headers, "ratio").is_some() {
        ReportKind::Sweep
    } else if find_column(&headers, "span_rate").is_some() {
        ReportKind::Cluster
    } else if find_column(&headers, "workers").is_some() {
        ReportKind::Scale
    } else {
        return Err(CliError::Usage(format!(
            "unrecognized CSV schema: {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    };

    fs::create_dir_all(&args.out_dir)?;
    let mut written = Vec::new();
    match kind {
        ReportKind::Sweep => {
            let ok_rows: Vec<&csv::StringRecord> = {
                let status = require_column(&headers, "status")?;
                records.iter().filter(|r| r.get(status) == Some("ok")).collect()
            };
            let pairs = project(&headers, &ok_rows, "ratio", "rate")?;
            written.push(write_dat(&args.out_dir, "fig2_top.dat", "ratio rate", pairs)?);
            let pairs = project(&headers, &ok_rows, "ncuts", "rate")?;
            written.push(write_dat(&args.out_dir, "fig2_bottom.dat", "ncuts rate", pairs)?);
        }
        ReportKind::Scale => {
            let all: Vec<&csv::StringRecord> = records.iter().collect();
            let pairs = project(&headers, &all, "workers", "rate")?;
            written.push(write_dat(&args.out_dir, "fig3.dat", "workers rate", pairs)?);
        }
        ReportKind::Cluster => {
            let kind_col = require_column(&headers, "kind")?;
            let summaries: Vec<&csv::StringRecord> = records
                .iter()
                .filter(|r| r.get(kind_col) == Some("summary"))
                .collect();
            let pairs = project(&headers, &summaries, "processes", "span_rate")?;
            written.push(write_dat(&args.out_dir, "fig5.dat", "processes span_rate", pairs)?);
        }
    }
    for path in written {
        eprintln!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn first_header_mismatch(expected: &csv::StringRecord, found: &csv::StringRecord) -> Option<String> {
    for i in 0..expected.len().max(found.len()) {
        let e = expected.get(i);
        let f = found.get(i);
        if e != f {
            return Some(f.or(e).unwrap_or_default().to_string());
        }
    }
    None
}

fn find_column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h == name)
}

fn require_column(headers: &csv::StringRecord, name: &str) -> Result<usize, CliError> {
    find_column(headers, name)
        .ok_or_else(|| CliError::Usage(format!("missing column `{name}`")))
}

fn project(
    headers: &csv::StringRecord,
    records: &[&csv::StringRecord],
    x: &str,
    y: &str,
) -> Result<Vec<(f64, f64)>, CliError> {
    let xi = require_column(headers, x)?;
    let yi = require_column(headers, y)?;
    let mut pairs = Vec::with_capacity(records.len());
    for record in records {
        let parse = |i: usize, name: &str| -> Result<f64, CliError> {
            record
                .get(i)
                .unwrap_or("")
                .parse()
                .map_err(|_| {
                    CliError::Usage(format!(
                        "column `{name}` holds non-numeric value `{}`",
                        record.get(i).unwrap_or("")
                    ))
                })
        };
        pairs.push((parse(xi, x)?, parse(yi, y)?));
    }
    Ok(pairs)
}

fn write_dat(
    dir: &Path,
    name: &str,
    columns: &str,
    mut pairs: Vec<(f64, f64)>,
) -> Result<PathBuf, CliError> {
    pairs.sort_by(|a, b| a.partial_cmp(b).expect("rates are finite"));
    let mut text = format!("# {columns}\n");
    for (x, y) in pairs {
        text.push_str(&format!("{x} {y}\n"));
    }
    let path = dir.join(name);
    fs::write(&path, text)?;
    Ok(path)
}
