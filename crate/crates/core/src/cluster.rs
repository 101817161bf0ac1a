//! Multi-process horizontal-scaling harness: spawns shared-nothing worker
//! processes, shards the workload contiguously by batch, and aggregates
//! results through asynchronous file-based messaging.
//!
//! The coordinator and workers share nothing but a result directory. Each
//! worker ingests its shard into a private accumulator, then writes exactly
//! one JSON result line to a temp name and renames it to `w<index>.result`;
//! the rename makes publication atomic, so the polling coordinator never
//! observes a partial file. Workers that die before the rename simply leave
//! no file and are reported missing after the timeout.
//!
//! Worker processes are invoked with the flags
//! `--worker-index N --shard-start S --shard-end E --result-dir D --config F`
//! where F is the job's key=value config file. Both sides of that contract
//! live here: [`launch`] emits the flags, [`run_worker`] is the callee's
//! implementation, and [`parse_config_file`] reads F.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::{self, BenchConfig, BenchError, Mode, WorkloadSpec};
use crate::hierarchy::CutSchedule;
use crate::streamgen::RmatParams;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("invalid job: {reason}")]
    InvalidJob { reason: String },
    #[error("failed to spawn worker {worker_index}: {source}")]
    Spawn {
        worker_index: usize,
        source: io::Error,
    },
    #[error("config file: {reason}")]
    Config { reason: String },
    #[error("result serialization: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Nanoseconds on a clock whose epoch is shared by every process on this
/// machine, so per-worker timestamps are directly comparable. Unix uses
/// CLOCK_MONOTONIC (boot epoch); elsewhere falls back to wall time.
#[cfg(unix)]
pub fn monotonic_ns() -> u64 {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    unsafe {
        libc::clock_gettime(libc::CLOCK_MONOTONIC, &mut ts);
    }
    ts.tv_sec as u64 * 1_000_000_000 + ts.tv_nsec as u64
}

#[cfg(not(unix))]
pub fn monotonic_ns() -> u64 {
    use std::time::{SystemTime, UNIX_EPOCH};
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos() as u64)
        .unwrap_or(0)
}

/// Name of worker `index`'s result file within the result directory.
pub fn result_file_name(worker_index: usize) -> String {
    format!("w{worker_index}.result")
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum WorkerStatus {
    Ok,
    Failed(String),
}

/// One worker's self-reported outcome, serialized as a single JSON line.
/// Field order is part of the file contract.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct WorkerResult {
    pub worker_index: usize,
    pub edges: u64,
    pub wall_seconds: f64,
    pub rate: f64,
    pub flush_seconds: f64,
    pub cascades: Vec<u64>,
    pub start_ns: u64,
    pub end_ns: u64,
    pub status: WorkerStatus,
}

/// Writes `result` into `result_dir` atomically: serialize to a temp name,
/// then rename. A reader polling the directory sees either nothing or the
/// complete file, never a partial write.
pub fn write_worker_result(result_dir: &Path, result: &WorkerResult) -> Result<PathBuf, ClusterError> {
    let final_path = result_dir.join(result_file_name(result.worker_index));
    let temp_path = result_dir.join(format!("w{}.tmp", result.worker_index));
    let mut line = serde_json::to_string(result)?;
    line.push('\n');
    fs::write(&temp_path, line)?;
    fs::rename(&temp_path, &final_path)?;
    Ok(final_path)
}

/// A multi-process job: every worker runs the benchmark parameters from one
/// shared config file against its own contiguous-by-batch shard.
#[derive(Clone, Debug)]
pub struct JobSpec {
    pub job_id: String,
    pub num_processes: usize,
    /// Per-process benchmark parameters, parsed from `config_path`.
    pub config: BenchConfig,
    /// The key=value file handed to every worker via `--config`.
    pub config_path: PathBuf,
    pub result_dir: PathBuf,
    pub poll_interval: Duration,
    pub timeout: Duration,
}

impl JobSpec {
    /// Builds a job spec by parsing the config file, keeping the coordinator
    /// and the workers on the same single source of truth.
    pub fn from_config_file(
        job_id: &str,
        num_processes: usize,
        config_path: PathBuf,
        result_dir: PathBuf,
        poll_interval: Duration,
        timeout: Duration,
    ) -> Result<Self, ClusterError> {
        if job_id.is_empty()
            || !job_id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        {
            return Err(ClusterError::InvalidJob {
                reason: format!("job id `{job_id}` is not filesystem-safe"),
            });
        }
        if num_processes == 0 {
            return Err(ClusterError::InvalidJob {
                reason: "num_processes must be >= 1".to_string(),
            });
        }
        let config = parse_config_file(&config_path)?;
        Ok(JobSpec {
            job_id: job_id.to_string(),
            num_processes,
            config,
            config_path,
            result_dir,
            poll_interval,
            timeout,
        })
    }
}

/// Splits `[0, total_edges)` into `num_processes` contiguous shards aligned
/// to batch boundaries, balanced to within one batch. Workers beyond the
/// batch count receive empty shards. The bounds partition the edge range:
/// no gap, no overlap.
pub fn shard_bounds(total_edges: u64, batch_size: u64, num_processes: usize) -> Vec<(u64, u64)> {
    assert!(batch_size >= 1, "batch_size must be >= 1");
    assert!(num_processes >= 1, "num_processes must be >= 1");
    let num_batches = total_edges.div_ceil(batch_size);
    let p = num_processes as u64;
    let per = num_batches / p;
    let extra = num_batches % p;
    let mut bounds = Vec::with_capacity(num_processes);
    let mut cursor = 0u64;
    for w in 0..p {
        let take = per + u64::from(w < extra);
        let start = (cursor.saturating_mul(batch_size)).min(total_edges);
        cursor += take;
        let end = (cursor.saturating_mul(batch_size)).min(total_edges);
        bounds.push((start, end));
    }
    bounds
}

/// How to invoke a worker process: the program plus any arguments that come
/// before the shard flags (e.g. a `worker` subcommand).
#[derive(Clone, Debug)]
pub struct WorkerCommand {
    pub program: PathBuf,
    pub prefix_args: Vec<String>,
}

/// Handle to a launched job: the spec plus the spawned children.
pub struct JobHandle {
    job: JobSpec,
    children: Vec<Child>,
}

impl JobHandle {
    pub fn job(&self) -> &JobSpec {
        &self.job
    }

    /// OS process ids, indexed by worker. For observation and fault injection.
    pub fn pids(&self) -> Vec<u32> {
        self.children.iter().map(Child::id).collect()
    }

    /// Forcibly terminates one worker (fault injection; the worker then
    /// never publishes a result).
    pub fn kill_worker(&mut self, worker_index: usize) -> io::Result<()> {
        self.children[worker_index].kill()
    }

    fn all_exited(&mut self) -> bool {
        self.children
            .iter_mut()
            .all(|c| matches!(c.try_wait(), Ok(Some(_))))
    }

    fn reap(&mut self) {
        for child in &mut self.children {
            let _ = child.wait();
        }
    }
}

impl Drop for JobHandle {
    fn drop(&mut self) {
        for child in &mut self.children {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Starts `num_processes` workers, each handed its index and shard bounds on
/// the command line, and returns immediately. Fails if the result directory
/// already holds result files for this job's worker indices (stale results
/// would corrupt collection).
pub fn launch(job: &JobSpec, worker: &WorkerCommand) -> Result<JobHandle, ClusterError> {
    if job.num_processes == 0 {
        return Err(ClusterError::InvalidJob {
            reason: "num_processes must be >= 1".to_string(),
        });
    }
    fs::create_dir_all(&job.result_dir)?;
    for index in 0..job.num_processes {
        if job.result_dir.join(result_file_name(index)).exists() {
            return Err(ClusterError::InvalidJob {
                reason: format!(
                    "result dir {} already contains {}",
                    job.result_dir.display(),
                    result_file_name(index)
                ),
            });
        }
    }

    let bounds = shard_bounds(job.config.total_edges, job.config.batch_size, job.num_processes);
    let mut children: Vec<Child> = Vec::with_capacity(job.num_processes);
    for (index, (start, end)) in bounds.iter().enumerate() {
        let spawned = Command::new(&worker.program)
            .args(&worker.prefix_args)
            .arg("--worker-index")
            .arg(index.to_string())
            .arg("--shard-start")
            .arg(start.to_string())
            .arg("--shard-end")
            .arg(end.to_string())
            .arg("--result-dir")
            .arg(&job.result_dir)
            .arg("--config")
            .arg(&job.config_path)
            .stdin(Stdio::null())
            .spawn();
        match spawned {
            Ok(child) => children.push(child),
            Err(source) => {
                for mut child in children {
                    let _ = child.kill();
                    let _ = child.wait();
                }
                return Err(ClusterError::Spawn {
                    worker_index: index,
                    source,
                });
            }
        }
    }
    Ok(JobHandle {
        job: job.clone(),
        children,
    })
}

/// What collection found for one worker slot.
#[derive(Clone, Debug, PartialEq)]
pub enum WorkerOutcome {
    Ok(WorkerResult),
    /// No result file appeared before the deadline.
    Missing { worker_index: usize },
    /// A file appeared but could not be parsed as a valid result.
    Malformed { worker_index: usize, reason: String },
}

impl WorkerOutcome {
    pub fn worker_index(&self) -> usize {
        match self {
            WorkerOutcome::Ok(r) => r.worker_index,
            WorkerOutcome::Missing { worker_index }
            | WorkerOutcome::Malformed { worker_index, .. } => *worker_index,
        }
    }
}

/// Aggregated job outcome. Rates cover only workers that reported ok:
/// `span_rate` is total edges over the span from the earliest start to the
/// latest end (the conservative headline), `sum_rate` adds the per-worker
/// rates.
#[derive(Clone, Debug, PartialEq)]
pub struct JobReport {
    pub workers: Vec<WorkerOutcome>,
    /// Edges ingested by ok workers.
    pub total_edges: u64,
    /// The job's configured total, for conservation checks.
    pub expected_edges: u64,
    pub span_seconds: f64,
    pub span_rate: f64,
    pub sum_rate: f64,
    /// True when every worker reported ok.
    pub complete: bool,
}

/// One non-blocking pass over the result directory. Pure function of the
/// directory contents, which is what makes collection idempotent.
pub fn read_report(
    result_dir: &Path,
    num_processes: usize,
    expected_edges: u64,
) -> Result<JobReport, ClusterError> {
    let mut workers = Vec::with_capacity(num_processes);
    for worker_index in 0..num_processes {
        let path = result_dir.join(result_file_name(worker_index));
        let outcome = match fs::read_to_string(&path) {
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                WorkerOutcome::Missing { worker_index }
            }
            Err(e) => WorkerOutcome::Malformed {
                worker_index,
                reason: e.to_string(),
            },
            Ok(text) => parse_worker_result(worker_index, &text),
        };
        workers.push(outcome);
    }

    let ok_results: Vec<&WorkerResult> = workers
        .iter()
        .filter_map(|w| match w {
            WorkerOutcome::Ok(r) if r.status == WorkerStatus::Ok => Some(r),
            _ => None,
        })
        .collect();
    let total_edges: u64 = ok_results.iter().map(|r| r.edges).sum();
    let span_seconds = match (
        ok_results.iter().map(|r| r.start_ns).min(),
        ok_results.iter().map(|r| r.end_ns).max(),
    ) {
        (Some(start), Some(end)) => (end - start) as f64 / 1e9,
        _ => 0.0,
    };
    let span_rate = if span_seconds > 0.0 {
        total_edges as f64 / span_seconds
    } else {
        0.0
    };
    let sum_rate = ok_results.iter().map(|r| r.rate).sum();
    let complete = workers.len() == num_processes
        && workers
            .iter()
            .all(|w| matches!(w, WorkerOutcome::Ok(r) if r.status == WorkerStatus::Ok));

    Ok(JobReport {
        workers,
        total_edges,
        expected_edges,
        span_seconds,
        span_rate,
        sum_rate,
        complete,
    })
}

fn parse_worker_result(worker_index: usize, text: &str) -> WorkerOutcome {
    let malformed = |reason: String| WorkerOutcome::Malformed {
        worker_index,
        reason,
    };
    let result: WorkerResult = match serde_json::from_str(text.trim()) {
        Ok(r) => r,
        Err(e) => return malformed(e.to_string()),
    };
    if result.worker_index != worker_index {
        return malformed(format!(
            "file claims worker_index {}, expected {worker_index}",
            result.worker_index
        ));
    }
    if result.end_ns < result.start_ns {
        return malformed(format!(
            "end_ns {} precedes start_ns {}",
            result.end_ns, result.start_ns
        ));
    }
    WorkerOutcome::Ok(result)
}

/// Polls the result directory until every worker file is present, every
/// child has exited, or the timeout lapses, then parses what is there.
/// A timeout yields a partial report with `complete == false` rather than
/// an error. Safe to call again; a completed job re-reads identically.
pub fn collect(handle: &mut JobHandle, timeout: Duration) -> Result<JobReport, ClusterError> {
    let deadline = Instant::now() + timeout;
    let dir = handle.job.result_dir.clone();
    let n = handle.job.num_processes;
    loop {
        let present = (0..n)
            .filter(|&i| dir.join(result_file_name(i)).exists())
            .count();
        if present == n {
            break;
        }
        // Exited children have either renamed their result in or never
        // will; once all are gone another poll cannot learn anything new.
        if handle.all_exited() || Instant::now() >= deadline {
            break;
        }
        std::thread::sleep(handle.job.poll_interval.min(Duration::from_millis(250)));
    }
    handle.reap();
    read_report(&dir, n, handle.job.config.total_edges)
}

/// Flags a worker process receives on its command line.
#[derive(Clone, Debug)]
pub struct WorkerArgs {
    pub worker_index: usize,
    pub shard_start: u64,
    pub shard_end: u64,
    pub result_dir: PathBuf,
    pub config_path: PathBuf,
}

/// Worker-side entry point: ingest `[shard_start, shard_end)` per the config
/// file and publish a result. Ingest failures (bad config, short workload,
/// failed verification) are reported through the result file with a failed
/// status, not a missing one; the returned error covers only the inability
/// to publish. A worker runs its shard in a single cold pass: trials and
/// warmup are single-process benchmark concerns.
pub fn run_worker(args: &WorkerArgs) -> Result<WorkerResult, ClusterError> {
    let result = match ingest_shard(args) {
        Ok(result) => result,
        Err(reason) => {
            let now = monotonic_ns();
            WorkerResult {
                worker_index: args.worker_index,
                edges: 0,
                wall_seconds: 0.0,
                rate: 0.0,
                flush_seconds: 0.0,
                cascades: Vec::new(),
                start_ns: now,
                end_ns: now,
                status: WorkerStatus::Failed(reason),
            }
        }
    };
    write_worker_result(&args.result_dir, &result)?;
    Ok(result)
}

fn ingest_shard(args: &WorkerArgs) -> Result<WorkerResult, String> {
    if args.shard_end < args.shard_start {
        return Err(format!(
            "shard end {} precedes shard start {}",
            args.shard_end, args.shard_start
        ));
    }
    let config = parse_config_file(&args.config_path).map_err(|e| e.to_string())?;
    let shard_edges = args.shard_end - args.shard_start;
    if shard_edges == 0 {
        let now = monotonic_ns();
        return Ok(WorkerResult {
            worker_index: args.worker_index,
            edges: 0,
            wall_seconds: 0.0,
            rate: 0.0,
            flush_seconds: 0.0,
            cascades: Vec::new(),
            start_ns: now,
            end_ns: now,
            status: WorkerStatus::Ok,
        });
    }

    let shard = config
        .workload
        .materialize(args.shard_start, args.shard_end)
        .map_err(|e| e.to_string())?;
    let mut shard_config = config;
    shard_config.total_edges = shard_edges;
    // Shard bounds are batch-aligned, so only a final sub-batch shard needs
    // its batch size clamped; the resulting single batch is exactly the
    // partial tail batch a whole-stream chunking would produce.
    shard_config.batch_size = shard_config.batch_size.min(shard_edges);
    shard_config.trial_count = 1;
    shard_config.warmup_batches = 0;

    let start_ns = monotonic_ns();
    let report = bench::run_ingest_on(&shard_config, &shard).map_err(|e| e.to_string())?;
    let end_ns = monotonic_ns();

    let sample = report.median;
    let status = match report.verified {
        Some(false) => WorkerStatus::Failed("flush verification failed".to_string()),
        _ => WorkerStatus::Ok,
    };
    Ok(WorkerResult {
        worker_index: args.worker_index,
        edges: sample.edges_ingested,
        wall_seconds: sample.wall_seconds,
        rate: sample.updates_per_second,
        flush_seconds: sample.flush_seconds,
        cascades: sample.cascade_counts,
        start_ns,
        end_ns,
        status,
    })
}

/// Writes a benchmark config as the key=value file workers read. The
/// workload appears as `in=PATH` or `rmat=scale,edges,seed` plus `probs=`,
/// and the schedule always as an explicit `cut-list` so no reconstruction
/// is needed. `parse_config_file` inverts this exactly.
pub fn write_config_file(path: &Path, config: &BenchConfig) -> Result<(), ClusterError> {
    let mut text = String::new();
    match &config.workload {
        WorkloadSpec::File(p) => {
            let _ = writeln!(text, "in={}", p.display());
        }
        WorkloadSpec::Rmat(params) => {
            let _ = writeln!(
                text,
                "rmat={},{},{}",
                params.scale, params.num_edges, params.seed
            );
            let _ = writeln!(
                text,
                "probs={},{},{},{}",
                params.probs[0], params.probs[1], params.probs[2], params.probs[3]
            );
        }
    }
    let _ = writeln!(text, "edges={}", config.total_edges);
    let _ = writeln!(text, "batch={}", config.batch_size);
    let cuts: Vec<String> = config.schedule.cuts().iter().map(u64::to_string).collect();
    let _ = writeln!(text, "cut-list={}", cuts.join(","));
    let _ = writeln!(text, "mode={}", config.mode);
    let _ = writeln!(text, "workers={}", config.num_workers);
    let _ = writeln!(text, "trials={}", config.trial_count);
    let _ = writeln!(text, "warmup={}", config.warmup_batches);
    let _ = writeln!(text, "verify={}", config.verify);
    fs::write(path, text)?;
    Ok(())
}

/// Parses a key=value config file into a benchmark config. Keys mirror the
/// benchmark command's flags: `in`, `rmat`, `probs`, `edges`, `batch`,
/// `cuts` (base,ratio,kmin,kmax), `cut-list`, `mode`, `workers`, `trials`,
/// `warmup`, `verify`. Blank lines and `#` comments are ignored. When
/// `edges` is absent the workload's full length is used, which for `in=`
/// means reading the edge file header.
pub fn parse_config_file(path: &Path) -> Result<BenchConfig, ClusterError> {
    let text = fs::read_to_string(path).map_err(|e| ClusterError::Config {
        reason: format!("{}: {e}", path.display()),
    })?;

    let mut fields: Vec<(usize, &str, &str)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ClusterError::Config {
            reason: format!("line {}: expected key=value, got `{line}`", lineno + 1),
        })?;
        fields.push((lineno + 1, key.trim(), value.trim()));
    }

    let config_err = |reason: String| ClusterError::Config { reason };
    let mut seen: Vec<&str> = Vec::new();
    for &(lineno, key, _) in &fields {
        if seen.contains(&key) {
            return Err(config_err(format!("line {lineno}: duplicate key `{key}`")));
        }
        seen.push(key);
    }
    let get = |key: &str| fields.iter().find(|f| f.1 == key).map(|f| f.2);

    for &(lineno, key, _) in &fields {
        if !matches!(
            key,
            "in" | "rmat" | "probs" | "edges" | "batch" | "cuts" | "cut-list" | "mode"
                | "workers" | "trials" | "warmup" | "verify"
        ) {
            return Err(config_err(format!("line {lineno}: unknown key `{key}`")));
        }
    }

    let workload = match (get("in"), get("rmat")) {
        (Some(_), Some(_)) => {
            return Err(config_err("`in` and `rmat` are mutually exclusive".to_string()))
        }
        (None, None) => {
            return Err(config_err("one of `in` or `rmat` is required".to_string()))
        }
        (Some(path), None) => {
            if get("probs").is_some() {
                return Err(config_err("`probs` requires `rmat`".to_string()));
            }
            WorkloadSpec::File(PathBuf::from(path))
        }
        (None, Some(spec)) => {
            let parts = parse_u64_list(spec, 3, "rmat").map_err(config_err)?;
            let scale = u32::try_from(parts[0])
                .map_err(|_| config_err(format!("rmat scale {} out of range", parts[0])))?;
            let mut params = RmatParams::new(scale, parts[1], parts[2]);
            if let Some(probs) = get("probs") {
                params = params.with_probs(parse_probs(probs).map_err(config_err)?);
            }
            WorkloadSpec::Rmat(params)
        }
    };

    let schedule = match (get("cuts"), get("cut-list")) {
        (Some(_), Some(_)) => {
            return Err(config_err(
                "`cuts` and `cut-list` are mutually exclusive".to_string(),
            ))
        }
        (Some(spec), None) => {
            let parts = parse_u64_list(spec, 4, "cuts").map_err(config_err)?;
            let kmin = u32::try_from(parts[2])
                .map_err(|_| config_err(format!("cuts kmin {} out of range", parts[2])))?;
            let kmax = u32::try_from(parts[3])
                .map_err(|_| config_err(format!("cuts kmax {} out of range", parts[3])))?;
            CutSchedule::from_ratio(parts[0], parts[1], kmin, kmax)
                .map_err(|e| config_err(format!("cuts: {e}")))?
        }
        (None, Some(list)) => {
            let cuts: Result<Vec<u64>, _> = list.split(',').map(|c| c.trim().parse()).collect();
            let cuts = cuts.map_err(|e| config_err(format!("cut-list: {e}")))?;
            CutSchedule::new(cuts).map_err(|e| config_err(format!("cut-list: {e}")))?
        }
        (None, None) => bench::desk_schedule(),
    };

    let parse_num = |key: &str, default: u64| -> Result<u64, ClusterError> {
        match get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| config_err(format!("{key}: {e}"))),
        }
    };
    let batch_size = parse_num("batch", bench::DESK_BATCH_SIZE)?;
    let total_edges = match get("edges") {
        Some(v) => v
            .parse()
            .map_err(|e| config_err(format!("edges: {e}")))?,
        None => match &workload {
            WorkloadSpec::Rmat(params) => params.num_edges,
            WorkloadSpec::File(p) => {
                WorkloadSpec::File(p.clone())
                    .available_edges()
                    .map_err(|e| config_err(format!("in={}: {e}", p.display())))?
            }
        },
    };
    let mode = match get("mode") {
        None => Mode::Hier,
        Some(v) => v.parse().map_err(|e| config_err(format!("mode: {e}")))?,
    };
    let verify = match get("verify") {
        None => false,
        Some("true") => true,
        Some("false") => false,
        Some(other) => {
            return Err(config_err(format!(
                "verify: expected true or false, got `{other}`"
            )))
        }
    };

    let config = BenchConfig {
        workload,
        batch_size,
        total_edges,
        schedule,
        mode,
        num_workers: parse_num("workers", 1)? as usize,
        trial_count: parse_num("trials", 3)? as u32,
        warmup_batches: parse_num("warmup", 0)? as u32,
        verify,
    };
    config.validate()?;
    Ok(config)
}

fn parse_u64_list(spec: &str, expect: usize, key: &str) -> Result<Vec<u64>, String> {
    let parts: Result<Vec<u64>, _> = spec.split(',').map(|p| p.trim().parse()).collect();
    let parts = parts.map_err(|e| format!("{key}: {e}"))?;
    if parts.len() != expect {
        return Err(format!(
            "{key}: expected {expect} comma-separated values, got {}",
            parts.len()
        ));
    }
    Ok(parts)
}

fn parse_probs(spec: &str) -> Result<[f64; 4], String> {
    let parts: Result<Vec<f64>, _> = spec.split(',').map(|p| p.trim().parse()).collect();
    let parts = parts.map_err(|e| format!("probs: {e}"))?;
    let four: [f64; 4] = parts
        .try_into()
        .map_err(|v: Vec<f64>| format!("probs: expected 4 values, got {}", v.len()))?;
    Ok(four)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_result(worker_index: usize, edges: u64, rate: f64, start_ns: u64, end_ns: u64) -> WorkerResult {
        WorkerResult {
            worker_index,
            edges,
            wall_seconds: (end_ns - start_ns) as f64 / 1e9,
            rate,
            flush_seconds: 0.01,
            cascades: vec![2, 1],
            start_ns,
            end_ns,
            status: WorkerStatus::Ok,
        }
    }

    #[test]
    fn shard_bounds_partition_batch_aligned() {
        assert_eq!(
            shard_bounds(1000, 100, 4),
            vec![(0, 300), (300, 600), (600, 800), (800, 1000)]
        );
        // Non-aligned tail stays in the last nonempty shard.
        assert_eq!(
            shard_bounds(1050, 100, 4),
            vec![(0, 300), (300, 600), (600, 900), (900, 1050)]
        );
        // More processes than batches leaves trailing shards empty.
        assert_eq!(shard_bounds(100, 100, 3), vec![(0, 100), (100, 100), (100, 100)]);
        assert_eq!(shard_bounds(0, 100, 2), vec![(0, 0), (0, 0)]);
    }

    #[test]
    fn shard_bounds_cover_everything_once() {
        for total in [1u64, 99, 100, 101, 1000, 12_345] {
            for batch in [1u64, 7, 100, 1024] {
                for procs in [1usize, 2, 3, 4, 7, 16] {
                    let bounds = shard_bounds(total, batch, procs);
                    assert_eq!(bounds.len(), procs);
                    assert_eq!(bounds[0].0, 0);
                    assert_eq!(bounds[procs - 1].1, total);
                    for window in bounds.windows(2) {
                        assert_eq!(window[0].1, window[1].0, "gap or overlap");
                        assert!(window[0].0 <= window[0].1);
                    }
                    // Boundaries fall on batch multiples except where
                    // clamped at the end of the edge range.
                    for &(start, end) in &bounds[..procs - 1] {
                        assert!(start % batch == 0 || start == total);
                        assert!(end % batch == 0 || end == total);
                    }
                }
            }
        }
    }

    #[test]
    fn worker_result_json_is_bit_exact() {
        let json = serde_json::to_string(&sample_result(2, 100, 200.0, 10, 20)).unwrap();
        assert_eq!(
            json,
            r#"{"worker_index":2,"edges":100,"wall_seconds":1e-8,"rate":200.0,"flush_seconds":0.01,"cascades":[2,1],"start_ns":10,"end_ns":20,"status":"ok"}"#
        );

        let mut failed = sample_result(0, 0, 0.0, 5, 5);
        failed.status = WorkerStatus::Failed("boom".to_string());
        let json = serde_json::to_string(&failed).unwrap();
        assert!(json.ends_with(r#""status":{"failed":"boom"}}"#), "got {json}");

        let parsed: WorkerResult = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed, failed);
    }

    #[test]
    fn write_worker_result_is_atomic_and_parseable() {
        let dir = tempfile::tempdir().unwrap();
        let result = sample_result(3, 500, 1000.0, 100, 600);
        let path = write_worker_result(dir.path(), &result).unwrap();
        assert_eq!(path.file_name().unwrap(), "w3.result");
        assert!(!dir.path().join("w3.tmp").exists());

        let report = read_report(dir.path(), 4, 500).unwrap();
        assert_eq!(report.workers[3], WorkerOutcome::Ok(result));
    }

    #[test]
    fn report_aggregates_fixture_rates_and_span() {
        let dir = tempfile::tempdir().unwrap();
        // Rates 10 and 20 with overlapping spans: sum of rates is 30 and the
        // span runs from the earliest start (1s) to the latest end (4s).
        write_worker_result(dir.path(), &sample_result(0, 20, 10.0, 1_000_000_000, 3_000_000_000))
            .unwrap();
        write_worker_result(dir.path(), &sample_result(1, 40, 20.0, 2_000_000_000, 4_000_000_000))
            .unwrap();

        let report = read_report(dir.path(), 2, 60).unwrap();
        assert!(report.complete);
        assert_eq!(report.total_edges, 60);
        assert_eq!(report.sum_rate, 30.0);
        assert!((report.span_seconds - 3.0).abs() < 1e-12);
        assert!((report.span_rate - 20.0).abs() < 1e-9);

        let again = read_report(dir.path(), 2, 60).unwrap();
        assert_eq!(report, again);
    }

    #[test]
    fn report_flags_missing_and_malformed_workers() {
        let dir = tempfile::tempdir().unwrap();
        write_worker_result(dir.path(), &sample_result(0, 10, 5.0, 0, 2_000_000_000)).unwrap();
        fs::write(dir.path().join(result_file_name(1)), "not json\n").unwrap();

        let report = read_report(dir.path(), 3, 30).unwrap();
        assert!(!report.complete);
        assert!(matches!(report.workers[1], WorkerOutcome::Malformed { worker_index: 1, .. }));
        assert_eq!(report.workers[2], WorkerOutcome::Missing { worker_index: 2 });
        // Aggregates still computed from the one ok worker.
        assert_eq!(report.total_edges, 10);
        assert_eq!(report.sum_rate, 5.0);
    }

    #[test]
    fn report_rejects_timestamps_out_of_order() {
        let dir = tempfile::tempdir().unwrap();
        let mut bad = sample_result(0, 10, 5.0, 100, 600);
        std::mem::swap(&mut bad.start_ns, &mut bad.end_ns);
        write_worker_result(dir.path(), &bad).unwrap();
        let report = read_report(dir.path(), 1, 10).unwrap();
        assert!(
            matches!(&report.workers[0], WorkerOutcome::Malformed { reason, .. } if reason.contains("precedes"))
        );
    }

    #[test]
    fn report_counts_failed_status_separately() {
        let dir = tempfile::tempdir().unwrap();
        let mut failed = sample_result(0, 0, 0.0, 7, 7);
        failed.status = WorkerStatus::Failed("flush verification failed".to_string());
        write_worker_result(dir.path(), &failed).unwrap();
        let report = read_report(dir.path(), 1, 100).unwrap();
        assert!(!report.complete);
        assert_eq!(report.total_edges, 0);
        assert!(matches!(&report.workers[0], WorkerOutcome::Ok(r) if r.status != WorkerStatus::Ok));
    }

    #[test]
    fn config_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("job.conf");
        let config = BenchConfig {
            workload: WorkloadSpec::Rmat(
                RmatParams::new(14, 250_000, 42).with_probs([0.55, 0.2, 0.2, 0.05]),
            ),
            batch_size: 5000,
            total_edges: 200_000,
            schedule: CutSchedule::new(vec![512, 4096, 32768]).unwrap(),
            mode: Mode::Hier,
            num_workers: 2,
            trial_count: 1,
            warmup_batches: 3,
            verify: true,
        };
        write_config_file(&path, &config).unwrap();
        let parsed = parse_config_file(&path).unwrap();

        match (&parsed.workload, &config.workload) {
            (WorkloadSpec::Rmat(a), WorkloadSpec::Rmat(b)) => assert_eq!(a, b),
            _ => panic!("workload kind changed in round trip"),
        }
        assert_eq!(parsed.batch_size, config.batch_size);
        assert_eq!(parsed.total_edges, config.total_edges);
        assert_eq!(parsed.schedule, config.schedule);
        assert_eq!(parsed.mode, config.mode);
        assert_eq!(parsed.num_workers, config.num_workers);
        assert_eq!(parsed.trial_count, config.trial_count);
        assert_eq!(parsed.warmup_batches, config.warmup_batches);
        assert_eq!(parsed.verify, config.verify);
    }

    #[test]
    fn config_file_defaults_and_ratio_cuts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("job.conf");
        fs::write(
            &path,
            "# job\nrmat=12,200000,7\ncuts=8192,4,2,5\n",
        )
        .unwrap();
        let config = parse_config_file(&path).unwrap();
        assert_eq!(config.total_edges, 200_000);
        assert_eq!(config.batch_size, bench::DESK_BATCH_SIZE);
        assert_eq!(
            config.schedule,
            CutSchedule::from_ratio(8192, 4, 2, 5).unwrap()
        );
        assert_eq!(config.mode, Mode::Hier);
        assert_eq!(config.num_workers, 1);
        assert_eq!(config.trial_count, 3);
        assert!(!config.verify);
    }

    #[test]
    fn config_file_rejects_bad_input() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("job.conf");
        let cases = [
            ("batch=100\n", "one of `in` or `rmat`"),
            ("in=x.bin\nrmat=10,5,1\n", "mutually exclusive"),
            ("rmat=10,1000,1\nnonsense=3\n", "unknown key"),
            ("rmat=10,1000,1\nmode=sideways\n", "unknown mode"),
            ("rmat=10,1000,1\nbatch=100\nbatch=200\n", "duplicate key"),
            ("rmat=10,1000,1\nverify=yes\n", "expected true or false"),
            ("rmat=10,1000,1\ncuts=8,2,3\n", "expected 4"),
            ("rmat=10,1000\n", "expected 3"),
            ("just a line\n", "expected key=value"),
        ];
        for (text, needle) in cases {
            fs::write(&path, text).unwrap();
            let err = parse_config_file(&path).unwrap_err().to_string();
            assert!(err.contains(needle), "`{text}` gave `{err}`");
        }
    }

    #[test]
    fn empty_shard_worker_publishes_ok_zero_result() {
        let dir = tempfile::tempdir().unwrap();
        let config_path = dir.path().join("job.conf");
        fs::write(&config_path, "rmat=10,1000,7\nbatch=100\n").unwrap();
        let args = WorkerArgs {
            worker_index: 5,
            shard_start: 1000,
            shard_end: 1000,
            result_dir: dir.path().to_path_buf(),
            config_path,
        };
        let result = run_worker(&args).unwrap();
        assert_eq!(result.status, WorkerStatus::Ok);
        assert_eq!(result.edges, 0);
        assert!(dir.path().join("w5.result").exists());
    }

    #[test]
    fn worker_reports_failure_through_result_file() {
        let dir = tempfile::tempdir().unwrap();
        let args = WorkerArgs {
            worker_index: 0,
            shard_start: 0,
            shard_end: 100,
            result_dir: dir.path().to_path_buf(),
            config_path: dir.path().join("missing.conf"),
        };
        let result = run_worker(&args).unwrap();
        assert!(matches!(result.status, WorkerStatus::Failed(_)));
        let report = read_report(dir.path(), 1, 100).unwrap();
        assert!(!report.complete);
    }

    #[test]
    fn worker_ingests_its_shard_and_verifies() {
        let dir = tempfile::tempdir().unwrap();
        let config_path = dir.path().join("job.conf");
        fs::write(
            &config_path,
            "rmat=12,40000,9\nbatch=1000\ncut-list=512,4096\nverify=true\n",
        )
        .unwrap();
        let args = WorkerArgs {
            worker_index: 1,
            shard_start: 10_000,
            shard_end: 20_000,
            result_dir: dir.path().to_path_buf(),
            config_path,
        };
        let result = run_worker(&args).unwrap();
        assert_eq!(result.status, WorkerStatus::Ok);
        assert_eq!(result.edges, 10_000);
        assert!(result.end_ns >= result.start_ns);
        assert_eq!(result.cascades.len(), 2);
    }

    #[test]
    fn monotonic_clock_is_nondecreasing_and_advances() {
        let a = monotonic_ns();
        std::thread::sleep(Duration::from_millis(10));
        let b = monotonic_ns();
        assert!(b > a);
        assert!(b - a >= 5_000_000, "slept 10ms but clock advanced {}ns", b - a);
    }
}
