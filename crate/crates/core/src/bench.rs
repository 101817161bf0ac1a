//! Single-process benchmark engine: timed batched ingest, cut-schedule
//! sweeps, and worker-sharded vertical scaling.
//!
//! Timing hygiene is structural: the workload is fully materialized in
//! memory before any clock starts, the timed region contains nothing but
//! batch ingest calls, and the final flush is timed separately. With more
//! than one worker, batches are dealt round-robin to worker-owned
//! accumulators up front (a fixed deal keeps cascade counts deterministic
//! across trials) and each worker ingests on its own thread; the wall span
//! runs from first dispatch to last worker done. Aggregation merges worker
//! flushes only after the clock stops.
//!
//! The `flat` mode is the no-hierarchy baseline: the same batches are
//! assembled and added into a single matrix, which is exactly what a
//! hierarchy with zero cuts would do.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use thiserror::Error;

use crate::hierarchy::{CutSchedule, HierarchicalMatrix, HierarchyError};
use crate::hypersparse::{HypersparseMatrix, MatrixError, Triple};
use crate::streamgen::{self, RmatParams, StreamError};
use crate::verify;

/// Desk-scale defaults: small enough to finish in minutes on a laptop.
/// Full-scale runs (1e8 edges, cut base 2^17) stay available behind flags.
pub const DESK_BATCH_SIZE: u64 = 100_000;
pub const DESK_TOTAL_EDGES: u64 = 10_000_000;
pub const DESK_CUT_BASE: u64 = 1 << 13;
pub const DESK_CUT_RATIO: u64 = 4;
pub const DESK_KMIN: u32 = 2;
pub const DESK_KMAX: u32 = 5;
pub const DESK_RMAT_SCALE: u32 = 22;

/// The desk-scale default cut schedule (base 2^13, ratio 4, exponents 2..=5).
pub fn desk_schedule() -> CutSchedule {
    CutSchedule::from_ratio(DESK_CUT_BASE, DESK_CUT_RATIO, DESK_KMIN, DESK_KMAX)
        .expect("desk-scale schedule is valid")
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid benchmark config: {reason}")]
    InvalidConfig { reason: String },
    #[error("workload provides {available} edges, run needs {requested}")]
    WorkloadTooShort { available: u64, requested: u64 },
    #[error("ingest worker panicked")]
    WorkerPanicked,
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Hier,
    Flat,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Hier => "hier",
            Mode::Flat => "flat",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "hier" => Ok(Mode::Hier),
            "flat" => Ok(Mode::Flat),
            other => Err(format!("unknown mode `{other}` (expected hier or flat)")),
        }
    }
}

/// Where a benchmark's edges come from. Either way the triples are loaded
/// into memory before timing starts.
#[derive(Clone, Debug)]
pub enum WorkloadSpec {
    File(PathBuf),
    Rmat(RmatParams),
}

impl WorkloadSpec {
    /// Total edges the workload can provide.
    pub fn available_edges(&self) -> Result<u64, BenchError> {
        match self {
            WorkloadSpec::File(path) => Ok(streamgen::read_edge_file(path)?.0.num_edges),
            WorkloadSpec::Rmat(params) => Ok(params.num_edges),
        }
    }

    /// Matrix dimensions implied by the workload's scale.
    pub fn dims(&self) -> Result<(u64, u64), BenchError> {
        let dim = match self {
            WorkloadSpec::File(path) => streamgen::read_edge_file(path)?.0.dim(),
            WorkloadSpec::Rmat(params) => {
                params.validate()?;
                params.dim()
            }
        };
        Ok((dim, dim))
    }

    /// Loads edges `start..end` into memory.
    pub fn materialize(&self, start: u64, end: u64) -> Result<Vec<Triple>, BenchError> {
        match self {
            WorkloadSpec::File(path) => {
                let (_, reader) = streamgen::read_edge_slice(path, start, end)?;
                Ok(streamgen::collect_triples(reader)?)
            }
            WorkloadSpec::Rmat(params) => {
                if end > params.num_edges || start > end {
                    return Err(BenchError::WorkloadTooShort {
                        available: params.num_edges,
                        requested: end,
                    });
                }
                let mut stream = streamgen::rmat_generate(params)?;
                stream.skip_edges(start);
                Ok(stream.take((end - start) as usize).collect())
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub workload: WorkloadSpec,
    pub batch_size: u64,
    pub total_edges: u64,
    pub schedule: CutSchedule,
    pub mode: Mode,
    /// Shared-nothing shards within this process, one ingest thread each.
    pub num_workers: usize,
    pub trial_count: u32,
    pub warmup_batches: u32,
    /// Compare the final merged flush against the brute-force map oracle.
    pub verify: bool,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let reason = if self.batch_size == 0 {
            Some("batch_size must be >= 1".to_string())
        } else if self.total_edges < self.batch_size {
            Some(format!(
                "total_edges ({}) must be >= batch_size ({})",
                self.total_edges, self.batch_size
            ))
        } else if self.trial_count == 0 {
            Some("trial_count must be >= 1".to_string())
        } else if self.num_workers == 0 {
            Some("num_workers must be >= 1".to_string())
        } else {
            None
        };
        match reason {
            Some(reason) => Err(BenchError::InvalidConfig { reason }),
            None => Ok(()),
        }
    }
}

/// One timed measurement: what ran, how many edges, and the rates.
#[derive(Clone, Debug)]
pub struct ThroughputSample {
    pub mode: Mode,
    pub num_workers: usize,
    pub batch_size: u64,
    pub edges_ingested: u64,
    pub wall_seconds: f64,
    pub updates_per_second: f64,
    /// Per capped layer, how many updates cascaded it (summed over workers).
    /// Empty in flat mode.
    pub cascade_counts: Vec<u64>,
    pub flush_seconds: f64,
}

/// All trials of one configuration plus the median-rate trial as the
/// headline. Even trial counts take the lower middle.
#[derive(Clone, Debug)]
pub struct IngestReport {
    pub trials: Vec<ThroughputSample>,
    pub median: ThroughputSample,
    /// `Some(outcome)` when verification was requested.
    pub verified: Option<bool>,
}

enum Accumulator {
    Hier(HierarchicalMatrix),
    Flat(HypersparseMatrix),
}

impl Accumulator {
    fn new(mode: Mode, nrows: u64, ncols: u64, schedule: &CutSchedule) -> Result<Self, BenchError> {
        Ok(match mode {
            Mode::Hier => Accumulator::Hier(HierarchicalMatrix::new(
                nrows,
                ncols,
                schedule.clone(),
            )?),
            Mode::Flat => Accumulator::Flat(HypersparseMatrix::new(nrows, ncols)?),
        })
    }

    fn ingest(&mut self, batch: &[Triple], cascades: &mut [u64]) -> Result<(), BenchError> {
        match self {
            Accumulator::Hier(h) => {
                let stats = h.update(batch)?;
                for (total, c) in cascades.iter_mut().zip(stats.cascades) {
                    *total += c as u64;
                }
            }
            Accumulator::Flat(m) => {
                let assembled = HypersparseMatrix::from_triples(m.nrows(), m.ncols(), batch)?;
                m.add_assign(&assembled)?;
            }
        }
        Ok(())
    }

    fn into_flush(self) -> Result<HypersparseMatrix, BenchError> {
        match self {
            Accumulator::Hier(h) => Ok(h.flush()?),
            Accumulator::Flat(m) => Ok(m),
        }
    }
}

struct WorkerOutput {
    acc: Accumulator,
    cascades: Vec<u64>,
}

fn ingest_batches(
    mode: Mode,
    nrows: u64,
    ncols: u64,
    schedule: &CutSchedule,
    batches: &[&[Triple]],
) -> Result<WorkerOutput, BenchError> {
    let mut acc = Accumulator::new(mode, nrows, ncols, schedule)?;
    let mut cascades = vec![0u64; schedule.len()];
    for batch in batches {
        acc.ingest(batch, &mut cascades)?;
    }
    Ok(WorkerOutput { acc, cascades })
}

fn deal_round_robin<'a>(batches: &[&'a [Triple]], workers: usize) -> Vec<Vec<&'a [Triple]>> {
    let mut per_worker: Vec<Vec<&'a [Triple]>> = vec![Vec::new(); workers];
    for (i, batch) in batches.iter().enumerate() {
        per_worker[i % workers].push(batch);
    }
    per_worker
}

fn run_workers(
    mode: Mode,
    nrows: u64,
    ncols: u64,
    schedule: &CutSchedule,
    per_worker: &[Vec<&[Triple]>],
) -> Result<Vec<WorkerOutput>, BenchError> {
    if per_worker.len() == 1 {
        return Ok(vec![ingest_batches(mode, nrows, ncols, schedule, &per_worker[0])?]);
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = per_worker
            .iter()
            .map(|batches| scope.spawn(move || ingest_batches(mode, nrows, ncols, schedule, batches)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().map_err(|_| BenchError::WorkerPanicked)?)
            .collect()
    })
}

fn median_sample(trials: &[ThroughputSample]) -> ThroughputSample {
    let mut order: Vec<usize> = (0..trials.len()).collect();
    order.sort_by(|&a, &b| {
        trials[a]
            .updates_per_second
            .total_cmp(&trials[b].updates_per_second)
    });
    trials[order[(trials.len() - 1) / 2]].clone()
}

/// Materializes the configured workload and runs the timed ingest.
pub fn run_ingest(config: &BenchConfig) -> Result<IngestReport, BenchError> {
    let available = config.workload.available_edges()?;
    if available < config.total_edges {
        return Err(BenchError::WorkloadTooShort {
            available,
            requested: config.total_edges,
        });
    }
    let workload = config.workload.materialize(0, config.total_edges)?;
    run_ingest_on(config, &workload)
}

/// Timed ingest over an already-materialized workload. Shared by sweeps and
/// scaling runs so the workload is loaded once, not per configuration.
pub fn run_ingest_on(config: &BenchConfig, workload: &[Triple]) -> Result<IngestReport, BenchError> {
    config.validate()?;
    if (workload.len() as u64) < config.total_edges {
        return Err(BenchError::WorkloadTooShort {
            available: workload.len() as u64,
            requested: config.total_edges,
        });
    }
    let workload = &workload[..config.total_edges as usize];
    let (nrows, ncols) = config.workload.dims()?;
    let batches: Vec<&[Triple]> = workload.chunks(config.batch_size as usize).collect();
    let per_worker = deal_round_robin(&batches, config.num_workers);

    if config.warmup_batches > 0 {
        let warm: Vec<&[Triple]> = batches
            .iter()
            .copied()
            .take(config.warmup_batches as usize)
            .collect();
        ingest_batches(config.mode, nrows, ncols, &config.schedule, &warm)?;
    }

    let mut trials = Vec::with_capacity(config.trial_count as usize);
    let mut last_flush = None;
    for _ in 0..config.trial_count {
        let ingest_started = Instant::now();
        let outputs = run_workers(config.mode, nrows, ncols, &config.schedule, &per_worker)?;
        let wall_seconds = ingest_started.elapsed().as_secs_f64();

        let flush_started = Instant::now();
        let mut cascade_counts = vec![0u64; config.schedule.len()];
        let mut merged = HypersparseMatrix::new(nrows, ncols)?;
        for output in outputs {
            for (total, c) in cascade_counts.iter_mut().zip(&output.cascades) {
                *total += c;
            }
            merged.add_assign(&output.acc.into_flush()?)?;
        }
        let flush_seconds = flush_started.elapsed().as_secs_f64();

        let edges_ingested = workload.len() as u64;
        trials.push(ThroughputSample {
            mode: config.mode,
            num_workers: config.num_workers,
            batch_size: config.batch_size,
            edges_ingested,
            wall_seconds,
            updates_per_second: edges_ingested as f64 / wall_seconds,
            cascade_counts: if config.mode == Mode::Hier {
                cascade_counts
            } else {
                Vec::new()
            },
            flush_seconds,
        });
        last_flush = Some(merged);
    }

    let verified = if config.verify {
        let oracle = verify::accumulate_map(workload.iter().copied());
        Some(verify::matrix_equals_map(
            last_flush.as_ref().expect("at least one trial"),
            &oracle,
        ))
    } else {
        None
    };

    Ok(IngestReport {
        median: median_sample(&trials),
        trials,
        verified,
    })
}

/// One sweep combination and what happened to it. Combinations whose
/// schedule construction fails (e.g. a cut overflowing 2^63) are skipped
/// with the diagnostic recorded.
#[derive(Debug)]
pub struct SweepEntry {
    pub base: u64,
    pub ratio: u64,
    pub cut_count: u32,
    pub outcome: Result<IngestReport, String>,
}

/// Cut-schedule sweep over (base, ratio, cut count) combinations, replaying
/// one workload. Cut counts extend the exponent range upward from `kmin`.
#[derive(Clone, Debug)]
pub struct SweepPlan {
    pub workload: WorkloadSpec,
    pub bases: Vec<u64>,
    pub ratios: Vec<u64>,
    pub cut_counts: Vec<u32>,
    pub kmin: u32,
    pub batch_size: u64,
    pub total_edges: u64,
    pub trial_count: u32,
    pub warmup_batches: u32,
    pub verify: bool,
}

/// Runs every (base, ratio, cut_count) combination in deterministic
/// (nested, in given order) sequence against the same materialized workload.
pub fn run_sweep(plan: &SweepPlan) -> Result<Vec<SweepEntry>, BenchError> {
    let workload = plan.workload.materialize(0, plan.total_edges)?;
    let mut entries = Vec::new();
    for &base in &plan.bases {
        for &ratio in &plan.ratios {
            for &cut_count in &plan.cut_counts {
                let outcome = sweep_schedule(base, ratio, cut_count, plan.kmin)
                    .and_then(|schedule| {
                        let config = BenchConfig {
                            workload: plan.workload.clone(),
                            batch_size: plan.batch_size,
                            total_edges: plan.total_edges,
                            schedule,
                            mode: Mode::Hier,
                            num_workers: 1,
                            trial_count: plan.trial_count,
                            warmup_batches: plan.warmup_batches,
                            verify: plan.verify,
                        };
                        run_ingest_on(&config, &workload).map_err(|e| e.to_string())
                    });
                entries.push(SweepEntry {
                    base,
                    ratio,
                    cut_count,
                    outcome,
                });
            }
        }
    }
    Ok(entries)
}

fn sweep_schedule(base: u64, ratio: u64, cut_count: u32, kmin: u32) -> Result<CutSchedule, String> {
    if cut_count == 0 {
        return Err("cut count must be >= 1".to_string());
    }
    let kmax = kmin
        .checked_add(cut_count - 1)
        .ok_or_else(|| "cut count overflows exponent range".to_string())?;
    CutSchedule::from_ratio(base, ratio, kmin, kmax).map_err(|e| e.to_string())
}

/// Vertical-scaling series: the same workload sharded over increasing
/// worker counts, one report per count.
pub fn run_vertical(
    worker_counts: &[usize],
    config: &BenchConfig,
) -> Result<Vec<IngestReport>, BenchError> {
    let workload = config.workload.materialize(0, config.total_edges)?;
    worker_counts
        .iter()
        .map(|&workers| {
            let mut per_count = config.clone();
            per_count.num_workers = workers;
            run_ingest_on(&per_count, &workload)
        })
        .collect()
}
