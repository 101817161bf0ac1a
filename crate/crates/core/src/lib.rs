//! Hypersparse matrices with a hierarchical streaming accumulator.
//!
//! A [`HypersparseMatrix`] stores only its present entries, so matrices with
//! dimensions up to 2^60 cost memory proportional to the entry count alone.
//! Streaming workloads batch their updates into a [`HierarchicalMatrix`]: a
//! stack of hypersparse layers where small, fast layers absorb incoming
//! batches and overflow past a cut threshold cascades into the next layer.
//! Summing every layer ([`HierarchicalMatrix::flush`]) materializes the same
//! matrix a direct accumulation would have produced, but the hot path only
//! ever merges into small operands.
//!
//! The companion modules provide the machinery around the accumulator:
//!
//! - [`streamgen`]: deterministic R-MAT power-law edge streams and a binary
//!   edge-file format, so benchmark timing excludes generation.
//! - [`bench`]: single-process ingest timing, cut-schedule sweeps, and
//!   thread-sharded vertical scaling.
//! - [`cluster`]: a multi-process harness that shards a workload across
//!   worker processes and aggregates results through atomically renamed
//!   result files.
//! - [`verify`]: a brute-force coordinate-map accumulator used to check
//!   benchmark runs end to end.

pub mod bench;
pub mod cluster;
pub mod hierarchy;
pub mod hypersparse;
pub mod streamgen;
pub mod verify;

pub use hierarchy::{CutSchedule, HierarchicalMatrix, HierarchyError, ScheduleError, UpdateStats};
pub use hypersparse::{HypersparseMatrix, MatrixError, Triple, MAX_DIM};
