//! Shared fixtures for the criterion microbenchmarks.

use hhsparse::streamgen::{rmat_generate, RmatParams};
use hhsparse::Triple;

/// Materializes a deterministic power-law workload for a benchmark to chew
/// on, so generation cost stays out of the measured region.
pub fn rmat_workload(scale: u32, num_edges: u64, seed: u64) -> Vec<Triple> {
    let params = RmatParams::new(scale, num_edges, seed);
    rmat_generate(&params)
        .expect("benchmark params are valid")
        .collect()
}
