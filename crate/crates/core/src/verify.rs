//! Brute-force reference accumulator for end-to-end verification.
//!
//! `--verify` runs compare a benchmark's merged flush against a plain
//! coordinate map fed the same stream. The map shares nothing with the
//! sorted-merge path it checks: no batching, no layers, no cascades.

use std::collections::BTreeMap;

use crate::hypersparse::{HypersparseMatrix, Triple};

/// Accumulates a stream into a coordinate map, the way a hierarchical
/// accumulator's flush must behave. Coordinates that cancel to zero stay in
/// the map, matching stored-zero retention.
pub fn accumulate_map(stream: impl IntoIterator<Item = Triple>) -> BTreeMap<(u64, u64), i64> {
    let mut map = BTreeMap::new();
    for t in stream {
        *map.entry((t.row, t.col)).or_insert(0i64) += t.val;
    }
    map
}

/// Exact pattern-and-value equality between a matrix and the reference map.
pub fn matrix_equals_map(matrix: &HypersparseMatrix, map: &BTreeMap<(u64, u64), i64>) -> bool {
    if matrix.entries_count() != map.len() {
        return false;
    }
    matrix
        .iter()
        .zip(map.iter())
        .all(|(t, (&(row, col), &val))| t.row == row && t.col == col && t.val == val)
}
