//! N-layer hierarchical accumulator over hypersparse matrices.
//!
//! A [`HierarchicalMatrix`] keeps K+1 layers A1..A(K+1) of identical
//! dimensions plus K cut thresholds c1 < c2 < ... < cK. A batch of updates is
//! assembled into a hypersparse matrix and added to A1; then a single
//! ascending pass i = 1..K checks each capped layer and, when the stored
//! entry count exceeds ci, adds Ai into A(i+1) and clears Ai. Because the
//! pass ascends, an overflow the cascade creates at i+1 is caught by the very
//! next iteration, so one pass settles everything: after every update,
//! `entries_count(Ai) <= ci` holds for all capped layers. The top layer is
//! unbounded.
//!
//! Two deliberate choices mirror the accumulator's counting semantics:
//! thresholds compare the *stored entry* count (explicit zeros included),
//! which is a constant-time length read, not the nonzero count; and the
//! cascade fires on strictly greater than, never at equality.
//!
//! Summing all layers ([`HierarchicalMatrix::flush`]) yields exactly the
//! matrix a flat accumulation of the whole stream would have produced — the
//! hierarchy changes where merge work happens, never the result.

use std::mem;

use thiserror::Error;

use crate::hypersparse::{HypersparseMatrix, MatrixError, Triple};

/// Cut thresholds used in [`CutSchedule::from_ratio`] must stay below 2^63.
const MAX_CUT: u64 = 1 << 63;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("cut schedule must contain at least one threshold")]
    Empty,
    #[error("cut {index} is zero; thresholds must be >= 1")]
    ZeroCut { index: usize },
    #[error("cuts must be strictly increasing: cut {index} ({value}) does not exceed {previous}")]
    NotIncreasing {
        index: usize,
        value: u64,
        previous: u64,
    },
    #[error("base >= 1, ratio >= 2 and kmin <= kmax required (got base {base}, ratio {ratio}, k {kmin}..={kmax})")]
    InvalidRatioParams {
        base: u64,
        ratio: u64,
        kmin: u32,
        kmax: u32,
    },
    #[error("cut value {base}*{ratio}^{exponent} exceeds 2^63")]
    Overflow { base: u64, ratio: u64, exponent: u32 },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HierarchyError {
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("running total of ingested values overflowed i64")]
    TotalOverflow,
}

/// Strictly increasing cascade thresholds c1 < c2 < ... < cK, all >= 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CutSchedule {
    cuts: Vec<u64>,
}

impl CutSchedule {
    pub fn new(cuts: Vec<u64>) -> Result<Self, ScheduleError> {
        if cuts.is_empty() {
            return Err(ScheduleError::Empty);
        }
        for (index, &value) in cuts.iter().enumerate() {
            if value == 0 {
                return Err(ScheduleError::ZeroCut { index });
            }
            if index > 0 && value <= cuts[index - 1] {
                return Err(ScheduleError::NotIncreasing {
                    index,
                    value,
                    previous: cuts[index - 1],
                });
            }
        }
        Ok(CutSchedule { cuts })
    }

    /// Geometric schedule `base * ratio^k` for k in `kmin..=kmax`, the
    /// construction used for cut-parameter sweeps. Strictly increasing by
    /// construction; a cut beyond 2^63 is an overflow error.
    pub fn from_ratio(base: u64, ratio: u64, kmin: u32, kmax: u32) -> Result<Self, ScheduleError> {
        if base == 0 || ratio < 2 || kmin > kmax {
            return Err(ScheduleError::InvalidRatioParams {
                base,
                ratio,
                kmin,
                kmax,
            });
        }
        let mut cuts = Vec::with_capacity((kmax - kmin + 1) as usize);
        for exponent in kmin..=kmax {
            let cut = ratio
                .checked_pow(exponent)
                .and_then(|p| base.checked_mul(p))
                .filter(|&c| c <= MAX_CUT)
                .ok_or(ScheduleError::Overflow {
                    base,
                    ratio,
                    exponent,
                })?;
            cuts.push(cut);
        }
        CutSchedule::new(cuts)
    }

    pub fn cuts(&self) -> &[u64] {
        &self.cuts
    }

    /// Number of cut thresholds K (the hierarchy holds K+1 layers).
    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }
}

/// Per-update cascade instrumentation: `cascades[i]` is 1 when capped layer
/// i overflowed into layer i+1 during the update's ascending pass.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpdateStats {
    pub cascades: Vec<u32>,
}

/// The hierarchical accumulator: K+1 layers plus the cut schedule.
#[derive(Clone, Debug)]
pub struct HierarchicalMatrix {
    layers: Vec<HypersparseMatrix>,
    cuts: CutSchedule,
    nrows: u64,
    ncols: u64,
    total_ingested: i64,
}

impl HierarchicalMatrix {
    /// K+1 empty layers of identical dimensions. Layers whose entries have
    /// cascaded upward are re-initialized to fresh empty matrices rather
    /// than swapped with a stored empty template; the observable behavior is
    /// the same.
    pub fn new(nrows: u64, ncols: u64, cuts: CutSchedule) -> Result<Self, HierarchyError> {
        let num_layers = cuts.len() + 1;
        let mut layers = Vec::with_capacity(num_layers);
        for _ in 0..num_layers {
            layers.push(HypersparseMatrix::new(nrows, ncols)?);
        }
        Ok(HierarchicalMatrix {
            layers,
            cuts,
            nrows,
            ncols,
            total_ingested: 0,
        })
    }

    fn empty_layer(&self) -> HypersparseMatrix {
        HypersparseMatrix::new(self.nrows, self.ncols).expect("dimensions validated at construction")
    }

    /// Ingests one batch: assemble the batch into a matrix (duplicates
    /// accumulate), add it to the lowest layer, then run the ascending
    /// cascade pass. A batch containing an out-of-range triple is rejected
    /// before any mutation, leaving the accumulator quiescent.
    ///
    /// Layer 1 may transiently exceed c1 between the batch add and the pass;
    /// the threshold invariant is guaranteed only at return.
    pub fn update(&mut self, batch: &[Triple]) -> Result<UpdateStats, HierarchyError> {
        let incoming = HypersparseMatrix::from_triples(self.nrows, self.ncols, batch)?;
        let new_total = self
            .total_ingested
            .checked_add(incoming.total_value()?)
            .ok_or(HierarchyError::TotalOverflow)?;

        self.layers[0].add_assign(&incoming)?;
        self.total_ingested = new_total;

        let mut cascades = vec![0u32; self.cuts.len()];
        for i in 0..self.cuts.len() {
            if self.layers[i].entries_count() as u64 > self.cuts.cuts()[i] {
                let empty = self.empty_layer();
                let overflowing = mem::replace(&mut self.layers[i], empty);
                self.layers[i + 1].add_assign(&overflowing)?;
                cascades[i] = 1;
            }
        }
        Ok(UpdateStats { cascades })
    }

    /// Sums every layer into one matrix, materializing all pending updates.
    /// Non-destructive: the layers are left exactly as they were.
    pub fn flush(&self) -> Result<HypersparseMatrix, HierarchyError> {
        let mut all = self.empty_layer();
        for layer in &self.layers {
            all.add_assign(layer)?;
        }
        Ok(all)
    }

    /// Empties every layer and zeroes the running total.
    pub fn reset(&mut self) {
        for layer in &mut self.layers {
            *layer = HypersparseMatrix::new(self.nrows, self.ncols)
                .expect("dimensions validated at construction");
        }
        self.total_ingested = 0;
    }

    pub fn layers(&self) -> &[HypersparseMatrix] {
        &self.layers
    }

    pub fn cuts(&self) -> &CutSchedule {
        &self.cuts
    }

    /// Number of layers, i.e. K+1 for K cuts.
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn nrows(&self) -> u64 {
        self.nrows
    }

    pub fn ncols(&self) -> u64 {
        self.ncols
    }

    /// Running sum of every ingested value, maintained with checked
    /// arithmetic. Equals the flushed matrix's total at quiescent points.
    pub fn total_ingested(&self) -> i64 {
        self.total_ingested
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn distinct_batch(start: u64, n: u64) -> Vec<Triple> {
        (start..start + n).map(|i| Triple::new(i, i, 1)).collect()
    }

    #[test]
    fn schedule_rejects_non_increasing_and_zero() {
        assert!(matches!(
            CutSchedule::new(vec![16, 8]),
            Err(ScheduleError::NotIncreasing { index: 1, value: 8, previous: 16 })
        ));
        assert!(matches!(
            CutSchedule::new(vec![0, 4]),
            Err(ScheduleError::ZeroCut { index: 0 })
        ));
        assert!(matches!(CutSchedule::new(vec![]), Err(ScheduleError::Empty)));
        assert!(matches!(
            CutSchedule::new(vec![4, 4]),
            Err(ScheduleError::NotIncreasing { .. })
        ));
    }

    #[test]
    fn from_ratio_matches_power_table() {
        let s = CutSchedule::from_ratio(1 << 17, 2, 2, 8).unwrap();
        assert_eq!(
            s.cuts(),
            &[
                1 << 19,
                1 << 20,
                1 << 21,
                1 << 22,
                1 << 23,
                1 << 24,
                1 << 25
            ]
        );

        let s = CutSchedule::from_ratio(1 << 17, 8, 2, 8).unwrap();
        assert_eq!(
            s.cuts(),
            &[
                1 << 23,
                1 << 26,
                1 << 29,
                1 << 32,
                1 << 35,
                1 << 38,
                1 << 41
            ]
        );

        assert_eq!(CutSchedule::from_ratio(1, 2, 0, 0).unwrap().cuts(), &[1]);
    }

    #[test]
    fn from_ratio_rejects_bad_params_and_overflow() {
        assert!(matches!(
            CutSchedule::from_ratio(0, 2, 0, 1),
            Err(ScheduleError::InvalidRatioParams { .. })
        ));
        assert!(matches!(
            CutSchedule::from_ratio(1, 1, 0, 1),
            Err(ScheduleError::InvalidRatioParams { .. })
        ));
        assert!(matches!(
            CutSchedule::from_ratio(1, 2, 3, 2),
            Err(ScheduleError::InvalidRatioParams { .. })
        ));
        assert!(matches!(
            CutSchedule::from_ratio(1 << 17, 2, 2, 62),
            Err(ScheduleError::Overflow { .. })
        ));
    }

    #[test]
    fn new_allocates_one_layer_per_cut_plus_top() {
        let h = HierarchicalMatrix::new(
            64,
            64,
            CutSchedule::new(vec![4, 16, 64]).unwrap(),
        )
        .unwrap();
        assert_eq!(h.num_layers(), 4);
        assert!(h.layers().iter().all(|l| l.entries_count() == 0));
        assert_eq!(h.total_ingested(), 0);

        let h = HierarchicalMatrix::new(8, 8, CutSchedule::new(vec![1]).unwrap()).unwrap();
        assert_eq!(h.num_layers(), 2);
    }

    #[test]
    fn below_threshold_batch_stays_in_layer_one() {
        let mut h =
            HierarchicalMatrix::new(64, 64, CutSchedule::new(vec![4]).unwrap()).unwrap();
        let stats = h.update(&distinct_batch(0, 3)).unwrap();
        assert_eq!(stats.cascades, vec![0]);
        assert_eq!(h.layers()[0].entries_count(), 3);
        assert_eq!(h.layers()[1].entries_count(), 0);
    }

    #[test]
    fn overflow_cascades_and_clears_layer_one() {
        let mut h =
            HierarchicalMatrix::new(64, 64, CutSchedule::new(vec![4]).unwrap()).unwrap();
        h.update(&distinct_batch(0, 3)).unwrap();
        let stats = h.update(&distinct_batch(10, 3)).unwrap();
        assert_eq!(stats.cascades, vec![1]);
        assert_eq!(h.layers()[0].entries_count(), 0);
        assert_eq!(h.layers()[1].entries_count(), 6);

        let flushed = h.flush().unwrap();
        assert_eq!(flushed.entries_count(), 6);
        assert!(flushed.iter().all(|t| t.val == 1));
    }

    #[test]
    fn cascade_chains_within_one_ascending_pass() {
        // cuts [2,4]: the second batch's level-1 cascade lifts layer 2 to 6
        // entries, which exceeds 4 and cascades again in the same pass.
        let mut h =
            HierarchicalMatrix::new(64, 64, CutSchedule::new(vec![2, 4]).unwrap()).unwrap();
        let s1 = h.update(&distinct_batch(0, 3)).unwrap();
        assert_eq!(s1.cascades, vec![1, 0]);
        assert_eq!(h.layers()[1].entries_count(), 3);

        let s2 = h.update(&distinct_batch(10, 3)).unwrap();
        assert_eq!(s2.cascades, vec![1, 1]);
        assert_eq!(h.layers()[0].entries_count(), 0);
        assert_eq!(h.layers()[1].entries_count(), 0);
        assert_eq!(h.layers()[2].entries_count(), 6);
    }

    #[test]
    fn threshold_uses_stored_entries_not_nnz() {
        // Four stored zeros exceed a cut of 3 even though nnz is 0.
        let mut h =
            HierarchicalMatrix::new(64, 64, CutSchedule::new(vec![3]).unwrap()).unwrap();
        let batch: Vec<Triple> = (0..4)
            .flat_map(|i| [Triple::new(i, i, 1), Triple::new(i, i, -1)])
            .collect();
        let stats = h.update(&batch).unwrap();
        assert_eq!(stats.cascades, vec![1]);
        assert_eq!(h.layers()[0].entries_count(), 0);
        assert_eq!(h.layers()[1].entries_count(), 4);
        assert_eq!(h.layers()[1].nnz_count(), 0);
    }

    #[test]
    fn cascade_requires_strictly_greater() {
        let mut h =
            HierarchicalMatrix::new(64, 64, CutSchedule::new(vec![3]).unwrap()).unwrap();
        let stats = h.update(&distinct_batch(0, 3)).unwrap();
        assert_eq!(stats.cascades, vec![0]);
        assert_eq!(h.layers()[0].entries_count(), 3);
    }

    #[test]
    fn flush_is_non_destructive_and_conserves_totals() {
        let mut h =
            HierarchicalMatrix::new(64, 64, CutSchedule::new(vec![2, 4]).unwrap()).unwrap();
        assert_eq!(h.flush().unwrap().entries_count(), 0);

        h.update(&distinct_batch(0, 3)).unwrap();
        h.update(&distinct_batch(10, 3)).unwrap();
        let before: Vec<usize> = h.layers().iter().map(|l| l.entries_count()).collect();
        let flushed = h.flush().unwrap();
        let after: Vec<usize> = h.layers().iter().map(|l| l.entries_count()).collect();
        assert_eq!(before, after);
        assert_eq!(flushed.total_value().unwrap(), h.total_ingested());
        assert_eq!(flushed.entries_count(), 6);
    }

    #[test]
    fn reset_clears_everything_and_is_idempotent() {
        let mut h =
            HierarchicalMatrix::new(64, 64, CutSchedule::new(vec![2]).unwrap()).unwrap();
        h.update(&distinct_batch(0, 5)).unwrap();
        h.reset();
        assert_eq!(h.flush().unwrap().entries_count(), 0);
        assert_eq!(h.total_ingested(), 0);
        h.reset();
        assert_eq!(h.flush().unwrap().entries_count(), 0);

        let batch = distinct_batch(3, 4);
        h.update(&batch).unwrap();
        let direct = HypersparseMatrix::from_triples(64, 64, &batch).unwrap();
        assert_eq!(h.flush().unwrap(), direct);
    }

    #[test]
    fn rejected_batch_leaves_state_untouched() {
        let mut h =
            HierarchicalMatrix::new(8, 8, CutSchedule::new(vec![2]).unwrap()).unwrap();
        h.update(&distinct_batch(0, 2)).unwrap();
        let before = h.flush().unwrap();
        let total_before = h.total_ingested();

        let bad = vec![Triple::new(1, 1, 1), Triple::new(99, 0, 1)];
        let err = h.update(&bad).unwrap_err();
        assert!(matches!(
            err,
            HierarchyError::Matrix(MatrixError::TripleOutOfBounds { position: 1, .. })
        ));
        assert_eq!(h.flush().unwrap(), before);
        assert_eq!(h.total_ingested(), total_before);
        for (layer, cut) in h.layers().iter().zip(h.cuts().cuts()) {
            assert!(layer.entries_count() as u64 <= *cut);
        }
    }
}
