//! Deterministic R-MAT power-law edge streams and edge-file serialization.
//!
//! Every stream is a pure function of its [`RmatParams`]: the generator draws
//! from a SplitMix64 PRNG (state advances by a fixed odd gamma, output is the
//! usual 64-bit finalizer) and picks one of four quadrants per bit level by
//! comparing the raw 64-bit draw against fixed-point cumulative thresholds.
//! No floating point enters the per-edge path, so equal seeds give
//! byte-identical streams on every platform. The constant state stride also
//! makes [`RmatStream::skip_edges`] an O(1) jump, which is how contiguous
//! shards of one canonical stream are handed to parallel workers.

mod edgefile;

pub use edgefile::{
    collect_triples, read_edge_file, read_edge_slice, write_edge_file, write_tsv, EdgeFileReader,
    EdgeStreamHeader, EDGE_FILE_HEADER_LEN, EDGE_FILE_MAGIC, EDGE_FILE_VERSION, EDGE_RECORD_LEN,
};

use thiserror::Error;

use crate::hypersparse::Triple;

/// Quadrant probabilities from the Graph500 reference R-MAT construction.
/// The generator takes arbitrary probabilities; these are the defaults.
pub const GRAPH500_PROBS: [f64; 4] = [0.57, 0.19, 0.19, 0.05];

/// Largest supported R-MAT scale (matrix dimension 2^60).
pub const MAX_SCALE: u32 = 60;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("scale {scale} out of range 1..={MAX_SCALE}")]
    BadScale { scale: u32 },
    #[error("quadrant probability {index} is negative ({value})")]
    NegativeProb { index: usize, value: f64 },
    #[error("quadrant probabilities sum to {sum}, expected 1 within 1e-12")]
    BadProbSum { sum: f64 },
    #[error("stream produced {actual} edges, header promised {expected}")]
    StreamLength { expected: u64, actual: u64 },
    #[error("bad magic at byte offset {offset}: not an edge file")]
    BadMagic { offset: u64 },
    #[error("unsupported edge file version {found} at byte offset {offset}")]
    BadVersion { found: u32, offset: u64 },
    #[error("edge file truncated at byte offset {offset}")]
    Truncated { offset: u64 },
    #[error("slice {start}..{end} out of range for a file of {num_edges} edges")]
    SliceOutOfRange { start: u64, end: u64, num_edges: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// SplitMix64: state advances by a fixed odd constant, output mixes the
/// state through two xor-multiply rounds. Chosen because the constant stride
/// makes skipping n draws a single wrapping multiply.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Advances the generator as if `n` draws had been taken.
    pub fn skip(&mut self, n: u64) {
        self.state = self.state.wrapping_add(GAMMA.wrapping_mul(n));
    }
}

/// Parameters of one deterministic R-MAT stream.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RmatParams {
    /// Matrix dimension is 2^scale x 2^scale.
    pub scale: u32,
    pub num_edges: u64,
    /// Quadrant probabilities (a, b, c, d): top-left, top-right,
    /// bottom-left, bottom-right. Must be nonnegative and sum to 1.
    pub probs: [f64; 4],
    pub seed: u64,
}

impl RmatParams {
    pub fn new(scale: u32, num_edges: u64, seed: u64) -> Self {
        RmatParams {
            scale,
            num_edges,
            probs: GRAPH500_PROBS,
            seed,
        }
    }

    pub fn with_probs(mut self, probs: [f64; 4]) -> Self {
        self.probs = probs;
        self
    }

    pub fn dim(&self) -> u64 {
        1u64 << self.scale
    }

    pub fn validate(&self) -> Result<(), StreamError> {
        if self.scale == 0 || self.scale > MAX_SCALE {
            return Err(StreamError::BadScale { scale: self.scale });
        }
        for (index, &value) in self.probs.iter().enumerate() {
            if value < 0.0 {
                return Err(StreamError::NegativeProb { index, value });
            }
        }
        let sum: f64 = self.probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(StreamError::BadProbSum { sum });
        }
        Ok(())
    }
}

/// Converts a probability to a cumulative 2^64-scaled integer threshold.
/// The scaling multiply is by a power of two, so it is exact; the only
/// rounding is the one carried by the probability itself.
fn fixed_threshold(p: f64) -> u128 {
    let scaled = (p.clamp(0.0, 1.0)) * 18_446_744_073_709_551_616.0; // 2^64
    scaled as u128
}

/// Iterator over an R-MAT edge stream. Each edge consumes exactly `scale`
/// PRNG draws: one quadrant choice per bit level, most significant first.
/// Emitted triples always carry `val = 1`; duplicate coordinates are
/// intentional (accumulation merges them downstream).
#[derive(Clone, Debug)]
pub struct RmatStream {
    rng: SplitMix64,
    scale: u32,
    remaining: u64,
    // cumulative thresholds for quadrants a, a+b, a+b+c
    q1: u128,
    q2: u128,
    q3: u128,
}

impl RmatStream {
    pub fn new(params: &RmatParams) -> Result<Self, StreamError> {
        params.validate()?;
        let [a, b, c, _] = params.probs;
        Ok(RmatStream {
            rng: SplitMix64::new(params.seed),
            scale: params.scale,
            remaining: params.num_edges,
            q1: fixed_threshold(a),
            q2: fixed_threshold(a + b),
            q3: fixed_threshold(a + b + c),
        })
    }

    /// Skips `n` edges in O(1) by jumping the PRNG state, so
    /// `stream.skip_edges(k)` yields exactly the suffix the unskipped stream
    /// would after k edges. Skipping past the end leaves an empty stream.
    pub fn skip_edges(&mut self, n: u64) {
        let n = n.min(self.remaining);
        self.rng.skip(n.wrapping_mul(self.scale as u64));
        self.remaining -= n;
    }

    pub fn remaining(&self) -> u64 {
        self.remaining
    }
}

impl Iterator for RmatStream {
    type Item = Triple;

    fn next(&mut self) -> Option<Triple> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let mut row = 0u64;
        let mut col = 0u64;
        for _ in 0..self.scale {
            let draw = self.rng.next_u64() as u128;
            let (row_bit, col_bit) = if draw < self.q1 {
                (0, 0)
            } else if draw < self.q2 {
                (0, 1)
            } else if draw < self.q3 {
                (1, 0)
            } else {
                (1, 1)
            };
            row = (row << 1) | row_bit;
            col = (col << 1) | col_bit;
        }
        Some(Triple::new(row, col, 1))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = usize::try_from(self.remaining).unwrap_or(usize::MAX);
        (n, Some(n))
    }
}

/// Opens the edge stream described by `params`.
pub fn rmat_generate(params: &RmatParams) -> Result<RmatStream, StreamError> {
    RmatStream::new(params)
}
