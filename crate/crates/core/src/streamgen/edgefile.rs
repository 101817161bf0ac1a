//! Binary edge-file format, so benchmark workloads can be generated once and
//! timed runs never pay for generation.
//!
//! Layout, all little-endian: 8-byte magic `HHGBEDG1`, u32 version (=1),
//! u32 scale, u64 edge count, then one 24-byte record per edge
//! (u64 row, u64 col, i64 val).

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use super::StreamError;
use crate::hypersparse::Triple;

pub const EDGE_FILE_MAGIC: [u8; 8] = *b"HHGBEDG1";
pub const EDGE_FILE_VERSION: u32 = 1;
pub const EDGE_FILE_HEADER_LEN: u64 = 24;
pub const EDGE_RECORD_LEN: u64 = 24;

/// Parsed edge-file header. The magic is checked on read and not stored.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeStreamHeader {
    pub version: u32,
    pub scale: u32,
    pub num_edges: u64,
}

impl EdgeStreamHeader {
    /// Matrix dimension implied by the scale.
    pub fn dim(&self) -> u64 {
        1u64 << self.scale
    }
}

/// Writes a complete edge file. The stream must produce exactly `num_edges`
/// triples; a shorter or longer stream is a length error (the partially
/// written file is removed).
pub fn write_edge_file(
    path: &Path,
    scale: u32,
    num_edges: u64,
    stream: impl IntoIterator<Item = Triple>,
) -> Result<(), StreamError> {
    let result = write_inner(path, scale, num_edges, stream);
    if result.is_err() {
        let _ = std::fs::remove_file(path);
    }
    result
}

fn write_inner(
    path: &Path,
    scale: u32,
    num_edges: u64,
    stream: impl IntoIterator<Item = Triple>,
) -> Result<(), StreamError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&EDGE_FILE_MAGIC)?;
    w.write_all(&EDGE_FILE_VERSION.to_le_bytes())?;
    w.write_all(&scale.to_le_bytes())?;
    w.write_all(&num_edges.to_le_bytes())?;
    let mut written = 0u64;
    for t in stream {
        if written == num_edges {
            return Err(StreamError::StreamLength {
                expected: num_edges,
                actual: written + 1,
            });
        }
        w.write_all(&t.row.to_le_bytes())?;
        w.write_all(&t.col.to_le_bytes())?;
        w.write_all(&t.val.to_le_bytes())?;
        written += 1;
    }
    if written != num_edges {
        return Err(StreamError::StreamLength {
            expected: num_edges,
            actual: written,
        });
    }
    w.flush()?;
    Ok(())
}

/// Tab-separated export (`row<TAB>col<TAB>val`, decimal), for interop and
/// debugging. Returns the number of rows written.
pub fn write_tsv(path: &Path, stream: impl IntoIterator<Item = Triple>) -> Result<u64, StreamError> {
    let mut w = BufWriter::new(File::create(path)?);
    let mut count = 0u64;
    for t in stream {
        writeln!(w, "{}\t{}\t{}", t.row, t.col, t.val)?;
        count += 1;
    }
    w.flush()?;
    Ok(count)
}

/// Streaming reader over an edge file's records. Yields format errors with
/// the byte offset where the file stopped making sense.
pub struct EdgeFileReader {
    reader: BufReader<File>,
    offset: u64,
    remaining: u64,
}

impl EdgeFileReader {
    pub fn remaining(&self) -> u64 {
        self.remaining
    }
}

impl Iterator for EdgeFileReader {
    type Item = Result<Triple, StreamError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.remaining == 0 {
            return None;
        }
        let mut record = [0u8; EDGE_RECORD_LEN as usize];
        match read_exact_or_offset(&mut self.reader, &mut record, &mut self.offset) {
            Ok(()) => {
                self.remaining -= 1;
                Some(Ok(Triple::new(
                    u64::from_le_bytes(record[0..8].try_into().unwrap()),
                    u64::from_le_bytes(record[8..16].try_into().unwrap()),
                    i64::from_le_bytes(record[16..24].try_into().unwrap()),
                )))
            }
            Err(e) => {
                self.remaining = 0;
                Some(Err(e))
            }
        }
    }
}

fn read_exact_or_offset(
    reader: &mut impl Read,
    buf: &mut [u8],
    offset: &mut u64,
) -> Result<(), StreamError> {
    let mut filled = 0usize;
    while filled < buf.len() {
        let n = reader.read(&mut buf[filled..])?;
        if n == 0 {
            return Err(StreamError::Truncated {
                offset: *offset + filled as u64,
            });
        }
        filled += n;
    }
    *offset += buf.len() as u64;
    Ok(())
}

fn read_header(reader: &mut impl Read, offset: &mut u64) -> Result<EdgeStreamHeader, StreamError> {
    let mut magic = [0u8; 8];
    read_exact_or_offset(reader, &mut magic, offset)?;
    if magic != EDGE_FILE_MAGIC {
        return Err(StreamError::BadMagic { offset: 0 });
    }
    let mut word = [0u8; 4];
    read_exact_or_offset(reader, &mut word, offset)?;
    let version = u32::from_le_bytes(word);
    if version != EDGE_FILE_VERSION {
        return Err(StreamError::BadVersion {
            found: version,
            offset: 8,
        });
    }
    read_exact_or_offset(reader, &mut word, offset)?;
    let scale = u32::from_le_bytes(word);
    let mut long = [0u8; 8];
    read_exact_or_offset(reader, &mut long, offset)?;
    let num_edges = u64::from_le_bytes(long);
    Ok(EdgeStreamHeader {
        version,
        scale,
        num_edges,
    })
}

/// Opens an edge file, validates magic and version, and returns the header
/// plus a streaming record reader.
pub fn read_edge_file(path: &Path) -> Result<(EdgeStreamHeader, EdgeFileReader), StreamError> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut offset = 0u64;
    let header = read_header(&mut reader, &mut offset)?;
    Ok((
        header,
        EdgeFileReader {
            reader,
            offset,
            remaining: header.num_edges,
        },
    ))
}

/// Reads records `start..end` of an edge file by seeking directly to the
/// slice, the file-backed analog of [`super::RmatStream::skip_edges`].
pub fn read_edge_slice(
    path: &Path,
    start: u64,
    end: u64,
) -> Result<(EdgeStreamHeader, EdgeFileReader), StreamError> {
    let (header, reader) = read_edge_file(path)?;
    if start > end || end > header.num_edges {
        return Err(StreamError::SliceOutOfRange {
            start,
            end,
            num_edges: header.num_edges,
        });
    }
    let mut inner = reader.reader;
    let byte_start = EDGE_FILE_HEADER_LEN + start * EDGE_RECORD_LEN;
    inner.seek(SeekFrom::Start(byte_start))?;
    Ok((
        header,
        EdgeFileReader {
            reader: inner,
            offset: byte_start,
            remaining: end - start,
        },
    ))
}

/// Convenience collect that surfaces the first record error.
pub fn collect_triples(reader: EdgeFileReader) -> Result<Vec<Triple>, StreamError> {
    let mut out = Vec::with_capacity(usize::try_from(reader.remaining()).unwrap_or(0));
    for record in reader {
        out.push(record?);
    }
    Ok(out)
}

impl From<StreamError> for io::Error {
    fn from(e: StreamError) -> io::Error {
        io::Error::new(io::ErrorKind::InvalidData, e)
    }
}
