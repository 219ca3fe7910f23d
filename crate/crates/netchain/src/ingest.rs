//! Dataset ingestion: SNAP-style edge lists parsed into object streams and
//! batched into blocks.
//!
//! Input lines are whitespace-separated `u v [w]` records; lines starting
//! with `#` and blank lines are skipped. Directed datasets produce one object
//! per line, undirected datasets two (one per direction). Edges without a
//! weight column get a synthetic weight in `[1, 100]`, derived
//! deterministically from `(seed, u, v, type)` so reruns build bit-identical
//! chains.

use crate::codec::{self, ByteWriter};
use crate::index::{BlockId, EdgeType, Object, VertexId, Weight};
use crate::ledger::{LedgerError, Store};
use std::fs::File;
use std::io::{BufRead, BufReader, Lines};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("objects_per_block must be at least 1")]
    EmptyPlan,
}

/// One parsed edge list line (or its reverse, for undirected graphs).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct EdgeRecord {
    pub u: VertexId,
    pub v: VertexId,
    pub w: Option<Weight>,
    pub edge_type: EdgeType,
}

/// How a stream is cut into blocks and how synthetic weights are seeded.
#[derive(Clone, Copy, Debug)]
pub struct BatchPlan {
    pub objects_per_block: usize,
    pub seed: u64,
}

/// Streaming reader over a SNAP edge list file.
pub struct SnapReader {
    lines: Lines<BufReader<File>>,
    line_no: usize,
    default_type: EdgeType,
    directed: bool,
    pending: Option<EdgeRecord>,
}

impl SnapReader {
    fn parse_line(&self, line: &str) -> Result<Option<EdgeRecord>, IngestError> {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            return Ok(None);
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 2 && fields.len() != 3 {
            return Err(IngestError::Parse {
                line: self.line_no,
                reason: format!("expected 2 or 3 columns, found {}", fields.len()),
            });
        }
        let w = match fields.get(2) {
            None => None,
            Some(raw) => Some(raw.parse::<Weight>().map_err(|e| IngestError::Parse {
                line: self.line_no,
                reason: format!("bad weight `{raw}`: {e}"),
            })?),
        };
        Ok(Some(EdgeRecord {
            u: fields[0].as_bytes().to_vec(),
            v: fields[1].as_bytes().to_vec(),
            w,
            edge_type: self.default_type.clone(),
        }))
    }
}

impl Iterator for SnapReader {
    type Item = Result<EdgeRecord, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        if let Some(rev) = self.pending.take() {
            return Some(Ok(rev));
        }
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            match self.parse_line(&line) {
                Err(e) => return Some(Err(e)),
                Ok(None) => continue,
                Ok(Some(record)) => {
                    if !self.directed && record.u != record.v {
                        self.pending = Some(EdgeRecord {
                            u: record.v.clone(),
                            v: record.u.clone(),
                            w: record.w,
                            edge_type: record.edge_type.clone(),
                        });
                    }
                    return Some(Ok(record));
                }
            }
        }
    }
}

/// Opens a SNAP edge list. `directed = false` emits each edge in both
/// directions so either endpoint can serve as the query vertex.
pub fn parse_snap(
    path: impl AsRef<Path>,
    default_type: impl Into<EdgeType>,
    directed: bool,
) -> Result<SnapReader, IngestError> {
    let file = File::open(path.as_ref())?;
    Ok(SnapReader {
        lines: BufReader::new(file).lines(),
        line_no: 0,
        default_type: default_type.into(),
        directed,
        pending: None,
    })
}

/// Synthetic weight in `[1, 100]` for a record lacking one: the first eight
/// bytes of `H(seed ‖ u ‖ v ‖ type)` reduced mod 100.
pub fn synthetic_weight(seed: u64, u: &[u8], v: &[u8], edge_type: &[u8]) -> Weight {
    let mut wtr = ByteWriter::new();
    wtr.put_u64(seed);
    wtr.put_bytes(u);
    wtr.put_bytes(v);
    wtr.put_bytes(edge_type);
    let digest = codec::hash(&wtr.into_vec());
    let x = u64::from_be_bytes(digest.0[..8].try_into().expect("8 bytes"));
    1 + (x % 100) as Weight
}

/// Turns edge records into objects, filling in missing weights from the seed.
pub fn assign_weights<I>(records: I, seed: u64) -> impl Iterator<Item = Result<Object, IngestError>>
where
    I: Iterator<Item = Result<EdgeRecord, IngestError>>,
{
    records.map(move |record| {
        let r = record?;
        let w =
            r.w.unwrap_or_else(|| synthetic_weight(seed, &r.u, &r.v, &r.edge_type));
        Object::new(r.u, r.v, r.edge_type, w).map_err(|e| IngestError::Parse {
            line: 0,
            reason: e.to_string(),
        })
    })
}

/// Appends the object stream to the store in chunks of
/// `plan.objects_per_block`, in stream order. Returns the new block ids.
pub fn batch<I>(
    objects: I,
    plan: &BatchPlan,
    store: &mut Store,
) -> Result<Vec<BlockId>, IngestError>
where
    I: Iterator<Item = Result<Object, IngestError>>,
{
    if plan.objects_per_block == 0 {
        return Err(IngestError::EmptyPlan);
    }
    let mut ids = Vec::new();
    let mut buffer: Vec<Object> = Vec::with_capacity(plan.objects_per_block);
    for object in objects {
        buffer.push(object?);
        if buffer.len() == plan.objects_per_block {
            ids.push(store.append(std::mem::take(&mut buffer))?);
        }
    }
    if !buffer.is_empty() {
        ids.push(store.append(buffer)?);
    }
    Ok(ids)
}
