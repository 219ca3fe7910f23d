//! Canonical byte encodings and the hash primitive.
//!
//! Every digest in the system is computed over the encodings defined here, so
//! proofs produced by one process verify bit-exactly in another. The rules are:
//!
//! - all integers are fixed-width big-endian,
//! - all byte strings are length-prefixed (u32 big-endian),
//! - every hashed structure starts with a one-byte domain tag, so a chain item
//!   can never be replayed as an SMT leaf, a leaf as an internal node, etc.
//!
//! The exact layouts are documented in `docs/encoding.md`.

use sha2::{Digest as _, Sha256};
use std::fmt;
use thiserror::Error;

/// Domain tag for ordered hash chain items.
pub const TAG_CHAIN_ITEM: u8 = 0x01;
/// Domain tag for SMT leaf nodes.
pub const TAG_SMT_LEAF: u8 = 0x02;
/// Domain tag for internal Merkle nodes (SMT and transaction tree).
pub const TAG_MERKLE_INTERNAL: u8 = 0x03;
/// Domain tag for MPT nodes.
pub const TAG_MPT_NODE: u8 = 0x04;
/// Domain tag for block headers.
pub const TAG_HEADER: u8 = 0x05;
/// Domain tag for raw objects (transaction tree leaves).
pub const TAG_OBJECT: u8 = 0x06;

/// Tag byte marking an absent (`⊥`) hash pointer.
pub const PTR_ABSENT: u8 = 0x00;
/// Tag byte marking a present hash pointer.
pub const PTR_PRESENT: u8 = 0x01;

pub const DIGEST_LEN: usize = 32;

/// A 32-byte SHA-256 digest. Equality is byte equality.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest(pub [u8; DIGEST_LEN]);

impl Digest {
    pub const ZERO: Digest = Digest([0u8; DIGEST_LEN]);

    pub fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, CodecError> {
        let arr: [u8; DIGEST_LEN] = bytes.try_into().map_err(|_| CodecError::BadDigestLen)?;
        Ok(Digest(arr))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// SHA-256 of an arbitrary payload. Pure and deterministic.
pub fn hash(payload: &[u8]) -> Digest {
    let mut h = Sha256::new();
    h.update(payload);
    Digest(h.finalize().into())
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("unexpected end of input at offset {0}")]
    UnexpectedEof(usize),
    #[error("unexpected tag byte {found:#04x} at offset {offset}")]
    BadTag { found: u8, offset: usize },
    #[error("digest slice is not {DIGEST_LEN} bytes")]
    BadDigestLen,
    #[error("{0} bytes of trailing input")]
    TrailingBytes(usize),
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unknown format version {0}")]
    BadVersion(u8),
    #[error("unknown mode byte {0:#04x}")]
    BadMode(u8),
    #[error("length {len} exceeds remaining input {remaining}")]
    BadLength { len: usize, remaining: usize },
    #[error("invalid field: {0}")]
    BadField(&'static str),
}

/// Append-only writer for the canonical formats.
#[derive(Default)]
pub struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put_u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn put_u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    pub fn put_u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    pub fn put_i64(&mut self, v: i64) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    pub fn put_raw(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    /// u32 length prefix followed by the raw bytes.
    pub fn put_bytes(&mut self, bytes: &[u8]) {
        self.put_u32(bytes.len() as u32);
        self.put_raw(bytes);
    }

    pub fn put_digest(&mut self, d: &Digest) {
        self.put_raw(&d.0);
    }

    /// Optional hash pointer: `0x00` + 32 zero bytes for `⊥`, else `0x01` + digest.
    pub fn put_ptr(&mut self, ptr: Option<&Digest>) {
        match ptr {
            None => {
                self.put_u8(PTR_ABSENT);
                self.put_raw(&[0u8; DIGEST_LEN]);
            }
            Some(d) => {
                self.put_u8(PTR_PRESENT);
                self.put_digest(d);
            }
        }
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.buf
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }
}

/// Cursor over a byte slice with explicit EOF errors.
pub struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.remaining() < n {
            return Err(CodecError::UnexpectedEof(self.pos));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn get_u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    pub fn get_u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn get_u64(&mut self) -> Result<u64, CodecError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn get_i64(&mut self) -> Result<i64, CodecError> {
        Ok(i64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn get_raw(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        self.take(n)
    }

    pub fn get_bytes(&mut self) -> Result<Vec<u8>, CodecError> {
        let len = self.get_u32()? as usize;
        if len > self.remaining() {
            return Err(CodecError::BadLength {
                len,
                remaining: self.remaining(),
            });
        }
        Ok(self.take(len)?.to_vec())
    }

    pub fn get_digest(&mut self) -> Result<Digest, CodecError> {
        Digest::from_slice(self.take(DIGEST_LEN)?)
    }

    pub fn get_ptr(&mut self) -> Result<Option<Digest>, CodecError> {
        let offset = self.pos;
        let tag = self.get_u8()?;
        match tag {
            PTR_ABSENT => {
                let zeros = self.take(DIGEST_LEN)?;
                if zeros.iter().any(|&b| b != 0) {
                    return Err(CodecError::BadField("absent pointer must be all zeros"));
                }
                Ok(None)
            }
            PTR_PRESENT => Ok(Some(self.get_digest()?)),
            found => Err(CodecError::BadTag { found, offset }),
        }
    }

    pub fn expect_u8(&mut self, want: u8) -> Result<(), CodecError> {
        let offset = self.pos;
        let found = self.get_u8()?;
        if found != want {
            return Err(CodecError::BadTag { found, offset });
        }
        Ok(())
    }

    pub fn finish(&self) -> Result<(), CodecError> {
        if self.remaining() > 0 {
            return Err(CodecError::TrailingBytes(self.remaining()));
        }
        Ok(())
    }
}

/// Canonical encoding of a chain item: tag, end vertex, weight, pointer.
pub fn encode_chain_item(v: &[u8], w: i64, ptr: Option<&Digest>) -> Vec<u8> {
    let mut wtr = ByteWriter::new();
    wtr.put_u8(TAG_CHAIN_ITEM);
    wtr.put_bytes(v);
    wtr.put_i64(w);
    wtr.put_ptr(ptr);
    wtr.into_vec()
}

/// Decodes `(v, w, ptr)` from an `encode_chain_item` payload.
pub fn decode_chain_item(buf: &[u8]) -> Result<(Vec<u8>, i64, Option<Digest>), CodecError> {
    let mut rdr = ByteReader::new(buf);
    rdr.expect_u8(TAG_CHAIN_ITEM)?;
    let v = rdr.get_bytes()?;
    let w = rdr.get_i64()?;
    let ptr = rdr.get_ptr()?;
    rdr.finish()?;
    Ok((v, w, ptr))
}

/// Canonical encoding of an SMT leaf: tag, compound key, head pointer and, when
/// inter-block links are enabled, the previous block id (`-1` when none).
pub fn encode_leaf(u: &[u8], edge_type: &[u8], ptr_h: &Digest, id_pre: Option<i64>) -> Vec<u8> {
    let mut wtr = ByteWriter::new();
    wtr.put_u8(TAG_SMT_LEAF);
    wtr.put_bytes(u);
    wtr.put_bytes(edge_type);
    wtr.put_digest(ptr_h);
    if let Some(id) = id_pre {
        wtr.put_i64(id);
    }
    wtr.into_vec()
}

/// Canonical encoding of a raw object (transaction tree leaf).
pub fn encode_object(u: &[u8], v: &[u8], edge_type: &[u8], w: i64) -> Vec<u8> {
    let mut wtr = ByteWriter::new();
    wtr.put_u8(TAG_OBJECT);
    wtr.put_bytes(u);
    wtr.put_bytes(v);
    wtr.put_bytes(edge_type);
    wtr.put_i64(w);
    wtr.into_vec()
}

/// Digest of an internal Merkle node from its two children.
pub fn internal_digest(left: &Digest, right: &Digest) -> Digest {
    let mut buf = [0u8; 1 + 2 * DIGEST_LEN];
    buf[0] = TAG_MERKLE_INTERNAL;
    buf[1..1 + DIGEST_LEN].copy_from_slice(&left.0);
    buf[1 + DIGEST_LEN..].copy_from_slice(&right.0);
    hash(&buf)
}

/// Digest of an MPT node from its canonical (untagged) encoding.
pub fn mpt_node_digest(encoding: &[u8]) -> Digest {
    let mut buf = Vec::with_capacity(1 + encoding.len());
    buf.push(TAG_MPT_NODE);
    buf.extend_from_slice(encoding);
    hash(&buf)
}

/// Digest of a block header from its fixed-width serialization.
pub fn header_digest(header_bytes: &[u8]) -> Digest {
    let mut buf = Vec::with_capacity(1 + header_bytes.len());
    buf.push(TAG_HEADER);
    buf.extend_from_slice(header_bytes);
    hash(&buf)
}
