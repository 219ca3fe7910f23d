//! Append-only block store with a hash-linked header chain.
//!
//! One ledger file holds one chain: a magic/mode prefix followed by
//! length-prefixed records. Block records carry the fixed-width header and the
//! full body (objects, chain dictionary, SMT leaves and levels); in
//! `netchain-plus` mode each append is preceded by a record with the MPT nodes
//! it created, so the trie is recoverable from the same file.
//!
//! Bodies are untrusted on load: every block is re-checked against its header
//! (transaction root, chain links, leaf pointers, SMT root) before the store
//! is handed out, so any single-byte corruption of a stored body surfaces as
//! an integrity error rather than bad query answers.

use crate::codec::{self, ByteReader, ByteWriter, CodecError, Digest, DIGEST_LEN};
use crate::index::{self, BlockAds, BlockId, CompoundKey, HashChain, IndexError, Object};
use crate::mpt::MptStore;
use crate::smt::{self, SmtLeaf};
use crate::Mode;
use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};
use thiserror::Error;

const MAGIC: &[u8; 8] = b"NETCHAIN";
const FORMAT_VERSION: u8 = 0x01;
const RECORD_BLOCK: u8 = 0x01;
const RECORD_MPT_NODES: u8 = 0x02;

/// NetChain headers serialize to exactly this many bytes.
pub const HEADER_LEN_NETCHAIN: usize = 112;
/// NetChain-plus headers add the MPT root.
pub const HEADER_LEN_PLUS: usize = 144;

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("codec error: {0}")]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("block {0} does not exist")]
    MissingBlock(BlockId),
    #[error("integrity failure in block {block}: {reason}")]
    Integrity { block: BlockId, reason: String },
    #[error("header chain broken at block {0}")]
    BrokenHeaderChain(BlockId),
    #[error("store is read from a file and already has a writer")]
    AlreadyOpen,
}

/// Fixed-width block header. 112 bytes in `netchain` mode, 144 in
/// `netchain-plus` (the extra 32 are the MPT root).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BlockHeader {
    pub id: BlockId,
    pub timestamp: i64,
    pub prev_hash: Digest,
    pub tx_root: Digest,
    pub h_s: Digest,
    pub h_m: Option<Digest>,
}

impl BlockHeader {
    pub fn mode(&self) -> Mode {
        if self.h_m.is_some() {
            Mode::NetChainPlus
        } else {
            Mode::NetChain
        }
    }

    pub const fn encoded_len(mode: Mode) -> usize {
        match mode {
            Mode::NetChain => HEADER_LEN_NETCHAIN,
            Mode::NetChainPlus => HEADER_LEN_PLUS,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut wtr = ByteWriter::new();
        wtr.put_i64(self.id);
        wtr.put_i64(self.timestamp);
        wtr.put_digest(&self.prev_hash);
        wtr.put_digest(&self.tx_root);
        wtr.put_digest(&self.h_s);
        if let Some(h_m) = &self.h_m {
            wtr.put_digest(h_m);
        }
        wtr.into_vec()
    }

    pub fn decode(bytes: &[u8], mode: Mode) -> Result<Self, CodecError> {
        let mut rdr = ByteReader::new(bytes);
        let header = Self::read_from(&mut rdr, mode)?;
        rdr.finish()?;
        Ok(header)
    }

    fn read_from(rdr: &mut ByteReader, mode: Mode) -> Result<Self, CodecError> {
        Ok(BlockHeader {
            id: rdr.get_i64()?,
            timestamp: rdr.get_i64()?,
            prev_hash: rdr.get_digest()?,
            tx_root: rdr.get_digest()?,
            h_s: rdr.get_digest()?,
            h_m: if mode.is_plus() {
                Some(rdr.get_digest()?)
            } else {
                None
            },
        })
    }

    /// Digest of this header; the next header's `prev_hash`.
    pub fn digest(&self) -> Digest {
        codec::header_digest(&self.encode())
    }
}

#[derive(Clone, Debug)]
pub struct BlockBody {
    pub objects: Vec<Object>,
    pub ads: BlockAds,
}

#[derive(Clone, Debug)]
pub struct Block {
    pub header: BlockHeader,
    pub body: BlockBody,
}

impl Block {
    /// Serialized size of the ADS portion of the body (dictionary, leaves,
    /// levels). This is the per-block storage price of verifiability.
    pub fn ads_encoded_len(&self) -> usize {
        let mut wtr = ByteWriter::new();
        write_ads(&mut wtr, &self.body.ads);
        wtr.len()
    }

    fn encode(&self, mode: Mode) -> Vec<u8> {
        debug_assert_eq!(self.header.mode(), mode);
        let mut wtr = ByteWriter::new();
        wtr.put_raw(&self.header.encode());
        wtr.put_u32(self.body.objects.len() as u32);
        for o in &self.body.objects {
            wtr.put_bytes(&o.u);
            wtr.put_bytes(&o.v);
            wtr.put_bytes(&o.edge_type);
            wtr.put_i64(o.w);
        }
        write_ads(&mut wtr, &self.body.ads);
        wtr.into_vec()
    }

    fn decode(bytes: &[u8], mode: Mode) -> Result<Block, LedgerError> {
        let mut rdr = ByteReader::new(bytes);
        let header = BlockHeader::read_from(&mut rdr, mode)?;
        let block_id = header.id;
        let n_objects = rdr.get_u32()? as usize;
        let mut objects = Vec::with_capacity(n_objects);
        for _ in 0..n_objects {
            let u = rdr.get_bytes()?;
            let v = rdr.get_bytes()?;
            let edge_type = rdr.get_bytes()?;
            let w = rdr.get_i64()?;
            objects.push(
                Object::new(u, v, edge_type, w).map_err(|e| LedgerError::Integrity {
                    block: block_id,
                    reason: e.to_string(),
                })?,
            );
        }
        let ads = read_ads(&mut rdr, mode, block_id)?;
        rdr.finish().map_err(LedgerError::Codec)?;
        let block = Block {
            header,
            body: BlockBody { objects, ads },
        };
        block.check_integrity()?;
        Ok(block)
    }

    /// Re-derives every digest in the body and compares against the header.
    fn check_integrity(&self) -> Result<(), LedgerError> {
        let id = self.header.id;
        let fail = |reason: String| LedgerError::Integrity { block: id, reason };

        if self.body.objects.is_empty() {
            return Err(fail("block has no objects".into()));
        }

        // Transaction root over the raw objects.
        let tx_leaves: Vec<Digest> = self
            .body
            .objects
            .iter()
            .map(|o| codec::hash(&o.canonical_bytes()))
            .collect();
        if smt::merkle_root(tx_leaves) != self.header.tx_root {
            return Err(fail("transaction root mismatch".into()));
        }

        // The chain dictionary must be exactly what the objects produce.
        let mut groups: BTreeMap<CompoundKey, Vec<_>> = BTreeMap::new();
        for o in &self.body.objects {
            groups.entry(o.key()).or_default().push(o.value());
        }
        if groups.len() != self.body.ads.dict.len() {
            return Err(fail("dictionary key set mismatch".into()));
        }
        for (key, values) in groups {
            let stored = self
                .body
                .ads
                .dict
                .get(&key)
                .ok_or_else(|| fail(format!("missing chain for key {key:?}")))?;
            let rebuilt = index::build_chain(values).map_err(|e| fail(e.to_string()))?;
            if rebuilt != *stored {
                return Err(fail(format!("chain mismatch for key {key:?}")));
            }
        }

        // Leaves must anchor the chain heads, and the tree must reproduce H_s.
        let leaves = self.body.ads.tree.leaves();
        if leaves.len() != self.body.ads.dict.len() {
            return Err(fail("leaf count differs from dictionary".into()));
        }
        for leaf in leaves {
            let plus = self.header.h_m.is_some();
            if leaf.id_pre.is_some() != plus {
                return Err(fail("leaf link field disagrees with mode".into()));
            }
            let chain = self
                .body
                .ads
                .dict
                .get(&leaf.key)
                .ok_or_else(|| fail(format!("leaf without chain: {:?}", leaf.key)))?;
            if leaf.ptr_h != chain.head_digest() {
                return Err(fail(format!("leaf head pointer mismatch: {:?}", leaf.key)));
            }
        }
        let rebuilt_tree =
            smt::build(leaves.to_vec()).map_err(|e| fail(format!("tree rebuild: {e}")))?;
        if rebuilt_tree.root() != self.header.h_s {
            return Err(fail("SMT root differs from header H_s".into()));
        }
        if rebuilt_tree.levels() != self.body.ads.tree.levels() {
            return Err(fail("stored SMT levels differ from rebuilt levels".into()));
        }
        Ok(())
    }
}

fn write_ads(wtr: &mut ByteWriter, ads: &BlockAds) {
    wtr.put_u32(ads.dict.len() as u32);
    for (key, chain) in &ads.dict {
        wtr.put_bytes(&key.u);
        wtr.put_bytes(&key.edge_type);
        wtr.put_u32(chain.len() as u32);
        for item in chain.items() {
            wtr.put_bytes(&item.value.v);
            wtr.put_i64(item.value.w);
            wtr.put_ptr(item.ptr.as_ref());
        }
    }
    let leaves = ads.tree.leaves();
    wtr.put_u32(leaves.len() as u32);
    for leaf in leaves {
        wtr.put_bytes(&leaf.key.u);
        wtr.put_bytes(&leaf.key.edge_type);
        wtr.put_digest(&leaf.ptr_h);
        match leaf.id_pre {
            None => wtr.put_u8(0x00),
            Some(id) => {
                wtr.put_u8(0x01);
                wtr.put_i64(id);
            }
        }
    }
    let levels = ads.tree.levels();
    wtr.put_u32(levels.len() as u32);
    for level in levels {
        wtr.put_u32(level.len() as u32);
        for d in level {
            wtr.put_digest(d);
        }
    }
}

fn read_ads(rdr: &mut ByteReader, mode: Mode, block: BlockId) -> Result<BlockAds, LedgerError> {
    let fail = |reason: String| LedgerError::Integrity { block, reason };
    let n_keys = rdr.get_u32()? as usize;
    let mut dict = BTreeMap::new();
    for _ in 0..n_keys {
        let key = CompoundKey::new(rdr.get_bytes()?, rdr.get_bytes()?);
        let n_items = rdr.get_u32()? as usize;
        let mut items = Vec::with_capacity(n_items);
        for _ in 0..n_items {
            let v = rdr.get_bytes()?;
            let w = rdr.get_i64()?;
            let ptr = rdr.get_ptr()?;
            items.push(index::ChainItem {
                value: index::CompoundValue { v, w },
                ptr,
            });
        }
        let chain = HashChain::from_stored_items(items).map_err(fail)?;
        dict.insert(key, chain);
    }
    let n_leaves = rdr.get_u32()? as usize;
    let mut leaves = Vec::with_capacity(n_leaves);
    for _ in 0..n_leaves {
        let key = CompoundKey::new(rdr.get_bytes()?, rdr.get_bytes()?);
        let ptr_h = rdr.get_digest()?;
        let id_pre = match rdr.get_u8()? {
            0x00 => None,
            0x01 => Some(rdr.get_i64()?),
            other => {
                return Err(fail(format!("bad id_pre presence byte {other:#04x}")));
            }
        };
        if id_pre.is_some() != mode.is_plus() {
            return Err(fail("leaf link field disagrees with file mode".into()));
        }
        leaves.push(SmtLeaf { key, ptr_h, id_pre });
    }
    let tree = smt::build(leaves).map_err(|e| fail(format!("tree rebuild: {e}")))?;
    let n_levels = rdr.get_u32()? as usize;
    let mut stored_levels = Vec::with_capacity(n_levels);
    for _ in 0..n_levels {
        let n = rdr.get_u32()? as usize;
        let mut level = Vec::with_capacity(n);
        for _ in 0..n {
            level.push(rdr.get_digest()?);
        }
        stored_levels.push(level);
    }
    if tree.levels() != stored_levels {
        return Err(fail("stored SMT levels differ from rebuilt levels".into()));
    }
    Ok(BlockAds { dict, tree })
}

/// The light client's view: just the ordered headers.
#[derive(Clone, Debug, Default)]
pub struct HeaderChain {
    headers: Vec<BlockHeader>,
}

impl HeaderChain {
    pub fn new(headers: Vec<BlockHeader>) -> Self {
        HeaderChain { headers }
    }

    pub fn len(&self) -> usize {
        self.headers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.headers.is_empty()
    }

    pub fn get(&self, id: BlockId) -> Option<&BlockHeader> {
        if id < 0 {
            return None;
        }
        self.headers.get(id as usize)
    }

    pub fn last(&self) -> Option<&BlockHeader> {
        self.headers.last()
    }

    pub fn iter(&self) -> impl Iterator<Item = &BlockHeader> {
        self.headers.iter()
    }

    /// Checks ids are contiguous from zero and every `prev_hash` links.
    pub fn verify_links(&self) -> Result<(), LedgerError> {
        let mut prev: Option<&BlockHeader> = None;
        for (i, h) in self.headers.iter().enumerate() {
            let ok = h.id == i as BlockId
                && match prev {
                    None => h.prev_hash == Digest::ZERO,
                    Some(p) => h.prev_hash == p.digest(),
                };
            if !ok {
                return Err(LedgerError::BrokenHeaderChain(i as BlockId));
            }
            prev = Some(h);
        }
        Ok(())
    }

    /// Raw concatenation of the fixed-width headers: exactly `112 * n` or
    /// `144 * n` bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for h in &self.headers {
            out.extend_from_slice(&h.encode());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], mode: Mode) -> Result<Self, CodecError> {
        let size = BlockHeader::encoded_len(mode);
        if !bytes.len().is_multiple_of(size) {
            return Err(CodecError::BadLength {
                len: bytes.len(),
                remaining: bytes.len() % size,
            });
        }
        let headers = bytes
            .chunks(size)
            .map(|chunk| BlockHeader::decode(chunk, mode))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(HeaderChain { headers })
    }
}

/// The full node's store: every block, plus the global MPT in plus mode.
/// One writer; sealed blocks never change.
pub struct Store {
    mode: Mode,
    blocks: Vec<Block>,
    mpt: Option<MptStore>,
    sink: Option<File>,
    path: Option<PathBuf>,
}

impl Store {
    /// A store that lives only in memory (used heavily by tests).
    pub fn in_memory(mode: Mode) -> Self {
        Store {
            mode,
            blocks: Vec::new(),
            mpt: mode.is_plus().then(MptStore::new),
            sink: None,
            path: None,
        }
    }

    /// Creates a fresh ledger file. Fails if the file already exists.
    pub fn create(path: impl AsRef<Path>, mode: Mode) -> Result<Self, LedgerError> {
        let mut file = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(path.as_ref())?;
        file.write_all(MAGIC)?;
        file.write_all(&[FORMAT_VERSION, mode.as_byte()])?;
        file.flush()?;
        Ok(Store {
            mode,
            blocks: Vec::new(),
            mpt: mode.is_plus().then(MptStore::new),
            sink: Some(file),
            path: Some(path.as_ref().to_path_buf()),
        })
    }

    /// Opens and fully re-verifies an existing ledger file.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, LedgerError> {
        let mut bytes = Vec::new();
        File::open(path.as_ref())?.read_to_end(&mut bytes)?;
        let mut rdr = ByteReader::new(&bytes);

        let magic = rdr.get_raw(MAGIC.len())?;
        if magic != MAGIC {
            return Err(CodecError::BadMagic.into());
        }
        let version = rdr.get_u8()?;
        if version != FORMAT_VERSION {
            return Err(CodecError::BadVersion(version).into());
        }
        let mode = Mode::from_byte(rdr.get_u8()?)?;

        let mut blocks: Vec<Block> = Vec::new();
        let mut node_log: Vec<Vec<u8>> = Vec::new();
        while rdr.remaining() > 0 {
            let tag = rdr.get_u8()?;
            let len = rdr.get_u32()? as usize;
            let payload = rdr.get_raw(len)?;
            match tag {
                RECORD_BLOCK => blocks.push(Block::decode(payload, mode)?),
                RECORD_MPT_NODES => {
                    let mut nrdr = ByteReader::new(payload);
                    let count = nrdr.get_u32()? as usize;
                    for _ in 0..count {
                        node_log.push(nrdr.get_bytes()?);
                    }
                    nrdr.finish().map_err(LedgerError::Codec)?;
                }
                found => {
                    return Err(CodecError::BadTag {
                        found,
                        offset: rdr.position() - len - 5,
                    }
                    .into())
                }
            }
        }

        // Header linkage across the whole chain.
        let chain = HeaderChain::new(blocks.iter().map(|b| b.header.clone()).collect());
        chain.verify_links()?;

        let mpt = if mode.is_plus() {
            let root = blocks
                .last()
                .and_then(|b| b.header.h_m)
                .unwrap_or_else(crate::mpt::empty_root);
            let store = MptStore::from_node_log(&node_log, root)?;
            // Every key of every block must still resolve under the tip root;
            // this catches corruption or loss inside the node log.
            for block in &blocks {
                for key in block.body.ads.dict.keys() {
                    match store.try_get_at(root, key) {
                        Ok((Some(_), _)) => {}
                        Ok((None, _)) => {
                            return Err(LedgerError::Integrity {
                                block: block.header.id,
                                reason: format!("MPT lost the entry for key {key:?}"),
                            })
                        }
                        Err(missing) => {
                            return Err(LedgerError::Integrity {
                                block: block.header.id,
                                reason: format!("MPT node log is missing node {missing}"),
                            })
                        }
                    }
                }
            }
            Some(store)
        } else {
            if !node_log.is_empty() {
                return Err(LedgerError::Integrity {
                    block: 0,
                    reason: "plain-mode file contains MPT records".into(),
                });
            }
            None
        };

        let sink = OpenOptions::new().append(true).open(path.as_ref())?;
        Ok(Store {
            mode,
            blocks,
            mpt,
            sink: Some(sink),
            path: Some(path.as_ref().to_path_buf()),
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn mpt(&self) -> Option<&MptStore> {
        self.mpt.as_ref()
    }

    /// Builds the ADS over `objects`, seals the next block and persists it.
    pub fn append(&mut self, objects: Vec<Object>) -> Result<BlockId, LedgerError> {
        let id = self.blocks.len() as BlockId;
        let (ads, h_m) = index::build_block_ads(&objects, self.mode, self.mpt.as_mut(), id)?;
        let new_nodes = self
            .mpt
            .as_mut()
            .map(|m| m.drain_new_nodes())
            .unwrap_or_default();

        let tx_leaves: Vec<Digest> = objects
            .iter()
            .map(|o| codec::hash(&o.canonical_bytes()))
            .collect();
        let prev_hash = match self.blocks.last() {
            None => Digest::ZERO,
            Some(prev) => prev.header.digest(),
        };
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs() as i64)
            .unwrap_or(0);
        let header = BlockHeader {
            id,
            timestamp,
            prev_hash,
            tx_root: smt::merkle_root(tx_leaves),
            h_s: ads.tree.root(),
            h_m,
        };
        let block = Block {
            header,
            body: BlockBody { objects, ads },
        };

        if let Some(sink) = &mut self.sink {
            if self.mode.is_plus() {
                let mut wtr = ByteWriter::new();
                wtr.put_u32(new_nodes.len() as u32);
                for enc in &new_nodes {
                    wtr.put_bytes(enc);
                }
                write_record(sink, RECORD_MPT_NODES, &wtr.into_vec())?;
            }
            write_record(sink, RECORD_BLOCK, &block.encode(self.mode))?;
            sink.flush()?;
        }

        self.blocks.push(block);
        Ok(id)
    }

    pub fn get_block(&self, id: BlockId) -> Result<&Block, LedgerError> {
        if id < 0 {
            return Err(LedgerError::MissingBlock(id));
        }
        self.blocks
            .get(id as usize)
            .ok_or(LedgerError::MissingBlock(id))
    }

    pub fn headers(&self) -> HeaderChain {
        HeaderChain::new(self.blocks.iter().map(|b| b.header.clone()).collect())
    }

    /// Writes the raw header concatenation for the light client.
    pub fn export_headers(&self, path: impl AsRef<Path>) -> Result<(), LedgerError> {
        let mut file = File::create(path.as_ref())?;
        file.write_all(&self.headers().to_bytes())?;
        file.flush()?;
        Ok(())
    }
}

fn write_record(sink: &mut File, tag: u8, payload: &[u8]) -> Result<(), LedgerError> {
    sink.write_all(&[tag])?;
    sink.write_all(&(payload.len() as u32).to_be_bytes())?;
    sink.write_all(payload)?;
    Ok(())
}

/// Byte length of a serialized header, exposed for size accounting.
pub fn header_len(mode: Mode) -> usize {
    BlockHeader::encoded_len(mode)
}

#[allow(dead_code)]
const _: () = {
    assert!(HEADER_LEN_NETCHAIN == 8 + 8 + 3 * DIGEST_LEN);
    assert!(HEADER_LEN_PLUS == 8 + 8 + 4 * DIGEST_LEN);
};
