//! Service-provider query engines.
//!
//! `search_netchain` answers a windowed top-k query with one (non-)existence
//! proof per block in the window and the local top-`min(l,k)` chain prefix per
//! matched block.
//!
//! `search_netchain_plus` first resolves the boundary blocks through the
//! global MPT and the per-leaf `id_pre` links, then runs two scans over the
//! matched blocks only: the first collects every compound value and fixes the
//! global top-k, the second emits per block the prefix of chain items that are
//! in the top-k plus one out-boundary item proving nothing was withheld.
//!
//! The serialized [`Response`] is the artifact's wire format: the CLI writes
//! it to a file and the verifier consumes it.

use crate::codec::{ByteReader, ByteWriter, CodecError};
use crate::index::{BlockId, ChainItem, CompoundKey, CompoundValue, EdgeType, VertexId, Weight};
use crate::ledger::{LedgerError, Store};
use crate::mpt::MptProof;
use crate::smt::{self, MerkleProof, NonExistenceProof, SmtLeaf};
use crate::Mode;
use std::cmp::Reverse;
use std::collections::{BTreeMap, HashSet};
use thiserror::Error;

const RESPONSE_MAGIC: &[u8; 6] = b"NCRESP";
const RESPONSE_VERSION: u8 = 0x01;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("query window [{lb},{ub}] is outside the stored chain of {len} blocks")]
    WindowOutOfRange {
        lb: BlockId,
        ub: BlockId,
        len: usize,
    },
    #[error("store speaks {actual}, but the {expected} engine was invoked")]
    ModeMismatch { expected: Mode, actual: Mode },
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QueryError {
    #[error("query vertex must be nonempty")]
    EmptyVertex,
    #[error("query edge type must be nonempty")]
    EmptyType,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("invalid window [{lb},{ub}]")]
    BadWindow { lb: BlockId, ub: BlockId },
}

/// A top-k graph query `{u_q, type_q, k, [lb, ub]}`. Construction validates
/// the invariants, so a `Query` in hand is always well-formed.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Query {
    u_q: VertexId,
    type_q: EdgeType,
    k: usize,
    lb: BlockId,
    ub: BlockId,
}

impl Query {
    pub fn new(
        u_q: impl Into<VertexId>,
        type_q: impl Into<EdgeType>,
        k: usize,
        lb: BlockId,
        ub: BlockId,
    ) -> Result<Self, QueryError> {
        let (u_q, type_q) = (u_q.into(), type_q.into());
        if u_q.is_empty() {
            return Err(QueryError::EmptyVertex);
        }
        if type_q.is_empty() {
            return Err(QueryError::EmptyType);
        }
        if k == 0 {
            return Err(QueryError::ZeroK);
        }
        if lb < 0 || lb > ub {
            return Err(QueryError::BadWindow { lb, ub });
        }
        Ok(Query {
            u_q,
            type_q,
            k,
            lb,
            ub,
        })
    }

    pub fn u(&self) -> &[u8] {
        &self.u_q
    }

    pub fn edge_type(&self) -> &[u8] {
        &self.type_q
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn lb(&self) -> BlockId {
        self.lb
    }

    pub fn ub(&self) -> BlockId {
        self.ub
    }

    pub fn key(&self) -> CompoundKey {
        CompoundKey::new(self.u_q.clone(), self.type_q.clone())
    }

    pub fn window(&self) -> std::ops::RangeInclusive<BlockId> {
        self.lb..=self.ub
    }
}

/// Result for one block: the returned chain prefix, or the non-match marker
/// (`⊥`) in plain mode.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BlockResult {
    pub block_id: BlockId,
    pub matched: bool,
    pub items: Vec<ChainItem>,
}

/// Membership proof attached to one block's answer.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum BlockProof {
    Existence(MerkleProof),
    NonExistence(NonExistenceProof),
}

/// Everything the SP sends back: per-block results `R`, the verification
/// object `VO`, and — with inter-block links — the MPT proof and the
/// out-boundary block id `b`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Response {
    pub mode: Mode,
    pub query: Query,
    pub results: BTreeMap<BlockId, BlockResult>,
    pub proofs: BTreeMap<BlockId, BlockProof>,
    pub mpt_proof: Option<MptProof>,
    pub out_boundary: Option<BlockId>,
}

impl Response {
    /// Number of per-block membership proofs in the VO. The MPT proof sits in
    /// its own field and is not counted here: a single matched-block window
    /// carries exactly one proof in either protocol.
    pub fn proof_count(&self) -> usize {
        self.proofs.len()
    }

    /// Total number of chain items returned across all blocks.
    pub fn item_count(&self) -> usize {
        self.results.values().map(|r| r.items.len()).sum()
    }

    /// Number of blocks claimed as matched.
    pub fn matched_count(&self) -> usize {
        self.results.values().filter(|r| r.matched).count()
    }
}

/// Boundary resolution for a plus-mode query: the right boundary block `a`
/// (latest matched block at or below `ub`), the out boundary block `b`, and
/// whichever proof anchors `b`.
#[derive(Clone, Debug)]
pub struct Boundaries {
    pub right: Option<BlockId>,
    pub out: Option<BlockId>,
    pub mpt_proof: Option<MptProof>,
    pub boundary_proof: Option<MerkleProof>,
}

/// A chain item instance addressed by block and 1-based chain position, with
/// the fields needed for ranking and reporting.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Candidate {
    pub w: Weight,
    pub block: BlockId,
    pub pos: u32,
    pub v: VertexId,
}

/// Global top-k selection. Ties in weight break by block id ascending, then
/// chain position ascending, so the SP and the verifier always agree on the
/// same item instances.
pub(crate) fn select_top_k(mut candidates: Vec<Candidate>, k: usize) -> Vec<Candidate> {
    candidates.sort_by_key(|c| (Reverse(c.w), c.block, c.pos));
    candidates.truncate(k);
    candidates
}

fn check_window(store: &Store, q: &Query) -> Result<(), SearchError> {
    if q.ub() >= store.len() as BlockId {
        return Err(SearchError::WindowOutOfRange {
            lb: q.lb(),
            ub: q.ub(),
            len: store.len(),
        });
    }
    Ok(())
}

/// Per-block scan over the whole window: one proof per block, local top-k
/// chain prefix per matched block.
pub fn search_netchain(store: &Store, q: &Query) -> Result<Response, SearchError> {
    if store.mode() != Mode::NetChain {
        return Err(SearchError::ModeMismatch {
            expected: Mode::NetChain,
            actual: store.mode(),
        });
    }
    check_window(store, q)?;
    let key = q.key();
    let mut results = BTreeMap::new();
    let mut proofs = BTreeMap::new();
    for id in q.window() {
        let block = store.get_block(id)?;
        let tree = &block.body.ads.tree;
        match block.body.ads.dict.get(&key) {
            Some(chain) => {
                let proof = smt::prove_existence(tree, &key).expect("key is in dict");
                let take = chain.len().min(q.k());
                results.insert(
                    id,
                    BlockResult {
                        block_id: id,
                        matched: true,
                        items: chain.items()[..take].to_vec(),
                    },
                );
                proofs.insert(id, BlockProof::Existence(proof));
            }
            None => {
                let proof = smt::prove_non_existence(tree, &key).expect("key absent");
                results.insert(
                    id,
                    BlockResult {
                        block_id: id,
                        matched: false,
                        items: Vec::new(),
                    },
                );
                proofs.insert(id, BlockProof::NonExistence(proof));
            }
        }
    }
    Ok(Response {
        mode: Mode::NetChain,
        query: q.clone(),
        results,
        proofs,
        mpt_proof: None,
        out_boundary: None,
    })
}

fn linked_leaf<'a>(
    store: &'a Store,
    id: BlockId,
    key: &CompoundKey,
) -> Result<&'a SmtLeaf, SearchError> {
    let block = store.get_block(id)?;
    Ok(block
        .body
        .ads
        .tree
        .find_leaf(key)
        .expect("inter-block link points at a block containing the key"))
}

/// Resolves the boundary blocks for a plus-mode query.
///
/// `out` is the latest matched block when it lies at or below `ub`, proven
/// through the MPT; otherwise it is the first matched block above `ub`
/// (reached by walking `id_pre` links), proven by an existence proof whose
/// leaf pins its `id_pre` to at most `ub`. `right` is `out` in the first case
/// and `out`'s `id_pre` in the second; it is absent when the key never
/// occurs or nothing precedes the boundary.
pub fn find_boundaries(store: &Store, q: &Query) -> Result<Boundaries, SearchError> {
    if store.mode() != Mode::NetChainPlus {
        return Err(SearchError::ModeMismatch {
            expected: Mode::NetChainPlus,
            actual: store.mode(),
        });
    }
    check_window(store, q)?;
    let key = q.key();
    let mpt = store.mpt().expect("plus-mode store has an MPT");
    let (latest, mpt_proof) = mpt.get(&key);
    let Some(latest) = latest else {
        // The key never occurred on chain; the MPT absence proof is the
        // entire answer.
        return Ok(Boundaries {
            right: None,
            out: None,
            mpt_proof: Some(mpt_proof),
            boundary_proof: None,
        });
    };

    if latest <= q.ub() {
        return Ok(Boundaries {
            right: Some(latest),
            out: Some(latest),
            mpt_proof: Some(mpt_proof),
            boundary_proof: None,
        });
    }

    let mut id = latest;
    loop {
        let leaf = linked_leaf(store, id, &key)?;
        let id_pre = leaf.id_pre.expect("plus-mode leaf carries id_pre");
        if id_pre <= q.ub() {
            let block = store.get_block(id)?;
            let proof =
                smt::prove_existence(&block.body.ads.tree, &key).expect("key is in this block");
            return Ok(Boundaries {
                right: (id_pre >= 0).then_some(id_pre),
                out: Some(id),
                mpt_proof: None,
                boundary_proof: Some(proof),
            });
        }
        id = id_pre;
    }
}

/// Boundary search plus the two-round scan over matched blocks only.
pub fn search_netchain_plus(store: &Store, q: &Query) -> Result<Response, SearchError> {
    let bounds = find_boundaries(store, q)?;
    let key = q.key();
    let mut results = BTreeMap::new();
    let mut proofs = BTreeMap::new();

    let Some(out) = bounds.out else {
        return Ok(Response {
            mode: Mode::NetChainPlus,
            query: q.clone(),
            results,
            proofs,
            mpt_proof: bounds.mpt_proof,
            out_boundary: None,
        });
    };

    let mpt_proof = if out <= q.ub() {
        bounds.mpt_proof
    } else {
        let proof = bounds.boundary_proof.expect("boundary proven by SMT leaf");
        proofs.insert(out, BlockProof::Existence(proof));
        None
    };

    // First round: walk the id_pre links through the window collecting every
    // compound value, then fix the global top-k.
    let mut walk: Vec<BlockId> = Vec::new();
    let mut candidates: Vec<Candidate> = Vec::new();
    let mut cursor = bounds.right.unwrap_or(-1);
    while cursor >= q.lb() && cursor <= q.ub() {
        walk.push(cursor);
        let block = store.get_block(cursor)?;
        let chain = block
            .body
            .ads
            .dict
            .get(&key)
            .expect("walked block contains the key");
        for (i, item) in chain.items().iter().enumerate() {
            candidates.push(Candidate {
                w: item.value.w,
                block: cursor,
                pos: i as u32 + 1,
                v: item.value.v.clone(),
            });
        }
        let leaf = linked_leaf(store, cursor, &key)?;
        cursor = leaf.id_pre.expect("plus-mode leaf carries id_pre");
    }
    let top = select_top_k(candidates, q.k());
    let top_instances: HashSet<(BlockId, u32)> = top.iter().map(|c| (c.block, c.pos)).collect();

    // Second round: per block, the maximal prefix of top-k items plus one
    // out-boundary item (or the whole chain when every item is a winner).
    for &id in &walk {
        let block = store.get_block(id)?;
        let chain = &block.body.ads.dict[&key];
        let l = chain.len();
        let mut cut = l;
        for j in 1..=l {
            if !top_instances.contains(&(id, j as u32)) {
                cut = j;
                break;
            }
        }
        results.insert(
            id,
            BlockResult {
                block_id: id,
                matched: true,
                items: chain.items()[..cut].to_vec(),
            },
        );
        proofs.insert(
            id,
            BlockProof::Existence(
                smt::prove_existence(&block.body.ads.tree, &key).expect("key is in dict"),
            ),
        );
    }

    Ok(Response {
        mode: Mode::NetChainPlus,
        query: q.clone(),
        results,
        proofs,
        mpt_proof,
        out_boundary: Some(out),
    })
}

/// Dispatches to the engine matching the store's mode.
pub fn search(store: &Store, q: &Query) -> Result<Response, SearchError> {
    match store.mode() {
        Mode::NetChain => search_netchain(store, q),
        Mode::NetChainPlus => search_netchain_plus(store, q),
    }
}

// ---------------------------------------------------------------------------
// Wire format
// ---------------------------------------------------------------------------

fn write_chain_item(wtr: &mut ByteWriter, item: &ChainItem) {
    wtr.put_bytes(&item.value.v);
    wtr.put_i64(item.value.w);
    wtr.put_ptr(item.ptr.as_ref());
}

fn read_chain_item(rdr: &mut ByteReader) -> Result<ChainItem, CodecError> {
    Ok(ChainItem {
        value: CompoundValue {
            v: rdr.get_bytes()?,
            w: rdr.get_i64()?,
        },
        ptr: rdr.get_ptr()?,
    })
}

fn write_merkle_proof(wtr: &mut ByteWriter, proof: &MerkleProof) {
    wtr.put_bytes(&proof.leaf.key.u);
    wtr.put_bytes(&proof.leaf.key.edge_type);
    wtr.put_digest(&proof.leaf.ptr_h);
    match proof.leaf.id_pre {
        None => wtr.put_u8(0x00),
        Some(id) => {
            wtr.put_u8(0x01);
            wtr.put_i64(id);
        }
    }
    wtr.put_u64(proof.leaf_index);
    wtr.put_u64(proof.tree_size);
    wtr.put_u32(proof.siblings.len() as u32);
    for s in &proof.siblings {
        wtr.put_digest(s);
    }
}

fn read_merkle_proof(rdr: &mut ByteReader) -> Result<MerkleProof, CodecError> {
    let key = CompoundKey::new(rdr.get_bytes()?, rdr.get_bytes()?);
    let ptr_h = rdr.get_digest()?;
    let id_pre = match rdr.get_u8()? {
        0x00 => None,
        0x01 => Some(rdr.get_i64()?),
        found => {
            return Err(CodecError::BadTag {
                found,
                offset: rdr.position() - 1,
            })
        }
    };
    let leaf_index = rdr.get_u64()?;
    let tree_size = rdr.get_u64()?;
    let n = rdr.get_u32()? as usize;
    let mut siblings = Vec::with_capacity(n);
    for _ in 0..n {
        siblings.push(rdr.get_digest()?);
    }
    Ok(MerkleProof {
        leaf: SmtLeaf { key, ptr_h, id_pre },
        leaf_index,
        tree_size,
        siblings,
    })
}

fn write_opt_merkle_proof(wtr: &mut ByteWriter, proof: &Option<MerkleProof>) {
    match proof {
        None => wtr.put_u8(0x00),
        Some(p) => {
            wtr.put_u8(0x01);
            write_merkle_proof(wtr, p);
        }
    }
}

fn read_opt_merkle_proof(rdr: &mut ByteReader) -> Result<Option<MerkleProof>, CodecError> {
    match rdr.get_u8()? {
        0x00 => Ok(None),
        0x01 => Ok(Some(read_merkle_proof(rdr)?)),
        found => Err(CodecError::BadTag {
            found,
            offset: rdr.position() - 1,
        }),
    }
}

impl Response {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut wtr = ByteWriter::new();
        wtr.put_raw(RESPONSE_MAGIC);
        wtr.put_u8(RESPONSE_VERSION);
        wtr.put_u8(self.mode.as_byte());
        wtr.put_bytes(self.query.u());
        wtr.put_bytes(self.query.edge_type());
        wtr.put_u32(self.query.k() as u32);
        wtr.put_i64(self.query.lb());
        wtr.put_i64(self.query.ub());

        wtr.put_u32(self.results.len() as u32);
        for (id, r) in &self.results {
            wtr.put_i64(*id);
            wtr.put_u8(u8::from(r.matched));
            if r.matched {
                wtr.put_u32(r.items.len() as u32);
                for item in &r.items {
                    write_chain_item(&mut wtr, item);
                }
            }
        }

        wtr.put_u32(self.proofs.len() as u32);
        for (id, p) in &self.proofs {
            wtr.put_i64(*id);
            match p {
                BlockProof::Existence(proof) => {
                    wtr.put_u8(0x00);
                    write_merkle_proof(&mut wtr, proof);
                }
                BlockProof::NonExistence(proof) => {
                    wtr.put_u8(0x01);
                    write_opt_merkle_proof(&mut wtr, &proof.left);
                    write_opt_merkle_proof(&mut wtr, &proof.right);
                }
            }
        }

        match &self.mpt_proof {
            None => wtr.put_u8(0x00),
            Some(proof) => {
                wtr.put_u8(0x01);
                wtr.put_u32(proof.nodes.len() as u32);
                for node in &proof.nodes {
                    wtr.put_bytes(node);
                }
            }
        }
        match self.out_boundary {
            None => wtr.put_u8(0x00),
            Some(b) => {
                wtr.put_u8(0x01);
                wtr.put_i64(b);
            }
        }
        wtr.into_vec()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut rdr = ByteReader::new(bytes);
        if rdr.get_raw(RESPONSE_MAGIC.len())? != RESPONSE_MAGIC {
            return Err(CodecError::BadMagic);
        }
        let version = rdr.get_u8()?;
        if version != RESPONSE_VERSION {
            return Err(CodecError::BadVersion(version));
        }
        let mode = Mode::from_byte(rdr.get_u8()?)?;
        let u_q = rdr.get_bytes()?;
        let type_q = rdr.get_bytes()?;
        let k = rdr.get_u32()? as usize;
        let lb = rdr.get_i64()?;
        let ub = rdr.get_i64()?;
        let query = Query::new(u_q, type_q, k, lb, ub)
            .map_err(|_| CodecError::BadField("malformed query"))?;

        let n_results = rdr.get_u32()? as usize;
        let mut results = BTreeMap::new();
        for _ in 0..n_results {
            let id = rdr.get_i64()?;
            let matched = match rdr.get_u8()? {
                0x00 => false,
                0x01 => true,
                found => {
                    return Err(CodecError::BadTag {
                        found,
                        offset: rdr.position() - 1,
                    })
                }
            };
            let items = if matched {
                let n = rdr.get_u32()? as usize;
                let mut items = Vec::with_capacity(n);
                for _ in 0..n {
                    items.push(read_chain_item(&mut rdr)?);
                }
                items
            } else {
                Vec::new()
            };
            results.insert(
                id,
                BlockResult {
                    block_id: id,
                    matched,
                    items,
                },
            );
        }

        let n_proofs = rdr.get_u32()? as usize;
        let mut proofs = BTreeMap::new();
        for _ in 0..n_proofs {
            let id = rdr.get_i64()?;
            let proof = match rdr.get_u8()? {
                0x00 => BlockProof::Existence(read_merkle_proof(&mut rdr)?),
                0x01 => {
                    let left = read_opt_merkle_proof(&mut rdr)?;
                    let right = read_opt_merkle_proof(&mut rdr)?;
                    BlockProof::NonExistence(NonExistenceProof { left, right })
                }
                found => {
                    return Err(CodecError::BadTag {
                        found,
                        offset: rdr.position() - 1,
                    })
                }
            };
            proofs.insert(id, proof);
        }

        let mpt_proof = match rdr.get_u8()? {
            0x00 => None,
            0x01 => {
                let n = rdr.get_u32()? as usize;
                let mut nodes = Vec::with_capacity(n);
                for _ in 0..n {
                    nodes.push(rdr.get_bytes()?);
                }
                Some(MptProof { nodes })
            }
            found => {
                return Err(CodecError::BadTag {
                    found,
                    offset: rdr.position() - 1,
                })
            }
        };
        let out_boundary = match rdr.get_u8()? {
            0x00 => None,
            0x01 => Some(rdr.get_i64()?),
            found => {
                return Err(CodecError::BadTag {
                    found,
                    offset: rdr.position() - 1,
                })
            }
        };
        rdr.finish()?;
        Ok(Response {
            mode,
            query,
            results,
            proofs,
            mpt_proof,
            out_boundary,
        })
    }
}
