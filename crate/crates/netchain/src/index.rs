//! Per-block ADS construction: compound-key grouping, ordered hash chains and
//! the two-layer index.
//!
//! Objects in a block are grouped by compound key `⟨u, type⟩`. Each group
//! becomes a hash chain sorted by weight descending, where every item carries
//! the digest of its successor and the last item carries `⊥`. The digest of
//! each chain head is anchored in an SMT leaf, so the verifiability of every
//! item is rooted in the block header's SMT root hash.

use crate::codec::{self, Digest};
use crate::mpt::MptStore;
use crate::smt::{self, SmtLeaf, SmtTree};
use crate::Mode;
use std::collections::BTreeMap;
use thiserror::Error;

/// Vertex identifier: an opaque nonempty byte string.
pub type VertexId = Vec<u8>;
/// Edge type label: an opaque nonempty byte string.
pub type EdgeType = Vec<u8>;
/// Edge weight.
pub type Weight = i64;
/// Block height. Non-negative for real blocks; `-1` is the "no predecessor"
/// sentinel in inter-block links.
pub type BlockId = i64;

pub const NO_PREDECESSOR: BlockId = -1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IndexError {
    #[error("object field `{0}` must be nonempty")]
    EmptyField(&'static str),
    #[error("a hash chain needs at least one value")]
    EmptyValues,
    #[error("a block needs at least one object")]
    EmptyObjects,
    #[error("inter-block links require an MPT store")]
    MptRequired,
    #[error("plain mode must not be given an MPT store")]
    MptUnexpected,
    #[error(transparent)]
    Smt(#[from] smt::SmtError),
}

/// One stored graph edge `⟨u, v, type, w⟩`.
#[derive(Clone, PartialEq, Eq, Debug, Hash)]
pub struct Object {
    pub u: VertexId,
    pub v: VertexId,
    pub edge_type: EdgeType,
    pub w: Weight,
}

impl Object {
    pub fn new(
        u: impl Into<VertexId>,
        v: impl Into<VertexId>,
        edge_type: impl Into<EdgeType>,
        w: Weight,
    ) -> Result<Self, IndexError> {
        let (u, v, edge_type) = (u.into(), v.into(), edge_type.into());
        if u.is_empty() {
            return Err(IndexError::EmptyField("u"));
        }
        if v.is_empty() {
            return Err(IndexError::EmptyField("v"));
        }
        if edge_type.is_empty() {
            return Err(IndexError::EmptyField("type"));
        }
        Ok(Object { u, v, edge_type, w })
    }

    pub fn key(&self) -> CompoundKey {
        CompoundKey {
            u: self.u.clone(),
            edge_type: self.edge_type.clone(),
        }
    }

    pub fn value(&self) -> CompoundValue {
        CompoundValue {
            v: self.v.clone(),
            w: self.w,
        }
    }

    /// Canonical bytes used as transaction-tree leaf payload.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        codec::encode_object(&self.u, &self.v, &self.edge_type, self.w)
    }
}

/// Index key `⟨u, type⟩`. Ordered lexicographically by `u` bytes, then `type`
/// bytes (the derived order on the fields).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub struct CompoundKey {
    pub u: VertexId,
    pub edge_type: EdgeType,
}

impl CompoundKey {
    pub fn new(u: impl Into<VertexId>, edge_type: impl Into<EdgeType>) -> Self {
        CompoundKey {
            u: u.into(),
            edge_type: edge_type.into(),
        }
    }

    /// Canonical length-prefixed encoding; injective and prefix-free, which is
    /// what the MPT key path relies on.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut wtr = codec::ByteWriter::new();
        wtr.put_bytes(&self.u);
        wtr.put_bytes(&self.edge_type);
        wtr.into_vec()
    }
}

/// Payload pair `⟨v, w⟩` stored under a compound key.
#[derive(Clone, PartialEq, Eq, Debug, Hash)]
pub struct CompoundValue {
    pub v: VertexId,
    pub w: Weight,
}

/// One node of an ordered hash chain: a compound value plus the digest of the
/// next item (`None` = `⊥` on the last item).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ChainItem {
    pub value: CompoundValue,
    pub ptr: Option<Digest>,
}

impl ChainItem {
    pub fn digest(&self) -> Digest {
        codec::hash(&codec::encode_chain_item(
            &self.value.v,
            self.value.w,
            self.ptr.as_ref(),
        ))
    }
}

/// Weight-ordered, hash-linked list of compound values under one key.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct HashChain {
    items: Vec<ChainItem>,
}

impl HashChain {
    pub fn items(&self) -> &[ChainItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees at least one item
    }

    /// Digest of the first chain item; this is what an SMT leaf anchors.
    pub fn head_digest(&self) -> Digest {
        self.items[0].digest()
    }

    /// Reassembles a chain from stored items, re-deriving every pointer and
    /// refusing any inconsistency. Used when loading block bodies.
    pub(crate) fn from_stored_items(items: Vec<ChainItem>) -> Result<Self, String> {
        if items.is_empty() {
            return Err("empty chain".into());
        }
        if items[items.len() - 1].ptr.is_some() {
            return Err("last chain item must carry ⊥".into());
        }
        for j in 0..items.len() - 1 {
            if items[j].value.w < items[j + 1].value.w {
                return Err("chain weights must be non-increasing".into());
            }
            if items[j].ptr != Some(items[j + 1].digest()) {
                return Err(format!("hash link broken at item {j}"));
            }
        }
        Ok(HashChain { items })
    }
}

/// Everything the miner writes into a block body for verifiability: the
/// per-key chain dictionary and the compound-key SMT.
#[derive(Clone, Debug)]
pub struct BlockAds {
    pub dict: BTreeMap<CompoundKey, HashChain>,
    pub tree: SmtTree,
}

/// Builds the ordered hash chain for one key's values.
///
/// Items are sorted by weight descending; ties break by `v` bytes ascending,
/// then by input order, so the chain (and every digest above it) is a pure
/// function of the input multiset. Pointers are computed back to front and the
/// last item carries `⊥`.
pub fn build_chain(values: Vec<CompoundValue>) -> Result<HashChain, IndexError> {
    if values.is_empty() {
        return Err(IndexError::EmptyValues);
    }
    let mut values = values;
    values.sort_by(|a, b| b.w.cmp(&a.w).then_with(|| a.v.cmp(&b.v)));
    let mut items: Vec<ChainItem> = values
        .into_iter()
        .map(|value| ChainItem { value, ptr: None })
        .collect();
    for j in (0..items.len() - 1).rev() {
        items[j].ptr = Some(items[j + 1].digest());
    }
    Ok(HashChain { items })
}

/// Builds the per-block ADS and, with inter-block links enabled, threads the
/// MPT: each leaf records the previous block containing its key (`-1` when
/// none) and the MPT is advanced to `block_id` for every key. Returns the new
/// MPT root for the header in that case.
pub fn build_block_ads(
    objects: &[Object],
    mode: Mode,
    mpt: Option<&mut MptStore>,
    block_id: BlockId,
) -> Result<(BlockAds, Option<Digest>), IndexError> {
    if objects.is_empty() {
        return Err(IndexError::EmptyObjects);
    }
    let mpt = match (mode, mpt) {
        (Mode::NetChainPlus, Some(m)) => Some(m),
        (Mode::NetChainPlus, None) => return Err(IndexError::MptRequired),
        (Mode::NetChain, None) => None,
        (Mode::NetChain, Some(_)) => return Err(IndexError::MptUnexpected),
    };

    let mut groups: BTreeMap<CompoundKey, Vec<CompoundValue>> = BTreeMap::new();
    for o in objects {
        groups.entry(o.key()).or_default().push(o.value());
    }

    let mut dict = BTreeMap::new();
    let mut leaves = Vec::with_capacity(groups.len());
    match mpt {
        None => {
            for (key, values) in groups {
                let chain = build_chain(values)?;
                leaves.push(SmtLeaf {
                    key: key.clone(),
                    ptr_h: chain.head_digest(),
                    id_pre: None,
                });
                dict.insert(key, chain);
            }
            let tree = smt::build(leaves)?;
            Ok((BlockAds { dict, tree }, None))
        }
        Some(mpt) => {
            for (key, values) in groups {
                let chain = build_chain(values)?;
                let id_pre = mpt.get(&key).0.unwrap_or(NO_PREDECESSOR);
                leaves.push(SmtLeaf {
                    key: key.clone(),
                    ptr_h: chain.head_digest(),
                    id_pre: Some(id_pre),
                });
                mpt.set(&key, block_id);
                dict.insert(key, chain);
            }
            let tree = smt::build(leaves)?;
            let root = mpt.root();
            Ok((BlockAds { dict, tree }, Some(root)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn val(v: &str, w: i64) -> CompoundValue {
        CompoundValue { v: v.into(), w }
    }

    #[test]
    fn object_fields_must_be_nonempty() {
        assert!(Object::new("", "v", "t", 1).is_err());
        assert!(Object::new("u", "", "t", 1).is_err());
        assert!(Object::new("u", "v", "", 1).is_err());
        assert!(Object::new("u", "u", "t", 1).is_ok()); // self-loops allowed
    }

    #[test]
    fn single_value_chain_ends_with_bottom() {
        let chain = build_chain(vec![val("v1", 5)]).unwrap();
        assert_eq!(chain.len(), 1);
        assert_eq!(chain.items()[0].ptr, None);
    }

    #[test]
    fn empty_chain_is_rejected() {
        assert_eq!(build_chain(vec![]), Err(IndexError::EmptyValues));
    }

    #[test]
    fn chain_links_recompute_end_to_end() {
        let mut rng = StdRng::seed_from_u64(11);
        let values: Vec<CompoundValue> = (0..100)
            .map(|_| {
                val(
                    &format!("v{}", rng.gen_range(0..40)),
                    rng.gen_range(-50..50),
                )
            })
            .collect();
        let chain = build_chain(values).unwrap();
        let items = chain.items();
        for j in 0..items.len() - 1 {
            assert!(items[j].value.w >= items[j + 1].value.w);
            assert_eq!(items[j].ptr, Some(items[j + 1].digest()));
        }
        assert_eq!(items[items.len() - 1].ptr, None);
    }

    #[test]
    fn chain_head_feeds_leaf_pointer() {
        // Four objects under one key, head value ⟨v3, 10⟩ once sorted.
        let objects = vec![
            Object::new("u1", "v1", "t1", 5).unwrap(),
            Object::new("u1", "v3", "t1", 10).unwrap(),
            Object::new("u1", "v5", "t1", 2).unwrap(),
            Object::new("u1", "v9", "t1", 8).unwrap(),
        ];
        let (ads, hm) = build_block_ads(&objects, Mode::NetChain, None, 0).unwrap();
        assert!(hm.is_none());
        let key = CompoundKey::new("u1", "t1");
        let chain = &ads.dict[&key];
        assert_eq!(chain.items()[0].value, val("v3", 10));
        assert_eq!(ads.tree.leaves()[0].ptr_h, chain.head_digest());
        // One key means a single-leaf SMT whose root is the leaf digest.
        assert_eq!(ads.tree.root(), ads.tree.leaves()[0].digest());
    }

    #[test]
    fn four_key_block_builds_the_four_leaf_tree() {
        let objects = vec![
            Object::new("u1", "v1", "t1", 10).unwrap(),
            Object::new("u1", "v2", "t2", 9).unwrap(),
            Object::new("u2", "v3", "t1", 8).unwrap(),
            Object::new("u2", "v4", "t3", 7).unwrap(),
        ];
        let (ads, _) = build_block_ads(&objects, Mode::NetChain, None, 0).unwrap();
        let leaves = ads.tree.leaves();
        assert_eq!(leaves.len(), 4);
        let keys: Vec<&CompoundKey> = leaves.iter().map(|l| &l.key).collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
        // Two-level shape: root = H(H(n1‖n2)‖H(n3‖n4)).
        let d: Vec<_> = leaves.iter().map(|l| l.digest()).collect();
        let expected = codec::internal_digest(
            &codec::internal_digest(&d[0], &d[1]),
            &codec::internal_digest(&d[2], &d[3]),
        );
        assert_eq!(ads.tree.root(), expected);
    }

    #[test]
    fn weight_ties_break_by_vertex_then_input_order() {
        let chain = build_chain(vec![val("b", 7), val("a", 7), val("a", 7)]).unwrap();
        let got: Vec<_> = chain.items().iter().map(|ci| ci.value.v.clone()).collect();
        assert_eq!(got, vec![b"a".to_vec(), b"a".to_vec(), b"b".to_vec()]);
    }

    #[test]
    fn duplicate_values_are_kept_as_distinct_items() {
        let chain = build_chain(vec![val("a", 7), val("a", 7)]).unwrap();
        assert_eq!(chain.len(), 2);
        // Identical payloads, distinct link structure.
        assert_ne!(chain.items()[0].ptr, chain.items()[1].ptr);
    }

    #[test]
    fn identical_object_multisets_yield_identical_roots() {
        let mut objects = vec![
            Object::new("u2", "v1", "t1", 3).unwrap(),
            Object::new("u1", "v2", "t2", 9).unwrap(),
            Object::new("u1", "v2", "t2", 9).unwrap(),
            Object::new("u3", "v7", "t1", -4).unwrap(),
        ];
        let (a, _) = build_block_ads(&objects, Mode::NetChain, None, 0).unwrap();
        objects.reverse();
        let (b, _) = build_block_ads(&objects, Mode::NetChain, None, 0).unwrap();
        assert_eq!(a.tree.root(), b.tree.root());
    }

    #[test]
    fn mutating_any_object_field_changes_the_root() {
        let mut rng = StdRng::seed_from_u64(7);
        let objects: Vec<Object> = (0..30)
            .map(|i| {
                Object::new(
                    format!("u{}", i % 5),
                    format!("v{}", rng.gen_range(0..10)),
                    "t",
                    rng.gen_range(0..100),
                )
                .unwrap()
            })
            .collect();
        let (ads, _) = build_block_ads(&objects, Mode::NetChain, None, 0).unwrap();
        for i in 0..objects.len() {
            let mut tampered = objects.clone();
            tampered[i].v.push(b'!');
            let (ads2, _) = build_block_ads(&tampered, Mode::NetChain, None, 0).unwrap();
            assert_ne!(ads.tree.root(), ads2.tree.root(), "v mutation at {i}");

            let mut tampered = objects.clone();
            tampered[i].w += 1;
            let (ads2, _) = build_block_ads(&tampered, Mode::NetChain, None, 0).unwrap();
            assert_ne!(ads.tree.root(), ads2.tree.root(), "w mutation at {i}");
        }
    }

    #[test]
    fn plus_mode_threads_predecessor_links() {
        let mut mpt = MptStore::new();
        let mut blocks: Vec<BlockAds> = Vec::new();
        let mut rng = StdRng::seed_from_u64(3);
        // 20 blocks of random objects over a small key space.
        let mut per_block_objects = Vec::new();
        for _ in 0..20 {
            let objects: Vec<Object> = (0..rng.gen_range(1..6))
                .map(|_| {
                    Object::new(
                        format!("u{}", rng.gen_range(0..4)),
                        format!("v{}", rng.gen_range(0..9)),
                        "t",
                        rng.gen_range(0..100),
                    )
                    .unwrap()
                })
                .collect();
            per_block_objects.push(objects);
        }
        for (id, objects) in per_block_objects.iter().enumerate() {
            let (ads, hm) =
                build_block_ads(objects, Mode::NetChainPlus, Some(&mut mpt), id as BlockId)
                    .unwrap();
            assert_eq!(hm, Some(mpt.root()));
            blocks.push(ads);
        }

        // Flat-scan oracle: walking id_pre from the newest occurrence of a key
        // must visit exactly the blocks containing it, newest to oldest.
        let mut keys: Vec<CompoundKey> = Vec::new();
        for objects in &per_block_objects {
            for o in objects {
                if !keys.contains(&o.key()) {
                    keys.push(o.key());
                }
            }
        }
        for key in keys {
            let expected: Vec<BlockId> = (0..20)
                .rev()
                .filter(|&id| blocks[id as usize].dict.contains_key(&key))
                .map(|id| id as BlockId)
                .collect();
            let mut walked = Vec::new();
            let mut cursor = mpt.get(&key).0.expect("key occurs somewhere");
            while cursor != NO_PREDECESSOR {
                walked.push(cursor);
                let leaf = blocks[cursor as usize]
                    .tree
                    .find_leaf(&key)
                    .expect("leaf present in matched block");
                cursor = leaf.id_pre.unwrap();
            }
            assert_eq!(walked, expected, "key {key:?}");
        }
    }

    #[test]
    fn mode_and_mpt_presence_must_agree() {
        let objects = vec![Object::new("u", "v", "t", 1).unwrap()];
        assert_eq!(
            build_block_ads(&objects, Mode::NetChainPlus, None, 0).unwrap_err(),
            IndexError::MptRequired
        );
        let mut mpt = MptStore::new();
        assert_eq!(
            build_block_ads(&objects, Mode::NetChain, Some(&mut mpt), 0).unwrap_err(),
            IndexError::MptUnexpected
        );
    }
}
