//! Sorted Merkle tree over compound-key leaves, with existence and
//! non-existence proofs.
//!
//! Leaves are strictly sorted by key, so the absence of a key is proven by the
//! existence of its two adjacent leaves (or a single boundary leaf when the
//! key falls outside the stored range). Each proof carries the leaf index and
//! the tree size; adjacency is checked by index arithmetic.
//!
//! When a level has odd width, the last digest is promoted unchanged to the
//! next level. Duplicating it instead would let one leaf verify at two
//! different indices, which would break the adjacency argument.

use crate::codec::{self, Digest};
use crate::index::{BlockId, CompoundKey};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SmtError {
    #[error("cannot build a tree from zero leaves")]
    EmptyLeaves,
    #[error("leaf keys must be strictly increasing (violation at position {0})")]
    UnsortedLeaves(usize),
    #[error("all leaves must agree on carrying id_pre")]
    MixedLeafKinds,
    #[error("key not present in tree")]
    KeyAbsent,
    #[error("key already present in tree")]
    KeyPresent,
}

/// A leaf of the compound-key SMT: the key, the digest of the head item of the
/// key's hash chain and, with inter-block links enabled, the id of the
/// previous block containing the key (`-1` when none).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SmtLeaf {
    pub key: CompoundKey,
    pub ptr_h: Digest,
    pub id_pre: Option<BlockId>,
}

impl SmtLeaf {
    pub fn digest(&self) -> Digest {
        codec::hash(&codec::encode_leaf(
            &self.key.u,
            &self.key.edge_type,
            &self.ptr_h,
            self.id_pre,
        ))
    }
}

/// Immutable sorted Merkle tree. `levels[0]` holds the leaf digests and the
/// last level holds the single root digest.
#[derive(Clone, Debug)]
pub struct SmtTree {
    leaves: Vec<SmtLeaf>,
    levels: Vec<Vec<Digest>>,
}

impl SmtTree {
    pub fn root(&self) -> Digest {
        self.levels[self.levels.len() - 1][0]
    }

    pub fn leaves(&self) -> &[SmtLeaf] {
        &self.leaves
    }

    pub fn levels(&self) -> &[Vec<Digest>] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        false // build rejects zero leaves
    }

    pub fn contains(&self, key: &CompoundKey) -> bool {
        self.position(key).is_ok()
    }

    pub fn find_leaf(&self, key: &CompoundKey) -> Option<&SmtLeaf> {
        self.position(key).ok().map(|i| &self.leaves[i])
    }

    fn position(&self, key: &CompoundKey) -> Result<usize, usize> {
        self.leaves.binary_search_by(|l| l.key.cmp(key))
    }
}

/// An existence proof: the leaf itself, its position, the tree size and the
/// sibling digests bottom-up. Levels where the path node is promoted (odd
/// width, last position) contribute no sibling.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct MerkleProof {
    pub leaf: SmtLeaf,
    pub leaf_index: u64,
    pub tree_size: u64,
    pub siblings: Vec<Digest>,
}

/// A non-existence proof for key `k`: existence proofs of the leaves adjacent
/// to where `k` would sit. Interior misses carry both sides; misses below the
/// minimum carry only `right` (leaf 0) and misses above the maximum only
/// `left` (last leaf).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct NonExistenceProof {
    pub left: Option<MerkleProof>,
    pub right: Option<MerkleProof>,
}

/// Builds the tree from strictly key-sorted leaves.
pub fn build(leaves: Vec<SmtLeaf>) -> Result<SmtTree, SmtError> {
    if leaves.is_empty() {
        return Err(SmtError::EmptyLeaves);
    }
    for (i, pair) in leaves.windows(2).enumerate() {
        if pair[0].key >= pair[1].key {
            return Err(SmtError::UnsortedLeaves(i + 1));
        }
    }
    let linked = leaves[0].id_pre.is_some();
    if leaves.iter().any(|l| l.id_pre.is_some() != linked) {
        return Err(SmtError::MixedLeafKinds);
    }

    let mut levels = vec![leaves.iter().map(SmtLeaf::digest).collect::<Vec<_>>()];
    while levels[levels.len() - 1].len() > 1 {
        let prev = &levels[levels.len() - 1];
        let mut next = Vec::with_capacity(prev.len().div_ceil(2));
        let mut i = 0;
        while i + 1 < prev.len() {
            next.push(codec::internal_digest(&prev[i], &prev[i + 1]));
            i += 2;
        }
        if i < prev.len() {
            next.push(prev[i]); // odd width: promote the last digest unchanged
        }
        levels.push(next);
    }
    Ok(SmtTree { leaves, levels })
}

/// Produces the existence proof for a present key.
pub fn prove_existence(tree: &SmtTree, key: &CompoundKey) -> Result<MerkleProof, SmtError> {
    let index = tree.position(key).map_err(|_| SmtError::KeyAbsent)?;
    Ok(prove_at(tree, index))
}

fn prove_at(tree: &SmtTree, index: usize) -> MerkleProof {
    let mut siblings = Vec::new();
    let mut idx = index;
    for level in &tree.levels[..tree.levels.len() - 1] {
        if idx.is_multiple_of(2) {
            if idx + 1 < level.len() {
                siblings.push(level[idx + 1]);
            }
            // else: promoted, no sibling at this level
        } else {
            siblings.push(level[idx - 1]);
        }
        idx /= 2;
    }
    MerkleProof {
        leaf: tree.leaves[index].clone(),
        leaf_index: index as u64,
        tree_size: tree.leaves.len() as u64,
        siblings,
    }
}

/// Recomputes the root from a proof without looking at the leaf key.
///
/// The index and size fields determine at which levels the path node is
/// promoted and on which side each sibling combines. The index is fully
/// pinned by the recomputation; the size is pinned up to values that yield
/// the identical promotion pattern, and moving a leaf to or from the "last"
/// position always changes that pattern, so adjacency decisions cannot be
/// forged without a hash collision.
fn verify_leaf_path(root: &Digest, proof: &MerkleProof) -> bool {
    if proof.tree_size == 0 || proof.leaf_index >= proof.tree_size {
        return false;
    }
    let mut h = proof.leaf.digest();
    let mut idx = proof.leaf_index;
    let mut width = proof.tree_size;
    let mut siblings = proof.siblings.iter();
    while width > 1 {
        if idx.is_multiple_of(2) && idx + 1 == width {
            // promoted: nothing consumed
        } else {
            let sib = match siblings.next() {
                Some(s) => s,
                None => return false,
            };
            h = if idx.is_multiple_of(2) {
                codec::internal_digest(&h, sib)
            } else {
                codec::internal_digest(sib, &h)
            };
        }
        idx /= 2;
        width = width.div_ceil(2);
    }
    siblings.next().is_none() && h == *root
}

/// Checks an existence proof for `key` against a root. Never aborts; any
/// mismatch (wrong key, wrong path, wrong index or size) yields `false`.
pub fn verify_existence(root: &Digest, key: &CompoundKey, proof: &MerkleProof) -> bool {
    proof.leaf.key == *key && verify_leaf_path(root, proof)
}

/// Produces the non-existence proof for an absent key.
pub fn prove_non_existence(
    tree: &SmtTree,
    key: &CompoundKey,
) -> Result<NonExistenceProof, SmtError> {
    let insertion = match tree.position(key) {
        Ok(_) => return Err(SmtError::KeyPresent),
        Err(i) => i,
    };
    let n = tree.leaves.len();
    let proof = if insertion == 0 {
        NonExistenceProof {
            left: None,
            right: Some(prove_at(tree, 0)),
        }
    } else if insertion == n {
        NonExistenceProof {
            left: Some(prove_at(tree, n - 1)),
            right: None,
        }
    } else {
        NonExistenceProof {
            left: Some(prove_at(tree, insertion - 1)),
            right: Some(prove_at(tree, insertion)),
        }
    };
    Ok(proof)
}

/// Checks a non-existence proof: every present side must verify as an
/// existence proof, the leaf keys must strictly bracket `key`, and the leaf
/// indices must show adjacency (or that the key falls off one end).
pub fn verify_non_existence(root: &Digest, key: &CompoundKey, proof: &NonExistenceProof) -> bool {
    match (&proof.left, &proof.right) {
        (None, None) => false,
        (Some(left), None) => {
            verify_leaf_path(root, left)
                && left.leaf.key < *key
                && left.leaf_index + 1 == left.tree_size
        }
        (None, Some(right)) => {
            verify_leaf_path(root, right) && *key < right.leaf.key && right.leaf_index == 0
        }
        (Some(left), Some(right)) => {
            verify_leaf_path(root, left)
                && verify_leaf_path(root, right)
                && left.tree_size == right.tree_size
                && left.leaf_index + 1 == right.leaf_index
                && left.leaf.key < *key
                && *key < right.leaf.key
        }
    }
}

/// Root of a plain Merkle tree over precomputed leaf digests, using the same
/// pairing and promotion rule as the SMT. Used for the transaction root.
pub fn merkle_root(mut level: Vec<Digest>) -> Digest {
    assert!(!level.is_empty(), "merkle_root needs at least one digest");
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        let mut i = 0;
        while i + 1 < level.len() {
            next.push(codec::internal_digest(&level[i], &level[i + 1]));
            i += 2;
        }
        if i < level.len() {
            next.push(level[i]);
        }
        level = next;
    }
    level[0]
}
