//! Merkle Patricia trie mapping each compound key to the block id where it
//! most recently appeared.
//!
//! Keys enter the trie as the nibble expansion of their canonical encoding
//! (not a hash of it), so the prefix structure of keys is preserved. Values
//! only ever move forward to newer blocks; there is no deletion.
//!
//! Node digests are `H(0x04 ‖ node encoding)`. The root of the empty trie is
//! `H(0x04)` over the empty encoding, so "no data yet" is itself provable.
//!
//! Updates are copy-on-write: every `set` writes fresh nodes and leaves the
//! previous version intact, which is what lets each sealed block header pin
//! the trie root as it stood at that block.

use crate::codec::{self, ByteReader, ByteWriter, CodecError, Digest};
use crate::index::{BlockId, CompoundKey};
use std::collections::HashMap;

/// Root digest of the empty trie.
pub fn empty_root() -> Digest {
    codec::mpt_node_digest(&[])
}

const KIND_LEAF: u8 = 0x00;
const KIND_EXTENSION: u8 = 0x01;
const KIND_BRANCH: u8 = 0x02;

#[derive(Clone, Debug, PartialEq, Eq)]
enum Node {
    Leaf {
        path: Vec<u8>,
        value: BlockId,
    },
    Extension {
        path: Vec<u8>,
        child: Digest,
    },
    Branch {
        children: Box<[Option<Digest>; 16]>,
        value: Option<BlockId>,
    },
}

impl Node {
    fn encode(&self) -> Vec<u8> {
        let mut wtr = ByteWriter::new();
        match self {
            Node::Leaf { path, value } => {
                wtr.put_u8(KIND_LEAF);
                wtr.put_bytes(path);
                wtr.put_i64(*value);
            }
            Node::Extension { path, child } => {
                wtr.put_u8(KIND_EXTENSION);
                wtr.put_bytes(path);
                wtr.put_digest(child);
            }
            Node::Branch { children, value } => {
                wtr.put_u8(KIND_BRANCH);
                for child in children.iter() {
                    match child {
                        None => wtr.put_u8(0x00),
                        Some(d) => {
                            wtr.put_u8(0x01);
                            wtr.put_digest(d);
                        }
                    }
                }
                match value {
                    None => wtr.put_u8(0x00),
                    Some(v) => {
                        wtr.put_u8(0x01);
                        wtr.put_i64(*v);
                    }
                }
            }
        }
        wtr.into_vec()
    }

    fn decode(buf: &[u8]) -> Result<Node, CodecError> {
        let mut rdr = ByteReader::new(buf);
        let node = match rdr.get_u8()? {
            KIND_LEAF => Node::Leaf {
                path: read_nibble_path(&mut rdr)?,
                value: rdr.get_i64()?,
            },
            KIND_EXTENSION => {
                let path = read_nibble_path(&mut rdr)?;
                if path.is_empty() {
                    return Err(CodecError::BadField("extension path must be nonempty"));
                }
                Node::Extension {
                    path,
                    child: rdr.get_digest()?,
                }
            }
            KIND_BRANCH => {
                let mut children: [Option<Digest>; 16] = Default::default();
                for slot in children.iter_mut() {
                    *slot = match rdr.get_u8()? {
                        0x00 => None,
                        0x01 => Some(rdr.get_digest()?),
                        found => {
                            return Err(CodecError::BadTag {
                                found,
                                offset: rdr.position() - 1,
                            })
                        }
                    };
                }
                let value = match rdr.get_u8()? {
                    0x00 => None,
                    0x01 => Some(rdr.get_i64()?),
                    found => {
                        return Err(CodecError::BadTag {
                            found,
                            offset: rdr.position() - 1,
                        })
                    }
                };
                Node::Branch {
                    children: Box::new(children),
                    value,
                }
            }
            found => return Err(CodecError::BadTag { found, offset: 0 }),
        };
        rdr.finish()?;
        Ok(node)
    }
}

fn read_nibble_path(rdr: &mut ByteReader) -> Result<Vec<u8>, CodecError> {
    let path = rdr.get_bytes()?;
    if path.iter().any(|&n| n > 0x0f) {
        return Err(CodecError::BadField("nibble out of range"));
    }
    Ok(path)
}

/// Nibble expansion of a compound key's canonical bytes, high nibble first.
pub fn key_nibbles(key: &CompoundKey) -> Vec<u8> {
    bytes_to_nibbles(&key.canonical_bytes())
}

fn bytes_to_nibbles(bytes: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push(b >> 4);
        out.push(b & 0x0f);
    }
    out
}

fn common_prefix_len(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b.iter()).take_while(|(x, y)| x == y).count()
}

/// Proof for a `get`: the canonical node encodings along the lookup path, root
/// first. For an absent key the path ends at the node where the key's nibbles
/// diverge; for the empty trie the path is empty.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct MptProof {
    pub nodes: Vec<Vec<u8>>,
}

/// In-memory trie with a node log keyed by digest. Historical roots stay
/// readable because nodes are never overwritten.
#[derive(Clone, Debug)]
pub struct MptStore {
    nodes: HashMap<Digest, Node>,
    root: Digest,
    dirty: Vec<Digest>,
}

impl Default for MptStore {
    fn default() -> Self {
        Self::new()
    }
}

impl MptStore {
    pub fn new() -> Self {
        MptStore {
            nodes: HashMap::new(),
            root: empty_root(),
            dirty: Vec::new(),
        }
    }

    /// Rebuilds a store from persisted node encodings and a trusted root.
    /// Every node is re-keyed by its recomputed digest, so a corrupted log
    /// entry can only ever make lookups fail, not verify.
    pub fn from_node_log(encodings: &[Vec<u8>], root: Digest) -> Result<Self, CodecError> {
        let mut nodes = HashMap::with_capacity(encodings.len());
        for enc in encodings {
            let node = Node::decode(enc)?;
            nodes.insert(codec::mpt_node_digest(enc), node);
        }
        Ok(MptStore {
            nodes,
            root,
            dirty: Vec::new(),
        })
    }

    pub fn root(&self) -> Digest {
        self.root
    }

    pub fn is_empty(&self) -> bool {
        self.root == empty_root()
    }

    /// Drains the encodings of nodes written since the last drain, for
    /// appending to the persistent node log.
    pub fn drain_new_nodes(&mut self) -> Vec<Vec<u8>> {
        let dirty = std::mem::take(&mut self.dirty);
        dirty.into_iter().map(|d| self.nodes[&d].encode()).collect()
    }

    fn put(&mut self, node: Node) -> Digest {
        let digest = codec::mpt_node_digest(&node.encode());
        if let std::collections::hash_map::Entry::Vacant(e) = self.nodes.entry(digest) {
            e.insert(node);
            self.dirty.push(digest);
        }
        digest
    }

    fn node(&self, digest: &Digest) -> &Node {
        self.nodes
            .get(digest)
            .expect("mpt node log is missing a referenced node")
    }

    /// Updates the value of `key`, returning the new root.
    pub fn set(&mut self, key: &CompoundKey, value: BlockId) -> Digest {
        let path = key_nibbles(key);
        self.root = if self.is_empty() {
            self.put(Node::Leaf { path, value })
        } else {
            self.insert(self.root, &path, value)
        };
        self.root
    }

    fn insert(&mut self, at: Digest, path: &[u8], value: BlockId) -> Digest {
        match self.node(&at).clone() {
            Node::Leaf {
                path: lpath,
                value: lvalue,
            } => {
                if lpath == path {
                    return self.put(Node::Leaf {
                        path: path.to_vec(),
                        value,
                    });
                }
                let split = common_prefix_len(&lpath, path);
                let mut children: [Option<Digest>; 16] = Default::default();
                let mut branch_value = None;
                if lpath.len() == split {
                    branch_value = Some(lvalue);
                } else {
                    let d = self.put(Node::Leaf {
                        path: lpath[split + 1..].to_vec(),
                        value: lvalue,
                    });
                    children[lpath[split] as usize] = Some(d);
                }
                if path.len() == split {
                    branch_value = Some(value);
                } else {
                    let d = self.put(Node::Leaf {
                        path: path[split + 1..].to_vec(),
                        value,
                    });
                    children[path[split] as usize] = Some(d);
                }
                let branch = self.put(Node::Branch {
                    children: Box::new(children),
                    value: branch_value,
                });
                if split > 0 {
                    self.put(Node::Extension {
                        path: path[..split].to_vec(),
                        child: branch,
                    })
                } else {
                    branch
                }
            }
            Node::Extension { path: epath, child } => {
                let split = common_prefix_len(&epath, path);
                if split == epath.len() {
                    let new_child = self.insert(child, &path[split..], value);
                    return self.put(Node::Extension {
                        path: epath,
                        child: new_child,
                    });
                }
                let mut children: [Option<Digest>; 16] = Default::default();
                let mut branch_value = None;
                // Reattach the extension's tail below the split point.
                let tail = &epath[split + 1..];
                let reattached = if tail.is_empty() {
                    child
                } else {
                    self.put(Node::Extension {
                        path: tail.to_vec(),
                        child,
                    })
                };
                children[epath[split] as usize] = Some(reattached);
                if path.len() == split {
                    branch_value = Some(value);
                } else {
                    let d = self.put(Node::Leaf {
                        path: path[split + 1..].to_vec(),
                        value,
                    });
                    children[path[split] as usize] = Some(d);
                }
                let branch = self.put(Node::Branch {
                    children: Box::new(children),
                    value: branch_value,
                });
                if split > 0 {
                    self.put(Node::Extension {
                        path: path[..split].to_vec(),
                        child: branch,
                    })
                } else {
                    branch
                }
            }
            Node::Branch {
                mut children,
                value: bvalue,
            } => {
                if path.is_empty() {
                    return self.put(Node::Branch {
                        children,
                        value: Some(value),
                    });
                }
                let nib = path[0] as usize;
                let new_child = match children[nib] {
                    None => self.put(Node::Leaf {
                        path: path[1..].to_vec(),
                        value,
                    }),
                    Some(child) => self.insert(child, &path[1..], value),
                };
                children[nib] = Some(new_child);
                self.put(Node::Branch {
                    children,
                    value: bvalue,
                })
            }
        }
    }

    /// Looks up `key` under the current root, returning the stored value (or
    /// `None`) together with a proof of that answer.
    pub fn get(&self, key: &CompoundKey) -> (Option<BlockId>, MptProof) {
        self.get_at(self.root, key)
    }

    /// Lookup against any historical root that the node log still covers.
    pub fn get_at(&self, root: Digest, key: &CompoundKey) -> (Option<BlockId>, MptProof) {
        self.try_get_at(root, key)
            .expect("mpt node log is missing a referenced node")
    }

    /// Like [`Self::get_at`], but a node missing from the log (a corrupted or
    /// incomplete persistence layer) is reported instead of being fatal.
    pub fn try_get_at(
        &self,
        root: Digest,
        key: &CompoundKey,
    ) -> Result<(Option<BlockId>, MptProof), Digest> {
        let mut proof = MptProof::default();
        if root == empty_root() {
            return Ok((None, proof));
        }
        let nibbles = key_nibbles(key);
        let mut cursor: &[u8] = &nibbles;
        let mut at = root;
        loop {
            let node = self.nodes.get(&at).ok_or(at)?;
            proof.nodes.push(node.encode());
            match node {
                Node::Leaf { path, value } => {
                    let found = if cursor == path.as_slice() {
                        Some(*value)
                    } else {
                        None
                    };
                    return Ok((found, proof));
                }
                Node::Extension { path, child } => {
                    if cursor.starts_with(path) {
                        cursor = &cursor[path.len()..];
                        at = *child;
                    } else {
                        return Ok((None, proof));
                    }
                }
                Node::Branch { children, value } => {
                    if cursor.is_empty() {
                        return Ok((*value, proof));
                    }
                    match children[cursor[0] as usize] {
                        Some(child) => {
                            cursor = &cursor[1..];
                            at = child;
                        }
                        None => return Ok((None, proof)),
                    }
                }
            }
        }
    }
}

/// Checks that `value` is what the trie with root `root` associates with
/// `key` (`None` meaning the key is absent). Pure; never consults a store.
pub fn kv_check(
    root: &Digest,
    key: &CompoundKey,
    value: Option<BlockId>,
    proof: &MptProof,
) -> bool {
    let nibbles = key_nibbles(key);
    kv_check_nibbles(root, &nibbles, value, proof)
}

fn kv_check_nibbles(
    root: &Digest,
    nibbles: &[u8],
    value: Option<BlockId>,
    proof: &MptProof,
) -> bool {
    if proof.nodes.is_empty() {
        return *root == empty_root() && value.is_none();
    }
    let mut expected = *root;
    let mut cursor = nibbles;
    let last = proof.nodes.len() - 1;
    for (i, enc) in proof.nodes.iter().enumerate() {
        if codec::mpt_node_digest(enc) != expected {
            return false;
        }
        let node = match Node::decode(enc) {
            Ok(n) => n,
            Err(_) => return false,
        };
        let is_last = i == last;
        match node {
            Node::Leaf { path, value: v } => {
                if !is_last {
                    return false;
                }
                return if cursor == path.as_slice() {
                    value == Some(v)
                } else {
                    value.is_none() // path diverges: proof of absence
                };
            }
            Node::Extension { path, child } => {
                if !cursor.starts_with(&path) {
                    // Divergence inside the extension label.
                    return is_last && value.is_none();
                }
                if is_last {
                    return false; // path continues below: nothing is proven
                }
                cursor = &cursor[path.len()..];
                expected = child;
            }
            Node::Branch { children, value: v } => {
                if cursor.is_empty() {
                    return is_last && value == v;
                }
                match children[cursor[0] as usize] {
                    None => return is_last && value.is_none(),
                    Some(child) => {
                        if is_last {
                            return false;
                        }
                        cursor = &cursor[1..];
                        expected = child;
                    }
                }
            }
        }
    }
    false
}
