//! Authenticated top-k graph queries over an append-only block ledger.
//!
//! Graph edges are stored as objects in blocks. Each block embeds a two-layer
//! authenticated index: a sorted Merkle tree over compound keys `⟨u, type⟩`
//! whose leaves anchor weight-ordered hash chains of `⟨v, w⟩` values. A light
//! client holding only block headers can verify that a service provider's
//! top-k answer is sound, correct and complete.
//!
//! Two protocols are implemented:
//!
//! - `netchain`: per-block (non-)existence proofs across the whole query
//!   window, local top-k per matched block.
//! - `netchain-plus`: inter-block links (`id_pre` in each SMT leaf) plus a
//!   global Merkle Patricia trie mapping each key to its latest block, so only
//!   matched blocks need proofs, and a two-round scan returning the global
//!   top-k with one out-boundary item per matched block.
//!
//! Module layout follows the data flow: [`codec`] (bytes and digests),
//! [`smt`] / [`mpt`] (proof machinery), [`index`] (per-block ADS),
//! [`ledger`] (block store), [`sp`] (search), [`client`] (verification),
//! [`ingest`] (dataset loading), [`tamper`] (adversary harness).

pub mod client;
pub mod codec;
pub mod index;
pub mod ingest;
pub mod ledger;
pub mod mpt;
pub mod smt;
pub mod sp;
pub mod tamper;

use std::fmt;

/// Which protocol a ledger (and everything derived from it) speaks.
///
/// The mode is fixed when a ledger is created: it decides the SMT leaf layout
/// (`id_pre` present or not), the header size (112 vs 144 bytes) and whether a
/// global MPT is maintained.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum Mode {
    NetChain,
    NetChainPlus,
}

impl Mode {
    pub fn is_plus(self) -> bool {
        matches!(self, Mode::NetChainPlus)
    }

    pub fn as_byte(self) -> u8 {
        match self {
            Mode::NetChain => 0x00,
            Mode::NetChainPlus => 0x01,
        }
    }

    pub fn from_byte(b: u8) -> Result<Self, codec::CodecError> {
        match b {
            0x00 => Ok(Mode::NetChain),
            0x01 => Ok(Mode::NetChainPlus),
            other => Err(codec::CodecError::BadMode(other)),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::NetChain => f.write_str("netchain"),
            Mode::NetChainPlus => f.write_str("netchain-plus"),
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "netchain" => Ok(Mode::NetChain),
            "netchain-plus" | "plus" => Ok(Mode::NetChainPlus),
            other => Err(format!(
                "unknown mode `{other}` (expected `netchain` or `netchain-plus`)"
            )),
        }
    }
}

pub use codec::Digest;
pub use index::{BlockId, CompoundKey, CompoundValue, Object, Weight};
pub use ledger::{BlockHeader, HeaderChain, Store};
pub use sp::{Query, Response};
