//! Adversary harness: named mutations applied to honest responses.
//!
//! Each strategy models one way a misbehaving service provider could try to
//! cheat: fabricating or altering objects, hiding matched blocks, cutting
//! chains short, mislabeling winners as boundary items, or lying about the
//! boundary block. A correct verifier must reject every one of them; the
//! `identity` strategy double-checks that the harness itself is not what makes
//! responses fail.
//!
//! Mutations are deterministic: the first applicable site in block-id order is
//! chosen, so a given (response, strategy) pair always yields the same forgery.

use crate::index::BlockId;
use crate::sp::{select_top_k, Candidate, Response};
use crate::Mode;
use std::collections::HashSet;
use std::fmt;
use thiserror::Error;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Strategy {
    /// No mutation; the response must still verify.
    Identity,
    /// Replace a returned object's end vertex with a fabricated one.
    ForgeObject,
    /// Remove a matched block's result and proof entirely.
    DropMatchedBlock,
    /// Drop the tail of a returned chain prefix.
    ShortenChain,
    /// Truncate a prefix so that a top-k winner poses as the boundary item.
    RelabelValidAsBoundary,
    /// Bump a returned item's weight.
    SwapWeight,
    /// Swap two adjacent items within a returned prefix.
    ReorderItems,
    /// Claim a wrong boundary block (plain mode: substitute a foreign proof).
    StaleBoundary,
}

impl Strategy {
    pub const ALL: [Strategy; 8] = [
        Strategy::Identity,
        Strategy::ForgeObject,
        Strategy::DropMatchedBlock,
        Strategy::ShortenChain,
        Strategy::RelabelValidAsBoundary,
        Strategy::SwapWeight,
        Strategy::ReorderItems,
        Strategy::StaleBoundary,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Identity => "identity",
            Strategy::ForgeObject => "forge-object",
            Strategy::DropMatchedBlock => "drop-matched-block",
            Strategy::ShortenChain => "shorten-chain",
            Strategy::RelabelValidAsBoundary => "relabel-valid-as-boundary",
            Strategy::SwapWeight => "swap-weight",
            Strategy::ReorderItems => "reorder-items",
            Strategy::StaleBoundary => "stale-boundary",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Strategy {
    type Err = TamperError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| TamperError::UnknownStrategy(s.to_string()))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TamperError {
    #[error("unknown tamper strategy `{0}`")]
    UnknownStrategy(String),
    #[error("strategy `{strategy}` does not apply to this response: {reason}")]
    NotApplicable {
        strategy: Strategy,
        reason: &'static str,
    },
}

fn not_applicable(strategy: Strategy, reason: &'static str) -> TamperError {
    TamperError::NotApplicable { strategy, reason }
}

/// Block ids of matched results, ascending.
fn matched_ids(resp: &Response) -> Vec<BlockId> {
    resp.results
        .values()
        .filter(|r| r.matched)
        .map(|r| r.block_id)
        .collect()
}

/// The verifier-side winner instances (block, 1-based position), recomputed
/// from the response alone.
fn winner_instances(resp: &Response) -> HashSet<(BlockId, u32)> {
    let mut candidates = Vec::new();
    for r in resp.results.values() {
        for (i, item) in r.items.iter().enumerate() {
            candidates.push(Candidate {
                w: item.value.w,
                block: r.block_id,
                pos: i as u32 + 1,
                v: item.value.v.clone(),
            });
        }
    }
    select_top_k(candidates, resp.query.k())
        .into_iter()
        .map(|c| (c.block, c.pos))
        .collect()
}

/// Applies `strategy` to an honest response, producing the forged variant.
pub fn apply(resp: &Response, strategy: Strategy) -> Result<Response, TamperError> {
    let mut forged = resp.clone();
    match strategy {
        Strategy::Identity => Ok(forged),

        Strategy::ForgeObject => {
            let id = matched_ids(resp)
                .into_iter()
                .find(|id| !resp.results[id].items.is_empty())
                .ok_or(not_applicable(strategy, "no returned items"))?;
            forged.results.get_mut(&id).unwrap().items[0]
                .value
                .v
                .push(b'!');
            Ok(forged)
        }

        Strategy::SwapWeight => {
            let id = matched_ids(resp)
                .into_iter()
                .find(|id| !resp.results[id].items.is_empty())
                .ok_or(not_applicable(strategy, "no returned items"))?;
            forged.results.get_mut(&id).unwrap().items[0].value.w += 1;
            Ok(forged)
        }

        Strategy::ReorderItems => {
            let id = matched_ids(resp)
                .into_iter()
                .find(|id| resp.results[id].items.len() >= 2)
                .ok_or(not_applicable(strategy, "no prefix with two items"))?;
            forged.results.get_mut(&id).unwrap().items.swap(0, 1);
            Ok(forged)
        }

        Strategy::DropMatchedBlock => {
            let id = matched_ids(resp)
                .into_iter()
                .next()
                .ok_or(not_applicable(strategy, "no matched block"))?;
            forged.results.remove(&id);
            forged.proofs.remove(&id);
            Ok(forged)
        }

        Strategy::ShortenChain => {
            let ids = matched_ids(resp);
            let id = ids
                .iter()
                .copied()
                .find(|id| resp.results[id].items.len() >= 2)
                .or_else(|| {
                    ids.into_iter()
                        .find(|id| !resp.results[id].items.is_empty())
                })
                .ok_or(not_applicable(strategy, "no returned items"))?;
            forged.results.get_mut(&id).unwrap().items.pop();
            Ok(forged)
        }

        Strategy::RelabelValidAsBoundary => {
            // Find a prefix whose head is a winner and which has at least one
            // follow-up item; cutting after the head claims the winner is the
            // out-boundary item (i.e. that it never made the top-k).
            let winners = winner_instances(resp);
            let id = matched_ids(resp)
                .into_iter()
                .find(|id| resp.results[id].items.len() >= 2 && winners.contains(&(*id, 1)))
                .ok_or(not_applicable(
                    strategy,
                    "no block whose head item is a winner with a successor",
                ))?;
            forged.results.get_mut(&id).unwrap().items.truncate(1);
            Ok(forged)
        }

        Strategy::StaleBoundary => match resp.mode {
            Mode::NetChainPlus => {
                let b = resp
                    .out_boundary
                    .ok_or(not_applicable(strategy, "response has no boundary"))?;
                forged.out_boundary = Some(b - 1);
                Ok(forged)
            }
            Mode::NetChain => {
                // No boundary exists in plain mode; the closest lie is pinning
                // a matched claim to a proof taken from a different block.
                let id = matched_ids(resp)
                    .into_iter()
                    .next()
                    .ok_or(not_applicable(strategy, "no matched block"))?;
                let donor = resp
                    .proofs
                    .iter()
                    .find(|(other, _)| **other != id)
                    .map(|(_, p)| p.clone())
                    .ok_or(not_applicable(strategy, "single-block window"))?;
                forged.proofs.insert(id, donor);
                Ok(forged)
            }
        },
    }
}

/// Applies a strategy by name.
pub fn apply_named(resp: &Response, name: &str) -> Result<Response, TamperError> {
    apply(resp, name.parse()?)
}
