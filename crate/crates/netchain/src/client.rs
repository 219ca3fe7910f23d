//! Light-client verification: checks a [`Response`] against block headers
//! only, enforcing soundness, correctness and completeness, and emits the
//! final top-k result.
//!
//! Verification is all-or-nothing: the first failed check aborts with a
//! [`VerifyError`] naming the offending block and the kind of violation. The
//! verifier has no ledger access by construction; everything it reads is the
//! header chain and the response payload.
//!
//! Plus-mode verification anchors completeness in two places: the claimed out
//! boundary block `b` (checked against the MPT root in the latest header, or
//! via an existence proof whose leaf pins `id_pre` at or below `ub`), and the
//! `id_pre` walk from the right boundary, which must step through every
//! matched block down and out of the window. Results for blocks the walk never
//! reaches are rejected outright; otherwise unverified items could displace
//! real winners from the final top-k.

use crate::index::{BlockId, CompoundValue};
use crate::ledger::HeaderChain;
use crate::mpt;
use crate::smt;
use crate::sp::{BlockProof, BlockResult, Candidate, Query, Response};
use crate::Mode;
use std::collections::{BTreeSet, HashSet};
use std::fmt;
use thiserror::Error;

/// Why a response was rejected.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum VerifyErrorKind {
    /// A membership proof failed, carried the wrong claim type, or the
    /// response envelope does not fit the protocol being verified.
    ProofFailure,
    /// A proof's leaf key differs from the queried compound key.
    KeyMismatch,
    /// Hash-chain recomputation did not reproduce a pointer.
    ChainBreak,
    /// A matched block returned fewer items than it can prove it holds.
    Truncation,
    /// The boundary anchoring or the id_pre walk structure is violated.
    BoundaryViolation,
    /// An id inside the window lacks a proof or result, or entries fall
    /// outside the window.
    CoverageGap,
    /// The MPT proof is missing or does not check out against H_m.
    MptFailure,
}

impl VerifyErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VerifyErrorKind::ProofFailure => "proof-failure",
            VerifyErrorKind::KeyMismatch => "key-mismatch",
            VerifyErrorKind::ChainBreak => "chain-break",
            VerifyErrorKind::Truncation => "truncation",
            VerifyErrorKind::BoundaryViolation => "boundary-violation",
            VerifyErrorKind::CoverageGap => "coverage-gap",
            VerifyErrorKind::MptFailure => "mpt-failure",
        }
    }
}

impl fmt::Display for VerifyErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Error)]
#[error("{kind}{}", .block.map(|b| format!(" at block {b}")).unwrap_or_default())]
pub struct VerifyError {
    pub kind: VerifyErrorKind,
    pub block: Option<BlockId>,
}

impl VerifyError {
    fn at(kind: VerifyErrorKind, block: BlockId) -> Self {
        VerifyError {
            kind,
            block: Some(block),
        }
    }

    fn global(kind: VerifyErrorKind) -> Self {
        VerifyError { kind, block: None }
    }
}

/// The accepted answer: at most `k` entries, weights non-increasing, every
/// entry traceable to a hash-verified chain item in its source block.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct VerifiedResult {
    pub entries: Vec<(CompoundValue, BlockId)>,
}

/// Verifies a plain-mode response: every id in the window needs a proof, and
/// matched blocks must justify their local prefixes.
pub fn verify_netchain(
    headers: &HeaderChain,
    q: &Query,
    resp: &Response,
) -> Result<VerifiedResult, VerifyError> {
    if resp.mode != Mode::NetChain {
        return Err(VerifyError::global(VerifyErrorKind::ProofFailure));
    }
    if headers.get(q.ub()).is_none() {
        return Err(VerifyError::global(VerifyErrorKind::CoverageGap));
    }
    for &id in resp.results.keys().chain(resp.proofs.keys()) {
        if id < q.lb() || id > q.ub() {
            return Err(VerifyError::at(VerifyErrorKind::CoverageGap, id));
        }
    }

    let key = q.key();
    let mut candidates: Vec<Candidate> = Vec::new();
    for id in q.window() {
        let header = headers.get(id).expect("window covered");
        let proof = resp
            .proofs
            .get(&id)
            .ok_or_else(|| VerifyError::at(VerifyErrorKind::CoverageGap, id))?;
        let result = resp
            .results
            .get(&id)
            .ok_or_else(|| VerifyError::at(VerifyErrorKind::CoverageGap, id))?;
        match (result.matched, proof) {
            (true, BlockProof::Existence(proof)) => {
                if proof.leaf.key != key {
                    return Err(VerifyError::at(VerifyErrorKind::KeyMismatch, id));
                }
                if !smt::verify_existence(&header.h_s, &key, proof) {
                    return Err(VerifyError::at(VerifyErrorKind::ProofFailure, id));
                }
                check_chain(result, &proof.leaf.ptr_h, id)?;
                // Fewer than k items is only acceptable when the chain
                // provably ends there.
                if result.items.len() < q.k()
                    && result.items.last().expect("nonempty").ptr.is_some()
                {
                    return Err(VerifyError::at(VerifyErrorKind::Truncation, id));
                }
                collect(&mut candidates, result);
            }
            (false, BlockProof::NonExistence(proof)) => {
                if !smt::verify_non_existence(&header.h_s, &key, proof) {
                    return Err(VerifyError::at(VerifyErrorKind::ProofFailure, id));
                }
            }
            _ => return Err(VerifyError::at(VerifyErrorKind::ProofFailure, id)),
        }
    }

    Ok(finish(candidates, q.k()))
}

/// Verifies a plus-mode response: boundary anchoring, then the id_pre walk
/// with per-item winner/boundary/chain-end discipline.
pub fn verify_netchain_plus(
    headers: &HeaderChain,
    q: &Query,
    resp: &Response,
) -> Result<VerifiedResult, VerifyError> {
    if resp.mode != Mode::NetChainPlus {
        return Err(VerifyError::global(VerifyErrorKind::ProofFailure));
    }
    if headers.get(q.ub()).is_none() {
        return Err(VerifyError::global(VerifyErrorKind::CoverageGap));
    }
    let latest = headers.last().expect("nonempty by the check above");
    let key = q.key();

    // No boundary claimed: the key must provably be absent from the MPT.
    let Some(out) = resp.out_boundary else {
        let proof = resp
            .mpt_proof
            .as_ref()
            .ok_or_else(|| VerifyError::global(VerifyErrorKind::MptFailure))?;
        let h_m = latest
            .h_m
            .as_ref()
            .ok_or_else(|| VerifyError::global(VerifyErrorKind::MptFailure))?;
        if !mpt::kv_check(h_m, &key, None, proof) {
            return Err(VerifyError::global(VerifyErrorKind::MptFailure));
        }
        if !resp.results.is_empty() || !resp.proofs.is_empty() {
            return Err(VerifyError::global(VerifyErrorKind::BoundaryViolation));
        }
        return Ok(VerifiedResult::default());
    };

    // Results may only name blocks inside the window; the boundary proof is
    // the single tolerated out-of-window proof entry.
    for (&id, r) in &resp.results {
        if id < q.lb() || id > q.ub() {
            return Err(VerifyError::at(VerifyErrorKind::BoundaryViolation, id));
        }
        if !r.matched {
            return Err(VerifyError::at(VerifyErrorKind::BoundaryViolation, id));
        }
    }

    // Candidate pool and the unverified top-k over it. Every entry will be
    // hash-verified during the walk; entries the walk cannot reach cause
    // rejection further down.
    let mut candidates: Vec<Candidate> = Vec::new();
    for result in resp.results.values() {
        collect(&mut candidates, result);
    }
    let top = crate::sp::select_top_k(candidates, q.k());
    let winners: HashSet<(BlockId, u32)> = top.iter().map(|c| (c.block, c.pos)).collect();

    // Anchor the out boundary block.
    let right = if out <= q.ub() {
        if out < 0 {
            return Err(VerifyError::global(VerifyErrorKind::BoundaryViolation));
        }
        let proof = resp
            .mpt_proof
            .as_ref()
            .ok_or_else(|| VerifyError::global(VerifyErrorKind::MptFailure))?;
        let h_m = latest
            .h_m
            .as_ref()
            .ok_or_else(|| VerifyError::global(VerifyErrorKind::MptFailure))?;
        if !mpt::kv_check(h_m, &key, Some(out), proof) {
            return Err(VerifyError::global(VerifyErrorKind::MptFailure));
        }
        out
    } else {
        if resp.mpt_proof.is_some() {
            // The boundary proof route must not smuggle in a second anchor.
            return Err(VerifyError::global(VerifyErrorKind::BoundaryViolation));
        }
        if headers.get(out).is_none() {
            return Err(VerifyError::at(VerifyErrorKind::BoundaryViolation, out));
        }
        let proof = match resp.proofs.get(&out) {
            Some(BlockProof::Existence(p)) => p,
            _ => return Err(VerifyError::at(VerifyErrorKind::BoundaryViolation, out)),
        };
        if proof.leaf.key != key {
            return Err(VerifyError::at(VerifyErrorKind::KeyMismatch, out));
        }
        let header = headers.get(out).expect("checked above");
        if !smt::verify_existence(&header.h_s, &key, proof) {
            return Err(VerifyError::at(VerifyErrorKind::ProofFailure, out));
        }
        let Some(id_pre) = proof.leaf.id_pre else {
            return Err(VerifyError::at(VerifyErrorKind::ProofFailure, out));
        };
        if id_pre > q.ub() {
            return Err(VerifyError::at(VerifyErrorKind::BoundaryViolation, out));
        }
        id_pre
    };

    // Walk the matched blocks from the right boundary, newest to oldest. Each
    // verified leaf hands over the next id, so a skipped matched block leaves
    // a hole the walk exposes.
    let mut visited: BTreeSet<BlockId> = BTreeSet::new();
    let mut cursor = right;
    while cursor >= q.lb() && cursor <= q.ub() {
        let id = cursor;
        let header = headers.get(id).expect("window covered");
        let proof = match resp.proofs.get(&id) {
            Some(BlockProof::Existence(p)) => p,
            Some(BlockProof::NonExistence(_)) => {
                return Err(VerifyError::at(VerifyErrorKind::ProofFailure, id))
            }
            None => return Err(VerifyError::at(VerifyErrorKind::BoundaryViolation, id)),
        };
        if proof.leaf.key != key {
            return Err(VerifyError::at(VerifyErrorKind::KeyMismatch, id));
        }
        if !smt::verify_existence(&header.h_s, &key, proof) {
            return Err(VerifyError::at(VerifyErrorKind::ProofFailure, id));
        }
        let result = resp
            .results
            .get(&id)
            .ok_or_else(|| VerifyError::at(VerifyErrorKind::BoundaryViolation, id))?;
        check_chain(result, &proof.leaf.ptr_h, id)?;

        // Winner/boundary/chain-end discipline per returned item: interior
        // items must be winners; the final item is either a non-winner (the
        // out-boundary item) or a winner sitting at the proven chain end.
        let last = result.items.len();
        for (i, item) in result.items.iter().enumerate() {
            let pos = i as u32 + 1;
            let is_winner = winners.contains(&(id, pos));
            let is_last = i + 1 == last;
            if !is_last && !is_winner {
                return Err(VerifyError::at(VerifyErrorKind::BoundaryViolation, id));
            }
            if is_last && is_winner && item.ptr.is_some() {
                return Err(VerifyError::at(VerifyErrorKind::Truncation, id));
            }
        }

        visited.insert(id);
        let Some(id_pre) = proof.leaf.id_pre else {
            return Err(VerifyError::at(VerifyErrorKind::ProofFailure, id));
        };
        if id_pre >= id {
            return Err(VerifyError::at(VerifyErrorKind::BoundaryViolation, id));
        }
        cursor = id_pre;
    }

    // Nothing outside the walk may carry results or proofs.
    for &id in resp.results.keys() {
        if !visited.contains(&id) {
            return Err(VerifyError::at(VerifyErrorKind::BoundaryViolation, id));
        }
    }
    for &id in resp.proofs.keys() {
        if !visited.contains(&id) && !(out > q.ub() && id == out) {
            return Err(VerifyError::at(VerifyErrorKind::BoundaryViolation, id));
        }
    }

    let entries = top
        .into_iter()
        .map(|c| (CompoundValue { v: c.v, w: c.w }, c.block))
        .collect();
    Ok(VerifiedResult { entries })
}

/// Dispatches on the response's protocol.
pub fn verify(
    headers: &HeaderChain,
    q: &Query,
    resp: &Response,
) -> Result<VerifiedResult, VerifyError> {
    match resp.mode {
        Mode::NetChain => verify_netchain(headers, q, resp),
        Mode::NetChainPlus => verify_netchain_plus(headers, q, resp),
    }
}

/// Recomputes the hash chain of a returned prefix against the verified head
/// pointer from the SMT leaf.
fn check_chain(
    result: &BlockResult,
    ptr_h: &crate::codec::Digest,
    id: BlockId,
) -> Result<(), VerifyError> {
    if result.items.is_empty() {
        return Err(VerifyError::at(VerifyErrorKind::Truncation, id));
    }
    let mut expected = *ptr_h;
    let last = result.items.len() - 1;
    for (i, item) in result.items.iter().enumerate() {
        if item.digest() != expected {
            return Err(VerifyError::at(VerifyErrorKind::ChainBreak, id));
        }
        if i < last {
            expected = match item.ptr {
                Some(d) => d,
                // ⊥ in the middle: the following items hang off nothing.
                None => return Err(VerifyError::at(VerifyErrorKind::ChainBreak, id)),
            };
        }
    }
    Ok(())
}

fn collect(candidates: &mut Vec<Candidate>, result: &BlockResult) {
    for (i, item) in result.items.iter().enumerate() {
        candidates.push(Candidate {
            w: item.value.w,
            block: result.block_id,
            pos: i as u32 + 1,
            v: item.value.v.clone(),
        });
    }
}

fn finish(candidates: Vec<Candidate>, k: usize) -> VerifiedResult {
    let entries = crate::sp::select_top_k(candidates, k)
        .into_iter()
        .map(|c| (CompoundValue { v: c.v, w: c.w }, c.block))
        .collect();
    VerifiedResult { entries }
}
