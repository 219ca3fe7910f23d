//! End-to-end fixtures with hand-pinned expected values: a 300-block chain
//! whose query key matches at blocks 5, 73 and 219, and its 310-block
//! extension where the key's latest occurrence (301) lies above the window.

mod common;

use common::obj;
use netchain::client::{verify_netchain, verify_netchain_plus};
use netchain::index::Object;
use netchain::ledger::Store;
use netchain::sp::{search_netchain, search_netchain_plus, BlockProof, Query};
use netchain::Mode;

/// Blocks 5, 73, 219 carry the key ⟨u1,t1⟩ with weights chosen so the global
/// top-3 is ⟨v2,18⟩, ⟨v8,15⟩, ⟨v13,11⟩ and the three blocks contribute
/// 0, 1 and 2 of those winners respectively.
fn matched_values(block: usize) -> Option<Vec<Object>> {
    let values: &[(&str, i64)] = match block {
        5 => &[("v1", 9), ("v3", 8), ("v5", 7), ("v7", 2)],
        73 => &[("v2", 18), ("v9", 10), ("v11", 3)],
        219 | 301 => &[("v8", 15), ("v13", 11), ("v15", 6)],
        _ => return None,
    };
    Some(values.iter().map(|(v, w)| obj("u1", v, "t1", *w)).collect())
}

fn build(mode: Mode, blocks: usize) -> Store {
    let mut store = Store::in_memory(mode);
    for i in 0..blocks {
        let mut objects = vec![obj(&format!("other{i}"), "x", "t1", 1)];
        if let Some(matched) = matched_values(i) {
            objects.extend(matched);
        }
        store.append(objects).unwrap();
    }
    store
}

fn expected_top3() -> Vec<(Vec<u8>, i64, i64)> {
    vec![
        (b"v2".to_vec(), 18, 73),
        (b"v8".to_vec(), 15, 219),
        (b"v13".to_vec(), 11, 219),
    ]
}

#[test]
fn three_matched_blocks_among_300_plain_protocol() {
    let store = build(Mode::NetChain, 300);
    let q = Query::new("u1", "t1", 3, 0, 299).unwrap();
    let resp = search_netchain(&store, &q).unwrap();

    // One proof per window block; top-3 prefix from each matched block.
    assert_eq!(resp.proof_count(), 300);
    assert_eq!(resp.matched_count(), 3);
    assert_eq!(resp.results[&5].items.len(), 3);
    assert_eq!(resp.results[&73].items.len(), 3);
    assert_eq!(resp.results[&219].items.len(), 3);

    let result = verify_netchain(&store.headers(), &q, &resp).unwrap();
    let got: Vec<(Vec<u8>, i64, i64)> = result
        .entries
        .iter()
        .map(|(cv, b)| (cv.v.clone(), cv.w, *b))
        .collect();
    assert_eq!(got, expected_top3());
}

#[test]
fn latest_occurrence_above_the_window_plus_protocol() {
    let store = build(Mode::NetChainPlus, 310);
    let q = Query::new("u1", "t1", 3, 0, 299).unwrap();
    let resp = search_netchain_plus(&store, &q).unwrap();

    // The key's latest occurrence is block 301 (> ub), so 301 is the out
    // boundary and its id_pre (219) the right boundary.
    assert_eq!(resp.out_boundary, Some(301));
    assert!(resp.mpt_proof.is_none());
    let ids: Vec<i64> = resp.proofs.keys().copied().collect();
    assert_eq!(ids, vec![5, 73, 219, 301]);
    match &resp.proofs[&301] {
        BlockProof::Existence(p) => assert_eq!(p.leaf.id_pre, Some(219)),
        _ => panic!("boundary proof must be an existence proof"),
    }

    // Winner counts per matched block: 0 in blk5, 1 in blk73, 2 in blk219.
    // Each returns its winners plus one out-boundary item.
    assert_eq!(resp.results[&5].items.len(), 1);
    assert_eq!(resp.results[&73].items.len(), 2);
    assert_eq!(resp.results[&219].items.len(), 3);
    assert_eq!(resp.item_count(), 6); // ≤ k + matched blocks

    let result = verify_netchain_plus(&store.headers(), &q, &resp).unwrap();
    let got: Vec<(Vec<u8>, i64, i64)> = result
        .entries
        .iter()
        .map(|(cv, b)| (cv.v.clone(), cv.w, *b))
        .collect();
    assert_eq!(got, expected_top3());
}

#[test]
fn latest_occurrence_inside_the_window_uses_the_mpt_anchor() {
    let store = build(Mode::NetChainPlus, 300);
    let q = Query::new("u1", "t1", 3, 0, 299).unwrap();
    let resp = search_netchain_plus(&store, &q).unwrap();
    assert_eq!(resp.out_boundary, Some(219));
    assert!(resp.mpt_proof.is_some());
    let ids: Vec<i64> = resp.proofs.keys().copied().collect();
    assert_eq!(ids, vec![5, 73, 219]);

    let result = verify_netchain_plus(&store.headers(), &q, &resp).unwrap();
    assert_eq!(result.entries.len(), 3);
}

#[test]
fn plus_response_is_smaller_on_sparse_matches() {
    let plain = build(Mode::NetChain, 300);
    let plus = build(Mode::NetChainPlus, 300);
    let q = Query::new("u1", "t1", 3, 0, 299).unwrap();
    let plain_bytes = search_netchain(&plain, &q).unwrap().to_bytes().len();
    let plus_bytes = search_netchain_plus(&plus, &q).unwrap().to_bytes().len();
    assert!(
        plus_bytes < plain_bytes,
        "expected {plus_bytes} < {plain_bytes}"
    );
}
