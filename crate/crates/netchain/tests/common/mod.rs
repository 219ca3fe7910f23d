#![allow(dead_code)] // each test target uses its own subset of these helpers

//! Shared fixtures and the brute-force oracle used by the integration suites.

use netchain::index::{BlockId, Object};
use netchain::ledger::Store;
use netchain::sp::Query;
use netchain::Mode;
use rand::rngs::StdRng;
use rand::Rng;

pub fn obj(u: &str, v: &str, t: &str, w: i64) -> Object {
    Object::new(u, v, t, w).unwrap()
}

/// Flat-scan top-k over the raw objects of every window block, ranked by
/// weight descending with ties broken by block id, then by position in the
/// block's weight-then-vertex-then-arrival order. Never touches the index,
/// the search engines or the verifier.
pub fn oracle_top_k(store: &Store, q: &Query) -> Vec<(Vec<u8>, i64, BlockId)> {
    let mut pool: Vec<(i64, BlockId, usize, Vec<u8>)> = Vec::new();
    for id in q.lb()..=q.ub() {
        let objects = &store.get_block(id).unwrap().body.objects;
        let mut matched: Vec<(usize, &Object)> = objects
            .iter()
            .enumerate()
            .filter(|(_, o)| o.u == q.u() && o.edge_type == q.edge_type())
            .collect();
        matched
            .sort_by(|(ia, a), (ib, b)| b.w.cmp(&a.w).then_with(|| a.v.cmp(&b.v)).then(ia.cmp(ib)));
        for (rank, (_, o)) in matched.iter().enumerate() {
            pool.push((o.w, id, rank, o.v.clone()));
        }
    }
    pool.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    pool.truncate(q.k());
    pool.into_iter().map(|(w, id, _, v)| (v, w, id)).collect()
}

/// A random small chain: per block one unique filler object plus a handful of
/// edges over a small shared key space (so duplicates and ties occur).
pub fn random_store(mode: Mode, rng: &mut StdRng) -> Store {
    let blocks = rng.gen_range(4..24);
    let mut store = Store::in_memory(mode);
    for i in 0..blocks {
        let mut objects = vec![obj(&format!("z{i}"), "x", "t", 0)];
        for _ in 0..rng.gen_range(0..6usize) {
            objects.push(obj(
                &format!("u{}", rng.gen_range(0..5)),
                &format!("v{}", rng.gen_range(0..12)),
                if rng.gen_bool(0.8) { "t" } else { "s" },
                rng.gen_range(-20..80),
            ));
        }
        store.append(objects).unwrap();
    }
    store
}

/// A query against [`random_store`] chains: usually a live key, sometimes one
/// that never occurs, over a random window.
pub fn random_query(store: &Store, rng: &mut StdRng) -> Query {
    let len = store.len() as BlockId;
    let lb = rng.gen_range(0..len);
    let ub = rng.gen_range(lb..len);
    let u = if rng.gen_bool(0.85) {
        format!("u{}", rng.gen_range(0..5))
    } else {
        "nobody".to_string()
    };
    let t = if rng.gen_bool(0.8) { "t" } else { "s" };
    let k = rng.gen_range(1..7);
    Query::new(u, t, k, lb, ub).unwrap()
}

/// A chain guaranteeing that every tamper strategy has a site to mutate:
/// several matched blocks with multi-item chains inside a window of at least
/// two blocks.
pub fn tamper_fixture(mode: Mode, rng: &mut StdRng) -> (Store, Query) {
    let blocks = rng.gen_range(6..16);
    let n_matched = rng.gen_range(2..4usize);
    let mut matched: Vec<usize> = (0..blocks).collect();
    for i in (1..matched.len()).rev() {
        matched.swap(i, rng.gen_range(0..=i));
    }
    matched.truncate(n_matched);

    let mut store = Store::in_memory(mode);
    for i in 0..blocks {
        let mut objects = vec![obj(&format!("z{i}"), "x", "t", 0)];
        if matched.contains(&i) {
            for _ in 0..rng.gen_range(2..6usize) {
                objects.push(obj(
                    "q",
                    &format!("v{}", rng.gen_range(0..9)),
                    "t",
                    rng.gen_range(0..60),
                ));
            }
        }
        store.append(objects).unwrap();
    }
    let q = Query::new("q", "t", 2, 0, blocks as BlockId - 1).unwrap();
    (store, q)
}
