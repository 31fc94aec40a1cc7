#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srw::bayes::{node, CptTable, EvidenceSet, Finding, Network, NodeId, NodeSpec, State};
use srw::fragment::{compile, parse_fragment, Fragment};

pub fn corpus(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(rel)
}

pub fn read_corpus(rel: &str) -> Vec<u8> {
    std::fs::read(corpus(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub fn corpus_fragment(rel: &str) -> Fragment {
    parse_fragment(&read_corpus(rel)).unwrap()
}

pub fn worked_example() -> Network {
    compile(&corpus_fragment("worked_example.json")).unwrap()
}

/// Brute-force posterior marginals: sum the weighted joint over every
/// assignment. Written against the raw CPT rows only.
pub fn oracle_marginals(net: &Network, ev: &EvidenceSet) -> Option<BTreeMap<NodeId, f64>> {
    let ids: Vec<NodeId> = net.nodes().to_vec();
    let pos: BTreeMap<&NodeId, usize> = ids.iter().enumerate().map(|(i, id)| (id, i)).collect();
    let findings = ev.findings();
    let mut total = 0.0;
    let mut implied = vec![0.0; ids.len()];
    for mask in 0u64..(1 << ids.len()) {
        let value = |i: usize| mask >> i & 1 == 1;
        let mut w = 1.0;
        for (i, id) in ids.iter().enumerate() {
            let parents = net.parents(id.as_str());
            let mut row = 0;
            for p in parents {
                row = row << 1 | usize::from(value(pos[p]));
            }
            let p1 = net.cpt(id.as_str()).unwrap().rows()[row];
            w *= if value(i) { p1 } else { 1.0 - p1 };
            match findings.get(id) {
                Some(Finding::Hard { state }) => {
                    if state.is_implied() != value(i) {
                        w = 0.0;
                    }
                }
                Some(Finding::Soft { l_implied, l_not }) => {
                    w *= if value(i) { *l_implied } else { *l_not }
                }
                None => {}
            }
        }
        total += w;
        for (i, acc) in implied.iter_mut().enumerate() {
            if value(i) {
                *acc += w;
            }
        }
    }
    (total > 0.0).then(|| {
        ids.into_iter()
            .zip(implied.into_iter().map(|v| v / total))
            .collect()
    })
}

/// Random DAG over `n` nodes with up to three parents each and CPT rows
/// strictly inside (0, 1).
pub fn random_network(rng: &mut ChaCha8Rng, n: usize) -> Network {
    let ids: Vec<NodeId> = (0..n).map(|i| node(&format!("v{i:02}"))).collect();
    let specs = (0..n).map(|i| {
        let k = rng.gen_range(0..=i.min(3));
        let mut parents: Vec<NodeId> = rand::seq::index::sample(rng, i.max(1), k.min(i))
            .into_iter()
            .map(|j| ids[j].clone())
            .collect();
        parents.sort();
        let cpt = CptTable::from_fn(parents.len(), |_| rng.gen_range(0.02..0.98));
        NodeSpec {
            id: ids[i].clone(),
            parents,
            cpt,
        }
    });
    Network::validated(specs.collect::<Vec<_>>()).unwrap()
}

/// Up to a third of the nodes observed, half of them softly.
pub fn random_evidence(rng: &mut ChaCha8Rng, net: &Network) -> EvidenceSet {
    let mut ev = EvidenceSet::new();
    for id in net.nodes() {
        if !rng.gen_bool(0.33) {
            continue;
        }
        if rng.gen_bool(0.5) {
            ev.assert_hard(id.clone(), State::from_bit(rng.gen_bool(0.5)), "test");
        } else {
            let (l1, l0) = (rng.gen_range(0.05..1.0), rng.gen_range(0.05..1.0));
            ev.declare_soft(id.clone(), l1, l0, "test").unwrap();
        }
    }
    ev
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
