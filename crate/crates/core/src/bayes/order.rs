//! Greedy min-fill elimination ordering.

use std::collections::BTreeSet;

use super::inference::IndexedNetwork;
use super::{EvidenceSet, Network, NodeId};

/// Min-fill elimination order over the moral graph of `net` with hard-evidence
/// nodes instantiated (removed). Ties go to the lexicographically smallest id.
/// Soft-evidence nodes are still unobserved variables and are ordered too.
pub fn elimination_order(net: &Network, ev: &EvidenceSet) -> Vec<NodeId> {
    let indexed = IndexedNetwork::new(net);
    let observed = indexed.observed_mask(ev);
    let adjacency = indexed.moral_graph(&observed);
    min_fill(adjacency, &observed)
        .into_iter()
        .map(|i| indexed.ids[i].clone())
        .collect()
}

fn fill_in(adjacency: &[BTreeSet<usize>], v: usize) -> usize {
    let nbrs: Vec<usize> = adjacency[v].iter().copied().collect();
    let mut missing = 0;
    for (i, &a) in nbrs.iter().enumerate() {
        for &b in &nbrs[i + 1..] {
            if !adjacency[a].contains(&b) {
                missing += 1;
            }
        }
    }
    missing
}

/// Eliminate every vertex not in `skip`. Vertex indices double as the
/// tie-break rank, so callers index vertices in lexicographic id order.
pub(crate) fn min_fill(mut adjacency: Vec<BTreeSet<usize>>, skip: &[bool]) -> Vec<usize> {
    let n = adjacency.len();
    let mut fill = vec![0usize; n];
    let mut queue = BTreeSet::new();
    for v in 0..n {
        if !skip[v] {
            fill[v] = fill_in(&adjacency, v);
            queue.insert((fill[v], v));
        }
    }
    let mut eliminated = vec![false; n];
    let mut order = Vec::with_capacity(queue.len());

    while let Some((_, v)) = queue.pop_first() {
        eliminated[v] = true;
        order.push(v);
        let nbrs: Vec<usize> = adjacency[v].iter().copied().collect();
        for (i, &a) in nbrs.iter().enumerate() {
            adjacency[a].remove(&v);
            for &b in &nbrs[i + 1..] {
                adjacency[a].insert(b);
                adjacency[b].insert(a);
            }
        }
        adjacency[v].clear();

        let mut affected: BTreeSet<usize> = nbrs.iter().copied().collect();
        for &a in &nbrs {
            affected.extend(adjacency[a].iter().copied());
        }
        for w in affected {
            if skip[w] || eliminated[w] {
                continue;
            }
            let updated = fill_in(&adjacency, w);
            if updated != fill[w] {
                queue.remove(&(fill[w], w));
                fill[w] = updated;
                queue.insert((updated, w));
            }
        }
    }
    order
}
