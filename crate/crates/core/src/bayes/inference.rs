//! Exact inference by variable elimination.
//!
//! Variables are eliminated in min-fill order. Recording, for every
//! eliminated variable, the cluster it was summed out of yields an
//! elimination tree; a second, downward pass over that tree reuses the
//! intermediate sums so that all single-node posteriors come out of one
//! elimination instead of one elimination per node.

use std::collections::BTreeSet;

use super::factor::{product_all, Factor};
use super::order::min_fill;
use super::{validate_network, BayesError, BeliefMap, EvidenceSet, Network, NodeId};

/// Network with nodes renumbered in lexicographic id order.
pub(crate) struct IndexedNetwork<'a> {
    pub ids: Vec<NodeId>,
    pub parents: Vec<Vec<usize>>,
    pub rows: Vec<&'a [f64]>,
}

impl<'a> IndexedNetwork<'a> {
    pub fn new(net: &'a Network) -> Self {
        let mut ids: Vec<NodeId> = net.nodes().to_vec();
        ids.sort();
        let index = |id: &NodeId| ids.binary_search(id).expect("validated network");
        let parents = ids
            .iter()
            .map(|id| net.parents(id.as_str()).iter().map(index).collect())
            .collect();
        let rows = ids
            .iter()
            .map(|id| net.cpt(id.as_str()).expect("validated network").rows())
            .collect();
        IndexedNetwork { ids, parents, rows }
    }

    pub fn index_of(&self, id: &NodeId) -> usize {
        self.ids.binary_search(id).expect("node present")
    }

    /// `Some(bit)` for hard-evidence nodes.
    pub fn observations(&self, ev: &EvidenceSet) -> Vec<Option<bool>> {
        let mut obs = vec![None; self.ids.len()];
        for (id, state) in ev.hard() {
            obs[self.index_of(id)] = Some(state.is_implied());
        }
        obs
    }

    pub fn observed_mask(&self, ev: &EvidenceSet) -> Vec<bool> {
        self.observations(ev).iter().map(Option::is_some).collect()
    }

    pub fn moral_graph(&self, observed: &[bool]) -> Vec<BTreeSet<usize>> {
        let n = self.ids.len();
        let mut adj = vec![BTreeSet::new(); n];
        for v in 0..n {
            let family: Vec<usize> = self.parents[v]
                .iter()
                .copied()
                .chain([v])
                .filter(|&u| !observed[u])
                .collect();
            for (i, &a) in family.iter().enumerate() {
                for &b in &family[i + 1..] {
                    adj[a].insert(b);
                    adj[b].insert(a);
                }
            }
        }
        adj
    }
}

struct EliminationTree {
    /// Variable eliminated at each step.
    order: Vec<usize>,
    /// Separator (cluster minus its variable) at each step, sorted.
    separators: Vec<Vec<usize>>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    /// Product of the evidence-reduced factors assigned to each step.
    potentials: Vec<Factor>,
    /// Product of factors whose whole scope was observed.
    constant: f64,
}

fn build_tree(indexed: &IndexedNetwork<'_>, ev: &EvidenceSet) -> EliminationTree {
    let n = indexed.ids.len();
    let obs = indexed.observations(ev);
    let observed: Vec<bool> = obs.iter().map(Option::is_some).collect();

    let mut factors = Vec::with_capacity(n + ev.soft().len());
    for v in 0..n {
        let mut f = Factor::from_cpt(v, &indexed.parents[v], indexed.rows[v]);
        for u in indexed.parents[v].iter().copied().chain([v]) {
            if let Some(bit) = obs[u] {
                f = f.restrict(u, bit);
            }
        }
        factors.push(f);
    }
    for (id, lk) in ev.soft() {
        factors.push(Factor::unary(indexed.index_of(id), lk.l_not, lk.l_implied));
    }

    let adjacency = indexed.moral_graph(&observed);
    let order = min_fill(adjacency.clone(), &observed);
    let mut step_of = vec![usize::MAX; n];
    for (step, &v) in order.iter().enumerate() {
        step_of[v] = step;
    }

    // symbolic elimination to recover clusters
    let mut adj = adjacency;
    let mut separators = Vec::with_capacity(order.len());
    for &v in &order {
        let nbrs: Vec<usize> = adj[v].iter().copied().collect();
        for (i, &a) in nbrs.iter().enumerate() {
            adj[a].remove(&v);
            for &b in &nbrs[i + 1..] {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
        adj[v].clear();
        separators.push(nbrs);
    }

    let parent: Vec<Option<usize>> = separators
        .iter()
        .map(|sep| sep.iter().map(|&u| step_of[u]).min())
        .collect();
    let mut children = vec![Vec::new(); order.len()];
    for (step, p) in parent.iter().enumerate() {
        if let Some(p) = *p {
            children[p].push(step);
        }
    }

    let mut potentials = vec![Factor::scalar(1.0); order.len()];
    let mut constant = 1.0;
    for f in factors {
        match f.vars().iter().map(|&u| step_of[u]).min() {
            Some(step) => potentials[step] = potentials[step].product(&f),
            None => constant *= f.values()[0],
        }
    }

    EliminationTree {
        order,
        separators,
        parent,
        children,
        potentials,
        constant,
    }
}

impl EliminationTree {
    /// Messages sent from each step to its parent (the plain VE pass).
    fn upward(&self) -> Vec<Factor> {
        let mut up: Vec<Factor> = Vec::with_capacity(self.order.len());
        for (step, &v) in self.order.iter().enumerate() {
            let mut f = self.potentials[step].clone();
            for &c in &self.children[step] {
                f = f.product(&up[c]);
            }
            up.push(f.sum_out(v));
        }
        up
    }

    /// Probability of the evidence: constant times every root's total.
    fn evidence_mass(&self, up: &[Factor]) -> f64 {
        self.parent
            .iter()
            .zip(up)
            .filter(|(p, _)| p.is_none())
            .fold(self.constant, |acc, (_, m)| acc * m.values()[0])
    }

    /// Messages sent from each step's parent down to it.
    fn downward(&self, up: &[Factor]) -> Vec<Option<Factor>> {
        let mut down: Vec<Option<Factor>> = vec![None; self.order.len()];
        for step in (0..self.order.len()).rev() {
            let Some(p) = self.parent[step] else { continue };
            let mut f = self.potentials[p].clone();
            if let Some(m) = &down[p] {
                f = f.product(m);
            }
            for &c in &self.children[p] {
                if c != step {
                    f = f.product(&up[c]);
                }
            }
            down[step] = Some(f.marginalize_to(&self.separators[step]));
        }
        down
    }
}

fn check_inputs(net: &Network, ev: &EvidenceSet) -> Result<(), BayesError> {
    let report = validate_network(net);
    if !report.is_ok() {
        return Err(BayesError::InvalidNetwork(report));
    }
    ev.check_against(net)
}

/// Exact `P(implied | evidence)` for every node.
///
/// Soft findings multiply the node's two states by `(l_implied, l_not)`
/// before normalization. Hard findings pin the node to exactly 1 or 0.
pub fn posterior_marginals(net: &Network, ev: &EvidenceSet) -> Result<BeliefMap, BayesError> {
    check_inputs(net, ev)?;
    let indexed = IndexedNetwork::new(net);
    let tree = build_tree(&indexed, ev);
    let up = tree.upward();
    let mass = tree.evidence_mass(&up);
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(BayesError::EvidenceContradiction);
    }
    let down = tree.downward(&up);

    let mut beliefs = std::collections::BTreeMap::new();
    for (id, state) in ev.hard() {
        beliefs.insert(id.clone(), if state.is_implied() { 1.0 } else { 0.0 });
    }
    for (step, &v) in tree.order.iter().enumerate() {
        let incoming = tree.children[step]
            .iter()
            .map(|&c| &up[c])
            .chain(down[step].as_ref());
        let joint = tree.potentials[step].product(&product_all(incoming));
        let marginal = joint.marginalize_to(&[v]);
        let (p_not, p_yes) = (marginal.values()[0], marginal.values()[1]);
        let total = p_not + p_yes;
        if !(total > 0.0 && total.is_finite()) {
            return Err(BayesError::EvidenceContradiction);
        }
        beliefs.insert(indexed.ids[v].clone(), p_yes / total);
    }
    Ok(BeliefMap::from_map(beliefs))
}

/// Probability (likelihood, when soft findings are present) of the evidence.
pub fn evidence_probability(net: &Network, ev: &EvidenceSet) -> Result<f64, BayesError> {
    check_inputs(net, ev)?;
    let indexed = IndexedNetwork::new(net);
    let tree = build_tree(&indexed, ev);
    let up = tree.upward();
    Ok(tree.evidence_mass(&up))
}
