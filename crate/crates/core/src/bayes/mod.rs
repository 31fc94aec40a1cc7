//! Binary-node Bayesian networks with exact inference under hard and soft
//! (likelihood) evidence.
//!
//! Every node is a requirement that is either implied or not implied. A
//! [`Network`] is plain data: it can be constructed in an invalid state and
//! [`validate_network`] reports what is wrong with it. Inference entry points
//! refuse invalid networks.

mod enumerate;
mod factor;
mod inference;
mod order;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use enumerate::{enumerate_marginals, ENUMERATION_LIMIT};
pub use inference::{evidence_probability, posterior_marginals};
pub use order::elimination_order;

/// Probabilities are accepted when they lie within this distance of `[0, 1]`.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BayesError {
    #[error("invalid network: {0}")]
    InvalidNetwork(ValidationReport),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("evidence has zero probability under the model")]
    EvidenceContradiction,
    #[error("network has {nodes} nodes, enumeration is limited to {limit}")]
    TooLarge { nodes: usize, limit: usize },
    #[error("invalid likelihood ({l_implied}, {l_not}) for node `{node}`")]
    InvalidLikelihood {
        node: String,
        l_implied: f64,
        l_not: f64,
    },
    #[error("invalid node id `{0}`: ids are non-empty and contain no whitespace")]
    InvalidNodeId(String),
}

/// Identifier of a requirement node. Case-sensitive, non-empty, no whitespace.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Result<Self, BayesError> {
        let id = id.into();
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            return Err(BayesError::InvalidNodeId(id));
        }
        Ok(NodeId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for NodeId {
    type Error = BayesError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        NodeId::new(value)
    }
}

impl TryFrom<&str> for NodeId {
    type Error = BayesError;
    fn try_from(value: &str) -> Result<Self, Self::Error> {
        NodeId::new(value)
    }
}

impl From<NodeId> for String {
    fn from(id: NodeId) -> String {
        id.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&self.0)
    }
}

impl std::borrow::Borrow<str> for NodeId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

/// Node id for literals known to be valid. Panics otherwise.
pub fn node(id: &str) -> NodeId {
    NodeId::new(id).expect("valid node id")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum State {
    Implied,
    NotImplied,
}

impl State {
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            State::Implied
        } else {
            State::NotImplied
        }
    }

    pub fn is_implied(self) -> bool {
        self == State::Implied
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            State::Implied => "implied",
            State::NotImplied => "not_implied",
        })
    }
}

/// Conditional probability table of one node: `P(implied | parent configuration)`.
///
/// Rows are indexed by the parent configuration read as a binary number with
/// the first parent as the most significant bit (1 = implied).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CptTable {
    rows: Vec<f64>,
}

impl CptTable {
    pub fn new(rows: Vec<f64>) -> Self {
        CptTable { rows }
    }

    pub fn prior(p_implied: f64) -> Self {
        CptTable {
            rows: vec![p_implied],
        }
    }

    /// Build a table by evaluating `f` on every configuration of `n_parents`.
    pub fn from_fn(n_parents: usize, mut f: impl FnMut(&[bool]) -> f64) -> Self {
        let mut config = vec![false; n_parents];
        let rows = (0..1usize << n_parents)
            .map(|row| {
                for (i, bit) in config.iter_mut().enumerate() {
                    *bit = row >> (n_parents - 1 - i) & 1 == 1;
                }
                f(&config)
            })
            .collect();
        CptTable { rows }
    }

    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row_index(config: &[bool]) -> usize {
        config.iter().fold(0, |acc, &b| acc << 1 | usize::from(b))
    }

    pub fn p_implied(&self, config: &[bool]) -> f64 {
        self.rows[Self::row_index(config)]
    }

    /// Row key in the textual form `a=1,b=0`.
    pub fn row_key(parents: &[NodeId], row: usize) -> String {
        let n = parents.len();
        parents
            .iter()
            .enumerate()
            .map(|(i, p)| format!("{}={}", p, row >> (n - 1 - i) & 1))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn approx_eq(&self, other: &CptTable, tol: f64) -> bool {
        self.rows.len() == other.rows.len()
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| (a - b).abs() <= tol)
    }
}

/// A node together with its ordered parents and CPT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: NodeId,
    pub parents: Vec<NodeId>,
    pub cpt: CptTable,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Network {
    nodes: Vec<NodeId>,
    parents: BTreeMap<NodeId, Vec<NodeId>>,
    cpt: BTreeMap<NodeId, CptTable>,
}

impl Network {
    /// Assemble a network without checking it. Use [`validate_network`] or
    /// [`Network::validated`] before relying on it.
    pub fn from_specs(specs: impl IntoIterator<Item = NodeSpec>) -> Self {
        let mut net = Network::default();
        for spec in specs {
            net.nodes.push(spec.id.clone());
            net.parents.insert(spec.id.clone(), spec.parents);
            net.cpt.insert(spec.id, spec.cpt);
        }
        net
    }

    pub fn validated(specs: impl IntoIterator<Item = NodeSpec>) -> Result<Self, BayesError> {
        let net = Self::from_specs(specs);
        let report = validate_network(&net);
        if report.is_ok() {
            Ok(net)
        } else {
            Err(BayesError::InvalidNetwork(report))
        }
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.parents.contains_key(id)
    }

    pub fn parents(&self, id: &str) -> &[NodeId] {
        self.parents.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn cpt(&self, id: &str) -> Option<&CptTable> {
        self.cpt.get(id)
    }

    pub fn specs(&self) -> impl Iterator<Item = NodeSpec> + '_ {
        self.nodes.iter().map(|id| NodeSpec {
            id: id.clone(),
            parents: self.parents(id.as_str()).to_vec(),
            cpt: self.cpt[id].clone(),
        })
    }

    /// Same node set, same parent lists and CPT rows within `tol`.
    pub fn approx_eq(&self, other: &Network, tol: f64) -> bool {
        let mine: BTreeSet<_> = self.nodes.iter().collect();
        let theirs: BTreeSet<_> = other.nodes.iter().collect();
        mine == theirs
            && self.nodes.iter().all(|id| {
                self.parents.get(id) == other.parents.get(id)
                    && match (self.cpt.get(id), other.cpt.get(id)) {
                        (Some(a), Some(b)) => a.approx_eq(b, tol),
                        _ => false,
                    }
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Cycle,
    MissingParent,
    BadArity,
    BadProbability,
    DuplicateNode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub node: NodeId,
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("ok");
        }
        let parts: Vec<String> = self
            .violations
            .iter()
            .map(|v| format!("{:?} at `{}`: {}", v.kind, v.node, v.detail))
            .collect();
        f.write_str(&parts.join("; "))
    }
}

pub fn validate_network(net: &Network) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |node: &NodeId, kind, detail: String| {
        violations.push(Violation {
            node: node.clone(),
            kind,
            detail,
        })
    };

    let mut seen = BTreeSet::new();
    for id in &net.nodes {
        if !seen.insert(id) {
            push(id, ViolationKind::DuplicateNode, "node listed twice".into());
        }
    }

    for id in &net.nodes {
        let parents = net.parents(id.as_str());
        for p in parents {
            if !net.contains(p.as_str()) {
                push(
                    id,
                    ViolationKind::MissingParent,
                    format!("parent `{p}` does not exist"),
                );
            }
        }
        let distinct: BTreeSet<_> = parents.iter().collect();
        if distinct.len() != parents.len() {
            push(id, ViolationKind::BadArity, "parent listed twice".into());
        }
        match net.cpt(id.as_str()) {
            None => push(id, ViolationKind::BadArity, "no CPT".into()),
            Some(table) => {
                let expected = 1usize
                    .checked_shl(parents.len() as u32)
                    .unwrap_or(usize::MAX);
                if table.len() != expected {
                    push(
                        id,
                        ViolationKind::BadArity,
                        format!(
                            "{} rows for {} parents, expected {expected}",
                            table.len(),
                            parents.len()
                        ),
                    );
                }
                for (row, &p) in table.rows().iter().enumerate() {
                    if !(-PROBABILITY_TOLERANCE..=1.0 + PROBABILITY_TOLERANCE).contains(&p)
                        || p.is_nan()
                    {
                        push(
                            id,
                            ViolationKind::BadProbability,
                            format!("row {row} has p_implied = {p}"),
                        );
                    }
                }
            }
        }
    }

    if let Some(cycle) = find_cycle(net.nodes.iter().map(|id| (id, net.parents(id.as_str())))) {
        let path = cycle
            .iter()
            .map(NodeId::as_str)
            .collect::<Vec<_>>()
            .join(" -> ");
        push(&cycle[0], ViolationKind::Cycle, path);
    }

    ValidationReport { violations }
}

/// Find a directed cycle in a parent relation, returned as a closed path
/// `a -> b -> ... -> a` following parent-to-child edges. Parents that are not
/// themselves listed are ignored. Deterministic for a given input order.
pub(crate) fn find_cycle<'a>(
    graph: impl IntoIterator<Item = (&'a NodeId, &'a [NodeId])>,
) -> Option<Vec<NodeId>> {
    let parents: BTreeMap<&NodeId, &[NodeId]> = graph.into_iter().collect();
    let mut children: BTreeMap<&NodeId, Vec<&NodeId>> =
        parents.keys().map(|k| (*k, Vec::new())).collect();
    for (&child, ps) in &parents {
        for p in ps.iter() {
            if let Some(list) = children.get_mut(p) {
                list.push(child);
            }
        }
    }

    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let mut mark: BTreeMap<&NodeId, Mark> = parents.keys().map(|k| (*k, Mark::New)).collect();

    for &start in parents.keys() {
        if mark[start] != Mark::New {
            continue;
        }
        // iterative DFS keeping the active path
        let mut path: Vec<&NodeId> = vec![start];
        let mut cursor: Vec<usize> = vec![0];
        mark.insert(start, Mark::Active);
        while let Some(&top) = path.last() {
            let i = cursor.last_mut().unwrap();
            match children[top].get(*i) {
                Some(&next) => {
                    *i += 1;
                    match mark[next] {
                        Mark::New => {
                            mark.insert(next, Mark::Active);
                            path.push(next);
                            cursor.push(0);
                        }
                        Mark::Active => {
                            let from = path.iter().position(|n| *n == next).unwrap();
                            let mut cycle: Vec<NodeId> =
                                path[from..].iter().map(|n| (*n).clone()).collect();
                            cycle.push(next.clone());
                            return Some(cycle);
                        }
                        Mark::Done => {}
                    }
                }
                None => {
                    mark.insert(top, Mark::Done);
                    path.pop();
                    cursor.pop();
                }
            }
        }
    }
    None
}

/// Likelihood pair of a soft finding. Hard findings are `(1, 0)` and `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Likelihood {
    pub l_implied: f64,
    pub l_not: f64,
}

impl Likelihood {
    pub fn new(l_implied: f64, l_not: f64) -> Option<Self> {
        let ok = l_implied.is_finite()
            && l_not.is_finite()
            && l_implied >= 0.0
            && l_not >= 0.0
            && (l_implied > 0.0 || l_not > 0.0);
        ok.then_some(Likelihood { l_implied, l_not })
    }

    pub fn of_state(state: State) -> Self {
        match state {
            State::Implied => Likelihood {
                l_implied: 1.0,
                l_not: 0.0,
            },
            State::NotImplied => Likelihood {
                l_implied: 0.0,
                l_not: 1.0,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Finding {
    Hard { state: State },
    Soft { l_implied: f64, l_not: f64 },
}

impl Finding {
    pub fn likelihood(&self) -> Likelihood {
        match *self {
            Finding::Hard { state } => Likelihood::of_state(state),
            Finding::Soft { l_implied, l_not } => Likelihood { l_implied, l_not },
        }
    }
}

/// Findings per node with the actor that asserted each one. A node carries at
/// most one finding: asserting replaces whatever was there.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvidenceSet {
    hard: BTreeMap<NodeId, State>,
    soft: BTreeMap<NodeId, Likelihood>,
    provenance: BTreeMap<NodeId, String>,
}

impl EvidenceSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_hard(mut self, node: NodeId, state: State) -> Self {
        self.assert_hard(node, state, "user");
        self
    }

    pub fn with_soft(
        mut self,
        node: NodeId,
        l_implied: f64,
        l_not: f64,
    ) -> Result<Self, BayesError> {
        self.declare_soft(node, l_implied, l_not, "user")?;
        Ok(self)
    }

    pub fn assert_hard(&mut self, node: NodeId, state: State, actor: &str) {
        self.soft.remove(&node);
        self.provenance.insert(node.clone(), actor.to_string());
        self.hard.insert(node, state);
    }

    pub fn declare_soft(
        &mut self,
        node: NodeId,
        l_implied: f64,
        l_not: f64,
        actor: &str,
    ) -> Result<(), BayesError> {
        let lk =
            Likelihood::new(l_implied, l_not).ok_or_else(|| BayesError::InvalidLikelihood {
                node: node.to_string(),
                l_implied,
                l_not,
            })?;
        self.hard.remove(&node);
        self.provenance.insert(node.clone(), actor.to_string());
        self.soft.insert(node, lk);
        Ok(())
    }

    /// Remove any finding on `node`. Returns whether something was removed.
    pub fn retract(&mut self, node: &str) -> bool {
        self.provenance.remove(node);
        let hard = self.hard.remove(node).is_some();
        let soft = self.soft.remove(node).is_some();
        hard || soft
    }

    pub fn hard(&self) -> &BTreeMap<NodeId, State> {
        &self.hard
    }

    pub fn soft(&self) -> &BTreeMap<NodeId, Likelihood> {
        &self.soft
    }

    pub fn provenance(&self, node: &str) -> Option<&str> {
        self.provenance.get(node).map(String::as_str)
    }

    pub fn finding(&self, node: &str) -> Option<Finding> {
        if let Some(&state) = self.hard.get(node) {
            return Some(Finding::Hard { state });
        }
        self.soft.get(node).map(|lk| Finding::Soft {
            l_implied: lk.l_implied,
            l_not: lk.l_not,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.hard.is_empty() && self.soft.is_empty()
    }

    pub fn len(&self) -> usize {
        self.hard.len() + self.soft.len()
    }

    /// All findings in node order.
    pub fn findings(&self) -> BTreeMap<&NodeId, Finding> {
        let mut all = BTreeMap::new();
        for (id, &state) in &self.hard {
            all.insert(id, Finding::Hard { state });
        }
        for (id, lk) in &self.soft {
            all.insert(
                id,
                Finding::Soft {
                    l_implied: lk.l_implied,
                    l_not: lk.l_not,
                },
            );
        }
        all
    }

    pub(crate) fn check_against(&self, net: &Network) -> Result<(), BayesError> {
        for id in self.hard.keys().chain(self.soft.keys()) {
            if !net.contains(id.as_str()) {
                return Err(BayesError::UnknownNode(id.to_string()));
            }
        }
        Ok(())
    }
}

/// Posterior `P(implied)` for every node of a network.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BeliefMap {
    beliefs: BTreeMap<NodeId, f64>,
}

impl BeliefMap {
    pub fn from_map(beliefs: BTreeMap<NodeId, f64>) -> Self {
        BeliefMap { beliefs }
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.beliefs.get(id).copied()
    }

    /// Belief of a node known to be present. Panics otherwise.
    pub fn of(&self, id: &str) -> f64 {
        self.beliefs[id]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, f64)> {
        self.beliefs.iter().map(|(k, v)| (k, *v))
    }

    pub fn len(&self) -> usize {
        self.beliefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beliefs.is_empty()
    }

    /// Entries ordered by descending belief, then node id.
    pub fn ranked(&self) -> Vec<(&NodeId, f64)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        v
    }

    pub fn max_abs_diff(&self, other: &BeliefMap) -> f64 {
        self.beliefs
            .iter()
            .map(|(k, v)| match other.beliefs.get(k) {
                Some(w) => (v - w).abs(),
                None => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// The four-node time-management web: two roots feeding `time_mgmt`,
    /// which feeds `time_mgmt_msgs`. The one-parent-implied row is 0.4.
    pub fn time_management_net() -> Network {
        let ds = node("distributed_sim");
        let pdes = node("pdes");
        let tm = node("time_mgmt");
        Network::validated([
            NodeSpec {
                id: pdes.clone(),
                parents: vec![],
                cpt: CptTable::prior(0.2),
            },
            NodeSpec {
                id: ds.clone(),
                parents: vec![],
                cpt: CptTable::prior(0.2),
            },
            NodeSpec {
                id: tm.clone(),
                parents: vec![ds, pdes],
                cpt: CptTable::new(vec![0.2, 0.4, 0.4, 0.8]),
            },
            NodeSpec {
                id: node("time_mgmt_msgs"),
                parents: vec![tm],
                cpt: CptTable::new(vec![0.2, 0.8]),
            },
        ])
        .unwrap()
    }

    #[test]
    fn time_management_net_is_valid() {
        assert!(validate_network(&time_management_net()).is_ok());
    }

    #[test]
    fn two_cycle_is_reported() {
        let net = Network::from_specs([
            NodeSpec {
                id: node("a"),
                parents: vec![node("b")],
                cpt: CptTable::new(vec![0.1, 0.9]),
            },
            NodeSpec {
                id: node("b"),
                parents: vec![node("a")],
                cpt: CptTable::new(vec![0.1, 0.9]),
            },
        ]);
        let report = validate_network(&net);
        assert!(report.has(ViolationKind::Cycle));
        let cycle = report
            .violations
            .iter()
            .find(|v| v.kind == ViolationKind::Cycle)
            .unwrap();
        assert_eq!(cycle.detail, "a -> b -> a");
    }

    #[test]
    fn out_of_range_probability_is_reported() {
        let net = Network::from_specs([NodeSpec {
            id: node("a"),
            parents: vec![],
            cpt: CptTable::prior(1.3),
        }]);
        let report = validate_network(&net);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].kind, ViolationKind::BadProbability);
    }

    #[test]
    fn missing_parent_and_arity() {
        let net = Network::from_specs([
            NodeSpec {
                id: node("a"),
                parents: vec![node("ghost")],
                cpt: CptTable::new(vec![0.5, 0.5]),
            },
            NodeSpec {
                id: node("b"),
                parents: vec![node("a")],
                cpt: CptTable::prior(0.5),
            },
        ]);
        let report = validate_network(&net);
        assert!(report.has(ViolationKind::MissingParent));
        assert!(report.has(ViolationKind::BadArity));
        assert!(!report.has(ViolationKind::Cycle));
    }

    #[test]
    fn node_ids_reject_whitespace() {
        assert!(NodeId::new("a b").is_err());
        assert!(NodeId::new("").is_err());
        assert!(serde_json::from_str::<NodeId>("\"x y\"").is_err());
        assert_eq!(
            serde_json::from_str::<NodeId>("\"Time_Mgmt\"")
                .unwrap()
                .as_str(),
            "Time_Mgmt"
        );
    }

    #[test]
    fn row_keys_follow_parent_order() {
        let parents = [node("a"), node("b")];
        assert_eq!(CptTable::row_key(&parents, 0), "a=0,b=0");
        assert_eq!(CptTable::row_key(&parents, 2), "a=1,b=0");
        assert_eq!(CptTable::row_index(&[true, false]), 2);
        let t = CptTable::from_fn(2, |c| if c[0] { 1.0 } else { 0.0 });
        assert_eq!(t.rows(), &[0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn evidence_keeps_one_finding_per_node() {
        let mut ev = EvidenceSet::new();
        ev.assert_hard(node("x"), State::Implied, "a");
        ev.declare_soft(node("x"), 0.8, 0.2, "b").unwrap();
        assert!(ev.hard().is_empty());
        assert_eq!(ev.len(), 1);
        assert_eq!(ev.provenance("x"), Some("b"));
        assert!(ev.declare_soft(node("y"), 0.0, 0.0, "b").is_err());
        assert!(ev.retract("x"));
        assert!(!ev.retract("x"));
        assert!(ev.is_empty());
    }
}
