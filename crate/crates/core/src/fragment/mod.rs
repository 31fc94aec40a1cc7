//! Requirement-web fragments: authoring format, canonical CPT constructors,
//! compilation to a [`Network`] and threshold classification.
//!
//! A fragment file is a JSON document:
//!
//! ```json
//! {
//!   "srw_version": 1,
//!   "name": "time_management",
//!   "nodes": [
//!     {"id": "pdes", "title": "PDES", "description": "", "parents": [],
//!      "cpt": {"kind": "prior", "p_implied": 0.2}},
//!     {"id": "time_mgmt", "title": "Time management", "parents": ["pdes"],
//!      "cpt": {"kind": "table", "rows": {"pdes=0": 0.2, "pdes=1": 0.8}}}
//!   ]
//! }
//! ```
//!
//! Table rows are keyed by `parent=bit` pairs, `1` meaning implied; the
//! canonical key lists parents in lexicographic order. Unknown fields are
//! rejected.

mod classify;
mod cpt;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bayes::{find_cycle, CptTable, Network, NodeId, NodeSpec, PROBABILITY_TOLERANCE};

pub use classify::{classify, classify_with_band, ImpliedSet, RankedNode, DEFAULT_BORDERLINE_BAND};
pub use cpt::{linear_additive_cpt, noisy_or_cpt, CptError};

/// Only fragment format version understood by this crate.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FragmentError {
    #[error("schema violation at `{path}`{}: {message}", location(.line, .column))]
    SchemaViolation {
        path: String,
        line: Option<usize>,
        column: Option<usize>,
        message: String,
    },
    #[error("duplicate node `{0}`")]
    DuplicateNode(NodeId),
    #[error("node `{node}` lists unknown parent `{parent}`")]
    UnknownParent { node: NodeId, parent: NodeId },
    #[error("cycle in fragment: {}", join_path(.0))]
    CycleInFragment(Vec<NodeId>),
    #[error("node `{node}`: {source}")]
    Cpt { node: NodeId, source: CptError },
}

fn location(line: &Option<usize>, column: &Option<usize>) -> String {
    match (line, column) {
        (Some(l), Some(c)) => format!(" (line {l}, column {c})"),
        _ => String::new(),
    }
}

pub(crate) fn join_path(path: &[NodeId]) -> String {
    path.iter()
        .map(NodeId::as_str)
        .collect::<Vec<_>>()
        .join(" -> ")
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> FragmentError {
    FragmentError::SchemaViolation {
        path: path.into(),
        line: None,
        column: None,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CptSpec {
    Prior {
        p_implied: f64,
    },
    Table {
        rows: BTreeMap<String, f64>,
    },
    LinearAdditive {
        p_none: f64,
        p_all: f64,
    },
    NoisyOr {
        leak: f64,
        weights: BTreeMap<NodeId, f64>,
    },
}

impl CptSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            CptSpec::Prior { .. } => "prior",
            CptSpec::Table { .. } => "table",
            CptSpec::LinearAdditive { .. } => "linear_additive",
            CptSpec::NoisyOr { .. } => "noisy_or",
        }
    }

    fn probabilities(&self) -> Vec<(String, f64)> {
        match self {
            CptSpec::Prior { p_implied } => vec![("p_implied".into(), *p_implied)],
            CptSpec::Table { rows } => rows
                .iter()
                .map(|(k, v)| (format!("rows.{k}"), *v))
                .collect(),
            CptSpec::LinearAdditive { p_none, p_all } => {
                vec![("p_none".into(), *p_none), ("p_all".into(), *p_all)]
            }
            CptSpec::NoisyOr { leak, weights } => std::iter::once(("leak".into(), *leak))
                .chain(weights.iter().map(|(k, v)| (format!("weights.{k}"), *v)))
                .collect(),
        }
    }

    /// Expand to a table over `parents` (which must already be canonical).
    pub fn expand(&self, parents: &[NodeId]) -> Result<CptTable, CptError> {
        match self {
            CptSpec::Prior { p_implied } => Ok(CptTable::prior(*p_implied)),
            CptSpec::Table { rows } => {
                let mut values = vec![0.0; 1 << parents.len()];
                for (key, &p) in rows {
                    // keys were checked during validation
                    if let Ok(index) = parse_row_key(key, parents) {
                        values[index] = p;
                    }
                }
                Ok(CptTable::new(values))
            }
            CptSpec::LinearAdditive { p_none, p_all } => {
                linear_additive_cpt(*p_none, *p_all, parents)
            }
            CptSpec::NoisyOr { leak, weights } => noisy_or_cpt(*leak, weights, parents),
        }
    }
}

/// Map a row key such as `a=1,b=0` to its row index for `parents`.
/// Pairs may appear in any order but must name every parent exactly once.
pub fn parse_row_key(key: &str, parents: &[NodeId]) -> Result<usize, String> {
    let mut bits: BTreeMap<&str, bool> = BTreeMap::new();
    if !key.trim().is_empty() {
        for pair in key.split(',') {
            let (name, bit) = pair
                .split_once('=')
                .ok_or_else(|| format!("`{pair}` is not of the form parent=0|1"))?;
            let bit = match bit.trim() {
                "1" => true,
                "0" => false,
                other => return Err(format!("state `{other}` must be 0 or 1")),
            };
            if bits.insert(name.trim(), bit).is_some() {
                return Err(format!("parent `{}` listed twice", name.trim()));
            }
        }
    }
    let known: BTreeSet<&str> = parents.iter().map(NodeId::as_str).collect();
    if let Some(unknown) = bits.keys().find(|k| !known.contains(*k)) {
        return Err(format!("`{unknown}` is not a parent"));
    }
    let config: Vec<bool> = parents
        .iter()
        .map(|p| {
            bits.get(p.as_str())
                .copied()
                .ok_or_else(|| format!("missing state of parent `{p}`"))
        })
        .collect::<Result<_, _>>()?;
    Ok(CptTable::row_index(&config))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequirementNode {
    pub id: NodeId,
    pub title: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub parents: Vec<NodeId>,
    pub cpt: CptSpec,
}

impl RequirementNode {
    /// Parents in canonical (lexicographic) order.
    pub fn canonical_parents(&self) -> Vec<NodeId> {
        let mut p = self.parents.clone();
        p.sort();
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fragment {
    #[serde(rename = "srw_version")]
    pub version: u32,
    pub name: String,
    pub nodes: Vec<RequirementNode>,
}

impl Fragment {
    pub fn new(name: impl Into<String>, nodes: Vec<RequirementNode>) -> Self {
        Fragment {
            version: FORMAT_VERSION,
            name: name.into(),
            nodes,
        }
    }

    pub fn node(&self, id: &str) -> Option<&RequirementNode> {
        self.nodes.iter().find(|n| n.id.as_str() == id)
    }

    pub fn ids(&self) -> BTreeSet<NodeId> {
        self.nodes.iter().map(|n| n.id.clone()).collect()
    }

    /// Check every fragment invariant. Returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>, FragmentError> {
        if self.version != FORMAT_VERSION {
            return Err(schema(
                "srw_version",
                format!(
                    "unsupported version {}, expected {FORMAT_VERSION}",
                    self.version
                ),
            ));
        }
        let mut warnings = Vec::new();
        let mut ids = BTreeSet::new();
        for n in &self.nodes {
            if !ids.insert(&n.id) {
                return Err(FragmentError::DuplicateNode(n.id.clone()));
            }
        }
        for (i, n) in self.nodes.iter().enumerate() {
            let at = |field: &str| format!("nodes[{i}].{field}");
            let mut seen = BTreeSet::new();
            for p in &n.parents {
                if !ids.contains(p) {
                    return Err(FragmentError::UnknownParent {
                        node: n.id.clone(),
                        parent: p.clone(),
                    });
                }
                if !seen.insert(p) {
                    return Err(schema(at("parents"), format!("parent `{p}` listed twice")));
                }
            }
            for (field, p) in n.cpt.probabilities() {
                if !(-PROBABILITY_TOLERANCE..=1.0 + PROBABILITY_TOLERANCE).contains(&p)
                    || p.is_nan()
                {
                    return Err(schema(
                        at(&format!("cpt.{field}")),
                        format!("{p} is not a probability"),
                    ));
                }
            }
            let is_root = n.parents.is_empty();
            match (&n.cpt, is_root) {
                (CptSpec::Prior { .. }, false) => {
                    return Err(schema(
                        at("cpt"),
                        "a node with parents cannot carry a prior",
                    ));
                }
                (CptSpec::Prior { .. }, true) => {}
                (other, true) => {
                    return Err(schema(
                        at("cpt"),
                        format!("root node needs a prior, found {}", other.kind()),
                    ));
                }
                (CptSpec::Table { rows }, false) => {
                    let parents = n.canonical_parents();
                    let expected = 1usize << parents.len();
                    if rows.len() != expected {
                        return Err(schema(
                            at("cpt.rows"),
                            format!("{} rows, expected {expected}", rows.len()),
                        ));
                    }
                    let mut covered = BTreeSet::new();
                    for key in rows.keys() {
                        let index = parse_row_key(key, &parents)
                            .map_err(|m| schema(at(&format!("cpt.rows.{key}")), m))?;
                        if !covered.insert(index) {
                            return Err(schema(
                                at(&format!("cpt.rows.{key}")),
                                "configuration listed twice",
                            ));
                        }
                    }
                }
                (CptSpec::LinearAdditive { p_none, p_all }, false) => {
                    if p_none > p_all {
                        warnings.push(format!(
                            "node `{}`: linear-additive p_none {p_none} exceeds p_all {p_all} (inhibitory)",
                            n.id
                        ));
                    }
                }
                (CptSpec::NoisyOr { weights, .. }, false) => {
                    noisy_or_cpt(0.0, weights, &n.parents).map_err(|source| {
                        FragmentError::Cpt {
                            node: n.id.clone(),
                            source,
                        }
                    })?;
                }
            }
        }
        if let Some(cycle) = find_cycle(self.nodes.iter().map(|n| (&n.id, n.parents.as_slice()))) {
            return Err(FragmentError::CycleInFragment(cycle));
        }
        Ok(warnings)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fragment serializes")
    }
}

pub fn parse_fragment(bytes: &[u8]) -> Result<Fragment, FragmentError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let fragment: Fragment = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        FragmentError::SchemaViolation {
            path,
            line: Some(inner.line()),
            column: Some(inner.column()),
            message: inner.to_string(),
        }
    })?;
    fragment.validate()?;
    Ok(fragment)
}

/// Expand every CPT specification and build the network. Parents are put in
/// canonical order, so table rows are keyed the same way regardless of how
/// the fragment listed them.
pub fn compile(fragment: &Fragment) -> Result<Network, FragmentError> {
    fragment.validate()?;
    let mut specs = Vec::with_capacity(fragment.nodes.len());
    for n in &fragment.nodes {
        let parents = n.canonical_parents();
        let cpt = n
            .cpt
            .expand(&parents)
            .map_err(|source| FragmentError::Cpt {
                node: n.id.clone(),
                source,
            })?;
        specs.push(NodeSpec {
            id: n.id.clone(),
            parents,
            cpt,
        });
    }
    // validation above covers every network invariant
    Ok(Network::from_specs(specs))
}

/// Same node set, same parent sets and expanded CPTs within 1e-12.
pub fn semantically_equal(a: &Fragment, b: &Fragment) -> bool {
    match (compile(a), compile(b)) {
        (Ok(x), Ok(y)) => x.approx_eq(&y, 1e-12),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::{node, posterior_marginals, validate_network, EvidenceSet};

    const EXAMPLE: &str = r#"{
      "srw_version": 1,
      "name": "time_management",
      "nodes": [
        {"id": "pdes", "title": "PDES", "parents": [], "cpt": {"kind": "prior", "p_implied": 0.2}},
        {"id": "distributed_sim", "title": "Distributed simulation", "cpt": {"kind": "prior", "p_implied": 0.2}},
        {"id": "time_mgmt", "title": "Time management", "parents": ["pdes", "distributed_sim"],
         "cpt": {"kind": "table", "rows": {
           "distributed_sim=1,pdes=1": 0.8, "distributed_sim=1,pdes=0": 0.4,
           "distributed_sim=0,pdes=1": 0.4, "distributed_sim=0,pdes=0": 0.2}}},
        {"id": "time_mgmt_msgs", "title": "Time management messages", "parents": ["time_mgmt"],
         "cpt": {"kind": "table", "rows": {"time_mgmt=1": 0.8, "time_mgmt=0": 0.2}}}
      ]
    }"#;

    #[test]
    fn parses_and_compiles_the_example() {
        let f = parse_fragment(EXAMPLE.as_bytes()).unwrap();
        assert_eq!(f.nodes.len(), 4);
        let net = compile(&f).unwrap();
        assert!(validate_network(&net).is_ok());
        assert_eq!(
            net.parents("time_mgmt"),
            &[node("distributed_sim"), node("pdes")]
        );
        let b = posterior_marginals(&net, &EvidenceSet::new()).unwrap();
        assert!((b.of("time_mgmt") - 0.288).abs() < 1e-9);
    }

    #[test]
    fn unknown_parent() {
        let text = r#"{"srw_version": 1, "name": "x", "nodes": [
            {"id": "a", "title": "A", "parents": ["ghost"], "cpt": {"kind": "linear_additive", "p_none": 0.1, "p_all": 0.9}}]}"#;
        assert_eq!(
            parse_fragment(text.as_bytes()),
            Err(FragmentError::UnknownParent {
                node: node("a"),
                parent: node("ghost")
            })
        );
    }

    #[test]
    fn empty_node_list_is_valid() {
        let f = parse_fragment(br#"{"srw_version": 1, "name": "empty", "nodes": []}"#).unwrap();
        assert!(f.nodes.is_empty());
        assert!(compile(&f).unwrap().is_empty());
    }

    #[test]
    fn schema_errors_carry_a_path() {
        let text = r#"{"srw_version": 1, "name": "x", "nodes": [
            {"id": "a", "title": "A", "cpt": {"kind": "prior", "p_implied": 0.2, "typo": 1}}]}"#;
        match parse_fragment(text.as_bytes()) {
            Err(FragmentError::SchemaViolation { path, line, .. }) => {
                assert!(path.starts_with("nodes[0].cpt"), "{path}");
                assert_eq!(line, Some(2));
            }
            other => panic!("{other:?}"),
        }
        let text = r#"{"srw_version": 1, "name": "x", "nodes": [{"id": "a", "title": "A", "cpt": {"kind": "prior", "p_implied": 0.2}, "weight": 3}]}"#;
        assert!(matches!(
            parse_fragment(text.as_bytes()),
            Err(FragmentError::SchemaViolation { .. })
        ));
        let text = r#"{"srw_version": 2, "name": "x", "nodes": []}"#;
        assert!(
            matches!(parse_fragment(text.as_bytes()), Err(FragmentError::SchemaViolation { path, .. }) if path == "srw_version")
        );
    }

    #[test]
    fn duplicate_and_cycle() {
        let dup = r#"{"srw_version": 1, "name": "x", "nodes": [
            {"id": "a", "title": "A", "cpt": {"kind": "prior", "p_implied": 0.2}},
            {"id": "a", "title": "A", "cpt": {"kind": "prior", "p_implied": 0.2}}]}"#;
        assert_eq!(
            parse_fragment(dup.as_bytes()),
            Err(FragmentError::DuplicateNode(node("a")))
        );
        let cyc = r#"{"srw_version": 1, "name": "x", "nodes": [
            {"id": "a", "title": "A", "parents": ["b"], "cpt": {"kind": "linear_additive", "p_none": 0.1, "p_all": 0.9}},
            {"id": "b", "title": "B", "parents": ["a"], "cpt": {"kind": "linear_additive", "p_none": 0.1, "p_all": 0.9}}]}"#;
        assert_eq!(
            parse_fragment(cyc.as_bytes()),
            Err(FragmentError::CycleInFragment(vec![
                node("a"),
                node("b"),
                node("a")
            ]))
        );
    }

    #[test]
    fn root_and_spec_kind_rules() {
        let root_table = r#"{"srw_version": 1, "name": "x", "nodes": [
            {"id": "a", "title": "A", "cpt": {"kind": "linear_additive", "p_none": 0.1, "p_all": 0.9}}]}"#;
        assert!(matches!(
            parse_fragment(root_table.as_bytes()),
            Err(FragmentError::SchemaViolation { .. })
        ));
        let bad_table = r#"{"srw_version": 1, "name": "x", "nodes": [
            {"id": "a", "title": "A", "cpt": {"kind": "prior", "p_implied": 0.2}},
            {"id": "b", "title": "B", "parents": ["a"], "cpt": {"kind": "table", "rows": {"a=1": 0.8, "c=0": 0.2}}}]}"#;
        assert!(matches!(
            parse_fragment(bad_table.as_bytes()),
            Err(FragmentError::SchemaViolation { .. })
        ));
        let bad_weights = r#"{"srw_version": 1, "name": "x", "nodes": [
            {"id": "a", "title": "A", "cpt": {"kind": "prior", "p_implied": 0.2}},
            {"id": "b", "title": "B", "parents": ["a"], "cpt": {"kind": "noisy_or", "leak": 0.0, "weights": {}}}]}"#;
        assert!(matches!(
            parse_fragment(bad_weights.as_bytes()),
            Err(FragmentError::Cpt { .. })
        ));
        let bad_p = r#"{"srw_version": 1, "name": "x", "nodes": [
            {"id": "a", "title": "A", "cpt": {"kind": "prior", "p_implied": 1.3}}]}"#;
        assert!(
            matches!(parse_fragment(bad_p.as_bytes()), Err(FragmentError::SchemaViolation { path, .. }) if path == "nodes[0].cpt.p_implied")
        );
    }

    #[test]
    fn inhibitory_linear_additive_warns() {
        let text = r#"{"srw_version": 1, "name": "x", "nodes": [
            {"id": "a", "title": "A", "cpt": {"kind": "prior", "p_implied": 0.2}},
            {"id": "b", "title": "B", "parents": ["a"], "cpt": {"kind": "linear_additive", "p_none": 0.9, "p_all": 0.1}}]}"#;
        let f = parse_fragment(text.as_bytes()).unwrap();
        assert_eq!(f.validate().unwrap().len(), 1);
    }

    #[test]
    fn linear_additive_compiles_over_canonical_parents() {
        let text = r#"{"srw_version": 1, "name": "x", "nodes": [
            {"id": "pdes", "title": "P", "cpt": {"kind": "prior", "p_implied": 0.2}},
            {"id": "distributed_sim", "title": "D", "cpt": {"kind": "prior", "p_implied": 0.2}},
            {"id": "time_mgmt", "title": "T", "parents": ["pdes", "distributed_sim"],
             "cpt": {"kind": "linear_additive", "p_none": 0.2, "p_all": 0.8}}]}"#;
        let net = compile(&parse_fragment(text.as_bytes()).unwrap()).unwrap();
        let rows = net.cpt("time_mgmt").unwrap().rows();
        for (got, want) in rows.iter().zip([0.2, 0.5, 0.5, 0.8]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn serialization_round_trip_is_semantic_identity() {
        let f = parse_fragment(EXAMPLE.as_bytes()).unwrap();
        let again = parse_fragment(f.to_json().as_bytes()).unwrap();
        assert_eq!(f, again);
        assert!(semantically_equal(&f, &again));
    }
}
