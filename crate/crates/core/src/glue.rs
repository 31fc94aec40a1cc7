//! Combining fragments into one web.
//!
//! Nodes with the same id are unified and receive the union of their parent
//! lists. Their CPT specifications are merged with rules that are
//! commutative, associative and idempotent, so gluing a corpus gives the same
//! web whatever order the fragments are listed in:
//!
//! * linear-additive boundaries: `p_none` is the minimum, `p_all` the maximum;
//! * noisy-or: the leak is the maximum, each parent keeps its largest weight;
//! * priors must agree (or are averaged under [`PriorMerge::Mean`]);
//! * a prior placeholder yields to the other side's specification;
//! * explicit tables are never extended to new parents.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bayes::{find_cycle, NodeId};
use crate::fragment::{
    join_path, CptSpec, Fragment, FragmentError, RequirementNode, FORMAT_VERSION,
};

const PRIOR_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GlueError {
    #[error("gluing introduces a cycle: {}", join_path(.0))]
    CycleIntroduced(Vec<NodeId>),
    #[error("node `{node}` has an explicit table that cannot be glued ({reason}); convert it to a linear_additive or noisy_or specification first")]
    TableNotGluable { node: NodeId, reason: String },
    #[error("node `{node}` has conflicting priors {left} and {right}")]
    PriorConflict { node: NodeId, left: f64, right: f64 },
    #[error("node `{node}` cannot merge a {left} specification with a {right} specification")]
    SpecKindMismatch {
        node: NodeId,
        left: &'static str,
        right: &'static str,
    },
    #[error("invalid input fragment: {0}")]
    Invalid(#[from] FragmentError),
    #[error("nothing to glue")]
    Empty,
    #[error("gluing fragment {index} (`{right}`) onto `{left}`: {source}")]
    InPair {
        index: usize,
        left: String,
        right: String,
        source: Box<GlueError>,
    },
}

impl GlueError {
    /// The underlying error with pair annotations removed.
    pub fn root(&self) -> &GlueError {
        match self {
            GlueError::InPair { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.root() {
            GlueError::CycleIntroduced(_) => "CycleIntroduced",
            GlueError::TableNotGluable { .. } => "TableNotGluable",
            GlueError::PriorConflict { .. } => "PriorConflict",
            GlueError::SpecKindMismatch { .. } => "SpecKindMismatch",
            GlueError::Invalid(_) => "InvalidFragment",
            GlueError::Empty => "Empty",
            GlueError::InPair { .. } => unreachable!(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorMerge {
    /// Priors must agree within 1e-9.
    #[default]
    Strict,
    /// Arithmetic mean of the two priors.
    Mean,
}

/// Boundary and leak merging is fixed (min/max); only priors are configurable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GluePolicy {
    #[serde(default)]
    pub prior_merge: PriorMerge,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GlueReport {
    /// Ids present in more than one input.
    pub unified: Vec<NodeId>,
    /// For unified nodes, parents that not every input listed.
    pub parent_unions: BTreeMap<NodeId, Vec<NodeId>>,
    pub warnings: Vec<String>,
}

impl GlueReport {
    fn absorb(&mut self, other: GlueReport) {
        let unified: BTreeSet<NodeId> = self.unified.drain(..).chain(other.unified).collect();
        self.unified = unified.into_iter().collect();
        for (id, parents) in other.parent_unions {
            let entry = self.parent_unions.entry(id).or_default();
            let merged: BTreeSet<NodeId> = entry.drain(..).chain(parents).collect();
            *entry = merged.into_iter().collect();
        }
        self.warnings.extend(other.warnings);
    }
}

fn merged_name(a: &str, b: &str) -> String {
    let parts: BTreeSet<&str> = a
        .split('+')
        .chain(b.split('+'))
        .filter(|s| !s.is_empty())
        .collect();
    parts.into_iter().collect::<Vec<_>>().join("+")
}

fn merge_spec(
    id: &NodeId,
    left: &RequirementNode,
    right: &RequirementNode,
    parents: &[NodeId],
    policy: GluePolicy,
    warnings: &mut Vec<String>,
) -> Result<CptSpec, GlueError> {
    let same_parents = |n: &RequirementNode| n.canonical_parents() == parents;
    let mismatch = || GlueError::SpecKindMismatch {
        node: id.clone(),
        left: left.cpt.kind(),
        right: right.cpt.kind(),
    };
    let table_error = |reason: &str| GlueError::TableNotGluable {
        node: id.clone(),
        reason: reason.to_string(),
    };

    match (&left.cpt, &right.cpt) {
        (CptSpec::Prior { p_implied: a }, CptSpec::Prior { p_implied: b }) => {
            match policy.prior_merge {
                PriorMerge::Strict if (a - b).abs() <= PRIOR_TOLERANCE => Ok(left.cpt.clone()),
                PriorMerge::Strict => Err(GlueError::PriorConflict {
                    node: id.clone(),
                    left: *a,
                    right: *b,
                }),
                PriorMerge::Mean => Ok(CptSpec::Prior {
                    p_implied: (a + b) / 2.0,
                }),
            }
        }
        (CptSpec::Prior { .. }, other) | (other, CptSpec::Prior { .. }) => {
            if matches!(other, CptSpec::Table { .. }) {
                let table_side = if matches!(left.cpt, CptSpec::Table { .. }) {
                    left
                } else {
                    right
                };
                if !same_parents(table_side) {
                    return Err(table_error("parent set changed"));
                }
            }
            warnings.push(format!(
                "node `{id}`: prior superseded by {} specification",
                other.kind()
            ));
            Ok(other.clone())
        }
        (CptSpec::Table { rows: a }, CptSpec::Table { rows: b }) => {
            if !same_parents(left) || !same_parents(right) {
                return Err(table_error("parent set changed"));
            }
            let canonical = |rows: &BTreeMap<String, f64>| {
                let spec = CptSpec::Table { rows: rows.clone() };
                spec.expand(parents)
                    .expect("validated table")
                    .rows()
                    .to_vec()
            };
            let (x, y) = (canonical(a), canonical(b));
            if x.iter()
                .zip(&y)
                .all(|(p, q)| (p - q).abs() <= PRIOR_TOLERANCE)
            {
                Ok(left.cpt.clone())
            } else {
                Err(table_error("the two tables disagree"))
            }
        }
        (CptSpec::Table { .. }, _) if !same_parents(left) => Err(table_error("parent set changed")),
        (_, CptSpec::Table { .. }) if !same_parents(right) => {
            Err(table_error("parent set changed"))
        }
        (
            CptSpec::LinearAdditive {
                p_none: n1,
                p_all: a1,
            },
            CptSpec::LinearAdditive {
                p_none: n2,
                p_all: a2,
            },
        ) => Ok(CptSpec::LinearAdditive {
            p_none: n1.min(*n2),
            p_all: a1.max(*a2),
        }),
        (
            CptSpec::NoisyOr {
                leak: l1,
                weights: w1,
            },
            CptSpec::NoisyOr {
                leak: l2,
                weights: w2,
            },
        ) => {
            let mut weights = w1.clone();
            for (p, w) in w2 {
                weights
                    .entry(p.clone())
                    .and_modify(|x| *x = x.max(*w))
                    .or_insert(*w);
            }
            Ok(CptSpec::NoisyOr {
                leak: l1.max(*l2),
                weights,
            })
        }
        _ => Err(mismatch()),
    }
}

/// Glue two fragments. The result lists nodes in id order.
pub fn glue_pair(
    a: &Fragment,
    b: &Fragment,
    policy: GluePolicy,
) -> Result<(Fragment, GlueReport), GlueError> {
    a.validate()?;
    b.validate()?;
    let mut report = GlueReport::default();
    let mut nodes: BTreeMap<NodeId, RequirementNode> =
        a.nodes.iter().map(|n| (n.id.clone(), n.clone())).collect();

    for right in &b.nodes {
        let Some(left) = nodes.get(&right.id) else {
            nodes.insert(right.id.clone(), right.clone());
            continue;
        };
        let id = right.id.clone();
        report.unified.push(id.clone());

        let l: BTreeSet<&NodeId> = left.parents.iter().collect();
        let r: BTreeSet<&NodeId> = right.parents.iter().collect();
        let parents: Vec<NodeId> = l.union(&r).map(|p| (*p).clone()).collect();
        let partial: Vec<NodeId> = l.symmetric_difference(&r).map(|p| (*p).clone()).collect();
        if !partial.is_empty() {
            report.parent_unions.insert(id.clone(), partial);
        }

        let cpt = merge_spec(&id, left, right, &parents, policy, &mut report.warnings)?;
        if left.title != right.title || left.description != right.description {
            report.warnings.push(format!(
                "node `{id}`: display text differs between `{}` and `{}`; using the latter",
                a.name, b.name
            ));
        }
        nodes.insert(
            id.clone(),
            RequirementNode {
                id,
                title: right.title.clone(),
                description: right.description.clone(),
                parents,
                cpt,
            },
        );
    }
    report.unified.sort();

    if let Some(cycle) = find_cycle(nodes.values().map(|n| (&n.id, n.parents.as_slice()))) {
        return Err(GlueError::CycleIntroduced(cycle));
    }
    let glued = Fragment {
        version: FORMAT_VERSION,
        name: merged_name(&a.name, &b.name),
        nodes: nodes.into_values().collect(),
    };
    report.warnings.extend(glued.validate()?);
    Ok((glued, report))
}

/// Left fold of [`glue_pair`] over `fragments`.
pub fn glue_all(
    fragments: &[Fragment],
    policy: GluePolicy,
) -> Result<(Fragment, GlueReport), GlueError> {
    let (first, rest) = fragments.split_first().ok_or(GlueError::Empty)?;
    first.validate()?;
    let mut acc = first.clone();
    let mut report = GlueReport::default();
    for (i, next) in rest.iter().enumerate() {
        let (glued, step) = glue_pair(&acc, next, policy).map_err(|e| GlueError::InPair {
            index: i + 1,
            left: acc.name.clone(),
            right: next.name.clone(),
            source: Box::new(e),
        })?;
        acc = glued;
        report.absorb(step);
    }
    Ok((acc, report))
}

/// `{"fragments": [paths], "policy": {"prior_merge": "strict"|"mean"}}`.
/// Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlueManifest {
    pub fragments: Vec<PathBuf>,
    #[serde(default)]
    pub policy: GluePolicy,
}

impl GlueManifest {
    pub fn resolve(&self, manifest_path: &Path) -> Vec<PathBuf> {
        let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
        self.fragments
            .iter()
            .map(|p| {
                if p.is_absolute() {
                    p.clone()
                } else {
                    base.join(p)
                }
            })
            .collect()
    }
}
