use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::bayes::{BeliefMap, NodeId};

/// Default width of the report-only band below the threshold.
pub const DEFAULT_BORDERLINE_BAND: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedNode {
    pub node: NodeId,
    pub belief: f64,
}

/// Requirements at or above a threshold, plus those just below it.
/// Both lists are ordered by descending belief, then node id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpliedSet {
    pub threshold: f64,
    pub band: f64,
    pub implied: Vec<RankedNode>,
    pub borderline: Vec<RankedNode>,
}

impl ImpliedSet {
    pub fn ids(&self) -> BTreeSet<NodeId> {
        self.implied.iter().map(|r| r.node.clone()).collect()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.implied.iter().any(|r| r.node.as_str() == id)
    }

    pub fn len(&self) -> usize {
        self.implied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.implied.is_empty()
    }
}

pub fn classify(beliefs: &BeliefMap, threshold: f64) -> ImpliedSet {
    classify_with_band(beliefs, threshold, DEFAULT_BORDERLINE_BAND)
}

pub fn classify_with_band(beliefs: &BeliefMap, threshold: f64, band: f64) -> ImpliedSet {
    let mut implied = Vec::new();
    let mut borderline = Vec::new();
    for (id, belief) in beliefs.ranked() {
        let entry = RankedNode {
            node: id.clone(),
            belief,
        };
        if belief >= threshold {
            implied.push(entry);
        } else if belief >= threshold - band {
            borderline.push(entry);
        }
    }
    ImpliedSet {
        threshold,
        band,
        implied,
        borderline,
    }
}
