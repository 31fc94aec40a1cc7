//! Rule-based agents working on a shared requirement web.
//!
//! Agents read the current posteriors, the evidence on each node and the
//! message being delivered, and respond by asserting, retracting or softening
//! evidence, or by emitting further messages. Every mutation goes through a
//! [`Session`], which recomputes beliefs and logs a replayable
//! [`Transcript`].
//!
//! Agent file format:
//!
//! ```json
//! {"agent": "time_expert", "rules": [
//!   {"id": "ds", "fired_once": true,
//!    "when": [{"kind": "message_matches", "topic": "user_req", "contains": "distributed_sim"}],
//!    "then": [{"kind": "assert_hard", "node": "distributed_sim", "state": "implied"}]}
//! ]}
//! ```

mod session;
mod transcript;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bayes::{Likelihood, NodeId, State};

pub use session::{
    run_session, ConflictKind, Session, SessionConfig, SessionError, SessionOutcome, SessionStatus,
};
pub use transcript::{
    detect_oscillation, evidence_digest, DigestEntry, Event, EventKind, Oscillation, Transcript,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("schema violation at `{path}`: {message}")]
    SchemaViolation { path: String, message: String },
    #[error("unknown action kind `{kind}` at `{path}`")]
    UnknownActionKind { path: String, kind: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Condition {
    /// The message being delivered has this topic and its body contains the
    /// substring. Never true outside message delivery.
    MessageMatches {
        topic: String,
        #[serde(default)]
        contains: String,
    },
    PosteriorAtLeast {
        node: NodeId,
        p: f64,
    },
    PosteriorBelow {
        node: NodeId,
        p: f64,
    },
    EvidenceAbsent {
        node: NodeId,
    },
    /// Any finding when `state` is omitted, else a hard finding in `state`.
    EvidencePresent {
        node: NodeId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        state: Option<State>,
    },
}

impl Condition {
    fn node(&self) -> Option<&NodeId> {
        match self {
            Condition::MessageMatches { .. } => None,
            Condition::PosteriorAtLeast { node, .. }
            | Condition::PosteriorBelow { node, .. }
            | Condition::EvidenceAbsent { node }
            | Condition::EvidencePresent { node, .. } => Some(node),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Action {
    AssertHard {
        node: NodeId,
        state: State,
    },
    Retract {
        node: NodeId,
    },
    DeclareSoft {
        node: NodeId,
        l_implied: f64,
        l_not: f64,
    },
    EmitMessage {
        topic: String,
        body: String,
    },
}

const ACTION_KINDS: [&str; 4] = ["assert_hard", "retract", "declare_soft", "emit_message"];

impl Action {
    fn node(&self) -> Option<&NodeId> {
        match self {
            Action::AssertHard { node, .. }
            | Action::Retract { node }
            | Action::DeclareSoft { node, .. } => Some(node),
            Action::EmitMessage { .. } => None,
        }
    }
}

fn default_fired_once() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentRule {
    pub id: String,
    pub when: Vec<Condition>,
    pub then: Vec<Action>,
    #[serde(default = "default_fired_once")]
    pub fired_once: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Agent {
    #[serde(rename = "agent")]
    pub name: String,
    pub rules: Vec<AgentRule>,
}

impl Agent {
    pub fn referenced_nodes(&self) -> BTreeSet<&NodeId> {
        self.rules
            .iter()
            .flat_map(|r| {
                r.when
                    .iter()
                    .filter_map(Condition::node)
                    .chain(r.then.iter().filter_map(Action::node))
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let schema = |path: String, message: &str| AgentError::SchemaViolation {
            path,
            message: message.to_string(),
        };
        if self.name.trim().is_empty() {
            return Err(schema("agent".into(), "agent name is empty"));
        }
        if self.rules.is_empty() {
            return Err(schema("rules".into(), "an agent needs at least one rule"));
        }
        let mut ids = BTreeSet::new();
        for (i, rule) in self.rules.iter().enumerate() {
            if !ids.insert(&rule.id) {
                return Err(schema(format!("rules[{i}].id"), "duplicate rule id"));
            }
            if rule.when.is_empty() {
                return Err(schema(
                    format!("rules[{i}].when"),
                    "a rule needs at least one condition",
                ));
            }
            if rule.then.is_empty() {
                return Err(schema(
                    format!("rules[{i}].then"),
                    "a rule needs at least one action",
                ));
            }
            for (j, c) in rule.when.iter().enumerate() {
                if let Condition::PosteriorAtLeast { p, .. } | Condition::PosteriorBelow { p, .. } =
                    c
                {
                    if !(0.0..=1.0).contains(p) {
                        return Err(schema(
                            format!("rules[{i}].when[{j}].p"),
                            "not a probability",
                        ));
                    }
                }
            }
            for (j, a) in rule.then.iter().enumerate() {
                if let Action::DeclareSoft {
                    l_implied, l_not, ..
                } = a
                {
                    if Likelihood::new(*l_implied, *l_not).is_none() {
                        return Err(schema(
                            format!("rules[{i}].then[{j}]"),
                            "likelihoods must be finite, non-negative and not both zero",
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Parse an agent file. Rule order in the file is evaluation order.
pub fn parse_agent(bytes: &[u8]) -> Result<Agent, AgentError> {
    let raw: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| AgentError::SchemaViolation {
            path: String::new(),
            message: e.to_string(),
        })?;
    // report unknown action kinds by name rather than as a generic schema error
    if let Some(rules) = raw.get("rules").and_then(|r| r.as_array()) {
        for (i, rule) in rules.iter().enumerate() {
            let Some(actions) = rule.get("then").and_then(|t| t.as_array()) else {
                continue;
            };
            for (j, action) in actions.iter().enumerate() {
                if let Some(kind) = action.get("kind").and_then(|k| k.as_str()) {
                    if !ACTION_KINDS.contains(&kind) {
                        return Err(AgentError::UnknownActionKind {
                            path: format!("rules[{i}].then[{j}]"),
                            kind: kind.to_string(),
                        });
                    }
                }
            }
        }
    }
    let agent: Agent =
        serde_path_to_error::deserialize(raw).map_err(|e| AgentError::SchemaViolation {
            path: e.path().to_string(),
            message: e.into_inner().to_string(),
        })?;
    agent.validate()?;
    Ok(agent)
}
