//! Session transcripts: line-delimited JSON events, replay and the evidence
//! digests used to spot agents undoing each other.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::bayes::{EvidenceSet, Finding, NodeId, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Message,
    Assert,
    Retract,
    Soft,
    Propagate,
    Classify,
    Conflict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub actor: String,
    pub kind: EventKind,
    pub payload: Value,
}

impl Event {
    fn is_noop(&self) -> bool {
        self.payload
            .get("noop")
            .and_then(Value::as_bool)
            .unwrap_or(false)
    }

    fn node(&self) -> Option<NodeId> {
        self.payload
            .get("node")
            .and_then(Value::as_str)
            .and_then(|s| NodeId::new(s).ok())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Transcript {
    events: Vec<Event>,
}

impl Transcript {
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub(crate) fn push(&mut self, event: Event) {
        debug_assert!(self.events.last().is_none_or(|e| e.seq < event.seq));
        self.events.push(event);
    }

    /// Events with `seq >= from`.
    pub fn since(&self, from: u64) -> &[Event] {
        let start = self.events.partition_point(|e| e.seq < from);
        &self.events[start..]
    }

    pub fn last(&self) -> Option<&Event> {
        self.events.last()
    }

    /// One JSON object per line, each line newline-terminated.
    pub fn to_jsonl(&self) -> String {
        self.events
            .iter()
            .map(|e| serde_json::to_string(e).expect("event serializes") + "\n")
            .collect()
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let events = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(Transcript { events })
    }

    /// Re-apply every evidence event in order to an empty evidence set.
    pub fn replay_evidence(&self) -> EvidenceSet {
        replay_events(&self.events)
    }

    pub fn has_conflict(&self) -> bool {
        self.events.iter().any(|e| e.kind == EventKind::Conflict)
    }
}

pub(crate) fn replay_events(events: &[Event]) -> EvidenceSet {
    let mut ev = EvidenceSet::new();
    for e in events {
        if e.is_noop() {
            continue;
        }
        let Some(node) = e.node() else { continue };
        match e.kind {
            EventKind::Assert => {
                let state = e
                    .payload
                    .get("state")
                    .cloned()
                    .and_then(|s| serde_json::from_value::<State>(s).ok());
                if let Some(state) = state {
                    ev.assert_hard(node, state, &e.actor);
                }
            }
            EventKind::Retract => {
                ev.retract(node.as_str());
            }
            EventKind::Soft => {
                let get = |k: &str| e.payload.get(k).and_then(Value::as_f64);
                if let (Some(l1), Some(l0)) = (get("l_implied"), get("l_not")) {
                    // logged soft findings were valid when applied
                    let _ = ev.declare_soft(node, l1, l0, &e.actor);
                }
            }
            _ => {}
        }
    }
    ev
}

/// Stable short hash of an evidence state (findings only, not provenance).
pub fn evidence_digest(ev: &EvidenceSet) -> String {
    let mut hasher = Sha256::new();
    for (node, finding) in ev.findings() {
        let entry = match finding {
            Finding::Hard { state } => format!("{node}=H{}", u8::from(state.is_implied())),
            Finding::Soft { l_implied, l_not } => {
                format!(
                    "{node}=S{:016x},{:016x}",
                    l_implied.to_bits(),
                    l_not.to_bits()
                )
            }
        };
        hasher.update(entry.as_bytes());
        hasher.update(b";");
    }
    hasher
        .finalize()
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Evidence digest recorded after an evidence change logged at `seq`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigestEntry {
    pub seq: u64,
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Oscillation {
    pub first_seq: u64,
    pub repeat_seq: u64,
}

/// Earliest point where an evidence state comes back after at least one
/// intervening change.
pub fn detect_oscillation(history: &[DigestEntry]) -> Option<Oscillation> {
    for (r, repeat) in history.iter().enumerate() {
        if let Some(first) = history[..r.saturating_sub(1)]
            .iter()
            .find(|e| e.digest == repeat.digest)
        {
            return Some(Oscillation {
                first_seq: first.seq,
                repeat_seq: repeat.seq,
            });
        }
    }
    None
}
