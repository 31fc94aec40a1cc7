use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::transcript::{
    detect_oscillation, evidence_digest, DigestEntry, Event, EventKind, Oscillation, Transcript,
};
use super::{Action, Agent, AgentError, Condition};
use crate::bayes::{
    evidence_probability, posterior_marginals, BayesError, BeliefMap, EvidenceSet, Finding,
    Network, NodeId,
};
use crate::elicitation::{translate, Message, PatternRule};
use crate::fragment::{classify_with_band, ImpliedSet, DEFAULT_BORDERLINE_BAND};

const ENGINE: &str = "engine";
const OPERATOR: &str = "operator";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error(transparent)]
    Bayes(#[from] BayesError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("two agents are named `{0}`")]
    DuplicateAgent(String),
    #[error("agent `{agent}` refers to unknown node `{node}`")]
    UnknownNode { agent: String, node: NodeId },
    #[error("session is paused on a conflict; an operator must assert or retract evidence first")]
    Paused,
    #[error("session halted on a conflict")]
    Halted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub threshold: f64,
    pub band: f64,
    /// Agent re-evaluation rounds allowed per settling phase.
    pub max_rounds: u32,
    /// Recompute beliefs once per delivery or round instead of after every
    /// evidence change.
    pub batch_propagate: bool,
    /// Halt on a conflict (headless runs) or pause for an operator.
    pub halt_on_conflict: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            threshold: 0.75,
            band: DEFAULT_BORDERLINE_BAND,
            max_rounds: 32,
            batch_propagate: false,
            halt_on_conflict: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum ConflictKind {
    Oscillation(Oscillation),
    MaxRoundsExceeded { rounds: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    Halted { conflict: ConflictKind },
    Paused { conflict: ConflictKind },
}

#[derive(Debug, Clone)]
struct Pending {
    topic: String,
    body: String,
    source: String,
    rule: Option<String>,
}

/// A live elicitation session on one network. All mutations are totally
/// ordered through `&mut self`; every one of them is logged.
#[derive(Debug, Clone)]
pub struct Session {
    network: Network,
    agents: Vec<Agent>,
    rules: Vec<PatternRule>,
    config: SessionConfig,
    evidence: EvidenceSet,
    beliefs: BeliefMap,
    transcript: Transcript,
    next_seq: u64,
    round: u64,
    history: Vec<DigestEntry>,
    fired: BTreeSet<(String, String)>,
    inbox: VecDeque<Pending>,
    status: SessionStatus,
    dirty: bool,
}

impl Session {
    /// Check the inputs, log the prior beliefs and let agents react to them.
    pub fn new(
        network: Network,
        mut agents: Vec<Agent>,
        rules: Vec<PatternRule>,
        config: SessionConfig,
    ) -> Result<Self, SessionError> {
        let beliefs = posterior_marginals(&network, &EvidenceSet::new())?;
        agents.sort_by(|a, b| a.name.cmp(&b.name));
        for pair in agents.windows(2) {
            if pair[0].name == pair[1].name {
                return Err(SessionError::DuplicateAgent(pair[0].name.clone()));
            }
        }
        for agent in &agents {
            agent.validate()?;
            if let Some(node) = agent
                .referenced_nodes()
                .into_iter()
                .find(|n| !network.contains(n.as_str()))
            {
                return Err(SessionError::UnknownNode {
                    agent: agent.name.clone(),
                    node: node.clone(),
                });
            }
        }
        let mut session = Session {
            network,
            agents,
            rules,
            config,
            evidence: EvidenceSet::new(),
            beliefs,
            transcript: Transcript::default(),
            next_seq: 1,
            round: 0,
            history: Vec::new(),
            fired: BTreeSet::new(),
            inbox: VecDeque::new(),
            status: SessionStatus::Active,
            dirty: false,
        };
        let payload = session.beliefs_payload();
        session.log(ENGINE, EventKind::Propagate, payload);
        session.settle(0);
        Ok(session)
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn evidence(&self) -> &EvidenceSet {
        &self.evidence
    }

    pub fn beliefs(&self) -> &BeliefMap {
        &self.beliefs
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn status(&self) -> &SessionStatus {
        &self.status
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn is_active(&self) -> bool {
        self.status == SessionStatus::Active
    }

    fn ensure_active(&self) -> Result<(), SessionError> {
        match self.status {
            SessionStatus::Active => Ok(()),
            SessionStatus::Paused { .. } => Err(SessionError::Paused),
            SessionStatus::Halted { .. } => Err(SessionError::Halted),
        }
    }

    fn log(&mut self, actor: &str, kind: EventKind, payload: Value) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.transcript.push(Event {
            seq,
            actor: actor.to_string(),
            kind,
            payload,
        });
        seq
    }

    fn beliefs_payload(&self) -> Value {
        json!({ "beliefs": self.beliefs })
    }

    /// Translate a user requirement, deliver the resulting messages and let
    /// the agents settle. Returns the seq of the first event logged.
    pub fn utterance(&mut self, text: &str) -> Result<u64, SessionError> {
        self.ensure_active()?;
        let start = self.next_seq;
        self.log(
            "user",
            EventKind::Message,
            json!({ "topic": "utterance", "body": text }),
        );
        let translation = translate(text, &self.rules);
        if let Some(diagnostic) = translation.untranslated {
            self.log(
                "translator",
                EventKind::Message,
                json!({ "topic": "untranslated", "body": diagnostic }),
            );
        }
        for m in translation.messages {
            self.inbox.push_back(Pending {
                topic: m.topic,
                body: m.body,
                source: "translator".into(),
                rule: Some(m.rule),
            });
        }
        let mut rounds = 0;
        self.drain_inbox(&mut rounds);
        self.settle(rounds);
        Ok(start)
    }

    /// Deliver a message straight onto the bus, bypassing translation.
    pub fn post_message(
        &mut self,
        topic: &str,
        body: &str,
        source: &str,
    ) -> Result<u64, SessionError> {
        self.ensure_active()?;
        let start = self.next_seq;
        self.inbox.push_back(Pending {
            topic: topic.into(),
            body: body.into(),
            source: source.into(),
            rule: None,
        });
        let mut rounds = 0;
        self.drain_inbox(&mut rounds);
        self.settle(rounds);
        Ok(start)
    }

    /// Deliver queued messages. Messages emitted during a delivery wait for
    /// the next generation; each generation uses up one round.
    fn drain_inbox(&mut self, rounds: &mut u32) -> bool {
        let mut progressed = false;
        while self.is_active() && !self.inbox.is_empty() {
            if *rounds == self.config.max_rounds {
                self.raise(ConflictKind::MaxRoundsExceeded { rounds: *rounds });
                break;
            }
            *rounds += 1;
            let generation: Vec<Pending> = self.inbox.drain(..).collect();
            for p in generation {
                if !self.is_active() {
                    break;
                }
                let mut payload = json!({ "topic": p.topic, "body": p.body });
                if let Some(rule) = &p.rule {
                    payload["rule"] = json!(rule);
                }
                let seq = self.log(&p.source, EventKind::Message, payload);
                let message = Message {
                    topic: p.topic,
                    body: p.body,
                    source: p.source,
                    seq,
                };
                progressed |= self.evaluate(Some(&message));
                self.flush();
            }
        }
        progressed
    }

    /// Re-evaluate agents without a message until nothing changes.
    fn settle(&mut self, mut rounds: u32) {
        while self.is_active() {
            if rounds == self.config.max_rounds {
                self.raise(ConflictKind::MaxRoundsExceeded { rounds });
                break;
            }
            rounds += 1;
            self.round += 1;
            let mut progressed = self.evaluate(None);
            self.flush();
            progressed |= self.drain_inbox(&mut rounds);
            if !progressed {
                break;
            }
        }
    }

    /// One pass over all agents (name order) and their rules (file order).
    /// Returns whether evidence changed or a message was emitted.
    fn evaluate(&mut self, message: Option<&Message>) -> bool {
        let mut progressed = false;
        for ai in 0..self.agents.len() {
            for ri in 0..self.agents[ai].rules.len() {
                if !self.is_active() {
                    return progressed;
                }
                let agent = self.agents[ai].name.clone();
                let rule = self.agents[ai].rules[ri].clone();
                let key = (agent.clone(), rule.id.clone());
                if rule.fired_once && self.fired.contains(&key) {
                    continue;
                }
                if !rule.when.iter().all(|c| self.holds(c, message)) {
                    continue;
                }
                self.fired.insert(key);
                for action in &rule.then {
                    if !self.is_active() {
                        break;
                    }
                    progressed |= self.execute(&agent, &rule.id, action);
                }
            }
        }
        progressed
    }

    fn holds(&self, condition: &Condition, message: Option<&Message>) -> bool {
        match condition {
            Condition::MessageMatches { topic, contains } => {
                message.is_some_and(|m| &m.topic == topic && m.body.contains(contains.as_str()))
            }
            Condition::PosteriorAtLeast { node, p } => {
                self.beliefs.get(node.as_str()).is_some_and(|b| b >= *p)
            }
            Condition::PosteriorBelow { node, p } => {
                self.beliefs.get(node.as_str()).is_some_and(|b| b < *p)
            }
            Condition::EvidenceAbsent { node } => self.evidence.finding(node.as_str()).is_none(),
            Condition::EvidencePresent { node, state } => {
                match (self.evidence.finding(node.as_str()), state) {
                    (None, _) => false,
                    (Some(_), None) => true,
                    (Some(Finding::Hard { state: s }), Some(want)) => s == *want,
                    (Some(Finding::Soft { .. }), Some(_)) => false,
                }
            }
        }
    }

    fn execute(&mut self, actor: &str, rule: &str, action: &Action) -> bool {
        let current = |node: &NodeId| self.evidence.finding(node.as_str());
        match action {
            Action::AssertHard { node, state } => {
                let payload = json!({ "node": node, "state": state, "rule": rule });
                if current(node) == Some(Finding::Hard { state: *state }) {
                    self.log_noop(actor, EventKind::Assert, payload);
                    return false;
                }
                let mut next = self.evidence.clone();
                next.assert_hard(node.clone(), *state, actor);
                self.commit(actor, EventKind::Assert, payload, next)
            }
            Action::Retract { node } => {
                let payload = json!({ "node": node, "rule": rule });
                if current(node).is_none() {
                    self.log_noop(actor, EventKind::Retract, payload);
                    return false;
                }
                let mut next = self.evidence.clone();
                next.retract(node.as_str());
                self.commit(actor, EventKind::Retract, payload, next)
            }
            Action::DeclareSoft {
                node,
                l_implied,
                l_not,
            } => {
                let payload =
                    json!({ "node": node, "l_implied": l_implied, "l_not": l_not, "rule": rule });
                if current(node)
                    == Some(Finding::Soft {
                        l_implied: *l_implied,
                        l_not: *l_not,
                    })
                {
                    self.log_noop(actor, EventKind::Soft, payload);
                    return false;
                }
                let mut next = self.evidence.clone();
                // agents are validated when the session starts
                if next
                    .declare_soft(node.clone(), *l_implied, *l_not, actor)
                    .is_err()
                {
                    return false;
                }
                self.commit(actor, EventKind::Soft, payload, next)
            }
            Action::EmitMessage { topic, body } => {
                self.inbox.push_back(Pending {
                    topic: topic.clone(),
                    body: body.clone(),
                    source: actor.to_string(),
                    rule: Some(rule.to_string()),
                });
                true
            }
        }
    }

    fn log_noop(&mut self, actor: &str, kind: EventKind, mut payload: Value) {
        payload["noop"] = json!(true);
        self.log(actor, kind, payload);
    }

    /// Apply `next` unless it contradicts the model; contradictions are
    /// logged and the evidence is left as it was.
    fn commit(&mut self, actor: &str, kind: EventKind, payload: Value, next: EvidenceSet) -> bool {
        let checked = if self.config.batch_propagate {
            evidence_probability(&self.network, &next).and_then(|mass| {
                if mass > 0.0 && mass.is_finite() {
                    Ok(None)
                } else {
                    Err(BayesError::EvidenceContradiction)
                }
            })
        } else {
            posterior_marginals(&self.network, &next).map(Some)
        };
        let beliefs = match checked {
            Ok(b) => b,
            Err(err) => {
                let mut conflict = json!({ "reason": "evidence_contradiction", "attempted": kind, "detail": err.to_string() });
                for key in ["node", "state", "rule"] {
                    if let Some(v) = payload.get(key) {
                        conflict[key] = v.clone();
                    }
                }
                self.log(actor, EventKind::Conflict, conflict);
                return false;
            }
        };
        self.evidence = next;
        let seq = self.log(actor, kind, payload);
        match beliefs {
            Some(b) => {
                self.beliefs = b;
                let payload = self.beliefs_payload();
                self.log(ENGINE, EventKind::Propagate, payload);
            }
            None => self.dirty = true,
        }
        self.history.push(DigestEntry {
            seq,
            digest: evidence_digest(&self.evidence),
        });
        if let Some(osc) = detect_oscillation(&self.history) {
            self.raise(ConflictKind::Oscillation(osc));
        }
        true
    }

    fn flush(&mut self) {
        if !self.dirty {
            return;
        }
        self.dirty = false;
        // every committed state was checked for positive probability
        self.beliefs =
            posterior_marginals(&self.network, &self.evidence).expect("checked evidence");
        let payload = self.beliefs_payload();
        self.log(ENGINE, EventKind::Propagate, payload);
    }

    fn raise(&mut self, conflict: ConflictKind) {
        self.flush();
        let payload = serde_json::to_value(&conflict).expect("conflict serializes");
        self.log(ENGINE, EventKind::Conflict, payload);
        self.inbox.clear();
        self.status = if self.config.halt_on_conflict {
            SessionStatus::Halted { conflict }
        } else {
            SessionStatus::Paused { conflict }
        };
    }

    /// Operator-sourced finding. Resolves a paused conflict on success.
    pub fn operator_set(&mut self, node: &NodeId, finding: Finding) -> Result<u64, SessionError> {
        if !self.network.contains(node.as_str()) {
            return Err(BayesError::UnknownNode(node.to_string()).into());
        }
        let (kind, payload) = match finding {
            Finding::Hard { state } => (EventKind::Assert, json!({ "node": node, "state": state })),
            Finding::Soft { l_implied, l_not } => (
                EventKind::Soft,
                json!({ "node": node, "l_implied": l_implied, "l_not": l_not }),
            ),
        };
        let mut next = self.evidence.clone();
        match finding {
            Finding::Hard { state } => next.assert_hard(node.clone(), state, OPERATOR),
            Finding::Soft { l_implied, l_not } => {
                next.declare_soft(node.clone(), l_implied, l_not, OPERATOR)?
            }
        }
        self.operator_commit(
            kind,
            payload,
            next,
            self.evidence.finding(node.as_str()) == Some(finding),
        )
    }

    pub fn operator_retract(&mut self, node: &NodeId) -> Result<u64, SessionError> {
        if !self.network.contains(node.as_str()) {
            return Err(BayesError::UnknownNode(node.to_string()).into());
        }
        let mut next = self.evidence.clone();
        let changed = next.retract(node.as_str());
        self.operator_commit(EventKind::Retract, json!({ "node": node }), next, !changed)
    }

    fn operator_commit(
        &mut self,
        kind: EventKind,
        payload: Value,
        next: EvidenceSet,
        noop: bool,
    ) -> Result<u64, SessionError> {
        let beliefs = posterior_marginals(&self.network, &next)?;
        let start = self.next_seq;
        if matches!(self.status, SessionStatus::Paused { .. }) {
            self.status = SessionStatus::Active;
            self.history.clear();
        }
        if noop {
            self.log_noop(OPERATOR, kind, payload);
            return Ok(start);
        }
        self.evidence = next;
        let seq = self.log(OPERATOR, kind, payload);
        self.beliefs = beliefs;
        let payload = self.beliefs_payload();
        self.log(ENGINE, EventKind::Propagate, payload);
        self.history.push(DigestEntry {
            seq,
            digest: evidence_digest(&self.evidence),
        });
        Ok(start)
    }

    /// Classification of the current beliefs (no event logged).
    pub fn implied(&self, threshold: Option<f64>) -> ImpliedSet {
        classify_with_band(
            &self.beliefs,
            threshold.unwrap_or(self.config.threshold),
            self.config.band,
        )
    }

    /// Classify at the session threshold and log the snapshot.
    pub fn classify_snapshot(&mut self) -> ImpliedSet {
        let implied = self.implied(None);
        let payload = serde_json::to_value(&implied).expect("implied set serializes");
        self.log(ENGINE, EventKind::Classify, payload);
        implied
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutcome {
    pub transcript: Transcript,
    pub beliefs: BeliefMap,
    pub implied: ImpliedSet,
    pub status: SessionStatus,
}

impl SessionOutcome {
    pub fn conflict(&self) -> Option<&ConflictKind> {
        match &self.status {
            SessionStatus::Active => None,
            SessionStatus::Halted { conflict } | SessionStatus::Paused { conflict } => {
                Some(conflict)
            }
        }
    }
}

/// Headless session: every utterance is translated and stepped, then the
/// final beliefs are classified. Stops early on a conflict.
pub fn run_session(
    network: Network,
    agents: Vec<Agent>,
    utterances: &[String],
    rules: Vec<PatternRule>,
    config: SessionConfig,
) -> Result<SessionOutcome, SessionError> {
    let mut session = Session::new(network, agents, rules, config)?;
    for text in utterances {
        if !session.is_active() {
            break;
        }
        session.utterance(text)?;
    }
    let implied = session.classify_snapshot();
    Ok(SessionOutcome {
        transcript: session.transcript.clone(),
        beliefs: session.beliefs.clone(),
        implied,
        status: session.status.clone(),
    })
}
