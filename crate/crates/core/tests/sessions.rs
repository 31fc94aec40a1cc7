mod common;

use srw::agents::{run_session, EventKind, Session, SessionConfig, Transcript};
use srw::bayes::{node, posterior_marginals, BeliefMap, Finding, State};
use srw::cli::{load_agents, load_rules, load_utterances};

use common::*;

fn corpus_session(config: SessionConfig) -> srw::agents::SessionOutcome {
    run_session(
        worked_example(),
        load_agents(&corpus("agents")).unwrap(),
        &load_utterances(&corpus("utterances.txt")).unwrap(),
        load_rules(&corpus("patterns.json")).unwrap(),
        config,
    )
    .unwrap()
}

#[test]
fn every_checkpoint_matches_the_replayed_evidence() {
    let outcome = corpus_session(SessionConfig::default());
    let events = outcome.transcript.events();
    let net = worked_example();
    let mut checked = 0;
    for (i, e) in events.iter().enumerate() {
        if e.kind != EventKind::Propagate {
            continue;
        }
        let prefix = Transcript::from_jsonl(
            &events[..i]
                .iter()
                .map(|e| serde_json::to_string(e).unwrap() + "\n")
                .collect::<String>(),
        )
        .unwrap();
        let expected = posterior_marginals(&net, &prefix.replay_evidence()).unwrap();
        let logged: BeliefMap = serde_json::from_value(e.payload["beliefs"].clone()).unwrap();
        assert!(
            expected.max_abs_diff(&logged) < 1e-12,
            "checkpoint at seq {}",
            e.seq
        );
        checked += 1;
    }
    assert_eq!(checked, 3);
}

#[test]
fn replay_reconstructs_the_final_evidence() {
    let outcome = corpus_session(SessionConfig::default());
    let text = outcome.transcript.to_jsonl();
    let replayed = Transcript::from_jsonl(&text).unwrap().replay_evidence();
    assert_eq!(replayed.findings().len(), 2);
    let beliefs = posterior_marginals(&worked_example(), &replayed).unwrap();
    assert!(beliefs.max_abs_diff(&outcome.beliefs) < 1e-12);
}

#[test]
fn sessions_are_deterministic() {
    let a = corpus_session(SessionConfig::default());
    let b = corpus_session(SessionConfig::default());
    assert_eq!(a.transcript.to_jsonl(), b.transcript.to_jsonl());
}

#[test]
fn batch_propagation_reaches_the_same_state() {
    let eager = corpus_session(SessionConfig::default());
    let batch = corpus_session(SessionConfig {
        batch_propagate: true,
        ..SessionConfig::default()
    });
    assert!(eager.beliefs.max_abs_diff(&batch.beliefs) < 1e-12);
    assert_eq!(eager.implied.ids(), batch.implied.ids());
}

#[test]
fn seq_numbers_are_strictly_increasing() {
    let outcome = corpus_session(SessionConfig::default());
    let seqs: Vec<u64> = outcome.transcript.events().iter().map(|e| e.seq).collect();
    assert!(seqs.windows(2).all(|w| w[1] == w[0] + 1));
}

#[test]
fn operator_resolution_of_a_paused_flip_flop() {
    let agents = load_agents(&corpus("flipflop/agents")).unwrap();
    let config = SessionConfig {
        halt_on_conflict: false,
        ..SessionConfig::default()
    };
    let mut session = Session::new(worked_example(), agents, vec![], config).unwrap();
    assert!(!session.is_active());
    // keep pdes asserted: the retractor will undo it again, so the session
    // pauses once more rather than looping
    session
        .operator_set(
            &node("pdes"),
            Finding::Hard {
                state: State::Implied,
            },
        )
        .unwrap();
    assert!(session.is_active());
    let conflicts_before = session
        .transcript()
        .events()
        .iter()
        .filter(|e| e.kind == EventKind::Conflict)
        .count();
    let start = session.post_message("noise", "", "operator").unwrap();
    let later = session.transcript().since(start);
    let conflicts_after = conflicts_before
        + later
            .iter()
            .filter(|e| e.kind == EventKind::Conflict)
            .count();
    assert!(conflicts_after > conflicts_before);
    assert!(!session.is_active());
}
