//! Two agents that undo each other. The CLI-style session halts; a paused
//! session can be unblocked by an operator decision.

use std::path::PathBuf;

use srw::agents::{run_session, Session, SessionConfig};
use srw::bayes::{node, Finding, State};
use srw::cli::{load_agents, load_rules, load_utterances, load_web};
use srw::fragment::compile;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    let (web, _) = load_web(&corpus.join("worked_example.json"))?;
    let net = compile(&web)?;
    let agents = load_agents(&corpus.join("flipflop/agents"))?;

    let outcome = run_session(
        net.clone(),
        agents.clone(),
        &load_utterances(&corpus.join("flipflop/utterances.txt"))?,
        load_rules(&corpus.join("patterns.json"))?,
        SessionConfig::default(),
    )?;
    println!("halted: {}", serde_json::to_string(&outcome.status)?);

    let config = SessionConfig {
        halt_on_conflict: false,
        ..SessionConfig::default()
    };
    let mut session = Session::new(net, agents, vec![], config)?;
    println!("paused: {}", serde_json::to_string(session.status())?);
    session.operator_retract(&node("pdes"))?;
    session.operator_set(
        &node("distributed_sim"),
        Finding::Hard {
            state: State::Implied,
        },
    )?;
    println!(
        "after operator: {}",
        serde_json::to_string(session.status())?
    );
    println!("time_mgmt = {:.4}", session.beliefs().of("time_mgmt"));
    Ok(())
}
