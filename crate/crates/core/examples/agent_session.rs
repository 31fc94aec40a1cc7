//! A headless session over the worked example with the corpus agents.
//! Prints the transcript as JSON lines and the final implied set.

use std::path::PathBuf;

use srw::agents::{run_session, SessionConfig};
use srw::cli::{load_agents, load_rules, load_utterances, load_web};
use srw::fragment::compile;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    let (web, _) = load_web(&corpus.join("worked_example.json"))?;
    let outcome = run_session(
        compile(&web)?,
        load_agents(&corpus.join("agents"))?,
        &load_utterances(&corpus.join("utterances.txt"))?,
        load_rules(&corpus.join("patterns.json"))?,
        SessionConfig::default(),
    )?;
    print!("{}", outcome.transcript.to_jsonl());
    println!(
        "implied: {:?}",
        outcome
            .implied
            .ids()
            .iter()
            .map(|id| id.as_str())
            .collect::<Vec<_>>()
    );
    Ok(())
}
