//! Translate free text into bus messages with the corpus rulebook.

use std::path::PathBuf;

use srw::elicitation::{parse_rulebook, translate};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus/patterns.json");
    let rules = parse_rulebook(&std::fs::read(path)?)?;
    let inputs = [
        "The trainer must run as a distributed simulation across sites",
        "Use PDES for the engagement model",
        "It should be blue",
    ];
    for text in inputs {
        let t = translate(text, &rules);
        println!("> {text}");
        for m in &t.messages {
            println!("  [{}] {}: {}", m.rule, m.topic, m.body);
        }
        if let Some(note) = t.untranslated {
            println!("  {note}");
        }
    }
    Ok(())
}
