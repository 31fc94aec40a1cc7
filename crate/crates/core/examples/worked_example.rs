//! Four-node time management network: priors, then the two findings that
//! push `time_mgmt` over the strict threshold.

use std::path::PathBuf;

use srw::bayes::{node, posterior_marginals, EvidenceSet, State};
use srw::fragment::{classify, compile, parse_fragment};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus/worked_example.json");
    let fragment = parse_fragment(&std::fs::read(path)?)?;
    let net = compile(&fragment)?;

    let mut evidence = EvidenceSet::new();
    let steps = [None, Some("distributed_sim"), Some("pdes")];
    for step in steps {
        if let Some(id) = step {
            evidence = evidence.with_hard(node(id), State::Implied);
            println!("after {id} = implied");
        } else {
            println!("priors");
        }
        let beliefs = posterior_marginals(&net, &evidence)?;
        for (id, p) in beliefs.ranked() {
            println!("  {id:<16} {p:.4}");
        }
    }

    let beliefs = posterior_marginals(&net, &evidence)?;
    let implied = classify(&beliefs, 0.75);
    println!(
        "implied at 0.75: {:?}",
        implied
            .ids()
            .iter()
            .map(|id| id.as_str())
            .collect::<Vec<_>>()
    );
    Ok(())
}
