//! Build a 250-node synthetic web from glued fragments and time a full
//! propagation with a handful of findings.

use std::time::Instant;

use srw::bayes::{posterior_marginals, EvidenceSet, State};
use srw::fragment::compile;
use srw::synth::{synthetic_web, SynthParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = SynthParams::default();
    let web = synthetic_web(params)?;
    let net = compile(&web)?;
    let mut evidence = EvidenceSet::new();
    for (i, id) in net.nodes().iter().step_by(50).enumerate() {
        evidence = evidence.with_hard(id.clone(), State::from_bit(i % 2 == 0));
    }
    let start = Instant::now();
    let beliefs = posterior_marginals(&net, &evidence)?;
    let elapsed = start.elapsed();
    println!(
        "{} nodes, {} findings, {:?}",
        net.len(),
        evidence.len(),
        elapsed
    );
    for (id, p) in beliefs.ranked().into_iter().take(5) {
        println!("  {id:<12} {p:.4}");
    }
    Ok(())
}
