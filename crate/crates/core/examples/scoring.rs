//! Score the three evaluation fixtures against their gold standards.

use std::path::PathBuf;

use srw::evaluation::{parse_gold, parse_implied, score};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let eval = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus/eval");
    for phase in ["phase_one", "phase_two", "naive_user"] {
        let implied = parse_implied(&std::fs::read(eval.join(phase).join("implied.json"))?)?;
        let gold = parse_gold(&std::fs::read(eval.join(phase).join("gold.json"))?)?;
        let metrics = score(&implied, &gold)?;
        println!("{phase}");
        print!("{}", metrics.to_table());
        println!();
    }
    Ok(())
}
