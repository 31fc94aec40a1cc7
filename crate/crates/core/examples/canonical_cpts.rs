//! Expanding the two canonical CPT shapes into full tables.

use std::collections::BTreeMap;

use srw::bayes::{node, CptTable};
use srw::fragment::{linear_additive_cpt, noisy_or_cpt};

fn print_table(title: &str, parents: &[srw::bayes::NodeId], table: &CptTable) {
    println!("{title}");
    for (row, p) in table.rows().iter().enumerate() {
        println!("  {:<32} {p:.4}", CptTable::row_key(parents, row));
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let parents = vec![node("distributed_sim"), node("pdes")];
    print_table(
        "linear additive, p_none 0.2, p_all 0.8",
        &parents,
        &linear_additive_cpt(0.2, 0.8, &parents)?,
    );

    let weights: BTreeMap<_, _> = [(node("distributed_sim"), 0.6), (node("pdes"), 0.7)].into();
    print_table(
        "noisy-or, leak 0.05",
        &parents,
        &noisy_or_cpt(0.05, &weights, &parents)?,
    );
    Ok(())
}
