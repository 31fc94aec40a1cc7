//! Glue the five corpus fragments through their manifest, then show the
//! cycle error raised by a bad pair.

use std::path::PathBuf;

use srw::cli::glue_manifest;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    let (web, report) = glue_manifest(&corpus.join("glue/manifest.json"))?;
    println!("{}: {} nodes", web.name, web.nodes.len());
    println!(
        "unified: {:?}",
        report
            .unified
            .iter()
            .map(|id| id.as_str())
            .collect::<Vec<_>>()
    );
    for warning in &report.warnings {
        println!("warning: {warning}");
    }

    match glue_manifest(&corpus.join("cycle/manifest.json")) {
        Ok(_) => println!("cycle pair glued unexpectedly"),
        Err(e) => println!("cycle pair: {e}"),
    }
    Ok(())
}
