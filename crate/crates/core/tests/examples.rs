//! Runs every example binary and checks a line of its output.

use std::path::PathBuf;
use std::process::Command;

fn examples_dir() -> PathBuf {
    // target/debug/deps/examples-<hash> -> target/debug/examples
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().join("examples")
}

fn run_example(name: &str) -> String {
    let path = examples_dir().join(format!("{name}{}", std::env::consts::EXE_SUFFIX));
    if !path.exists() {
        let status = Command::new(env!("CARGO"))
            .args([
                "build",
                "--examples",
                "--manifest-path",
                concat!(env!("CARGO_MANIFEST_DIR"), "/Cargo.toml"),
            ])
            .status()
            .unwrap();
        assert!(status.success());
    }
    let out = Command::new(&path)
        .output()
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(
        out.status.success(),
        "{name}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn examples_run_and_print_what_they_promise() {
    let cases = [
        ("worked_example", "time_mgmt        0.8000"),
        ("canonical_cpts", "distributed_sim=1,pdes=1         0.8860"),
        ("glue_corpus", "17 nodes"),
        ("elicitation", "no pattern matched: It should be blue"),
        (
            "agent_session",
            "implied: [\"distributed_sim\", \"pdes\", \"time_mgmt\"]",
        ),
        ("oscillation", "after operator: {\"status\":\"active\"}"),
        ("scoring", "coverage     90.00%"),
        ("performance", "250 nodes"),
        ("service_client", "EVIDENCE TRAIL"),
    ];
    for (name, want) in cases {
        let stdout = run_example(name);
        assert!(
            stdout.contains(want),
            "{name} output lacks `{want}`:\n{stdout}"
        );
    }
}
