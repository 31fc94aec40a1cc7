mod common;

use std::collections::BTreeMap;

use srw::bayes::{node, posterior_marginals, EvidenceSet, State};
use srw::fragment::{
    compile, parse_fragment, semantically_equal, CptSpec, Fragment, FragmentError, RequirementNode,
};
use srw::glue::{glue_all, glue_pair, GlueError, GluePolicy, PriorMerge};

use common::*;

#[test]
fn worked_example_compiles_to_the_golden_marginals() {
    let net = worked_example();
    let cases = [
        (vec![], 0.288, 0.3728),
        (vec!["distributed_sim"], 0.48, 0.488),
        (vec!["distributed_sim", "pdes"], 0.80, 0.68),
    ];
    for (observed, tm, tmm) in cases {
        let ev = observed.iter().fold(EvidenceSet::new(), |ev, id| {
            ev.with_hard(node(id), State::Implied)
        });
        let beliefs = posterior_marginals(&net, &ev).unwrap();
        assert!((beliefs.of("time_mgmt") - tm).abs() < 1e-9, "{observed:?}");
        assert!(
            (beliefs.of("time_mgmt_msgs") - tmm).abs() < 1e-9,
            "{observed:?}"
        );
    }
}

#[test]
fn canonical_specs_expand_as_documented() {
    let fragment = corpus_fragment("glue/communications.json");
    let net = compile(&fragment).unwrap();
    // noisy-or over (distributed_sim, wan_operation), leak 0.05
    let rows = net.cpt("comm_middleware").unwrap().rows().to_vec();
    let want = [
        0.05,
        1.0 - 0.95 * 0.4,
        1.0 - 0.95 * 0.3,
        1.0 - 0.95 * 0.3 * 0.4,
    ];
    for (got, want) in rows.iter().zip(want) {
        assert!((got - want).abs() < 1e-12);
    }
    // linear-additive over two parents
    let time = compile(&corpus_fragment("glue/time_management.json")).unwrap();
    assert_eq!(time.cpt("time_mgmt").unwrap().rows(), &[0.2, 0.5, 0.5, 0.8]);
}

#[test]
fn parent_order_in_the_file_does_not_matter() {
    let mut fragment = corpus_fragment("worked_example.json");
    let reordered = {
        let mut f = fragment.clone();
        f.nodes.reverse();
        for n in &mut f.nodes {
            n.parents.reverse();
        }
        f
    };
    assert!(semantically_equal(&fragment, &reordered));
    fragment.nodes[0].cpt = CptSpec::Prior { p_implied: 0.3 };
    assert!(!semantically_equal(&fragment, &reordered));
}

#[test]
fn json_round_trip() {
    for rel in ["worked_example.json", "glue/save.json", "glue/display.json"] {
        let f = corpus_fragment(rel);
        assert_eq!(parse_fragment(f.to_json().as_bytes()).unwrap(), f);
    }
}

type ErrorCase = (&'static str, fn(&FragmentError) -> bool);

#[test]
fn schema_errors() {
    let cases: [ErrorCase; 5] = [
        (
            r#"{"srw_version": 1, "name": "x", "nodes": [{"id": "a", "title": "A", "cpt": {"kind": "prior", "p_implied": 0.2}, "extra": 1}]}"#,
            |e| matches!(e, FragmentError::SchemaViolation { .. }),
        ),
        (
            r#"{"srw_version": 2, "name": "x", "nodes": []}"#,
            |e| matches!(e, FragmentError::SchemaViolation { path, .. } if path == "srw_version"),
        ),
        (
            r#"{"srw_version": 1, "name": "x", "nodes": [{"id": "b", "title": "B", "parents": ["a"], "cpt": {"kind": "linear_additive", "p_none": 0.1, "p_all": 0.9}}]}"#,
            |e| matches!(e, FragmentError::UnknownParent { .. }),
        ),
        (
            r#"{"srw_version": 1, "name": "x", "nodes": [
                {"id": "a", "title": "A", "parents": ["b"], "cpt": {"kind": "linear_additive", "p_none": 0.1, "p_all": 0.9}},
                {"id": "b", "title": "B", "parents": ["a"], "cpt": {"kind": "linear_additive", "p_none": 0.1, "p_all": 0.9}}]}"#,
            |e| matches!(e, FragmentError::CycleInFragment(_)),
        ),
        (
            r#"{"srw_version": 1, "name": "x", "nodes": [
                {"id": "a", "title": "A", "cpt": {"kind": "prior", "p_implied": 0.5}},
                {"id": "a", "title": "A", "cpt": {"kind": "prior", "p_implied": 0.5}}]}"#,
            |e| matches!(e, FragmentError::DuplicateNode(_)),
        ),
    ];
    for (text, expected) in cases {
        let err = parse_fragment(text.as_bytes()).unwrap_err();
        assert!(expected(&err), "{text}: {err}");
    }
}

#[test]
fn corpus_glues_to_seventeen_nodes() {
    let names = [
        "time_management",
        "communications",
        "crash_recovery",
        "display",
        "save",
    ];
    let fragments: Vec<Fragment> = names
        .iter()
        .map(|n| corpus_fragment(&format!("glue/{n}.json")))
        .collect();
    let (web, report) = glue_all(&fragments, GluePolicy::default()).unwrap();
    assert_eq!(web.nodes.len(), 17);
    assert_eq!(
        web.name,
        "communications+crash_recovery+display+save+time_management"
    );
    let checkpointing = web.node("checkpointing").unwrap();
    assert_eq!(
        checkpointing.cpt,
        CptSpec::LinearAdditive {
            p_none: 0.1,
            p_all: 0.9
        }
    );
    assert_eq!(checkpointing.parents.len(), 3);
    let restart = web.node("restart_from_checkpoint").unwrap();
    let weights: BTreeMap<_, _> = [
        (node("checkpointing"), 0.8),
        (node("scenario_archive"), 0.3),
    ]
    .into();
    assert_eq!(
        restart.cpt,
        CptSpec::NoisyOr {
            leak: 0.05,
            weights
        }
    );
    assert!(report.unified.contains(&node("time_mgmt")));
    assert!(compile(&web).is_ok());
}

fn prior_fragment(name: &str, p: f64) -> Fragment {
    Fragment::new(
        name,
        vec![RequirementNode {
            id: node("shared"),
            title: "Shared".into(),
            description: String::new(),
            parents: vec![],
            cpt: CptSpec::Prior { p_implied: p },
        }],
    )
}

#[test]
fn prior_merge_policies() {
    let (a, b) = (prior_fragment("a", 0.2), prior_fragment("b", 0.4));
    let err = glue_pair(&a, &b, GluePolicy::default()).unwrap_err();
    assert!(matches!(err, GlueError::PriorConflict { .. }));
    let (glued, _) = glue_pair(
        &a,
        &b,
        GluePolicy {
            prior_merge: PriorMerge::Mean,
        },
    )
    .unwrap();
    assert_eq!(
        glued.nodes[0].cpt,
        CptSpec::Prior {
            p_implied: 0.30000000000000004
        }
    );
}

#[test]
fn tables_are_not_extended_to_new_parents() {
    let example = corpus_fragment("worked_example.json");
    let extra = Fragment::new(
        "extra",
        vec![
            RequirementNode {
                id: node("hla"),
                title: "HLA".into(),
                description: String::new(),
                parents: vec![],
                cpt: CptSpec::Prior { p_implied: 0.1 },
            },
            RequirementNode {
                id: node("time_mgmt"),
                title: "Time management".into(),
                description: String::new(),
                parents: vec![node("hla")],
                cpt: CptSpec::LinearAdditive {
                    p_none: 0.1,
                    p_all: 0.9,
                },
            },
        ],
    );
    let err = glue_pair(&example, &extra, GluePolicy::default()).unwrap_err();
    assert!(matches!(err, GlueError::TableNotGluable { .. }));
    assert!(err.to_string().contains("convert it"));
}
