//! Seeded synthetic requirement webs for load testing.
//!
//! Nodes `n000, n001, ...` form a DAG in which every non-root node draws up to
//! `max_fan_in` parents from the `window` nodes just before it, which keeps
//! the treewidth small. The web is split into fragments that overlap on
//! shared parents and glued back together, so the result exercises the same
//! path as a hand-written corpus.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bayes::{node, NodeId};
use crate::fragment::{CptSpec, Fragment, RequirementNode};
use crate::glue::{glue_all, GlueError, GluePolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthParams {
    pub nodes: usize,
    pub max_fan_in: usize,
    pub window: usize,
    pub fragments: usize,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            nodes: 250,
            max_fan_in: 4,
            window: 8,
            fragments: 5,
            seed: 7,
        }
    }
}

fn id(i: usize) -> NodeId {
    node(&format!("n{i:03}"))
}

/// The full web as one list of nodes, before splitting.
fn generate(p: SynthParams) -> Vec<RequirementNode> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut out = Vec::with_capacity(p.nodes);
    for i in 0..p.nodes {
        let is_root = i < 2 || rng.gen_bool(0.1);
        let (parents, cpt) = if is_root {
            (
                vec![],
                CptSpec::Prior {
                    p_implied: rng.gen_range(0.05..0.5),
                },
            )
        } else {
            let lo = i.saturating_sub(p.window);
            let k = rng.gen_range(1..=p.max_fan_in.min(i - lo));
            let mut parents: Vec<NodeId> = sample(&mut rng, i - lo, k)
                .into_iter()
                .map(|j| id(lo + j))
                .collect();
            parents.sort();
            let cpt = if rng.gen_bool(0.5) {
                CptSpec::LinearAdditive {
                    p_none: rng.gen_range(0.01..0.3),
                    p_all: rng.gen_range(0.5..0.95),
                }
            } else {
                CptSpec::NoisyOr {
                    leak: rng.gen_range(0.01..0.1),
                    weights: parents
                        .iter()
                        .map(|q| (q.clone(), rng.gen_range(0.3..0.9)))
                        .collect(),
                }
            };
            (parents, cpt)
        };
        out.push(RequirementNode {
            id: id(i),
            title: format!("Synthetic requirement {i}"),
            description: String::new(),
            parents,
            cpt,
        });
    }
    out
}

/// Split the web into contiguous fragments. A parent owned by another
/// fragment is copied in as a prior placeholder (its real prior when it is a
/// root), and gluing restores its full specification.
pub fn synthetic_fragments(p: SynthParams) -> Vec<Fragment> {
    let all = generate(p);
    let parts = p.fragments.clamp(1, p.nodes.max(1));
    let chunk = p.nodes.div_ceil(parts);
    all.chunks(chunk)
        .enumerate()
        .map(|(f, owned)| {
            let mut nodes: Vec<RequirementNode> = owned.to_vec();
            let first = f * chunk;
            let mut foreign: Vec<usize> = owned
                .iter()
                .flat_map(|n| n.parents.iter())
                .map(|q| q.as_str()[1..].parse::<usize>().expect("synthetic id"))
                .filter(|&j| j < first)
                .collect();
            foreign.sort_unstable();
            foreign.dedup();
            for j in foreign {
                let source = &all[j];
                let p_implied = match source.cpt {
                    CptSpec::Prior { p_implied } => p_implied,
                    _ => 0.5,
                };
                nodes.push(RequirementNode {
                    id: source.id.clone(),
                    title: source.title.clone(),
                    description: String::new(),
                    parents: vec![],
                    cpt: CptSpec::Prior { p_implied },
                });
            }
            Fragment::new(format!("synthetic_{f}"), nodes)
        })
        .collect()
}

/// Generate, split and glue.
pub fn synthetic_web(p: SynthParams) -> Result<Fragment, GlueError> {
    Ok(glue_all(&synthetic_fragments(p), GluePolicy::default())?.0)
}
