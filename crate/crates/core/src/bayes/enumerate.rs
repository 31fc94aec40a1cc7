//! Brute-force posterior computation over the full joint distribution.
//!
//! Deliberately shares nothing with the elimination code beyond the network
//! accessors; it is the reference the elimination results are checked against.

use std::collections::BTreeMap;

use super::{validate_network, BayesError, BeliefMap, EvidenceSet, Likelihood, Network};

/// Largest network [`enumerate_marginals`] accepts.
pub const ENUMERATION_LIMIT: usize = 24;

pub fn enumerate_marginals(net: &Network, ev: &EvidenceSet) -> Result<BeliefMap, BayesError> {
    let n = net.len();
    if n > ENUMERATION_LIMIT {
        return Err(BayesError::TooLarge {
            nodes: n,
            limit: ENUMERATION_LIMIT,
        });
    }
    let report = validate_network(net);
    if !report.is_ok() {
        return Err(BayesError::InvalidNetwork(report));
    }
    ev.check_against(net)?;

    let ids = net.nodes();
    let position: BTreeMap<&str, usize> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let parent_pos: Vec<Vec<usize>> = ids
        .iter()
        .map(|id| {
            net.parents(id.as_str())
                .iter()
                .map(|p| position[p.as_str()])
                .collect()
        })
        .collect();
    let tables: Vec<&[f64]> = ids
        .iter()
        .map(|id| net.cpt(id.as_str()).unwrap().rows())
        .collect();
    let likelihoods: Vec<Option<Likelihood>> = ids
        .iter()
        .map(|id| ev.finding(id.as_str()).map(|f| f.likelihood()))
        .collect();

    let mut total = 0.0;
    let mut implied_mass = vec![0.0; n];
    let mut states = vec![false; n];
    for joint in 0u64..1 << n {
        for (i, s) in states.iter_mut().enumerate() {
            *s = joint >> i & 1 == 1;
        }
        let mut weight = 1.0;
        for v in 0..n {
            let row = parent_pos[v]
                .iter()
                .fold(0usize, |acc, &p| acc << 1 | usize::from(states[p]));
            let p = tables[v][row];
            weight *= if states[v] { p } else { 1.0 - p };
            if let Some(lk) = likelihoods[v] {
                weight *= if states[v] { lk.l_implied } else { lk.l_not };
            }
            if weight == 0.0 {
                break;
            }
        }
        if weight == 0.0 {
            continue;
        }
        total += weight;
        for v in 0..n {
            if states[v] {
                implied_mass[v] += weight;
            }
        }
    }

    if total.is_nan() || total <= 0.0 {
        return Err(BayesError::EvidenceContradiction);
    }
    let beliefs = ids
        .iter()
        .enumerate()
        .map(|(v, id)| {
            let p = match ev.hard().get(id) {
                Some(state) if state.is_implied() => 1.0,
                Some(_) => 0.0,
                None => implied_mass[v] / total,
            };
            (id.clone(), p)
        })
        .collect();
    Ok(BeliefMap::from_map(beliefs))
}
