use std::collections::BTreeMap;

use thiserror::Error;

use crate::bayes::{CptTable, NodeId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CptError {
    #[error("linear-additive table needs at least one parent")]
    NoParents,
    #[error("noisy-or weights must be keyed exactly by the parents (missing: {missing:?}, extra: {extra:?})")]
    WeightParentMismatch {
        missing: Vec<NodeId>,
        extra: Vec<NodeId>,
    },
}

/// Row for `k` of `n` implied parents is `p_none + (k / n) * (p_all - p_none)`.
pub fn linear_additive_cpt(
    p_none: f64,
    p_all: f64,
    parents: &[NodeId],
) -> Result<CptTable, CptError> {
    if parents.is_empty() {
        return Err(CptError::NoParents);
    }
    let n = parents.len() as f64;
    Ok(CptTable::from_fn(parents.len(), |config| {
        let k = config.iter().filter(|&&b| b).count() as f64;
        p_none + k / n * (p_all - p_none)
    }))
}

/// Row is `1 - (1 - leak) * prod(1 - w_i)` over the implied parents.
pub fn noisy_or_cpt(
    leak: f64,
    weights: &BTreeMap<NodeId, f64>,
    parents: &[NodeId],
) -> Result<CptTable, CptError> {
    let missing: Vec<NodeId> = parents
        .iter()
        .filter(|p| !weights.contains_key(*p))
        .cloned()
        .collect();
    let extra: Vec<NodeId> = weights
        .keys()
        .filter(|w| !parents.contains(w))
        .cloned()
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(CptError::WeightParentMismatch { missing, extra });
    }
    let w: Vec<f64> = parents.iter().map(|p| weights[p]).collect();
    Ok(CptTable::from_fn(parents.len(), |config| {
        let inhibited = config
            .iter()
            .zip(&w)
            .filter(|(on, _)| **on)
            .fold(1.0 - leak, |acc, (_, w)| acc * (1.0 - w));
        1.0 - inhibited
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::node;
    use proptest::prelude::*;

    fn ids(n: usize) -> Vec<NodeId> {
        (0..n).map(|i| node(&format!("p{i}"))).collect()
    }

    #[test]
    fn linear_additive_two_parents() {
        let t = linear_additive_cpt(0.2, 0.8, &ids(2)).unwrap();
        // rows: 00, 01, 10, 11
        let expect = [0.2, 0.5, 0.5, 0.8];
        for (got, want) in t.rows().iter().zip(expect) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_additive_degenerate_and_quarters() {
        let t = linear_additive_cpt(0.3, 0.3, &ids(3)).unwrap();
        assert!(t.rows().iter().all(|&r| (r - 0.3).abs() < 1e-15));
        let t = linear_additive_cpt(0.0, 1.0, &ids(4)).unwrap();
        assert_eq!(t.p_implied(&[true, true, false, true]), 0.75);
        assert_eq!(linear_additive_cpt(0.2, 0.8, &[]), Err(CptError::NoParents));
    }

    #[test]
    fn noisy_or_examples() {
        let parents = ids(1);
        let w = BTreeMap::from([(parents[0].clone(), 0.9)]);
        let t = noisy_or_cpt(0.0, &w, &parents).unwrap();
        assert_eq!(t.rows(), &[0.0, 0.9]);

        let parents = ids(2);
        let w: BTreeMap<_, _> = parents.iter().map(|p| (p.clone(), 0.5)).collect();
        let t = noisy_or_cpt(0.0, &w, &parents).unwrap();
        assert_eq!(t.rows(), &[0.0, 0.5, 0.5, 0.75]);

        let t = noisy_or_cpt(0.1, &w, &parents).unwrap();
        assert!((t.rows()[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn noisy_or_weight_mismatch() {
        let parents = ids(2);
        let w = BTreeMap::from([(parents[0].clone(), 0.5), (node("other"), 0.5)]);
        assert_eq!(
            noisy_or_cpt(0.0, &w, &parents),
            Err(CptError::WeightParentMismatch {
                missing: vec![parents[1].clone()],
                extra: vec![node("other")]
            })
        );
    }

    proptest! {
        #[test]
        fn linear_additive_is_monotone_in_implied_count(
            a in 0.0f64..=1.0, b in 0.0f64..=1.0, n in 1usize..6,
        ) {
            let (p_none, p_all) = if a <= b { (a, b) } else { (b, a) };
            let t = linear_additive_cpt(p_none, p_all, &ids(n)).unwrap();
            let mut by_k = vec![f64::NAN; n + 1];
            for (row, &p) in t.rows().iter().enumerate() {
                by_k[row.count_ones() as usize] = p;
            }
            for k in 0..n {
                prop_assert!(by_k[k] <= by_k[k + 1] + 1e-15);
            }
        }

        #[test]
        fn noisy_or_never_decreases_when_a_parent_turns_on(
            leak in 0.0f64..=1.0, weights in proptest::collection::vec(0.0f64..=1.0, 1..6),
        ) {
            let parents = ids(weights.len());
            let w: BTreeMap<_, _> = parents.iter().cloned().zip(weights.iter().copied()).collect();
            let t = noisy_or_cpt(leak, &w, &parents).unwrap();
            let n = parents.len();
            for row in 0..t.len() {
                for bit in 0..n {
                    if row >> bit & 1 == 0 {
                        prop_assert!(t.rows()[row | 1 << bit] >= t.rows()[row] - 1e-15);
                    }
                }
            }
        }
    }
}
