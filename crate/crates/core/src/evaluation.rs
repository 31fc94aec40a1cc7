//! Scoring an implied-requirement set against expert assessments.
//!
//! Accuracy splits the implied set into correct, partially correct and
//! incorrect items; coverage is the share of the should-imply set that was
//! actually implied. Fractions are exact rationals and are only rounded for
//! display.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bayes::NodeId;
use crate::fragment::ImpliedSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("implied node `{0}` has no label in the gold standard")]
    MissingLabel(NodeId),
    #[error("schema violation at `{path}`: {message}")]
    SchemaViolation { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Correct,
    Partial,
    #[serde(alias = "miscategorized")]
    Incorrect,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldStandard {
    pub should_imply: BTreeSet<NodeId>,
    /// Labels for assessed items; false positives are labeled too.
    pub labels: BTreeMap<NodeId, Label>,
}

fn schema_error<E: std::fmt::Display>(e: serde_path_to_error::Error<E>) -> EvalError {
    EvalError::SchemaViolation {
        path: e.path().to_string(),
        message: e.into_inner().to_string(),
    }
}

pub fn parse_gold(bytes: &[u8]) -> Result<GoldStandard, EvalError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(schema_error)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ImpliedFile {
    Ids(Vec<NodeId>),
    Classified(ImpliedSet),
}

/// Read an implied set: either a JSON array of node ids or the output of
/// `classify`/`session` (an object with an `implied` list).
pub fn parse_implied(bytes: &[u8]) -> Result<BTreeSet<NodeId>, EvalError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let file: ImpliedFile = serde_path_to_error::deserialize(de).map_err(schema_error)?;
    Ok(match file {
        ImpliedFile::Ids(ids) => ids.into_iter().collect(),
        ImpliedFile::Classified(set) => set.ids(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub n_implied: u64,
    pub n_correct: u64,
    pub n_partial: u64,
    pub n_incorrect: u64,
    pub n_should_imply: u64,
    /// Implied items that are in the should-imply set.
    pub n_covered: u64,
}

fn fraction(num: u64, den: u64) -> Option<Ratio<u64>> {
    (den > 0).then(|| Ratio::new(num, den))
}

impl Metrics {
    /// Absent when nothing was implied.
    pub fn pct_correct(&self) -> Option<Ratio<u64>> {
        fraction(self.n_correct, self.n_implied)
    }

    pub fn pct_partial(&self) -> Option<Ratio<u64>> {
        fraction(self.n_partial, self.n_implied)
    }

    pub fn pct_incorrect(&self) -> Option<Ratio<u64>> {
        fraction(self.n_incorrect, self.n_implied)
    }

    /// Absent when the gold standard has nothing that should be implied.
    pub fn coverage(&self) -> Option<Ratio<u64>> {
        fraction(self.n_covered, self.n_should_imply)
    }

    pub fn report(&self) -> MetricsReport {
        let exact = |r: Option<Ratio<u64>>| r.map(|r| format!("{}/{}", r.numer(), r.denom()));
        MetricsReport {
            n_implied: self.n_implied,
            counts: LabelCounts {
                correct: self.n_correct,
                partial: self.n_partial,
                incorrect: self.n_incorrect,
            },
            pct_correct: self.pct_correct().map(to_f64),
            pct_partial: self.pct_partial().map(to_f64),
            pct_incorrect: self.pct_incorrect().map(to_f64),
            coverage: self.coverage().map(to_f64),
            covered: self.n_covered,
            should_imply: self.n_should_imply,
            exact: ExactFractions {
                pct_correct: exact(self.pct_correct()),
                pct_partial: exact(self.pct_partial()),
                pct_incorrect: exact(self.pct_incorrect()),
                coverage: exact(self.coverage()),
            },
        }
    }

    /// Aligned text table with percentages to two decimals.
    pub fn to_table(&self) -> String {
        let pct = |r: Option<Ratio<u64>>| match r {
            Some(r) => format!("{:.2}%", to_f64(r) * 100.0),
            None => "n/a".to_string(),
        };
        let rows = [
            (
                "correct",
                pct(self.pct_correct()),
                format!("{}/{}", self.n_correct, self.n_implied),
            ),
            (
                "partial",
                pct(self.pct_partial()),
                format!("{}/{}", self.n_partial, self.n_implied),
            ),
            (
                "incorrect",
                pct(self.pct_incorrect()),
                format!("{}/{}", self.n_incorrect, self.n_implied),
            ),
            (
                "coverage",
                pct(self.coverage()),
                format!("{}/{}", self.n_covered, self.n_should_imply),
            ),
        ];
        let mut out = String::new();
        let _ = writeln!(out, "{:<10} {:>8} {:>9}", "metric", "value", "count");
        for (name, value, count) in rows {
            let _ = writeln!(out, "{name:<10} {value:>8} {count:>9}");
        }
        out
    }
}

fn to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// JSON shape of a score report. Fractions are `null` when undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_implied: u64,
    pub counts: LabelCounts,
    pub pct_correct: Option<f64>,
    pub pct_partial: Option<f64>,
    pub pct_incorrect: Option<f64>,
    pub coverage: Option<f64>,
    pub covered: u64,
    pub should_imply: u64,
    pub exact: ExactFractions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub correct: u64,
    pub partial: u64,
    pub incorrect: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactFractions {
    pub pct_correct: Option<String>,
    pub pct_partial: Option<String>,
    pub pct_incorrect: Option<String>,
    pub coverage: Option<String>,
}

pub fn score<'a>(
    implied: impl IntoIterator<Item = &'a NodeId>,
    gold: &GoldStandard,
) -> Result<Metrics, EvalError> {
    let implied: BTreeSet<&NodeId> = implied.into_iter().collect();
    let mut m = Metrics {
        n_implied: implied.len() as u64,
        n_correct: 0,
        n_partial: 0,
        n_incorrect: 0,
        n_should_imply: gold.should_imply.len() as u64,
        n_covered: 0,
    };
    for id in &implied {
        match gold.labels.get(*id) {
            Some(Label::Correct) => m.n_correct += 1,
            Some(Label::Partial) => m.n_partial += 1,
            Some(Label::Incorrect) => m.n_incorrect += 1,
            None => return Err(EvalError::MissingLabel((*id).clone())),
        }
        if gold.should_imply.contains(*id) {
            m.n_covered += 1;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::node;

    fn ids(prefix: &str, n: usize) -> Vec<NodeId> {
        (0..n).map(|i| node(&format!("{prefix}{i:03}"))).collect()
    }

    #[test]
    fn counts_and_exact_fractions() {
        let implied = ids("r", 4);
        let gold = GoldStandard {
            should_imply: [node("r000"), node("r001"), node("r002"), node("x")].into(),
            labels: implied
                .iter()
                .zip([
                    Label::Correct,
                    Label::Correct,
                    Label::Partial,
                    Label::Incorrect,
                ])
                .map(|(id, l)| (id.clone(), l))
                .collect(),
        };
        let m = score(&implied, &gold).unwrap();
        assert_eq!(m.pct_correct(), Some(Ratio::new(1, 2)));
        assert_eq!(m.pct_partial(), Some(Ratio::new(1, 4)));
        assert_eq!(m.coverage(), Some(Ratio::new(3, 4)));
        assert_eq!(
            m.pct_correct().unwrap() + m.pct_partial().unwrap() + m.pct_incorrect().unwrap(),
            Ratio::from(1)
        );
    }

    #[test]
    fn empty_implied_and_empty_gold() {
        let gold = GoldStandard {
            should_imply: [node("a")].into(),
            labels: BTreeMap::new(),
        };
        let m = score(&[], &gold).unwrap();
        assert_eq!(m.pct_correct(), None);
        assert_eq!(m.coverage(), Some(Ratio::from(0)));
        let m = score(&[], &GoldStandard::default()).unwrap();
        assert_eq!(m.coverage(), None);
        assert!(m.to_table().contains("n/a"));
    }

    #[test]
    fn missing_label_is_an_error() {
        let gold = GoldStandard::default();
        assert_eq!(
            score(&[node("a")], &gold),
            Err(EvalError::MissingLabel(node("a")))
        );
    }

    #[test]
    fn miscategorized_means_incorrect() {
        let gold = parse_gold(
            br#"{"should_imply": ["a"], "labels": {"a": "miscategorized", "b": "partial"}}"#,
        )
        .unwrap();
        assert_eq!(gold.labels[&node("a")], Label::Incorrect);
        assert!(parse_gold(br#"{"should_imply": [], "labels": {"a": "wrong"}}"#).is_err());
    }

    #[test]
    fn implied_file_forms() {
        let plain = parse_implied(br#"["b", "a"]"#).unwrap();
        assert_eq!(plain, [node("a"), node("b")].into());
        let classified = br#"{"threshold": 0.75, "band": 0.05,
            "implied": [{"node": "a", "belief": 0.9}], "borderline": []}"#;
        assert_eq!(parse_implied(classified).unwrap(), [node("a")].into());
    }

    proptest::proptest! {
        #[test]
        fn adding_a_covered_correct_item_never_lowers_coverage(n in 1usize..30, extra in 0usize..30) {
            let all = ids("n", n + extra + 1);
            let gold = GoldStandard {
                should_imply: all.iter().cloned().collect(),
                labels: all.iter().map(|id| (id.clone(), Label::Correct)).collect(),
            };
            let before = score(&all[..n], &gold).unwrap();
            let after = score(&all[..=n], &gold).unwrap();
            proptest::prop_assert!(after.coverage() >= before.coverage());
            let mut reversed = all[..n].to_vec();
            reversed.reverse();
            proptest::prop_assert_eq!(score(&reversed, &gold).unwrap(), before);
        }
    }
}
