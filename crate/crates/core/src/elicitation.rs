//! Keyword-level translation of free-text user requirements into messages.
//!
//! Rules are ordered wildcard patterns matched against the whitespace
//! tokenized, lower-cased input. `*` matches zero or more tokens. Every
//! matching rule fires, in rulebook order, and its body template may refer to
//! the text captured by the n-th wildcard as `{n}`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ElicitationError {
    #[error("schema violation at `{path}`: {message}")]
    SchemaViolation { path: String, message: String },
    #[error("rule `{0}` has no literal token")]
    EmptyPattern(String),
}

/// A message on the session bus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub topic: String,
    pub body: String,
    pub source: String,
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitTemplate {
    pub topic: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Wildcard,
    Word(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternRule {
    pub id: String,
    pub pattern: String,
    pub emit: EmitTemplate,
    tokens: Vec<Token>,
}

impl PatternRule {
    pub fn new(
        id: impl Into<String>,
        pattern: &str,
        emit: EmitTemplate,
    ) -> Result<Self, ElicitationError> {
        let id = id.into();
        let tokens: Vec<Token> = pattern
            .split_whitespace()
            .filter_map(|raw| {
                if raw == "*" {
                    Some(Token::Wildcard)
                } else {
                    normalize(raw).map(Token::Word)
                }
            })
            .collect();
        if !tokens.iter().any(|t| matches!(t, Token::Word(_))) {
            return Err(ElicitationError::EmptyPattern(id));
        }
        Ok(PatternRule {
            id,
            pattern: pattern.to_string(),
            emit,
            tokens,
        })
    }

    /// Captured text of each wildcard on a match.
    pub fn matches(&self, text: &str) -> Option<Vec<String>> {
        let words = tokenize(text);
        let mut spans = Vec::new();
        match_from(&self.tokens, &words, &mut spans).then(|| {
            spans
                .iter()
                .map(|&(from, to)| words[from..to].join(" "))
                .collect()
        })
    }

    fn render(&self, captures: &[String]) -> String {
        let mut body = self.emit.body.clone();
        for (i, cap) in captures.iter().enumerate().rev() {
            body = body.replace(&format!("{{{}}}", i + 1), cap);
        }
        body
    }
}

fn normalize(raw: &str) -> Option<String> {
    let trimmed = raw.trim_matches(|c: char| !(c.is_alphanumeric() || c == '_'));
    (!trimmed.is_empty()).then(|| trimmed.to_lowercase())
}

/// Whitespace split, punctuation stripped at token edges, lower-cased.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().filter_map(normalize).collect()
}

/// Backtracking match; wildcards prefer the shortest span.
fn match_from(pattern: &[Token], words: &[String], spans: &mut Vec<(usize, usize)>) -> bool {
    fn go(pattern: &[Token], words: &[String], at: usize, spans: &mut Vec<(usize, usize)>) -> bool {
        match pattern.split_first() {
            None => at == words.len(),
            Some((Token::Word(w), rest)) => {
                words.get(at) == Some(w) && go(rest, words, at + 1, spans)
            }
            Some((Token::Wildcard, rest)) => {
                for end in at..=words.len() {
                    spans.push((at, end));
                    if go(rest, words, end, spans) {
                        return true;
                    }
                    spans.pop();
                }
                false
            }
        }
    }
    go(pattern, words, 0, spans)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RulebookFile {
    patterns: Vec<RuleEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleEntry {
    id: String,
    pattern: String,
    emit: EmitTemplate,
}

/// Parse `{"patterns": [{"id", "pattern", "emit": {"topic", "body"}}]}`.
/// File order is match priority order.
pub fn parse_rulebook(bytes: &[u8]) -> Result<Vec<PatternRule>, ElicitationError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let file: RulebookFile =
        serde_path_to_error::deserialize(de).map_err(|e| ElicitationError::SchemaViolation {
            path: e.path().to_string(),
            message: e.into_inner().to_string(),
        })?;
    let mut ids = BTreeSet::new();
    file.patterns
        .into_iter()
        .enumerate()
        .map(|(i, entry)| {
            if !ids.insert(entry.id.clone()) {
                return Err(ElicitationError::SchemaViolation {
                    path: format!("patterns[{i}].id"),
                    message: format!("duplicate rule id `{}`", entry.id),
                });
            }
            PatternRule::new(entry.id, &entry.pattern, entry.emit)
        })
        .collect()
}

/// Message produced by one rule, before the session stamps source and seq.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Translated {
    pub rule: String,
    pub topic: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Translation {
    pub messages: Vec<Translated>,
    /// Set when no rule matched.
    pub untranslated: Option<String>,
}

pub fn translate(text: &str, rules: &[PatternRule]) -> Translation {
    let messages: Vec<Translated> = rules
        .iter()
        .filter_map(|rule| {
            rule.matches(text).map(|caps| Translated {
                rule: rule.id.clone(),
                topic: rule.emit.topic.clone(),
                body: rule.render(&caps),
            })
        })
        .collect();
    let untranslated = messages
        .is_empty()
        .then(|| format!("no pattern matched: {}", text.trim()));
    Translation {
        messages,
        untranslated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rule(id: &str, pattern: &str, body: &str) -> PatternRule {
        PatternRule::new(
            id,
            pattern,
            EmitTemplate {
                topic: "user_req".into(),
                body: body.into(),
            },
        )
        .unwrap()
    }

    #[test]
    fn distributed_simulation_rule() {
        let rules = [rule("ds", "* distributed simulation *", "distributed_sim")];
        let t = translate("The system shall support Distributed Simulation.", &rules);
        assert_eq!(t.messages.len(), 1);
        assert_eq!(t.messages[0].topic, "user_req");
        assert_eq!(t.messages[0].body, "distributed_sim");
        assert!(t.untranslated.is_none());
    }

    #[test]
    fn no_match_gives_a_diagnostic() {
        let rules = [rule("ds", "* distributed simulation *", "distributed_sim")];
        let t = translate("the system shall be pleasant", &rules);
        assert!(t.messages.is_empty());
        assert!(t.untranslated.is_some());
    }

    #[test]
    fn every_matching_rule_fires_in_order() {
        let rules = [
            rule("a", "* parallel discrete event simulation *", "pdes"),
            rule("x", "* database *", "db"),
            rule("b", "* pdes *", "pdes"),
        ];
        let t = translate("Support parallel discrete event simulation (PDES)", &rules);
        let fired: Vec<&str> = t.messages.iter().map(|m| m.rule.as_str()).collect();
        assert_eq!(fired, ["a", "b"]);
    }

    #[test]
    fn captures_fill_the_template() {
        let r = rule("save", "* save the * every *", "save:{2}:{3}");
        let t = translate(
            "Operators must save the scenario state every ten minutes",
            &[r],
        );
        assert_eq!(t.messages[0].body, "save:scenario state:ten minutes");
    }

    #[test]
    fn wildcard_only_patterns_are_rejected() {
        let err = PatternRule::new(
            "w",
            "* *",
            EmitTemplate {
                topic: "t".into(),
                body: "b".into(),
            },
        );
        assert_eq!(err, Err(ElicitationError::EmptyPattern("w".into())));
    }

    #[test]
    fn literal_patterns_must_cover_the_whole_input() {
        let r = rule("exact", "distributed simulation", "ds");
        assert!(r.matches("distributed simulation!").is_some());
        assert!(r.matches("a distributed simulation").is_none());
    }

    #[test]
    fn rulebook_parsing() {
        let ok = br#"{"patterns": [
            {"id": "a", "pattern": "* x *", "emit": {"topic": "t", "body": "x"}},
            {"id": "b", "pattern": "* y *", "emit": {"topic": "t", "body": "y"}}]}"#;
        let rules = parse_rulebook(ok).unwrap();
        assert_eq!(
            rules.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(),
            ["a", "b"]
        );

        let star =
            br#"{"patterns": [{"id": "a", "pattern": "*", "emit": {"topic": "t", "body": "x"}}]}"#;
        assert_eq!(
            parse_rulebook(star),
            Err(ElicitationError::EmptyPattern("a".into()))
        );

        let dup = br#"{"patterns": [
            {"id": "a", "pattern": "* x *", "emit": {"topic": "t", "body": "x"}},
            {"id": "a", "pattern": "* y *", "emit": {"topic": "t", "body": "y"}}]}"#;
        assert!(matches!(
            parse_rulebook(dup),
            Err(ElicitationError::SchemaViolation { .. })
        ));
    }

    proptest::proptest! {
        #[test]
        fn case_and_spacing_do_not_matter(words in proptest::collection::vec("[a-z]{1,6}", 1..6)) {
            let rules = [rule("r", &format!("* {} *", words.join(" ")), "hit")];
            let shouty = words.iter().map(|w| w.to_uppercase()).collect::<Vec<_>>().join("   ");
            let t = translate(&format!("  pre {shouty}, post "), &rules);
            proptest::prop_assert_eq!(t.messages.len(), 1);
            proptest::prop_assert!(t.messages.len() <= rules.len());
        }
    }
}
