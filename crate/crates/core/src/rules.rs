//! Token-pattern rule baseline for span extraction.
//!
//! Rule files are line based. Blank lines and lines starting with `#` are ignored.
//!
//! ```text
//! @verbs = pass insert remove
//! @verbs * wire
//! okay < @verbs the * >
//! ```
//!
//! `@name = words...` defines a word list. Every other line is a pattern of
//! whitespace-separated items: a literal word, `@name` for any word of a list, or `*`
//! for any single token. Matching is case-insensitive. `<` and `>` mark the captured
//! part of a pattern; without them the whole match is captured.
//!
//! Patterns are applied leftmost-longest: scanning left to right, the longest match
//! starting at the current token wins (earlier patterns win ties) and scanning resumes
//! after it, so firings never overlap.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iobes::{iobes_tags, Tag};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TokenPredicate {
    Literal(String),
    WordList { name: String, words: BTreeSet<String> },
    Wildcard,
}

impl TokenPredicate {
    fn accepts(&self, token: &str) -> bool {
        match self {
            TokenPredicate::Literal(w) => *w == token.to_lowercase(),
            TokenPredicate::WordList { words, .. } => words.contains(&token.to_lowercase()),
            TokenPredicate::Wildcard => true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RulePattern {
    pub items: Vec<TokenPredicate>,
    /// Half-open range of `items` that becomes the span.
    pub capture: (usize, usize),
}

impl RulePattern {
    pub fn new(items: Vec<TokenPredicate>, capture: (usize, usize)) -> Result<Self> {
        if items.is_empty() || capture.0 >= capture.1 || capture.1 > items.len() {
            return Err(Error::Argument(format!(
                "capture {capture:?} is not a non-empty range within {} items",
                items.len()
            )));
        }
        Ok(RulePattern { items, capture })
    }

    fn matches_at(&self, tokens: &[String], start: usize) -> bool {
        start + self.items.len() <= tokens.len()
            && self.items.iter().zip(&tokens[start..]).all(|(p, t)| p.accepts(t))
    }
}

pub fn parse_rules(src: &str) -> Result<Vec<RulePattern>> {
    let mut lists: HashMap<String, BTreeSet<String>> = HashMap::new();
    let mut patterns = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some((lhs, rhs)) = line.split_once('=') {
            let name = lhs.trim();
            if let Some(name) = name.strip_prefix('@').filter(|n| !n.is_empty() && !n.contains(char::is_whitespace)) {
                let words: BTreeSet<String> = rhs.split_whitespace().map(str::to_lowercase).collect();
                if words.is_empty() {
                    return Err(Error::parse(line_no, format!("word list @{name} is empty")));
                }
                lists.insert(name.to_string(), words);
                continue;
            }
        }
        let mut items = Vec::new();
        let (mut open, mut close) = (None, None);
        for tok in line.split_whitespace() {
            match tok {
                "<" if open.is_none() => open = Some(items.len()),
                ">" if open.is_some() && close.is_none() => close = Some(items.len()),
                "<" | ">" => return Err(Error::parse(line_no, "misplaced capture marker")),
                "*" => items.push(TokenPredicate::Wildcard),
                _ => match tok.strip_prefix('@') {
                    Some(name) => {
                        let words = lists
                            .get(name)
                            .ok_or_else(|| Error::parse(line_no, format!("undefined word list @{name}")))?;
                        items.push(TokenPredicate::WordList {
                            name: name.to_string(),
                            words: words.clone(),
                        });
                    }
                    None => items.push(TokenPredicate::Literal(tok.to_lowercase())),
                },
            }
        }
        let capture = match (open, close) {
            (None, None) => (0, items.len()),
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::parse(line_no, "unbalanced capture markers")),
        };
        patterns.push(RulePattern::new(items, capture).map_err(|e| Error::parse(line_no, e.to_string()))?);
    }
    Ok(patterns)
}

/// Captured spans as half-open token ranges.
pub fn rule_spans(patterns: &[RulePattern], tokens: &[String]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let best = patterns
            .iter()
            .filter(|p| p.matches_at(tokens, i))
            .fold(None::<&RulePattern>, |b, p| match b {
                Some(b) if b.items.len() >= p.items.len() => Some(b),
                _ => Some(p),
            });
        match best {
            Some(p) => {
                out.push((i + p.capture.0, i + p.capture.1));
                i += p.items.len();
            }
            None => i += 1,
        }
    }
    out
}

pub fn rule_baseline(patterns: &[RulePattern], tokens: &[String]) -> Vec<Tag> {
    iobes_tags(tokens.len(), &rule_spans(patterns, tokens)).expect("rule captures lie within the sentence")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    #[test]
    fn verb_wildcard_wire() {
        let rules = parse_rules("@verbs = pass insert\n@verbs * wire").unwrap();
        let toks = tokenize("you pass the wire");
        assert_eq!(rule_spans(&rules, &toks), vec![(1, 4)]);
        assert_eq!(rule_baseline(&rules, &toks), vec![Tag::O, Tag::B, Tag::I, Tag::E]);
        assert_eq!(rule_baseline(&rules, &tokenize("nothing here")), vec![Tag::O, Tag::O]);
    }

    #[test]
    fn leftmost_longest() {
        let rules = parse_rules("a b\na b c\nb c d").unwrap();
        let toks = tokenize("a b c d");
        assert_eq!(rule_spans(&rules, &toks), vec![(0, 3)]);
        let rules = parse_rules("b c d\na b").unwrap();
        assert_eq!(rule_spans(&rules, &toks), vec![(0, 2)]);
    }

    #[test]
    fn capture_markers_and_case() {
        let rules = parse_rules("# comment\nokay < Pass * >").unwrap();
        assert_eq!(rules[0].capture, (1, 3));
        assert_eq!(rule_spans(&rules, &tokenize("OKAY pass it")), vec![(1, 3)]);
    }

    #[test]
    fn errors() {
        assert!(parse_rules("@missing wire").is_err());
        assert!(parse_rules("a < b").is_err());
        assert!(parse_rules("a < > b").is_err());
        assert!(parse_rules("@v =").is_err());
        assert!(RulePattern::new(vec![TokenPredicate::Wildcard], (0, 2)).is_err());
    }
}
