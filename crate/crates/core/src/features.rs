//! Token feature templates for the CRF.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

const BOS: &str = "<BOS>";
const EOS: &str = "<EOS>";

/// Capitalization, digit and punctuation pattern, one symbol per character.
pub fn word_shape(token: &str) -> String {
    token
        .chars()
        .map(|c| {
            if c.is_uppercase() {
                'X'
            } else if c.is_lowercase() {
                'x'
            } else if c.is_numeric() {
                'd'
            } else {
                c
            }
        })
        .collect()
}

fn word_at(tokens: &[String], i: isize) -> String {
    if i < 0 {
        BOS.to_string()
    } else if i as usize >= tokens.len() {
        EOS.to_string()
    } else {
        tokens[i as usize].to_lowercase()
    }
}

/// Feature strings for token `i`.
///
/// # Panics
/// When `i` is out of bounds.
pub fn extract_features(tokens: &[String], i: usize) -> Vec<String> {
    assert!(i < tokens.len(), "token index {i} out of bounds");
    let mut out = Vec::with_capacity(20);
    out.push("bias".to_string());
    for off in -2isize..=2 {
        let name = match off {
            -2 => "w-2",
            -1 => "w-1",
            0 => "w0",
            1 => "w+1",
            _ => "w+2",
        };
        out.push(format!("{name}={}", word_at(tokens, i as isize + off)));
    }
    out.push(format!("shape0={}", word_shape(&tokens[i])));
    let chars: Vec<char> = tokens[i].to_lowercase().chars().collect();
    for n in 1..=3.min(chars.len()) {
        out.push(format!("pre{n}={}", chars[..n].iter().collect::<String>()));
        out.push(format!("suf{n}={}", chars[chars.len() - n..].iter().collect::<String>()));
    }
    out.push(format!("bi={}|{}", word_at(tokens, i as isize - 1), word_at(tokens, i as isize)));
    out.push(format!("pos={}", (4 * i) / tokens.len()));
    if i == 0 {
        out.push("first".to_string());
    }
    if i + 1 == tokens.len() {
        out.push("last".to_string());
    }
    out
}

/// Dense indexing of feature strings. Unknown features are ignored at lookup.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct FeatureVocab {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for FeatureVocab {
    fn from(names: Vec<String>) -> Self {
        let index = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        FeatureVocab { names, index }
    }
}

impl From<FeatureVocab> for Vec<String> {
    fn from(v: FeatureVocab) -> Self {
        v.names
    }
}

impl FeatureVocab {
    /// Collects every feature seen at least `min_count` times, in first-seen order.
    pub fn fit<'a, I>(sentences: I, min_count: usize) -> Self
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut counts: HashMap<String, usize> = HashMap::new();
        let mut order = Vec::new();
        for s in sentences {
            for i in 0..s.len() {
                for f in extract_features(s, i) {
                    let c = counts.entry(f.clone()).or_insert(0);
                    if *c == 0 {
                        order.push(f);
                    }
                    *c += 1;
                }
            }
        }
        order.retain(|f| counts[f] >= min_count);
        FeatureVocab::from(order)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn get(&self, feature: &str) -> Option<usize> {
        self.index.get(feature).copied()
    }

    pub fn name(&self, i: usize) -> Option<&str> {
        self.names.get(i).map(String::as_str)
    }

    /// Active feature indices for every token of a sentence.
    pub fn encode(&self, tokens: &[String]) -> Vec<Vec<usize>> {
        (0..tokens.len())
            .map(|i| extract_features(tokens, i).iter().filter_map(|f| self.get(f)).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn template_examples() {
        let f = extract_features(&toks("Pass wire"), 0);
        for want in ["w0=pass", "shape0=Xxxx", "suf1=s", "w-1=<BOS>", "w+1=wire", "bi=<BOS>|pass", "pre3=pas"] {
            assert!(f.contains(&want.to_string()), "missing {want}");
        }
        let f = extract_features(&toks("Go"), 0);
        assert!(f.contains(&"w-1=<BOS>".to_string()) && f.contains(&"w+1=<EOS>".to_string()));
        assert!(f.contains(&"w+2=<EOS>".to_string()));
        assert_eq!(word_shape("A3-b"), "Xd-x");
        assert_eq!(extract_features(&toks("a b c"), 1), extract_features(&toks("a b c"), 1));
    }

    #[test]
    fn vocab_roundtrip() {
        let s1 = toks("pass the wire");
        let s2 = toks("pass it");
        let v = FeatureVocab::fit([s1.as_slice(), s2.as_slice()], 1);
        assert_eq!(v.get("bias"), Some(0));
        assert!(v.get("w0=pass").is_some());
        let json = serde_json::to_string(&v).unwrap();
        let back: FeatureVocab = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        let enc = v.encode(&toks("pass unseenword"));
        assert!(enc[1].contains(&0));
        assert!(!enc[1].is_empty());
        let v2 = FeatureVocab::fit([s1.as_slice(), s2.as_slice()], 2);
        assert!(v2.get("w0=pass").is_some());
        assert!(v2.get("w0=wire").is_none());
    }
}
