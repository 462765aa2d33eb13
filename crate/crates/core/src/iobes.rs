//! IOBES span encoding.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tag alphabet. Declaration order is the decoding tie-break order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tag {
    B,
    I,
    E,
    S,
    O,
}

impl Tag {
    pub const ALL: [Tag; 5] = [Tag::B, Tag::I, Tag::E, Tag::S, Tag::O];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Tag> {
        Tag::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Tag::B => "B",
            Tag::I => "I",
            Tag::E => "E",
            Tag::S => "S",
            Tag::O => "O",
        }
    }

    pub fn is_outside(self) -> bool {
        self == Tag::O
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "B" => Ok(Tag::B),
            "I" => Ok(Tag::I),
            "E" => Ok(Tag::E),
            "S" => Ok(Tag::S),
            "O" => Ok(Tag::O),
            _ => Err(Error::Data(format!("unknown tag '{s}'"))),
        }
    }
}

/// Sorts and union-merges overlapping `(start, end)` ranges. Touching ranges stay separate.
pub fn merge_overlaps(spans: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut sorted: Vec<_> = spans.iter().copied().filter(|(s, e)| e > s).collect();
    sorted.sort_unstable();
    let mut out: Vec<(usize, usize)> = Vec::with_capacity(sorted.len());
    for (s, e) in sorted {
        match out.last_mut() {
            Some(last) if s < last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

/// Encodes half-open token ranges as tags. Overlapping ranges are merged first.
pub fn iobes_tags(sent_len: usize, spans: &[(usize, usize)]) -> Result<Vec<Tag>> {
    for &(s, e) in spans {
        if s >= e || e > sent_len {
            return Err(Error::Address(format!(
                "span ({s},{e}) out of bounds for sentence of length {sent_len}"
            )));
        }
    }
    let mut tags = vec![Tag::O; sent_len];
    for (s, e) in merge_overlaps(spans) {
        if e - s == 1 {
            tags[s] = Tag::S;
        } else {
            tags[s] = Tag::B;
            tags[s + 1..e - 1].fill(Tag::I);
            tags[e - 1] = Tag::E;
        }
    }
    Ok(tags)
}

/// Decodes tags into half-open ranges, repairing invalid fragments.
///
/// An `I` or `E` with no open segment starts one. `B`, `S` and `O` close any open
/// segment at the previous token; a segment still open at the end closes at the last token.
pub fn extract_spans(tags: &[Tag]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut open: Option<usize> = None;
    for (i, &t) in tags.iter().enumerate() {
        match t {
            Tag::B => {
                if let Some(s) = open.take() {
                    out.push((s, i));
                }
                open = Some(i);
            }
            Tag::I => {
                open.get_or_insert(i);
            }
            Tag::E => {
                let s = open.take().unwrap_or(i);
                out.push((s, i + 1));
            }
            Tag::S | Tag::O => {
                if let Some(s) = open.take() {
                    out.push((s, i));
                }
                if t == Tag::S {
                    out.push((i, i + 1));
                }
            }
        }
    }
    if let Some(s) = open {
        out.push((s, tags.len()));
    }
    out
}

/// True when the sequence is a well-formed IOBES encoding.
pub fn is_valid_iobes(tags: &[Tag]) -> bool {
    let mut inside = false;
    for &t in tags {
        let ok = match t {
            Tag::B | Tag::S | Tag::O => !inside,
            Tag::I | Tag::E => inside,
        };
        if !ok {
            return false;
        }
        inside = matches!(t, Tag::B | Tag::I);
    }
    !inside
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Tag::*;

    #[test]
    fn encode_examples() {
        assert_eq!(iobes_tags(5, &[(2, 3)]).unwrap(), vec![O, O, S, O, O]);
        assert_eq!(iobes_tags(5, &[(1, 4)]).unwrap(), vec![O, B, I, E, O]);
        assert_eq!(iobes_tags(4, &[]).unwrap(), vec![O; 4]);
        assert!(iobes_tags(4, &[(2, 5)]).is_err());
        assert!(iobes_tags(4, &[(2, 2)]).is_err());
    }

    #[test]
    fn overlaps_are_merged_touching_are_not() {
        assert_eq!(iobes_tags(6, &[(0, 3), (2, 5)]).unwrap(), vec![B, I, I, I, E, O]);
        assert_eq!(iobes_tags(4, &[(0, 2), (2, 4)]).unwrap(), vec![B, E, B, E]);
        assert_eq!(iobes_tags(4, &[(1, 3), (1, 3)]).unwrap(), vec![O, B, E, O]);
    }

    #[test]
    fn decode_examples() {
        assert_eq!(extract_spans(&[B, E]), vec![(0, 2)]);
        assert_eq!(extract_spans(&[S, O, B, I, E]), vec![(0, 1), (2, 5)]);
        assert_eq!(extract_spans(&[I, E, O]), vec![(0, 2)]);
        assert_eq!(extract_spans(&[B, I, I]), vec![(0, 3)]);
        assert_eq!(extract_spans(&[B, I, O]), vec![(0, 2)]);
        assert_eq!(extract_spans(&[E, E]), vec![(0, 1), (1, 2)]);
        assert_eq!(extract_spans(&[B, B, E]), vec![(0, 1), (1, 3)]);
        assert!(extract_spans(&[O, O]).is_empty());
    }

    #[test]
    fn validator() {
        assert!(is_valid_iobes(&[O, B, I, E, S]));
        assert!(!is_valid_iobes(&[I, E]));
        assert!(!is_valid_iobes(&[B, O]));
        assert!(!is_valid_iobes(&[B]));
        assert!(is_valid_iobes(&[]));
    }

    fn disjoint_spans() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
        prop::collection::vec((0usize..3, 1usize..4), 0..6).prop_map(|parts| {
            let mut pos = 0;
            let mut spans = Vec::new();
            for (gap, len) in parts {
                pos += gap;
                spans.push((pos, pos + len));
                pos += len;
            }
            (pos + 1, spans)
        })
    }

    proptest! {
        #[test]
        fn roundtrip((n, spans) in disjoint_spans()) {
            let tags = iobes_tags(n, &spans).unwrap();
            prop_assert!(is_valid_iobes(&tags));
            prop_assert_eq!(extract_spans(&tags), spans);
        }

        #[test]
        fn decoding_never_panics_and_reencodes_valid(raw in prop::collection::vec(0usize..5, 0..20)) {
            let tags: Vec<Tag> = raw.into_iter().map(|i| Tag::from_index(i).unwrap()).collect();
            let spans = extract_spans(&tags);
            let again = iobes_tags(tags.len(), &spans).unwrap();
            prop_assert!(is_valid_iobes(&again));
            prop_assert_eq!(extract_spans(&again), spans);
        }
    }
}
