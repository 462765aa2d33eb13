//! Weakly-supervised datasets derived from a matched protocol.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{TextSpan, Transcript};
use crate::error::{Error, Result};
use crate::iobes::{iobes_tags, Tag};
use crate::matcher::MatchedGraph;
use crate::num::Scalar;
use crate::protocol::RelationLabel;

/// Largest magnitude of a context position.
pub const POSITION_CLAMP: i32 = 10;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeqExample {
    pub doc: String,
    pub sent_index: usize,
    pub tokens: Vec<String>,
    pub tags: Vec<Tag>,
}

/// One tagged example per transcript sentence.
pub fn build_seq_dataset<T: Scalar>(m: &MatchedGraph<T>, t: &Transcript) -> Result<Vec<SeqExample>> {
    let mut per_sentence: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for r in m.matches.values() {
        r.span.validate(t)?;
        per_sentence.entry(r.span.sent_index).or_default().push((r.span.start, r.span.end));
    }
    t.lines()
        .iter()
        .map(|line| {
            let spans = per_sentence.get(&line.sent_index).map(Vec::as_slice).unwrap_or(&[]);
            Ok(SeqExample {
                doc: t.id.clone(),
                sent_index: line.sent_index,
                tokens: line.tokens.clone(),
                tags: iobes_tags(line.len(), spans)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextSentence {
    pub sent_index: usize,
    pub tokens: Vec<String>,
}

/// A span, its own sentence, and up to `k` neighbor sentences per side.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextWindow {
    pub span: TextSpan,
    pub k: usize,
    pub sentence: Vec<String>,
    pub left: Vec<ContextSentence>,
    pub right: Vec<ContextSentence>,
}

impl ContextWindow {
    pub fn span_tokens(&self) -> &[String] {
        &self.sentence[self.span.start..self.span.end]
    }

    /// Every token of the window in reading order.
    pub fn all_tokens(&self) -> impl Iterator<Item = &String> {
        self.left
            .iter()
            .flat_map(|c| c.tokens.iter())
            .chain(self.sentence.iter())
            .chain(self.right.iter().flat_map(|c| c.tokens.iter()))
    }

    /// Tokens outside the span, including the rest of the span's own sentence.
    pub fn context_tokens(&self) -> impl Iterator<Item = &String> {
        self.left
            .iter()
            .flat_map(|c| c.tokens.iter())
            .chain(self.sentence[..self.span.start].iter())
            .chain(self.sentence[self.span.end..].iter())
            .chain(self.right.iter().flat_map(|c| c.tokens.iter()))
    }
}

pub fn context_window(t: &Transcript, span: TextSpan, k: usize) -> Result<ContextWindow> {
    span.validate(t)?;
    let p = span.sent_index;
    let unit = |i: usize| ContextSentence {
        sent_index: i,
        tokens: t.lines()[i].tokens.clone(),
    };
    Ok(ContextWindow {
        span,
        k,
        sentence: t.lines()[p].tokens.clone(),
        left: (p.saturating_sub(k)..p).map(unit).collect(),
        right: (p + 1..(p + 1 + k).min(t.len())).map(unit).collect(),
    })
}

fn clamp_position(v: i64) -> i32 {
    v.clamp(-(POSITION_CLAMP as i64), POSITION_CLAMP as i64) as i32
}

/// Signed sentence distances, one per unit.
///
/// Units are each left sentence, the part of the span sentence before the span (only
/// when non-empty), the span with the rest of its sentence, and each right sentence.
pub fn context_positions(w: &ContextWindow) -> Vec<i32> {
    let pt = w.span.sent_index as i64;
    let mut out = Vec::with_capacity(w.left.len() + w.right.len() + 2);
    out.extend(w.left.iter().map(|c| clamp_position(c.sent_index as i64 - pt - 1)));
    if w.span.start > 0 {
        out.push(-1);
    }
    out.push(1);
    out.extend(w.right.iter().map(|c| clamp_position(c.sent_index as i64 - pt + 1)));
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairExample {
    pub doc: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_phrase: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_phrase: Option<String>,
    pub u: ContextWindow,
    pub v: ContextWindow,
    pub label: RelationLabel,
    #[serde(rename = "u_pos")]
    pub u_positions: Vec<i32>,
    #[serde(rename = "v_pos")]
    pub v_positions: Vec<i32>,
}

impl PairExample {
    pub fn new(t: &Transcript, u: TextSpan, v: TextSpan, k: usize, label: RelationLabel) -> Result<Self> {
        let u = context_window(t, u, k)?;
        let v = context_window(t, v, k)?;
        Ok(PairExample {
            doc: t.id.clone(),
            u_phrase: None,
            v_phrase: None,
            u_positions: context_positions(&u),
            v_positions: context_positions(&v),
            u,
            v,
            label,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairStats {
    pub labeled: usize,
    pub none: usize,
    pub dropped_edges: usize,
}

/// All ordered pairs of matched phrases, labeled by the protocol edge between them.
pub fn build_pair_dataset<T: Scalar>(
    m: &MatchedGraph<T>,
    t: &Transcript,
    k: usize,
) -> Result<(Vec<PairExample>, PairStats)> {
    let matched = m.matched_in_order();
    let mut stats = PairStats {
        dropped_edges: m
            .protocol
            .edges
            .iter()
            .filter(|e| !(m.matches.contains_key(&e.src) && m.matches.contains_key(&e.dst)))
            .count(),
        ..PairStats::default()
    };
    let windows = matched
        .iter()
        .map(|r| {
            let w = context_window(t, r.span, k)?;
            let pos = context_positions(&w);
            Ok((w, pos))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(matched.len() * matched.len().saturating_sub(1));
    for (i, u) in matched.iter().enumerate() {
        for (j, v) in matched.iter().enumerate() {
            if i == j {
                continue;
            }
            let label = m.protocol.label_between(&u.phrase_id, &v.phrase_id);
            if label == RelationLabel::None {
                stats.none += 1;
            } else {
                stats.labeled += 1;
            }
            out.push(PairExample {
                doc: t.id.clone(),
                u_phrase: Some(u.phrase_id.clone()),
                v_phrase: Some(v.phrase_id.clone()),
                u: windows[i].0.clone(),
                v: windows[j].0.clone(),
                label,
                u_positions: windows[i].1.clone(),
                v_positions: windows[j].1.clone(),
            });
        }
    }
    Ok((out, stats))
}

/// Ratio `none:next:if` used to subsample pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SamplingPortion {
    pub none_w: u32,
    pub next_w: u32,
    pub if_w: u32,
}

impl SamplingPortion {
    pub fn new(none_w: u32, next_w: u32, if_w: u32) -> Result<Self> {
        if none_w == 0 || next_w == 0 || if_w == 0 {
            return Err(Error::Config(format!(
                "sampling weights must be positive, got {none_w}:{next_w}:{if_w}"
            )));
        }
        Ok(SamplingPortion { none_w, next_w, if_w })
    }

    /// Target count per label (`None`, `Next`, `If`) when `m` If examples are kept.
    pub fn targets(&self, m: usize) -> [usize; 3] {
        let scale = |w: u32| (m as u128 * w as u128 / self.if_w as u128) as usize;
        [scale(self.none_w), scale(self.next_w), m]
    }
}

impl fmt::Display for SamplingPortion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.none_w, self.next_w, self.if_w)
    }
}

impl FromStr for SamplingPortion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let bad = || Error::Config(format!("sampling portion '{s}' is not of the form a:b:c"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let w: Vec<u32> = parts.iter().map(|p| p.parse().map_err(|_| bad())).collect::<Result<_>>()?;
        SamplingPortion::new(w[0], w[1], w[2])
    }
}

/// Indices (ascending) of a label-balanced subsample.
///
/// All `If` items are kept; `Next` and `None` are drawn uniformly without replacement.
pub fn sample_by_label(labels: &[RelationLabel], portion: SamplingPortion, seed: u64) -> Vec<usize> {
    let mut by_label: [Vec<usize>; 3] = Default::default();
    for (i, l) in labels.iter().enumerate() {
        by_label[l.index()].push(i);
    }
    let m = by_label[RelationLabel::If.index()].len();
    if m == 0 {
        warn!("no <if> examples; label sampling yields an empty dataset");
    }
    let targets = portion.targets(m);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = Vec::new();
    for label in RelationLabel::ALL {
        let pool = &by_label[label.index()];
        let want = targets[label.index()];
        if want >= pool.len() {
            if want > pool.len() {
                warn!("requested {want} <{label}> examples but only {} exist; keeping all", pool.len());
            }
            keep.extend_from_slice(pool);
        } else {
            keep.extend(rand::seq::index::sample(&mut rng, pool.len(), want).into_iter().map(|i| pool[i]));
        }
    }
    keep.sort_unstable();
    keep
}

pub fn sample_labels(pairs: &[PairExample], portion: SamplingPortion, seed: u64) -> Vec<PairExample> {
    let labels: Vec<RelationLabel> = pairs.iter().map(|p| p.label).collect();
    sample_by_label(&labels, portion, seed)
        .into_iter()
        .map(|i| pairs[i].clone())
        .collect()
}

pub fn label_counts<'a>(labels: impl IntoIterator<Item = &'a RelationLabel>) -> BTreeMap<String, usize> {
    let mut out: BTreeMap<String, usize> = RelationLabel::ALL.iter().map(|l| (l.as_str().to_string(), 0)).collect();
    for l in labels {
        *out.get_mut(l.as_str()).unwrap() += 1;
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocSplit {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

impl DocSplit {
    pub fn part_of(&self, doc: &str) -> Option<&'static str> {
        if self.train.iter().any(|d| d == doc) {
            Some("train")
        } else if self.dev.iter().any(|d| d == doc) {
            Some("dev")
        } else if self.test.iter().any(|d| d == doc) {
            Some("test")
        } else {
            None
        }
    }
}

/// Seeded 80/10/10 split over document ids. With three or more documents the dev and
/// test parts each get at least one. Each part is returned sorted.
pub fn split_documents(docs: &[String], seed: u64) -> DocSplit {
    let mut ids = docs.to_vec();
    ids.sort();
    ids.dedup();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = ids.len();
    let tenth = if n >= 3 { (n / 10).max(1) } else { 0 };
    let mut test = ids.split_off(n - tenth);
    let mut dev = ids.split_off(ids.len() - tenth);
    let mut train = ids;
    train.sort();
    dev.sort();
    test.sort();
    DocSplit { train, dev, test }
}

/// Summary written next to the generated files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub k: usize,
    pub portion: String,
    pub documents: usize,
    pub seq_examples: usize,
    pub seq_sentences_with_spans: usize,
    pub pairs_before_sampling: BTreeMap<String, usize>,
    pub pairs_after_sampling: BTreeMap<String, usize>,
    pub dropped_edges: usize,
    pub split: DocSplit,
}
