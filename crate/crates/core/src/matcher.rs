//! Mapping protocol phrases back to transcript spans.
//!
//! For each phrase the candidate spans are every n-gram of length `span_min..=span_max`
//! in the phrase's source lines. The best candidate by cosine similarity is kept when
//! its score is strictly above the threshold; otherwise the phrase is dropped.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{enumerate_spans, span_text, tokenize, TextSpan, Transcript};
use crate::embeddings::{cosine, SpanEncoder};
use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::protocol::{ProtocolGraph, ProtocolPhrase};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchScope {
    SourceLinesOnly,
    WholeTranscript,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MatcherConfig<T> {
    pub threshold: T,
    pub span_min: usize,
    pub span_max: usize,
    pub search_scope: SearchScope,
}

impl<T: Scalar> Default for MatcherConfig<T> {
    fn default() -> Self {
        MatcherConfig {
            threshold: T::lit(0.5),
            span_min: 2,
            span_max: 30,
            search_scope: SearchScope::SourceLinesOnly,
        }
    }
}

impl<T: Scalar> MatcherConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold >= T::zero() && self.threshold <= T::one()) {
            return Err(Error::Config(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        if self.span_min < 1 || self.span_min > self.span_max {
            return Err(Error::Config(format!(
                "span length range [{}, {}] is empty",
                self.span_min, self.span_max
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMethod {
    Fuzzy,
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MatchResult<T> {
    pub phrase_id: String,
    pub span: TextSpan,
    pub score: T,
    pub method: MatchMethod,
}

/// Per-phrase outcome, kept for reporting.
#[derive(Clone, Debug, PartialEq)]
pub enum MatchOutcome<T> {
    Matched(MatchResult<T>),
    /// Best candidate did not clear the threshold (or there were no candidates).
    Dropped { best: Option<(TextSpan, T)> },
    /// Phrase or every candidate encoded to nothing.
    Uninformative,
}

impl<T: Scalar> MatchOutcome<T> {
    pub fn matched(&self) -> Option<&MatchResult<T>> {
        match self {
            MatchOutcome::Matched(m) => Some(m),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MatchedGraph<T> {
    pub doc: String,
    pub protocol: ProtocolGraph,
    pub matches: BTreeMap<String, MatchResult<T>>,
}

impl<T: Scalar> MatchedGraph<T> {
    /// Matched phrases in protocol order.
    pub fn matched_in_order(&self) -> Vec<&MatchResult<T>> {
        self.protocol
            .phrases
            .iter()
            .filter_map(|p| self.matches.get(&p.id))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchStatus {
    #[serde(rename = "correct-candidate")]
    CorrectCandidate,
    #[serde(rename = "dropped")]
    Dropped,
    #[serde(rename = "uninformative")]
    Uninformative,
}

/// One line of the match report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchReportRow {
    pub phrase_id: String,
    pub phrase_text: String,
    pub span: Option<TextSpan>,
    pub span_text: Option<String>,
    pub score: Option<f64>,
    pub status: MatchStatus,
}

pub fn report_row<T: Scalar>(p: &ProtocolPhrase, outcome: &MatchOutcome<T>, t: &Transcript) -> MatchReportRow {
    let (span, score, status) = match outcome {
        MatchOutcome::Matched(m) => (Some(m.span), Some(m.score.as_f64()), MatchStatus::CorrectCandidate),
        MatchOutcome::Dropped { best } => (
            best.map(|(s, _)| s),
            best.map(|(_, sc)| sc.as_f64()),
            MatchStatus::Dropped,
        ),
        MatchOutcome::Uninformative => (None, None, MatchStatus::Uninformative),
    };
    MatchReportRow {
        phrase_id: p.id.clone(),
        phrase_text: p.text.clone(),
        span,
        span_text: span.and_then(|s| span_text(t, &s).ok()),
        score,
        status,
    }
}

/// Sentences searched for a phrase under `scope`, in transcript order.
///
/// Unknown line numbers are skipped and returned separately.
fn scoped_sentences(t: &Transcript, lines: &BTreeSet<u32>, scope: SearchScope) -> (Vec<usize>, Vec<u32>) {
    match scope {
        SearchScope::WholeTranscript => ((0..t.len()).collect(), Vec::new()),
        SearchScope::SourceLinesOnly => {
            let mut found = Vec::new();
            let mut missing = Vec::new();
            for &l in lines {
                match t.by_line_no(l) {
                    Some(line) => found.push(line.sent_index),
                    None => missing.push(l),
                }
            }
            (found, missing)
        }
    }
}

/// Union of the n-gram spans over the scoped sentences, ordered by `(sent_index, start, end)`.
pub fn candidate_spans<T: Scalar>(t: &Transcript, scope: &BTreeSet<u32>, cfg: &MatcherConfig<T>) -> Vec<TextSpan> {
    let (sents, missing) = scoped_sentences(t, scope, cfg.search_scope);
    for l in missing {
        warn!("transcript '{}' has no line {l}; skipped", t.id);
    }
    sents
        .into_iter()
        .flat_map(|i| enumerate_spans(&t.lines()[i], cfg.span_min, cfg.span_max))
        .collect()
}

/// Best-scoring candidate for one phrase.
///
/// Ties go to the earliest span in `(sent_index, start, end)` order.
pub fn match_phrase<T: Scalar, E: SpanEncoder<T> + ?Sized>(
    p: &ProtocolPhrase,
    t: &Transcript,
    cfg: &MatcherConfig<T>,
    encoder: &E,
) -> Result<MatchOutcome<T>> {
    let tokens = tokenize(&p.text);
    if tokens.is_empty() {
        return Err(Error::Argument(format!("phrase '{}' has no tokens", p.id)));
    }
    let phrase = encoder.encode_phrase(&p.id, &tokens);
    let (sents, missing) = scoped_sentences(t, &p.source_lines, cfg.search_scope);
    for l in missing {
        warn!("phrase '{}': transcript '{}' has no line {l}; skipped", p.id, t.id);
    }
    let mut best: Option<(TextSpan, T)> = None;
    let mut any_informative = false;
    for i in sents {
        let line = &t.lines()[i];
        let spans = enumerate_spans(line, cfg.span_min, cfg.span_max);
        let encoded = encoder.encode_spans(&t.id, line, &spans);
        for (span, enc) in spans.into_iter().zip(encoded) {
            any_informative |= !enc.is_uninformative();
            let score = cosine(&phrase.vector, &enc.vector)?;
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((span, score));
            }
        }
    }
    if phrase.is_uninformative() || (best.is_some() && !any_informative) {
        warn!("phrase '{}': uninformative embedding", p.id);
        return Ok(MatchOutcome::Uninformative);
    }
    Ok(match best {
        Some((span, score)) if score > cfg.threshold => MatchOutcome::Matched(MatchResult {
            phrase_id: p.id.clone(),
            span,
            score,
            method: MatchMethod::Fuzzy,
        }),
        best => MatchOutcome::Dropped { best },
    })
}

/// Longest case-insensitive common contiguous token run (length >= 2) between the phrase
/// and the scoped sentences. Earliest occurrence wins ties.
pub fn exact_match_baseline(p: &ProtocolPhrase, t: &Transcript, scope: &BTreeSet<u32>) -> Option<TextSpan> {
    exact_match_in(p, t, scope, SearchScope::SourceLinesOnly)
}

fn exact_match_in(p: &ProtocolPhrase, t: &Transcript, scope: &BTreeSet<u32>, mode: SearchScope) -> Option<TextSpan> {
    let phrase: Vec<String> = tokenize(&p.text).iter().map(|s| s.to_lowercase()).collect();
    let (sents, _) = scoped_sentences(t, scope, mode);
    let mut best: Option<TextSpan> = None;
    for i in sents {
        let sent: Vec<String> = t.lines()[i].tokens.iter().map(|s| s.to_lowercase()).collect();
        if let Some((start, len)) = longest_common_run(&sent, &phrase) {
            if len >= 2 && best.is_none_or(|b| len > b.len()) {
                best = Some(TextSpan::new(i, start, start + len));
            }
        }
    }
    best
}

/// `(start in a, length)` of the longest common substring of `a` and `b`; earliest end in `a` on ties.
fn longest_common_run(a: &[String], b: &[String]) -> Option<(usize, usize)> {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    let mut best: Option<(usize, usize)> = None;
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            cur[j] = if a[i - 1] == b[j - 1] { prev[j - 1] + 1 } else { 0 };
            if cur[j] > 0 && best.is_none_or(|(_, l)| cur[j] > l) {
                best = Some((i - cur[j], cur[j]));
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best
}

/// Matches every phrase independently. Results come back in protocol order.
pub fn match_protocol<T: Scalar, E: SpanEncoder<T> + ?Sized>(
    g: &ProtocolGraph,
    t: &Transcript,
    cfg: &MatcherConfig<T>,
    encoder: &E,
) -> Result<(MatchedGraph<T>, Vec<MatchOutcome<T>>)> {
    let outcomes: Vec<MatchOutcome<T>> = g
        .phrases
        .par_iter()
        .map(|p| match match_phrase(p, t, cfg, encoder) {
            Err(Error::Argument(msg)) => {
                warn!("{msg}");
                Ok(MatchOutcome::Uninformative)
            }
            other => other,
        })
        .collect::<Result<_>>()?;
    Ok((assemble_matches(g, t, &outcomes), outcomes))
}

/// Exact-match baseline over a whole protocol.
pub fn match_protocol_exact<T: Scalar>(
    g: &ProtocolGraph,
    t: &Transcript,
    cfg: &MatcherConfig<T>,
) -> (MatchedGraph<T>, Vec<MatchOutcome<T>>) {
    let outcomes: Vec<MatchOutcome<T>> = g
        .phrases
        .iter()
        .map(|p| {
            let n = tokenize(&p.text).len().max(1);
            match exact_match_in(p, t, &p.source_lines, cfg.search_scope) {
                Some(span) => MatchOutcome::Matched(MatchResult {
                    phrase_id: p.id.clone(),
                    span,
                    score: T::from_usize(span.len()).unwrap() / T::from_usize(n).unwrap(),
                    method: MatchMethod::Exact,
                }),
                None => MatchOutcome::Dropped { best: None },
            }
        })
        .collect();
    (assemble_matches(g, t, &outcomes), outcomes)
}

fn assemble_matches<T: Scalar>(g: &ProtocolGraph, t: &Transcript, outcomes: &[MatchOutcome<T>]) -> MatchedGraph<T> {
    let matches = outcomes
        .iter()
        .filter_map(|o| o.matched().cloned())
        .map(|m| (m.phrase_id.clone(), m))
        .collect();
    MatchedGraph {
        doc: t.id.clone(),
        protocol: g.clone(),
        matches,
    }
}
