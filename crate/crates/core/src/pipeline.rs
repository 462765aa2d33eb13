//! End-to-end inference: extract spans, relate every ordered pair, assemble a flowchart.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{span_text, TextSpan, Transcript};
use crate::crf::{CrfHyper, CrfModel};
use crate::dataset::{PairExample, SamplingPortion};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::iobes::extract_spans;
use crate::matcher::{MatcherConfig, SearchScope};
use crate::num::Scalar;
use crate::protocol::RelationLabel;
use crate::relation::{re_predict, PoolingMode, ReConfig, ReHyper, ReModel};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KgNode {
    pub id: usize,
    pub span: TextSpan,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KgEdge {
    pub src: usize,
    pub dst: usize,
    pub label: RelationLabel,
    pub score: f64,
}

/// Extracted steps and the procedural relations between them.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeGraph {
    pub doc: String,
    pub nodes: Vec<KgNode>,
    pub edges: Vec<KgEdge>,
}

/// One classified ordered pair of spans, by index into the span list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairPrediction {
    pub i: usize,
    pub j: usize,
    pub label: RelationLabel,
    pub score: f64,
    pub scores: [f64; 3],
}

/// Tags every sentence and returns the decoded spans in document order.
pub fn run_extract<T: Scalar>(t: &Transcript, m: &CrfModel<T>) -> Vec<TextSpan> {
    let per_sentence: Vec<Vec<TextSpan>> = t
        .lines()
        .par_iter()
        .map(|line| {
            extract_spans(&m.predict(&line.tokens))
                .into_iter()
                .map(|(s, e)| TextSpan::new(line.sent_index, s, e))
                .collect()
        })
        .collect();
    per_sentence.into_iter().flatten().collect()
}

/// Classifies every ordered pair of distinct spans, optionally only those at most
/// `max_distance` sentences apart. Output is ordered by `(i, j)`.
pub fn run_relate<T: Scalar>(
    spans: &[TextSpan],
    t: &Transcript,
    m: &ReModel<T>,
    emb: &EmbeddingTable<T>,
    max_distance: Option<usize>,
) -> Result<Vec<PairPrediction>> {
    let pairs: Vec<(usize, usize)> = (0..spans.len())
        .flat_map(|i| (0..spans.len()).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j)
        .filter(|&(i, j)| max_distance.is_none_or(|d| spans[i].sent_index.abs_diff(spans[j].sent_index) <= d))
        .collect();
    pairs
        .par_iter()
        .map(|&(i, j)| {
            let p = PairExample::new(t, spans[i], spans[j], m.config.k, RelationLabel::None)?;
            let (label, scores) = re_predict(m, emb, &p);
            let scores = scores.map(|s| s.as_f64());
            Ok(PairPrediction {
                i,
                j,
                label,
                score: scores[label.index()],
                scores,
            })
        })
        .collect()
}

/// Builds the graph. When both directions of a pair carry a relation, only the
/// higher-scoring one is kept (the `i < j` direction on a tie).
pub fn assemble(t: &Transcript, spans: &[TextSpan], predictions: &[PairPrediction]) -> Result<KnowledgeGraph> {
    let mut seen: BTreeMap<(usize, usize), &PairPrediction> = BTreeMap::new();
    for p in predictions {
        if p.i >= spans.len() || p.j >= spans.len() || p.i == p.j {
            return Err(Error::Argument(format!("prediction ({}, {}) does not address two spans", p.i, p.j)));
        }
        if seen.insert((p.i, p.j), p).is_some() {
            return Err(Error::Argument(format!("pair ({}, {}) predicted more than once", p.i, p.j)));
        }
    }
    let mut edges = Vec::new();
    for (&(i, j), p) in &seen {
        if p.label == RelationLabel::None {
            continue;
        }
        if let Some(rev) = seen.get(&(j, i)).filter(|r| r.label != RelationLabel::None) {
            let keep = p.score > rev.score || (p.score == rev.score && i < j);
            if !keep {
                continue;
            }
        }
        edges.push(KgEdge {
            src: i,
            dst: j,
            label: p.label,
            score: p.score,
        });
    }
    let nodes = spans
        .iter()
        .enumerate()
        .map(|(id, s)| Ok(KgNode { id, span: *s, text: span_text(t, s)? }))
        .collect::<Result<_>>()?;
    Ok(KnowledgeGraph {
        doc: t.id.clone(),
        nodes,
        edges,
    })
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphFormat {
    Dot,
    Json,
}

pub fn export_graph(g: &KnowledgeGraph, format: GraphFormat) -> Result<String> {
    match format {
        GraphFormat::Dot => Ok(to_dot(g)),
        GraphFormat::Json => Ok(serde_json::to_string_pretty(g)? + "\n"),
    }
}

/// DOT digraph with node labels from span text and edge labels `next`/`if`.
pub fn to_dot(g: &KnowledgeGraph) -> String {
    let mut out = String::from("digraph G {\n");
    for n in &g.nodes {
        let _ = writeln!(out, "  n{} [label=\"{}\"];", n.id, dot_escape(&n.text));
    }
    for e in &g.edges {
        let _ = writeln!(out, "  n{} -> n{} [label=\"{}\"];", e.src, e.dst, e.label);
    }
    out.push_str("}\n");
    out
}

/// Every tunable of the pipeline. Files use one `key = value` per line; `#` starts a comment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub seed: u64,
    pub k: usize,
    pub portion: SamplingPortion,
    pub matcher: MatcherConfig<f64>,
    pub crf: CrfHyper,
    pub re: ReHyper,
    pub pooling: PoolingMode,
    pub max_distance: Option<usize>,
    pub runs: usize,
    pub data_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 13,
            k: 2,
            portion: SamplingPortion::new(4, 2, 1).unwrap(),
            matcher: MatcherConfig::default(),
            crf: CrfHyper {
                seed: 13,
                ..CrfHyper::default()
            },
            re: ReHyper {
                seed: 13,
                ..ReHyper::default()
            },
            pooling: PoolingMode::MaskedAvg,
            max_distance: None,
            runs: 5,
            data_dir: None,
        }
    }
}

fn parse_value<V: std::str::FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for '{key}'")))
}

impl PipelineConfig {
    pub const KEYS: [&'static str; 20] = [
        "seed",
        "k",
        "portion",
        "threshold",
        "span_min",
        "span_max",
        "search_scope",
        "crf_l2",
        "crf_lr",
        "crf_epochs",
        "crf_batch_size",
        "crf_min_feature_count",
        "re_l2",
        "re_lr",
        "re_epochs",
        "re_batch_size",
        "pooling",
        "max_distance",
        "runs",
        "data_dir",
    ];

    /// Sets one key. Seeds of the sub-stages follow `seed`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "seed" => self.seed = parse_value(key, v)?,
            "k" => self.k = parse_value(key, v)?,
            "portion" => self.portion = v.parse()?,
            "threshold" => self.matcher.threshold = parse_value(key, v)?,
            "span_min" => self.matcher.span_min = parse_value(key, v)?,
            "span_max" => self.matcher.span_max = parse_value(key, v)?,
            "search_scope" => {
                self.matcher.search_scope = match v {
                    "source_lines" | "source_lines_only" => SearchScope::SourceLinesOnly,
                    "whole_transcript" => SearchScope::WholeTranscript,
                    _ => return Err(Error::Config(format!("invalid value '{v}' for 'search_scope'"))),
                }
            }
            "crf_l2" => self.crf.l2 = parse_value(key, v)?,
            "crf_lr" => self.crf.lr = parse_value(key, v)?,
            "crf_epochs" => self.crf.epochs = parse_value(key, v)?,
            "crf_batch_size" => self.crf.batch_size = parse_value(key, v)?,
            "crf_min_feature_count" => self.crf.min_feature_count = parse_value(key, v)?,
            "re_l2" => self.re.l2 = parse_value(key, v)?,
            "re_lr" => self.re.lr = parse_value(key, v)?,
            "re_epochs" => self.re.epochs = parse_value(key, v)?,
            "re_batch_size" => self.re.batch_size = parse_value(key, v)?,
            "pooling" => self.pooling = v.parse()?,
            "max_distance" => {
                self.max_distance = match v {
                    "" | "none" => None,
                    _ => Some(parse_value(key, v)?),
                }
            }
            "runs" => self.runs = parse_value(key, v)?,
            "data_dir" => self.data_dir = Some(PathBuf::from(v)),
            other => return Err(Error::Config(format!("unknown configuration key '{other}'"))),
        }
        self.crf.seed = self.seed;
        self.re.seed = self.seed;
        Ok(())
    }

    /// Applies a `key = value` file on top of `self`.
    pub fn merge_str(&mut self, src: &str) -> Result<()> {
        for (i, raw) in src.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::format(i + 1, "expected 'key = value'"))?;
            self.set(k, v).map_err(|e| Error::format(i + 1, e.to_string()))?;
        }
        Ok(())
    }

    pub fn re_config(&self) -> ReConfig {
        ReConfig {
            pooling: self.pooling,
            k: self.k,
            ..ReConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.matcher.validate()?;
        self.re_config().validate()?;
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.crf.epochs == 0 || self.re.epochs == 0 || self.crf.batch_size == 0 || self.re.batch_size == 0 {
            return Err(Error::Config("epochs and batch sizes must be positive".into()));
        }
        if !(self.crf.lr > 0.0 && self.re.lr > 0.0 && self.crf.l2 >= 0.0 && self.re.l2 >= 0.0) {
            return Err(Error::Config("learning rates must be positive and l2 non-negative".into()));
        }
        Ok(())
    }
}
