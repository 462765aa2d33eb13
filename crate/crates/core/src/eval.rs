//! Token, mention and relation metrics, run aggregation and manual-annotation scoring.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::corpus::{TextSpan, Transcript};
use crate::error::{Error, Result};
use crate::iobes::{extract_spans, iobes_tags, Tag};
use crate::matcher::MatchedGraph;
use crate::num::Scalar;
use crate::protocol::RelationLabel;

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    /// Every sentence weighs the same.
    #[default]
    Macro,
    /// Every token weighs the same.
    Micro,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenMetrics {
    pub accuracy: f64,
    pub f1: f64,
    pub averaging: Averaging,
    pub sentence_accuracy: Vec<f64>,
    pub sentence_f1: Vec<f64>,
}

/// Binary F1 of non-`O` tokens. A sentence where neither side marks any token scores 1.
fn binary_counts(gold: &[Tag], pred: &[Tag]) -> (usize, usize, usize) {
    let mut tp = 0;
    let mut fp = 0;
    let mut fneg = 0;
    for (g, p) in gold.iter().zip(pred) {
        match (g.is_outside(), p.is_outside()) {
            (false, false) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (true, true) => {}
        }
    }
    (tp, fp, fneg)
}

fn binary_f1(tp: usize, fp: usize, fneg: usize) -> f64 {
    if tp + fp + fneg == 0 {
        1.0
    } else {
        f1(ratio(tp, tp + fp), ratio(tp, tp + fneg))
    }
}

pub fn token_metrics(gold: &[Vec<Tag>], pred: &[Vec<Tag>]) -> Result<TokenMetrics> {
    token_metrics_with(gold, pred, Averaging::Macro)
}

/// Token accuracy and binary span-token F1. Empty sentences are skipped.
pub fn token_metrics_with(gold: &[Vec<Tag>], pred: &[Vec<Tag>], averaging: Averaging) -> Result<TokenMetrics> {
    if gold.len() != pred.len() {
        return Err(Error::Argument(format!(
            "{} gold sentences but {} predicted",
            gold.len(),
            pred.len()
        )));
    }
    let mut sentence_accuracy = Vec::new();
    let mut sentence_f1 = Vec::new();
    let (mut correct, mut total, mut tp, mut fp, mut fneg) = (0, 0, 0, 0, 0);
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.len() != p.len() {
            return Err(Error::Argument(format!(
                "sentence {i}: {} gold tags but {} predicted",
                g.len(),
                p.len()
            )));
        }
        if g.is_empty() {
            continue;
        }
        let c = g.iter().zip(p).filter(|(a, b)| a == b).count();
        let (t, f, n) = binary_counts(g, p);
        sentence_accuracy.push(ratio(c, g.len()));
        sentence_f1.push(binary_f1(t, f, n));
        correct += c;
        total += g.len();
        tp += t;
        fp += f;
        fneg += n;
    }
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    let (accuracy, f1_value) = match averaging {
        Averaging::Macro => (mean(&sentence_accuracy), mean(&sentence_f1)),
        Averaging::Micro => (ratio(correct, total), binary_f1(tp, fp, fneg)),
    };
    Ok(TokenMetrics {
        accuracy,
        f1: f1_value,
        averaging,
        sentence_accuracy,
        sentence_f1,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MentionMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub gold: usize,
    pub pred: usize,
    pub hits: usize,
    /// F1 where any overlap counts as a hit; a diagnostic only.
    pub overlap_f1: f64,
}

fn overlaps(a: (usize, usize), b: (usize, usize)) -> bool {
    a.0 < b.1 && b.0 < a.1
}

/// Exact-boundary mention scores over aligned sentences of `(start, end)` spans.
pub fn mention_metrics(gold: &[Vec<(usize, usize)>], pred: &[Vec<(usize, usize)>]) -> Result<MentionMetrics> {
    if gold.len() != pred.len() {
        return Err(Error::Argument(format!(
            "{} gold sentences but {} predicted",
            gold.len(),
            pred.len()
        )));
    }
    let (mut g_total, mut p_total, mut hits, mut p_overlap, mut g_overlap) = (0, 0, 0, 0, 0);
    for (g, p) in gold.iter().zip(pred) {
        let g: BTreeSet<(usize, usize)> = g.iter().copied().collect();
        let p: BTreeSet<(usize, usize)> = p.iter().copied().collect();
        g_total += g.len();
        p_total += p.len();
        hits += g.intersection(&p).count();
        p_overlap += p.iter().filter(|&&s| g.iter().any(|&t| overlaps(s, t))).count();
        g_overlap += g.iter().filter(|&&s| p.iter().any(|&t| overlaps(s, t))).count();
    }
    let precision = ratio(hits, p_total);
    let recall = ratio(hits, g_total);
    Ok(MentionMetrics {
        precision,
        recall,
        f1: f1(precision, recall),
        accuracy: recall,
        gold: g_total,
        pred: p_total,
        hits,
        overlap_f1: f1(ratio(p_overlap, p_total), ratio(g_overlap, g_total)),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationMetrics {
    pub accuracy: f64,
    pub micro_f1: f64,
    pub next_f1: f64,
    pub if_f1: f64,
    pub include_none: bool,
    /// `confusion[gold][pred]` in None, Next, If order.
    pub confusion: [[usize; 3]; 3],
}

pub fn relation_metrics(gold: &[RelationLabel], pred: &[RelationLabel]) -> Result<RelationMetrics> {
    relation_metrics_with(gold, pred, false)
}

/// Accuracy, per-label F1 and micro-F1. Unless `include_none`, micro-F1 pools only the
/// Next and If classes.
pub fn relation_metrics_with(gold: &[RelationLabel], pred: &[RelationLabel], include_none: bool) -> Result<RelationMetrics> {
    if gold.len() != pred.len() {
        return Err(Error::Argument(format!("{} gold labels but {} predicted", gold.len(), pred.len())));
    }
    let mut confusion = [[0usize; 3]; 3];
    for (g, p) in gold.iter().zip(pred) {
        confusion[g.index()][p.index()] += 1;
    }
    let row = |c: usize| confusion[c].iter().sum::<usize>();
    let col = |c: usize| confusion.iter().map(|r| r[c]).sum::<usize>();
    let label_f1 = |c: usize| f1(ratio(confusion[c][c], col(c)), ratio(confusion[c][c], row(c)));
    let classes: Vec<usize> = if include_none { vec![0, 1, 2] } else { vec![1, 2] };
    let tp: usize = classes.iter().map(|&c| confusion[c][c]).sum();
    let pp: usize = classes.iter().map(|&c| col(c)).sum();
    let gp: usize = classes.iter().map(|&c| row(c)).sum();
    let correct: usize = (0..3).map(|c| confusion[c][c]).sum();
    Ok(RelationMetrics {
        accuracy: ratio(correct, gold.len()),
        micro_f1: f1(ratio(tp, pp), ratio(tp, gp)),
        next_f1: label_f1(RelationLabel::Next.index()),
        if_f1: label_f1(RelationLabel::If.index()),
        include_none,
        confusion,
    })
}

/// Mean and sample standard deviation (zero for a single value).
pub fn aggregate_runs(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Argument("cannot aggregate zero runs".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}

/// One line of a manual annotation file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnnotationRecord {
    Phrase {
        phrase_id: String,
        gold_span: Option<TextSpan>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        note: Option<String>,
    },
    Pair {
        u_phrase: String,
        v_phrase: String,
        label: RelationLabel,
    },
}

/// Gold spans per phrase (`None` marks a noisy or unmatchable phrase) and gold pair labels.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ManualAnnotation {
    pub phrases: BTreeMap<String, Option<TextSpan>>,
    pub notes: BTreeMap<String, String>,
    pub pairs: BTreeMap<(String, String), RelationLabel>,
}

impl ManualAnnotation {
    pub fn from_records(records: impl IntoIterator<Item = AnnotationRecord>) -> Result<Self> {
        let mut out = ManualAnnotation::default();
        for r in records {
            match r {
                AnnotationRecord::Phrase { phrase_id, gold_span, note } => {
                    if out.phrases.insert(phrase_id.clone(), gold_span).is_some() {
                        return Err(Error::Data(format!("phrase '{phrase_id}' annotated twice")));
                    }
                    if let Some(n) = note {
                        out.notes.insert(phrase_id, n);
                    }
                }
                AnnotationRecord::Pair { u_phrase, v_phrase, label } => {
                    if out.pairs.insert((u_phrase.clone(), v_phrase.clone()), label).is_some() {
                        return Err(Error::Data(format!("pair ({u_phrase}, {v_phrase}) annotated twice")));
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn records(&self) -> Vec<AnnotationRecord> {
        let mut out: Vec<AnnotationRecord> = self
            .phrases
            .iter()
            .map(|(id, s)| AnnotationRecord::Phrase {
                phrase_id: id.clone(),
                gold_span: *s,
                note: self.notes.get(id).cloned(),
            })
            .collect();
        out.extend(self.pairs.iter().map(|((u, v), l)| AnnotationRecord::Pair {
            u_phrase: u.clone(),
            v_phrase: v.clone(),
            label: *l,
        }));
        out
    }

    /// Gold spans grouped by sentence.
    pub fn spans_by_sentence(&self) -> BTreeMap<usize, Vec<(usize, usize)>> {
        let mut out: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
        for s in self.phrases.values().flatten() {
            out.entry(s.sent_index).or_default().push((s.start, s.end));
        }
        out
    }
}

pub fn load_annotation<R: BufRead>(source: R) -> Result<ManualAnnotation> {
    let mut records = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: AnnotationRecord = serde_json::from_str(&line).map_err(|e| Error::format(i + 1, e.to_string()))?;
        records.push(r);
    }
    ManualAnnotation::from_records(records)
}

/// Scores of a projection (matching or extraction) against manual annotation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchingReport {
    pub token: TokenMetrics,
    pub mention: MentionMetrics,
    /// Fraction of annotated phrases whose outcome is right: the exact gold span, or no
    /// span when the gold marks the phrase unmatchable.
    pub phrase_accuracy: f64,
    pub phrases: usize,
}

/// Tag sequences and span lists for the sentences holding a gold or predicted span.
pub fn sentence_views(
    t: &Transcript,
    gold: &BTreeMap<usize, Vec<(usize, usize)>>,
    pred: &BTreeMap<usize, Vec<(usize, usize)>>,
) -> Result<(Vec<Vec<Tag>>, Vec<Vec<Tag>>, Vec<Vec<(usize, usize)>>, Vec<Vec<(usize, usize)>>)> {
    let sents: BTreeSet<usize> = gold.keys().chain(pred.keys()).copied().collect();
    let mut out = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for s in sents {
        let line = t
            .sentence(s)
            .ok_or_else(|| Error::Address(format!("sentence {s} not in transcript '{}'", t.id)))?;
        let g = gold.get(&s).cloned().unwrap_or_default();
        let p = pred.get(&s).cloned().unwrap_or_default();
        let gt = iobes_tags(line.len(), &g)?;
        let pt = iobes_tags(line.len(), &p)?;
        out.2.push(extract_spans(&gt));
        out.3.push(extract_spans(&pt));
        out.0.push(gt);
        out.1.push(pt);
    }
    Ok(out)
}

pub fn evaluate_matching<T: Scalar>(
    ann: &ManualAnnotation,
    matched: &MatchedGraph<T>,
    t: &Transcript,
    averaging: Averaging,
) -> Result<MatchingReport> {
    let gold = ann.spans_by_sentence();
    let mut pred: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for r in matched.matches.values() {
        pred.entry(r.span.sent_index).or_default().push((r.span.start, r.span.end));
    }
    let (gt, pt, gs, ps) = sentence_views(t, &gold, &pred)?;
    let right = ann
        .phrases
        .iter()
        .filter(|(id, g)| matched.matches.get(*id).map(|m| m.span) == **g)
        .count();
    Ok(MatchingReport {
        token: token_metrics_with(&gt, &pt, averaging)?,
        mention: mention_metrics(&gs, &ps)?,
        phrase_accuracy: ratio(right, ann.phrases.len()),
        phrases: ann.phrases.len(),
    })
}

/// `mean ± std` with the given number of decimals.
pub fn format_mean_std(values: &[f64], decimals: usize) -> String {
    match aggregate_runs(values) {
        Ok((m, s)) => format!("{m:.decimals$} ± {s:.decimals$}"),
        Err(_) => "-".into(),
    }
}

/// Plain-text table with columns padded to equal width.
pub fn format_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let cols = headers.len();
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        padded.join(" | ").trim_end().to_string()
    };
    let mut out = line(headers.to_vec());
    out.push('\n');
    out.push_str(&widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().join("-+-"));
    out.push('\n');
    for r in rows {
        let cells: Vec<&str> = (0..cols).map(|i| r.get(i).map(String::as_str).unwrap_or("")).collect();
        out.push_str(&line(cells));
        out.push('\n');
    }
    out
}
