use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use procex::corpus::{TextSpan, Transcript};
use procex::crf::crf_train;
use procex::dataset::{
    build_pair_dataset, build_seq_dataset, label_counts, sample_labels, split_documents, DatasetManifest, PairExample,
    SamplingPortion, SeqExample,
};
use procex::eval::{
    format_mean_std, format_table, mention_metrics, relation_metrics, sentence_views, token_metrics, ManualAnnotation,
    MentionMetrics, RelationMetrics, TokenMetrics,
};
use procex::fixtures::{generate, gold_pair_label, FixtureConfig, FixtureFamily};
use procex::matcher::{match_protocol, match_protocol_exact, report_row, MatchedGraph};
use procex::pipeline::{assemble as assemble_graph, export_graph, run_extract, run_relate, GraphFormat, PairPrediction, PipelineConfig};
use procex::protocol::{self, validate_graph, ProtocolGraph, RelationLabel};
use procex::relation::{re_predict, re_train, PoolingMode, ReConfig, ReHyper};
use procex::rules::{parse_rules, rule_spans};
use procex::{Crf, Embeddings, ReClassifier};

use crate::workspace::{read_json, read_jsonl, read_text, write_atomic, write_json, write_jsonl, Workspace};
use crate::{FormatArg, MethodArg};

/// A check that ran to completion and did not hold.
#[derive(Debug, thiserror::Error)]
#[error("validation failed: {0}")]
pub struct ValidationFailed(pub String);

const PARTS: [&str; 3] = ["train", "dev", "test"];

pub fn make_fixtures(ws: &Workspace, cfg: &PipelineConfig, family: FixtureFamily, docs: usize) -> Result<()> {
    let corpus = generate(&FixtureConfig {
        family,
        docs,
        seed: cfg.seed,
    })?;
    for d in &corpus.docs {
        write_atomic(&ws.transcript_path(&d.id), d.transcript.as_bytes())?;
        write_atomic(&ws.protocol_path(&d.id), d.protocol.as_bytes())?;
        write_atomic(&ws.annotation_path(&d.id), d.annotation_jsonl().as_bytes())?;
    }
    write_atomic(&ws.embeddings_path(), corpus.embeddings.as_bytes())?;
    write_atomic(&ws.rules_path(), corpus.rules.as_bytes())?;
    info!("wrote {} fixture documents to {}", corpus.docs.len(), ws.root.display());
    Ok(())
}

fn parse_and_check(path: &Path) -> Result<(ProtocolGraph, Vec<String>)> {
    let f = fs::File::open(path)
        .map_err(procex::Error::from)
        .with_context(|| format!("opening {}", path.display()))?;
    let g = protocol::parse_protocol(f).with_context(|| format!("parsing {}", path.display()))?;
    let mut errors = Vec::new();
    for d in validate_graph(&g) {
        if d.is_warning() {
            warn!("{}: {d}", path.display());
        } else {
            errors.push(format!("{}: {d}", path.display()));
        }
    }
    Ok((g, errors))
}

pub fn parse_protocol(ws: &Workspace, input: Option<&Path>) -> Result<()> {
    if let Some(path) = input {
        let (g, errors) = parse_and_check(path)?;
        if !errors.is_empty() {
            return Err(ValidationFailed(errors.join("; ")).into());
        }
        println!("{}", g.to_canonical_json());
        return Ok(());
    }
    let mut errors = Vec::new();
    for id in ws.doc_ids()? {
        let (g, errs) = parse_and_check(&ws.protocol_path(&id))?;
        errors.extend(errs);
        write_atomic(&ws.graph_path(&id), (g.to_canonical_json() + "\n").as_bytes())?;
    }
    if !errors.is_empty() {
        return Err(ValidationFailed(errors.join("; ")).into());
    }
    Ok(())
}

pub fn match_docs(ws: &Workspace, cfg: &PipelineConfig, method: MethodArg) -> Result<()> {
    let emb = match method {
        MethodArg::Fuzzy => Some(ws.embeddings()?),
        MethodArg::Exact => None,
    };
    for id in ws.doc_ids()? {
        let g = ws.graph(&id)?;
        let t = ws.transcript(&id)?;
        let (matched, outcomes) = match &emb {
            Some(emb) => match_protocol(&g, &t, &cfg.matcher, emb)?,
            None => match_protocol_exact(&g, &t, &cfg.matcher),
        };
        let rows: Vec<_> = g.phrases.iter().zip(&outcomes).map(|(p, o)| report_row(p, o, &t)).collect();
        info!("{id}: {} of {} phrases matched", matched.matches.len(), g.phrases.len());
        write_json(&ws.match_path(&id), &matched)?;
        write_jsonl(&ws.match_report_path(&id), &rows)?;
    }
    Ok(())
}

pub fn gen_datasets(ws: &Workspace, cfg: &PipelineConfig) -> Result<()> {
    let ids = ws.doc_ids()?;
    let split = split_documents(&ids, cfg.seed);
    let mut seq: BTreeMap<&str, Vec<SeqExample>> = BTreeMap::new();
    let mut pairs: BTreeMap<&str, Vec<PairExample>> = BTreeMap::new();
    let mut dropped_edges = 0;
    for id in &ids {
        let Some(part) = split.part_of(id) else { continue };
        let m = ws.matched(id)?;
        let t = ws.transcript(id)?;
        seq.entry(part).or_default().extend(build_seq_dataset(&m, &t)?);
        let (p, stats) = build_pair_dataset(&m, &t, cfg.k)?;
        dropped_edges += stats.dropped_edges;
        pairs.entry(part).or_default().extend(p);
    }
    let mut before = Vec::new();
    let mut after = Vec::new();
    for (i, part) in PARTS.iter().enumerate() {
        let s = seq.remove(part).unwrap_or_default();
        let p = pairs.remove(part).unwrap_or_default();
        let sampled = sample_labels(&p, cfg.portion, cfg.seed.wrapping_add(i as u64));
        before.extend(p.iter().map(|x| x.label));
        after.extend(sampled.iter().map(|x| x.label));
        write_jsonl(&ws.dataset_path(&format!("{part}.seq.jsonl")), &s)?;
        write_jsonl(&ws.dataset_path(&format!("{part}.pairs.jsonl")), &sampled)?;
        seq.insert(part, s);
    }
    let manifest = DatasetManifest {
        seed: cfg.seed,
        k: cfg.k,
        portion: cfg.portion.to_string(),
        documents: ids.len(),
        seq_examples: seq.values().map(Vec::len).sum(),
        seq_sentences_with_spans: seq
            .values()
            .flatten()
            .filter(|e| e.tags.iter().any(|t| !t.is_outside()))
            .count(),
        pairs_before_sampling: label_counts(&before),
        pairs_after_sampling: label_counts(&after),
        dropped_edges,
        split,
    };
    write_json(&ws.manifest_path(), &manifest)
}

pub fn train_seq(ws: &Workspace, cfg: &PipelineConfig) -> Result<()> {
    let data: Vec<SeqExample> = read_jsonl(&ws.dataset_path("train.seq.jsonl"))?;
    let (model, trace) = crf_train::<f64>(&data, &cfg.crf)?;
    info!("crf trained: final loss {:.4}", trace.last().copied().unwrap_or(f64::NAN));
    write_atomic(&ws.model_path("crf.json"), (model.save_json()? + "\n").as_bytes())?;
    write_json(&ws.model_path("crf.trace.json"), &trace)
}

pub fn train_re(ws: &Workspace, cfg: &PipelineConfig) -> Result<()> {
    let manifest = ws.manifest()?;
    let data: Vec<PairExample> = read_jsonl(&ws.dataset_path("train.pairs.jsonl"))?;
    let emb = ws.embeddings()?;
    let re_cfg = ReConfig {
        k: manifest.k,
        ..cfg.re_config()
    };
    let (model, trace) = re_train::<f64>(&data, &emb, &re_cfg, &cfg.re)?;
    info!("relation model trained: final loss {:.4}", trace.last().copied().unwrap_or(f64::NAN));
    write_atomic(&ws.model_path("re.json"), (model.save_json()? + "\n").as_bytes())?;
    write_json(&ws.model_path("re.trace.json"), &trace)
}

/// One line of a predicted-pairs file.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct PairRow {
    #[serde(flatten)]
    prediction: PairPrediction,
    u_span: TextSpan,
    v_span: TextSpan,
}

fn load_crf(ws: &Workspace) -> Result<Crf> {
    let path = ws.model_path("crf.json");
    Crf::load_json(&read_text(&path)?).with_context(|| format!("loading {}", path.display()))
}

fn load_re(ws: &Workspace) -> Result<ReClassifier> {
    let path = ws.model_path("re.json");
    ReClassifier::load_json(&read_text(&path)?).with_context(|| format!("loading {}", path.display()))
}

pub fn predict(ws: &Workspace, all: bool, max_distance: Option<usize>) -> Result<()> {
    let ids = if all { ws.doc_ids()? } else { ws.manifest()?.split.test };
    let crf = load_crf(ws)?;
    let re = load_re(ws)?;
    let emb = ws.embeddings()?;
    for id in ids {
        let t = ws.transcript(&id)?;
        let spans = run_extract(&t, &crf);
        let preds = run_relate(&spans, &t, &re, &emb, max_distance)?;
        let rows: Vec<PairRow> = preds
            .into_iter()
            .map(|p| PairRow {
                u_span: spans[p.i],
                v_span: spans[p.j],
                prediction: p,
            })
            .collect();
        info!("{id}: {} spans, {} pairs", spans.len(), rows.len());
        write_json(&ws.spans_path(&id), &spans)?;
        write_jsonl(&ws.pairs_path(&id), &rows)?;
    }
    Ok(())
}

fn predicted_docs(ws: &Workspace) -> Result<Vec<String>> {
    Ok(ws
        .doc_ids()?
        .into_iter()
        .filter(|id| ws.spans_path(id).exists())
        .collect())
}

fn load_predictions(ws: &Workspace, id: &str) -> Result<(Vec<TextSpan>, Vec<PairPrediction>)> {
    let spans: Vec<TextSpan> = read_json(&ws.spans_path(id))?;
    let rows: Vec<PairRow> = read_jsonl(&ws.pairs_path(id))?;
    for r in &rows {
        let p = &r.prediction;
        if spans.get(p.i) != Some(&r.u_span) || spans.get(p.j) != Some(&r.v_span) {
            return Err(procex::Error::Data(format!("{id}: pair ({}, {}) does not match the span list", p.i, p.j)).into());
        }
    }
    Ok((spans, rows.into_iter().map(|r| r.prediction).collect()))
}

pub fn assemble(ws: &Workspace, format: FormatArg) -> Result<()> {
    let formats: &[GraphFormat] = match format {
        FormatArg::Dot => &[GraphFormat::Dot],
        FormatArg::Json => &[GraphFormat::Json],
        FormatArg::Both => &[GraphFormat::Dot, GraphFormat::Json],
    };
    let ids = predicted_docs(ws)?;
    if ids.is_empty() {
        return Err(procex::Error::Data("no predictions to assemble; run predict first".into()).into());
    }
    for id in ids {
        let t = ws.transcript(&id)?;
        let (spans, preds) = load_predictions(ws, &id)?;
        let g = assemble_graph(&t, &spans, &preds)?;
        info!("{id}: {} nodes, {} edges", g.nodes.len(), g.edges.len());
        for &f in formats {
            let ext = match f {
                GraphFormat::Dot => "dot",
                GraphFormat::Json => "json",
            };
            write_atomic(&ws.output_path(&id, ext), export_graph(&g, f)?.as_bytes())?;
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpanScores {
    pub token: TokenMetrics,
    pub mention: MentionMetrics,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatchingScores {
    pub documents: usize,
    pub phrases: usize,
    pub phrase_accuracy: f64,
    #[serde(flatten)]
    pub spans: SpanScores,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub matching: Option<MatchingScores>,
    pub extraction: Option<SpanScores>,
    pub rule_baseline: Option<SpanScores>,
    pub end_to_end: Option<RelationMetrics>,
    pub re_test_pairs: Option<RelationMetrics>,
}

type SpanMap = BTreeMap<usize, Vec<(usize, usize)>>;

/// Concatenated per-sentence views of several documents.
#[derive(Default)]
struct Views {
    gold_tags: Vec<Vec<procex::iobes::Tag>>,
    pred_tags: Vec<Vec<procex::iobes::Tag>>,
    gold_spans: Vec<Vec<(usize, usize)>>,
    pred_spans: Vec<Vec<(usize, usize)>>,
}

impl Views {
    fn add(&mut self, t: &Transcript, gold: &SpanMap, pred: &SpanMap) -> Result<()> {
        let (gt, pt, gs, ps) = sentence_views(t, gold, pred)?;
        self.gold_tags.extend(gt);
        self.pred_tags.extend(pt);
        self.gold_spans.extend(gs);
        self.pred_spans.extend(ps);
        Ok(())
    }

    fn scores(&self) -> Result<SpanScores> {
        Ok(SpanScores {
            token: token_metrics(&self.gold_tags, &self.pred_tags)?,
            mention: mention_metrics(&self.gold_spans, &self.pred_spans)?,
        })
    }
}

fn span_map(spans: impl IntoIterator<Item = TextSpan>) -> SpanMap {
    let mut out = SpanMap::new();
    for s in spans {
        out.entry(s.sent_index).or_default().push((s.start, s.end));
    }
    out
}

/// Every sentence of `t`, so that extraction is scored over whole documents.
fn all_sentences(t: &Transcript, mut m: SpanMap) -> SpanMap {
    for i in 0..t.len() {
        m.entry(i).or_default();
    }
    m
}

fn evaluate_matching_all(ws: &Workspace, ids: &[String]) -> Result<Option<MatchingScores>> {
    let mut views = Views::default();
    let (mut docs, mut phrases, mut right) = (0, 0, 0);
    for id in ids {
        let Some(ann) = ws.annotation(id)? else { continue };
        if !ws.match_path(id).exists() {
            continue;
        }
        let m: MatchedGraph<f64> = ws.matched(id)?;
        let t = ws.transcript(id)?;
        views.add(&t, &ann.spans_by_sentence(), &span_map(m.matches.values().map(|r| r.span)))?;
        docs += 1;
        phrases += ann.phrases.len();
        right += ann
            .phrases
            .iter()
            .filter(|(id, g)| m.matches.get(*id).map(|r| r.span) == **g)
            .count();
    }
    if docs == 0 {
        return Ok(None);
    }
    Ok(Some(MatchingScores {
        documents: docs,
        phrases,
        phrase_accuracy: if phrases == 0 { 0.0 } else { right as f64 / phrases as f64 },
        spans: views.scores()?,
    }))
}

/// Gold labels for predicted pairs: a pair is labeled only when both spans are exactly a
/// gold phrase span. Gold relations whose spans were not both extracted count as missed.
fn end_to_end_labels(
    ann: &ManualAnnotation,
    spans: &[TextSpan],
    preds: &[PairPrediction],
) -> (Vec<RelationLabel>, Vec<RelationLabel>) {
    let phrase_of: BTreeMap<TextSpan, &str> = ann
        .phrases
        .iter()
        .filter_map(|(id, s)| s.map(|s| (s, id.as_str())))
        .collect();
    let mut gold = Vec::new();
    let mut pred = Vec::new();
    let mut covered = std::collections::BTreeSet::new();
    for p in preds {
        let g = match (phrase_of.get(&spans[p.i]), phrase_of.get(&spans[p.j])) {
            (Some(u), Some(v)) => {
                covered.insert((u.to_string(), v.to_string()));
                gold_pair_label(ann, u, v)
            }
            _ => RelationLabel::None,
        };
        gold.push(g);
        pred.push(p.label);
    }
    for ((u, v), &l) in &ann.pairs {
        if l != RelationLabel::None && !covered.contains(&(u.clone(), v.clone())) {
            gold.push(l);
            pred.push(RelationLabel::None);
        }
    }
    (gold, pred)
}

pub fn evaluate(ws: &Workspace) -> Result<()> {
    let ids = ws.doc_ids()?;
    let mut report = EvalReport {
        matching: evaluate_matching_all(ws, &ids)?,
        ..EvalReport::default()
    };

    let rules = if ws.rules_path().exists() {
        Some(parse_rules(&read_text(&ws.rules_path())?)?)
    } else {
        None
    };
    let mut crf_views = Views::default();
    let mut rule_views = Views::default();
    let (mut gold_rel, mut pred_rel) = (Vec::new(), Vec::new());
    let mut extracted = 0;
    for id in predicted_docs(ws)? {
        let Some(ann) = ws.annotation(&id)? else { continue };
        let t = ws.transcript(&id)?;
        let (spans, preds) = load_predictions(ws, &id)?;
        let gold = all_sentences(&t, ann.spans_by_sentence());
        crf_views.add(&t, &gold, &span_map(spans.iter().copied()))?;
        if let Some(rules) = &rules {
            let found = t.lines().iter().flat_map(|l| {
                rule_spans(rules, &l.tokens)
                    .into_iter()
                    .map(move |(s, e)| TextSpan::new(l.sent_index, s, e))
            });
            rule_views.add(&t, &gold, &span_map(found))?;
        }
        let (g, p) = end_to_end_labels(&ann, &spans, &preds);
        gold_rel.extend(g);
        pred_rel.extend(p);
        extracted += 1;
    }
    if extracted > 0 {
        report.extraction = Some(crf_views.scores()?);
        if rules.is_some() {
            report.rule_baseline = Some(rule_views.scores()?);
        }
        report.end_to_end = Some(relation_metrics(&gold_rel, &pred_rel)?);
    }

    let test_pairs = ws.dataset_path("test.pairs.jsonl");
    if test_pairs.exists() && ws.model_path("re.json").exists() {
        let re = load_re(ws)?;
        let emb = ws.embeddings()?;
        let pairs: Vec<PairExample> = read_jsonl(&test_pairs)?;
        let gold: Vec<RelationLabel> = pairs.iter().map(|p| p.label).collect();
        let pred: Vec<RelationLabel> = pairs.iter().map(|p| re_predict(&re, &emb, p).0).collect();
        report.re_test_pairs = Some(relation_metrics(&gold, &pred)?);
    }

    let text = render_eval(&report);
    print!("{text}");
    write_json(&ws.report_path("eval.json"), &report)?;
    write_atomic(&ws.report_path("eval.txt"), text.as_bytes())
}

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

fn render_eval(r: &EvalReport) -> String {
    let mut out = String::new();
    let mut span_rows = Vec::new();
    let mut push_span = |name: &str, s: &SpanScores| {
        span_rows.push(vec![
            name.to_string(),
            pct(s.token.accuracy),
            pct(s.token.f1),
            pct(s.mention.precision),
            pct(s.mention.recall),
            pct(s.mention.f1),
            pct(s.mention.overlap_f1),
        ]);
    };
    if let Some(m) = &r.matching {
        push_span("matching", &m.spans);
    }
    if let Some(s) = &r.extraction {
        push_span("crf", s);
    }
    if let Some(s) = &r.rule_baseline {
        push_span("rules", s);
    }
    if !span_rows.is_empty() {
        out.push_str(&format_table(
            &["Spans", "Token acc", "Token F1", "Mention P", "Mention R", "Mention F1", "Overlap F1"],
            &span_rows,
        ));
        out.push('\n');
    }
    if let Some(m) = &r.matching {
        let _ = writeln!(out, "matching phrase accuracy: {} over {} phrases\n", pct(m.phrase_accuracy), m.phrases);
    }
    let mut rel_rows = Vec::new();
    for (name, m) in [("end-to-end", &r.end_to_end), ("test pairs", &r.re_test_pairs)] {
        if let Some(m) = m {
            rel_rows.push(vec![
                name.to_string(),
                pct(m.accuracy),
                pct(m.micro_f1),
                pct(m.next_f1),
                pct(m.if_f1),
            ]);
        }
    }
    if !rel_rows.is_empty() {
        out.push_str(&format_table(&["Relations", "Accuracy", "Micro F1", "<next> F1", "<if> F1"], &rel_rows));
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRun {
    pub seed: u64,
    pub accuracy: f64,
    pub micro_f1: f64,
    pub next_f1: f64,
    pub if_f1: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepCell {
    pub pooling: PoolingMode,
    pub k: usize,
    pub portion: String,
    pub runs: Vec<SweepRun>,
}

impl SweepCell {
    fn values(&self, f: impl Fn(&SweepRun) -> f64) -> Vec<f64> {
        self.runs.iter().map(|r| 100.0 * f(r)).collect()
    }

    pub fn mean_micro_f1(&self) -> f64 {
        let v = self.values(|r| r.micro_f1);
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub fn sweep(
    ws: &Workspace,
    cfg: &PipelineConfig,
    ks: &[usize],
    portions: &[String],
    pooling: &str,
    check: bool,
) -> Result<()> {
    let pooling: PoolingMode = pooling.parse()?;
    let portions: Vec<SamplingPortion> = portions.iter().map(|p| p.parse()).collect::<procex::Result<_>>()?;
    let ids = ws.doc_ids()?;
    let split = split_documents(&ids, cfg.seed);
    let emb: Embeddings = ws.embeddings()?;
    let docs: Vec<(String, MatchedGraph<f64>, Transcript)> = ids
        .iter()
        .map(|id| Ok((id.clone(), ws.matched(id)?, ws.transcript(id)?)))
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    for &k in ks {
        let mut train_all = Vec::new();
        let mut test_all = Vec::new();
        for (id, m, t) in &docs {
            let (pairs, _) = build_pair_dataset(m, t, k)?;
            match split.part_of(id) {
                Some("train") => train_all.extend(pairs),
                Some("test") => test_all.extend(pairs),
                _ => {}
            }
        }
        let re_cfg = ReConfig {
            pooling,
            k,
            ..cfg.re_config()
        };
        for &portion in &portions {
            let mut runs = Vec::new();
            for r in 0..cfg.runs as u64 {
                let seed = cfg.seed.wrapping_add(r);
                let train = sample_labels(&train_all, portion, seed);
                let test = sample_labels(&test_all, portion, seed);
                let hyper = ReHyper { seed, ..cfg.re.clone() };
                let (model, _) = re_train::<f64>(&train, &emb, &re_cfg, &hyper)?;
                let gold: Vec<RelationLabel> = test.iter().map(|p| p.label).collect();
                let pred: Vec<RelationLabel> = test.iter().map(|p| re_predict(&model, &emb, p).0).collect();
                let m = relation_metrics(&gold, &pred)?;
                runs.push(SweepRun {
                    seed,
                    accuracy: m.accuracy,
                    micro_f1: m.micro_f1,
                    next_f1: m.next_f1,
                    if_f1: m.if_f1,
                });
            }
            let cell = SweepCell {
                pooling,
                k,
                portion: portion.to_string(),
                runs,
            };
            info!("K={k} portion={portion}: micro-F1 {:.2}", cell.mean_micro_f1());
            cells.push(cell);
        }
    }

    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            vec![
                c.pooling.to_string(),
                c.k.to_string(),
                c.portion.clone(),
                format_mean_std(&c.values(|r| r.accuracy), 2),
                format_mean_std(&c.values(|r| r.micro_f1), 2),
                format_mean_std(&c.values(|r| r.next_f1), 2),
                format_mean_std(&c.values(|r| r.if_f1), 2),
            ]
        })
        .collect();
    let table = format_table(
        &["Pooling", "K", "Portion", "Accuracy", "Micro F1", "<next> F1", "<if> F1"],
        &rows,
    );
    print!("{table}");
    write_json(&ws.report_path("sweep.json"), &cells)?;
    write_atomic(&ws.report_path("sweep.txt"), table.as_bytes())?;

    if check {
        let cell = |k: usize| {
            cells
                .iter()
                .find(|c| c.k == k && c.portion == "4:2:1")
                .ok_or_else(|| procex::Error::Argument(format!("--check needs K={k} with portion 4:2:1 in the grid")))
        };
        let (k0, k2) = (cell(0)?.mean_micro_f1(), cell(2)?.mean_micro_f1());
        if !(k2 > k0) {
            return Err(ValidationFailed(format!("K=2 micro-F1 {k2:.2} does not exceed K=0 micro-F1 {k0:.2}")).into());
        }
        info!("check passed: K=2 {k2:.2} > K=0 {k0:.2}");
    }
    Ok(())
}
