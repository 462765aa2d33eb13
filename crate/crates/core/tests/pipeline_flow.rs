use std::collections::BTreeMap;

use procex::corpus::{load_transcript, Transcript};
use procex::crf::{crf_train, CrfHyper};
use procex::dataset::{build_pair_dataset, build_seq_dataset, sample_labels, split_documents, SamplingPortion};
use procex::embeddings::load_embeddings;
use procex::eval::{load_annotation, mention_metrics, sentence_views};
use procex::fixtures::{generate, FixtureConfig, FixtureFamily};
use procex::matcher::{match_protocol, MatchedGraph, MatcherConfig};
use procex::pipeline::{assemble, export_graph, run_extract, run_relate, GraphFormat, KnowledgeGraph};
use procex::protocol::{parse_protocol_str, validate_graph, RelationLabel};
use procex::relation::{re_train, PoolingMode, ReConfig, ReHyper};
use procex::{Crf, Embeddings, ReClassifier};

struct Doc {
    id: String,
    transcript: Transcript,
    matched: MatchedGraph<f64>,
}

struct Trained {
    docs: Vec<Doc>,
    test: Vec<String>,
    emb: Embeddings,
    crf: Crf,
    re: ReClassifier,
}

fn train(seed: u64) -> Trained {
    let corpus = generate(&FixtureConfig {
        family: FixtureFamily::Separable,
        docs: 20,
        seed,
    })
    .unwrap();
    let emb: Embeddings = load_embeddings(corpus.embeddings.as_bytes()).unwrap();
    let cfg = MatcherConfig::default();
    let docs: Vec<Doc> = corpus
        .docs
        .iter()
        .map(|d| {
            let transcript = load_transcript(d.id.clone(), d.transcript.as_bytes()).unwrap();
            let graph = parse_protocol_str(&d.protocol).unwrap();
            assert!(validate_graph(&graph).is_empty());
            let (matched, _) = match_protocol(&graph, &transcript, &cfg, &emb).unwrap();
            Doc {
                id: d.id.clone(),
                transcript,
                matched,
            }
        })
        .collect();
    let ids: Vec<String> = docs.iter().map(|d| d.id.clone()).collect();
    let split = split_documents(&ids, seed);
    let mut seq = Vec::new();
    let mut pairs = Vec::new();
    for d in docs.iter().filter(|d| split.train.contains(&d.id)) {
        seq.extend(build_seq_dataset(&d.matched, &d.transcript).unwrap());
        pairs.extend(build_pair_dataset(&d.matched, &d.transcript, 2).unwrap().0);
    }
    let pairs = sample_labels(&pairs, SamplingPortion::new(4, 2, 1).unwrap(), seed);
    let (crf, _) = crf_train::<f64>(&seq, &CrfHyper::default()).unwrap();
    let re_cfg = ReConfig {
        pooling: PoolingMode::MaskedAvg,
        ..ReConfig::default()
    };
    let (re, _) = re_train::<f64>(&pairs, &emb, &re_cfg, &ReHyper::default()).unwrap();
    Trained {
        docs,
        test: split.test,
        emb,
        crf,
        re,
    }
}

fn graphs(t: &Trained) -> Vec<KnowledgeGraph> {
    t.docs
        .iter()
        .filter(|d| t.test.contains(&d.id))
        .map(|d| {
            let spans = run_extract(&d.transcript, &t.crf);
            let preds = run_relate(&spans, &d.transcript, &t.re, &t.emb, None).unwrap();
            assert_eq!(preds.len(), spans.len() * spans.len().saturating_sub(1));
            assemble(&d.transcript, &spans, &preds).unwrap()
        })
        .collect()
}

#[test]
fn extraction_recovers_planted_spans() {
    let t = train(13);
    let mut gold_all = Vec::new();
    let mut pred_all = Vec::new();
    for (d, g) in t.docs.iter().filter(|d| t.test.contains(&d.id)).zip(graphs(&t)) {
        let gold_map: BTreeMap<usize, Vec<(usize, usize)>> = d
            .matched
            .matches
            .values()
            .fold(BTreeMap::new(), |mut m, r| {
                m.entry(r.span.sent_index).or_insert_with(Vec::new).push((r.span.start, r.span.end));
                m
            });
        let pred_map = g.nodes.iter().fold(BTreeMap::new(), |mut m, n| {
            m.entry(n.span.sent_index).or_insert_with(Vec::new).push((n.span.start, n.span.end));
            m
        });
        let (_, _, gs, ps) = sentence_views(&d.transcript, &gold_map, &pred_map).unwrap();
        gold_all.extend(gs);
        pred_all.extend(ps);
    }
    let m = mention_metrics(&gold_all, &pred_all).unwrap();
    assert!(m.f1 >= 0.95, "mention F1 {}", m.f1);
}

#[test]
fn graphs_respect_invariants() {
    let t = train(13);
    for g in graphs(&t) {
        assert!(!g.nodes.is_empty());
        for (i, n) in g.nodes.iter().enumerate() {
            assert_eq!(n.id, i);
        }
        for e in &g.edges {
            assert_ne!(e.label, RelationLabel::None);
            assert!(e.src < g.nodes.len() && e.dst < g.nodes.len());
            assert!(!g.edges.iter().any(|o| o.src == e.dst && o.dst == e.src));
        }
    }
}

#[test]
fn pipeline_is_deterministic() {
    let a: Vec<String> = graphs(&train(5))
        .iter()
        .map(|g| export_graph(g, GraphFormat::Dot).unwrap())
        .collect();
    let b: Vec<String> = graphs(&train(5))
        .iter()
        .map(|g| export_graph(g, GraphFormat::Dot).unwrap())
        .collect();
    assert_eq!(a, b);
}

#[test]
fn fixture_files_load_through_public_readers() {
    let corpus = generate(&FixtureConfig::default()).unwrap();
    for d in &corpus.docs {
        let ann = load_annotation(d.annotation_jsonl().as_bytes()).unwrap();
        assert_eq!(ann, d.annotation);
        let t = load_transcript(d.id.clone(), d.transcript.as_bytes()).unwrap();
        assert_eq!(t.render(), d.transcript);
        for s in ann.phrases.values().flatten() {
            s.validate(&t).unwrap();
        }
    }
}
