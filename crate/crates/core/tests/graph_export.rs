use std::collections::BTreeSet;

use dot_parser::{ast, canonical};
use procex::corpus::{TextSpan, Transcript};
use procex::pipeline::{assemble, export_graph, GraphFormat, KnowledgeGraph, PairPrediction};
use procex::protocol::RelationLabel;

fn transcript() -> Transcript {
    let lines = [
        "insert the \"wire\" now",
        "if flow stops",
        "withdraw the needle",
        "redirect the needle",
        "secure the hub",
    ];
    Transcript::from_lines(
        "doc",
        lines.iter().enumerate().map(|(i, l)| {
            (
                i as u32 + 1,
                "S".to_string(),
                l.split_whitespace().map(String::from).collect(),
            )
        }),
    )
    .unwrap()
}

fn pred(i: usize, j: usize, label: RelationLabel, score: f64) -> PairPrediction {
    let mut scores = [0.0; 3];
    scores[label.index()] = score;
    PairPrediction {
        i,
        j,
        label,
        score,
        scores,
    }
}

fn sample_graph() -> KnowledgeGraph {
    let t = transcript();
    let spans: Vec<TextSpan> = vec![
        TextSpan::new(0, 0, 3),
        TextSpan::new(1, 0, 3),
        TextSpan::new(2, 0, 3),
        TextSpan::new(3, 0, 3),
        TextSpan::new(4, 0, 3),
    ];
    let mut preds = Vec::new();
    for i in 0..spans.len() {
        for j in 0..spans.len() {
            if i != j {
                preds.push(pred(i, j, RelationLabel::None, 0.9));
            }
        }
    }
    let set = |preds: &mut Vec<PairPrediction>, i, j, l, s| {
        let p = preds.iter_mut().find(|p| p.i == i && p.j == j).unwrap();
        *p = pred(i, j, l, s);
    };
    set(&mut preds, 0, 1, RelationLabel::Next, 0.8);
    set(&mut preds, 1, 2, RelationLabel::If, 0.7);
    set(&mut preds, 1, 3, RelationLabel::If, 0.75);
    set(&mut preds, 3, 4, RelationLabel::Next, 0.6);
    assemble(&t, &spans, &preds).unwrap()
}

fn unquote(s: &str) -> String {
    let inner = s.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(s);
    inner.replace("\\\"", "\"").replace("\\\\", "\\")
}

#[test]
fn dot_reparses_to_the_json_graph() {
    let g = sample_graph();
    let dot = export_graph(&g, GraphFormat::Dot).unwrap();
    let json = export_graph(&g, GraphFormat::Json).unwrap();
    let back: KnowledgeGraph = serde_json::from_str(&json).unwrap();
    assert_eq!(back, g);

    let parsed = canonical::Graph::from(ast::Graph::try_from(dot.as_str()).unwrap());
    assert!(parsed.is_digraph);
    let nodes: BTreeSet<(String, String)> = parsed
        .nodes
        .set
        .values()
        .map(|n| {
            let label = n
                .attr
                .elems
                .iter()
                .find(|(k, _)| k.to_string() == "label")
                .map(|(_, v)| unquote(&v.to_string()))
                .unwrap();
            (n.id.clone(), label)
        })
        .collect();
    let expected: BTreeSet<(String, String)> = back.nodes.iter().map(|n| (format!("n{}", n.id), n.text.clone())).collect();
    assert_eq!(nodes, expected);

    let edges: BTreeSet<(String, String, String)> = parsed
        .edges
        .set
        .iter()
        .map(|e| {
            let label = e.attr.elems.iter().find(|(k, _)| k.to_string() == "label").unwrap().1.to_string();
            (e.from.clone(), e.to.clone(), unquote(&label))
        })
        .collect();
    let expected: BTreeSet<(String, String, String)> = back
        .edges
        .iter()
        .map(|e| (format!("n{}", e.src), format!("n{}", e.dst), e.label.to_string()))
        .collect();
    assert_eq!(edges, expected);
}

#[test]
fn branch_has_two_if_out_edges() {
    let g = sample_graph();
    let ifs: Vec<usize> = g
        .edges
        .iter()
        .filter(|e| e.src == 1 && e.label == RelationLabel::If)
        .map(|e| e.dst)
        .collect();
    assert_eq!(ifs, vec![2, 3]);
    assert_eq!(g.nodes.len(), 5);
}

#[test]
fn empty_graph_is_a_valid_digraph() {
    let g = KnowledgeGraph {
        doc: "empty".into(),
        ..KnowledgeGraph::default()
    };
    let dot = export_graph(&g, GraphFormat::Dot).unwrap();
    assert_eq!(dot.split_whitespace().collect::<Vec<_>>(), ["digraph", "G", "{", "}"]);
    let parsed = canonical::Graph::from(ast::Graph::try_from(dot.as_str()).unwrap());
    assert!(parsed.nodes.set.is_empty() && parsed.edges.set.is_empty());
}
