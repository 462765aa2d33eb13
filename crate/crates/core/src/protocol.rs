//! Protocol parsing into a phrase graph.
//!
//! # Grammar
//!
//! ```text
//! 1. prep the patient (lines 8-9)
//! 2. pass wire (line 14)
//! 3. if resistance is felt (line 20):
//!   3a. remove the wire (line 21)
//!   3b. advance (line 22)
//! 4. leave wire in place
//! ```
//!
//! * Top-level steps carry numeric ids (`1.`). Sub-steps are indented two spaces per
//!   level and their id extends the parent id (`3a.` under `3.`).
//! * A trailing `(line a)` or `(lines a-b)` gives the transcript source lines.
//!   Other parenthesized text is part of the phrase.
//! * A step whose text starts with `if ` and whose line ends with `:` is a condition.
//!   Its children are alternative branches.
//!
//! # Edges
//!
//! * consecutive siblings: `tail(prev) -> next` labeled `next`, where `tail` of a step
//!   with children is the tail of its last child (join after a branch block);
//! * a plain step with children: `step -> first child` labeled `next`;
//! * a condition: `condition -> each branch head` labeled `if`. Branches are not chained.
//!
//! # Automaton
//!
//! The input is consumed one character at a time (`'\n'` included) by a DFA with the
//! states below. `ε` marks "no step characters read yet on this line".
//!
//! | state          | input                 | next           | action                                  |
//! |----------------|-----------------------|----------------|-----------------------------------------|
//! | `ExpectStep`   | `' '` (ε)             | `ExpectStep`   | count indentation                       |
//! | `ExpectStep`   | alphanumeric          | `ExpectStep`   | append to step id                       |
//! | `ExpectStep`   | `'.'` (id read)       | `InStep`       | open step, check level and id           |
//! | `ExpectStep`   | `'\n'` (ε)            | `ExpectStep`   | blank line                              |
//! | `InBranch`     | same as `ExpectStep`  | `InBranch`/`InStep` | the opened step must be one level deeper than the condition |
//! | `InStep`       | `'('`                 | `InAnnotation` | start parenthesized buffer              |
//! | `InStep`       | `'\n'`                | `ExpectStep` or `InBranch` | close step; condition lines lead to `InBranch` |
//! | `InStep`       | other                 | `InStep`       | append to text (only `:`/space after an annotation) |
//! | `InAnnotation` | `')'`                 | `InStep`       | parse `line a`/`lines a-b`, or keep as text |
//! | `InAnnotation` | `'\n'`                | error / `InStep` | unterminated annotation is an error    |
//! | `InAnnotation` | other                 | `InAnnotation` | append to buffer                        |
//!
//! Any other `(state, input)` pair is a parse error naming the line.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::Read;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Procedural relation between two phrases or spans.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationLabel {
    None,
    Next,
    If,
}

impl RelationLabel {
    /// Label order used for weight columns and tie-breaking.
    pub const ALL: [RelationLabel; 3] = [RelationLabel::None, RelationLabel::Next, RelationLabel::If];

    pub fn index(self) -> usize {
        match self {
            RelationLabel::None => 0,
            RelationLabel::Next => 1,
            RelationLabel::If => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RelationLabel::None => "none",
            RelationLabel::Next => "next",
            RelationLabel::If => "if",
        }
    }
}

impl fmt::Display for RelationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RelationLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().trim_matches(|c| c == '<' || c == '>').to_ascii_lowercase().as_str() {
            "none" => Ok(RelationLabel::None),
            "next" => Ok(RelationLabel::Next),
            "if" => Ok(RelationLabel::If),
            other => Err(Error::Argument(format!("unknown relation label '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolPhrase {
    pub id: String,
    pub text: String,
    #[serde(rename = "lines")]
    pub source_lines: BTreeSet<u32>,
}

impl ProtocolPhrase {
    /// Whether the phrase text opens with the condition keyword.
    pub fn is_condition(&self) -> bool {
        starts_with_condition(&self.text)
    }
}

fn starts_with_condition(text: &str) -> bool {
    let lower = text.trim_start().to_ascii_lowercase();
    lower.starts_with("if ")
}

/// Stored edge; serialized as `[src, dst, label]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(String, String, RelationLabel)", into = "(String, String, RelationLabel)")]
pub struct ProtocolEdge {
    pub src: String,
    pub dst: String,
    pub label: RelationLabel,
}

impl From<(String, String, RelationLabel)> for ProtocolEdge {
    fn from((src, dst, label): (String, String, RelationLabel)) -> Self {
        ProtocolEdge { src, dst, label }
    }
}

impl From<ProtocolEdge> for (String, String, RelationLabel) {
    fn from(e: ProtocolEdge) -> Self {
        (e.src, e.dst, e.label)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolGraph {
    pub phrases: Vec<ProtocolPhrase>,
    pub edges: Vec<ProtocolEdge>,
}

impl ProtocolGraph {
    pub fn phrase(&self, id: &str) -> Option<&ProtocolPhrase> {
        self.phrases.iter().find(|p| p.id == id)
    }

    /// Canonical JSON form; identical graphs produce identical bytes.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("protocol graph serializes")
    }

    /// Label of the stored edge `src -> dst`, `None` when absent.
    pub fn label_between(&self, src: &str, dst: &str) -> RelationLabel {
        self.edges
            .iter()
            .find(|e| e.src == src && e.dst == dst)
            .map(|e| e.label)
            .unwrap_or(RelationLabel::None)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum State {
    ExpectStep,
    InStep,
    InAnnotation,
    InBranch,
}

#[derive(Debug)]
struct Node {
    id: String,
    text: String,
    lines: BTreeSet<u32>,
    level: usize,
    condition: bool,
    children: Vec<usize>,
}

/// Per-line scratch state of the automaton.
#[derive(Default)]
struct LineScratch {
    indent: usize,
    id: String,
    text: String,
    annotation: String,
    lines: Option<BTreeSet<u32>>,
    colon_after_annotation: bool,
}

struct Parser {
    state: State,
    line: usize,
    scratch: LineScratch,
    nodes: Vec<Node>,
    roots: Vec<usize>,
    /// Open ancestors, innermost last.
    stack: Vec<usize>,
    ids: HashSet<String>,
    /// Level the next step must sit at while in `InBranch`.
    branch_level: usize,
}

impl Parser {
    fn new() -> Self {
        Parser {
            state: State::ExpectStep,
            line: 1,
            scratch: LineScratch::default(),
            nodes: Vec::new(),
            roots: Vec::new(),
            stack: Vec::new(),
            ids: HashSet::new(),
            branch_level: 0,
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.line, msg)
    }

    fn feed(&mut self, c: char) -> Result<()> {
        self.state = match (self.state, c) {
            (State::ExpectStep | State::InBranch, '\n') if self.scratch.id.is_empty() => {
                self.scratch = LineScratch::default();
                self.line += 1;
                self.state
            }
            (State::ExpectStep | State::InBranch, ' ') if self.scratch.id.is_empty() => {
                self.scratch.indent += 1;
                self.state
            }
            (State::ExpectStep | State::InBranch, '\t') => {
                return Err(self.err("tabs are not allowed for indentation"));
            }
            (State::ExpectStep | State::InBranch, c) if c.is_alphanumeric() => {
                self.scratch.id.push(c);
                self.state
            }
            (State::ExpectStep | State::InBranch, '.') if !self.scratch.id.is_empty() => {
                self.open_step()?;
                State::InStep
            }
            (State::ExpectStep | State::InBranch, c) if !self.scratch.id.is_empty() => {
                return Err(self.err(format!("expected '.' after step id '{}', found {c:?}", self.scratch.id)));
            }
            (State::ExpectStep | State::InBranch, c) => {
                return Err(self.err(format!("expected a step number, found {c:?}")));
            }
            (State::InStep, '(') => {
                if self.scratch.lines.is_some() {
                    return Err(self.err("text after line annotation"));
                }
                self.scratch.annotation.clear();
                State::InAnnotation
            }
            (State::InStep, '\n') => self.close_step()?,
            (State::InStep, c) => {
                if self.scratch.lines.is_some() {
                    if c == ':' && !self.scratch.colon_after_annotation {
                        self.scratch.colon_after_annotation = true;
                    } else if !c.is_whitespace() {
                        return Err(self.err("text after line annotation"));
                    }
                } else {
                    self.scratch.text.push(c);
                }
                State::InStep
            }
            (State::InAnnotation, ')') => {
                let buf = std::mem::take(&mut self.scratch.annotation);
                if is_annotation(&buf) {
                    let lines = parse_annotation(&buf).map_err(|m| self.err(m))?;
                    self.scratch.lines = Some(lines);
                } else {
                    self.scratch.text.push('(');
                    self.scratch.text.push_str(&buf);
                    self.scratch.text.push(')');
                }
                State::InStep
            }
            (State::InAnnotation, '\n') => {
                if is_annotation(&self.scratch.annotation) {
                    return Err(self.err("unterminated line annotation"));
                }
                let buf = std::mem::take(&mut self.scratch.annotation);
                self.scratch.text.push('(');
                self.scratch.text.push_str(&buf);
                self.close_step()?
            }
            (State::InAnnotation, c) => {
                self.scratch.annotation.push(c);
                State::InAnnotation
            }
        };
        Ok(())
    }

    fn open_step(&mut self) -> Result<()> {
        let indent = self.scratch.indent;
        if indent % 2 != 0 {
            return Err(self.err(format!("indentation of {indent} spaces is not a multiple of two")));
        }
        let level = indent / 2;
        let current = self.stack.len();
        if self.state == State::InBranch && level != self.branch_level {
            return Err(self.err("condition step must be followed by at least one indented branch"));
        }
        if level > current {
            return Err(self.err(format!(
                "indentation jumps from level {} to level {level}",
                current.saturating_sub(1)
            )));
        }
        self.stack.truncate(level);
        let id = self.scratch.id.clone();
        match self.stack.last() {
            None => {
                if !id.chars().all(|c| c.is_ascii_digit()) {
                    return Err(self.err(format!("top-level step id '{id}' must be numeric")));
                }
            }
            Some(&parent) => {
                let pid = &self.nodes[parent].id;
                if !(id.len() > pid.len() && id.starts_with(pid.as_str())) {
                    return Err(self.err(format!(
                        "unknown step reference '{id}': sub-step does not extend parent step '{pid}'"
                    )));
                }
            }
        }
        if !self.ids.insert(id.clone()) {
            return Err(self.err(format!("duplicate step id '{id}'")));
        }
        Ok(())
    }

    fn close_step(&mut self) -> Result<State> {
        let scratch = std::mem::take(&mut self.scratch);
        let mut text = scratch.text.trim().to_string();
        let mut colon = scratch.colon_after_annotation;
        if scratch.lines.is_none() {
            if let Some(stripped) = text.strip_suffix(':') {
                text = stripped.trim_end().to_string();
                colon = true;
            }
        } else if let Some(stripped) = text.strip_suffix(':') {
            // "if x: (line 3)" keeps the colon semantics too.
            text = stripped.trim_end().to_string();
            colon = true;
        }
        if text.is_empty() {
            return Err(self.err(format!("step '{}' has no text", scratch.id)));
        }
        let condition = colon && starts_with_condition(&text);
        let level = scratch.indent / 2;
        let idx = self.nodes.len();
        self.nodes.push(Node {
            id: scratch.id,
            text,
            lines: scratch.lines.unwrap_or_default(),
            level,
            condition,
            children: Vec::new(),
        });
        match self.stack.last() {
            Some(&parent) => self.nodes[parent].children.push(idx),
            None => self.roots.push(idx),
        }
        self.stack.push(idx);
        self.line += 1;
        if condition {
            self.branch_level = level + 1;
            Ok(State::InBranch)
        } else {
            Ok(State::ExpectStep)
        }
    }

    fn finish(mut self) -> Result<ProtocolGraph> {
        match self.state {
            State::InStep | State::InAnnotation => self.feed('\n')?,
            State::ExpectStep | State::InBranch if !self.scratch.id.is_empty() => {
                return Err(self.err("step id without '.'"));
            }
            _ => {}
        }
        if self.state == State::InBranch {
            return Err(Error::parse(
                self.line.saturating_sub(1).max(1),
                "condition step must be followed by at least one indented branch",
            ));
        }
        debug_assert!(self.nodes.iter().all(|n| n.level <= self.nodes.len()));
        let mut edges = Vec::new();
        let roots = self.roots.clone();
        link_siblings(&self.nodes, &roots, true, &mut edges);
        Ok(ProtocolGraph {
            phrases: self
                .nodes
                .into_iter()
                .map(|n| ProtocolPhrase {
                    id: n.id,
                    text: n.text,
                    source_lines: n.lines,
                })
                .collect(),
            edges,
        })
    }
}

fn tail(nodes: &[Node], idx: usize) -> usize {
    match nodes[idx].children.last() {
        Some(&last) => tail(nodes, last),
        None => idx,
    }
}

fn link_siblings(nodes: &[Node], siblings: &[usize], chain: bool, edges: &mut Vec<ProtocolEdge>) {
    let edge = |src: usize, dst: usize, label| ProtocolEdge {
        src: nodes[src].id.clone(),
        dst: nodes[dst].id.clone(),
        label,
    };
    for (i, &s) in siblings.iter().enumerate() {
        if chain && i > 0 {
            edges.push(edge(tail(nodes, siblings[i - 1]), s, RelationLabel::Next));
        }
        let node = &nodes[s];
        if node.children.is_empty() {
            continue;
        }
        if node.condition {
            for &c in &node.children {
                edges.push(edge(s, c, RelationLabel::If));
            }
            link_siblings(nodes, &node.children, false, edges);
        } else {
            edges.push(edge(s, node.children[0], RelationLabel::Next));
            link_siblings(nodes, &node.children, true, edges);
        }
    }
}

fn is_annotation(buf: &str) -> bool {
    let lower = buf.trim_start().to_ascii_lowercase();
    lower == "line"
        || lower == "lines"
        || lower.starts_with("line ")
        || lower.starts_with("lines ")
}

fn parse_annotation(buf: &str) -> std::result::Result<BTreeSet<u32>, String> {
    let lower = buf.trim().to_ascii_lowercase();
    let bad = || format!("malformed line annotation '({})'", buf.trim());
    let num = |s: &str| -> std::result::Result<u32, String> {
        let s = s.trim();
        if s.is_empty() || !s.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        s.parse::<u32>().map_err(|_| bad())
    };
    if let Some(rest) = lower.strip_prefix("lines") {
        let (a, b) = rest.split_once('-').ok_or_else(bad)?;
        let (a, b) = (num(a)?, num(b)?);
        if a > b {
            return Err(format!("line range {a}-{b} is reversed"));
        }
        Ok((a..=b).collect())
    } else if let Some(rest) = lower.strip_prefix("line") {
        Ok(std::iter::once(num(rest)?).collect())
    } else {
        Err(bad())
    }
}

/// Parses a protocol document. See the module docs for the grammar.
pub fn parse_protocol_str(source: &str) -> Result<ProtocolGraph> {
    let mut parser = Parser::new();
    for c in source.chars() {
        if c == '\r' {
            continue;
        }
        parser.feed(c)?;
    }
    parser.finish()
}

pub fn parse_protocol<R: Read>(mut source: R) -> Result<ProtocolGraph> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    parse_protocol_str(&text)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    DuplicateId { id: String },
    DanglingEdge { src: String, dst: String },
    SelfLoop { id: String },
    NextCycle { ids: Vec<String> },
    UnanchoredPhrase { id: String },
}

impl Diagnostic {
    /// Warnings do not make a graph unusable; everything else does.
    pub fn is_warning(&self) -> bool {
        matches!(self, Diagnostic::UnanchoredPhrase { .. })
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::DuplicateId { id } => write!(f, "error: duplicate phrase id '{id}'"),
            Diagnostic::DanglingEdge { src, dst } => {
                write!(f, "error: edge {src} -> {dst} references a missing phrase")
            }
            Diagnostic::SelfLoop { id } => write!(f, "error: self-loop on '{id}'"),
            Diagnostic::NextCycle { ids } => write!(f, "error: cycle among next edges: {}", ids.join(" -> ")),
            Diagnostic::UnanchoredPhrase { id } => {
                write!(f, "warning: unanchored phrase '{id}' has no source lines")
            }
        }
    }
}

/// Structural checks on a (possibly hand-edited) graph.
pub fn validate_graph(g: &ProtocolGraph) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for p in &g.phrases {
        if index.insert(p.id.as_str(), index.len()).is_some() {
            out.push(Diagnostic::DuplicateId { id: p.id.clone() });
        }
    }
    let mut next_graph: DiGraph<&str, ()> = DiGraph::new();
    let node_ids: Vec<_> = g.phrases.iter().map(|p| next_graph.add_node(p.id.as_str())).collect();
    for e in &g.edges {
        let (Some(&s), Some(&d)) = (index.get(e.src.as_str()), index.get(e.dst.as_str())) else {
            out.push(Diagnostic::DanglingEdge {
                src: e.src.clone(),
                dst: e.dst.clone(),
            });
            continue;
        };
        if s == d {
            out.push(Diagnostic::SelfLoop { id: e.src.clone() });
            continue;
        }
        if e.label == RelationLabel::Next {
            next_graph.add_edge(node_ids[s], node_ids[d], ());
        }
    }
    let mut cycles: Vec<Vec<String>> = tarjan_scc(&next_graph)
        .into_iter()
        .filter(|scc| scc.len() > 1)
        .map(|scc| {
            let mut ids: Vec<String> = scc.iter().map(|&n| next_graph[n].to_string()).collect();
            ids.sort_by_key(|id| index[id.as_str()]);
            ids
        })
        .collect();
    cycles.sort();
    out.extend(cycles.into_iter().map(|ids| Diagnostic::NextCycle { ids }));
    for p in &g.phrases {
        if p.source_lines.is_empty() {
            out.push(Diagnostic::UnanchoredPhrase { id: p.id.clone() });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lines(xs: &[u32]) -> BTreeSet<u32> {
        xs.iter().copied().collect()
    }

    fn edge_triples(g: &ProtocolGraph) -> Vec<(&str, &str, RelationLabel)> {
        g.edges
            .iter()
            .map(|e| (e.src.as_str(), e.dst.as_str(), e.label))
            .collect()
    }

    #[test]
    fn linear_two_steps() {
        let g = parse_protocol_str("1. prep the patient (lines 8-9)\n2. pass wire (line 14)").unwrap();
        assert_eq!(g.phrases.len(), 2);
        assert_eq!(g.phrases[0].text, "prep the patient");
        assert_eq!(g.phrases[0].source_lines, lines(&[8, 9]));
        assert_eq!(g.phrases[1].source_lines, lines(&[14]));
        assert_eq!(edge_triples(&g), vec![("1", "2", RelationLabel::Next)]);
    }

    #[test]
    fn condition_branches() {
        let src = "3. if resistance is felt (line 20):\n  3a. remove the wire (line 21)\n  3b. advance (line 22)";
        let g = parse_protocol_str(src).unwrap();
        assert_eq!(
            edge_triples(&g),
            vec![("3", "3a", RelationLabel::If), ("3", "3b", RelationLabel::If)]
        );
        assert_eq!(g.phrases[0].text, "if resistance is felt");
        assert!(g.phrases[0].is_condition());
    }

    #[test]
    fn join_after_branch_block() {
        let src = "\
1. prep the patient (line 2)
2. if resistance is felt (line 4):
  2a. remove the wire (line 5)
  2b. advance slowly (line 6)
3. leave wire in place (line 8)
";
        let g = parse_protocol_str(src).unwrap();
        assert_eq!(
            edge_triples(&g),
            vec![
                ("1", "2", RelationLabel::Next),
                ("2", "2a", RelationLabel::If),
                ("2", "2b", RelationLabel::If),
                ("2b", "3", RelationLabel::Next),
            ]
        );
        let golden = r#"{"phrases":[{"id":"1","text":"prep the patient","lines":[2]},{"id":"2","text":"if resistance is felt","lines":[4]},{"id":"2a","text":"remove the wire","lines":[5]},{"id":"2b","text":"advance slowly","lines":[6]},{"id":"3","text":"leave wire in place","lines":[8]}],"edges":[["1","2","next"],["2","2a","if"],["2","2b","if"],["2b","3","next"]]}"#;
        assert_eq!(g.to_canonical_json(), golden);
    }

    #[test]
    fn plain_substeps_form_a_sequence() {
        let src = "1. prepare (line 1)\n  1a. clean skin (line 2)\n  1b. drape (line 3)\n2. insert needle (line 4)";
        let g = parse_protocol_str(src).unwrap();
        assert_eq!(
            edge_triples(&g),
            vec![
                ("1", "1a", RelationLabel::Next),
                ("1a", "1b", RelationLabel::Next),
                ("1b", "2", RelationLabel::Next),
            ]
        );
    }

    #[test]
    fn multi_step_branch() {
        let src = "1. if bleeding persists (line 1):\n  1a. apply pressure (line 2)\n    1a1. wait (line 3)\n  1b. continue (line 4)\n2. done here (line 5)";
        let g = parse_protocol_str(src).unwrap();
        assert_eq!(
            edge_triples(&g),
            vec![
                ("1", "1a", RelationLabel::If),
                ("1", "1b", RelationLabel::If),
                ("1a", "1a1", RelationLabel::Next),
                ("1b", "2", RelationLabel::Next),
            ]
        );
    }

    #[test]
    fn malformed_annotation_is_error() {
        let err = parse_protocol_str("1. step (lines 9-)").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
        assert!(parse_protocol_str("1. step (line x)").is_err());
        assert!(parse_protocol_str("1. step (lines 9-3)").is_err());
        assert!(parse_protocol_str("1. step (line 3").is_err());
    }

    #[test]
    fn other_parentheses_are_text() {
        let g = parse_protocol_str("1. flush (gently) the port (line 3)").unwrap();
        assert_eq!(g.phrases[0].text, "flush (gently) the port");
        assert_eq!(g.phrases[0].source_lines, lines(&[3]));
    }

    #[test]
    fn indentation_jump_is_error() {
        let err = parse_protocol_str("1. a\n    1a. b").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(parse_protocol_str(" 1. odd indent").is_err());
    }

    #[test]
    fn unknown_step_reference_is_error() {
        let err = parse_protocol_str("1. a\n2. b\n  3a. c").unwrap_err();
        assert!(err.to_string().contains("unknown step reference"), "{err}");
        assert!(parse_protocol_str("a. b").is_err());
        assert!(parse_protocol_str("1. a\n1. b").is_err());
    }

    #[test]
    fn condition_without_branch_is_error() {
        assert!(parse_protocol_str("1. if x happens:\n2. y").is_err());
        assert!(parse_protocol_str("1. if x happens:").is_err());
    }

    #[test]
    fn if_without_colon_is_plain_step() {
        let g = parse_protocol_str("1. if needed flush it\n2. next").unwrap();
        assert!(g.phrases[0].is_condition()); // keyword only
        assert_eq!(edge_triples(&g), vec![("1", "2", RelationLabel::Next)]);
    }

    #[test]
    fn colon_before_annotation() {
        let g = parse_protocol_str("1. if x is felt: (line 3)\n  1a. stop it (line 4)").unwrap();
        assert_eq!(edge_triples(&g), vec![("1", "1a", RelationLabel::If)]);
    }

    #[test]
    fn text_after_annotation_rejected() {
        assert!(parse_protocol_str("1. a (line 3) more").is_err());
    }

    #[test]
    fn linear_protocol_has_n_minus_one_edges() {
        for n in 1..12 {
            let src: String = (1..=n).map(|i| format!("{i}. step number {i} (line {i})\n")).collect();
            let g = parse_protocol_str(&src).unwrap();
            assert_eq!(g.phrases.len(), n);
            assert_eq!(g.edges.len(), n - 1);
            assert!(g.edges.iter().all(|e| e.label == RelationLabel::Next));
        }
    }

    #[test]
    fn deterministic_bytes() {
        let src = "1. a (line 1)\n2. if b is c (line 2):\n  2a. d (line 3)\n  2b. e\n3. f (lines 5-7)\n";
        let a = parse_protocol_str(src).unwrap().to_canonical_json();
        let b = parse_protocol_str(src).unwrap().to_canonical_json();
        assert_eq!(a, b);
        let back: ProtocolGraph = serde_json::from_str(&a).unwrap();
        assert_eq!(back.to_canonical_json(), a);
    }

    #[test]
    fn if_edges_start_at_conditions() {
        let src = "1. a (line 1)\n2. if b is c (line 2):\n  2a. d (line 3)\n  2b. if e is f:\n    2b1. g\n3. h";
        let g = parse_protocol_str(src).unwrap();
        for e in g.edges.iter().filter(|e| e.label == RelationLabel::If) {
            assert!(g.phrase(&e.src).unwrap().is_condition(), "{e:?}");
        }
    }

    #[test]
    fn validate_clean_chain() {
        let g = parse_protocol_str("1. a (line 1)\n2. b (line 2)\n3. c (line 3)").unwrap();
        assert!(validate_graph(&g).is_empty());
    }

    #[test]
    fn validate_reports_cycle() {
        let mut g = parse_protocol_str("1. a (line 1)\n2. b (line 2)").unwrap();
        g.edges.push(ProtocolEdge {
            src: "2".into(),
            dst: "1".into(),
            label: RelationLabel::Next,
        });
        let diags = validate_graph(&g);
        assert_eq!(
            diags,
            vec![Diagnostic::NextCycle {
                ids: vec!["1".into(), "2".into()]
            }]
        );
    }

    #[test]
    fn validate_reports_unanchored_and_dangling() {
        let mut g = parse_protocol_str("1. a (line 1)\n2. b").unwrap();
        assert_eq!(
            validate_graph(&g),
            vec![Diagnostic::UnanchoredPhrase { id: "2".into() }]
        );
        assert!(validate_graph(&g)[0].is_warning());
        g.edges.push(ProtocolEdge {
            src: "2".into(),
            dst: "9".into(),
            label: RelationLabel::If,
        });
        g.edges.push(ProtocolEdge {
            src: "1".into(),
            dst: "1".into(),
            label: RelationLabel::Next,
        });
        let diags = validate_graph(&g);
        assert!(diags.contains(&Diagnostic::DanglingEdge {
            src: "2".into(),
            dst: "9".into()
        }));
        assert!(diags.contains(&Diagnostic::SelfLoop { id: "1".into() }));
    }

    #[test]
    fn label_parsing() {
        assert_eq!("<next>".parse::<RelationLabel>().unwrap(), RelationLabel::Next);
        assert_eq!("IF".parse::<RelationLabel>().unwrap(), RelationLabel::If);
        assert!("maybe".parse::<RelationLabel>().is_err());
        assert_eq!(serde_json::to_string(&RelationLabel::None).unwrap(), "\"none\"");
    }
}
