//! Synthetic transcripts, protocols, annotations and embeddings with planted structure.
//!
//! Every document alternates interviewer and subject lines. Each protocol step is spoken
//! verbatim inside one subject line, surrounded by filler words that never occur inside
//! a step. Word vectors are built from category directions plus small per-word noise;
//! a reserved block of dimensions holds only nonce words, so a phrase made of nonce
//! words has cosine exactly 0 with every transcript span.
//!
//! Two families are available:
//!
//! * [`FixtureFamily::Separable`]: conditions start with `if` and branch steps use
//!   their own verbs, so both spans and relations are recoverable from span content
//!   and sentence distance.
//! * [`FixtureFamily::Context`]: every step draws from one shared vocabulary and the
//!   role of a step is only announced by a cue word in the interviewer line before it,
//!   so relations need neighbouring sentences to be told apart.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::TextSpan;
use crate::error::{Error, Result};
use crate::eval::{AnnotationRecord, ManualAnnotation};
use crate::protocol::{ProtocolGraph, RelationLabel};

const VERBS: &[&str] = &[
    "pass", "insert", "advance", "prepare", "clean", "flush", "attach", "secure", "inject", "palpate", "locate",
    "mark", "aspirate", "dilate", "position", "confirm", "thread", "tape",
];
const BRANCH_VERBS: &[&str] = &["remove", "withdraw", "retract", "abort"];
const ALT_BRANCH_VERBS: &[&str] = &["redirect", "reposition", "replace"];
const DETS: &[&str] = &["the", "a", "your"];
const OBJECTS: &[&str] = &[
    "wire", "needle", "catheter", "sheath", "syringe", "dressing", "probe", "vessel", "skin", "site", "port",
    "tube", "clamp", "gauze", "hub", "lumen",
];
const COND_SUBJECTS: &[&str] = &["pressure", "flow", "blood", "resistance", "pulse", "return"];
const COND_PREDICATES: &[&str] = &["drops", "stops", "appears", "increases", "persists", "fades"];
const SUBJECT_PREFIX: &[&str] = &["so", "well", "um", "okay", "basically", "usually", "i", "just", "and", "we"];
const SUBJECT_SUFFIX: &[&str] = &["carefully", "slowly", "here", "now", "again", "gently", "first", "there"];
const INTERVIEWER: &[&str] = &["what", "do", "you", "how", "about", "tell", "me", "more", "hmm", "right", "yes"];
const CUE_NEXT: &str = "afterwards";
const CUE_BRANCH: &str = "otherwise";
const CUE_COND: &str = "suppose";
const PUNCT: &[&str] = &[".", "?", ","];
const NONCE_SYLLABLES: &[&str] = &["zor", "qua", "blen", "vix", "trop", "mul", "gex", "pim", "dra", "kov"];

const CATEGORY_DIMS: usize = 13;
const NOISE_DIMS: usize = 20;
const NONCE_DIMS: usize = 8;
pub const EMBEDDING_DIM: usize = CATEGORY_DIMS + NOISE_DIMS + NONCE_DIMS;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FixtureFamily {
    Separable,
    Context,
}

impl FromStr for FixtureFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "separable" => Ok(FixtureFamily::Separable),
            "context" => Ok(FixtureFamily::Context),
            _ => Err(Error::Config(format!("unknown fixture family '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureConfig {
    pub family: FixtureFamily,
    pub docs: usize,
    pub seed: u64,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        FixtureConfig {
            family: FixtureFamily::Separable,
            docs: 20,
            seed: 13,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixtureDoc {
    pub id: String,
    pub transcript: String,
    pub protocol: String,
    pub annotation: ManualAnnotation,
}

impl FixtureDoc {
    pub fn annotation_jsonl(&self) -> String {
        self.annotation
            .records()
            .iter()
            .map(|r| serde_json::to_string(r).expect("annotation records serialize") + "\n")
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixtureCorpus {
    pub docs: Vec<FixtureDoc>,
    pub embeddings: String,
    pub rules: String,
    pub nonce_words: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Role {
    Plain,
    Condition,
    Branch,
}

struct Step {
    id: String,
    role: Role,
    phrase: String,
    span_tokens: Vec<String>,
    depth: usize,
}

/// Category index for every word the generator can emit.
fn word_categories() -> Vec<(String, usize)> {
    let groups: [(&[&str], usize); 12] = [
        (VERBS, 0),
        (DETS, 1),
        (OBJECTS, 2),
        (&["if"], 3),
        (COND_SUBJECTS, 4),
        (COND_PREDICATES, 5),
        (BRANCH_VERBS, 6),
        (ALT_BRANCH_VERBS, 12),
        (SUBJECT_PREFIX, 7),
        (SUBJECT_SUFFIX, 7),
        (INTERVIEWER, 11),
        (PUNCT, 11),
    ];
    let mut out: Vec<(String, usize)> = Vec::new();
    let mut seen = BTreeSet::new();
    for (words, cat) in groups {
        for w in words {
            if seen.insert(w.to_string()) {
                out.push((w.to_string(), cat));
            }
        }
    }
    for (w, cat) in [(CUE_NEXT, 8), (CUE_BRANCH, 9), (CUE_COND, 10)] {
        out.push((w.to_string(), cat));
    }
    out
}

pub fn nonce_words() -> Vec<String> {
    let mut out = Vec::new();
    for a in NONCE_SYLLABLES {
        for b in NONCE_SYLLABLES {
            if a != b {
                out.push(format!("{a}{b}"));
            }
        }
    }
    out
}

fn format_vector(word: &str, v: &[f64]) -> String {
    let mut line = word.to_string();
    for x in v {
        let _ = write!(line, " {x:.6}");
    }
    line.push('\n');
    line
}

/// Embedding file text covering all generator words and the nonce words.
pub fn embeddings_text(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_e111);
    let mut out = String::new();
    for (word, cat) in word_categories() {
        let mut v = vec![0.0; EMBEDDING_DIM];
        v[cat] = 1.0;
        for x in &mut v[CATEGORY_DIMS..CATEGORY_DIMS + NOISE_DIMS] {
            *x = rng.gen_range(-0.25..0.25);
        }
        out.push_str(&format_vector(&word, &v));
    }
    for word in nonce_words() {
        let mut v = vec![0.0; EMBEDDING_DIM];
        for x in &mut v[CATEGORY_DIMS + NOISE_DIMS..] {
            *x = rng.gen_range(-1.0..1.0);
        }
        out.push_str(&format_vector(&word, &v));
    }
    out
}

fn rules_text() -> String {
    format!(
        "# Hand-written patterns for the synthetic step vocabulary.\n@verbs = {}\n@branch = {}\n@dets = {}\n@objects = {}\n@subjects = {}\n@preds = {}\n@verbs @dets @objects\n@verbs @objects\n@branch @dets @objects\nif @subjects @preds\nif the @subjects @preds\n",
        VERBS.join(" "),
        [BRANCH_VERBS, ALT_BRANCH_VERBS].concat().join(" "),
        DETS.join(" "),
        OBJECTS.join(" "),
        COND_SUBJECTS.join(" "),
        COND_PREDICATES.join(" ")
    )
}

fn pick<'a, R: Rng>(rng: &mut R, words: &[&'a str]) -> &'a str {
    words.choose(rng).expect("non-empty word list")
}

/// Draws a span not used before in this document.
///
/// In the separable family the first and second branch of a condition use disjoint verbs.
fn fresh_span<R: Rng>(
    rng: &mut R,
    used: &mut BTreeSet<Vec<String>>,
    role: Role,
    family: FixtureFamily,
    second_branch: bool,
) -> Vec<String> {
    let branch_verbs = if second_branch { ALT_BRANCH_VERBS } else { BRANCH_VERBS };
    loop {
        let tokens: Vec<&str> = match (family, role) {
            (FixtureFamily::Separable, Role::Condition) => {
                if rng.gen_bool(0.5) {
                    vec!["if", pick(rng, COND_SUBJECTS), pick(rng, COND_PREDICATES)]
                } else {
                    vec!["if", "the", pick(rng, COND_SUBJECTS), pick(rng, COND_PREDICATES)]
                }
            }
            (FixtureFamily::Separable, Role::Branch) => vec![pick(rng, branch_verbs), pick(rng, DETS), pick(rng, OBJECTS)],
            (FixtureFamily::Separable, Role::Plain) => {
                if rng.gen_bool(0.75) {
                    vec![pick(rng, VERBS), pick(rng, DETS), pick(rng, OBJECTS)]
                } else {
                    vec![pick(rng, VERBS), pick(rng, OBJECTS)]
                }
            }
            (FixtureFamily::Context, _) => {
                let verb = match rng.gen_range(0..4) {
                    0 | 1 => pick(rng, VERBS),
                    2 => pick(rng, BRANCH_VERBS),
                    _ => pick(rng, ALT_BRANCH_VERBS),
                };
                vec![verb, pick(rng, DETS), pick(rng, OBJECTS)]
            }
        };
        let tokens: Vec<String> = tokens.into_iter().map(String::from).collect();
        if used.insert(tokens.clone()) {
            return tokens;
        }
    }
}

fn plan_document<R: Rng>(rng: &mut R, family: FixtureFamily) -> Vec<Step> {
    let n_plain = rng.gen_range(8..=11);
    // A single condition block keeps every separable relation decidable from the pair alone.
    let n_cond = match family {
        FixtureFamily::Separable => 1,
        FixtureFamily::Context => rng.gen_range(1..=2),
    };
    // Condition blocks go before plain step `slot`, never first and never back to back.
    let mut slots: Vec<usize> = Vec::new();
    while slots.len() < n_cond {
        let s = rng.gen_range(1..n_plain);
        if slots.iter().all(|&o| o.abs_diff(s) >= 2) {
            slots.push(s);
        }
    }
    let mut used = BTreeSet::new();
    let mut steps = Vec::new();
    let mut top = 0;
    for i in 0..n_plain {
        if slots.contains(&i) {
            top += 1;
            let id = top.to_string();
            let span = fresh_span(rng, &mut used, Role::Condition, family, false);
            let phrase = match family {
                FixtureFamily::Separable => span.join(" "),
                FixtureFamily::Context => format!("if {}", span.join(" ")),
            };
            steps.push(Step {
                id: id.clone(),
                role: Role::Condition,
                phrase,
                span_tokens: span,
                depth: 0,
            });
            for suffix in ["a", "b"] {
                let span = fresh_span(rng, &mut used, Role::Branch, family, suffix == "b");
                steps.push(Step {
                    id: format!("{id}{suffix}"),
                    role: Role::Branch,
                    phrase: span.join(" "),
                    span_tokens: span,
                    depth: 1,
                });
            }
        }
        top += 1;
        let span = fresh_span(rng, &mut used, Role::Plain, family, false);
        steps.push(Step {
            id: top.to_string(),
            role: Role::Plain,
            phrase: span.join(" "),
            span_tokens: span,
            depth: 0,
        });
    }
    steps
}

fn interviewer_line<R: Rng>(rng: &mut R, family: FixtureFamily, role: Role) -> Vec<String> {
    let n = rng.gen_range(2..=4);
    let mut words: Vec<String> = INTERVIEWER.choose_multiple(rng, n).map(|w| w.to_string()).collect();
    if family == FixtureFamily::Context {
        let cue = match role {
            Role::Plain => CUE_NEXT,
            Role::Branch => CUE_BRANCH,
            Role::Condition => CUE_COND,
        };
        words.insert(0, cue.to_string());
    }
    words.push("?".into());
    words
}

fn generate_doc<R: Rng>(rng: &mut R, id: String, family: FixtureFamily) -> Result<FixtureDoc> {
    let steps = plan_document(rng, family);
    let mut transcript = String::new();
    let mut protocol = String::new();
    let mut records = Vec::new();
    let mut line_no = 0u32;
    let mut sent_index = 0usize;
    for step in &steps {
        line_no += 1;
        let q = interviewer_line(rng, family, step.role);
        let _ = writeln!(transcript, "{line_no}: [I] {}", q.join(" "));
        sent_index += 1;

        line_no += 1;
        let n_pre = rng.gen_range(1..=2);
        let n_suf = rng.gen_range(0..=2);
        let mut tokens: Vec<String> = SUBJECT_PREFIX.choose_multiple(rng, n_pre).map(|w| w.to_string()).collect();
        let start = tokens.len();
        tokens.extend(step.span_tokens.iter().cloned());
        let end = tokens.len();
        tokens.extend(SUBJECT_SUFFIX.choose_multiple(rng, n_suf).map(|w| w.to_string()));
        tokens.push(if rng.gen_bool(0.8) { "." } else { "," }.to_string());
        let _ = writeln!(transcript, "{line_no}: [S] {}", tokens.join(" "));

        let indent = "  ".repeat(step.depth);
        let colon = if step.role == Role::Condition { ":" } else { "" };
        let _ = writeln!(
            protocol,
            "{indent}{}. {} (lines {}-{}){colon}",
            step.id,
            step.phrase,
            line_no - 1,
            line_no
        );
        records.push(AnnotationRecord::Phrase {
            phrase_id: step.id.clone(),
            gold_span: Some(TextSpan::new(sent_index, start, end)),
            note: None,
        });
        sent_index += 1;
    }
    let graph = crate::protocol::parse_protocol_str(&protocol)?;
    records.extend(graph.edges.iter().map(|e| AnnotationRecord::Pair {
        u_phrase: e.src.clone(),
        v_phrase: e.dst.clone(),
        label: e.label,
    }));
    Ok(FixtureDoc {
        id,
        transcript,
        protocol,
        annotation: ManualAnnotation::from_records(records)?,
    })
}

pub fn generate(cfg: &FixtureConfig) -> Result<FixtureCorpus> {
    if cfg.docs == 0 {
        return Err(Error::Config("fixture corpus needs at least one document".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let docs = (0..cfg.docs)
        .map(|i| generate_doc(&mut rng, format!("doc{i:02}"), cfg.family))
        .collect::<Result<Vec<_>>>()?;
    Ok(FixtureCorpus {
        docs,
        embeddings: embeddings_text(cfg.seed),
        rules: rules_text(),
        nonce_words: nonce_words(),
    })
}

/// Replaces every phrase text by two to four nonce words, keeping ids, lines and edges.
pub fn scramble_protocol(g: &ProtocolGraph, seed: u64) -> ProtocolGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = nonce_words();
    let mut out = g.clone();
    for p in &mut out.phrases {
        let n = rng.gen_range(2..=4);
        p.text = pool.choose_multiple(&mut rng, n).cloned().collect::<Vec<_>>().join(" ");
    }
    out
}

/// Gold relation label of every annotated ordered phrase pair; pairs without an edge are `None`.
pub fn gold_pair_label(ann: &ManualAnnotation, u: &str, v: &str) -> RelationLabel {
    ann.pairs
        .get(&(u.to_string(), v.to_string()))
        .copied()
        .unwrap_or(RelationLabel::None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{load_transcript, span_text};
    use crate::embeddings::{cosine, embed_phrase, load_embeddings, EmbeddingTable};
    use crate::protocol::{parse_protocol_str, validate_graph};

    #[test]
    fn corpus_is_consistent() {
        for family in [FixtureFamily::Separable, FixtureFamily::Context] {
            let c = generate(&FixtureConfig {
                family,
                docs: 5,
                seed: 3,
            })
            .unwrap();
            let emb: EmbeddingTable<f64> = load_embeddings(c.embeddings.as_bytes()).unwrap();
            for d in &c.docs {
                let t = load_transcript(&d.id, d.transcript.as_bytes()).unwrap();
                let g = parse_protocol_str(&d.protocol).unwrap();
                assert!(validate_graph(&g).is_empty());
                assert!(g.edges.iter().any(|e| e.label == RelationLabel::If));
                for line in t.lines() {
                    for tok in &line.tokens {
                        assert!(emb.get(tok).is_some(), "{tok} missing from embeddings");
                    }
                }
                for p in &g.phrases {
                    let span = d.annotation.phrases[&p.id].unwrap();
                    let text = span_text(&t, &span).unwrap();
                    match family {
                        FixtureFamily::Separable => assert_eq!(text, p.text),
                        FixtureFamily::Context => assert!(p.text.ends_with(&text)),
                    }
                }
            }
            assert_eq!(c, generate(&FixtureConfig { family, docs: 5, seed: 3 }).unwrap());
        }
    }

    #[test]
    fn nonce_phrases_are_orthogonal() {
        let emb: EmbeddingTable<f64> = load_embeddings(embeddings_text(1).as_bytes()).unwrap();
        let (nonce, _) = embed_phrase(&["zorqua", "vixgex"], &emb).unwrap();
        for (w, _) in word_categories() {
            let (v, _) = embed_phrase(&[w.as_str()], &emb).unwrap();
            assert_eq!(cosine(&nonce, &v).unwrap(), 0.0);
        }
    }

    #[test]
    fn scrambling_keeps_structure() {
        let c = generate(&FixtureConfig::default()).unwrap();
        let g = parse_protocol_str(&c.docs[0].protocol).unwrap();
        let s = scramble_protocol(&g, 1);
        assert_eq!(s.edges, g.edges);
        assert!(s.phrases.iter().zip(&g.phrases).all(|(a, b)| a.id == b.id && a.text != b.text));
    }
}
