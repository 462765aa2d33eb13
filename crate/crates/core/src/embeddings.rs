//! Word-vector tables, phrase embedding by average pooling, cosine similarity.

use std::collections::HashMap;
use std::io::BufRead;
use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::corpus::{TextSpan, TranscriptLine};
use crate::error::{Error, Result};
use crate::num::Scalar;

/// Dense vector with finite components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
#[serde(bound = "T: Scalar")]
pub struct Vector<T>(Vec<T>);

impl<T: Scalar> Vector<T> {
    /// Fails when any component is NaN or infinite.
    pub fn new(components: Vec<T>) -> Result<Self> {
        if components.iter().any(|x| !x.is_finite()) {
            return Err(Error::Argument("vector has non-finite components".into()));
        }
        Ok(Vector(components))
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![T::zero(); dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    pub fn dot(&self, other: &Self) -> T {
        self.0.iter().zip(&other.0).map(|(&a, &b)| a * b).sum()
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|x| x.is_zero())
    }

    pub(crate) fn from_raw(components: Vec<T>) -> Self {
        Vector(components)
    }
}

impl<T> Index<usize> for Vector<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

/// Token-to-vector table. Keys are lowercased; lookup is case-insensitive.
#[derive(Clone, Debug)]
pub struct EmbeddingTable<T> {
    dim: usize,
    entries: HashMap<String, Vector<T>>,
}

impl<T: Scalar> EmbeddingTable<T> {
    pub fn from_entries<I>(dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<T>)>,
    {
        if dim == 0 {
            return Err(Error::Argument("embedding dimension must be positive".into()));
        }
        let mut map = HashMap::new();
        for (token, v) in entries {
            if v.len() != dim {
                return Err(Error::Argument(format!(
                    "vector for '{token}' has dimension {}, expected {dim}",
                    v.len()
                )));
            }
            map.entry(token.to_lowercase()).or_insert(Vector::new(v)?);
        }
        Ok(EmbeddingTable { dim, entries: map })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&Vector<T>> {
        match self.entries.get(token) {
            Some(v) => Some(v),
            None => self.entries.get(&token.to_lowercase()),
        }
    }
}

/// Reads the whitespace-delimited `<token> <v1> ... <vd>` format.
///
/// Blank lines are skipped; the first occurrence of a token (after lowercasing) wins.
pub fn load_embeddings<T: Scalar, R: BufRead>(source: R) -> Result<EmbeddingTable<T>> {
    let mut dim = None;
    let mut entries: HashMap<String, Vector<T>> = HashMap::new();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let mut parts = line.split_whitespace();
        let Some(token) = parts.next() else { continue };
        let values = parts
            .map(|p| {
                p.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .and_then(T::from_f64)
                    .ok_or_else(|| Error::format(idx + 1, format!("invalid number '{p}'")))
            })
            .collect::<Result<Vec<T>>>()?;
        match dim {
            None if values.is_empty() => {
                return Err(Error::format(idx + 1, format!("no vector components for '{token}'")));
            }
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::format(
                    idx + 1,
                    format!("dimension {} for '{token}' differs from {d}", values.len()),
                ));
            }
            _ => {}
        }
        entries
            .entry(token.to_lowercase())
            .or_insert_with(|| Vector::from_raw(values));
    }
    let dim = dim.ok_or_else(|| Error::format(1, "embedding file is empty"))?;
    Ok(EmbeddingTable { dim, entries })
}

/// Mean of the in-vocabulary token vectors and the number of skipped tokens.
///
/// A fully out-of-vocabulary phrase yields the zero vector with `oov == tokens.len()`.
pub fn embed_phrase<T: Scalar, S: AsRef<str>>(tokens: &[S], table: &EmbeddingTable<T>) -> Result<(Vector<T>, usize)> {
    if tokens.is_empty() {
        return Err(Error::Argument("cannot embed an empty token list".into()));
    }
    let mut acc = MeanAccumulator::new(table.dim());
    for t in tokens {
        acc.push(table.get(t.as_ref()));
    }
    Ok(acc.finish())
}

/// Running sum used by both phrase and span embedding so that equal token sequences
/// produce bit-identical vectors.
#[derive(Clone)]
pub(crate) struct MeanAccumulator<T> {
    sum: Vec<T>,
    found: usize,
    oov: usize,
}

impl<T: Scalar> MeanAccumulator<T> {
    pub(crate) fn new(dim: usize) -> Self {
        MeanAccumulator {
            sum: vec![T::zero(); dim],
            found: 0,
            oov: 0,
        }
    }

    pub(crate) fn push(&mut self, v: Option<&Vector<T>>) {
        match v {
            Some(v) => {
                for (s, &x) in self.sum.iter_mut().zip(v.as_slice()) {
                    *s += x;
                }
                self.found += 1;
            }
            None => self.oov += 1,
        }
    }

    pub(crate) fn finish(&self) -> (Vector<T>, usize) {
        if self.found == 0 {
            return (Vector::zeros(self.sum.len()), self.oov);
        }
        let n = T::from_usize(self.found).expect("count fits scalar");
        (Vector::from_raw(self.sum.iter().map(|&s| s / n).collect()), self.oov)
    }
}

/// Cosine similarity, 0 when either vector has zero norm. Clamped to `[-1, 1]`.
pub fn cosine<T: Scalar>(u: &Vector<T>, v: &Vector<T>) -> Result<T> {
    if u.dim() != v.dim() {
        return Err(Error::Argument(format!(
            "dimension mismatch: {} vs {}",
            u.dim(),
            v.dim()
        )));
    }
    let nu = u.norm();
    let nv = v.norm();
    if nu.is_zero() || nv.is_zero() {
        return Ok(T::zero());
    }
    let c = u.dot(v) / (nu * nv);
    Ok(c.max(-T::one()).min(T::one()))
}

/// Encoded phrase or span.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoded<T> {
    pub vector: Vector<T>,
    /// Tokens that contributed nothing.
    pub oov: usize,
    pub tokens: usize,
}

impl<T: Scalar> Encoded<T> {
    /// No token contributed a vector.
    pub fn is_uninformative(&self) -> bool {
        self.oov >= self.tokens || self.vector.is_zero()
    }
}

/// Phrase/span encoder used by the matcher.
///
/// The word-vector table is one implementation; [`PrecomputedEmbeddings`] serves
/// vectors produced by an external encoder.
pub trait SpanEncoder<T: Scalar>: Sync {
    fn dim(&self) -> usize;

    fn encode_phrase(&self, phrase_id: &str, tokens: &[String]) -> Encoded<T>;

    /// Encodes candidate spans of one sentence. `spans` are ordered by `(start, end)`.
    fn encode_spans(&self, doc: &str, line: &TranscriptLine, spans: &[TextSpan]) -> Vec<Encoded<T>>;
}

impl<T: Scalar> SpanEncoder<T> for EmbeddingTable<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode_phrase(&self, _phrase_id: &str, tokens: &[String]) -> Encoded<T> {
        let mut acc = MeanAccumulator::new(self.dim);
        for t in tokens {
            acc.push(self.get(t));
        }
        let (vector, oov) = acc.finish();
        Encoded {
            vector,
            oov,
            tokens: tokens.len(),
        }
    }

    fn encode_spans(&self, _doc: &str, line: &TranscriptLine, spans: &[TextSpan]) -> Vec<Encoded<T>> {
        // Extend a running sum per start offset; the summation order matches
        // `encode_phrase` on the same tokens, so identical text gives identical vectors.
        let lookups: Vec<Option<&Vector<T>>> = line.tokens.iter().map(|t| self.get(t)).collect();
        let mut out = Vec::with_capacity(spans.len());
        let mut current: Option<(usize, usize, MeanAccumulator<T>)> = None;
        for s in spans {
            let reuse = matches!(&current, Some((start, end, _)) if *start == s.start && *end <= s.end);
            if !reuse {
                current = Some((s.start, s.start, MeanAccumulator::new(self.dim)));
            }
            let (_, end, acc) = current.as_mut().expect("accumulator initialised");
            while *end < s.end {
                acc.push(lookups[*end]);
                *end += 1;
            }
            let (vector, oov) = acc.finish();
            out.push(Encoded {
                vector,
                oov,
                tokens: s.len(),
            });
        }
        out
    }
}

/// Vectors computed outside this crate, keyed by phrase or span identity.
///
/// Keys are `phrase:<id>` for protocol phrases and `<doc>:<sent_index>:<start>:<end>`
/// for transcript spans. Missing keys encode as uninformative.
#[derive(Clone, Debug)]
pub struct PrecomputedEmbeddings<T> {
    dim: usize,
    entries: HashMap<String, Vector<T>>,
}

#[derive(Deserialize)]
#[serde(bound = "T: Scalar")]
struct KeyedVector<T> {
    key: String,
    vector: Vec<T>,
}

impl<T: Scalar> PrecomputedEmbeddings<T> {
    pub fn phrase_key(id: &str) -> String {
        format!("phrase:{id}")
    }

    pub fn span_key(doc: &str, s: &TextSpan) -> String {
        format!("{doc}:{}:{}:{}", s.sent_index, s.start, s.end)
    }

    /// Reads JSONL records `{"key": ..., "vector": [...]}`.
    pub fn load_jsonl<R: BufRead>(source: R) -> Result<Self> {
        let mut dim = None;
        let mut entries = HashMap::new();
        for (idx, line) in source.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: KeyedVector<T> =
                serde_json::from_str(&line).map_err(|e| Error::format(idx + 1, e.to_string()))?;
            match dim {
                None => dim = Some(rec.vector.len()),
                Some(d) if d != rec.vector.len() => {
                    return Err(Error::format(idx + 1, format!("dimension {} differs from {d}", rec.vector.len())));
                }
                _ => {}
            }
            let v = Vector::new(rec.vector).map_err(|e| Error::format(idx + 1, e.to_string()))?;
            entries.entry(rec.key).or_insert(v);
        }
        let dim = dim.filter(|&d| d > 0).ok_or_else(|| Error::format(1, "no vectors"))?;
        Ok(PrecomputedEmbeddings { dim, entries })
    }

    fn lookup(&self, key: &str, tokens: usize) -> Encoded<T> {
        match self.entries.get(key) {
            Some(v) => Encoded {
                vector: v.clone(),
                oov: 0,
                tokens,
            },
            None => Encoded {
                vector: Vector::zeros(self.dim),
                oov: tokens,
                tokens,
            },
        }
    }
}

impl<T: Scalar> SpanEncoder<T> for PrecomputedEmbeddings<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode_phrase(&self, phrase_id: &str, tokens: &[String]) -> Encoded<T> {
        self.lookup(&Self::phrase_key(phrase_id), tokens.len())
    }

    fn encode_spans(&self, doc: &str, _line: &TranscriptLine, spans: &[TextSpan]) -> Vec<Encoded<T>> {
        spans
            .iter()
            .map(|s| self.lookup(&Self::span_key(doc, s), s.len()))
            .collect()
    }
}
