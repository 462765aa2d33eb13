//! Transcripts, tokenization and span addressing.
//!
//! A transcript file holds one numbered utterance per line:
//!
//! ```text
//! 12: [I] And then what do you do?
//! 13: [S] you pass wire.
//! ```
//!
//! Line numbers are the ones printed in the source document and must be strictly
//! increasing. Sentences are addressed by their 0-based position (`sent_index`), which
//! generally differs from the printed line number.

use std::fmt::Write as _;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptLine {
    pub line_no: u32,
    pub speaker: String,
    pub tokens: Vec<String>,
    pub sent_index: usize,
}

impl TranscriptLine {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub id: String,
    lines: Vec<TranscriptLine>,
}

impl Transcript {
    /// Builds a transcript from `(line_no, speaker, tokens)` triples, checking line-number order.
    pub fn from_lines<I>(id: impl Into<String>, lines: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, String, Vec<String>)>,
    {
        let mut out: Vec<TranscriptLine> = Vec::new();
        for (pos, (line_no, speaker, tokens)) in lines.into_iter().enumerate() {
            if let Some(prev) = out.last() {
                if line_no <= prev.line_no {
                    return Err(Error::format(
                        pos + 1,
                        format!("line number {line_no} does not increase (previous {})", prev.line_no),
                    ));
                }
            }
            out.push(TranscriptLine {
                line_no,
                speaker,
                tokens,
                sent_index: pos,
            });
        }
        Ok(Transcript {
            id: id.into(),
            lines: out,
        })
    }

    pub fn lines(&self) -> &[TranscriptLine] {
        &self.lines
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn sentence(&self, sent_index: usize) -> Option<&TranscriptLine> {
        self.lines.get(sent_index)
    }

    /// Looks a sentence up by its printed line number.
    pub fn by_line_no(&self, line_no: u32) -> Option<&TranscriptLine> {
        self.lines
            .binary_search_by_key(&line_no, |l| l.line_no)
            .ok()
            .map(|i| &self.lines[i])
    }

    /// Renders back to the on-disk format. Tokens are space-joined.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            let _ = writeln!(out, "{}: [{}] {}", line.line_no, line.speaker, line.tokens.join(" "));
        }
        out
    }
}

/// Contiguous token range `[start, end)` inside one sentence.
///
/// Ordering is lexicographic on `(sent_index, start, end)`, which is also the
/// tie-break order used by the matcher.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TextSpan {
    pub sent_index: usize,
    pub start: usize,
    pub end: usize,
}

impl TextSpan {
    pub fn new(sent_index: usize, start: usize, end: usize) -> Self {
        TextSpan {
            sent_index,
            start,
            end,
        }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn overlaps(&self, other: &TextSpan) -> bool {
        self.sent_index == other.sent_index && self.start < other.end && other.start < self.end
    }

    /// Checks `0 <= start < end <= len(sentence)`.
    pub fn validate(&self, t: &Transcript) -> Result<()> {
        let line = t.sentence(self.sent_index).ok_or_else(|| {
            Error::Address(format!(
                "sentence {} not in transcript '{}' ({} sentences)",
                self.sent_index,
                t.id,
                t.len()
            ))
        })?;
        if self.start >= self.end || self.end > line.len() {
            return Err(Error::Address(format!(
                "span [{}, {}) invalid for sentence {} of length {}",
                self.start,
                self.end,
                self.sent_index,
                line.len()
            )));
        }
        Ok(())
    }
}

/// A span qualified with its document, the on-disk span form.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DocSpan {
    pub doc: String,
    pub sent_index: usize,
    pub start: usize,
    pub end: usize,
}

impl DocSpan {
    pub fn new(doc: impl Into<String>, span: TextSpan) -> Self {
        DocSpan {
            doc: doc.into(),
            sent_index: span.sent_index,
            start: span.start,
            end: span.end,
        }
    }

    pub fn span(&self) -> TextSpan {
        TextSpan::new(self.sent_index, self.start, self.end)
    }
}

/// Reads a transcript in the `<line_no>: [<speaker>] <text>` format. Blank lines are skipped.
pub fn load_transcript<R: BufRead>(id: impl Into<String>, source: R) -> Result<Transcript> {
    let mut parsed = Vec::new();
    let mut file_lines = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let file_line = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        parsed.push(parse_transcript_line(&line).map_err(|msg| Error::format(file_line, msg))?);
        file_lines.push(file_line);
    }
    Transcript::from_lines(id, parsed).map_err(|e| match e {
        // from_lines reports positions among non-blank lines; map back to file lines.
        Error::Format { line, msg } => Error::format(file_lines[line - 1], msg),
        other => other,
    })
}

fn parse_transcript_line(line: &str) -> std::result::Result<(u32, String, Vec<String>), String> {
    let (num, rest) = line
        .split_once(':')
        .ok_or_else(|| "expected '<line_no>: [<speaker>] <text>'".to_string())?;
    let line_no: u32 = num
        .trim()
        .parse()
        .map_err(|_| format!("invalid line number '{}'", num.trim()))?;
    if line_no == 0 {
        return Err("line numbers start at 1".into());
    }
    let rest = rest.trim_start();
    let rest = rest
        .strip_prefix('[')
        .ok_or_else(|| "expected '[<speaker>]' after line number".to_string())?;
    let (speaker, text) = rest
        .split_once(']')
        .ok_or_else(|| "unterminated speaker tag".to_string())?;
    let speaker = speaker.trim();
    if speaker.is_empty() {
        return Err("empty speaker tag".into());
    }
    Ok((line_no, speaker.to_string(), tokenize(text)))
}

/// Splits on whitespace and detaches punctuation, keeping hyphens and apostrophes that
/// sit between two alphanumeric characters (`Luer-lock`, `don't`). Case is preserved.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut word = String::new();
        for (i, &c) in chars.iter().enumerate() {
            let joiner = (c == '-' || c == '\'')
                && i > 0
                && i + 1 < chars.len()
                && chars[i - 1].is_alphanumeric()
                && chars[i + 1].is_alphanumeric();
            if c.is_alphanumeric() || joiner {
                word.push(c);
            } else {
                if !word.is_empty() {
                    tokens.push(std::mem::take(&mut word));
                }
                tokens.push(c.to_string());
            }
        }
        if !word.is_empty() {
            tokens.push(word);
        }
    }
    tokens
}

/// All spans of length `min_len..=min(max_len, n)` in one sentence, ordered by `(start, end)`.
pub fn enumerate_spans(line: &TranscriptLine, min_len: usize, max_len: usize) -> Vec<TextSpan> {
    let n = line.len();
    let min_len = min_len.max(1);
    let max_len = max_len.min(n);
    let mut out = Vec::new();
    if min_len > max_len {
        return out;
    }
    for start in 0..n {
        for len in min_len..=max_len {
            let end = start + len;
            if end > n {
                break;
            }
            out.push(TextSpan::new(line.sent_index, start, end));
        }
    }
    out
}

pub fn span_tokens<'a>(t: &'a Transcript, s: &TextSpan) -> Result<&'a [String]> {
    s.validate(t)?;
    Ok(&t.lines[s.sent_index].tokens[s.start..s.end])
}

/// Tokens of the span joined by single spaces.
pub fn span_text(t: &Transcript, s: &TextSpan) -> Result<String> {
    Ok(span_tokens(t, s)?.join(" "))
}
