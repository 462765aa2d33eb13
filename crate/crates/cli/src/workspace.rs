//! Layout of a pipeline working directory and atomic file IO.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

use procex::corpus::{load_transcript, Transcript};
use procex::dataset::DatasetManifest;
use procex::embeddings::load_embeddings;
use procex::eval::{load_annotation, ManualAnnotation};
use procex::matcher::MatchedGraph;
use procex::protocol::{parse_protocol, ProtocolGraph};
use procex::Embeddings;

pub const TRANSCRIPT_SUFFIX: &str = ".transcript.txt";

pub struct Workspace {
    pub root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Workspace { root: root.into() }
    }

    pub fn docs_dir(&self) -> PathBuf {
        self.root.join("docs")
    }

    pub fn transcript_path(&self, id: &str) -> PathBuf {
        self.docs_dir().join(format!("{id}{TRANSCRIPT_SUFFIX}"))
    }

    pub fn protocol_path(&self, id: &str) -> PathBuf {
        self.docs_dir().join(format!("{id}.protocol.txt"))
    }

    pub fn annotation_path(&self, id: &str) -> PathBuf {
        self.docs_dir().join(format!("{id}.annotation.jsonl"))
    }

    pub fn embeddings_path(&self) -> PathBuf {
        self.root.join("embeddings.txt")
    }

    pub fn rules_path(&self) -> PathBuf {
        self.root.join("rules.txt")
    }

    pub fn graph_path(&self, id: &str) -> PathBuf {
        self.root.join("graphs").join(format!("{id}.json"))
    }

    pub fn match_path(&self, id: &str) -> PathBuf {
        self.root.join("matches").join(format!("{id}.json"))
    }

    pub fn match_report_path(&self, id: &str) -> PathBuf {
        self.root.join("matches").join(format!("{id}.report.jsonl"))
    }

    pub fn dataset_path(&self, name: &str) -> PathBuf {
        self.root.join("datasets").join(name)
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.dataset_path("manifest.json")
    }

    pub fn model_path(&self, name: &str) -> PathBuf {
        self.root.join("models").join(name)
    }

    pub fn spans_path(&self, id: &str) -> PathBuf {
        self.root.join("predictions").join(format!("{id}.spans.json"))
    }

    pub fn pairs_path(&self, id: &str) -> PathBuf {
        self.root.join("predictions").join(format!("{id}.pairs.jsonl"))
    }

    pub fn output_path(&self, id: &str, ext: &str) -> PathBuf {
        self.root.join("output").join(format!("{id}.{ext}"))
    }

    pub fn report_path(&self, name: &str) -> PathBuf {
        self.root.join("reports").join(name)
    }

    /// Document ids found in `docs/`, sorted.
    pub fn doc_ids(&self) -> Result<Vec<String>> {
        let dir = self.docs_dir();
        let mut ids = Vec::new();
        for entry in fs::read_dir(&dir).with_context(|| format!("reading {}", dir.display()))? {
            let name = entry?.file_name().to_string_lossy().into_owned();
            if let Some(id) = name.strip_suffix(TRANSCRIPT_SUFFIX) {
                ids.push(id.to_string());
            }
        }
        ids.sort();
        if ids.is_empty() {
            return Err(procex::Error::Data(format!("no *{TRANSCRIPT_SUFFIX} files in {}", dir.display())).into());
        }
        Ok(ids)
    }

    pub fn transcript(&self, id: &str) -> Result<Transcript> {
        let path = self.transcript_path(id);
        let f = open(&path)?;
        load_transcript(id, f).with_context(|| format!("loading {}", path.display()))
    }

    /// The parsed graph from `graphs/`, or the protocol file parsed on the fly.
    pub fn graph(&self, id: &str) -> Result<ProtocolGraph> {
        let cached = self.graph_path(id);
        if cached.exists() {
            return read_json(&cached);
        }
        let path = self.protocol_path(id);
        parse_protocol(open(&path)?).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn annotation(&self, id: &str) -> Result<Option<ManualAnnotation>> {
        let path = self.annotation_path(id);
        if !path.exists() {
            return Ok(None);
        }
        let ann = load_annotation(open(&path)?).with_context(|| format!("loading {}", path.display()))?;
        Ok(Some(ann))
    }

    pub fn embeddings(&self) -> Result<Embeddings> {
        let path = self.embeddings_path();
        load_embeddings(open(&path)?).with_context(|| format!("loading {}", path.display()))
    }

    pub fn matched(&self, id: &str) -> Result<MatchedGraph<f64>> {
        read_json(&self.match_path(id))
    }

    pub fn manifest(&self) -> Result<DatasetManifest> {
        read_json(&self.manifest_path())
    }
}

fn open(path: &Path) -> Result<BufReader<fs::File>> {
    let f = fs::File::open(path)
        .map_err(procex::Error::from)
        .with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(procex::Error::from)
        .with_context(|| format!("reading {}", path.display()))
}

pub fn read_json<V: DeserializeOwned>(path: &Path) -> Result<V> {
    let text = read_text(path)?;
    serde_json::from_str(&text)
        .map_err(procex::Error::from)
        .with_context(|| format!("parsing {}", path.display()))
}

pub fn read_jsonl<V: DeserializeOwned>(path: &Path) -> Result<Vec<V>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(procex::Error::from)?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line)
            .map_err(|e| procex::Error::Format {
                line: i + 1,
                msg: e.to_string(),
            })
            .with_context(|| format!("parsing {}", path.display()))?;
        out.push(v);
    }
    Ok(out)
}

/// Writes through a temporary file in the target directory, then renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)
        .map_err(procex::Error::from)
        .with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(procex::Error::from)?;
    tmp.write_all(contents).map_err(procex::Error::from)?;
    tmp.persist(path)
        .map_err(|e| procex::Error::from(e.error))
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_json<V: Serialize>(path: &Path, value: &V) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(procex::Error::from)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn write_jsonl<'a, V: Serialize + 'a>(path: &Path, rows: impl IntoIterator<Item = &'a V>) -> Result<()> {
    let mut text = String::new();
    for r in rows {
        text.push_str(&serde_json::to_string(r).map_err(procex::Error::from)?);
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}
