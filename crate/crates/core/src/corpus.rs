//! Loading and validation of questions, sentence corpora and embedding
//! tables, plus line-delimited JSON persistence for stage artifacts.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    A,
    B,
    C,
    D,
}

impl Label {
    pub const ALL: [Label; 4] = [Label::A, Label::B, Label::C, Label::D];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        ["A", "B", "C", "D"][self.index()]
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" => Ok(Label::A),
            "B" => Ok(Label::B),
            "C" => Ok(Label::C),
            "D" => Ok(Label::D),
            other => Err(Error::Validation(format!("invalid option label `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerOption {
    pub label: Label,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Question {
    pub id: String,
    pub stem: String,
    /// Always four options, ordered A..D after validation.
    pub options: Vec<AnswerOption>,
    pub answer_key: Label,
    pub gold_fact: Option<String>,
    pub gold_missing_knowledge: Option<Vec<String>>,
}

impl Question {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(format!("question `{}`: {m}", self.id)));
        if self.id.trim().is_empty() {
            return bad("empty id".into());
        }
        if self.stem.trim().is_empty() {
            return bad("empty stem".into());
        }
        if self.options.len() != 4 {
            return bad(format!("expected 4 options, found {}", self.options.len()));
        }
        let labels: HashSet<Label> = self.options.iter().map(|o| o.label).collect();
        if labels.len() != 4 {
            return bad("duplicate option labels".into());
        }
        if !labels.contains(&self.answer_key) {
            return bad(format!("answer key {} is not an option", self.answer_key));
        }
        Ok(())
    }

    pub fn option(&self, label: Label) -> &AnswerOption {
        self.options
            .iter()
            .find(|o| o.label == label)
            .expect("validated question has every label")
    }

    pub fn correct_option(&self) -> &AnswerOption {
        self.option(self.answer_key)
    }
}

// OpenBookQA release layout.
#[derive(Serialize, Deserialize)]
struct RawQuestion {
    id: String,
    question: RawStem,
    #[serde(rename = "answerKey")]
    answer_key: String,
    #[serde(default, skip_serializing_if = "Option::is_none", alias = "gold_fact")]
    fact1: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gold_missing_knowledge: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct RawStem {
    stem: String,
    choices: Vec<RawChoice>,
}

#[derive(Serialize, Deserialize)]
struct RawChoice {
    text: String,
    label: String,
}

impl RawQuestion {
    fn into_question(self) -> Result<Question> {
        let mut options = self
            .question
            .choices
            .into_iter()
            .map(|c| {
                Ok(AnswerOption {
                    label: c.label.parse()?,
                    text: c.text,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        options.sort_by_key(|o| o.label);
        let q = Question {
            id: self.id,
            stem: self.question.stem,
            options,
            answer_key: self.answer_key.parse()?,
            gold_fact: self.fact1,
            gold_missing_knowledge: self.gold_missing_knowledge,
        };
        q.validate()?;
        Ok(q)
    }

    fn from_question(q: &Question) -> Self {
        RawQuestion {
            id: q.id.clone(),
            question: RawStem {
                stem: q.stem.clone(),
                choices: q
                    .options
                    .iter()
                    .map(|o| RawChoice {
                        text: o.text.clone(),
                        label: o.label.to_string(),
                    })
                    .collect(),
            },
            answer_key: q.answer_key.to_string(),
            fact1: q.gold_fact.clone(),
            gold_missing_knowledge: q.gold_missing_knowledge.clone(),
        }
    }
}

fn open(path: &Path) -> Result<BufReader<std::fs::File>> {
    std::fs::File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<std::fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub fn parse_questions(text: &str, path: &Path) -> Result<Vec<Question>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawQuestion =
            serde_json::from_str(line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        let q = raw.into_question().map_err(|e| match e {
            Error::Validation(m) => Error::Validation(format!("{}:{}: {m}", path.display(), i + 1)),
            other => other,
        })?;
        if !seen.insert(q.id.clone()) {
            return Err(Error::Validation(format!(
                "{}:{}: duplicate question id `{}`",
                path.display(),
                i + 1,
                q.id
            )));
        }
        out.push(q);
    }
    if out.is_empty() {
        return Err(Error::EmptyInput(format!("{}: no questions", path.display())));
    }
    Ok(out)
}

/// Reads OpenBookQA-style JSONL, preserving file order.
pub fn load_questions(path: &Path) -> Result<Vec<Question>> {
    let mut text = String::new();
    open(path)?
        .read_to_string(&mut text)
        .map_err(|e| Error::io(path, e))?;
    parse_questions(&text, path)
}

pub fn write_questions(path: &Path, questions: &[Question]) -> Result<()> {
    let raws: Vec<RawQuestion> = questions.iter().map(RawQuestion::from_question).collect();
    write_jsonl(path, &raws)
}

/// An ordered sentence collection with dense ids. Used both for the open
/// book of facts and the external knowledge corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    sentences: Vec<String>,
}

pub type FactCorpus = Corpus;
pub type KnowledgeCorpus = Corpus;

impl Corpus {
    pub fn new(sentences: Vec<String>) -> Result<Self> {
        if sentences.is_empty() {
            return Err(Error::EmptyInput("corpus is empty".into()));
        }
        if let Some(i) = sentences.iter().position(|s| s.trim().is_empty()) {
            return Err(Error::Validation(format!("corpus entry {i} is empty")));
        }
        Ok(Self { sentences })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::new(
            text.lines()
                .map(strip_quotes)
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&str> {
        self.sentences.get(id).map(String::as_str)
    }

    pub fn texts(&self) -> &[String] {
        &self.sentences
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &str)> {
        self.sentences.iter().map(String::as_str).enumerate()
    }
}

fn strip_quotes(line: &str) -> &str {
    let t = line.trim();
    if t.len() >= 2 && t.starts_with('"') && t.ends_with('"') {
        t[1..t.len() - 1].trim()
    } else {
        t
    }
}

fn load_corpus(path: &Path) -> Result<Corpus> {
    let mut text = String::new();
    open(path)?
        .read_to_string(&mut text)
        .map_err(|e| Error::io(path, e))?;
    Corpus::parse(&text).map_err(|e| match e {
        Error::EmptyInput(m) => Error::EmptyInput(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// One fact per line; surrounding double quotes and blank lines dropped.
pub fn load_facts(path: &Path) -> Result<FactCorpus> {
    load_corpus(path)
}

pub fn load_knowledge(path: &Path) -> Result<KnowledgeCorpus> {
    load_corpus(path)
}

pub fn write_corpus(path: &Path, corpus: &Corpus) -> Result<()> {
    let mut w = create(path)?;
    for s in corpus.texts() {
        writeln!(w, "{s}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

const EMBEDDING_MAGIC: &[u8; 8] = b"ABEMB001";

/// Exact-string keyed dense vectors of uniform dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: IndexMap<String, Vec<f32>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Validation("embedding dim must be positive".into()));
        }
        Ok(Self {
            dim,
            vectors: IndexMap::new(),
        })
    }

    pub fn insert(&mut self, key: impl Into<String>, vector: Vec<f32>) -> Result<()> {
        let key = key.into();
        if vector.len() != self.dim {
            return Err(Error::Validation(format!(
                "embedding `{key}` has dim {}, expected {}",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation(format!("embedding `{key}` has a non-finite component")));
        }
        if key.contains('\t') || key.contains('\n') {
            return Err(Error::Validation(format!("embedding key `{key}` contains a tab or newline")));
        }
        if self.vectors.contains_key(&key) {
            return Err(Error::Validation(format!("duplicate key `{key}`")));
        }
        self.vectors.insert(key, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&[f32]> {
        self.vectors.get(key).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    fn parse_tsv(text: &str, path: &Path) -> Result<Self> {
        let mut table: Option<EmbeddingTable> = None;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let key = fields.next().unwrap_or_default();
            let vector = fields
                .map(|f| f.trim().parse::<f32>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
            let t = match &mut table {
                Some(t) => t,
                None => table.insert(EmbeddingTable::new(vector.len()).map_err(|_| {
                    Error::parse(path, i + 1, "embedding line has no components")
                })?),
            };
            t.insert(key, vector).map_err(|e| match e {
                Error::Validation(m) => Error::parse(path, i + 1, m),
                other => other,
            })?;
        }
        table.ok_or_else(|| Error::EmptyInput(format!("{}: no embeddings", path.display())))
    }

    fn parse_binary(bytes: &[u8], path: &Path) -> Result<Self> {
        let truncated = || Error::parse(path, 0, "truncated embedding file");
        let mut pos = EMBEDDING_MAGIC.len();
        let mut take = |n: usize| -> Result<&[u8]> {
            let s = bytes.get(pos..pos + n).ok_or_else(truncated)?;
            pos += n;
            Ok(s)
        };
        let read_u32 = |b: &[u8]| u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize;
        let dim = read_u32(take(4)?);
        let count = read_u32(take(4)?);
        let mut table = EmbeddingTable::new(dim).map_err(|e| Error::parse(path, 0, e.to_string()))?;
        for _ in 0..count {
            let key_len = read_u32(take(4)?);
            let key = std::str::from_utf8(take(key_len)?)
                .map_err(|e| Error::parse(path, 0, e.to_string()))?
                .to_string();
            let raw = take(4 * dim)?;
            let v = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            table.insert(key, v).map_err(|e| Error::parse(path, 0, e.to_string()))?;
        }
        if pos != bytes.len() {
            return Err(Error::parse(path, 0, "trailing bytes after embeddings"));
        }
        if table.is_empty() {
            return Err(Error::EmptyInput(format!("{}: no embeddings", path.display())));
        }
        Ok(table)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.vectors {
            out.push_str(k);
            for x in v {
                out.push('\t');
                out.push_str(&x.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = EMBEDDING_MAGIC.to_vec();
        out.extend((self.dim as u32).to_le_bytes());
        out.extend((self.vectors.len() as u32).to_le_bytes());
        for (k, v) in &self.vectors {
            out.extend((k.len() as u32).to_le_bytes());
            out.extend(k.as_bytes());
            for x in v {
                out.extend(x.to_le_bytes());
            }
        }
        out
    }
}

/// Loads either the binary layout (detected by magic) or `key TAB f32...` TSV.
pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let mut bytes = Vec::new();
    open(path)?
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(EMBEDDING_MAGIC) {
        return EmbeddingTable::parse_binary(&bytes, path);
    }
    let text = String::from_utf8(bytes).map_err(|e| Error::parse(path, 0, e.to_string()))?;
    EmbeddingTable::parse_tsv(&text, path)
}

pub fn write_embeddings_tsv(path: &Path, table: &EmbeddingTable) -> Result<()> {
    std::fs::write(path, table.to_tsv()).map_err(|e| Error::io(path, e))
}

pub fn write_embeddings_binary(path: &Path, table: &EmbeddingTable) -> Result<()> {
    std::fs::write(path, table.to_binary()).map_err(|e| Error::io(path, e))
}

/// Writes one JSON object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = create(path)?;
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| Error::Validation(e.to_string()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn append_jsonl<T: Serialize>(path: &Path, item: &T) -> Result<()> {
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut line = serde_json::to_vec(item).map_err(|e| Error::Validation(e.to_string()))?;
    line.push(b'\n');
    f.write_all(&line).map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?);
    }
    Ok(out)
}
