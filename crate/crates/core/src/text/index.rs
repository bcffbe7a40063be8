use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tokenize::{Tokenizer, TokenizerConfig};
use super::vector::SparseVector;
use crate::error::{Error, Result};

const CACHE_MAGIC: &[u8; 8] = b"ABIRIDX\0";
const CACHE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScoringMode {
    #[default]
    TfidfCosine,
    Bm25 { k1: f64, b: f64 },
}

impl ScoringMode {
    pub fn bm25() -> Self {
        ScoringMode::Bm25 { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

/// Term-at-a-time inverted index with smoothed idf `ln((N+1)/(df+1)) + 1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvertedIndex {
    mode: ScoringMode,
    tokenizer: TokenizerConfig,
    terms: Vec<String>,
    postings: Vec<Vec<Posting>>,
    idf: Vec<f64>,
    doc_lens: Vec<u32>,
    doc_norms: Vec<f64>,
    avg_doc_len: f64,
    #[serde(skip)]
    lookup: HashMap<String, u32>,
}

pub fn idf(n_docs: usize, df: usize) -> f64 {
    ((n_docs as f64 + 1.0) / (df as f64 + 1.0)).ln() + 1.0
}

/// Sorts hits by descending score, then ascending id.
pub fn rank_order(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

impl InvertedIndex {
    /// Indexes `corpus` with stopwords removed (forced on regardless of the
    /// tokenizer's own setting).
    pub fn build<S: AsRef<str>>(corpus: &[S], mode: ScoringMode, tokenizer: &Tokenizer) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyInput("cannot index an empty corpus".into()));
        }
        let config = TokenizerConfig {
            remove_stopwords: true,
            ..tokenizer.config()
        };
        let tokenizer = tokenizer.reconfigured(config);

        let mut lookup: HashMap<String, u32> = HashMap::new();
        let mut terms: Vec<String> = Vec::new();
        let mut postings: Vec<Vec<Posting>> = Vec::new();
        let mut doc_lens = Vec::with_capacity(corpus.len());
        let mut doc_tfs: Vec<BTreeMap<String, u32>> = Vec::with_capacity(corpus.len());

        for (doc, text) in corpus.iter().enumerate() {
            let tokens = tokenizer.tokenize(text.as_ref());
            doc_lens.push(tokens.len() as u32);
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            for (term, &count) in &tf {
                let id = *lookup.entry(term.clone()).or_insert_with(|| {
                    terms.push(term.clone());
                    postings.push(Vec::new());
                    (terms.len() - 1) as u32
                });
                postings[id as usize].push(Posting {
                    doc: doc as u32,
                    tf: count,
                });
            }
            doc_tfs.push(tf);
        }

        let n = corpus.len();
        let idf: Vec<f64> = postings.iter().map(|p| idf(n, p.len())).collect();
        let doc_norms = doc_tfs
            .iter()
            .map(|tf| {
                tf.iter()
                    .map(|(t, &c)| {
                        let w = f64::from(c) * idf[lookup[t] as usize];
                        w * w
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        let avg_doc_len = doc_lens.iter().map(|&l| u64::from(l)).sum::<u64>() as f64 / n as f64;

        Ok(Self {
            mode,
            tokenizer: config,
            terms,
            postings,
            idf,
            doc_lens,
            doc_norms,
            avg_doc_len,
            lookup,
        })
    }

    pub fn mode(&self) -> ScoringMode {
        self.mode
    }

    pub fn tokenizer_config(&self) -> TokenizerConfig {
        self.tokenizer
    }

    pub fn doc_count(&self) -> usize {
        self.doc_lens.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.terms.len()
    }

    pub fn doc_len(&self, doc: usize) -> usize {
        self.doc_lens[doc] as usize
    }

    pub fn df(&self, term: &str) -> usize {
        self.lookup.get(term).map_or(0, |&id| self.postings[id as usize].len())
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.lookup.get(term).map(|&id| self.idf[id as usize])
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.lookup
            .get(term)
            .map_or(&[][..], |&id| &self.postings[id as usize])
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(String::as_str)
    }

    /// tf·idf vector of `tokens`; out-of-vocabulary terms are dropped.
    pub fn tfidf_vector<S: AsRef<str>>(&self, tokens: &[S]) -> SparseVector {
        let mut v = SparseVector::new();
        for t in tokens {
            if let Some(w) = self.idf(t.as_ref()) {
                v.add(t.as_ref(), w);
            }
        }
        v
    }

    /// Score of every document (zeros included), indexed by doc id.
    pub fn score_all<S: AsRef<str>>(&self, query: &[S]) -> Vec<f64> {
        let mut scores = vec![0.0; self.doc_count()];
        let mut qtf: BTreeMap<&str, u32> = BTreeMap::new();
        for t in query {
            if self.lookup.contains_key(t.as_ref()) {
                *qtf.entry(t.as_ref()).or_default() += 1;
            }
        }
        if qtf.is_empty() {
            return scores;
        }
        match self.mode {
            ScoringMode::TfidfCosine => {
                let mut qnorm = 0.0;
                for (term, &c) in &qtf {
                    let id = self.lookup[*term] as usize;
                    let qw = f64::from(c) * self.idf[id];
                    qnorm += qw * qw;
                    for p in &self.postings[id] {
                        scores[p.doc as usize] += qw * f64::from(p.tf) * self.idf[id];
                    }
                }
                let qnorm = qnorm.sqrt();
                for (doc, s) in scores.iter_mut().enumerate() {
                    if *s > 0.0 {
                        *s = (*s / (qnorm * self.doc_norms[doc])).min(1.0);
                    }
                }
            }
            ScoringMode::Bm25 { k1, b } => {
                for term in qtf.keys() {
                    let id = self.lookup[*term] as usize;
                    for p in &self.postings[id] {
                        let tf = f64::from(p.tf);
                        let len_norm = if self.avg_doc_len > 0.0 {
                            f64::from(self.doc_lens[p.doc as usize]) / self.avg_doc_len
                        } else {
                            0.0
                        };
                        scores[p.doc as usize] +=
                            self.idf[id] * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len_norm));
                    }
                }
            }
        }
        scores
    }

    /// Exact top-`top_n` documents with a positive score, best first, ties by
    /// ascending doc id.
    pub fn query<S: AsRef<str>>(&self, query: &[S], top_n: usize) -> Vec<(usize, f64)> {
        if top_n == 0 {
            return Vec::new();
        }
        let mut hits: Vec<(usize, f64)> = self
            .score_all(query)
            .into_iter()
            .enumerate()
            .filter(|&(_, s)| s > 0.0)
            .collect();
        hits.sort_by(rank_order);
        hits.truncate(top_n);
        hits
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let body = serde_json::to_vec(self).map_err(|e| Error::Validation(e.to_string()))?;
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(CACHE_MAGIC)
            .and_then(|_| f.write_all(&CACHE_VERSION.to_le_bytes()))
            .and_then(|_| f.write_all(&body))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        if bytes.len() < 12 || &bytes[..8] != CACHE_MAGIC {
            return Err(Error::parse(path, 0, "not an index cache file"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != CACHE_VERSION {
            return Err(Error::parse(
                path,
                0,
                format!("index cache version {version}, expected {CACHE_VERSION}"),
            ));
        }
        let mut index: InvertedIndex =
            serde_json::from_slice(&bytes[12..]).map_err(|e| Error::parse(path, 0, e.to_string()))?;
        index.lookup = index
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Ok(index)
    }
}

/// Convenience wrapper over [`InvertedIndex::build`].
pub fn build_index<S: AsRef<str>>(corpus: &[S], mode: ScoringMode, tokenizer: &Tokenizer) -> Result<InvertedIndex> {
    InvertedIndex::build(corpus, mode, tokenizer)
}

/// Convenience wrapper over [`InvertedIndex::query`].
pub fn query_index<S: AsRef<str>>(index: &InvertedIndex, query: &[S], top_n: usize) -> Vec<(usize, f64)> {
    index.query(query, top_n)
}
