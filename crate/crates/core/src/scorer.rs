//! Pluggable text-pair similarity scorers.
//!
//! Scorers report raw scores in their own range: TF-IDF cosine lives in
//! [0, 1], STS-style scorers in [0, 5]. Normalization to a common scale is
//! left to consumers that need it.

use std::collections::HashMap;
use std::sync::Arc;

use crate::corpus::EmbeddingTable;
use crate::error::{Error, Result};
use crate::text::{cosine_sim, dense_cosine, InvertedIndex, ScoringMode, SparseVector, Tokenizer};

pub const STS_MAX: f64 = 5.0;

pub trait SimilarityScorer: Send + Sync {
    fn name(&self) -> &str;

    /// Inclusive (lo, hi) bounds of every score this scorer produces.
    fn range(&self) -> (f64, f64);

    /// Scores `query` against every candidate, aligned with `candidates`.
    fn score_batch(&self, query: &str, candidates: &[&str]) -> Result<Vec<f64>>;

    fn score(&self, a: &str, b: &str) -> Result<f64> {
        Ok(self.score_batch(a, &[b])?[0])
    }

    /// Scores arbitrary pairs, aligned with `pairs`.
    fn score_pairs(&self, pairs: &[(&str, &str)]) -> Result<Vec<f64>> {
        pairs.iter().map(|&(a, b)| self.score(a, b)).collect()
    }
}

/// Rejects non-finite or out-of-range scores.
pub(crate) fn check_scores(scorer: &dyn SimilarityScorer, scores: &[f64]) -> Result<()> {
    let (lo, hi) = scorer.range();
    let slack = 1e-9 * (hi - lo).abs().max(1.0);
    match scores.iter().find(|s| !s.is_finite() || **s < lo - slack || **s > hi + slack) {
        Some(bad) => Err(Error::scorer(
            scorer.name(),
            format!("score {bad} outside [{lo}, {hi}]"),
        )),
        None => Ok(()),
    }
}

/// Cosine over tf·idf term vectors, idf taken from an index. Vectors for the
/// indexed documents are precomputed.
pub struct TfidfScorer {
    index: Arc<InvertedIndex>,
    tokenizer: Tokenizer,
    cached: HashMap<String, SparseVector>,
}

impl TfidfScorer {
    /// Builds a TF-IDF cosine index over `texts` and caches their vectors.
    pub fn new<S: AsRef<str>>(texts: &[S], tokenizer: &Tokenizer) -> Result<Self> {
        let index = InvertedIndex::build(texts, ScoringMode::TfidfCosine, tokenizer)?;
        Ok(Self::from_index(Arc::new(index), texts, tokenizer))
    }

    /// `texts` must be the documents `index` was built from, in order.
    pub fn from_index<S: AsRef<str>>(index: Arc<InvertedIndex>, texts: &[S], tokenizer: &Tokenizer) -> Self {
        let tokenizer = tokenizer.reconfigured(index.tokenizer_config());
        let cached = texts
            .iter()
            .map(|t| {
                let t = t.as_ref();
                (t.to_string(), index.tfidf_vector(&tokenizer.tokenize(t)))
            })
            .collect();
        Self {
            index,
            tokenizer,
            cached,
        }
    }

    pub fn index(&self) -> &Arc<InvertedIndex> {
        &self.index
    }

    pub fn vector(&self, text: &str) -> SparseVector {
        match self.cached.get(text) {
            Some(v) => v.clone(),
            None => self.index.tfidf_vector(&self.tokenizer.tokenize(text)),
        }
    }

    fn with_vector<R>(&self, text: &str, f: impl FnOnce(&SparseVector) -> R) -> R {
        match self.cached.get(text) {
            Some(v) => f(v),
            None => f(&self.index.tfidf_vector(&self.tokenizer.tokenize(text))),
        }
    }
}

impl SimilarityScorer for TfidfScorer {
    fn name(&self) -> &str {
        "tfidf"
    }

    fn range(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn score_batch(&self, query: &str, candidates: &[&str]) -> Result<Vec<f64>> {
        let q = self.vector(query);
        Ok(candidates
            .iter()
            .map(|c| self.with_vector(c, |v| cosine_sim(&q, v)))
            .collect())
    }

    fn score_pairs(&self, pairs: &[(&str, &str)]) -> Result<Vec<f64>> {
        Ok(pairs
            .iter()
            .map(|&(a, b)| self.with_vector(a, |va| self.with_vector(b, |vb| cosine_sim(va, vb))))
            .collect())
    }
}

/// Cosine of precomputed sentence embeddings looked up by exact text,
/// negative cosines clipped to 0 and the result scaled to [0, 5].
pub struct EmbeddingScorer {
    table: Arc<EmbeddingTable>,
    scale: f64,
}

impl EmbeddingScorer {
    pub fn new(table: Arc<EmbeddingTable>) -> Self {
        Self { table, scale: STS_MAX }
    }

    /// Unscaled variant in [0, 1], used as a redundancy measure.
    pub fn unit(table: Arc<EmbeddingTable>) -> Self {
        Self { table, scale: 1.0 }
    }

    fn lookup<'a>(&'a self, keys: &[&str]) -> Result<Vec<&'a [f32]>> {
        let mut missing = Vec::new();
        let mut out = Vec::with_capacity(keys.len());
        for k in keys {
            match self.table.get(k) {
                Some(v) => out.push(v),
                None => missing.push(k.to_string()),
            }
        }
        if missing.is_empty() {
            Ok(out)
        } else {
            missing.dedup();
            Err(Error::MissingEmbedding(missing))
        }
    }
}

impl SimilarityScorer for EmbeddingScorer {
    fn name(&self) -> &str {
        "embedding"
    }

    fn range(&self) -> (f64, f64) {
        (0.0, self.scale)
    }

    fn score_batch(&self, query: &str, candidates: &[&str]) -> Result<Vec<f64>> {
        let mut keys = Vec::with_capacity(candidates.len() + 1);
        keys.push(query);
        keys.extend_from_slice(candidates);
        let vecs = self.lookup(&keys)?;
        Ok(vecs[1..]
            .iter()
            .map(|v| dense_cosine(vecs[0], v).max(0.0) * self.scale)
            .collect())
    }
}

/// Multiplies another scorer's output by a positive constant, e.g. TF-IDF
/// cosine × 5 as a lexical stand-in for an STS model.
pub struct ScaledScorer<S> {
    inner: S,
    factor: f64,
    name: String,
}

impl<S: SimilarityScorer> ScaledScorer<S> {
    pub fn new(inner: S, factor: f64) -> Self {
        assert!(factor > 0.0 && factor.is_finite(), "scale factor must be positive");
        let name = format!("{}x{}", inner.name(), factor);
        Self { inner, factor, name }
    }

    pub fn sts(inner: S) -> Self {
        let (_, hi) = inner.range();
        Self::new(inner, STS_MAX / hi)
    }
}

impl<S: SimilarityScorer> SimilarityScorer for ScaledScorer<S> {
    fn name(&self) -> &str {
        &self.name
    }

    fn range(&self) -> (f64, f64) {
        let (lo, hi) = self.inner.range();
        (lo * self.factor, hi * self.factor)
    }

    fn score_batch(&self, query: &str, candidates: &[&str]) -> Result<Vec<f64>> {
        Ok(self
            .inner
            .score_batch(query, candidates)?
            .into_iter()
            .map(|s| s * self.factor)
            .collect())
    }

    fn score_pairs(&self, pairs: &[(&str, &str)]) -> Result<Vec<f64>> {
        Ok(self
            .inner
            .score_pairs(pairs)?
            .into_iter()
            .map(|s| s * self.factor)
            .collect())
    }
}

impl<T: SimilarityScorer + ?Sized> SimilarityScorer for Arc<T> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn range(&self) -> (f64, f64) {
        (**self).range()
    }

    fn score_batch(&self, query: &str, candidates: &[&str]) -> Result<Vec<f64>> {
        (**self).score_batch(query, candidates)
    }

    fn score(&self, a: &str, b: &str) -> Result<f64> {
        (**self).score(a, b)
    }

    fn score_pairs(&self, pairs: &[(&str, &str)]) -> Result<Vec<f64>> {
        (**self).score_pairs(pairs)
    }
}
