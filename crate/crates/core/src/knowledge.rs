//! Missing-knowledge retrieval and information-gain re-ranking.
//!
//! Re-ranking is greedy. The first pick is the candidate with the highest
//! relevance. After each pick every remaining candidate's redundancy is
//! raised to its similarity with the item just picked,
//!
//! ```text
//! red_i(K_j) = max(red_{i-1}(K_j), sim(K_i, K_j))
//! rank_score(K_j) = (1 - red_i(K_j)) * rel(K_j) / rel_max
//! ```
//!
//! and the best `rank_score` is picked next. Because `red` is a running max
//! this equals the redundancy against every item selected so far.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::abduction::AbducedQuery;
use crate::corpus::{EmbeddingTable, KnowledgeCorpus, Label};
use crate::error::{Error, Result};
use crate::scorer::{check_scores, SimilarityScorer, TfidfScorer};
use crate::text::{cosine_sim, dense_cosine, InvertedIndex, SparseVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeItem {
    pub question_id: String,
    pub option_label: Label,
    pub sent_id: usize,
    pub text: String,
    pub rel: f64,
    pub red: f64,
    pub rank_score: f64,
}

/// Stage record: candidate pool or re-ranked selection for one (question, option).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeList {
    pub question_id: String,
    pub option_label: Label,
    pub items: Vec<KnowledgeItem>,
}

/// Where candidate relevance comes from.
pub enum Relevance<'a> {
    /// Re-score each hit against the hypothesis.
    Scorer(&'a dyn SimilarityScorer),
    /// Keep the index's own score.
    Ir,
}

fn by_rel(a: &KnowledgeItem, b: &KnowledgeItem) -> std::cmp::Ordering {
    b.rel.total_cmp(&a.rel).then(a.sent_id.cmp(&b.sent_id))
}

/// Top `pool_m` index hits for the query, ordered by relevance (ties by
/// ascending sentence id). An empty query yields an empty pool.
pub fn retrieve_candidates(
    query: &AbducedQuery,
    hypothesis_text: &str,
    index: &InvertedIndex,
    corpus: &KnowledgeCorpus,
    pool_m: usize,
    relevance: Relevance<'_>,
) -> Result<Vec<KnowledgeItem>> {
    if pool_m == 0 {
        return Err(Error::Config("pool_m must be at least 1".into()));
    }
    let tokens: Vec<&str> = query.tokens.iter().collect();
    let hits = index.query(&tokens, pool_m);
    let texts: Vec<&str> = hits
        .iter()
        .map(|&(id, _)| corpus.get(id).expect("index built over this corpus"))
        .collect();
    let rels = match relevance {
        Relevance::Ir => hits.iter().map(|&(_, s)| s).collect(),
        Relevance::Scorer(scorer) => {
            let scores = scorer.score_batch(hypothesis_text, &texts)?;
            check_scores(scorer, &scores)?;
            scores
        }
    };
    let mut items: Vec<KnowledgeItem> = hits
        .iter()
        .zip(texts)
        .zip(rels)
        .map(|((&(sent_id, _), text), rel)| KnowledgeItem {
            question_id: query.question_id.clone(),
            option_label: query.option_label,
            sent_id,
            text: text.to_string(),
            rel,
            red: 0.0,
            rank_score: rel,
        })
        .collect();
    items.sort_by(by_rel);
    Ok(items)
}

/// Greedy information-gain selection of up to `top_k` items. `rel_max`
/// normalizes relevance into [0, 1] (the relevance scorer's upper bound).
/// `sim` must be symmetric; values are clamped to [0, 1]. Returned items
/// carry the redundancy and rank score they had when picked.
pub fn information_gain_rerank<F>(pool: &[KnowledgeItem], mut sim: F, top_k: usize, rel_max: f64) -> Vec<KnowledgeItem>
where
    F: FnMut(&KnowledgeItem, &KnowledgeItem) -> f64,
{
    let n = pool.len();
    let k = top_k.min(n);
    if k == 0 {
        return Vec::new();
    }
    let scale = if rel_max > 0.0 { rel_max } else { 1.0 };
    let rel: Vec<f64> = pool.iter().map(|it| it.rel / scale).collect();
    let mut red = vec![0.0f64; n];
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(k);

    let better = |a: usize, sa: f64, b: usize, sb: f64| match sa.total_cmp(&sb) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => pool[a].sent_id < pool[b].sent_id,
    };

    let pick = |remaining: &mut Vec<usize>, score: &dyn Fn(usize) -> f64| -> usize {
        let mut best = 0;
        for pos in 1..remaining.len() {
            if better(remaining[pos], score(remaining[pos]), remaining[best], score(remaining[best])) {
                best = pos;
            }
        }
        remaining.remove(best)
    };

    let first = pick(&mut remaining, &|j| rel[j]);
    out.push(KnowledgeItem {
        red: 0.0,
        rank_score: rel[first],
        ..pool[first].clone()
    });
    let mut last = first;

    while out.len() < k {
        for &j in &remaining {
            let s = sim(&pool[last], &pool[j]).clamp(0.0, 1.0);
            red[j] = red[j].max(s);
        }
        let rank = |j: usize| (1.0 - red[j]) * rel[j];
        let next = pick(&mut remaining, &rank);
        out.push(KnowledgeItem {
            red: red[next],
            rank_score: rank(next),
            ..pool[next].clone()
        });
        last = next;
    }
    out
}

/// Same selection as [`information_gain_rerank`] but recomputing each
/// candidate's redundancy as the max similarity over all selected items.
pub fn rerank_max_over_selected<F>(pool: &[KnowledgeItem], mut sim: F, top_k: usize, rel_max: f64) -> Vec<KnowledgeItem>
where
    F: FnMut(&KnowledgeItem, &KnowledgeItem) -> f64,
{
    let scale = if rel_max > 0.0 { rel_max } else { 1.0 };
    let k = top_k.min(pool.len());
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let mut out = Vec::with_capacity(k);
    while chosen.len() < k {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in (0..pool.len()).filter(|j| !chosen.contains(j)) {
            let red = chosen
                .iter()
                .map(|&s| sim(&pool[s], &pool[j]).clamp(0.0, 1.0))
                .fold(0.0, f64::max);
            let score = (1.0 - red) * pool[j].rel / scale;
            let wins = match best {
                None => true,
                Some((b, _, bs)) => score > bs || (score == bs && pool[j].sent_id < pool[b].sent_id),
            };
            if wins {
                best = Some((j, red, score));
            }
        }
        let (j, red, score) = best.expect("k <= pool size");
        chosen.push(j);
        out.push(KnowledgeItem {
            red,
            rank_score: score,
            ..pool[j].clone()
        });
    }
    out
}

/// Redundancy similarity between pool sentences.
#[derive(Clone)]
pub enum PoolSimilarity {
    Tfidf(Arc<TfidfScorer>),
    Embedding(Arc<EmbeddingTable>),
}

impl PoolSimilarity {
    /// Precomputes one representation per pool item so the re-ranker's
    /// similarity calls cannot fail.
    pub fn prepare(&self, pool: &[KnowledgeItem]) -> Result<PreparedPool> {
        match self {
            PoolSimilarity::Tfidf(scorer) => Ok(PreparedPool::Sparse(
                pool.iter().map(|it| (it.sent_id, scorer.vector(&it.text))).collect(),
            )),
            PoolSimilarity::Embedding(table) => {
                let mut missing = Vec::new();
                let mut vecs = Vec::with_capacity(pool.len());
                for it in pool {
                    match table.get(&it.text) {
                        Some(v) => vecs.push((it.sent_id, v.to_vec())),
                        None => missing.push(it.text.clone()),
                    }
                }
                if missing.is_empty() {
                    Ok(PreparedPool::Dense(vecs))
                } else {
                    Err(Error::MissingEmbedding(missing))
                }
            }
        }
    }
}

pub enum PreparedPool {
    Sparse(Vec<(usize, SparseVector)>),
    Dense(Vec<(usize, Vec<f32>)>),
}

impl PreparedPool {
    pub fn sim(&self, a: &KnowledgeItem, b: &KnowledgeItem) -> f64 {
        fn find<T>(v: &[(usize, T)], id: usize) -> &T {
            &v.iter().find(|(s, _)| *s == id).expect("prepared for this pool").1
        }
        match self {
            PreparedPool::Sparse(v) => cosine_sim(find(v, a.sent_id), find(v, b.sent_id)),
            PreparedPool::Dense(v) => dense_cosine(find(v, a.sent_id), find(v, b.sent_id)).max(0.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abduction::AbductionModel;
    use crate::corpus::Corpus;
    use crate::text::{ScoringMode, TokenSet, Tokenizer};

    fn item(sent_id: usize, rel: f64) -> KnowledgeItem {
        KnowledgeItem {
            question_id: "q".into(),
            option_label: Label::A,
            sent_id,
            text: format!("s{sent_id}"),
            rel,
            red: 0.0,
            rank_score: rel,
        }
    }

    fn ids(items: &[KnowledgeItem]) -> Vec<usize> {
        items.iter().map(|i| i.sent_id).collect()
    }

    #[test]
    fn exact_duplicates() {
        let pool = [item(0, 0.9), item(1, 0.9)];
        let out = information_gain_rerank(&pool, |_, _| 1.0, 10, 1.0);
        assert_eq!(ids(&out), [0, 1]);
        assert_eq!(out[1].red, 1.0);
        assert_eq!(
            out.iter().map(|i| i.rank_score).collect::<Vec<_>>(),
            [0.9, 0.0]
        );
    }

    #[test]
    fn orthogonal_pool_keeps_rel_order() {
        let pool = [item(3, 0.2), item(1, 0.8), item(2, 0.5)];
        let out = information_gain_rerank(&pool, |_, _| 0.0, 10, 1.0);
        assert_eq!(ids(&out), [1, 2, 3]);
    }

    #[test]
    fn hand_simulated_three() {
        // After a: rank(b) = (1-.9)*.8 = .08, rank(c) = (1-.1)*.7 = .63.
        let pool = [item(0, 0.9), item(1, 0.8), item(2, 0.7)];
        let sim = |x: &KnowledgeItem, y: &KnowledgeItem| match (x.sent_id.min(y.sent_id), x.sent_id.max(y.sent_id)) {
            (0, 1) => 0.9,
            (0, 2) => 0.1,
            (1, 2) => 0.2,
            _ => 1.0,
        };
        let out = information_gain_rerank(&pool, sim, 3, 1.0);
        assert_eq!(ids(&out), [0, 2, 1]);
        assert!((out[1].rank_score - 0.63).abs() < 1e-12);
        // b's redundancy after c is max(.9, .2).
        assert!((out[2].red - 0.9).abs() < 1e-12);
        assert!((out[2].rank_score - 0.08).abs() < 1e-12);
    }

    #[test]
    fn rel_normalized_by_scale() {
        let pool = [item(0, 5.0), item(1, 2.5)];
        let out = information_gain_rerank(&pool, |_, _| 0.5, 2, 5.0);
        assert_eq!(out[0].rank_score, 1.0);
        assert!((out[1].rank_score - 0.25).abs() < 1e-12);
    }

    #[test]
    fn top_one_is_argmax_rel_and_empty_pool() {
        let pool = [item(4, 0.1), item(2, 0.7), item(9, 0.7)];
        assert_eq!(ids(&information_gain_rerank(&pool, |_, _| 0.3, 1, 1.0)), [2]);
        assert!(information_gain_rerank(&[], |_, _| 0.0, 5, 1.0).is_empty());
    }

    #[test]
    fn candidates_from_index() {
        let corpus = Corpus::new(
            ["Every gecko is a lizard.", "Cows eat grass.", "Geckos - only vocal lizards."]
                .map(String::from)
                .to_vec(),
        )
        .unwrap();
        let tk = Tokenizer::default();
        let index = InvertedIndex::build(corpus.texts(), ScoringMode::TfidfCosine, &tk).unwrap();
        let query = AbducedQuery::from_tokens("q", Label::C, AbductionModel::Symmdiff, TokenSet::from_tokens(["gecko", "lizards"]));
        let pool = retrieve_candidates(&query, "swoop down on a gecko", &index, &corpus, 10, Relevance::Ir).unwrap();
        assert_eq!(pool.len(), 2);
        assert!(pool.iter().all(|i| i.red == 0.0 && i.option_label == Label::C));

        let scorer = TfidfScorer::new(corpus.texts(), &tk).unwrap();
        let pool = retrieve_candidates(&query, "swoop down on a gecko", &index, &corpus, 10, Relevance::Scorer(&scorer)).unwrap();
        assert_eq!(pool[0].text, "Every gecko is a lizard.");

        let none = AbducedQuery::from_tokens("q", Label::C, AbductionModel::Symmdiff, TokenSet::from_tokens(["zebra"]));
        assert!(retrieve_candidates(&none, "h", &index, &corpus, 10, Relevance::Ir).unwrap().is_empty());
        let empty = AbducedQuery::from_tokens("q", Label::C, AbductionModel::Symmdiff, TokenSet::new());
        assert!(retrieve_candidates(&empty, "h", &index, &corpus, 10, Relevance::Ir).unwrap().is_empty());
    }
}
