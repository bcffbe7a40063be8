//! Stage orchestration: hypotheses, facts, abduction, knowledge, answers.
//!
//! Every stage reads and writes JSONL files under `out_dir`, so any stage
//! can be re-run from the previous one's output.

mod config;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{AnswerScorerKind, FactScorerKind, IndexKind, PipelineConfig, RedundancyKind, RelevanceKind};

use crate::abduction::{
    bag_of_words_query, best_overlap, build_bow_training_data, symmetric_difference_query, word_union_query,
    AbducedQuery, AbductionModel, BowSource, BowTrainingExample, GeneratedCandidates, TableProvider,
};
use crate::answering::{
    aggregate, assemble_passage, passage_selection, score_matrix, sum_score, AnswerScorer, LexicalAnswerScorer,
    Passage, Prediction, ScoreMatrix,
};
use crate::bridge::{RemoteAnswerScorer, RemoteClient, RemoteSimilarityScorer};
use crate::corpus::{load_embeddings, load_facts, load_knowledge, load_questions, read_jsonl, Corpus, EmbeddingTable, Label, Question};
use crate::error::{Error, Result};
use crate::facts::{generate_sts_training_pairs, retrieve_facts, FactList, StsPairs};
use crate::hypothesis::{generate_hypotheses, Hypothesis};
use crate::knowledge::{information_gain_rerank, retrieve_candidates, KnowledgeList, PoolSimilarity, Relevance};
use crate::metrics::{compute_metrics, EvalReport, EvalRow};
use crate::scorer::{EmbeddingScorer, ScaledScorer, SimilarityScorer, TfidfScorer};
use crate::text::{InvertedIndex, ScoringMode, Stopwords, Tokenizer, TokenizerConfig, TokenSet};

pub const HYPOTHESES_FILE: &str = "hypotheses.stage.jsonl";
pub const FACTS_FILE: &str = "facts.stage.jsonl";
pub const QUERIES_FILE: &str = "queries.stage.jsonl";
pub const CANDIDATES_FILE: &str = "candidates.stage.jsonl";
pub const KNOWLEDGE_FILE: &str = "knowledge.stage.jsonl";
pub const SCORES_F_FILE: &str = "scores_f.stage.jsonl";
pub const SCORES_FK_FILE: &str = "scores_fk.stage.jsonl";
pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const STS_PAIRS_FILE: &str = "sts_pairs.tsv";
pub const BOW_FILE: &str = "bow_train.tsv";

/// One round's 4×4 answer scores: `rows[passage][option]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub question_id: String,
    pub rows: [[f64; 4]; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnswerOutput {
    pub scores_f: Vec<MatrixRecord>,
    /// Empty when no knowledge is used.
    pub scores_fk: Vec<MatrixRecord>,
    pub predictions: Vec<Prediction>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub predictions: Vec<Prediction>,
    pub report: EvalReport,
}

type Key = (String, Label);

fn key(question_id: &str, label: Label) -> Key {
    (question_id.to_string(), label)
}

fn cached<T>(cell: &OnceLock<Arc<T>>, init: impl FnOnce() -> Result<T>) -> Result<Arc<T>> {
    if let Some(v) = cell.get() {
        return Ok(v.clone());
    }
    let v = Arc::new(init()?);
    Ok(cell.get_or_init(|| v).clone())
}

pub struct Pipeline {
    config: PipelineConfig,
    tokenizer: Tokenizer,
    threads: rayon::ThreadPool,
    fact_corpus: OnceLock<Arc<Corpus>>,
    knowledge_corpus: OnceLock<Arc<Corpus>>,
    knowledge_index: OnceLock<Arc<InvertedIndex>>,
    knowledge_tfidf: OnceLock<Arc<TfidfScorer>>,
    embeddings: OnceLock<Arc<EmbeddingTable>>,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let tokenizer = match &config.stopwords {
            Some(p) => Tokenizer::with_stopwords(TokenizerConfig::default(), Stopwords::from_file(p)?),
            None => Tokenizer::default(),
        };
        let threads = rayon::ThreadPoolBuilder::new()
            .num_threads(config.parallelism)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        Ok(Self {
            config,
            tokenizer,
            threads,
            fact_corpus: OnceLock::new(),
            knowledge_corpus: OnceLock::new(),
            knowledge_index: OnceLock::new(),
            knowledge_tfidf: OnceLock::new(),
            embeddings: OnceLock::new(),
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    pub fn out_path(&self, file: &str) -> PathBuf {
        self.config.out_dir.join(file)
    }

    /// Maps `f` over `items` on the configured pool; results keep input
    /// order and the first failing item (in input order) wins.
    fn par_map<T, U, F>(&self, items: &[T], f: F) -> Result<Vec<U>>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> Result<U> + Sync + Send,
    {
        let results: Vec<Result<U>> = self.threads.install(|| items.par_iter().map(f).collect());
        results.into_iter().collect()
    }

    // ----- inputs -----

    pub fn load_questions(&self) -> Result<Vec<Question>> {
        let questions = load_questions(self.config.require("questions")?)?;
        for q in &questions {
            q.validate()?;
        }
        Ok(questions)
    }

    fn fact_corpus(&self) -> Result<Arc<Corpus>> {
        cached(&self.fact_corpus, || load_facts(self.config.require("facts")?))
    }

    fn knowledge_corpus(&self) -> Result<Arc<Corpus>> {
        cached(&self.knowledge_corpus, || load_knowledge(self.config.require("knowledge")?))
    }

    fn embeddings(&self) -> Result<Arc<EmbeddingTable>> {
        cached(&self.embeddings, || load_embeddings(self.config.require("embeddings")?))
    }

    fn knowledge_index(&self) -> Result<Arc<InvertedIndex>> {
        cached(&self.knowledge_index, || {
            let corpus = self.knowledge_corpus()?;
            let mode = self.config.index_mode.mode();
            if let Some(cache) = &self.config.index_cache {
                if cache.exists() {
                    match InvertedIndex::load(cache) {
                        Ok(idx)
                            if idx.mode() == mode
                                && idx.doc_count() == corpus.len()
                                && idx.tokenizer_config() == self.tokenizer.config() =>
                        {
                            log::info!("loaded knowledge index from {}", cache.display());
                            return Ok(idx);
                        }
                        Ok(_) => log::info!("index cache {} is stale, rebuilding", cache.display()),
                        Err(e) => log::warn!("ignoring unreadable index cache: {e}"),
                    }
                }
                let idx = InvertedIndex::build(corpus.texts(), mode, &self.tokenizer)?;
                idx.save(cache)?;
                return Ok(idx);
            }
            InvertedIndex::build(corpus.texts(), mode, &self.tokenizer)
        })
    }

    fn knowledge_tfidf(&self) -> Result<Arc<TfidfScorer>> {
        cached(&self.knowledge_tfidf, || {
            let corpus = self.knowledge_corpus()?;
            let index = self.knowledge_index()?;
            if index.mode() == ScoringMode::TfidfCosine {
                Ok(TfidfScorer::from_index(index, corpus.texts(), &self.tokenizer))
            } else {
                TfidfScorer::new(corpus.texts(), &self.tokenizer)
            }
        })
    }

    fn remote_client(&self) -> Result<RemoteClient> {
        RemoteClient::new(self.config.remote()?)
    }

    fn fact_scorer(&self) -> Result<Box<dyn SimilarityScorer>> {
        Ok(match self.config.fact_scorer {
            FactScorerKind::Tfidf => Box::new(TfidfScorer::new(self.fact_corpus()?.texts(), &self.tokenizer)?),
            FactScorerKind::Embedding => Box::new(EmbeddingScorer::new(self.embeddings()?)),
            FactScorerKind::Remote => Box::new(RemoteSimilarityScorer::new(self.remote_client()?)),
        })
    }

    /// The fact scorer on the [0, 5] scale used for training targets.
    fn sts_scorer(&self) -> Result<Box<dyn SimilarityScorer>> {
        Ok(match self.config.fact_scorer {
            FactScorerKind::Tfidf => Box::new(ScaledScorer::sts(TfidfScorer::new(
                self.fact_corpus()?.texts(),
                &self.tokenizer,
            )?)),
            _ => self.fact_scorer()?,
        })
    }

    fn relevance_scorer(&self) -> Result<Option<Box<dyn SimilarityScorer>>> {
        Ok(match self.config.relevance {
            RelevanceKind::Tfidf => Some(Box::new(self.knowledge_tfidf()?)),
            RelevanceKind::Embedding => Some(Box::new(EmbeddingScorer::new(self.embeddings()?))),
            RelevanceKind::Remote => Some(Box::new(RemoteSimilarityScorer::new(self.remote_client()?))),
            RelevanceKind::Ir => None,
        })
    }

    fn answer_scorer(&self) -> Result<Box<dyn AnswerScorer>> {
        Ok(match self.config.answer_scorer {
            AnswerScorerKind::Lexical => Box::new(LexicalAnswerScorer::new(&self.tokenizer)),
            AnswerScorerKind::Remote => Box::new(RemoteAnswerScorer::new(self.remote_client()?)),
        })
    }

    // ----- stages -----

    pub fn hypothesize(&self, questions: &[Question]) -> Result<Vec<Hypothesis>> {
        let per_question = self.par_map(questions, |q| Ok(generate_hypotheses(q, &self.tokenizer)))?;
        Ok(per_question.into_iter().flatten().collect())
    }

    pub fn retrieve_facts(&self, hypotheses: &[Hypothesis], top_n: usize) -> Result<Vec<FactList>> {
        let corpus = self.fact_corpus()?;
        let scorer = self.fact_scorer()?;
        self.par_map(hypotheses, |h| {
            let facts = retrieve_facts(h, scorer.as_ref(), &corpus, top_n)
                .map_err(|e| e.in_stage("retrieve-facts", &h.question_id, Some(h.option_label.as_str())))?;
            Ok(FactList {
                question_id: h.question_id.clone(),
                option_label: h.option_label,
                facts,
            })
        })
    }

    /// Token set of the top `abduction_facts` facts of one list.
    fn fact_tokens(&self, list: &FactList, tokenizer: &Tokenizer) -> TokenSet {
        let mut out = TokenSet::new();
        for f in list.facts.iter().take(self.config.abduction_facts) {
            for t in tokenizer.tokenize(&f.text) {
                out.insert(t);
            }
        }
        out
    }

    pub fn abduce(&self, hypotheses: &[Hypothesis], fact_lists: &[FactList]) -> Result<Vec<AbducedQuery>> {
        let lists: HashMap<Key, &FactList> = fact_lists
            .iter()
            .map(|l| (key(&l.question_id, l.option_label), l))
            .collect();
        let model = self.config.abduction;
        let provider = match model {
            AbductionModel::Bow => Some(TableProvider::load(self.config.require("word_probs")?)?),
            _ => None,
        };
        let generated: HashMap<Key, Vec<String>> = match model {
            AbductionModel::Generated => read_jsonl::<GeneratedCandidates>(self.config.require("gen_candidates")?)?
                .into_iter()
                .map(|g| (key(&g.question_id, g.option_label), g.candidates))
                .collect(),
            _ => HashMap::new(),
        };
        let keep = self.tokenizer.reconfigured(TokenizerConfig::KEEP_STOPWORDS);

        self.par_map(hypotheses, |h| {
            let stage = |e: Error| e.in_stage("abduce", &h.question_id, Some(h.option_label.as_str()));
            let list = lists
                .get(&key(&h.question_id, h.option_label))
                .ok_or_else(|| stage(Error::Validation("no retrieved facts for this hypothesis".into())))?;
            let f = self.fact_tokens(list, &self.tokenizer);
            let tokens = match model {
                AbductionModel::Symmdiff => symmetric_difference_query(&h.token_set, &f),
                AbductionModel::Union => word_union_query(&h.token_set, &f),
                AbductionModel::Bow => bag_of_words_query(
                    &h.token_set,
                    &f,
                    provider.as_ref().expect("loaded for bow"),
                    self.config.theta,
                )
                .map_err(stage)?,
                AbductionModel::Generated => {
                    let candidates = generated
                        .get(&key(&h.question_id, h.option_label))
                        .ok_or_else(|| stage(Error::Validation("no generated candidates".into())))?;
                    let evidence = keep.token_set(&h.text).union(&self.fact_tokens(list, &keep));
                    let (best, _) = best_overlap(candidates, &evidence, &keep).map_err(stage)?;
                    self.tokenizer.token_set(&candidates[best])
                }
            };
            Ok(AbducedQuery::from_tokens(&h.question_id, h.option_label, model, tokens))
        })
    }

    pub fn retrieve_knowledge(&self, queries: &[AbducedQuery], hypotheses: &[Hypothesis]) -> Result<Vec<KnowledgeList>> {
        let corpus = self.knowledge_corpus()?;
        let index = self.knowledge_index()?;
        let scorer = self.relevance_scorer()?;
        let texts: HashMap<Key, &str> = hypotheses
            .iter()
            .map(|h| (key(&h.question_id, h.option_label), h.text.as_str()))
            .collect();
        self.par_map(queries, |q| {
            let stage = |e: Error| e.in_stage("retrieve-knowledge", &q.question_id, Some(q.option_label.as_str()));
            let hypothesis = texts
                .get(&key(&q.question_id, q.option_label))
                .ok_or_else(|| stage(Error::Validation("no hypothesis for this query".into())))?;
            let relevance = match &scorer {
                Some(s) => Relevance::Scorer(s.as_ref()),
                None => Relevance::Ir,
            };
            let items = retrieve_candidates(q, hypothesis, &index, &corpus, self.config.pool_m, relevance).map_err(stage)?;
            Ok(KnowledgeList {
                question_id: q.question_id.clone(),
                option_label: q.option_label,
                items,
            })
        })
    }

    /// Upper bound used to bring relevance into [0, 1]; `None` means the
    /// pool's own maximum.
    fn relevance_max(&self) -> Option<f64> {
        match self.config.relevance {
            RelevanceKind::Tfidf => Some(1.0),
            RelevanceKind::Embedding | RelevanceKind::Remote => Some(crate::scorer::STS_MAX),
            RelevanceKind::Ir => match self.config.index_mode {
                IndexKind::Tfidf => Some(1.0),
                IndexKind::Bm25 => None,
            },
        }
    }

    pub fn rerank(&self, candidates: &[KnowledgeList], top_k: usize) -> Result<Vec<KnowledgeList>> {
        if top_k == 0 {
            return Err(Error::Config("top_k must be at least 1".into()));
        }
        let similarity = match self.config.redundancy {
            RedundancyKind::Tfidf => PoolSimilarity::Tfidf(self.knowledge_tfidf()?),
            RedundancyKind::Embedding => PoolSimilarity::Embedding(self.embeddings()?),
        };
        let fixed_max = self.relevance_max();
        self.par_map(candidates, |list| {
            let prepared = similarity
                .prepare(&list.items)
                .map_err(|e| e.in_stage("rerank", &list.question_id, Some(list.option_label.as_str())))?;
            let rel_max = fixed_max.unwrap_or_else(|| list.items.iter().map(|i| i.rel).fold(0.0, f64::max));
            let items = information_gain_rerank(&list.items, |a, b| prepared.sim(a, b), top_k, rel_max);
            Ok(KnowledgeList {
                question_id: list.question_id.clone(),
                option_label: list.option_label,
                items,
            })
        })
    }

    /// Scores passages built from the top `n_facts` facts and, when
    /// `n_knowledge > 0`, the top `n_knowledge` knowledge sentences.
    pub fn answer(
        &self,
        questions: &[Question],
        fact_lists: &[FactList],
        knowledge: &[KnowledgeList],
        n_facts: usize,
        n_knowledge: usize,
    ) -> Result<AnswerOutput> {
        if n_facts == 0 {
            return Err(Error::Config("n_facts must be at least 1".into()));
        }
        let facts: HashMap<Key, &FactList> = fact_lists
            .iter()
            .map(|l| (key(&l.question_id, l.option_label), l))
            .collect();
        let know: HashMap<Key, &KnowledgeList> = knowledge
            .iter()
            .map(|l| (key(&l.question_id, l.option_label), l))
            .collect();
        let scorer = self.answer_scorer()?;
        let aggregation = self.config.aggregation;
        let max_tokens = self.config.max_tokens;

        let per_question = self.par_map(questions, |q| {
            let stage = |e: Error| e.in_stage("answer", &q.id, None);
            let mut passages_f: Vec<Passage> = Vec::with_capacity(4);
            let mut passages_fk: Vec<Passage> = Vec::with_capacity(4);
            for label in Label::ALL {
                let list = facts.get(&key(&q.id, label)).ok_or_else(|| {
                    Error::Validation("no retrieved facts".into()).in_stage("answer", &q.id, Some(label.as_str()))
                })?;
                passages_f.push(assemble_passage(&q.id, label, &list.facts, &[], n_facts, 0, max_tokens).map_err(stage)?);
                if n_knowledge > 0 {
                    let items = know.get(&key(&q.id, label)).map_or(&[][..], |k| &k.items);
                    passages_fk.push(
                        assemble_passage(&q.id, label, &list.facts, items, n_facts, n_knowledge, max_tokens)
                            .map_err(stage)?,
                    );
                }
            }
            let m_f = score_matrix(q, &passages_f, scorer.as_ref(), [true; 4]).map_err(stage)?;
            let m_fk: Option<ScoreMatrix> = if n_knowledge > 0 {
                let active = if aggregation.selects() {
                    passage_selection(&sum_score(&m_f)).map(|d| d == 1)
                } else {
                    [true; 4]
                };
                Some(score_matrix(q, &passages_fk, scorer.as_ref(), active).map_err(stage)?)
            } else {
                None
            };
            let prediction = aggregate(&q.id, &m_f, m_fk.as_ref(), aggregation);
            let record = |m: &ScoreMatrix| MatrixRecord {
                question_id: q.id.clone(),
                rows: *m.rows(),
            };
            Ok((record(&m_f), m_fk.as_ref().map(record), prediction))
        })?;

        let mut out = AnswerOutput {
            scores_f: Vec::with_capacity(per_question.len()),
            scores_fk: Vec::new(),
            predictions: Vec::with_capacity(per_question.len()),
        };
        for (f, fk, p) in per_question {
            out.scores_f.push(f);
            out.scores_fk.extend(fk);
            out.predictions.push(p);
        }
        Ok(out)
    }

    pub fn evaluate(&self, predictions: &[Prediction], questions: &[Question], fact_lists: &[FactList], n_facts: usize) -> Result<EvalReport> {
        compute_metrics(predictions, questions, &truncate_facts(fact_lists, n_facts))
    }

    pub fn gen_sts_pairs(&self, questions: &[Question]) -> Result<StsPairs> {
        let corpus = self.fact_corpus()?;
        let scorer = self.sts_scorer()?;
        generate_sts_training_pairs(
            questions,
            &corpus,
            scorer.as_ref(),
            &self.tokenizer,
            self.config.samples_per_q,
            self.config.seed,
        )
    }

    /// Training words drawn from each question's correct hypothesis and its
    /// top facts.
    pub fn gen_bow_data(
        &self,
        questions: &[Question],
        hypotheses: &[Hypothesis],
        fact_lists: &[FactList],
    ) -> Result<Vec<BowTrainingExample>> {
        let wordvec = self.embeddings()?;
        let hyps: HashMap<Key, &Hypothesis> = hypotheses
            .iter()
            .map(|h| (key(&h.question_id, h.option_label), h))
            .collect();
        let lists: HashMap<Key, &FactList> = fact_lists
            .iter()
            .map(|l| (key(&l.question_id, l.option_label), l))
            .collect();
        let mut owned = Vec::with_capacity(questions.len());
        for q in questions {
            let k = key(&q.id, q.answer_key);
            let (Some(h), Some(l)) = (hyps.get(&k), lists.get(&k)) else {
                return Err(Error::Validation(format!(
                    "missing hypothesis or facts for the correct option of {}",
                    q.id
                )));
            };
            owned.push((q, h.token_set.clone(), self.fact_tokens(l, &self.tokenizer)));
        }
        let sources: Vec<BowSource<'_>> = owned
            .iter()
            .map(|(question, hypothesis, fact)| BowSource {
                question,
                hypothesis,
                fact,
            })
            .collect();
        build_bow_training_data(&sources, &wordvec, &self.tokenizer, self.config.sim_threshold, self.config.seed)
    }

    // ----- end to end -----

    fn check_run_inputs(&self, uses_knowledge: bool) -> Result<()> {
        let mut config = self.config.clone();
        if !uses_knowledge {
            config.n_knowledge = 0;
        }
        for name in config.required_for_run() {
            config.require(name)?;
        }
        if config.uses_remote() {
            config.remote()?;
        }
        Ok(())
    }

    /// Retrieval shared by `run` and `grid`: facts to depth `fact_depth`
    /// and, if `knowledge_depth > 0`, re-ranked knowledge to that depth.
    fn retrieve_all(
        &self,
        questions: &[Question],
        fact_depth: usize,
        knowledge_depth: usize,
    ) -> Result<(Vec<FactList>, Vec<KnowledgeList>)> {
        let out = |f: &str| self.out_path(f);
        let hypotheses = self.hypothesize(questions)?;
        crate::corpus::write_jsonl(&out(HYPOTHESES_FILE), &hypotheses)?;
        let facts = self.retrieve_facts(&hypotheses, fact_depth.max(self.config.abduction_facts))?;
        crate::corpus::write_jsonl(&out(FACTS_FILE), &facts)?;
        if knowledge_depth == 0 {
            return Ok((facts, Vec::new()));
        }
        let queries = self.abduce(&hypotheses, &facts)?;
        crate::corpus::write_jsonl(&out(QUERIES_FILE), &queries)?;
        let candidates = self.retrieve_knowledge(&queries, &hypotheses)?;
        crate::corpus::write_jsonl(&out(CANDIDATES_FILE), &candidates)?;
        let knowledge = self.rerank(&candidates, knowledge_depth.max(self.config.top_k))?;
        crate::corpus::write_jsonl(&out(KNOWLEDGE_FILE), &knowledge)?;
        Ok((facts, knowledge))
    }

    /// Writes both score rounds and the predictions under `out_dir`.
    pub fn write_answers(&self, answers: &AnswerOutput) -> Result<()> {
        crate::corpus::write_jsonl(&self.out_path(SCORES_F_FILE), &answers.scores_f)?;
        if !answers.scores_fk.is_empty() {
            crate::corpus::write_jsonl(&self.out_path(SCORES_FK_FILE), &answers.scores_fk)?;
        }
        crate::corpus::write_jsonl(&self.out_path(PREDICTIONS_FILE), &answers.predictions)
    }

    /// Runs every stage with the configured `N` and `K`, writing all stage
    /// files, predictions and the report.
    pub fn run(&self) -> Result<RunOutput> {
        let (n, k) = (self.config.n_facts, self.config.n_knowledge);
        self.check_run_inputs(k > 0)?;
        let questions = self.load_questions()?;
        let (facts, knowledge) = self.retrieve_all(&questions, n, k)?;
        let answers = self.answer(&questions, &facts, &knowledge, n, k)?;
        self.write_answers(&answers)?;
        let mut report = self.evaluate(&answers.predictions, &questions, &facts, n)?;
        report.rows = vec![report.row(n, k)];
        crate::metrics::write_report(&self.config.out_dir, &report.rows)?;
        Ok(RunOutput {
            predictions: answers.predictions,
            report,
        })
    }

    /// Retrieves once at the largest `N` and `K`, then answers and scores
    /// every grid point. The report's headline fields are those of the most
    /// accurate point (the first one on ties).
    pub fn grid(&self) -> Result<EvalReport> {
        let points = self.config.grid_points();
        let max_n = points.iter().map(|p| p.0).max().ok_or_else(|| Error::Config("empty grid".into()))?;
        let max_k = points.iter().map(|p| p.1).max().unwrap_or(0);
        self.check_run_inputs(max_k > 0)?;
        let questions = self.load_questions()?;
        let (facts, knowledge) = self.retrieve_all(&questions, max_n, max_k)?;
        let mut rows: Vec<EvalRow> = Vec::with_capacity(points.len());
        for (n, k) in points {
            let answers = self.answer(&questions, &facts, &knowledge, n, k)?;
            rows.push(self.evaluate(&answers.predictions, &questions, &facts, n)?.row(n, k));
            log::info!("grid N={n} K={k}: accuracy {:.4}", rows.last().map_or(0.0, |r| r.accuracy));
        }
        crate::metrics::write_report(&self.config.out_dir, &rows)?;
        let best = rows
            .iter()
            .fold(None::<&EvalRow>, |best, r| match best {
                Some(b) if b.accuracy >= r.accuracy => Some(b),
                _ => Some(r),
            })
            .expect("non-empty grid")
            .clone();
        Ok(EvalReport {
            accuracy: best.accuracy,
            n_correct: best.n_correct,
            n_total: best.n_total,
            any_passage_count: best.any_passage_count,
            correct_passage_count: best.correct_passage_count,
            rows,
        })
    }
}

/// Copies of `lists` cut to their first `n` facts.
pub fn truncate_facts(lists: &[FactList], n: usize) -> Vec<FactList> {
    lists
        .iter()
        .map(|l| FactList {
            question_id: l.question_id.clone(),
            option_label: l.option_label,
            facts: l.facts.iter().take(n).cloned().collect(),
        })
        .collect()
}

/// Reads a stage file written by an earlier stage.
pub fn read_stage<T: serde::de::DeserializeOwned>(dir: &Path, file: &str) -> Result<Vec<T>> {
    let path = dir.join(file);
    if !path.exists() {
        return Err(Error::Config(format!(
            "{} not found; run the stage that produces it first",
            path.display()
        )));
    }
    read_jsonl(&path)
}
