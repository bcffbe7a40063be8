//! Passage assembly, per-question 4×4 score matrices and answer aggregation.
//!
//! Each option `j` gets its own passage `P_j`; every option `i` is scored
//! against every passage, giving `score(P_j, Q, A_i)`. Aggregations:
//!
//! - sum: `Pr(Q, A_i) = Σ_j score(P_j, Q, A_i)`
//! - passage selection: after a facts-only round, only the passages of the
//!   two best options survive (`δ`), and only those options can win
//! - weighted: `wPr = Pr(F, Q, A_i) · Pr(F ∪ K, Q, A_i)`

use serde::{Deserialize, Serialize};

use crate::corpus::{Label, Question};
use crate::error::{Error, Result};
use crate::facts::ScoredFact;
use crate::knowledge::KnowledgeItem;
use crate::text::{TokenSet, Tokenizer, TokenizerConfig};

pub const DEFAULT_MAX_TOKENS: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Passage {
    pub question_id: String,
    pub option_label: Label,
    pub text: String,
    pub token_count: usize,
    pub max_tokens: usize,
}

fn sentence(text: &str) -> &str {
    text.trim().trim_end_matches('.').trim_end()
}

fn word_count(text: &str) -> usize {
    Tokenizer::new(TokenizerConfig::KEEP_STOPWORDS).tokenize(text).len()
}

/// Top `n_facts` facts then top `n_knowledge` knowledge sentences, joined
/// with `". "`. Whole sentences are dropped from the tail until the passage
/// fits in `max_tokens` words.
pub fn assemble_passage(
    question_id: &str,
    option_label: Label,
    facts: &[ScoredFact],
    knowledge: &[KnowledgeItem],
    n_facts: usize,
    n_knowledge: usize,
    max_tokens: usize,
) -> Result<Passage> {
    if n_facts == 0 && n_knowledge == 0 {
        return Err(Error::Config("a passage needs at least one fact or knowledge sentence".into()));
    }
    let mut parts: Vec<(&str, usize)> = facts
        .iter()
        .take(n_facts)
        .map(|f| f.text.as_str())
        .chain(knowledge.iter().take(n_knowledge).map(|k| k.text.as_str()))
        .map(sentence)
        .filter(|s| !s.is_empty())
        .map(|s| (s, word_count(s)))
        .collect();
    let mut total: usize = parts.iter().map(|p| p.1).sum();
    while total > max_tokens {
        let (_, n) = parts.pop().expect("total > 0 implies a part");
        total -= n;
    }
    let text = if parts.is_empty() {
        String::new()
    } else {
        format!("{}.", parts.iter().map(|p| p.0).collect::<Vec<_>>().join(". "))
    };
    Ok(Passage {
        question_id: question_id.to_string(),
        option_label,
        text,
        token_count: total,
        max_tokens,
    })
}

/// `rows[j][i] = score(P_j, Q, A_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    rows: [[f64; 4]; 4],
}

impl ScoreMatrix {
    pub fn new(rows: [[f64; 4]; 4]) -> Result<Self> {
        if rows.iter().flatten().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::Validation("score matrix entries must be finite and non-negative".into()));
        }
        Ok(Self { rows })
    }

    pub fn get(&self, passage: usize, option: usize) -> f64 {
        self.rows[passage][option]
    }

    pub fn rows(&self) -> &[[f64; 4]; 4] {
        &self.rows
    }
}

/// Scores a passage for one question and answer option.
pub trait AnswerScorer: Send + Sync {
    fn name(&self) -> &str;

    fn score(&self, passage: &str, question: &str, option: &str) -> Result<f64>;

    /// Scores `(passage, question, option)` triples, aligned with input.
    fn score_batch(&self, items: &[(&str, &str, &str)]) -> Result<Vec<f64>> {
        items.iter().map(|&(p, q, o)| self.score(p, q, o)).collect()
    }
}

/// Fraction of question+option content words found in the passage.
pub struct LexicalAnswerScorer {
    tokenizer: Tokenizer,
}

impl LexicalAnswerScorer {
    pub fn new(tokenizer: &Tokenizer) -> Self {
        let config = TokenizerConfig {
            remove_stopwords: true,
            ..tokenizer.config()
        };
        Self {
            tokenizer: tokenizer.reconfigured(config),
        }
    }
}

impl Default for LexicalAnswerScorer {
    fn default() -> Self {
        Self::new(&Tokenizer::default())
    }
}

impl AnswerScorer for LexicalAnswerScorer {
    fn name(&self) -> &str {
        "lexical"
    }

    fn score(&self, passage: &str, question: &str, option: &str) -> Result<f64> {
        let probe: TokenSet = self.tokenizer.token_set(&format!("{option} {question}"));
        if probe.is_empty() {
            return Ok(0.0);
        }
        let hay = self.tokenizer.token_set(passage);
        Ok(probe.intersection_len(&hay) as f64 / probe.len() as f64)
    }
}

/// Scores every option of `question` against each passage; rows whose
/// `active` flag is false are left at 0 without calling the scorer.
pub fn score_matrix(
    question: &Question,
    passages: &[Passage],
    scorer: &dyn AnswerScorer,
    active: [bool; 4],
) -> Result<ScoreMatrix> {
    if passages.len() != 4 {
        return Err(Error::Validation(format!("expected 4 passages, got {}", passages.len())));
    }
    let mut items = Vec::with_capacity(16);
    let mut slots = Vec::with_capacity(16);
    for (j, p) in passages.iter().enumerate() {
        if !active[j] {
            continue;
        }
        for (i, opt) in question.options.iter().enumerate() {
            items.push((p.text.as_str(), question.stem.as_str(), opt.text.as_str()));
            slots.push((j, i));
        }
    }
    let scores = scorer.score_batch(&items)?;
    if scores.len() != items.len() {
        return Err(Error::scorer(
            scorer.name(),
            format!("returned {} scores for {} items", scores.len(), items.len()),
        ));
    }
    let mut rows = [[0.0; 4]; 4];
    for ((j, i), s) in slots.into_iter().zip(scores) {
        if !s.is_finite() || s < 0.0 {
            return Err(Error::scorer(scorer.name(), format!("invalid answer score {s}")));
        }
        rows[j][i] = s;
    }
    ScoreMatrix::new(rows)
}

/// Column sums: `Pr[i] = Σ_j m[j][i]`.
pub fn sum_score(m: &ScoreMatrix) -> [f64; 4] {
    gated_sum(m, [1; 4])
}

/// `Pr[i] = Σ_k δ_k · m[k][i]`.
pub fn gated_sum(m: &ScoreMatrix, mask: [u8; 4]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (k, row) in m.rows.iter().enumerate() {
        if mask[k] == 0 {
            continue;
        }
        for (i, s) in row.iter().enumerate() {
            out[i] += s;
        }
    }
    out
}

/// Marks the two highest scores with 1 (ties to the lower index).
pub fn passage_selection(pr_f: &[f64; 4]) -> [u8; 4] {
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&a, &b| pr_f[b].total_cmp(&pr_f[a]).then(a.cmp(&b)));
    let mut mask = [0u8; 4];
    mask[order[0]] = 1;
    mask[order[1]] = 1;
    mask
}

/// Index of the highest score among `mask`ed entries, lowest index on ties.
pub fn argmax_masked(scores: &[f64; 4], mask: [u8; 4]) -> usize {
    let mut best: Option<usize> = None;
    for i in 0..4 {
        if mask[i] == 0 {
            continue;
        }
        if best.is_none_or(|b| scores[i] > scores[b]) {
            best = Some(i);
        }
    }
    best.unwrap_or(0)
}

/// `wPr[i] = δ_i · Pr_F[i] · Pr_FK[i]`; the answer is the best selected option.
pub fn weighted_score(pr_f: &[f64; 4], pr_fk: &[f64; 4], mask: [u8; 4]) -> ([f64; 4], Label) {
    let mut w = [0.0; 4];
    for i in 0..4 {
        if mask[i] != 0 {
            w[i] = pr_f[i] * pr_fk[i];
        }
    }
    let chosen = Label::from_index(argmax_masked(&w, mask)).expect("index < 4");
    (w, chosen)
}

/// How the facts-only and facts+knowledge rounds are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Sum score over all four facts+knowledge passages.
    Sum,
    /// Product of both rounds' sum scores.
    Weighted,
    /// Facts+knowledge scores over the two surviving passages only.
    Selection,
    /// Selection, then product.
    #[default]
    Both,
}

impl std::str::FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Self::Sum),
            "weighted" => Ok(Self::Weighted),
            "selection" => Ok(Self::Selection),
            "both" => Ok(Self::Both),
            other => Err(Error::Config(format!("unknown aggregation `{other}`"))),
        }
    }
}

impl Aggregation {
    pub fn selects(self) -> bool {
        matches!(self, Aggregation::Selection | Aggregation::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub question_id: String,
    pub chosen_label: Label,
    /// Facts-only sum score `Pr(F, Q, A_i)`.
    pub sum_scores: [f64; 4],
    pub selected_mask: [u8; 4],
    /// Facts+knowledge round, absent for facts-only runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knowledge_scores: Option<[f64; 4]>,
    /// The vector the answer was chosen from: `wPr` under weighted
    /// aggregations, otherwise the relevant sum score.
    pub weighted_scores: [f64; 4],
}

/// Combines the rounds. `fk` is `None` for a facts-only run. Under a
/// selecting aggregation `fk` must have been scored on the selected
/// passages only (see [`score_matrix`]); its inactive rows are ignored.
pub fn aggregate(question_id: &str, f: &ScoreMatrix, fk: Option<&ScoreMatrix>, aggregation: Aggregation) -> Prediction {
    let pr_f = sum_score(f);
    let mask = passage_selection(&pr_f);
    let Some(fk) = fk else {
        let chosen = argmax_masked(&pr_f, [1; 4]);
        return Prediction {
            question_id: question_id.to_string(),
            chosen_label: Label::from_index(chosen).expect("index < 4"),
            sum_scores: pr_f,
            selected_mask: mask,
            knowledge_scores: None,
            weighted_scores: pr_f,
        };
    };
    let (pr_fk, final_scores, chosen) = match aggregation {
        Aggregation::Sum => {
            let pr_fk = sum_score(fk);
            (pr_fk, pr_fk, argmax_masked(&pr_fk, [1; 4]))
        }
        Aggregation::Selection => {
            let pr_fk = gated_sum(fk, mask);
            (pr_fk, pr_fk, argmax_masked(&pr_fk, mask))
        }
        Aggregation::Weighted => {
            let pr_fk = sum_score(fk);
            let (w, label) = weighted_score(&pr_f, &pr_fk, [1; 4]);
            (pr_fk, w, label.index())
        }
        Aggregation::Both => {
            let pr_fk = gated_sum(fk, mask);
            let (w, label) = weighted_score(&pr_f, &pr_fk, mask);
            (pr_fk, w, label.index())
        }
    };
    Prediction {
        question_id: question_id.to_string(),
        chosen_label: Label::from_index(chosen).expect("index < 4"),
        sum_scores: pr_f,
        selected_mask: mask,
        knowledge_scores: Some(pr_fk),
        weighted_scores: final_scores,
    }
}
