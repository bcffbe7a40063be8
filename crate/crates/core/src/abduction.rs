//! Missing-knowledge query construction from a hypothesis and its fact.
//!
//! Four models:
//! - `symmdiff`: `(H ∪ F) \ (H ∩ F)`, the words the fact and hypothesis do
//!   not share;
//! - `union`: `H ∪ F`, the no-abduction baseline;
//! - `bow`: words of `H ∪ F` whose learned membership probability exceeds θ;
//! - `generated`: one of several externally generated sentences, picked by
//!   token overlap with `H ∪ F`.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{EmbeddingTable, Label, Question};
use crate::error::{Error, Result};
use crate::text::{dense_cosine, TokenSet, Tokenizer};

pub const DEFAULT_THETA: f64 = 0.4;
pub const DEFAULT_SIM_THRESHOLD: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AbductionModel {
    #[default]
    Symmdiff,
    Union,
    Bow,
    Generated,
}

impl std::str::FromStr for AbductionModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmdiff" => Ok(Self::Symmdiff),
            "union" => Ok(Self::Union),
            "bow" => Ok(Self::Bow),
            "generated" => Ok(Self::Generated),
            other => Err(Error::Config(format!("unknown abduction model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbducedQuery {
    pub question_id: String,
    pub option_label: Label,
    pub model: AbductionModel,
    pub tokens: TokenSet,
    /// Space-joined tokens, or the chosen sentence for `generated`.
    pub query_text: String,
}

impl AbducedQuery {
    pub fn from_tokens(question_id: &str, option_label: Label, model: AbductionModel, tokens: TokenSet) -> Self {
        Self {
            question_id: question_id.to_string(),
            option_label,
            model,
            query_text: tokens.joined(),
            tokens,
        }
    }
}

/// H-only tokens in H order, then F-only tokens in F order.
pub fn symmetric_difference_query(h: &TokenSet, f: &TokenSet) -> TokenSet {
    h.difference(f).union(&f.difference(h))
}

/// H tokens in order, then unseen F tokens.
pub fn word_union_query(h: &TokenSet, f: &TokenSet) -> TokenSet {
    h.union(f)
}

/// Probability that a word belongs to the missing knowledge, given the
/// words of hypothesis and fact.
pub trait WordProbProvider: Send + Sync {
    fn prob(&self, word: &str, context: &TokenSet) -> Result<f64>;
}

pub struct ConstantProvider(pub f64);

impl WordProbProvider for ConstantProvider {
    fn prob(&self, _word: &str, _context: &TokenSet) -> Result<f64> {
        Ok(self.0)
    }
}

/// Context-free per-word probabilities, e.g. exported from a trained
/// classifier. Unknown words get `default`.
#[derive(Debug, Clone, Default)]
pub struct TableProvider {
    probs: HashMap<String, f64>,
    default: f64,
}

impl TableProvider {
    pub fn new(probs: HashMap<String, f64>, default: f64) -> Result<Self> {
        if let Some((w, p)) = probs.iter().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Validation(format!("probability {p} for `{w}` outside [0, 1]")));
        }
        if !(0.0..=1.0).contains(&default) {
            return Err(Error::Validation(format!("default probability {default} outside [0, 1]")));
        }
        Ok(Self { probs, default })
    }

    /// `word TAB probability` per line.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut probs = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (w, p) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, i + 1, "expected `word<TAB>probability`"))?;
            let p: f64 = p.trim().parse().map_err(|e| Error::parse(path, i + 1, format!("{e}")))?;
            probs.insert(w.trim().to_lowercase(), p);
        }
        Self::new(probs, 0.0)
    }
}

impl WordProbProvider for TableProvider {
    fn prob(&self, word: &str, _context: &TokenSet) -> Result<f64> {
        Ok(self.probs.get(word).copied().unwrap_or(self.default))
    }
}

/// Words of `H ∪ F` with `P(w ∈ K) > θ`, in union order.
pub fn bag_of_words_query(
    h: &TokenSet,
    f: &TokenSet,
    provider: &dyn WordProbProvider,
    theta: f64,
) -> Result<TokenSet> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Config(format!("theta {theta} outside [0, 1]")));
    }
    let context = h.union(f);
    let mut out = TokenSet::new();
    for w in context.iter() {
        let p = provider.prob(w, &context)?;
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(Error::scorer("word-prob", format!("probability {p} for `{w}` outside [0, 1]")));
        }
        if p > theta {
            out.insert(w);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BowLabel {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowTrainingExample {
    pub question_id: String,
    pub word: String,
    pub context_tokens: Vec<String>,
    pub label: BowLabel,
}

/// Inputs for one question: the correct hypothesis, its retrieved fact
/// words and the gold missing knowledge sentences.
pub struct BowSource<'a> {
    pub question: &'a Question,
    pub hypothesis: &'a TokenSet,
    pub fact: &'a TokenSet,
}

/// Labels every word of `H ∪ F` positive when it appears in the gold missing
/// knowledge or its embedding is within `sim_threshold` cosine of a gold
/// word; negative otherwise. The majority class is then downsampled with a
/// seeded RNG so both classes have equal size.
pub fn build_bow_training_data(
    sources: &[BowSource<'_>],
    wordvec: &EmbeddingTable,
    tokenizer: &Tokenizer,
    sim_threshold: f64,
    seed: u64,
) -> Result<Vec<BowTrainingExample>> {
    if !sources
        .iter()
        .any(|s| s.question.gold_missing_knowledge.as_ref().is_some_and(|k| !k.is_empty()))
    {
        return Err(Error::Validation("no question carries gold missing knowledge".into()));
    }

    let mut examples = Vec::new();
    for src in sources {
        let Some(gold) = &src.question.gold_missing_knowledge else {
            continue;
        };
        let gold_words = TokenSet::from_tokens(gold.iter().flat_map(|k| tokenizer.tokenize(k)));
        let gold_vecs: Vec<&[f32]> = gold_words.iter().filter_map(|g| wordvec.get(g)).collect();
        let context = src.hypothesis.union(src.fact);
        let context_tokens: Vec<String> = context.iter().map(str::to_string).collect();
        for w in context.iter() {
            let similar = wordvec.get(w).is_some_and(|wv| {
                gold_vecs
                    .iter()
                    .any(|gv| dense_cosine(wv, gv) >= sim_threshold)
            });
            let label = if gold_words.contains(w) || similar {
                BowLabel::Positive
            } else {
                BowLabel::Negative
            };
            examples.push(BowTrainingExample {
                question_id: src.question.id.clone(),
                word: w.to_string(),
                context_tokens: context_tokens.clone(),
                label,
            });
        }
    }
    Ok(balance(examples, seed))
}

fn balance(examples: Vec<BowTrainingExample>, seed: u64) -> Vec<BowTrainingExample> {
    let (pos, neg): (Vec<usize>, Vec<usize>) =
        (0..examples.len()).partition(|&i| examples[i].label == BowLabel::Positive);
    let (keep_all, major) = if pos.len() <= neg.len() { (pos, neg) } else { (neg, pos) };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep: Vec<usize> = rand::seq::index::sample(&mut rng, major.len(), keep_all.len())
        .into_iter()
        .map(|i| major[i])
        .chain(keep_all)
        .collect();
    keep.sort_unstable();
    let mut slots: Vec<Option<BowTrainingExample>> = examples.into_iter().map(Some).collect();
    keep.into_iter().filter_map(|i| slots[i].take()).collect()
}

/// `word TAB context TAB label` per line.
pub fn write_bow_data(path: &Path, examples: &[BowTrainingExample]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    for ex in examples {
        let label = match ex.label {
            BowLabel::Positive => "positive",
            BowLabel::Negative => "negative",
        };
        writeln!(w, "{}\t{}\t{}", ex.word, ex.context_tokens.join(" "), label).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Externally generated missing-knowledge sentences for one (question, option).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedCandidates {
    pub question_id: String,
    pub option_label: Label,
    pub candidates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedChoice {
    pub index: usize,
    pub text: String,
    pub score: f64,
}

/// Picks the candidate maximizing `|(Ĥ ∪ F) ∩ tokens(candidate)| / |K̂|`;
/// ties go to the earlier candidate. Token sets are expected to keep
/// stopwords, and so is `tokenizer`.
pub fn select_generated_knowledge(
    candidates: &[String],
    h_hat: &TokenSet,
    f: &TokenSet,
    k_hat: &TokenSet,
    tokenizer: &Tokenizer,
) -> Result<GeneratedChoice> {
    if k_hat.is_empty() {
        return Err(Error::Validation("gold missing knowledge has no tokens".into()));
    }
    let (index, overlap) = best_overlap(candidates, &h_hat.union(f), tokenizer)?;
    Ok(GeneratedChoice {
        index,
        text: candidates[index].clone(),
        score: overlap as f64 / k_hat.len() as f64,
    })
}

/// Index and raw overlap count of the best candidate. Without gold
/// knowledge the normalizer is a per-question constant, so this picks the
/// same winner as [`select_generated_knowledge`].
pub fn best_overlap(candidates: &[String], evidence: &TokenSet, tokenizer: &Tokenizer) -> Result<(usize, usize)> {
    if candidates.is_empty() {
        return Err(Error::Validation("no generated candidates".into()));
    }
    let mut best = (0, 0);
    for (i, c) in candidates.iter().enumerate() {
        let n = tokenizer.token_set(c).intersection_len(evidence);
        if n > best.1 {
            best = (i, n);
        }
    }
    Ok(best)
}

/// One scored item for the corpus-level overlap metric.
pub struct OverlapItem<'a> {
    pub evidence: &'a TokenSet,
    pub predicted: &'a TokenSet,
    pub gold: &'a TokenSet,
}

/// `Σ |evidence ∩ predicted| / Σ |gold|` over items; `None` when no gold tokens.
pub fn overlap_score(items: &[OverlapItem<'_>]) -> Option<f64> {
    let num: usize = items.iter().map(|it| it.predicted.intersection_len(it.evidence)).sum();
    let den: usize = items.iter().map(|it| it.gold.len()).sum();
    (den > 0).then(|| num as f64 / den as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::AnswerOption;
    use crate::text::TokenizerConfig;

    fn ts(words: &[&str]) -> TokenSet {
        TokenSet::from_tokens(words.iter().copied())
    }

    fn hawk() -> (TokenSet, TokenSet) {
        let tk = Tokenizer::default();
        (
            tk.token_set("A red-tailed hawk is searching for prey. It is most likely to swoop down on a gecko."),
            tk.token_set("hawks eat lizards"),
        )
    }

    #[test]
    fn hawk_symmdiff_keeps_all_ten() {
        let (h, f) = hawk();
        assert_eq!(
            h.clone().into_vec(),
            ["red-tailed", "hawk", "searching", "prey", "likely", "swoop", "gecko"]
        );
        let q = symmetric_difference_query(&h, &f);
        assert_eq!(
            q.joined(),
            "red-tailed hawk searching prey likely swoop gecko hawks eat lizards"
        );
        assert!(word_union_query(&h, &f).same_members(&q));
    }

    #[test]
    fn identical_sets() {
        let h = ts(&["a", "b"]);
        assert!(symmetric_difference_query(&h, &h).is_empty());
        assert_eq!(word_union_query(&h, &h), h);
    }

    #[test]
    fn bow_threshold() {
        let (h, f) = (ts(&["hawk", "gecko", "prey"]), ts(&["lizard", "eat"]));
        let all = bag_of_words_query(&h, &f, &ConstantProvider(1.0), 0.4).unwrap();
        assert_eq!(all, word_union_query(&h, &f));
        assert!(bag_of_words_query(&h, &f, &ConstantProvider(0.0), 0.4).unwrap().is_empty());

        let table = TableProvider::new(
            [("gecko".to_string(), 0.9), ("lizard".to_string(), 0.8)].into_iter().collect(),
            0.1,
        )
        .unwrap();
        let got = bag_of_words_query(&h, &f, &table, DEFAULT_THETA).unwrap();
        assert_eq!(got.into_vec(), ["gecko", "lizard"]);
        assert!(bag_of_words_query(&h, &f, &table, 1.5).is_err());
        assert!(bag_of_words_query(&h, &f, &ConstantProvider(2.0), 0.5).is_err());
    }

    #[test]
    fn generated_selection() {
        let keep = Tokenizer::new(TokenizerConfig::KEEP_STOPWORDS);
        let h = keep.token_set("A red-tailed hawk is searching for prey. It is most likely to swoop down on a gecko.");
        let f = keep.token_set("hawks eat lizards");
        let k = keep.token_set("gecko is a lizard");
        let cands = vec!["some birds is robin".to_string(), "lizard is gecko".to_string()];
        // "some birds is robin" overlaps on {is}; "lizard is gecko" on {is, gecko}.
        let got = select_generated_knowledge(&cands, &h, &f, &k, &keep).unwrap();
        assert_eq!(got.index, 1);
        assert!((got.score - 0.5).abs() < 1e-12);
        assert!(select_generated_knowledge(&[], &h, &f, &k, &keep).is_err());
        assert!(select_generated_knowledge(&cands, &h, &f, &TokenSet::new(), &keep).is_err());
    }

    #[test]
    fn generated_perfect_and_zero_overlap() {
        let keep = Tokenizer::new(TokenizerConfig::KEEP_STOPWORDS);
        let h = ts(&["gecko", "hawk"]);
        let f = ts(&["lizard"]);
        let k = ts(&["gecko", "lizard"]);
        let cands = vec!["zebra stripes".to_string(), "gecko lizard".to_string()];
        let got = select_generated_knowledge(&cands, &h, &f, &k, &keep).unwrap();
        assert_eq!((got.index, got.score), (1, 1.0));
        let none = select_generated_knowledge(&cands[..1], &h, &f, &k, &keep).unwrap();
        assert_eq!((none.index, none.score), (0, 0.0));
        // Tie: first candidate wins.
        let tie = vec!["gecko".to_string(), "lizard".to_string()];
        assert_eq!(select_generated_knowledge(&tie, &h, &f, &k, &keep).unwrap().index, 0);
    }

    #[test]
    fn corpus_overlap_metric() {
        let (e, p, g) = (ts(&["a", "b"]), ts(&["a", "c"]), ts(&["a", "c", "d"]));
        let items = [OverlapItem { evidence: &e, predicted: &p, gold: &g }];
        assert!((overlap_score(&items).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(overlap_score(&[]), None);
    }

    fn question(id: &str, gold: Option<Vec<&str>>) -> Question {
        Question {
            id: id.into(),
            stem: "stem".into(),
            options: Label::ALL
                .iter()
                .map(|&label| AnswerOption { label, text: "x".into() })
                .collect(),
            answer_key: Label::A,
            gold_fact: None,
            gold_missing_knowledge: gold.map(|g| g.into_iter().map(String::from).collect()),
        }
    }

    fn wordvec() -> EmbeddingTable {
        let mut t = EmbeddingTable::new(2).unwrap();
        for (w, v) in [("gecko", [1.0, 0.0]), ("geckos", [0.95, 0.05]), ("lizard", [0.0, 1.0]), ("hawk", [0.6, 0.8])] {
            t.insert(w, v.to_vec()).unwrap();
        }
        t
    }

    #[test]
    fn bow_labels_and_balance() {
        let tk = Tokenizer::default();
        let q1 = question("q1", Some(vec!["every gecko is a lizard"]));
        let q2 = question("q2", Some(vec![]));
        let h1 = ts(&["geckos", "hawk", "prey", "swoop"]);
        let f1 = ts(&["lizard", "eat"]);
        let h2 = ts(&["sun", "star"]);
        let f2 = ts(&["light"]);
        let sources = [
            BowSource { question: &q1, hypothesis: &h1, fact: &f1 },
            BowSource { question: &q2, hypothesis: &h2, fact: &f2 },
        ];
        let data = build_bow_training_data(&sources, &wordvec(), &tk, 0.9, 3).unwrap();
        let pos: Vec<&str> = data
            .iter()
            .filter(|e| e.label == BowLabel::Positive)
            .map(|e| e.word.as_str())
            .collect();
        // geckos ~ gecko by embedding, lizard verbatim; hawk is below 0.9.
        assert_eq!(pos, ["geckos", "lizard"]);
        assert_eq!(data.len(), 4);
        assert_eq!(data, build_bow_training_data(&sources, &wordvec(), &tk, 0.9, 3).unwrap());

        let none = [BowSource { question: &q2, hypothesis: &h2, fact: &f2 }];
        assert!(build_bow_training_data(&none, &wordvec(), &tk, 0.9, 3).is_err());
    }
}
