//! Open-book fact retrieval per hypothesis, and generation of STS-style
//! training pairs for a knowledge-extraction scorer.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{FactCorpus, Label, Question};
use crate::error::{Error, Result};
use crate::hypothesis::{generate_hypotheses, Hypothesis};
use crate::scorer::{check_scores, SimilarityScorer, STS_MAX};
use crate::text::{normalize_for_match, rank_order, Tokenizer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredFact {
    pub question_id: String,
    pub option_label: Label,
    pub fact_id: usize,
    pub text: String,
    pub rel: f64,
}

/// Stage record: the ranked facts for one (question, option).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactList {
    pub question_id: String,
    pub option_label: Label,
    pub facts: Vec<ScoredFact>,
}

/// Exact top-`top_n` facts by `scorer`, best first, ties by ascending fact id.
/// Facts scoring 0 are kept, so the result always has `min(top_n, |corpus|)`
/// entries.
pub fn retrieve_facts(
    hypothesis: &Hypothesis,
    scorer: &dyn SimilarityScorer,
    corpus: &FactCorpus,
    top_n: usize,
) -> Result<Vec<ScoredFact>> {
    if top_n == 0 {
        return Err(Error::Config("top_n must be at least 1".into()));
    }
    let texts: Vec<&str> = corpus.texts().iter().map(String::as_str).collect();
    let scores = scorer.score_batch(&hypothesis.text, &texts)?;
    if scores.len() != texts.len() {
        return Err(Error::scorer(
            scorer.name(),
            format!("returned {} scores for {} facts", scores.len(), texts.len()),
        ));
    }
    check_scores(scorer, &scores)?;
    let mut ranked: Vec<(usize, f64)> = scores.into_iter().enumerate().collect();
    ranked.sort_by(rank_order);
    ranked.truncate(top_n);
    Ok(ranked
        .into_iter()
        .map(|(fact_id, rel)| ScoredFact {
            question_id: hypothesis.question_id.clone(),
            option_label: hypothesis.option_label,
            fact_id,
            text: texts[fact_id].to_string(),
            rel,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StsTrainingPair {
    pub hypothesis_text: String,
    pub fact_text: String,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StsPairs {
    pub pairs: Vec<StsTrainingPair>,
    /// Questions without a gold fact.
    pub skipped: usize,
}

/// One gold pair (target 5.0) per question plus `samples_per_q` sampled
/// facts scored against the gold fact. Samples are drawn without
/// replacement, round-robin over five unit-width target buckets so the
/// target distribution stays as flat as the corpus allows.
pub fn generate_sts_training_pairs(
    questions: &[Question],
    corpus: &FactCorpus,
    sts_scorer: &dyn SimilarityScorer,
    tokenizer: &Tokenizer,
    samples_per_q: usize,
    seed: u64,
) -> Result<StsPairs> {
    let (lo, hi) = sts_scorer.range();
    if lo != 0.0 || hi != STS_MAX {
        return Err(Error::Config(format!(
            "STS scorer `{}` has range [{lo}, {hi}], expected [0, 5]",
            sts_scorer.name()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    let mut skipped = 0;

    for q in questions {
        let Some(gold) = q.gold_fact.as_deref() else {
            skipped += 1;
            continue;
        };
        let hyp = generate_hypotheses(q, tokenizer)
            .into_iter()
            .find(|h| h.option_label == q.answer_key)
            .expect("four hypotheses");
        pairs.push(StsTrainingPair {
            hypothesis_text: hyp.text.clone(),
            fact_text: gold.to_string(),
            target: STS_MAX,
        });
        if samples_per_q == 0 {
            continue;
        }

        let gold_norm = normalize_for_match(gold);
        let others: Vec<&str> = corpus
            .texts()
            .iter()
            .map(String::as_str)
            .filter(|f| normalize_for_match(f) != gold_norm)
            .collect();
        let scored_pairs: Vec<(&str, &str)> = others.iter().map(|&f| (f, gold)).collect();
        let targets = sts_scorer
            .score_pairs(&scored_pairs)
            .map_err(|e| e.in_stage("gen-sts-pairs", &q.id, None))?;
        check_scores(sts_scorer, &targets).map_err(|e| e.in_stage("gen-sts-pairs", &q.id, None))?;

        let mut buckets: [Vec<usize>; 5] = Default::default();
        for (i, &t) in targets.iter().enumerate() {
            buckets[(t.floor().max(0.0) as usize).min(4)].push(i);
        }
        for b in &mut buckets {
            b.shuffle(&mut rng);
        }
        let mut cursors = [0usize; 5];
        let mut taken = 0;
        while taken < samples_per_q {
            let mut progressed = false;
            for (b, bucket) in buckets.iter().enumerate() {
                if taken == samples_per_q {
                    break;
                }
                if let Some(&i) = bucket.get(cursors[b]) {
                    cursors[b] += 1;
                    taken += 1;
                    progressed = true;
                    pairs.push(StsTrainingPair {
                        hypothesis_text: hyp.text.clone(),
                        fact_text: others[i].to_string(),
                        target: targets[i].clamp(0.0, STS_MAX),
                    });
                }
            }
            if !progressed {
                break;
            }
        }
    }
    if skipped > 0 {
        log::warn!("{skipped} question(s) without a gold fact skipped");
    }
    Ok(StsPairs { pairs, skipped })
}

fn tsv_field(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

/// `hypothesis TAB fact TAB target` per line.
pub fn write_sts_pairs(path: &Path, pairs: &[StsTrainingPair]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    for p in pairs {
        writeln!(w, "{}\t{}\t{}", tsv_field(&p.hypothesis_text), tsv_field(&p.fact_text), p.target)
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_questions, Corpus};
    use crate::scorer::{ScaledScorer, TfidfScorer};

    fn corpus() -> FactCorpus {
        Corpus::new(
            [
                "deep sea animals live deep in the ocean",
                "coral lives in the ocean",
                "a fish lives in water",
                "hawks eat lizards",
                "the sun is a star",
                "plants need sunlight to grow",
            ]
            .map(String::from)
            .to_vec(),
        )
        .unwrap()
    }

    const SHARK: &str = r#"{"id":"s1","question":{"stem":"Frilled sharks and angler fish live far beneath the surface of the ocean, which is why they are known as","choices":[{"text":"Deep sea animals","label":"A"},{"text":"fish","label":"B"},{"text":"Long Sea Fish","label":"C"},{"text":"Far Sea Animals","label":"D"}]},"answerKey":"A","fact1":"deep sea animals live deep in the ocean"}"#;

    fn sts(c: &FactCorpus) -> ScaledScorer<TfidfScorer> {
        ScaledScorer::sts(TfidfScorer::new(c.texts(), &Tokenizer::default()).unwrap())
    }

    #[test]
    fn gold_pair_scores_five() {
        let c = corpus();
        let qs = parse_questions(SHARK, Path::new("t")).unwrap();
        let out = generate_sts_training_pairs(&qs, &c, &sts(&c), &Tokenizer::default(), 0, 1).unwrap();
        assert_eq!(out.pairs.len(), 1);
        let p = &out.pairs[0];
        assert_eq!(p.target, 5.0);
        assert_eq!(p.fact_text, "deep sea animals live deep in the ocean");
        assert!(p.hypothesis_text.ends_with("Deep sea animals."));
    }

    #[test]
    fn sampled_pairs_in_range_and_ordered_like_scorer() {
        let c = corpus();
        let qs = parse_questions(SHARK, Path::new("t")).unwrap();
        let scorer = sts(&c);
        let out = generate_sts_training_pairs(&qs, &c, &scorer, &Tokenizer::default(), 5, 7).unwrap();
        assert_eq!(out.pairs.len(), 6);
        let gold = "deep sea animals live deep in the ocean";
        for p in &out.pairs[1..] {
            assert!((0.0..=5.0).contains(&p.target));
            assert_ne!(p.fact_text, gold);
        }
        let target = |f: &str| out.pairs.iter().find(|p| p.fact_text == f).map(|p| p.target);
        // Coral shares "ocean" with the gold fact, the fish fact shares nothing.
        let coral = target("coral lives in the ocean").unwrap();
        let fish = target("a fish lives in water").unwrap();
        assert!(coral > fish, "{coral} vs {fish}");
    }

    #[test]
    fn reproducible_with_seed() {
        let c = corpus();
        let qs = parse_questions(SHARK, Path::new("t")).unwrap();
        let a = generate_sts_training_pairs(&qs, &c, &sts(&c), &Tokenizer::default(), 3, 42).unwrap();
        let b = generate_sts_training_pairs(&qs, &c, &sts(&c), &Tokenizer::default(), 3, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_gold_skipped_and_range_enforced() {
        let c = corpus();
        let text = SHARK.replace(r#","fact1":"deep sea animals live deep in the ocean""#, "");
        let qs = parse_questions(&text, Path::new("t")).unwrap();
        let out = generate_sts_training_pairs(&qs, &c, &sts(&c), &Tokenizer::default(), 3, 1).unwrap();
        assert_eq!((out.pairs.len(), out.skipped), (0, 1));

        let unit = TfidfScorer::new(c.texts(), &Tokenizer::default()).unwrap();
        assert!(generate_sts_training_pairs(&qs, &c, &unit, &Tokenizer::default(), 3, 1).is_err());
    }

    #[test]
    fn identical_fact_first() {
        let c = corpus();
        let scorer = TfidfScorer::new(c.texts(), &Tokenizer::default()).unwrap();
        let h = Hypothesis {
            question_id: "q".into(),
            option_label: Label::C,
            text: "coral lives in the ocean".into(),
            token_set: Default::default(),
            rule: crate::hypothesis::Rule::Append,
        };
        let got = retrieve_facts(&h, &scorer, &c, 10).unwrap();
        assert_eq!(got.len(), c.len());
        assert_eq!(got[0].fact_id, 1);
        assert!((got[0].rel - 1.0).abs() < 1e-12);
        assert!(got.windows(2).all(|w| w[0].rel >= w[1].rel));
        assert!(retrieve_facts(&h, &scorer, &c, 0).is_err());
    }
}
