//! Accuracy and gold-fact recall over retrieved fact lists.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::answering::Prediction;
use crate::corpus::{append_jsonl, Question};
use crate::error::{Error, Result};
use crate::facts::FactList;
use crate::text::normalize_for_match;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub n_facts: usize,
    pub n_knowledge: usize,
    pub accuracy: f64,
    pub n_correct: usize,
    pub n_total: usize,
    /// `None` when no question carries a gold fact.
    pub any_passage_count: Option<usize>,
    pub correct_passage_count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub n_correct: usize,
    pub n_total: usize,
    pub any_passage_count: Option<usize>,
    pub correct_passage_count: Option<usize>,
    #[serde(default)]
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn row(&self, n_facts: usize, n_knowledge: usize) -> EvalRow {
        EvalRow {
            n_facts,
            n_knowledge,
            accuracy: self.accuracy,
            n_correct: self.n_correct,
            n_total: self.n_total,
            any_passage_count: self.any_passage_count,
            correct_passage_count: self.correct_passage_count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PassageCounts {
    pub any: usize,
    pub correct: usize,
}

/// Scores `predictions` against `questions`. Each question needs exactly one
/// prediction; fact lists are considered in full.
pub fn compute_metrics(predictions: &[Prediction], questions: &[Question], fact_lists: &[FactList]) -> Result<EvalReport> {
    let mut by_id: HashMap<&str, &Prediction> = HashMap::new();
    for p in predictions {
        if by_id.insert(p.question_id.as_str(), p).is_some() {
            return Err(Error::Validation(format!("duplicate prediction for question {}", p.question_id)));
        }
    }
    let known: HashSet<&str> = questions.iter().map(|q| q.id.as_str()).collect();
    if let Some(p) = predictions.iter().find(|p| !known.contains(p.question_id.as_str())) {
        return Err(Error::Validation(format!("prediction for unknown question {}", p.question_id)));
    }
    let mut n_correct = 0;
    for q in questions {
        let p = by_id
            .get(q.id.as_str())
            .ok_or_else(|| Error::Validation(format!("no prediction for question {}", q.id)))?;
        if p.chosen_label == q.answer_key {
            n_correct += 1;
        }
    }
    let counts = passage_counts(questions, fact_lists, usize::MAX)?;
    let n_total = questions.len();
    Ok(EvalReport {
        accuracy: if n_total == 0 { 0.0 } else { n_correct as f64 / n_total as f64 },
        n_correct,
        n_total,
        any_passage_count: counts.map(|c| c.any),
        correct_passage_count: counts.map(|c| c.correct),
        rows: Vec::new(),
    })
}

/// Counts questions whose gold fact is among the first `top_n` facts of any
/// option's list, and of the correct option's list. `None` when no question
/// has a gold fact.
pub fn passage_counts(questions: &[Question], fact_lists: &[FactList], top_n: usize) -> Result<Option<PassageCounts>> {
    let known: HashSet<&str> = questions.iter().map(|q| q.id.as_str()).collect();
    let mut lists: HashMap<&str, Vec<&FactList>> = HashMap::new();
    for list in fact_lists {
        if !known.contains(list.question_id.as_str()) {
            return Err(Error::Validation(format!("fact list for unknown question {}", list.question_id)));
        }
        lists.entry(list.question_id.as_str()).or_default().push(list);
    }

    let mut any_gold = false;
    let mut counts = PassageCounts { any: 0, correct: 0 };
    for q in questions {
        let Some(gold) = q.gold_fact.as_deref() else { continue };
        any_gold = true;
        let gold = normalize_for_match(gold);
        let hit = |list: &FactList| {
            list.facts
                .iter()
                .take(top_n)
                .any(|f| normalize_for_match(&f.text) == gold)
        };
        let qlists = lists.get(q.id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        if qlists.iter().any(|l| hit(l)) {
            counts.any += 1;
        }
        if qlists.iter().any(|l| l.option_label == q.answer_key && hit(l)) {
            counts.correct += 1;
        }
    }
    Ok(any_gold.then_some(counts))
}

/// Renders rows as a fixed-width table.
pub fn render_table(rows: &[EvalRow]) -> String {
    let mut out = String::new();
    let dash = |v: Option<usize>| v.map_or_else(|| "-".to_string(), |c| c.to_string());
    let _ = writeln!(
        out,
        "{:>4} {:>4} {:>12} {:>16} {:>12} {:>9}",
        "N", "K", "Any Passage", "Correct Passage", "Accuracy(%)", "Correct"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:>4} {:>4} {:>12} {:>16} {:>12.1} {:>9}",
            r.n_facts,
            r.n_knowledge,
            dash(r.any_passage_count),
            dash(r.correct_passage_count),
            r.accuracy * 100.0,
            format!("{}/{}", r.n_correct, r.n_total),
        );
    }
    out
}

/// Appends each row to `report.jsonl` and rewrites `report.txt` in `dir`.
pub fn write_report(dir: &Path, rows: &[EvalRow]) -> Result<()> {
    let jsonl = dir.join("report.jsonl");
    for row in rows {
        append_jsonl(&jsonl, row)?;
    }
    let txt = dir.join("report.txt");
    std::fs::write(&txt, render_table(rows)).map_err(|e| Error::io(txt, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AnswerOption, Label};
    use crate::facts::ScoredFact;

    fn question(id: &str, key: Label, gold: Option<&str>) -> Question {
        Question {
            id: id.into(),
            stem: "stem".into(),
            options: Label::ALL
                .iter()
                .map(|&label| AnswerOption { label, text: label.to_string() })
                .collect(),
            answer_key: key,
            gold_fact: gold.map(str::to_string),
            gold_missing_knowledge: None,
        }
    }

    fn prediction(id: &str, label: Label) -> Prediction {
        Prediction {
            question_id: id.into(),
            chosen_label: label,
            sum_scores: [0.0; 4],
            selected_mask: [1, 1, 0, 0],
            knowledge_scores: None,
            weighted_scores: [0.0; 4],
        }
    }

    fn list(id: &str, label: Label, texts: &[&str]) -> FactList {
        FactList {
            question_id: id.into(),
            option_label: label,
            facts: texts
                .iter()
                .enumerate()
                .map(|(i, t)| ScoredFact {
                    question_id: id.into(),
                    option_label: label,
                    fact_id: i,
                    text: t.to_string(),
                    rel: 1.0,
                })
                .collect(),
        }
    }

    #[test]
    fn gold_match_ignores_case_and_punctuation() {
        let qs = [question("q", Label::B, Some("Gravity pulls objects down."))];
        let lists = [list("q", Label::A, &["x"]), list("q", Label::B, &["gravity pulls objects, down"])];
        let r = compute_metrics(&[prediction("q", Label::B)], &qs, &lists).unwrap();
        assert_eq!((r.any_passage_count, r.correct_passage_count), (Some(1), Some(1)));
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn top_n_truncates() {
        let qs = [question("q", Label::A, Some("g"))];
        let lists = [list("q", Label::A, &["x", "g"])];
        assert_eq!(passage_counts(&qs, &lists, 1).unwrap(), Some(PassageCounts { any: 0, correct: 0 }));
        assert_eq!(passage_counts(&qs, &lists, 2).unwrap(), Some(PassageCounts { any: 1, correct: 1 }));
    }

    #[test]
    fn counts_omitted_without_gold() {
        let qs = [question("q", Label::A, None)];
        let r = compute_metrics(&[prediction("q", Label::C)], &qs, &[]).unwrap();
        assert_eq!(r.any_passage_count, None);
        assert_eq!(r.n_correct, 0);
    }

    #[test]
    fn id_mismatch_is_an_error() {
        let qs = [question("q1", Label::A, None)];
        assert!(compute_metrics(&[prediction("q2", Label::A)], &qs, &[]).is_err());
        assert!(compute_metrics(&[], &qs, &[]).is_err());
        let dup = [prediction("q1", Label::A), prediction("q1", Label::B)];
        assert!(compute_metrics(&dup, &qs, &[]).is_err());
        let stray = [list("zz", Label::A, &["x"])];
        assert!(compute_metrics(&[prediction("q1", Label::A)], &qs, &stray).is_err());
    }

    #[test]
    fn table_has_one_line_per_row() {
        let row = EvalRow {
            n_facts: 5,
            n_knowledge: 10,
            accuracy: 0.5,
            n_correct: 1,
            n_total: 2,
            any_passage_count: Some(2),
            correct_passage_count: None,
        };
        let t = render_table(&[row.clone(), row]);
        assert_eq!(t.lines().count(), 3);
        assert!(t.lines().nth(1).unwrap().contains("50.0"));
    }
}
