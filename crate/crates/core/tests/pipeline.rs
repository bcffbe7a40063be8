mod common;

use abductive_ir::corpus::{read_jsonl, Label};
use abductive_ir::facts::FactList;
use abductive_ir::hypothesis::Hypothesis;
use abductive_ir::knowledge::KnowledgeList;
use abductive_ir::pipeline::{self, MatrixRecord, Pipeline, RelevanceKind};
use abductive_ir::abduction::AbductionModel;
use common::{fixture, mini_config};

#[test]
fn full_run_writes_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = Pipeline::new(mini_config(dir.path())).unwrap().run().unwrap();
    assert_eq!(out.predictions.len(), 20);
    assert_eq!(out.report.n_total, 20);
    assert_eq!(out.report.rows.len(), 1);

    let hyps: Vec<Hypothesis> = read_jsonl(&dir.path().join(pipeline::HYPOTHESES_FILE)).unwrap();
    assert_eq!(hyps.len(), 80);
    let facts: Vec<FactList> = read_jsonl(&dir.path().join(pipeline::FACTS_FILE)).unwrap();
    assert!(facts.iter().all(|l| l.facts.len() == 5));
    let knowledge: Vec<KnowledgeList> = read_jsonl(&dir.path().join(pipeline::KNOWLEDGE_FILE)).unwrap();
    assert_eq!(knowledge.len(), 80);
    assert!(knowledge.iter().all(|l| l.items.len() <= 10));
    let fk: Vec<MatrixRecord> = read_jsonl(&dir.path().join(pipeline::SCORES_FK_FILE)).unwrap();
    assert_eq!(fk.len(), 20);
    for name in [pipeline::QUERIES_FILE, pipeline::CANDIDATES_FILE, pipeline::SCORES_F_FILE, "report.jsonl", "report.txt"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }

    // Every chosen option lies among the two selected passages.
    for p in &out.predictions {
        assert_eq!(p.selected_mask.iter().map(|&d| d as usize).sum::<usize>(), 2);
        assert_eq!(p.selected_mask[p.chosen_label.index()], 1);
    }
    // The lexical scorer and TF-IDF retrieval find most planted gold facts.
    assert!(out.report.any_passage_count.unwrap() >= 15, "{:?}", out.report);
    assert!(out.report.accuracy > 0.25, "{:?}", out.report);
}

#[test]
fn zero_knowledge_is_facts_only() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = mini_config(dir.path());
    config.n_knowledge = 0;
    config.knowledge = None;
    let out = Pipeline::new(config).unwrap().run().unwrap();
    assert!(out.predictions.iter().all(|p| p.knowledge_scores.is_none()));
    assert!(out.predictions.iter().all(|p| p.weighted_scores == p.sum_scores));
    assert!(!dir.path().join(pipeline::KNOWLEDGE_FILE).exists());
    assert!(!dir.path().join(pipeline::SCORES_FK_FILE).exists());
}

#[test]
fn grid_emits_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let config = mini_config(dir.path());
    let report = Pipeline::new(config.clone()).unwrap().grid().unwrap();
    let ns: Vec<usize> = report.rows.iter().map(|r| r.n_facts).collect();
    assert_eq!(ns, [1, 2, 3, 5, 7, 10]);
    assert!(report.rows.iter().all(|r| r.n_knowledge == 10));
    // Gold recall can only grow with N.
    let any: Vec<usize> = report.rows.iter().map(|r| r.any_passage_count.unwrap()).collect();
    assert!(any.windows(2).all(|w| w[0] <= w[1]), "{any:?}");
    let text = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert_eq!(text.lines().count(), 7);

    // Grid rows agree with dedicated runs at the same point.
    for (n, k) in [(2, 10), (7, 10)] {
        let d = tempfile::tempdir().unwrap();
        let mut c = mini_config(d.path());
        c.n_facts = n;
        c.n_knowledge = k;
        let single = Pipeline::new(c).unwrap().run().unwrap();
        let row = report.rows.iter().find(|r| r.n_facts == n).unwrap();
        assert_eq!(&single.report.rows[0], row);
    }
}

#[test]
fn grid_with_knowledge_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = mini_config(dir.path());
    config.grid_facts = vec![1, 3];
    config.grid_knowledge = vec![0, 2, 5];
    let report = Pipeline::new(config).unwrap().grid().unwrap();
    let points: Vec<(usize, usize)> = report.rows.iter().map(|r| (r.n_facts, r.n_knowledge)).collect();
    assert_eq!(points, [(1, 0), (1, 2), (1, 5), (3, 0), (3, 2), (3, 5)]);
    assert!(report.rows.iter().any(|r| r.accuracy == report.accuracy));
}

#[test]
fn other_models_and_scorers_run() {
    for (model, relevance) in [
        (AbductionModel::Union, RelevanceKind::Ir),
        (AbductionModel::Symmdiff, RelevanceKind::Ir),
    ] {
        let dir = tempfile::tempdir().unwrap();
        let mut config = mini_config(dir.path());
        config.abduction = model;
        config.relevance = relevance;
        config.index_mode = pipeline::IndexKind::Bm25;
        let out = Pipeline::new(config).unwrap().run().unwrap();
        assert_eq!(out.predictions.len(), 20);
    }
}

#[test]
fn bag_of_words_model_uses_word_table() {
    let dir = tempfile::tempdir().unwrap();
    let probs = dir.path().join("probs.tsv");
    std::fs::write(&probs, "gecko\t0.9\nlizard\t0.8\nhawk\t0.1\n").unwrap();
    let mut config = mini_config(dir.path());
    config.abduction = AbductionModel::Bow;
    config.word_probs = Some(probs);
    let p = Pipeline::new(config).unwrap();
    let questions = p.load_questions().unwrap();
    let hyps = p.hypothesize(&questions).unwrap();
    let facts = p.retrieve_facts(&hyps, 1).unwrap();
    let queries = p.abduce(&hyps, &facts).unwrap();
    let gecko = queries
        .iter()
        .find(|q| q.question_id == "mini-11" && q.option_label == Label::C)
        .unwrap();
    // "lizards" in the fact is not the table's "lizard"; "hawk" is below theta.
    assert_eq!(gecko.tokens.iter().collect::<Vec<_>>(), ["gecko"]);
}

#[test]
fn generated_model_picks_best_overlap() {
    let dir = tempfile::tempdir().unwrap();
    let cands = dir.path().join("gen.jsonl");
    let mut lines = String::new();
    for q in 1..=20 {
        for l in ["A", "B", "C", "D"] {
            lines.push_str(&format!(
                "{{\"question_id\":\"mini-{q:02}\",\"option_label\":\"{l}\",\"candidates\":[\"unrelated words here\",\"a gecko is a lizard\"]}}\n"
            ));
        }
    }
    std::fs::write(&cands, lines).unwrap();
    let mut config = mini_config(dir.path());
    config.abduction = AbductionModel::Generated;
    config.gen_candidates = Some(cands);
    let p = Pipeline::new(config).unwrap();
    let questions = p.load_questions().unwrap();
    let hyps = p.hypothesize(&questions).unwrap();
    let facts = p.retrieve_facts(&hyps, 1).unwrap();
    let queries = p.abduce(&hyps, &facts).unwrap();
    let gecko = queries
        .iter()
        .find(|q| q.question_id == "mini-11" && q.option_label == Label::C)
        .unwrap();
    assert_eq!(gecko.tokens.iter().collect::<Vec<_>>(), ["gecko", "lizard"]);
}

#[test]
fn stage_errors_name_the_item() {
    let dir = tempfile::tempdir().unwrap();
    let config = mini_config(dir.path());
    let p = Pipeline::new(config).unwrap();
    let questions = p.load_questions().unwrap();
    let hyps = p.hypothesize(&questions).unwrap();
    let mut facts = p.retrieve_facts(&hyps, 5).unwrap();
    facts.retain(|l| !(l.question_id == "mini-07" && l.option_label == Label::B));
    let err = p.abduce(&hyps, &facts).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("abduce") && msg.contains("mini-07/B"), "{msg}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn missing_inputs_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = mini_config(dir.path());
    config.knowledge = Some(fixture("nope.txt"));
    assert_eq!(Pipeline::new(config).err().unwrap().exit_code(), 1);

    let mut config = mini_config(dir.path());
    config.knowledge = None;
    assert_eq!(Pipeline::new(config).unwrap().run().unwrap_err().exit_code(), 1);

    let mut config = mini_config(dir.path());
    config.answer_scorer = pipeline::AnswerScorerKind::Remote;
    config.remote_url = None;
    if std::env::var(abductive_ir::bridge::SCORER_URL_ENV).is_err() {
        assert_eq!(Pipeline::new(config).unwrap().run().unwrap_err().exit_code(), 1);
    }
}

#[test]
fn index_cache_is_reused() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("knowledge.idx");
    let mut config = mini_config(dir.path());
    config.index_cache = Some(cache.clone());
    let first = Pipeline::new(config.clone()).unwrap().run().unwrap();
    assert!(cache.exists());
    let second = Pipeline::new(config).unwrap().run().unwrap();
    assert_eq!(first.predictions, second.predictions);
}
