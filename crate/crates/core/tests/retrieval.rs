mod common;

use abductive_ir::corpus::load_facts;
use abductive_ir::text::{build_index, query_index, InvertedIndex, ScoringMode, Tokenizer};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn docs() -> (Vec<String>, Vec<Vec<String>>) {
    let corpus = load_facts(&common::fixture("docs50.txt")).unwrap();
    let tk = Tokenizer::default();
    let texts = corpus.texts().to_vec();
    let tokens = texts.iter().map(|t| tk.tokenize(t)).collect();
    (texts, tokens)
}

fn random_queries(tokens: &[Vec<String>], count: usize, seed: u64) -> Vec<Vec<String>> {
    let vocab: Vec<&String> = tokens.iter().flatten().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let len = rng.random_range(1..=6);
            (0..len)
                .map(|_| {
                    if rng.random_bool(0.15) {
                        "zyzzyva".to_string()
                    } else {
                        (*vocab.choose(&mut rng).unwrap()).clone()
                    }
                })
                .collect()
        })
        .collect()
}

fn check(mode: ScoringMode, bm25: Option<(f64, f64)>) {
    let (texts, tokens) = docs();
    assert_eq!(texts.len(), 50);
    let index = build_index(&texts, mode, &Tokenizer::default()).unwrap();
    for q in random_queries(&tokens, 25, 7) {
        let scores = common::brute_force_scores(&tokens, &q, bm25);
        for top_n in [1, 5, 50] {
            let want = common::brute_force_top(&scores, top_n);
            let got = query_index(&index, &q, top_n);
            assert!(common::same_ranking(&got, &want, &scores, 1e-9), "{q:?}\n{got:?}\n{want:?}");
        }
    }
}

#[test]
fn tfidf_matches_brute_force() {
    check(ScoringMode::TfidfCosine, None);
}

#[test]
fn bm25_matches_brute_force() {
    check(ScoringMode::bm25(), Some((1.2, 0.75)));
}

#[test]
fn self_query_ranks_the_document_first() {
    let (texts, tokens) = docs();
    let index = build_index(&texts, ScoringMode::TfidfCosine, &Tokenizer::default()).unwrap();
    for (i, t) in tokens.iter().enumerate() {
        let hits = index.query(t, 1);
        assert_eq!(hits[0].0, i, "{}", texts[i]);
        assert!((hits[0].1 - 1.0).abs() < 1e-12);
    }
}

#[test]
fn saved_index_answers_identically() {
    let (texts, tokens) = docs();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("docs.idx");
    for mode in [ScoringMode::TfidfCosine, ScoringMode::bm25()] {
        let index = build_index(&texts, mode, &Tokenizer::default()).unwrap();
        index.save(&path).unwrap();
        let loaded = InvertedIndex::load(&path).unwrap();
        for q in random_queries(&tokens, 10, 3) {
            assert_eq!(index.score_all(&q), loaded.score_all(&q));
        }
    }
}

#[test]
fn corpus_order_does_not_change_scores() {
    let (texts, tokens) = docs();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut perm: Vec<usize> = (0..texts.len()).collect();
    for i in (1..perm.len()).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    let shuffled: Vec<&String> = perm.iter().map(|&i| &texts[i]).collect();
    let a = build_index(&texts, ScoringMode::TfidfCosine, &Tokenizer::default()).unwrap();
    let b = build_index(&shuffled, ScoringMode::TfidfCosine, &Tokenizer::default()).unwrap();
    for q in random_queries(&tokens, 10, 5) {
        let sa = a.score_all(&q);
        let sb = b.score_all(&q);
        for (new, &old) in perm.iter().enumerate() {
            assert_eq!(sa[old], sb[new]);
        }
    }
}
