#![allow(dead_code)]

use std::path::{Path, PathBuf};

use abductive_ir::pipeline::PipelineConfig;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// The 20-question mini dataset with TF-IDF scorers, the lexical answer
/// scorer and the symmetric-difference model.
pub fn mini_config(out_dir: &Path) -> PipelineConfig {
    PipelineConfig {
        questions: Some(fixture("questions.jsonl")),
        facts: Some(fixture("openbook.txt")),
        knowledge: Some(fixture("knowledge.txt")),
        out_dir: out_dir.to_path_buf(),
        ..PipelineConfig::default()
    }
}

/// Brute-force scores for every document: dense vectors over the whole
/// vocabulary, recomputed from the raw token lists.
pub fn brute_force_scores(docs: &[Vec<String>], query: &[String], bm25: Option<(f64, f64)>) -> Vec<f64> {
    use std::collections::{BTreeMap, BTreeSet};
    let n = docs.len() as f64;
    let vocab: BTreeSet<&str> = docs.iter().flatten().map(String::as_str).collect();
    let df = |t: &str| docs.iter().filter(|d| d.iter().any(|w| w == t)).count() as f64;
    let idf = |t: &str| ((n + 1.0) / (df(t) + 1.0)).ln() + 1.0;
    let tf = |d: &[String], t: &str| d.iter().filter(|w| *w == t).count() as f64;
    let q: Vec<&str> = query.iter().map(String::as_str).filter(|t| vocab.contains(t)).collect();
    match bm25 {
        None => {
            let mut qv: BTreeMap<&str, f64> = BTreeMap::new();
            for t in &vocab {
                let c = q.iter().filter(|w| *w == t).count() as f64;
                qv.insert(t, c * idf(t));
            }
            let qn = qv.values().map(|x| x * x).sum::<f64>().sqrt();
            docs.iter()
                .map(|d| {
                    let dv: Vec<f64> = vocab.iter().map(|t| tf(d, t) * idf(t)).collect();
                    let dn = dv.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let dot: f64 = vocab.iter().zip(&dv).map(|(t, x)| qv[t] * x).sum();
                    if qn == 0.0 || dn == 0.0 { 0.0 } else { dot / (qn * dn) }
                })
                .collect()
        }
        Some((k1, b)) => {
            let avg = docs.iter().map(Vec::len).sum::<usize>() as f64 / n;
            let unique: BTreeSet<&str> = q.into_iter().collect();
            docs.iter()
                .map(|d| {
                    unique
                        .iter()
                        .map(|t| {
                            let f = tf(d, t);
                            idf(t) * f * (k1 + 1.0) / (f + k1 * (1.0 - b + b * d.len() as f64 / avg))
                        })
                        .sum()
                })
                .collect()
        }
    }
}

/// Sorts all positive scores best-first (ties by id) and keeps `top_n`.
pub fn brute_force_top(scores: &[f64], top_n: usize) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = scores.iter().copied().enumerate().filter(|&(_, s)| s > 0.0).collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    all.truncate(top_n);
    all
}

/// True when `got` matches `want` position by position within `tol`, and
/// each id of `got` is one `want` could have placed there (a tie within
/// `tol`).
pub fn same_ranking(got: &[(usize, f64)], want: &[(usize, f64)], all_scores: &[f64], tol: f64) -> bool {
    got.len() == want.len()
        && got.iter().zip(want).all(|(g, w)| {
            (g.1 - w.1).abs() <= tol && (g.0 == w.0 || (all_scores[g.0] - w.1).abs() <= tol)
        })
}

/// Exhaustive oracle for the information-gain recurrence: among all
/// orderings of the pool, the one where every position holds the best
/// remaining item under `(1 - max sim to anything earlier) * rel / rel_max`,
/// ties to the smaller id. Returns pool indices.
pub fn rerank_oracle(rel: &[f64], sim: &[Vec<f64>], ids: &[usize], rel_max: f64, top_k: usize) -> Vec<usize> {
    fn perms(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if k == items.len() {
            out.push(items.clone());
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            perms(items, k + 1, out);
            items.swap(k, i);
        }
    }
    let n = rel.len();
    let mut all = Vec::new();
    perms(&mut (0..n).collect(), 0, &mut all);
    let score = |prefix: &[usize], j: usize| {
        let red = prefix.iter().map(|&s| sim[s][j]).fold(0.0, f64::max);
        (1.0 - red) * rel[j] / rel_max
    };
    let consistent: Vec<&Vec<usize>> = all
        .iter()
        .filter(|order| {
            (0..n).all(|i| {
                let (prefix, rest) = order.split_at(i);
                let me = score(prefix, rest[0]);
                rest[1..].iter().all(|&o| {
                    let other = score(prefix, o);
                    me > other || (me == other && ids[rest[0]] < ids[o])
                })
            })
        })
        .collect();
    assert_eq!(consistent.len(), 1, "the recurrence defines a unique order");
    consistent[0][..top_k.min(n)].to_vec()
}
