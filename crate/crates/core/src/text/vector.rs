use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Term-weighted bag. Zero weights are never stored; iteration is in term order
/// so that every sum over a vector is reproducible bit for bit.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SparseVector(BTreeMap<String, f64>);

impl SparseVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `weight` to `term`. Non-finite or non-positive totals drop the entry.
    pub fn add(&mut self, term: impl Into<String>, weight: f64) {
        let term = term.into();
        let w = self.0.get(&term).copied().unwrap_or(0.0) + weight;
        if w.is_finite() && w > 0.0 {
            self.0.insert(term, w);
        } else {
            self.0.remove(&term);
        }
    }

    pub fn get(&self, term: &str) -> f64 {
        self.0.get(term).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn norm(&self) -> f64 {
        self.0.values().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small.iter().map(|(t, w)| w * large.get(t)).sum()
    }
}

impl<S: Into<String>> FromIterator<(S, f64)> for SparseVector {
    fn from_iter<T: IntoIterator<Item = (S, f64)>>(iter: T) -> Self {
        let mut v = SparseVector::new();
        for (t, w) in iter {
            v.add(t, w);
        }
        v
    }
}

/// Cosine of two non-negative sparse vectors, clamped to [0, 1]; 0 when
/// either side is empty.
pub fn cosine_sim(a: &SparseVector, b: &SparseVector) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let denom = a.norm() * b.norm();
    if denom == 0.0 {
        return 0.0;
    }
    (a.dot(b) / denom).clamp(0.0, 1.0)
}

/// Cosine of two dense vectors in [-1, 1]; 0 if either has zero norm.
pub fn dense_cosine(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x), f64::from(y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}
