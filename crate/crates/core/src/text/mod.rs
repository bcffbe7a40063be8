//! Tokenization, sparse term vectors and the inverted index shared by every
//! retrieval stage.

mod index;
mod tokenize;
mod vector;

pub use index::{build_index, idf, query_index, rank_order, InvertedIndex, Posting, ScoringMode};
pub use tokenize::{Stopwords, TokenSet, Tokenizer, TokenizerConfig};
pub use vector::{cosine_sim, dense_cosine, SparseVector};

/// Lowercase, drop punctuation, collapse whitespace. Used for exact-match
/// comparisons of fact texts.
pub fn normalize_for_match(text: &str) -> String {
    text.chars()
        .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' })
        .collect::<String>()
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}
