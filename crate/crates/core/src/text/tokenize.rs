use std::collections::HashSet;
use std::path::Path;
use std::sync::OnceLock;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUILTIN_STOPWORDS: &str = include_str!("../../assets/stopwords.txt");

/// A stopword list. Lines starting with `#` are comments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords {
    words: HashSet<String>,
}

impl Stopwords {
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Self { words }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    /// The shipped English list.
    pub fn builtin() -> &'static Stopwords {
        static LIST: OnceLock<Stopwords> = OnceLock::new();
        LIST.get_or_init(|| Stopwords::parse(BUILTIN_STOPWORDS))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerConfig {
    pub lowercase: bool,
    pub remove_stopwords: bool,
    /// Light plural stripping (`lizards` -> `lizard`). Off by default.
    #[serde(default)]
    pub stem: bool,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        Self {
            lowercase: true,
            remove_stopwords: true,
            stem: false,
        }
    }
}

impl TokenizerConfig {
    /// Lowercased, stopwords kept.
    pub const KEEP_STOPWORDS: TokenizerConfig = TokenizerConfig {
        lowercase: true,
        remove_stopwords: false,
        stem: false,
    };
}

#[derive(Debug, Clone)]
pub struct Tokenizer {
    config: TokenizerConfig,
    stopwords: Stopwords,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Self::new(TokenizerConfig::default())
    }
}

impl Tokenizer {
    pub fn new(config: TokenizerConfig) -> Self {
        Self {
            config,
            stopwords: Stopwords::builtin().clone(),
        }
    }

    pub fn with_stopwords(config: TokenizerConfig, stopwords: Stopwords) -> Self {
        Self { config, stopwords }
    }

    pub fn config(&self) -> TokenizerConfig {
        self.config
    }

    /// Same stopword list, different switches.
    pub fn reconfigured(&self, config: TokenizerConfig) -> Self {
        Self {
            config,
            stopwords: self.stopwords.clone(),
        }
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        split_words(text)
            .into_iter()
            .filter_map(|raw| {
                let mut tok = if self.config.lowercase {
                    raw.to_lowercase()
                } else {
                    raw.to_string()
                };
                // Stopword lookup is case-insensitive regardless of `lowercase`.
                if self.config.remove_stopwords && self.stopwords.contains(&tok.to_lowercase()) {
                    return None;
                }
                if self.config.stem {
                    tok = strip_plural(&tok);
                }
                Some(tok)
            })
            .collect()
    }

    pub fn token_set(&self, text: &str) -> TokenSet {
        TokenSet::from_tokens(self.tokenize(text))
    }
}

/// Splits on every non-alphanumeric character except a hyphen that sits
/// between two alphanumerics (`red-tailed` stays whole, `a - b` does not).
fn split_words(text: &str) -> Vec<&str> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, &(pos, c)) in chars.iter().enumerate() {
        let keep = c.is_alphanumeric()
            || (c == '-'
                && start.is_some()
                && chars.get(i + 1).is_some_and(|&(_, n)| n.is_alphanumeric()));
        match (keep, start) {
            (true, None) => start = Some(pos),
            (false, Some(s)) => {
                out.push(&text[s..pos]);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(&text[s..]);
    }
    out
}

fn strip_plural(word: &str) -> String {
    let n = word.chars().count();
    if n > 4 && word.ends_with("ies") {
        return format!("{}y", &word[..word.len() - 3]);
    }
    if n > 4
        && ["sses", "shes", "ches", "xes", "zes"]
            .iter()
            .any(|s| word.ends_with(s))
    {
        return word[..word.len() - 2].to_string();
    }
    if n > 3 && word.ends_with('s') && !["ss", "us", "is"].iter().any(|s| word.ends_with(s)) {
        return word[..word.len() - 1].to_string();
    }
    word.to_string()
}

/// Unique tokens in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSet(IndexSet<String>);

impl TokenSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self(
            tokens
                .into_iter()
                .map(Into::into)
                .filter(|t: &String| !t.is_empty())
                .collect(),
        )
    }

    pub fn insert(&mut self, token: impl Into<String>) -> bool {
        let token = token.into();
        if token.is_empty() {
            return false;
        }
        self.0.insert(token)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    /// `self` followed by tokens of `other` not already present.
    pub fn union(&self, other: &TokenSet) -> TokenSet {
        let mut out = self.clone();
        for t in other.iter() {
            out.insert(t);
        }
        out
    }

    pub fn intersection(&self, other: &TokenSet) -> TokenSet {
        Self(self.0.iter().filter(|t| other.contains(t)).cloned().collect())
    }

    pub fn difference(&self, other: &TokenSet) -> TokenSet {
        Self(self.0.iter().filter(|t| !other.contains(t)).cloned().collect())
    }

    pub fn intersection_len(&self, other: &TokenSet) -> usize {
        self.iter().filter(|t| other.contains(t)).count()
    }

    pub fn is_subset(&self, other: &TokenSet) -> bool {
        self.iter().all(|t| other.contains(t))
    }

    /// Order-insensitive equality.
    pub fn same_members(&self, other: &TokenSet) -> bool {
        self.len() == other.len() && self.is_subset(other)
    }

    pub fn joined(&self) -> String {
        self.iter().collect::<Vec<_>>().join(" ")
    }

    pub fn into_vec(self) -> Vec<String> {
        self.0.into_iter().collect()
    }
}

impl FromIterator<String> for TokenSet {
    fn from_iter<T: IntoIterator<Item = String>>(iter: T) -> Self {
        Self::from_tokens(iter)
    }
}
