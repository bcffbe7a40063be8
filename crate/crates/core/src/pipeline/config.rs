use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::abduction::{AbductionModel, DEFAULT_SIM_THRESHOLD, DEFAULT_THETA};
use crate::answering::{Aggregation, DEFAULT_MAX_TOKENS};
use crate::bridge::RemoteConfig;
use crate::error::{Error, Result};
use crate::text::ScoringMode;

macro_rules! choice {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? } default $default:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
        pub enum $name {
            $(
                #[serde(rename = $text)]
                $variant,
            )+
        }

        impl $name {
            pub const NAMES: &'static [&'static str] = &[$($text),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(Self::$variant => $text),+
                }
            }
        }

        impl Default for $name {
            fn default() -> Self {
                Self::$default
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok(Self::$variant),)+
                    other => Err(Error::Config(format!(
                        "unknown {} `{other}` (expected one of: {})",
                        stringify!($name),
                        Self::NAMES.join(", ")
                    ))),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

choice!(
    /// Scores hypotheses against the fact corpus.
    FactScorerKind { Tfidf => "tfidf", Embedding => "embedding", Remote => "remote" } default Tfidf
);
choice!(
    /// Re-scores knowledge candidates against the hypothesis.
    RelevanceKind { Tfidf => "tfidf", Embedding => "embedding", Remote => "remote", Ir => "ir" } default Tfidf
);
choice!(
    /// Sentence similarity used for redundancy while re-ranking.
    RedundancyKind { Tfidf => "tfidf", Embedding => "embedding" } default Tfidf
);
choice!(
    AnswerScorerKind { Lexical => "lexical", Remote => "remote" } default Lexical
);
choice!(
    IndexKind { Tfidf => "tfidf", Bm25 => "bm25" } default Tfidf
);

impl IndexKind {
    pub fn mode(self) -> ScoringMode {
        match self {
            IndexKind::Tfidf => ScoringMode::TfidfCosine,
            IndexKind::Bm25 => ScoringMode::bm25(),
        }
    }
}

/// Every knob of a run. Keys are flat so that each has a matching CLI flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub questions: Option<PathBuf>,
    pub facts: Option<PathBuf>,
    pub knowledge: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    /// `word<TAB>probability` table for the bag-of-words model.
    pub word_probs: Option<PathBuf>,
    /// Pre-generated knowledge candidates for the `generated` model.
    pub gen_candidates: Option<PathBuf>,
    /// Binary cache of the knowledge index.
    pub index_cache: Option<PathBuf>,
    pub out_dir: PathBuf,

    pub fact_scorer: FactScorerKind,
    pub relevance: RelevanceKind,
    pub redundancy: RedundancyKind,
    pub answer_scorer: AnswerScorerKind,
    pub index_mode: IndexKind,
    pub abduction: AbductionModel,
    pub aggregation: Aggregation,

    pub remote_url: Option<String>,
    pub remote_model_id: String,
    pub remote_batch_size: usize,
    pub remote_timeout_ms: u64,

    pub n_facts: usize,
    pub n_knowledge: usize,
    /// Top facts whose tokens form `F` for abduction.
    pub abduction_facts: usize,
    pub pool_m: usize,
    pub theta: f64,
    pub top_k: usize,
    pub max_tokens: usize,
    pub seed: u64,
    pub parallelism: usize,
    pub samples_per_q: usize,
    pub sim_threshold: f64,

    pub grid_facts: Vec<usize>,
    /// Empty means `[n_knowledge]`.
    pub grid_knowledge: Vec<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let remote = RemoteConfig::new("");
        Self {
            questions: None,
            facts: None,
            knowledge: None,
            embeddings: None,
            stopwords: None,
            word_probs: None,
            gen_candidates: None,
            index_cache: None,
            out_dir: PathBuf::from("out"),
            fact_scorer: FactScorerKind::default(),
            relevance: RelevanceKind::default(),
            redundancy: RedundancyKind::default(),
            answer_scorer: AnswerScorerKind::default(),
            index_mode: IndexKind::default(),
            abduction: AbductionModel::default(),
            aggregation: Aggregation::default(),
            remote_url: None,
            remote_model_id: remote.model_id,
            remote_batch_size: remote.batch_size,
            remote_timeout_ms: remote.timeout_ms,
            n_facts: 5,
            n_knowledge: 10,
            abduction_facts: 1,
            pool_m: 50,
            theta: DEFAULT_THETA,
            top_k: 10,
            max_tokens: DEFAULT_MAX_TOKENS,
            seed: 0,
            parallelism: 1,
            samples_per_q: 8,
            sim_threshold: DEFAULT_SIM_THRESHOLD,
            grid_facts: vec![1, 2, 3, 5, 7, 10],
            grid_knowledge: Vec::new(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a TOML file; relative paths inside it resolve against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.resolve_paths(base);
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.questions,
            &mut self.facts,
            &mut self.knowledge,
            &mut self.embeddings,
            &mut self.stopwords,
            &mut self.word_probs,
            &mut self.gen_candidates,
            &mut self.index_cache,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        fix(&mut self.out_dir);
    }

    /// Checks numeric ranges and that every configured input path exists.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_facts == 0 {
            return bad("n_facts must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return bad(format!("theta {} outside [0, 1]", self.theta));
        }
        if !(-1.0..=1.0).contains(&self.sim_threshold) {
            return bad(format!("sim_threshold {} outside [-1, 1]", self.sim_threshold));
        }
        for (name, v) in [
            ("abduction_facts", self.abduction_facts),
            ("pool_m", self.pool_m),
            ("top_k", self.top_k),
            ("max_tokens", self.max_tokens),
            ("parallelism", self.parallelism),
            ("remote_batch_size", self.remote_batch_size),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if self.grid_facts.contains(&0) {
            return bad("grid_facts entries must be at least 1".into());
        }
        for (name, p) in self.paths() {
            if let Some(p) = p {
                if name != "index_cache" && !p.exists() {
                    return bad(format!("{name} path {} does not exist", p.display()));
                }
            }
        }
        Ok(())
    }

    fn paths(&self) -> [(&'static str, Option<&PathBuf>); 8] {
        [
            ("questions", self.questions.as_ref()),
            ("facts", self.facts.as_ref()),
            ("knowledge", self.knowledge.as_ref()),
            ("embeddings", self.embeddings.as_ref()),
            ("stopwords", self.stopwords.as_ref()),
            ("word_probs", self.word_probs.as_ref()),
            ("gen_candidates", self.gen_candidates.as_ref()),
            ("index_cache", self.index_cache.as_ref()),
        ]
    }

    /// The path stored under `name`, which must be set.
    pub fn require(&self, name: &str) -> Result<&Path> {
        let (_, p) = self
            .paths()
            .into_iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::Config(format!("unknown path key `{name}`")))?;
        p.map(PathBuf::as_path)
            .ok_or_else(|| Error::Config(format!("`{name}` is required for this command")))
    }

    /// Inputs a full run will touch, given the chosen scorers and model.
    pub fn required_for_run(&self) -> Vec<&'static str> {
        let mut need = vec!["questions", "facts"];
        let uses_knowledge = self.n_knowledge > 0;
        if uses_knowledge {
            need.push("knowledge");
        }
        let embedding = self.fact_scorer == FactScorerKind::Embedding
            || uses_knowledge
                && (self.relevance == RelevanceKind::Embedding || self.redundancy == RedundancyKind::Embedding);
        if embedding {
            need.push("embeddings");
        }
        if uses_knowledge && self.abduction == AbductionModel::Bow {
            need.push("word_probs");
        }
        if uses_knowledge && self.abduction == AbductionModel::Generated {
            need.push("gen_candidates");
        }
        need
    }

    pub fn uses_remote(&self) -> bool {
        self.fact_scorer == FactScorerKind::Remote
            || self.answer_scorer == AnswerScorerKind::Remote
            || self.n_knowledge > 0 && self.relevance == RelevanceKind::Remote
    }

    /// Remote settings with the environment override applied.
    pub fn remote(&self) -> Result<RemoteConfig> {
        let config = RemoteConfig {
            url: self.remote_url.clone().unwrap_or_default(),
            model_id: self.remote_model_id.clone(),
            batch_size: self.remote_batch_size,
            timeout_ms: self.remote_timeout_ms,
        }
        .with_env_override();
        if config.url.trim().is_empty() {
            return Err(Error::Config(format!(
                "a remote scorer is selected but neither remote_url nor {} is set",
                crate::bridge::SCORER_URL_ENV
            )));
        }
        Ok(config)
    }

    /// `(N, K)` pairs visited by a grid run, N-major.
    pub fn grid_points(&self) -> Vec<(usize, usize)> {
        let ks = if self.grid_knowledge.is_empty() {
            vec![self.n_knowledge]
        } else {
            self.grid_knowledge.clone()
        };
        self.grid_facts
            .iter()
            .flat_map(|&n| ks.iter().map(move |&k| (n, k)))
            .collect()
    }
}
