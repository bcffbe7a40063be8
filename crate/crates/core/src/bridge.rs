//! Client for the neural scoring service.
//!
//! Wire protocol (JSON over HTTP):
//!
//! ```text
//! POST {base}/score
//!   {"task": "similarity" | "answer", "pairs": [[a, b], ...] | [[passage, question, option], ...], "model_id": "..."}
//! -> {"scores": [f64, ...], "model_id": "...", "latency_ms": f64}
//! GET {base}/healthz
//! -> {"model_id": "...", "ready": bool}
//! ```
//!
//! Similarity scores are on the STS scale [0, 5]; answer scores in [0, 1].
//! Responses must preserve request order and length.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::answering::AnswerScorer;
use crate::error::{Error, Result};
use crate::scorer::{SimilarityScorer, STS_MAX};

pub const SCORER_URL_ENV: &str = "ABDUCT_IR_SCORER_URL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Similarity,
    Answer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub task: Task,
    pub pairs: Vec<Vec<String>>,
    pub model_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub scores: Vec<f64>,
    pub model_id: String,
    #[serde(default)]
    pub latency_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub model_id: String,
    pub ready: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub url: String,
    #[serde(default)]
    pub model_id: String,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_batch_size() -> usize {
    64
}

fn default_timeout_ms() -> u64 {
    30_000
}

impl RemoteConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            model_id: String::new(),
            batch_size: default_batch_size(),
            timeout_ms: default_timeout_ms(),
        }
    }

    /// The environment variable, when set, replaces the configured URL.
    pub fn with_env_override(mut self) -> Self {
        if let Ok(url) = std::env::var(SCORER_URL_ENV) {
            if !url.trim().is_empty() {
                self.url = url;
            }
        }
        self
    }
}

pub struct RemoteClient {
    config: RemoteConfig,
    agent: ureq::Agent,
}

impl RemoteClient {
    pub fn new(config: RemoteConfig) -> Result<Self> {
        if config.url.trim().is_empty() {
            return Err(Error::Config("remote scorer URL is empty".into()));
        }
        if config.batch_size == 0 {
            return Err(Error::Config("remote batch_size must be at least 1".into()));
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { config, agent })
    }

    fn endpoint(&self, path: &str) -> String {
        format!("{}/{}", self.config.url.trim_end_matches('/'), path)
    }

    fn fail(&self, message: impl Into<String>) -> Error {
        Error::scorer(format!("remote({})", self.config.url), message)
    }

    pub fn health(&self) -> Result<Health> {
        let mut resp = self
            .agent
            .get(&self.endpoint("healthz"))
            .call()
            .map_err(|e| self.fail(e.to_string()))?;
        if resp.status() != 200 {
            return Err(self.fail(format!("health check returned HTTP {}", resp.status())));
        }
        resp.body_mut().read_json().map_err(|e| self.fail(e.to_string()))
    }

    /// Scores `items` in batches of at most `batch_size`, preserving order.
    pub fn score(&self, task: Task, items: Vec<Vec<String>>) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(items.len());
        for chunk in items.chunks(self.config.batch_size) {
            let req = ScoreRequest {
                task,
                pairs: chunk.to_vec(),
                model_id: self.config.model_id.clone(),
            };
            let mut resp = self
                .agent
                .post(&self.endpoint("score"))
                .send_json(&req)
                .map_err(|e| self.fail(e.to_string()))?;
            let status = resp.status().as_u16();
            if status != 200 {
                let body = resp.body_mut().read_to_string().unwrap_or_default();
                return Err(self.fail(format!("HTTP {status}: {}", body.trim())));
            }
            let body: ScoreResponse = resp.body_mut().read_json().map_err(|e| self.fail(e.to_string()))?;
            if body.scores.len() != chunk.len() {
                return Err(self.fail(format!(
                    "sent {} items, received {} scores",
                    chunk.len(),
                    body.scores.len()
                )));
            }
            out.extend(body.scores);
        }
        Ok(out)
    }
}

/// STS-scale similarity served remotely.
pub struct RemoteSimilarityScorer {
    client: RemoteClient,
}

impl RemoteSimilarityScorer {
    pub fn new(client: RemoteClient) -> Self {
        Self { client }
    }
}

impl SimilarityScorer for RemoteSimilarityScorer {
    fn name(&self) -> &str {
        "remote"
    }

    fn range(&self) -> (f64, f64) {
        (0.0, STS_MAX)
    }

    fn score_batch(&self, query: &str, candidates: &[&str]) -> Result<Vec<f64>> {
        let items = candidates
            .iter()
            .map(|c| vec![query.to_string(), c.to_string()])
            .collect();
        self.client.score(Task::Similarity, items)
    }

    fn score_pairs(&self, pairs: &[(&str, &str)]) -> Result<Vec<f64>> {
        let items = pairs
            .iter()
            .map(|(a, b)| vec![a.to_string(), b.to_string()])
            .collect();
        self.client.score(Task::Similarity, items)
    }
}

/// Answer classification served remotely.
pub struct RemoteAnswerScorer {
    client: RemoteClient,
}

impl RemoteAnswerScorer {
    pub fn new(client: RemoteClient) -> Self {
        Self { client }
    }
}

impl AnswerScorer for RemoteAnswerScorer {
    fn name(&self) -> &str {
        "remote"
    }

    fn score(&self, passage: &str, question: &str, option: &str) -> Result<f64> {
        Ok(self.score_batch(&[(passage, question, option)])?[0])
    }

    fn score_batch(&self, items: &[(&str, &str, &str)]) -> Result<Vec<f64>> {
        let items = items
            .iter()
            .map(|(p, q, o)| vec![p.to_string(), q.to_string(), o.to_string()])
            .collect();
        self.client.score(Task::Answer, items)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_wire_format() {
        let req = ScoreRequest {
            task: Task::Similarity,
            pairs: vec![vec!["a".into(), "b".into()]],
            model_id: "sts".into(),
        };
        assert_eq!(
            serde_json::to_string(&req).unwrap(),
            r#"{"task":"similarity","pairs":[["a","b"]],"model_id":"sts"}"#
        );
        let resp: ScoreResponse = serde_json::from_str(r#"{"scores":[1.5],"model_id":"m","latency_ms":3}"#).unwrap();
        assert_eq!(resp.scores, [1.5]);
    }

    #[test]
    fn config_validation() {
        assert!(RemoteClient::new(RemoteConfig::new("")).is_err());
        let mut c = RemoteConfig::new("http://localhost:1");
        c.batch_size = 0;
        assert!(RemoteClient::new(c).is_err());
    }

    #[test]
    fn unreachable_is_scorer_error() {
        let mut c = RemoteConfig::new("http://127.0.0.1:9");
        c.timeout_ms = 500;
        let client = RemoteClient::new(c).unwrap();
        let err = client.score(Task::Answer, vec![vec!["p".into(), "q".into(), "o".into()]]).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
