use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::extract::CodeDocPair;

use super::{FilterError, QualityScores, Scale, Scorer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteScorerConfig {
    pub max_batch: usize,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_in_flight: usize,
    pub timeout_ms: u64,
}

impl Default for RemoteScorerConfig {
    fn default() -> Self {
        Self {
            max_batch: 64,
            max_retries: 3,
            initial_backoff_ms: 200,
            max_in_flight: 4,
            timeout_ms: 30_000,
        }
    }
}

#[derive(Serialize)]
struct WirePair<'a> {
    code: String,
    docstring: &'a str,
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    pairs: Vec<WirePair<'a>>,
}

#[derive(Deserialize)]
struct WireScore {
    step1: f64,
    step2: Option<f64>,
}

#[derive(Deserialize)]
struct ScoreResponse {
    scores: Vec<WireScore>,
}

/// Client for a scoring model served at `POST {endpoint}/score`.
pub struct RemoteScorer {
    endpoint: String,
    config: RemoteScorerConfig,
    agent: ureq::Agent,
}

impl RemoteScorer {
    pub fn new(endpoint: impl Into<String>, config: RemoteScorerConfig) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build();
        Self {
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            config,
            agent,
        }
    }

    /// Scores one batch, retrying transport failures and non-2xx replies
    /// with exponential backoff.
    pub fn score_batch(&self, pairs: &[CodeDocPair]) -> Result<Vec<QualityScores>, FilterError> {
        if pairs.is_empty() {
            return Ok(Vec::new());
        }
        if pairs.len() > self.config.max_batch {
            return Err(FilterError::BatchTooLarge {
                size: pairs.len(),
                max: self.config.max_batch,
            });
        }
        let request = ScoreRequest {
            pairs: pairs
                .iter()
                .map(|p| WirePair {
                    code: p.code(),
                    docstring: p.docstring(),
                })
                .collect(),
        };
        let url = format!("{}/score", self.endpoint);

        let mut attempts = 0;
        let body = loop {
            attempts += 1;
            match self.agent.post(&url).send_json(&request) {
                Ok(resp) => {
                    break resp
                        .into_string()
                        .map_err(|e| FilterError::MalformedResponse(e.to_string()))?
                }
                Err(err) => {
                    if attempts > self.config.max_retries {
                        return Err(FilterError::ScorerUnavailable {
                            endpoint: self.endpoint.clone(),
                            attempts,
                            last_error: err.to_string(),
                        });
                    }
                    let backoff = self.config.initial_backoff_ms << (attempts - 1).min(16);
                    log::warn!("scorer attempt {attempts} failed: {err}; retrying in {backoff} ms");
                    thread::sleep(Duration::from_millis(backoff));
                }
            }
        };
        parse_response(&body, pairs.len())
    }
}

fn parse_response(body: &str, expected: usize) -> Result<Vec<QualityScores>, FilterError> {
    let response: ScoreResponse =
        serde_json::from_str(body).map_err(|e| FilterError::MalformedResponse(e.to_string()))?;
    if response.scores.len() != expected {
        return Err(FilterError::MalformedResponse(format!(
            "{} scores for {expected} pairs",
            response.scores.len()
        )));
    }
    response
        .scores
        .into_iter()
        .map(|s| {
            QualityScores::new(s.step1, s.step2, None, Scale::Normalized)
                .map_err(|e| FilterError::MalformedResponse(e.to_string()))
        })
        .collect()
}

impl Scorer for RemoteScorer {
    /// Splits into batches and keeps up to `max_in_flight` requests open;
    /// results come back in input order and any failed batch fails the call.
    fn score(&self, pairs: &[CodeDocPair]) -> Result<Vec<QualityScores>, FilterError> {
        let batches: Vec<&[CodeDocPair]> = pairs.chunks(self.config.max_batch.max(1)).collect();
        let mut out = Vec::with_capacity(pairs.len());
        for wave in batches.chunks(self.config.max_in_flight.max(1)) {
            let results: Vec<_> = thread::scope(|s| {
                let handles: Vec<_> = wave
                    .iter()
                    .map(|batch| s.spawn(move || self.score_batch(batch)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("scorer thread panicked"))
                    .collect()
            });
            for r in results {
                out.extend(r?);
            }
        }
        Ok(out)
    }
}
