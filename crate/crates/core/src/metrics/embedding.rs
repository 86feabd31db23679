use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::MetricError;

/// Maps a token sequence to one vector per token.
pub trait EmbeddingProvider {
    fn name(&self) -> &str;
    fn dimension(&self) -> usize;
    fn embed(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>, MetricError>;
}

/// Serializes calls to a provider that is not safe for concurrent use.
pub struct Serialized<P> {
    name: String,
    dimension: usize,
    inner: Mutex<P>,
}

impl<P: EmbeddingProvider> Serialized<P> {
    pub fn new(inner: P) -> Self {
        Self {
            name: inner.name().to_string(),
            dimension: inner.dimension(),
            inner: Mutex::new(inner),
        }
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for Serialized<P> {
    fn name(&self) -> &str {
        &self.name
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>, MetricError> {
        let guard = self
            .inner
            .lock()
            .map_err(|_| MetricError::Provider("provider mutex poisoned".into()))?;
        guard.embed(tokens)
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    tokens: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

/// Provider behind `POST {endpoint}/embed`.
pub struct HttpEmbeddingProvider {
    name: String,
    endpoint: String,
    dimension: usize,
    agent: ureq::Agent,
}

impl HttpEmbeddingProvider {
    pub fn new(name: impl Into<String>, endpoint: impl Into<String>, dimension: usize) -> Self {
        Self {
            name: name.into(),
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            dimension,
            agent: ureq::AgentBuilder::new().timeout(Duration::from_secs(60)).build(),
        }
    }
}

impl EmbeddingProvider for HttpEmbeddingProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>, MetricError> {
        let url = format!("{}/embed", self.endpoint);
        let response: EmbedResponse = self
            .agent
            .post(&url)
            .send_json(EmbedRequest { tokens })
            .map_err(|e| MetricError::Provider(format!("{url}: {e}")))?
            .into_json()
            .map_err(|e| MetricError::Provider(format!("{url}: malformed reply: {e}")))?;
        Ok(response.vectors)
    }
}

fn mean_vector(tokens: &[String], provider: &(impl EmbeddingProvider + ?Sized)) -> Result<Vec<f64>, MetricError> {
    let vectors = provider.embed(tokens)?;
    if vectors.len() != tokens.len() {
        return Err(MetricError::Provider(format!(
            "{}: {} vectors for {} tokens",
            provider.name(),
            vectors.len(),
            tokens.len()
        )));
    }
    let dim = provider.dimension();
    let mut mean = vec![0.0; dim];
    for v in &vectors {
        if v.len() != dim {
            return Err(MetricError::Provider(format!(
                "{}: vector of dimension {} (expected {dim})",
                provider.name(),
                v.len()
            )));
        }
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    let n = vectors.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(mean)
}

/// Cosine similarity between the mean token embeddings of the two texts.
pub fn embedding_score(
    candidate: &[String],
    reference: &[String],
    provider: &(impl EmbeddingProvider + ?Sized),
) -> Result<f64, MetricError> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let a = mean_vector(candidate, provider)?;
    let b = mean_vector(reference, provider)?;
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(MetricError::Provider(format!(
            "{}: zero mean embedding",
            provider.name()
        )));
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use std::collections::HashMap;

    /// Looks tokens up in a fixed table.
    pub(crate) struct TableProvider {
        pub table: HashMap<String, Vec<f64>>,
        pub dim: usize,
    }

    impl EmbeddingProvider for TableProvider {
        fn name(&self) -> &str {
            "table"
        }
        fn dimension(&self) -> usize {
            self.dim
        }
        fn embed(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>, MetricError> {
            tokens
                .iter()
                .map(|t| {
                    self.table
                        .get(t)
                        .cloned()
                        .ok_or_else(|| MetricError::Provider(format!("unknown token {t}")))
                })
                .collect()
        }
    }

    fn s(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|x| x.to_string()).collect()
    }

    fn provider(entries: &[(&str, Vec<f64>)]) -> TableProvider {
        TableProvider {
            dim: entries[0].1.len(),
            table: entries.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        }
    }

    #[test]
    fn identical_texts_score_one() {
        let p = provider(&[("a", vec![1.0, 2.0]), ("b", vec![-0.5, 0.3])]);
        let score = embedding_score(&s(&["a", "b"]), &s(&["a", "b"]), &p).unwrap();
        assert!((score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_axes_score_zero() {
        let p = provider(&[
            ("a", vec![1.0, 0.0, 0.0, 0.0]),
            ("b", vec![0.0, 1.0, 0.0, 0.0]),
            ("c", vec![0.0, 0.0, 1.0, 0.0]),
            ("d", vec![0.0, 0.0, 0.0, 1.0]),
        ]);
        let score = embedding_score(&s(&["a", "b"]), &s(&["c", "d"]), &p).unwrap();
        assert_eq!(score, 0.0);
    }

    #[test]
    fn sixty_degrees_score_half() {
        // means: (1, 0) and (cos 60°, sin 60°), each from two tokens
        let h = 3f64.sqrt() / 2.0;
        let p = provider(&[
            ("a", vec![1.0, 1.0]),
            ("b", vec![1.0, -1.0]),
            ("c", vec![0.5, h + 1.0]),
            ("d", vec![0.5, h - 1.0]),
        ]);
        let score = embedding_score(&s(&["a", "b"]), &s(&["c", "d"]), &p).unwrap();
        assert!((score - 0.5).abs() < 1e-9);
    }

    #[test]
    fn vector_count_mismatch_is_provider_error() {
        struct Short;
        impl EmbeddingProvider for Short {
            fn name(&self) -> &str {
                "short"
            }
            fn dimension(&self) -> usize {
                1
            }
            fn embed(&self, _: &[String]) -> Result<Vec<Vec<f64>>, MetricError> {
                Ok(vec![vec![1.0]])
            }
        }
        let err = embedding_score(&s(&["a", "b"]), &s(&["a"]), &Short).unwrap_err();
        assert!(matches!(err, MetricError::Provider(_)));
        let wrapped = Serialized::new(Short);
        assert!(embedding_score(&s(&["a"]), &s(&["a"]), &wrapped).is_ok());
    }
}
