//! Hosted-model backends speaking the common chat-completion and embeddings
//! wire format: a single endpoint, JSON body with model name and messages (or
//! input), bearer token from the environment.

use std::sync::Mutex;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{Embedder, ProviderConfig, ProviderError, PromptSpec, TextGenerator};

fn build_client(config: &ProviderConfig) -> Result<reqwest::blocking::Client, ProviderError> {
    reqwest::blocking::Client::builder()
        .timeout(config.timeout())
        .build()
        .map_err(|e| ProviderError::Transport {
            detail: format!("client construction failed: {e}"),
            attempts: 0,
        })
}

fn api_key(config: &ProviderConfig) -> Result<String, ProviderError> {
    std::env::var(&config.api_key_env).map_err(|_| ProviderError::MissingApiKey {
        var: config.api_key_env.clone(),
    })
}

/// POST the body, retrying on transport failures and retryable statuses.
fn post_with_retries(
    client: &reqwest::blocking::Client,
    config: &ProviderConfig,
    body: &serde_json::Value,
) -> Result<String, ProviderError> {
    let key = api_key(config)?;
    let attempts = config.max_retries + 1;
    let mut last_detail = String::new();
    for attempt in 1..=attempts {
        let response = client
            .post(&config.endpoint_url)
            .bearer_auth(&key)
            .json(body)
            .send();
        match response {
            Ok(resp) => {
                let status = resp.status();
                if status.is_success() {
                    return resp.text().map_err(|e| ProviderError::Transport {
                        detail: format!("reading response body: {e}"),
                        attempts: attempt,
                    });
                }
                let retryable = status.as_u16() == 429 || status.is_server_error();
                last_detail = format!("HTTP {status} from {}", config.endpoint_url);
                if !retryable {
                    return Err(ProviderError::Transport {
                        detail: last_detail,
                        attempts: attempt,
                    });
                }
            }
            Err(e) => {
                last_detail = e.to_string();
            }
        }
        if attempt < attempts {
            std::thread::sleep(Duration::from_millis(200 * u64::from(attempt)));
        }
    }
    Err(ProviderError::Transport {
        detail: last_detail,
        attempts,
    })
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

/// Chat-completion client for any hosted model speaking the common format.
pub struct HttpGenerator {
    config: ProviderConfig,
    client: reqwest::blocking::Client,
}

impl HttpGenerator {
    pub fn new(config: ProviderConfig) -> Result<Self, ProviderError> {
        let client = build_client(&config)?;
        Ok(Self { config, client })
    }
}

impl TextGenerator for HttpGenerator {
    fn complete(&self, spec: &PromptSpec) -> Result<String, ProviderError> {
        let body = json!({
            "model": self.config.model_name,
            "temperature": spec.temperature,
            "messages": [{"role": "user", "content": spec.rendered_text}],
        });
        let text = post_with_retries(&self.client, &self.config, &body)?;
        let parsed: ChatResponse =
            serde_json::from_str(&text).map_err(|e| ProviderError::MalformedResponse {
                role: spec.role_tag,
                detail: format!("chat response parse error: {e}"),
            })?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| ProviderError::MalformedResponse {
                role: spec.role_tag,
                detail: "chat response held no choices".to_string(),
            })
    }
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

/// Embeddings client. The first successful call pins the dimension; later
/// calls returning a different dimension fail.
pub struct HttpEmbedder {
    config: ProviderConfig,
    client: reqwest::blocking::Client,
    dimension: Mutex<Option<usize>>,
}

impl HttpEmbedder {
    pub fn new(config: ProviderConfig) -> Result<Self, ProviderError> {
        let client = build_client(&config)?;
        Ok(Self {
            config,
            client,
            dimension: Mutex::new(None),
        })
    }
}

impl Embedder for HttpEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        if text.trim().is_empty() {
            return Err(ProviderError::EmptyText);
        }
        let body = json!({
            "model": self.config.model_name,
            "input": text,
        });
        let raw = post_with_retries(&self.client, &self.config, &body)?;
        let parsed: EmbeddingResponse =
            serde_json::from_str(&raw).map_err(|e| ProviderError::MalformedResponse {
                role: super::RoleTag::AnswerStep,
                detail: format!("embedding response parse error: {e}"),
            })?;
        let vector = parsed
            .data
            .into_iter()
            .next()
            .map(|d| d.embedding)
            .ok_or_else(|| ProviderError::MalformedResponse {
                role: super::RoleTag::AnswerStep,
                detail: "embedding response held no data".to_string(),
            })?;

        let mut pinned = self.dimension.lock().expect("dimension lock");
        match *pinned {
            None => *pinned = Some(vector.len()),
            Some(expected) if expected != vector.len() => {
                return Err(ProviderError::DimensionMismatch {
                    expected,
                    got: vector.len(),
                });
            }
            Some(_) => {}
        }
        Ok(vector)
    }
}
