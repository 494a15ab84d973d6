//! Pluggable text-generation and embedding backends.
//!
//! Every pipeline stage talks to the same two narrow traits, so a scripted
//! double can stand in for a hosted model and the whole engine runs offline.
//! Providers are pure with respect to their inputs; per-query call counts are
//! tracked by the caller through [`CallCounters`].

mod hash_embedder;
mod http;
mod scripted;

pub use hash_embedder::HashEmbedder;
pub use http::{HttpEmbedder, HttpGenerator};
pub use scripted::{Fixture, ScriptedMode, ScriptedProvider};

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::ProviderCalls;

/// Which pipeline stage a prompt belongs to. The tag decides the response
/// schema the consuming module expects.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum RoleTag {
    Decompose,
    EstimateDepth,
    AnswerStep,
    JudgeAnswerable,
    Draft,
    ValidateDraft,
    Fallback,
    JudgeEquivalence,
}

impl RoleTag {
    pub fn name(&self) -> &'static str {
        match self {
            RoleTag::Decompose => "decompose",
            RoleTag::EstimateDepth => "estimate_depth",
            RoleTag::AnswerStep => "answer_step",
            RoleTag::JudgeAnswerable => "judge_answerable",
            RoleTag::Draft => "draft",
            RoleTag::ValidateDraft => "validate_draft",
            RoleTag::Fallback => "fallback",
            RoleTag::JudgeEquivalence => "judge_equivalence",
        }
    }
}

impl std::fmt::Display for RoleTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A fully rendered prompt ready for a generation backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub role_tag: RoleTag,
    pub rendered_text: String,
    pub temperature: f64,
}

impl PromptSpec {
    /// Temperature 0 for every pipeline role: evaluation comparability
    /// requires deterministic generations.
    pub fn new(role_tag: RoleTag, rendered_text: impl Into<String>) -> Self {
        Self {
            role_tag,
            rendered_text: rendered_text.into(),
            temperature: 0.0,
        }
    }
}

/// Connection settings for one hosted backend (chat or embeddings).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub endpoint_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_secs: f64,
    pub max_retries: u32,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "https://api.openai.com/v1/chat/completions".to_string(),
            model_name: "gpt-4o-mini".to_string(),
            api_key_env: "OPENAI_API_KEY".to_string(),
            timeout_secs: 60.0,
            max_retries: 2,
        }
    }
}

impl ProviderConfig {
    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs.max(0.001))
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.timeout_secs <= 0.0 {
            return Err("provider timeout must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("transport failure after {attempts} attempt(s): {detail}")]
    Transport { detail: String, attempts: u32 },

    #[error("malformed {role} response: {detail}")]
    MalformedResponse { role: RoleTag, detail: String },

    #[error("no fixture for role {role} matching prompt: {prompt_excerpt:?}")]
    UnknownFixture { role: RoleTag, prompt_excerpt: String },

    #[error("duplicate fixture key for role {role}: {key:?}")]
    DuplicateFixtureKey { role: RoleTag, key: String },

    #[error("cannot embed empty text")]
    EmptyText,

    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("environment variable {var} is not set")]
    MissingApiKey { var: String },
}

impl ProviderError {
    /// Transport-class failures map to exit code 2; everything else is a
    /// configuration or fixture problem.
    pub fn is_transport(&self) -> bool {
        matches!(self, ProviderError::Transport { .. })
    }
}

/// Text-generation backend.
pub trait TextGenerator: Send + Sync {
    fn complete(&self, spec: &PromptSpec) -> Result<String, ProviderError>;
}

/// Embedding backend. One instance serves both questions and passages so the
/// shared-encoder contract holds, and `embed` is referentially transparent
/// within an instance.
pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError>;
}

/// Per-query provider usage, incremented at call sites so provider
/// implementations stay pure.
#[derive(Debug, Default)]
pub struct CallCounters {
    llm: AtomicU64,
    embed: AtomicU64,
    retrievals: AtomicU64,
}

impl CallCounters {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_llm(&self) {
        self.llm.fetch_add(1, Ordering::Relaxed);
    }

    pub fn record_embed(&self) {
        self.embed.fetch_add(1, Ordering::Relaxed);
    }

    pub fn record_retrieval(&self) {
        self.retrievals.fetch_add(1, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> ProviderCalls {
        ProviderCalls {
            llm_calls: self.llm.load(Ordering::Relaxed),
            embed_calls: self.embed.load(Ordering::Relaxed),
            retrievals: self.retrievals.load(Ordering::Relaxed),
        }
    }
}

/// Counted wrapper: one generation call.
pub fn complete_counted(
    generator: &dyn TextGenerator,
    counters: &CallCounters,
    spec: &PromptSpec,
) -> Result<String, ProviderError> {
    counters.record_llm();
    generator.complete(spec)
}

/// Counted wrapper: one embedding call.
pub fn embed_counted(
    embedder: &dyn Embedder,
    counters: &CallCounters,
    text: &str,
) -> Result<Vec<f64>, ProviderError> {
    counters.record_embed();
    embedder.embed(text)
}
