//! Top-level pipeline error. Only transport-class failures escape `answer`;
//! every pipeline-internal failure is converted into the fallback path.

use thiserror::Error;

use crate::decompose::DecomposeError;
use crate::index::IndexError;
use crate::planner::PlanError;
use crate::providers::ProviderError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Provider(#[from] ProviderError),

    #[error(transparent)]
    Index(#[from] IndexError),

    #[error(transparent)]
    Plan(#[from] PlanError),

    #[error("invalid question: {0}")]
    InvalidQuestion(String),

    #[error("configuration error: {0}")]
    Config(String),
}

impl PipelineError {
    /// Transport failures exit with code 2, everything else with 1.
    pub fn is_transport(&self) -> bool {
        match self {
            PipelineError::Provider(e) => e.is_transport(),
            PipelineError::Index(IndexError::Embed { source, .. }) => source.is_transport(),
            _ => false,
        }
    }
}

impl From<DecomposeError> for PipelineError {
    fn from(err: DecomposeError) -> Self {
        match err {
            DecomposeError::Provider(p) => PipelineError::Provider(p),
            other => PipelineError::Config(other.to_string()),
        }
    }
}
