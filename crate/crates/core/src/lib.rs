//! Logic-augmented generation engine.
//!
//! A reasoning-first retrieval pipeline: complex questions are adaptively
//! decomposed into dependency-ordered atomic sub-questions, each resolved
//! with logic-guided retrieval, guarded by a logical terminator that halts
//! inference when support collapses, and synthesized into a final answer
//! with a retrieval-grounded fallback path.
//!
//! The engine is LLM-agnostic: generation and embedding sit behind two small
//! traits with a hosted-model client, a deterministic hash embedder, and a
//! scripted provider for fully offline runs.

pub mod cli;
pub mod config;
pub mod context;
pub mod decompose;
pub mod error;
pub mod eval;
pub mod index;
pub mod planner;
pub mod providers;
pub mod reasoner;
pub mod synthesize;
pub mod templates;
pub mod types;

pub use context::PipelineCtx;
pub use types::{
    validate_chain, AblationFlags, AnswerTrace, ChainStep, ChainViolation, CognitiveLoadReport,
    DepEdge, LogicalChain, Passage, ProviderCalls, Question, QuestionOrigin, RetrievalHit,
    StepStatus, SubQuestion, TerminationEvent, TerminationReason, TerminatorConfig,
};
