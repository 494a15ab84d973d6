//! Domain types shared across the pipeline, plus structural chain validation.
//!
//! Everything here is immutable plain data once constructed; chain statuses
//! are only mutated by the reasoner, which owns one chain per query. All types
//! serialize to the snake_case JSON trace format.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// Where a question entered the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionOrigin {
    User,
    Decomposition,
}

/// A natural-language question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub text: String,
    pub origin: QuestionOrigin,
}

impl Question {
    pub fn user(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            origin: QuestionOrigin::User,
        }
    }

    /// Non-empty after whitespace trimming.
    pub fn is_valid(&self) -> bool {
        !self.text.trim().is_empty()
    }
}

/// Normalized complexity signals for one question. `total` is the exact sum
/// of the three components, each of which lies in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CognitiveLoadReport {
    pub semantic_scope: f64,
    pub reasoning_steps: f64,
    pub ambiguity: f64,
    pub total: f64,
}

impl CognitiveLoadReport {
    pub fn from_components(semantic_scope: f64, reasoning_steps: f64, ambiguity: f64) -> Self {
        Self {
            semantic_scope,
            reasoning_steps,
            ambiguity,
            total: semantic_scope + reasoning_steps + ambiguity,
        }
    }

    pub fn zero() -> Self {
        Self::from_components(0.0, 0.0, 0.0)
    }
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"#(\d+)").expect("placeholder regex"))
}

/// Indices referenced by `#n` placeholder tokens in a piece of text.
pub fn placeholder_indices(text: &str) -> BTreeSet<usize> {
    placeholder_re()
        .captures_iter(text)
        .filter_map(|c| c[1].parse::<usize>().ok())
        .collect()
}

/// Replace each `#n` in `text` with `answers[n]` where available. Placeholders
/// without an answer are left untouched.
pub fn substitute_placeholders(text: &str, answers: &BTreeMap<usize, String>) -> String {
    placeholder_re()
        .replace_all(text, |caps: &regex::Captures<'_>| {
            let n: usize = caps[1].parse().unwrap_or(0);
            match answers.get(&n) {
                Some(answer) => answer.clone(),
                None => caps[0].to_string(),
            }
        })
        .into_owned()
}

/// One atomic sub-question produced by decomposition.
///
/// `index` is the 1-based ordinal from the decomposition output; `deps` holds
/// every index referenced by a `#n` placeholder in `text`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubQuestion {
    pub index: usize,
    pub text: String,
    pub deps: BTreeSet<usize>,
    pub load: CognitiveLoadReport,
}

impl SubQuestion {
    /// Build a sub-question with `deps` derived from the placeholders in `text`.
    pub fn new(index: usize, text: impl Into<String>, load: CognitiveLoadReport) -> Self {
        let text = text.into();
        let deps = placeholder_indices(&text);
        Self {
            index,
            text,
            deps,
            load,
        }
    }
}

/// A retrievable chunk of corpus text. `text` carries the document title on
/// its first line; `embedding` dimension matches the owning index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Passage {
    pub id: String,
    pub source_doc: String,
    pub text: String,
    pub embedding: Vec<f64>,
}

impl Passage {
    /// Title line prepended at ingest.
    pub fn title(&self) -> &str {
        self.text.lines().next().unwrap_or("")
    }
}

/// A scored retrieval result. Result lists are sorted by score descending,
/// ties broken by passage id ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub passage: Passage,
    pub score: f64,
}

/// Sort into canonical result order: score descending, passage id ascending.
pub fn sort_hits(hits: &mut [RetrievalHit]) {
    hits.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.passage.id.cmp(&b.passage.id))
    });
}

/// Resolution state of one chain step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Pending,
    Answered,
    Unanswerable,
    Skipped,
}

/// A sub-question in chain position, with its resolution state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStep {
    pub sub_question: SubQuestion,
    pub status: StepStatus,
    pub answer: Option<String>,
    pub hits: Vec<RetrievalHit>,
    /// The concatenated query text actually embedded for this step.
    pub query_text: Option<String>,
}

impl ChainStep {
    pub fn pending(sub_question: SubQuestion) -> Self {
        Self {
            sub_question,
            status: StepStatus::Pending,
            answer: None,
            hits: Vec::new(),
            query_text: None,
        }
    }
}

/// A dependency edge: `from` must be resolved before `to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DepEdge {
    pub from: usize,
    pub to: usize,
}

/// Dependency-ordered sequence of sub-questions for one query.
///
/// `order_proof` lists every dependency edge; a valid chain places each
/// edge's `from` strictly before its `to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogicalChain {
    pub question: Question,
    pub steps: Vec<ChainStep>,
    pub order_proof: Vec<DepEdge>,
}

impl LogicalChain {
    /// Position of the step holding sub-question `index`, if present.
    pub fn position_of(&self, index: usize) -> Option<usize> {
        self.steps
            .iter()
            .position(|s| s.sub_question.index == index)
    }

    pub fn step(&self, index: usize) -> Option<&ChainStep> {
        self.steps.iter().find(|s| s.sub_question.index == index)
    }
}

/// Why the terminator halted inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    ConfidenceDrop,
    DependencyExhaustion,
    SemanticSaturation,
    StepLimit,
    DraftInconsistency,
}

impl fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            TerminationReason::ConfidenceDrop => "confidence_drop",
            TerminationReason::DependencyExhaustion => "dependency_exhaustion",
            TerminationReason::SemanticSaturation => "semantic_saturation",
            TerminationReason::StepLimit => "step_limit",
            TerminationReason::DraftInconsistency => "draft_inconsistency",
        };
        f.write_str(name)
    }
}

/// Record of the halt: which safeguard fired, at which sub-question index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminationEvent {
    pub reason: TerminationReason,
    pub step_index: usize,
    pub detail: String,
}

/// Thresholds for the logical terminator and retrieval depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TerminatorConfig {
    /// Similarity floor: a step whose every hit scores strictly below this
    /// has no external support.
    pub delta: f64,
    /// Redundancy ceiling: a new passage more similar than this to prior
    /// context carries no new information.
    pub gamma: f64,
    /// Cap on resolved reasoning steps.
    pub t_max: usize,
    /// Retrieval depth per step.
    pub k: usize,
    /// Share of new passages that must exceed `gamma` for saturation.
    pub saturation_fraction: f64,
}

impl Default for TerminatorConfig {
    fn default() -> Self {
        Self {
            delta: 0.3,
            gamma: 0.9,
            t_max: 5,
            k: 5,
            saturation_fraction: 0.8,
        }
    }
}

impl TerminatorConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.delta) || !(0.0..=1.0).contains(&self.gamma) {
            return Err("delta and gamma must lie in [0, 1]".into());
        }
        if self.delta >= self.gamma {
            return Err(format!(
                "delta ({}) must be strictly below gamma ({})",
                self.delta, self.gamma
            ));
        }
        if self.t_max < 1 {
            return Err("t_max must be at least 1".into());
        }
        if self.k < 1 {
            return Err("k must be at least 1".into());
        }
        if !(self.saturation_fraction > 0.0 && self.saturation_fraction <= 1.0) {
            return Err("saturation_fraction must lie in (0, 1]".into());
        }
        Ok(())
    }
}

/// Which pipeline stages are active. All four on is the full pipeline;
/// all four off degrades to vanilla top-k retrieval plus generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationFlags {
    pub decompose: bool,
    pub reorder: bool,
    pub chain: bool,
    pub terminator: bool,
}

impl Default for AblationFlags {
    fn default() -> Self {
        Self::all_on()
    }
}

impl AblationFlags {
    pub fn all_on() -> Self {
        Self {
            decompose: true,
            reorder: true,
            chain: true,
            terminator: true,
        }
    }

    pub fn all_off() -> Self {
        Self {
            decompose: false,
            reorder: false,
            chain: false,
            terminator: false,
        }
    }

    /// Row label in ablation tables.
    pub fn label(&self) -> String {
        if self == &Self::all_off() {
            return "retrieval-only".to_string();
        }
        let mut parts = Vec::new();
        if self.decompose {
            parts.push("decompose");
        }
        if self.reorder {
            parts.push("reorder");
        }
        if self.chain {
            parts.push("chain");
        }
        if self.terminator {
            parts.push("terminator");
        }
        if parts.is_empty() {
            "retrieval-only".to_string()
        } else {
            format!("w/ {}", parts.join(" + "))
        }
    }
}

/// Per-query provider usage counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderCalls {
    pub llm_calls: u64,
    pub embed_calls: u64,
    pub retrievals: u64,
}

/// Machine-readable record of one full pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerTrace {
    pub question: Question,
    pub sub_questions: Vec<SubQuestion>,
    pub chain: LogicalChain,
    pub termination: Option<TerminationEvent>,
    pub used_fallback: bool,
    pub draft: Option<String>,
    pub final_answer: String,
    pub provider_calls: ProviderCalls,
    pub flags: AblationFlags,
    pub warnings: Vec<String>,
}

/// One violated chain invariant. Violations are data, not failures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ChainViolation {
    /// Edge whose dependency appears at or after its dependent.
    BackwardEdge { from: usize, to: usize },
    /// Edge endpoint that is not a step of the chain.
    UnknownEdgeEndpoint { from: usize, to: usize },
    /// The same sub-question index appears in more than one step.
    DuplicateIndex { index: usize },
    /// Placeholder `#n` in a step's text with `n` missing from its deps.
    PlaceholderNotInDeps { index: usize, placeholder: usize },
    /// A step listing itself as a dependency.
    SelfDependency { index: usize },
    /// Dependency index below 1.
    DependencyBelowOne { index: usize },
    /// Dependency on an index with no step in the chain.
    DanglingDependency { index: usize, dep: usize },
    /// The dependency relation contains a cycle.
    Cycle { nodes: Vec<usize> },
    /// A dependency edge missing from the order proof.
    UnprovenEdge { from: usize, to: usize },
    /// Answered step without a non-empty answer.
    AnswerMissing { index: usize },
    /// Pending or skipped step carrying an answer.
    UnexpectedAnswer { index: usize },
}

impl fmt::Display for ChainViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChainViolation::BackwardEdge { from, to } => {
                write!(f, "edge {from}->{to} points backward in step order")
            }
            ChainViolation::UnknownEdgeEndpoint { from, to } => {
                write!(f, "edge {from}->{to} references a missing step")
            }
            ChainViolation::DuplicateIndex { index } => {
                write!(f, "sub-question index {index} appears more than once")
            }
            ChainViolation::PlaceholderNotInDeps { index, placeholder } => {
                write!(f, "step {index} uses #{placeholder} without listing it as a dep")
            }
            ChainViolation::SelfDependency { index } => {
                write!(f, "step {index} depends on itself")
            }
            ChainViolation::DependencyBelowOne { index } => {
                write!(f, "step {index} lists a dependency below 1")
            }
            ChainViolation::DanglingDependency { index, dep } => {
                write!(f, "step {index} depends on missing step {dep}")
            }
            ChainViolation::Cycle { nodes } => {
                write!(f, "dependency cycle: {nodes:?}")
            }
            ChainViolation::UnprovenEdge { from, to } => {
                write!(f, "edge {from}->{to} absent from order proof")
            }
            ChainViolation::AnswerMissing { index } => {
                write!(f, "step {index} is answered but has no answer text")
            }
            ChainViolation::UnexpectedAnswer { index } => {
                write!(f, "step {index} carries an answer despite its status")
            }
        }
    }
}

/// Check every structural invariant of a chain. Returns an empty list when
/// the chain is well-formed; otherwise every violated edge or step is listed.
pub fn validate_chain(chain: &LogicalChain) -> Vec<ChainViolation> {
    let mut violations = Vec::new();

    let mut position: BTreeMap<usize, usize> = BTreeMap::new();
    for (pos, step) in chain.steps.iter().enumerate() {
        let idx = step.sub_question.index;
        if position.insert(idx, pos).is_some() {
            violations.push(ChainViolation::DuplicateIndex { index: idx });
        }
    }

    // Per-step structure.
    for step in &chain.steps {
        let sub = &step.sub_question;
        for ph in placeholder_indices(&sub.text) {
            if !sub.deps.contains(&ph) {
                violations.push(ChainViolation::PlaceholderNotInDeps {
                    index: sub.index,
                    placeholder: ph,
                });
            }
        }
        for &dep in &sub.deps {
            if dep == sub.index {
                violations.push(ChainViolation::SelfDependency { index: sub.index });
            }
            if dep < 1 {
                violations.push(ChainViolation::DependencyBelowOne { index: sub.index });
            }
            if dep >= 1 && dep != sub.index && !position.contains_key(&dep) {
                violations.push(ChainViolation::DanglingDependency {
                    index: sub.index,
                    dep,
                });
            }
        }
        match step.status {
            StepStatus::Answered => {
                if step.answer.as_deref().map_or(true, |a| a.trim().is_empty()) {
                    violations.push(ChainViolation::AnswerMissing { index: sub.index });
                }
            }
            StepStatus::Pending | StepStatus::Skipped => {
                if step.answer.is_some() {
                    violations.push(ChainViolation::UnexpectedAnswer { index: sub.index });
                }
            }
            StepStatus::Unanswerable => {}
        }
    }

    // Dependency edges derived from deps, checked for order and proof coverage.
    let proof: BTreeSet<DepEdge> = chain.order_proof.iter().copied().collect();
    let mut edges: BTreeSet<DepEdge> = BTreeSet::new();
    for step in &chain.steps {
        let to = step.sub_question.index;
        for &from in &step.sub_question.deps {
            if from != to && from >= 1 {
                edges.insert(DepEdge { from, to });
            }
        }
    }
    for edge in &edges {
        match (position.get(&edge.from), position.get(&edge.to)) {
            (Some(pf), Some(pt)) => {
                if pf >= pt {
                    violations.push(ChainViolation::BackwardEdge {
                        from: edge.from,
                        to: edge.to,
                    });
                }
            }
            _ => continue, // dangling dep already reported
        }
        if !proof.contains(edge) {
            violations.push(ChainViolation::UnprovenEdge {
                from: edge.from,
                to: edge.to,
            });
        }
    }
    for edge in &proof {
        if !(position.contains_key(&edge.from) && position.contains_key(&edge.to)) {
            violations.push(ChainViolation::UnknownEdgeEndpoint {
                from: edge.from,
                to: edge.to,
            });
        }
    }

    if let Some(cycle) = find_cycle(&edges, position.keys().copied()) {
        violations.push(ChainViolation::Cycle { nodes: cycle });
    }

    violations
}

/// First cycle found in the dependency relation, as a node sequence that
/// starts and ends at the same index. None when acyclic.
pub(crate) fn find_cycle(
    edges: &BTreeSet<DepEdge>,
    nodes: impl IntoIterator<Item = usize>,
) -> Option<Vec<usize>> {
    let mut adjacency: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for node in nodes {
        adjacency.entry(node).or_default();
    }
    for edge in edges {
        adjacency.entry(edge.from).or_default().push(edge.to);
    }

    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        White,
        Grey,
        Black,
    }
    let mut marks: BTreeMap<usize, Mark> = adjacency.keys().map(|&n| (n, Mark::White)).collect();

    fn dfs(
        node: usize,
        adjacency: &BTreeMap<usize, Vec<usize>>,
        marks: &mut BTreeMap<usize, Mark>,
        stack: &mut Vec<usize>,
    ) -> Option<Vec<usize>> {
        marks.insert(node, Mark::Grey);
        stack.push(node);
        for &next in adjacency.get(&node).map(Vec::as_slice).unwrap_or(&[]) {
            match marks.get(&next).copied().unwrap_or(Mark::White) {
                Mark::Grey => {
                    let start = stack.iter().position(|&n| n == next).unwrap_or(0);
                    let mut cycle: Vec<usize> = stack[start..].to_vec();
                    cycle.push(next);
                    return Some(cycle);
                }
                Mark::White => {
                    if let Some(cycle) = dfs(next, adjacency, marks, stack) {
                        return Some(cycle);
                    }
                }
                Mark::Black => {}
            }
        }
        stack.pop();
        marks.insert(node, Mark::Black);
        None
    }

    let keys: Vec<usize> = adjacency.keys().copied().collect();
    for node in keys {
        if marks.get(&node) == Some(&Mark::White) {
            let mut stack = Vec::new();
            if let Some(cycle) = dfs(node, &adjacency, &mut marks, &mut stack) {
                return Some(cycle);
            }
        }
    }
    None
}
