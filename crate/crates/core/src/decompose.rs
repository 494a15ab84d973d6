//! Cognitive-load estimation, the split gate with its decaying threshold, and
//! recursive decomposition into atomic sub-questions.
//!
//! Load is the sum of three normalized signals: embedding-component variance
//! (semantic scope), an LLM hop-count estimate (reasoning steps), and a
//! referent count (ambiguity). A question splits while its load exceeds
//! `tau0 * decay_rate^t`, where `t` is the recursion depth — the only clock
//! this module has.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::PipelineCtx;
use crate::providers::{ProviderError, PromptSpec, RoleTag};
use crate::types::{placeholder_indices, CognitiveLoadReport, Question, QuestionOrigin, SubQuestion};

/// Third-person pronouns and demonstratives counted as ambiguous referents.
pub const REFERENT_TERMS: &[&str] = &[
    "he", "him", "his", "himself", "she", "her", "hers", "herself", "it", "its", "itself",
    "they", "them", "their", "theirs", "themselves", "this", "that", "these", "those",
];

/// Split-gate calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoadConfig {
    /// Initial threshold; the load range is [0, 3).
    pub tau0: f64,
    /// Per-recursion-depth geometric decay, in (0, 1).
    pub decay_rate: f64,
    pub max_recursion: usize,
    pub scope_scale: f64,
    pub depth_scale: f64,
    pub ambiguity_scale: f64,
    /// Additional referent words, merged with the built-in list.
    pub extra_referent_terms: Vec<String>,
}

impl Default for LoadConfig {
    fn default() -> Self {
        Self {
            tau0: 1.5,
            decay_rate: 0.9,
            max_recursion: 3,
            scope_scale: 1.0,
            depth_scale: 2.0,
            ambiguity_scale: 1.0,
            extra_referent_terms: Vec::new(),
        }
    }
}

impl LoadConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.tau0 <= 0.0 {
            return Err("tau0 must be positive".into());
        }
        if !(self.decay_rate > 0.0 && self.decay_rate < 1.0) {
            return Err("decay_rate must lie in (0, 1)".into());
        }
        if self.max_recursion < 1 {
            return Err("max_recursion must be at least 1".into());
        }
        if self.scope_scale <= 0.0 || self.depth_scale <= 0.0 || self.ambiguity_scale <= 0.0 {
            return Err("load scales must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum DecomposeError {
    #[error("decomposition unparseable after re-prompt: {detail}")]
    Unparseable { detail: String },

    #[error("sub-question {index} references nonexistent sub-question #{reference} (list has {count})")]
    DanglingReference {
        index: usize,
        reference: usize,
        count: usize,
    },

    #[error("sub-question {index} references itself")]
    SelfReference { index: usize },

    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// Monotone map from [0, inf) onto [0, 1).
pub fn sigma(x: f64) -> f64 {
    let x = x.max(0.0);
    x / (1.0 + x)
}

/// Threshold at recursion depth `t`.
pub fn tau(cfg: &LoadConfig, t: usize) -> f64 {
    cfg.tau0 * cfg.decay_rate.powi(t as i32)
}

/// Population variance of a vector's components.
fn component_variance(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

/// Semantic scope: normalized variance of the question embedding's components.
pub fn semantic_scope(
    question: &Question,
    ctx: &PipelineCtx<'_>,
    cfg: &LoadConfig,
) -> Result<f64, ProviderError> {
    let embedding = ctx.embed(&question.text)?;
    Ok(sigma(component_variance(&embedding) / cfg.scope_scale))
}

fn first_integer(text: &str) -> Option<i64> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"-?\d+").expect("integer regex"));
    re.find(text).and_then(|m| m.as_str().parse::<i64>().ok())
}

/// Reasoning steps: LLM hop-count estimate mapped through sigma.
///
/// Out-of-range estimates clamp into [1, 10]. A response with no integer at
/// all is re-prompted once; if still unparseable the depth defaults to 1 and
/// a warning is recorded for the trace.
pub fn reasoning_depth(
    question: &Question,
    ctx: &PipelineCtx<'_>,
    cfg: &LoadConfig,
    warnings: &mut Vec<String>,
) -> Result<f64, ProviderError> {
    let spec = PromptSpec::new(
        RoleTag::EstimateDepth,
        ctx.templates.render_estimate_depth(&question.text),
    );
    let mut estimate = first_integer(&ctx.complete(&spec)?);
    if estimate.is_none() {
        estimate = first_integer(&ctx.complete(&spec)?);
    }
    let depth = match estimate {
        Some(d) => d.clamp(1, 10) as f64,
        None => {
            warnings.push(format!(
                "depth estimate unparseable for {:?}; defaulting to 1",
                question.text
            ));
            1.0
        }
    };
    Ok(sigma(depth / cfg.depth_scale))
}

fn word_tokens(text: &str) -> Vec<&str> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r"[\p{L}\p{N}]+(?:'[\p{L}\p{N}]+)?").expect("token regex")
    });
    re.find_iter(text).map(|m| m.as_str()).collect()
}

fn placeholder_count(text: &str) -> usize {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"#\d+").expect("placeholder-count regex"));
    re.find_iter(text).count()
}

/// Count ambiguous referents: third-person pronouns, demonstratives,
/// placeholder tokens, and — when the question carries no proper-noun-like
/// anchor (a capitalized non-initial word or a placeholder) — definite
/// descriptions of the form "the <word>".
pub fn count_referents(text: &str, cfg: &LoadConfig) -> usize {
    let tokens = word_tokens(text);
    let term_set: BTreeSet<String> = REFERENT_TERMS
        .iter()
        .map(|t| t.to_string())
        .chain(cfg.extra_referent_terms.iter().map(|t| t.to_lowercase()))
        .collect();

    let placeholders = placeholder_count(text);
    let mut count = placeholders;
    for token in &tokens {
        if term_set.contains(&token.to_lowercase()) {
            count += 1;
        }
    }

    let has_anchor = placeholders > 0
        || tokens
            .iter()
            .skip(1)
            .any(|t| t.chars().next().is_some_and(|c| c.is_uppercase()));
    if !has_anchor {
        for pair in tokens.windows(2) {
            if pair[0].eq_ignore_ascii_case("the") {
                count += 1;
            }
        }
    }
    count
}

/// Ambiguity: log-scaled referent count mapped through sigma.
pub fn ambiguity(question: &Question, cfg: &LoadConfig) -> f64 {
    let r = count_referents(&question.text, cfg) as f64;
    sigma((1.0 + r).ln() / cfg.ambiguity_scale)
}

/// Full cognitive-load report; `total` is the exact component sum.
pub fn cognitive_load(
    question: &Question,
    ctx: &PipelineCtx<'_>,
    cfg: &LoadConfig,
    warnings: &mut Vec<String>,
) -> Result<CognitiveLoadReport, ProviderError> {
    let scope = semantic_scope(question, ctx, cfg)?;
    let steps = reasoning_depth(question, ctx, cfg, warnings)?;
    let amb = ambiguity(question, cfg);
    Ok(CognitiveLoadReport::from_components(scope, steps, amb))
}

/// The split gate: strictly greater-than comparison against the decayed
/// threshold.
pub fn split_condition(
    question: &Question,
    depth_t: usize,
    ctx: &PipelineCtx<'_>,
    cfg: &LoadConfig,
    warnings: &mut Vec<String>,
) -> Result<bool, ProviderError> {
    let load = cognitive_load(question, ctx, cfg, warnings)?;
    Ok(load.total > tau(cfg, depth_t))
}

fn numbered_line_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(\d+)\s*[.):\-]\s*(.+?)\s*$").expect("numbered-line regex"))
}

/// Parse a numbered decomposition list. Indices must run 1..=m in order.
fn parse_numbered_list(response: &str) -> Result<Vec<String>, String> {
    let mut items = Vec::new();
    for line in response.lines() {
        if let Some(caps) = numbered_line_re().captures(line) {
            let number: usize = caps[1].parse().map_err(|e| format!("bad number: {e}"))?;
            items.push((number, caps[2].to_string()));
        }
    }
    if items.is_empty() {
        return Err("no numbered sub-questions found".to_string());
    }
    for (pos, (number, _)) in items.iter().enumerate() {
        if *number != pos + 1 {
            return Err(format!(
                "sub-question numbers must run 1..{}, found {} at position {}",
                items.len(),
                number,
                pos + 1
            ));
        }
    }
    Ok(items.into_iter().map(|(_, text)| text).collect())
}

/// Rewrite every `#x` token via `map`; tokens mapped to `None` are kept.
fn rewrite_refs(text: &str, map: impl Fn(usize) -> Option<usize>) -> String {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"#(\d+)").expect("ref regex"));
    re.replace_all(text, |caps: &regex::Captures<'_>| {
        let x: usize = caps[1].parse().unwrap_or(0);
        match map(x) {
            Some(y) => format!("#{y}"),
            None => caps[0].to_string(),
        }
    })
    .into_owned()
}

/// Relabel sub-question indices and placeholder references through a total
/// index map. The dependency relation is preserved up to the map's relabeling.
pub(crate) fn relabel(
    subs: &[SubQuestion],
    map: &std::collections::BTreeMap<usize, usize>,
) -> Vec<SubQuestion> {
    subs.iter()
        .map(|sub| {
            let text = rewrite_refs(&sub.text, |x| map.get(&x).copied());
            let index = map.get(&sub.index).copied().unwrap_or(sub.index);
            SubQuestion::new(index, text, sub.load)
        })
        .collect()
}

/// Expansion of one parent sub-question.
enum Block {
    /// Child kept verbatim; any `#x` in its text references the parent list.
    Verbatim(SubQuestion),
    /// Child fractured further; `#x <= len` references the block's own
    /// members, anything larger the parent list. When the two readings
    /// collide the local one wins — the unavoidable ambiguity of a shared
    /// `#n` namespace across nesting levels.
    Expanded(Vec<SubQuestion>),
}

impl Block {
    fn members(&self) -> &[SubQuestion] {
        match self {
            Block::Verbatim(sub) => std::slice::from_ref(sub),
            Block::Expanded(subs) => subs,
        }
    }
}

/// Splice per-parent expansion blocks into one contiguous list.
///
/// A parent-level reference `#x` maps to the LAST member of block `x` — the
/// member that completes parent `x`'s question. Self-references map onto the
/// referring step's own block and are rejected by final validation.
fn splice_blocks(blocks: &[Block]) -> Vec<SubQuestion> {
    let parent_count = blocks.len();
    let mut bases = Vec::with_capacity(parent_count);
    let mut next = 1usize;
    for block in blocks {
        bases.push(next);
        next += block.members().len();
    }
    let last_of = |parent: usize| bases[parent - 1] + blocks[parent - 1].members().len() - 1;

    let mut out = Vec::with_capacity(next - 1);
    for (i, block) in blocks.iter().enumerate() {
        let base = bases[i];
        let local_size = match block {
            Block::Verbatim(_) => 0, // verbatim children carry no local refs
            Block::Expanded(subs) => subs.len(),
        };
        for (local_pos, member) in block.members().iter().enumerate() {
            let text = rewrite_refs(&member.text, |x| {
                if x >= 1 && x <= local_size {
                    Some(base + x - 1)
                } else if x >= 1 && x <= parent_count {
                    Some(last_of(x))
                } else {
                    None
                }
            });
            out.push(SubQuestion::new(base + local_pos, text, member.load));
        }
    }
    out
}

fn validate_references(subs: &[SubQuestion]) -> Result<(), DecomposeError> {
    let count = subs.len();
    for sub in subs {
        for reference in placeholder_indices(&sub.text) {
            if reference == sub.index {
                return Err(DecomposeError::SelfReference { index: sub.index });
            }
            if reference < 1 || reference > count {
                return Err(DecomposeError::DanglingReference {
                    index: sub.index,
                    reference,
                    count,
                });
            }
        }
    }
    Ok(())
}

fn request_decomposition(
    text: &str,
    ctx: &PipelineCtx<'_>,
) -> Result<Vec<String>, DecomposeError> {
    let spec = PromptSpec::new(RoleTag::Decompose, ctx.templates.render_decompose(text));
    let first = ctx.complete(&spec)?;
    match parse_numbered_list(&first) {
        Ok(items) => Ok(items),
        Err(_) => {
            let second = ctx.complete(&spec)?;
            parse_numbered_list(&second)
                .map_err(|detail| DecomposeError::Unparseable { detail })
        }
    }
}

fn expand(
    text: &str,
    load: CognitiveLoadReport,
    depth: usize,
    ctx: &PipelineCtx<'_>,
    cfg: &LoadConfig,
    warnings: &mut Vec<String>,
) -> Result<Block, DecomposeError> {
    if !(load.total > tau(cfg, depth)) || depth >= cfg.max_recursion {
        return Ok(Block::Verbatim(SubQuestion::new(1, text, load)));
    }
    let child_texts = request_decomposition(text, ctx)?;
    let mut blocks = Vec::with_capacity(child_texts.len());
    for (i, child_text) in child_texts.iter().enumerate() {
        let child = Question {
            id: format!("sub-{}", i + 1),
            text: child_text.clone(),
            origin: QuestionOrigin::Decomposition,
        };
        let child_load = cognitive_load(&child, ctx, cfg, warnings)?;
        blocks.push(expand(child_text, child_load, depth + 1, ctx, cfg, warnings)?);
    }
    Ok(Block::Expanded(splice_blocks(&blocks)))
}

/// Recursive doubt-and-verify decomposition.
///
/// Questions below the threshold come back verbatim as a single sub-question.
/// Above it, the LLM proposes a numbered list; every member is re-gated at
/// depth `t + 1` and further fractured (with consistent renumbering) until
/// everything passes or `max_recursion` is reached. The final list has
/// contiguous indices `1..=m` and every placeholder resolvable.
pub fn decompose(
    question: &Question,
    ctx: &PipelineCtx<'_>,
    cfg: &LoadConfig,
    warnings: &mut Vec<String>,
) -> Result<Vec<SubQuestion>, DecomposeError> {
    let load = cognitive_load(question, ctx, cfg, warnings)?;
    let subs = match expand(&question.text, load, 0, ctx, cfg, warnings)? {
        Block::Verbatim(sub) => vec![sub],
        Block::Expanded(subs) => subs,
    };
    validate_references(&subs)?;
    Ok(subs)
}
