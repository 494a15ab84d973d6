//! Deterministic scripted provider for offline pipeline runs.
//!
//! Fixtures map a `(role, key)` pair to a canned response. A prompt matches a
//! fixture when the fixture key occurs as a substring of the rendered prompt;
//! among matches the longest key wins, then the lexicographically smallest.
//! Keys are therefore usually the question or sub-question text the prompt is
//! known to contain.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ProviderError, PromptSpec, RoleTag, TextGenerator};

/// What happens when no fixture matches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptedMode {
    /// Unknown prompts are an error. Use in tests.
    #[default]
    Strict,
    /// Unknown prompts echo back, tagged with the role name. Use for
    /// exploratory runs without a hosted model.
    FallbackEcho,
}

/// One scripted response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub role: RoleTag,
    pub key: String,
    pub response: String,
}

impl Fixture {
    pub fn new(role: RoleTag, key: impl Into<String>, response: impl Into<String>) -> Self {
        Self {
            role,
            key: key.into(),
            response: response.into(),
        }
    }
}

/// On-disk form: a JSON map from role name to `{key: response}`.
#[derive(Debug, Default, Serialize, Deserialize)]
struct ScriptedFile {
    #[serde(default)]
    mode: ScriptedMode,
    #[serde(default)]
    fixtures: BTreeMap<RoleTag, BTreeMap<String, String>>,
}

/// Deterministic generation backend driven by a fixture table. Calls never
/// mutate the table; byte-identical outputs for repeated prompts.
#[derive(Debug, Clone)]
pub struct ScriptedProvider {
    fixtures: BTreeMap<RoleTag, BTreeMap<String, String>>,
    mode: ScriptedMode,
}

impl ScriptedProvider {
    pub fn new(
        fixtures: impl IntoIterator<Item = Fixture>,
        mode: ScriptedMode,
    ) -> Result<Self, ProviderError> {
        let mut table: BTreeMap<RoleTag, BTreeMap<String, String>> = BTreeMap::new();
        for fixture in fixtures {
            let per_role = table.entry(fixture.role).or_default();
            if per_role.insert(fixture.key.clone(), fixture.response).is_some() {
                return Err(ProviderError::DuplicateFixtureKey {
                    role: fixture.role,
                    key: fixture.key,
                });
            }
        }
        Ok(Self { fixtures: table, mode })
    }

    pub fn empty(mode: ScriptedMode) -> Self {
        Self {
            fixtures: BTreeMap::new(),
            mode,
        }
    }

    pub fn from_json_str(json: &str) -> Result<Self, ProviderError> {
        let file: ScriptedFile =
            serde_json::from_str(json).map_err(|e| ProviderError::MalformedResponse {
                role: RoleTag::Decompose,
                detail: format!("fixture file parse error: {e}"),
            })?;
        Ok(Self {
            fixtures: file.fixtures,
            mode: file.mode,
        })
    }

    pub fn from_json_file(path: &Path) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path).map_err(|e| ProviderError::Transport {
            detail: format!("cannot read fixture file {}: {e}", path.display()),
            attempts: 1,
        })?;
        Self::from_json_str(&text)
    }

    fn lookup(&self, role: RoleTag, prompt: &str) -> Option<&str> {
        let per_role = self.fixtures.get(&role)?;
        let mut best: Option<&str> = None;
        let mut best_len = 0usize;
        for (key, response) in per_role {
            if key.len() > best_len && prompt.contains(key.as_str()) {
                best = Some(response.as_str());
                best_len = key.len();
            }
        }
        best
    }
}

impl TextGenerator for ScriptedProvider {
    fn complete(&self, spec: &PromptSpec) -> Result<String, ProviderError> {
        if let Some(response) = self.lookup(spec.role_tag, &spec.rendered_text) {
            return Ok(response.to_string());
        }
        match self.mode {
            ScriptedMode::Strict => Err(ProviderError::UnknownFixture {
                role: spec.role_tag,
                prompt_excerpt: excerpt(&spec.rendered_text),
            }),
            ScriptedMode::FallbackEcho => Ok(format!(
                "{} echo: {}",
                spec.role_tag.name(),
                spec.rendered_text
            )),
        }
    }
}

fn excerpt(text: &str) -> String {
    const LIMIT: usize = 120;
    if text.chars().count() <= LIMIT {
        text.to_string()
    } else {
        let cut: String = text.chars().take(LIMIT).collect();
        format!("{cut}…")
    }
}
