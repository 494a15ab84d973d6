//! Prompt templates, shipped as text resources and overridable per role via
//! config paths. Placeholders are literal `{name}` tokens.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Optional per-role template file overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TemplatePaths {
    pub decompose: Option<PathBuf>,
    pub estimate_depth: Option<PathBuf>,
    pub answer_step: Option<PathBuf>,
    pub draft: Option<PathBuf>,
    pub validate_draft: Option<PathBuf>,
    pub fallback: Option<PathBuf>,
    pub judge_equivalence: Option<PathBuf>,
}

/// The full template set used by one engine instance.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSet {
    pub decompose: String,
    pub estimate_depth: String,
    pub answer_step: String,
    pub draft: String,
    pub validate_draft: String,
    pub fallback: String,
    pub judge_equivalence: String,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl TemplateSet {
    /// Templates compiled into the binary.
    pub fn builtin() -> Self {
        Self {
            decompose: include_str!("../templates/decompose.txt").to_string(),
            estimate_depth: include_str!("../templates/estimate_depth.txt").to_string(),
            answer_step: include_str!("../templates/answer_step.txt").to_string(),
            draft: include_str!("../templates/draft.txt").to_string(),
            validate_draft: include_str!("../templates/validate_draft.txt").to_string(),
            fallback: include_str!("../templates/fallback.txt").to_string(),
            judge_equivalence: include_str!("../templates/judge_equivalence.txt").to_string(),
        }
    }

    /// Builtin templates with any configured file overrides applied.
    pub fn with_overrides(paths: &TemplatePaths) -> Result<Self, std::io::Error> {
        let mut set = Self::builtin();
        let slots: [(&Option<PathBuf>, &mut String); 7] = [
            (&paths.decompose, &mut set.decompose),
            (&paths.estimate_depth, &mut set.estimate_depth),
            (&paths.answer_step, &mut set.answer_step),
            (&paths.draft, &mut set.draft),
            (&paths.validate_draft, &mut set.validate_draft),
            (&paths.fallback, &mut set.fallback),
            (&paths.judge_equivalence, &mut set.judge_equivalence),
        ];
        for (path, slot) in slots {
            if let Some(p) = path {
                *slot = std::fs::read_to_string(Path::new(p))?;
            }
        }
        Ok(set)
    }

    pub fn render_decompose(&self, question: &str) -> String {
        self.decompose.replace("{question}", question)
    }

    pub fn render_estimate_depth(&self, question: &str) -> String {
        self.estimate_depth.replace("{question}", question)
    }

    pub fn render_answer_step(
        &self,
        sub_question: &str,
        dependencies: &str,
        passages: &str,
    ) -> String {
        self.answer_step
            .replace("{sub_question}", sub_question)
            .replace("{dependencies}", dependencies)
            .replace("{passages}", passages)
    }

    pub fn render_draft(&self, question: &str, chain: &str) -> String {
        self.draft
            .replace("{question}", question)
            .replace("{chain}", chain)
    }

    pub fn render_validate_draft(&self, question: &str, chain: &str, draft: &str) -> String {
        self.validate_draft
            .replace("{question}", question)
            .replace("{chain}", chain)
            .replace("{draft}", draft)
    }

    pub fn render_fallback(
        &self,
        question: &str,
        sub_questions: &str,
        answered_prefix: &str,
        passages: &str,
    ) -> String {
        self.fallback
            .replace("{question}", question)
            .replace("{sub_questions}", sub_questions)
            .replace("{answered_prefix}", answered_prefix)
            .replace("{passages}", passages)
    }

    pub fn render_judge_equivalence(
        &self,
        question: &str,
        gold: &str,
        prediction: &str,
    ) -> String {
        self.judge_equivalence
            .replace("{question}", question)
            .replace("{gold}", gold)
            .replace("{prediction}", prediction)
    }

    /// SHA-256 of each template, keyed by role name. Embedded in run echoes
    /// so any output can be traced back to the exact prompt wording.
    pub fn hashes(&self) -> BTreeMap<String, String> {
        let digest = |text: &str| {
            let mut hasher = Sha256::new();
            hasher.update(text.as_bytes());
            hex_string(&hasher.finalize())
        };
        BTreeMap::from([
            ("decompose".to_string(), digest(&self.decompose)),
            ("estimate_depth".to_string(), digest(&self.estimate_depth)),
            ("answer_step".to_string(), digest(&self.answer_step)),
            ("draft".to_string(), digest(&self.draft)),
            ("validate_draft".to_string(), digest(&self.validate_draft)),
            ("fallback".to_string(), digest(&self.fallback)),
            (
                "judge_equivalence".to_string(),
                digest(&self.judge_equivalence),
            ),
        ])
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_templates_have_placeholders() {
        let set = TemplateSet::builtin();
        assert!(set.decompose.contains("{question}"));
        assert!(set.answer_step.contains("{sub_question}"));
        assert!(set.answer_step.contains("{passages}"));
        assert!(set.fallback.contains("{answered_prefix}"));
        assert!(set.judge_equivalence.contains("{prediction}"));
    }

    #[test]
    fn rendering_substitutes_all_slots() {
        let set = TemplateSet::builtin();
        let prompt = set.render_answer_step("What is X?", "A1: foo", "[1] bar");
        assert!(prompt.contains("What is X?"));
        assert!(prompt.contains("A1: foo"));
        assert!(prompt.contains("[1] bar"));
        assert!(!prompt.contains("{sub_question}"));
    }

    #[test]
    fn overrides_replace_only_named_roles() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("custom.txt");
        std::fs::write(&path, "custom {question}").unwrap();
        let paths = TemplatePaths {
            decompose: Some(path),
            ..TemplatePaths::default()
        };
        let set = TemplateSet::with_overrides(&paths).unwrap();
        assert_eq!(set.decompose, "custom {question}");
        assert_eq!(set.draft, TemplateSet::builtin().draft);
    }

    #[test]
    fn hashes_cover_every_role_and_track_content() {
        let set = TemplateSet::builtin();
        let hashes = set.hashes();
        assert_eq!(hashes.len(), 7);
        let mut changed = set.clone();
        changed.draft.push('!');
        assert_ne!(hashes["draft"], changed.hashes()["draft"]);
        assert_eq!(hashes["decompose"], changed.hashes()["decompose"]);
    }
}
