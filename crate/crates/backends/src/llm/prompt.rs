//! Prompt templates and few-shot cases, both loaded from data files.

use opnote_core::{validate_record, OperationRecord};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::bundled_or_file;
use crate::error::{BackendError, Result};

const BUNDLED_TEMPLATES: &[(&str, &str)] =
    &[("en", include_str!("../../resources/prompts/en.toml")), ("ko", include_str!("../../resources/prompts/ko.toml"))];

const BUNDLED_SHOTS: &[(&str, &str)] =
    &[("en", include_str!("../../resources/shots/en.json")), ("ko", include_str!("../../resources/shots/ko.json"))];

/// The value the instruction tells the model to use for absent classes.
pub const NOT_MENTIONED: &str = "not mentioned";

/// Text pieces of a prompt. Placeholders are `{number}`, `{document}`,
/// `{output}` and `{problems}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptTemplate {
    pub instruction: String,
    pub case: String,
    pub target: String,
    pub repair: String,
    pub normalize_instruction: String,
    pub normalize_target: String,
}

impl PromptTemplate {
    pub fn load(name_or_path: &str) -> Result<Self> {
        let text = bundled_or_file(name_or_path, BUNDLED_TEMPLATES)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let t: PromptTemplate =
            toml::from_str(text).map_err(|e| BackendError::Config(format!("prompt template: {e}")))?;
        if !t.instruction.contains(NOT_MENTIONED) {
            return Err(BackendError::Config(format!("prompt instruction must mention {NOT_MENTIONED:?}")));
        }
        for (name, piece, needed) in [
            ("case", &t.case, &["{document}", "{output}"][..]),
            ("target", &t.target, &["{document}"][..]),
            ("repair", &t.repair, &["{problems}"][..]),
            ("normalize_target", &t.normalize_target, &["{document}"][..]),
        ] {
            if let Some(p) = needed.iter().find(|p| !piece.contains(*p)) {
                return Err(BackendError::Config(format!("prompt piece {name} lacks {p}")));
            }
        }
        Ok(t)
    }

    /// Instruction, the numbered cases, then the target document.
    pub fn structure_prompt(&self, shots: &[FewShotCase], document: &str) -> String {
        let mut parts = vec![self.instruction.trim().to_string()];
        for (i, shot) in shots.iter().enumerate() {
            parts.push(
                self.case
                    .replace("{number}", &(i + 1).to_string())
                    .replace("{output}", &shot.output_json())
                    .replace("{document}", shot.transcript.trim()),
            );
        }
        parts.push(self.target.replace("{document}", document.trim()));
        parts.join("\n\n")
    }

    pub fn repair_prompt(&self, problems: &[String]) -> String {
        let list: Vec<String> = problems.iter().map(|p| format!("- {p}")).collect();
        self.repair.replace("{problems}", &list.join("\n"))
    }

    pub fn normalize_prompt(&self, document: &str) -> String {
        format!(
            "{}\n\n{}",
            self.normalize_instruction.trim(),
            self.normalize_target.replace("{document}", document.trim())
        )
    }
}

/// One worked example: a narrative and its expected record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FewShotCase {
    pub transcript: String,
    pub record: Value,
}

impl FewShotCase {
    pub fn load(name_or_path: &str) -> Result<Vec<FewShotCase>> {
        let text = bundled_or_file(name_or_path, BUNDLED_SHOTS)?;
        serde_json::from_str(&text).map_err(|e| BackendError::Config(format!("few-shot cases: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.transcript.trim().is_empty() {
            return Err(BackendError::Config("transcript is empty".into()));
        }
        let record = OperationRecord::from_json_value(&self.record)?;
        if let Some(v) = validate_record(&record).first() {
            return Err(BackendError::Config(format!("record is invalid: {v}")));
        }
        Ok(())
    }

    /// All 22 classes in canonical order, without notes.
    pub fn output_json(&self) -> String {
        let mut record = OperationRecord::from_json_value(&self.record).unwrap_or_default();
        record.notes.clear();
        let json = record.to_json();
        json.strip_suffix(",\"Notes\":[]}").map(|s| format!("{s}}}")).unwrap_or(json)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_templates_parse() {
        for (name, _) in BUNDLED_TEMPLATES {
            PromptTemplate::load(name).unwrap();
        }
    }

    #[test]
    fn bundled_shots_are_five_valid_cases() {
        for (name, _) in BUNDLED_SHOTS {
            let shots = FewShotCase::load(name).unwrap();
            assert_eq!(shots.len(), 5, "{name}");
            for s in &shots {
                s.validate().unwrap();
            }
        }
    }

    #[test]
    fn instruction_without_rule_rejected() {
        let t = include_str!("../../resources/prompts/en.toml").replace("'not mentioned'", "'n/a'");
        assert!(PromptTemplate::parse(&t).is_err());
    }

    #[test]
    fn prompt_layout() {
        let t = PromptTemplate::load("en").unwrap();
        let shots = FewShotCase::load("en").unwrap();
        let p = t.structure_prompt(&shots, "A drain was inserted.");
        assert!(p.starts_with(t.instruction.trim()));
        for i in 1..=5 {
            assert!(p.contains(&format!("Case {i}\n")), "case {i}");
        }
        assert!(p.trim_end().ends_with("A drain was inserted.\n\"\"\"\"\nStructured Output:"));
        assert_eq!(p.matches("\"Drainage tube insertion, or not\"").count(), 5);
    }
}
