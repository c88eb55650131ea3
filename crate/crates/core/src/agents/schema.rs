//! JSON shapes each agent must answer with.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use super::gateway::{SchemaId, StructuredOutput};

fn blank(s: &str) -> bool {
    s.trim().is_empty()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CuratedFactor {
    pub factor_id: String,
    pub suggested_options: Vec<String>,
    #[serde(default)]
    pub rationale: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CuratedFactors {
    pub factors: Vec<CuratedFactor>,
}

impl StructuredOutput for CuratedFactors {
    const SCHEMA: SchemaId = SchemaId::CuratedFactors;
    fn check(&self) -> Result<(), String> {
        if self.factors.is_empty() {
            return Err("`factors` must list at least one factor".into());
        }
        for f in &self.factors {
            if f.suggested_options.iter().all(|o| blank(o)) {
                return Err(format!("factor `{}` has no suggested options", f.factor_id));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedDraft {
    pub body: String,
}

impl StructuredOutput for GeneratedDraft {
    const SCHEMA: SchemaId = SchemaId::GeneratedDraft;
    fn check(&self) -> Result<(), String> {
        if blank(&self.body) {
            return Err("`body` is empty".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawIntent {
    pub intent_type: String,
    pub current_value: String,
    pub alternative_values: Vec<String>,
}

impl RawIntent {
    /// Trimmed alternatives without blanks, repeats, or the current value.
    pub fn clean_alternatives(&self) -> Vec<String> {
        let current = self.current_value.trim();
        let mut out: Vec<String> = Vec::new();
        for alt in &self.alternative_values {
            let alt = alt.trim();
            if !alt.is_empty() && alt != current && !out.iter().any(|a| a == alt) {
                out.push(alt.to_owned());
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalyzedIntents {
    pub intents: Vec<RawIntent>,
}

impl StructuredOutput for AnalyzedIntents {
    const SCHEMA: SchemaId = SchemaId::AnalyzedIntents;
    fn check(&self) -> Result<(), String> {
        if self.intents.is_empty() {
            return Err("`intents` must contain at least one intent".into());
        }
        for i in &self.intents {
            if blank(&i.intent_type) || blank(&i.current_value) {
                return Err("every intent needs a non-empty `intent_type` and `current_value`".into());
            }
            if i.clean_alternatives().is_empty() {
                return Err(format!(
                    "intent `{}` needs at least one alternative different from its current value",
                    i.intent_type
                ));
            }
        }
        Ok(())
    }
}

/// A unit as returned by the extractor: either explicit character offsets
/// or the verbatim text of the segment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawUnit {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedUnits {
    pub units: Vec<RawUnit>,
}

impl StructuredOutput for ExtractedUnits {
    const SCHEMA: SchemaId = SchemaId::ExtractedUnits;
    fn check(&self) -> Result<(), String> {
        for u in &self.units {
            if blank(&u.label) {
                return Err("every unit needs a `label`".into());
            }
            let has_offsets = u.start.is_some() && u.end.is_some();
            let has_text = u.text.as_deref().is_some_and(|t| !t.is_empty());
            if !has_offsets && !has_text {
                return Err(format!("unit `{}` needs `start`/`end` or `text`", u.label));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawLink {
    pub unit_id: String,
    pub intent_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposedLinks {
    pub links: Vec<RawLink>,
}

impl StructuredOutput for ProposedLinks {
    const SCHEMA: SchemaId = SchemaId::ProposedLinks;
    fn check(&self) -> Result<(), String> {
        if self.links.iter().any(|l| blank(&l.unit_id) || blank(&l.intent_id)) {
            return Err("every link needs `unit_id` and `intent_id`".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawReplacement {
    pub unit_id: String,
    pub new_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposedRewrite {
    pub replacements: Vec<RawReplacement>,
    #[serde(default)]
    pub rationale_summary: String,
}

impl StructuredOutput for ProposedRewrite {
    const SCHEMA: SchemaId = SchemaId::ProposedRewrite;
    fn check(&self) -> Result<(), String> {
        if self.replacements.is_empty() {
            return Err("`replacements` must change at least one unit".into());
        }
        let mut seen = BTreeSet::new();
        for r in &self.replacements {
            if blank(&r.new_text) {
                return Err(format!("replacement for `{}` is empty", r.unit_id));
            }
            if !seen.insert(r.unit_id.trim()) {
                return Err(format!("unit `{}` is replaced twice", r.unit_id));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RawAdaptStatus {
    Kept,
    Transformed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawAdaptedFactor {
    pub factor_id: String,
    pub status: RawAdaptStatus,
    #[serde(default)]
    pub selected_option: Option<String>,
    #[serde(default)]
    pub elaboration: Option<String>,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdaptedFactors {
    pub entries: Vec<RawAdaptedFactor>,
}

impl StructuredOutput for AdaptedFactors {
    const SCHEMA: SchemaId = SchemaId::AdaptedFactors;
    fn check(&self) -> Result<(), String> {
        if self.entries.iter().any(|e| blank(&e.factor_id)) {
            return Err("every entry needs a `factor_id`".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorNameOutput {
    pub name: String,
}

impl StructuredOutput for AnchorNameOutput {
    const SCHEMA: SchemaId = SchemaId::AnchorName;
    fn check(&self) -> Result<(), String> {
        if blank(&self.name) {
            return Err("`name` is empty".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditAnalysis {
    pub modification_name: String,
    pub rationale: String,
    pub receiver_description: String,
    pub occasion_description: String,
}

impl StructuredOutput for EditAnalysis {
    const SCHEMA: SchemaId = SchemaId::EditAnalysis;
    fn check(&self) -> Result<(), String> {
        for (name, value) in [
            ("modification_name", &self.modification_name),
            ("rationale", &self.rationale),
            ("receiver_description", &self.receiver_description),
            ("occasion_description", &self.occasion_description),
        ] {
            if blank(value) {
                return Err(format!("`{name}` is empty"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuickFixProposal {
    pub proposed_text: String,
    #[serde(default)]
    pub rationale_summary: String,
}

impl StructuredOutput for QuickFixProposal {
    const SCHEMA: SchemaId = SchemaId::QuickFixProposal;
    fn check(&self) -> Result<(), String> {
        if blank(&self.proposed_text) {
            return Err("`proposed_text` is empty".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RerankOutput {
    pub record_ids: Vec<String>,
}

impl StructuredOutput for RerankOutput {
    const SCHEMA: SchemaId = SchemaId::Rerank;
    fn check(&self) -> Result<(), String> {
        Ok(())
    }
}
