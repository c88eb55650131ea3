//! Shared domain types and the pure validators every other module relies on.

mod span;
mod validate;

pub use span::*;
pub use validate::{validate_link_graph, validate_unit_partition, Issue, ValidationReport};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Orders `rec-2` before `rec-10`: the prefix before a trailing run of digits
/// compares as text, the digits as a number, and the raw strings break ties.
pub fn natural_cmp(a: &str, b: &str) -> std::cmp::Ordering {
    fn split(s: &str) -> (&str, &str) {
        let cut = s.trim_end_matches(|c: char| c.is_ascii_digit()).len();
        s.split_at(cut)
    }
    let ((pa, na), (pb, nb)) = (split(a), split(b));
    let (ta, tb) = (na.trim_start_matches('0'), nb.trim_start_matches('0'));
    pa.cmp(pb)
        .then(ta.len().cmp(&tb.len()))
        .then(ta.cmp(tb))
        .then(a.cmp(b))
}

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl Ord for $name {
            fn cmp(&self, other: &Self) -> std::cmp::Ordering {
                natural_cmp(&self.0, &other.0)
            }
        }

        impl PartialOrd for $name {
            fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
                Some(self.cmp(other))
            }
        }

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

string_id!(FactorId);
string_id!(UnitId);
string_id!(IntentId);
string_id!(AnchorId);
string_id!(RecordId);
string_id!(DraftId);
string_id!(SessionId);
string_id!(EditId);

/// The user's plain statement of what the email must accomplish.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskContext {
    pub task_description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recipient_hint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_locale: Option<String>,
}

impl TaskContext {
    pub fn new(task_description: impl Into<String>) -> Self {
        TaskContext {
            task_description: task_description.into(),
            recipient_hint: None,
            session_locale: None,
        }
    }

    pub fn with_recipient(mut self, hint: impl Into<String>) -> Self {
        self.recipient_hint = Some(hint.into());
        self
    }

    pub fn validate(&self) -> crate::Result<()> {
        if self.task_description.trim().is_empty() {
            return Err(crate::Error::validation("task_description must not be blank"));
        }
        Ok(())
    }

    /// Whitespace-insensitive equality, used to detect re-application of an
    /// anchor to its own source task.
    pub fn same_task(&self, other: &TaskContext) -> bool {
        fn norm(s: &str) -> String {
            s.split_whitespace().collect::<Vec<_>>().join(" ")
        }
        fn norm_opt(s: &Option<String>) -> Option<String> {
            s.as_deref().map(norm).filter(|s| !s.is_empty())
        }
        norm(&self.task_description) == norm(&other.task_description)
            && norm_opt(&self.recipient_hint) == norm_opt(&other.recipient_hint)
            && norm_opt(&self.session_locale) == norm_opt(&other.session_locale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorCategory {
    Persona,
    Situation,
}

impl fmt::Display for FactorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FactorCategory::Persona => "Persona",
            FactorCategory::Situation => "Situation",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorDefinition {
    #[serde(rename = "id")]
    pub factor_id: FactorId,
    pub category: FactorCategory,
    pub name: String,
    pub description: String,
    #[serde(rename = "options")]
    pub source_options: Vec<String>,
}

/// A catalog factor offered for one task, with task-specific options.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorPrompt {
    pub factor_id: FactorId,
    pub suggested_options: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
}

/// A user's answer for one factor: a quick-select option, a free-text
/// elaboration, both, or an explicit skip.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FactorSelection {
    pub factor_id: FactorId,
    #[serde(default)]
    pub selected_option: Option<String>,
    #[serde(default)]
    pub elaboration: Option<String>,
    #[serde(default)]
    pub skipped: bool,
}

impl FactorSelection {
    pub fn option(factor_id: impl Into<FactorId>, option: impl Into<String>) -> Self {
        FactorSelection {
            factor_id: factor_id.into(),
            selected_option: Some(option.into()),
            elaboration: None,
            skipped: false,
        }
    }

    pub fn skip(factor_id: impl Into<FactorId>) -> Self {
        FactorSelection {
            factor_id: factor_id.into(),
            selected_option: None,
            elaboration: None,
            skipped: true,
        }
    }

    pub fn with_elaboration(mut self, text: impl Into<String>) -> Self {
        self.elaboration = Some(text.into());
        self
    }

    /// Checks the skipped/present invariant; returns a description of the
    /// violation.
    pub fn check(&self) -> Result<(), String> {
        let blank = |v: &Option<String>| v.as_deref().is_some_and(|s| s.trim().is_empty());
        if blank(&self.selected_option) || blank(&self.elaboration) {
            return Err("option and elaboration must not be blank when present".into());
        }
        let has_content = self.selected_option.is_some() || self.elaboration.is_some();
        match (self.skipped, has_content) {
            (true, true) => Err("a skipped factor cannot carry an option or elaboration".into()),
            (false, false) => Err("a factor that is not skipped needs an option or an elaboration".into()),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmailDraft {
    pub draft_id: DraftId,
    pub body: String,
    pub revision: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_revision: Option<u32>,
}

impl EmailDraft {
    pub fn initial(draft_id: DraftId, body: &str) -> Self {
        EmailDraft {
            draft_id,
            body: normalize_newlines(body),
            revision: 0,
            parent_revision: None,
        }
    }

    /// The next linear revision carrying `body`.
    pub fn next(&self, body: String) -> Self {
        EmailDraft {
            draft_id: self.draft_id.clone(),
            body,
            revision: self.revision + 1,
            parent_revision: Some(self.revision),
        }
    }

    pub fn len(&self) -> usize {
        char_len(&self.body)
    }

    pub fn is_empty(&self) -> bool {
        self.body.is_empty()
    }

    pub fn text(&self, span: Span) -> Option<&str> {
        slice(&self.body, span)
    }
}

/// Labels offered to the extractor. Matching is case-insensitive and ignores
/// `_`, `-` and spaces; other labels are accepted as given.
pub const RECOMMENDED_UNIT_LABELS: [&str; 5] = [
    "Opening_Salutation",
    "Statement_of_Purpose",
    "Justification",
    "Call_to_Action",
    "Closing_Pleasantry",
];

pub fn canonical_unit_label(label: &str) -> String {
    let key = |s: &str| {
        s.chars()
            .filter(|c| !matches!(c, '_' | '-' | ' '))
            .flat_map(char::to_lowercase)
            .collect::<String>()
    };
    let wanted = key(label);
    RECOMMENDED_UNIT_LABELS
        .iter()
        .find(|l| key(l) == wanted)
        .map(|l| (*l).to_owned())
        .unwrap_or_else(|| label.trim().to_owned())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommunicativeUnit {
    pub unit_id: UnitId,
    pub label: String,
    pub span: Span,
    pub order_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentOrigin {
    Derived,
    UserModified,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intent {
    pub intent_id: IntentId,
    pub intent_type: String,
    pub current_value: String,
    pub alternative_values: Vec<String>,
    pub origin: IntentOrigin,
}

impl Intent {
    /// `[type, value]` rendering shown on intent chips.
    pub fn fragment(&self) -> String {
        format!("[{}, {}]", self.intent_type, self.current_value)
    }

    /// Switch to `new_value`; the previous value becomes the first alternative.
    pub fn set_value(&mut self, new_value: &str) {
        if new_value == self.current_value {
            return;
        }
        let old = std::mem::replace(&mut self.current_value, new_value.to_owned());
        self.alternative_values.retain(|v| v != new_value && *v != old);
        self.alternative_values.insert(0, old);
        self.origin = IntentOrigin::UserModified;
    }

    pub fn check(&self) -> Result<(), String> {
        if self.intent_type.trim().is_empty() || self.current_value.trim().is_empty() {
            return Err(format!("intent {} has a blank type or value", self.intent_id));
        }
        if self.alternative_values.is_empty() {
            return Err(format!("intent {} has no alternatives", self.intent_id));
        }
        if self.alternative_values.contains(&self.current_value) {
            return Err(format!("intent {} lists its current value as an alternative", self.intent_id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UnitIntentLink {
    pub unit_id: UnitId,
    pub intent_id: IntentId,
}

impl UnitIntentLink {
    pub fn new(unit_id: impl Into<UnitId>, intent_id: impl Into<IntentId>) -> Self {
        UnitIntentLink {
            unit_id: unit_id.into(),
            intent_id: intent_id.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorKind {
    Persona,
    Situation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anchor {
    pub anchor_id: AnchorId,
    pub kind: AnchorKind,
    pub name: String,
    pub factor_configuration: Vec<FactorSelection>,
    pub source_task: TaskContext,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RationaleOrigin {
    UserProvided,
    AgentInferred,
}

/// One learned edit pattern.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StylebookRecord {
    pub record_id: RecordId,
    pub modification_name: String,
    pub original_text: String,
    pub revised_text: String,
    pub rationale: String,
    pub rationale_origin: RationaleOrigin,
    pub receiver_description: String,
    pub occasion_description: String,
    pub created_at: DateTime<Utc>,
    #[serde(default)]
    pub usage_count: u32,
    #[serde(default)]
    pub acceptance_count: u32,
}

impl StylebookRecord {
    pub fn check(&self) -> Result<(), String> {
        let fields = [
            ("modification_name", &self.modification_name),
            ("original_text", &self.original_text),
            ("revised_text", &self.revised_text),
            ("rationale", &self.rationale),
            ("receiver_description", &self.receiver_description),
            ("occasion_description", &self.occasion_description),
        ];
        for (name, value) in fields {
            if value.trim().is_empty() {
                return Err(format!("record {}: {name} is blank", self.record_id));
            }
        }
        if self.original_text == self.revised_text {
            return Err(format!("record {}: original and revised text are equal", self.record_id));
        }
        if self.acceptance_count > self.usage_count {
            return Err(format!("record {}: acceptance_count exceeds usage_count", self.record_id));
        }
        Ok(())
    }
}

/// A manual edit as captured by the editor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditEvent {
    pub draft_id: DraftId,
    pub revision_before: u32,
    pub span: Span,
    pub original_text: String,
    pub revised_text: String,
    #[serde(default)]
    pub user_rationale: Option<String>,
    pub timestamp: DateTime<Utc>,
}

impl EditEvent {
    /// Checks the event against the body of `revision_before`.
    pub fn check_against(&self, prior_body: &str) -> Result<(), String> {
        match slice(prior_body, self.span) {
            Some(text) if text == self.original_text => Ok(()),
            Some(_) => Err("original_text does not match the prior revision".into()),
            None => Err(format!("span {} is outside the prior revision", self.span)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuickFixSuggestion {
    pub record_id: RecordId,
    pub modification_name: String,
    pub target_span: Span,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposed_text: Option<String>,
    pub similarity_score: f64,
}

/// Collapse runs of whitespace; two texts equal under this form differ only
/// in spacing.
pub fn whitespace_normalized(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}
