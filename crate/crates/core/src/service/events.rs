//! The per-session event log.
//!
//! Every operation appends one input event carrying its arguments, followed
//! by any outcome events. Input events use the same vocabulary as scripts,
//! so a log can be replayed as a script: outcome-only events and outcome
//! fields are ignored on replay.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::domain::{AnchorKind, FactorSelection, Span, TaskContext};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub seq: u64,
    pub at: DateTime<Utc>,
    #[serde(flatten)]
    pub kind: EventKind,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventKind {
    SessionCreated {
        task: TaskContext,
    },
    /// Outcome of creation: the factors offered to the writer.
    FactorsCurated {
        factor_ids: Vec<String>,
        fallback: bool,
    },
    AnchorApplied {
        anchor_id: String,
        #[serde(default)]
        kept: usize,
        #[serde(default)]
        transformed: usize,
    },
    FactorsSubmitted {
        selections: Vec<FactorSelection>,
        #[serde(default)]
        revised_from_anchor: usize,
    },
    GenerateRequested {},
    DraftGenerated {
        revision: u32,
    },
    DraftAnalyzed {
        units: usize,
        intents: usize,
        links: usize,
    },
    AnalysisFailed {
        error: String,
    },
    IntentPreviewed {
        intent_id: String,
        new_value: String,
    },
    IntentApplied {
        intent_id: String,
        new_value: String,
        #[serde(default)]
        noop: bool,
    },
    IntentDiscarded {},
    QuickfixSurfaced {
        span: Span,
        #[serde(default)]
        record_ids: Vec<String>,
    },
    QuickfixApplied {
        record_id: String,
        span: Span,
        #[serde(default = "yes")]
        accepted: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        revision: Option<u32>,
    },
    QuickfixUndone {
        #[serde(default)]
        record_id: String,
        #[serde(default)]
        revision: u32,
    },
    ManualEdit {
        span: Span,
        new_text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rationale: Option<String>,
        #[serde(default)]
        edit_id: String,
        #[serde(default)]
        revision: u32,
    },
    RationaleProvided {
        edit_id: String,
        #[serde(default)]
        rationale: Option<String>,
    },
    StylebookRecorded {
        edit_id: String,
        record_id: String,
    },
    AnchorSaved {
        kind: AnchorKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name_override: Option<String>,
        #[serde(default)]
        anchor_id: String,
        #[serde(default)]
        name: String,
    },
    Finalized {},
}

impl EventKind {
    /// Events that only record what happened; replay skips them.
    pub fn is_outcome(&self) -> bool {
        matches!(
            self,
            EventKind::FactorsCurated { .. }
                | EventKind::DraftGenerated { .. }
                | EventKind::DraftAnalyzed { .. }
                | EventKind::AnalysisFailed { .. }
                | EventKind::StylebookRecorded { .. }
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            EventKind::SessionCreated { .. } => "session_created",
            EventKind::FactorsCurated { .. } => "factors_curated",
            EventKind::AnchorApplied { .. } => "anchor_applied",
            EventKind::FactorsSubmitted { .. } => "factors_submitted",
            EventKind::GenerateRequested {} => "generate_requested",
            EventKind::DraftGenerated { .. } => "draft_generated",
            EventKind::DraftAnalyzed { .. } => "draft_analyzed",
            EventKind::AnalysisFailed { .. } => "analysis_failed",
            EventKind::IntentPreviewed { .. } => "intent_previewed",
            EventKind::IntentApplied { .. } => "intent_applied",
            EventKind::IntentDiscarded {} => "intent_discarded",
            EventKind::QuickfixSurfaced { .. } => "quickfix_surfaced",
            EventKind::QuickfixApplied { .. } => "quickfix_applied",
            EventKind::QuickfixUndone { .. } => "quickfix_undone",
            EventKind::ManualEdit { .. } => "manual_edit",
            EventKind::RationaleProvided { .. } => "rationale_provided",
            EventKind::StylebookRecorded { .. } => "stylebook_recorded",
            EventKind::AnchorSaved { .. } => "anchor_saved",
            EventKind::Finalized {} => "finalized",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn script_form_parses_without_outcome_fields() {
        let step: EventKind = serde_json::from_str(r#"{"event": "quickfix_applied", "record_id": "rec-1", "span": {"start": 0, "end": 4}}"#).unwrap();
        assert_eq!(
            step,
            EventKind::QuickfixApplied {
                record_id: "rec-1".into(),
                span: Span::new(0, 4),
                accepted: true,
                revision: None
            }
        );
        let step: EventKind = serde_json::from_str(r#"{"event": "generate_requested"}"#).unwrap();
        assert_eq!(step.name(), "generate_requested");
    }

    #[test]
    fn logged_event_is_flat() {
        let e = SessionEvent {
            seq: 3,
            at: chrono::DateTime::parse_from_rfc3339("2025-01-01T00:00:00Z").unwrap().into(),
            kind: EventKind::Finalized {},
        };
        let v = serde_json::to_value(&e).unwrap();
        assert_eq!(v["event"], "finalized");
        assert_eq!(v["seq"], 3);
        let back: SessionEvent = serde_json::from_value(v).unwrap();
        assert_eq!(back, e);
    }
}
