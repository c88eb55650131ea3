//! Running scripted sessions. A script is `{"steps": [...]}` where each step
//! is an input event in the event-log vocabulary.

use serde::{Deserialize, Serialize};
use std::path::Path;

use super::compose::ComposeService;
use super::events::{EventKind, SessionEvent};
use super::summary::SessionSummary;
use crate::domain::{AnchorId, EditId, IntentId, RecordId, SessionId};
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Script {
    pub steps: Vec<EventKind>,
}

impl Script {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::validation(format!("invalid script: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::validation(format!("reading script {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// The input events of one or more logs, in order.
    pub fn from_events<'a>(logs: impl IntoIterator<Item = &'a [SessionEvent]>) -> Self {
        Script {
            steps: logs
                .into_iter()
                .flatten()
                .filter(|e| !e.kind.is_outcome())
                .map(|e| e.kind.clone())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRun {
    pub session_id: SessionId,
    /// Text of the last revision, if a draft was generated.
    pub body: Option<String>,
    pub summary: SessionSummary,
    pub events: Vec<SessionEvent>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub sessions: Vec<SessionRun>,
}

#[derive(Debug, thiserror::Error)]
#[error("step {step} ({event}) failed: {error}")]
pub struct StepFailure {
    /// Zero-based index into the script.
    pub step: usize,
    pub event: &'static str,
    #[source]
    pub error: Error,
}

fn run_step(service: &ComposeService, current: &mut Option<SessionId>, step: &EventKind) -> Result<()> {
    if let EventKind::SessionCreated { task } = step {
        *current = Some(service.create_session(task.clone())?.session_id);
        return Ok(());
    }
    if step.is_outcome() {
        return Ok(());
    }
    let id = current
        .as_ref()
        .ok_or_else(|| Error::validation("the script must start with session_created"))?;
    match step {
        EventKind::AnchorApplied { anchor_id, .. } => {
            service.apply_anchor(id, &AnchorId::new(anchor_id.as_str()))?;
        }
        EventKind::FactorsSubmitted { selections, .. } => {
            service.submit_factors(id, selections.clone())?;
        }
        EventKind::GenerateRequested {} => {
            service.generate(id)?;
        }
        EventKind::IntentPreviewed { intent_id, new_value } => {
            service.preview_intent(id, &IntentId::new(intent_id.as_str()), new_value)?;
        }
        EventKind::IntentApplied { intent_id, new_value, .. } => {
            service.apply_intent(id, &IntentId::new(intent_id.as_str()), new_value)?;
        }
        EventKind::IntentDiscarded {} => service.discard_preview(id)?,
        EventKind::QuickfixSurfaced { span, .. } => {
            service.query_quickfix(id, *span)?;
        }
        EventKind::QuickfixApplied {
            record_id,
            span,
            accepted,
            ..
        } => {
            service.apply_quickfix(id, &RecordId::new(record_id.as_str()), *span, *accepted)?;
        }
        EventKind::QuickfixUndone { .. } => {
            service.undo_quickfix(id)?;
        }
        EventKind::ManualEdit {
            span,
            new_text,
            rationale,
            ..
        } => {
            service.manual_edit(id, *span, new_text, rationale.clone())?;
        }
        EventKind::RationaleProvided { edit_id, rationale } => {
            service.provide_rationale(id, &EditId::new(edit_id.as_str()), rationale.clone())?;
        }
        EventKind::AnchorSaved { kind, name_override, .. } => {
            service.save_anchor(id, *kind, name_override.clone())?;
        }
        EventKind::Finalized {} => {
            service.finalize(id)?;
        }
        EventKind::SessionCreated { .. }
        | EventKind::FactorsCurated { .. }
        | EventKind::DraftGenerated { .. }
        | EventKind::DraftAnalyzed { .. }
        | EventKind::AnalysisFailed { .. }
        | EventKind::StylebookRecorded { .. } => {}
    }
    Ok(())
}

/// Execute every step in order, stopping at the first failure.
pub fn run_script(service: &ComposeService, script: &Script) -> std::result::Result<RunReport, StepFailure> {
    let mut current = None;
    let mut created = Vec::new();
    for (step, kind) in script.steps.iter().enumerate() {
        tracing::debug!(step, event = kind.name(), "running step");
        run_step(service, &mut current, kind).map_err(|error| StepFailure {
            step,
            event: kind.name(),
            error,
        })?;
        if let (EventKind::SessionCreated { .. }, Some(id)) = (kind, &current) {
            created.push(id.clone());
        }
    }
    let sessions = created
        .into_iter()
        .map(|id| {
            let view = service.get_session(&id).expect("created session exists");
            SessionRun {
                body: view.draft.map(|d| d.body),
                summary: service.summary(&id).expect("created session exists"),
                events: service.events(&id).expect("created session exists"),
                session_id: id,
            }
        })
        .collect();
    Ok(RunReport { sessions })
}
