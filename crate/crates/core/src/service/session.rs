use serde::{Deserialize, Serialize};
use std::fmt;

use super::events::SessionEvent;
use crate::agents::{AdaptedFactorSet, RewriteResult};
use crate::catalog::Catalog;
use crate::domain::{
    slice, validate_link_graph, validate_unit_partition, CommunicativeUnit, EditEvent, EditId, EmailDraft,
    FactorPrompt, FactorSelection, Intent, RecordId, SessionId, Span, TaskContext, UnitIntentLink,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Created,
    FactorsCurated,
    FactorsSubmitted,
    Drafted,
    Analyzed,
    Finalized,
}

impl fmt::Display for SessionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SessionState::Created => "created",
            SessionState::FactorsCurated => "factors_curated",
            SessionState::FactorsSubmitted => "factors_submitted",
            SessionState::Drafted => "drafted",
            SessionState::Analyzed => "analyzed",
            SessionState::Finalized => "finalized",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditStatus {
    /// Waiting for the writer's rationale (or finalization).
    Pending,
    Recorded,
    /// Whitespace-only edits teach nothing.
    Ignored,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackedEdit {
    pub edit_id: EditId,
    pub event: EditEvent,
    pub status: EditStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_id: Option<RecordId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppliedQuickFix {
    pub record_id: RecordId,
    pub span: Span,
    pub revision_before: u32,
    pub revision_after: u32,
    pub undone: bool,
    #[serde(skip)]
    pub(crate) prior_units: Vec<CommunicativeUnit>,
    #[serde(skip)]
    pub(crate) prior_links: Option<Vec<UnitIntentLink>>,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub session_id: SessionId,
    pub task: TaskContext,
    pub state: SessionState,
    pub prompts: Vec<FactorPrompt>,
    pub applied_anchors: Vec<AdaptedFactorSet>,
    pub selections: Vec<FactorSelection>,
    /// Every revision, oldest first; the last one is current.
    pub revisions: Vec<EmailDraft>,
    pub units: Vec<CommunicativeUnit>,
    pub intents: Vec<Intent>,
    pub links: Vec<UnitIntentLink>,
    pub pending_preview: Option<RewriteResult>,
    pub edits: Vec<TrackedEdit>,
    pub quickfixes: Vec<AppliedQuickFix>,
    pub warnings: Vec<String>,
    pub events: Vec<SessionEvent>,
}

impl Session {
    pub(crate) fn new(session_id: SessionId, task: TaskContext) -> Self {
        Session {
            session_id,
            task,
            state: SessionState::Created,
            prompts: Vec::new(),
            applied_anchors: Vec::new(),
            selections: Vec::new(),
            revisions: Vec::new(),
            units: Vec::new(),
            intents: Vec::new(),
            links: Vec::new(),
            pending_preview: None,
            edits: Vec::new(),
            quickfixes: Vec::new(),
            warnings: Vec::new(),
            events: Vec::new(),
        }
    }

    pub fn draft(&self) -> Option<&EmailDraft> {
        self.revisions.last()
    }

    pub fn body(&self) -> &str {
        self.draft().map_or("", |d| d.body.as_str())
    }

    /// Structural invariants that must hold between operations.
    pub fn check_invariants(&self, catalog: &Catalog) -> Result<(), String> {
        for (i, d) in self.revisions.iter().enumerate() {
            if d.revision as usize != i {
                return Err(format!("revision {} stored at position {i}", d.revision));
            }
            if i > 0 && d.parent_revision != Some(d.revision - 1) {
                return Err(format!("revision {} has parent {:?}", d.revision, d.parent_revision));
            }
        }
        if self.state >= SessionState::FactorsSubmitted {
            let report = catalog.validate_selections(&self.selections);
            if !report.is_empty() {
                return Err(format!("invalid selections: {report:?}"));
            }
        }
        if self.state >= SessionState::Drafted && self.revisions.is_empty() {
            return Err("drafted session without a draft".into());
        }
        if self.state < SessionState::Drafted && !self.revisions.is_empty() {
            return Err("draft present before generation".into());
        }
        if self.state >= SessionState::Analyzed {
            let n = crate::domain::char_len(self.body());
            let report = validate_unit_partition(&self.units, n);
            if !report.is_empty() {
                return Err(format!("units do not partition the body: {report:?}"));
            }
            let report = validate_link_graph(&self.units, &self.intents, &self.links);
            if !report.is_empty() {
                return Err(format!("link graph invalid: {report:?}"));
            }
            for i in &self.intents {
                i.check()?;
            }
        }
        if self.state == SessionState::Finalized && self.edits.iter().any(|e| e.status == EditStatus::Pending) {
            return Err("finalized with pending edits".into());
        }
        for q in &self.quickfixes {
            if q.revision_after as usize >= self.revisions.len() {
                return Err(format!("quick fix refers to missing revision {}", q.revision_after));
            }
        }
        Ok(())
    }

    pub fn view(&self) -> SessionView {
        let body = self.body();
        SessionView {
            session_id: self.session_id.clone(),
            state: self.state,
            task: self.task.clone(),
            prompts: self.prompts.clone(),
            applied_anchors: self.applied_anchors.clone(),
            selections: self.selections.clone(),
            draft: self.draft().cloned(),
            units: self
                .units
                .iter()
                .map(|u| UnitView {
                    text: slice(body, u.span).unwrap_or("").to_owned(),
                    unit: u.clone(),
                })
                .collect(),
            intents: self.intents.clone(),
            links: self.links.clone(),
            pending_preview: self.pending_preview.clone(),
            edits: self.edits.clone(),
            quickfixes: self.quickfixes.clone(),
            warnings: self.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitView {
    #[serde(flatten)]
    pub unit: CommunicativeUnit,
    pub text: String,
}

/// Serializable snapshot of a session for clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: SessionId,
    pub state: SessionState,
    pub task: TaskContext,
    pub prompts: Vec<FactorPrompt>,
    pub applied_anchors: Vec<AdaptedFactorSet>,
    pub selections: Vec<FactorSelection>,
    pub draft: Option<EmailDraft>,
    pub units: Vec<UnitView>,
    pub intents: Vec<Intent>,
    pub links: Vec<UnitIntentLink>,
    pub pending_preview: Option<RewriteResult>,
    pub edits: Vec<TrackedEdit>,
    pub quickfixes: Vec<AppliedQuickFix>,
    pub warnings: Vec<String>,
}
