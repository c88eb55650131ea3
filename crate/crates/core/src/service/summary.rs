use serde::{Deserialize, Serialize};

use super::events::{EventKind, SessionEvent};

/// Counts derived from a session's event log alone.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub task: String,
    pub final_revision: Option<u32>,
    pub anchors_applied: usize,
    pub factors_revised_from_anchor: usize,
    pub intent_changes: usize,
    pub intent_noops: usize,
    pub quickfixes_surfaced: usize,
    pub quickfixes_applied: usize,
    pub quickfixes_accepted: usize,
    pub quickfixes_undone: usize,
    pub manual_edits: usize,
    pub records_created: usize,
    pub anchors_saved: Vec<String>,
    pub finalized: bool,
}

pub fn summarize(events: &[SessionEvent]) -> SessionSummary {
    let mut s = SessionSummary::default();
    for e in events {
        match &e.kind {
            EventKind::SessionCreated { task } => s.task = task.task_description.clone(),
            EventKind::AnchorApplied { .. } => s.anchors_applied += 1,
            EventKind::FactorsSubmitted { revised_from_anchor, .. } => s.factors_revised_from_anchor = *revised_from_anchor,
            EventKind::DraftGenerated { revision } => s.final_revision = Some(*revision),
            EventKind::IntentApplied { noop, .. } => {
                if *noop {
                    s.intent_noops += 1;
                } else {
                    s.intent_changes += 1;
                }
            }
            EventKind::QuickfixSurfaced { record_ids, .. } => s.quickfixes_surfaced += record_ids.len(),
            EventKind::QuickfixApplied { accepted, revision, .. } => {
                s.quickfixes_applied += 1;
                if *accepted {
                    s.quickfixes_accepted += 1;
                }
                if revision.is_some() {
                    s.final_revision = *revision;
                }
            }
            EventKind::QuickfixUndone { revision, .. } => {
                s.quickfixes_undone += 1;
                s.final_revision = Some(*revision);
            }
            EventKind::ManualEdit { revision, .. } => {
                s.manual_edits += 1;
                s.final_revision = Some(*revision);
            }
            EventKind::StylebookRecorded { .. } => s.records_created += 1,
            EventKind::AnchorSaved { name, .. } => s.anchors_saved.push(name.clone()),
            EventKind::Finalized {} => s.finalized = true,
            _ => {}
        }
    }
    s
}

impl std::fmt::Display for SessionSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "task: {}", self.task)?;
        match self.final_revision {
            Some(r) => writeln!(f, "final revision: {r}")?,
            None => writeln!(f, "final revision: none")?,
        }
        writeln!(
            f,
            "anchors applied: {} (factors revised: {})",
            self.anchors_applied, self.factors_revised_from_anchor
        )?;
        writeln!(f, "intent changes: {} (no-op: {})", self.intent_changes, self.intent_noops)?;
        writeln!(
            f,
            "quick fixes: {} surfaced, {} applied, {} accepted, {} undone",
            self.quickfixes_surfaced, self.quickfixes_applied, self.quickfixes_accepted, self.quickfixes_undone
        )?;
        writeln!(f, "manual edits: {} (records created: {})", self.manual_edits, self.records_created)?;
        if !self.anchors_saved.is_empty() {
            writeln!(f, "anchors saved: {}", self.anchors_saved.join(", "))?;
        }
        write!(f, "finalized: {}", if self.finalized { "yes" } else { "no" })
    }
}
