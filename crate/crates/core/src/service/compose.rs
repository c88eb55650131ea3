use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use super::events::{EventKind, SessionEvent};
use super::session::{AppliedQuickFix, EditStatus, Session, SessionState, SessionView, TrackedEdit};
use super::summary::{summarize, SessionSummary};
use crate::agents::{reoffset_units, AdaptedFactorSet, EditContext, Pipeline, Replacement, RewriteResult};
use crate::catalog::Catalog;
use crate::clock::Clock;
use crate::domain::{
    char_len, replace, slice, whitespace_normalized, Anchor, AnchorId, AnchorKind, CommunicativeUnit, DraftId,
    EditEvent, EditId, EmailDraft, FactorCategory, FactorSelection, IntentId, QuickFixSuggestion, RecordId, SessionId,
    Span, StylebookRecord, TaskContext, UnitIntentLink,
};
use crate::store::{rank_records, Embedder, RetrievalQuery, RetrievalSettings, ReuseStore};
use crate::{Error, Result};

use SessionState::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryStatus {
    Ok,
    /// The stylebook is empty.
    NoRecords,
    /// No record reached the similarity threshold.
    NoMatches,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuickFixQuery {
    pub status: QueryStatus,
    pub span: Span,
    pub suggestions: Vec<QuickFixSuggestion>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuickFixApplied {
    pub record_id: RecordId,
    /// Span that was rewritten in the previous revision.
    pub span: Span,
    pub extended: bool,
    pub flags: Vec<String>,
    pub proposed_text: String,
    pub accepted: bool,
    /// New revision when accepted.
    pub revision: Option<u32>,
    pub usage_count: u32,
    pub acceptance_count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManualEditOutcome {
    pub edit: TrackedEdit,
    pub revision: u32,
    /// The edit awaits a rationale before it is learned.
    pub rationale_requested: bool,
    pub record: Option<StylebookRecord>,
    pub warnings: Vec<String>,
}

/// Composition sessions over one pipeline and one reuse store.
pub struct ComposeService {
    pipeline: Pipeline,
    store: Arc<ReuseStore>,
    clock: Arc<dyn Clock>,
    retrieval: RetrievalSettings,
    embedder: Option<Arc<dyn Embedder>>,
    sessions: RwLock<BTreeMap<SessionId, Arc<Mutex<Session>>>>,
    next_session: AtomicU64,
}

fn require(s: &Session, operation: &'static str, allowed: &[SessionState]) -> Result<()> {
    if allowed.contains(&s.state) {
        Ok(())
    } else {
        Err(Error::State {
            operation,
            state: s.state.to_string(),
        })
    }
}

fn join_nonblank(parts: &[&str]) -> String {
    parts
        .iter()
        .map(|p| p.trim())
        .filter(|p| !p.is_empty())
        .collect::<Vec<_>>()
        .join("; ")
}

/// The unit that can absorb an edit of `span` without breaking the
/// partition, if any.
fn containing_unit<'a>(units: &'a [CommunicativeUnit], span: Span, new_len: usize) -> Option<&'a CommunicativeUnit> {
    units.iter().find(|u| {
        u.span.start <= span.start && span.end <= u.span.end && u.span.len() - span.len() + new_len > 0
    })
}

impl ComposeService {
    pub fn new(pipeline: Pipeline, store: Arc<ReuseStore>, clock: Arc<dyn Clock>) -> Self {
        ComposeService {
            pipeline,
            store,
            clock,
            retrieval: RetrievalSettings::default(),
            embedder: None,
            sessions: RwLock::new(BTreeMap::new()),
            next_session: AtomicU64::new(1),
        }
    }

    pub fn with_retrieval(mut self, settings: RetrievalSettings) -> Result<Self> {
        settings.validate()?;
        self.retrieval = settings;
        Ok(self)
    }

    pub fn with_embedder(mut self, embedder: Arc<dyn Embedder>) -> Self {
        self.embedder = Some(embedder);
        self
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    pub fn catalog(&self) -> &Catalog {
        self.pipeline.catalog()
    }

    pub fn store(&self) -> &Arc<ReuseStore> {
        &self.store
    }

    pub fn retrieval(&self) -> &RetrievalSettings {
        &self.retrieval
    }

    fn session(&self, id: &SessionId) -> Result<Arc<Mutex<Session>>> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| Error::not_found("session", id.as_str()))
    }

    fn with_session<R>(&self, id: &SessionId, f: impl FnOnce(&mut Session) -> Result<R>) -> Result<R> {
        let handle = self.session(id)?;
        let mut guard = handle.lock().unwrap_or_else(|p| p.into_inner());
        f(&mut guard)
    }

    fn log(&self, s: &mut Session, kind: EventKind) {
        let seq = s.events.len() as u64 + 1;
        s.events.push(SessionEvent {
            seq,
            at: self.clock.now(),
            kind,
        });
    }

    pub fn session_ids(&self) -> Vec<SessionId> {
        self.sessions.read().unwrap().keys().cloned().collect()
    }

    /// Start a session and curate its factors. When curation is unavailable
    /// the full catalog is offered instead and a warning is recorded.
    pub fn create_session(&self, task: TaskContext) -> Result<SessionView> {
        task.validate()?;
        let id = SessionId::new(format!("s-{}", self.next_session.fetch_add(1, Ordering::SeqCst)));
        let mut s = Session::new(id.clone(), task.clone());
        self.log(&mut s, EventKind::SessionCreated { task: task.clone() });
        let fallback = match self.pipeline.curate(&task) {
            Ok(curation) => {
                s.prompts = curation.prompts;
                s.warnings.extend(curation.warnings);
                false
            }
            Err(e @ (Error::Gateway(_) | Error::Schema { .. })) => {
                tracing::warn!(%e, "factor curation failed; offering the full catalog");
                s.warnings.push(format!("factor curation unavailable ({e}); showing every factor"));
                s.prompts = self.catalog().fallback_prompts();
                true
            }
            Err(e) => return Err(e),
        };
        s.state = FactorsCurated;
        let factor_ids = s.prompts.iter().map(|p| p.factor_id.to_string()).collect();
        self.log(&mut s, EventKind::FactorsCurated { factor_ids, fallback });
        let view = s.view();
        self.sessions.write().unwrap().insert(id, Arc::new(Mutex::new(s)));
        Ok(view)
    }

    pub fn get_session(&self, id: &SessionId) -> Result<SessionView> {
        self.with_session(id, |s| Ok(s.view()))
    }

    pub fn events(&self, id: &SessionId) -> Result<Vec<SessionEvent>> {
        self.with_session(id, |s| Ok(s.events.clone()))
    }

    pub fn summary(&self, id: &SessionId) -> Result<SessionSummary> {
        self.with_session(id, |s| Ok(summarize(&s.events)))
    }

    /// Check a session's structural invariants; used by tests and tools.
    pub fn check_session(&self, id: &SessionId) -> Result<()> {
        self.with_session(id, |s| s.check_invariants(self.catalog()).map_err(Error::validation))
    }

    pub fn apply_anchor(&self, id: &SessionId, anchor_id: &AnchorId) -> Result<AdaptedFactorSet> {
        self.with_session(id, |s| {
            require(s, "apply_anchor", &[FactorsCurated])?;
            let anchor = self.store.get_anchor(anchor_id)?;
            let adapted = self.pipeline.adapt_anchor(&anchor, &s.task)?;
            s.warnings.extend(adapted.warnings.iter().cloned());
            s.applied_anchors.retain(|a| a.anchor_id != adapted.anchor_id);
            s.applied_anchors.push(adapted.clone());
            self.log(
                s,
                EventKind::AnchorApplied {
                    anchor_id: anchor_id.to_string(),
                    kept: adapted.count(crate::agents::AdaptStatus::Kept),
                    transformed: adapted.count(crate::agents::AdaptStatus::Transformed),
                },
            );
            Ok(adapted)
        })
    }

    pub fn submit_factors(&self, id: &SessionId, selections: Vec<FactorSelection>) -> Result<SessionView> {
        self.with_session(id, |s| {
            require(s, "submit_factors", &[FactorsCurated, FactorsSubmitted])?;
            let report = self.catalog().validate_selections(&selections);
            if !report.is_empty() {
                return Err(Error::invalid_report("factor selections are invalid", report));
            }
            if selections.iter().all(|sel| sel.skipped) {
                return Err(Error::validation("answer at least one factor"));
            }
            let revised_from_anchor = s
                .applied_anchors
                .iter()
                .flat_map(|a| &a.entries)
                .filter(|entry| !selections.iter().any(|sel| sel == &entry.selection))
                .count();
            s.selections = selections.clone();
            s.state = FactorsSubmitted;
            self.log(
                s,
                EventKind::FactorsSubmitted {
                    selections,
                    revised_from_anchor,
                },
            );
            Ok(s.view())
        })
    }

    fn edit_context(&self, s: &Session) -> EditContext {
        let persona = self.catalog().render_category(&s.selections, FactorCategory::Persona);
        let situation = self.catalog().render_category(&s.selections, FactorCategory::Situation);
        EditContext {
            receiver_summary: join_nonblank(&[s.task.recipient_hint.as_deref().unwrap_or(""), &persona]),
            occasion_summary: join_nonblank(&[&s.task.task_description, &situation]),
        }
    }

    /// Records whose receiver and occasion resemble this session's.
    fn stylebook_hints(&self, s: &Session) -> Vec<StylebookRecord> {
        let records = self.store.list_records();
        if records.is_empty() {
            return Vec::new();
        }
        let ctx = self.edit_context(s);
        let settings = RetrievalSettings {
            w_text: 0.0,
            w_ctx: 1.0,
            ..self.retrieval.clone()
        };
        let query = RetrievalQuery {
            selected_text: String::new(),
            receiver: ctx.receiver_summary,
            occasion: ctx.occasion_summary,
        };
        rank_records(&settings, &query, &records, None)
            .0
            .into_iter()
            .map(|r| r.record)
            .collect()
    }

    /// Generate the draft and analyze it. In `drafted` (a previous analysis
    /// failed) only the analysis is retried.
    pub fn generate(&self, id: &SessionId) -> Result<SessionView> {
        self.with_session(id, |s| {
            require(s, "generate", &[FactorsSubmitted, Drafted])?;
            if s.state == FactorsSubmitted {
                let hints = self.stylebook_hints(s);
                let body = self.pipeline.generate_draft(&s.task, &s.selections, &hints)?;
                self.log(s, EventKind::GenerateRequested {});
                s.revisions = vec![EmailDraft::initial(DraftId::new(format!("{}-draft", s.session_id)), &body)];
                s.state = Drafted;
                self.log(s, EventKind::DraftGenerated { revision: 0 });
            } else {
                self.log(s, EventKind::GenerateRequested {});
            }
            let body = s.body().to_owned();
            let analysis = self
                .pipeline
                .analyze(&s.task, &s.selections, &body)
                .and_then(|(intents, extraction)| {
                    let linking = self.pipeline.link_units_intents(&body, &extraction.units, &intents)?;
                    Ok((intents, extraction, linking))
                });
            match analysis {
                Ok((intents, extraction, linking)) => {
                    s.warnings.extend(extraction.warnings);
                    s.warnings.extend(linking.warnings);
                    s.units = extraction.units;
                    s.intents = intents;
                    s.links = linking.links;
                    s.state = Analyzed;
                    let kind = EventKind::DraftAnalyzed {
                        units: s.units.len(),
                        intents: s.intents.len(),
                        links: s.links.len(),
                    };
                    self.log(s, kind);
                    Ok(s.view())
                }
                Err(e) => {
                    s.warnings.push(format!("analysis failed: {e}"));
                    self.log(s, EventKind::AnalysisFailed { error: e.to_string() });
                    Err(e)
                }
            }
        })
    }

    fn push_revision(s: &mut Session, body: String) -> u32 {
        let next = s.draft().expect("analyzed session has a draft").next(body);
        let revision = next.revision;
        s.revisions.push(next);
        s.pending_preview = None;
        revision
    }

    /// Units (and, when they had to be rebuilt, links) for a body in which
    /// `span` was replaced by `new_text`.
    fn units_after_edit(
        &self,
        s: &Session,
        span: Span,
        new_text: &str,
        new_body: &str,
    ) -> Result<(Vec<CommunicativeUnit>, Option<Vec<UnitIntentLink>>, Vec<String>)> {
        if let Some(unit) = containing_unit(&s.units, span, char_len(new_text)) {
            let rep = Replacement {
                unit_id: unit.unit_id.clone(),
                span,
                new_text: new_text.to_owned(),
            };
            return Ok((reoffset_units(&s.units, &[rep]), None, Vec::new()));
        }
        let extraction = self.pipeline.extract_units(new_body)?;
        let linking = self.pipeline.link_units_intents(new_body, &extraction.units, &s.intents)?;
        let mut warnings = vec!["edit crossed unit boundaries; units re-extracted".to_owned()];
        warnings.extend(extraction.warnings);
        warnings.extend(linking.warnings);
        Ok((extraction.units, Some(linking.links), warnings))
    }

    /// Compute (or reuse) the rewrite for changing an intent's value.
    pub fn preview_intent(&self, id: &SessionId, intent_id: &IntentId, new_value: &str) -> Result<RewriteResult> {
        self.with_session(id, |s| {
            require(s, "preview_intent", &[Analyzed])?;
            let result = self.rewrite(s, intent_id, new_value)?;
            s.pending_preview = Some(result.clone());
            self.log(
                s,
                EventKind::IntentPreviewed {
                    intent_id: intent_id.to_string(),
                    new_value: new_value.trim().to_owned(),
                },
            );
            Ok(result)
        })
    }

    fn rewrite(&self, s: &Session, intent_id: &IntentId, new_value: &str) -> Result<RewriteResult> {
        if let Some(p) = &s.pending_preview {
            if &p.intent_id == intent_id && p.new_value == new_value.trim() {
                return Ok(p.clone());
            }
        }
        self.pipeline
            .rewrite_for_intent(s.body(), &s.units, &s.intents, &s.links, intent_id, new_value)
    }

    pub fn apply_intent(&self, id: &SessionId, intent_id: &IntentId, new_value: &str) -> Result<SessionView> {
        self.with_session(id, |s| {
            require(s, "apply_intent", &[Analyzed])?;
            let result = self.rewrite(s, intent_id, new_value)?;
            let intent_pos = s
                .intents
                .iter()
                .position(|i| &i.intent_id == intent_id)
                .ok_or_else(|| Error::not_found("intent", intent_id.as_str()))?;
            let noop = result.is_noop();
            if !noop {
                s.units = reoffset_units(&s.units, &result.replacements);
                Self::push_revision(s, result.body.clone());
            }
            s.intents[intent_pos].set_value(&result.new_value);
            s.pending_preview = None;
            self.log(
                s,
                EventKind::IntentApplied {
                    intent_id: intent_id.to_string(),
                    new_value: result.new_value.clone(),
                    noop,
                },
            );
            Ok(s.view())
        })
    }

    pub fn discard_preview(&self, id: &SessionId) -> Result<()> {
        self.with_session(id, |s| {
            require(s, "discard_preview", &[Analyzed])?;
            if s.pending_preview.take().is_none() {
                return Err(Error::State {
                    operation: "discard_preview",
                    state: "no pending preview".into(),
                });
            }
            self.log(s, EventKind::IntentDiscarded {});
            Ok(())
        })
    }

    fn check_span(body: &str, span: Span) -> Result<()> {
        if span.start > span.end || !span.is_within(char_len(body)) {
            return Err(Error::validation(format!("span {span} is outside the body")));
        }
        Ok(())
    }

    /// Stylebook records applicable to the passage at `span`.
    pub fn query_quickfix(&self, id: &SessionId, span: Span) -> Result<QuickFixQuery> {
        self.with_session(id, |s| {
            require(s, "query_quickfix", &[Analyzed])?;
            Self::check_span(s.body(), span)?;
            if span.is_empty() {
                return Err(Error::validation("select some text first"));
            }
            let selected = slice(s.body(), span).expect("span checked").to_owned();
            let records = self.store.list_records();
            let mut warnings = Vec::new();
            let (status, suggestions) = if records.is_empty() {
                (QueryStatus::NoRecords, Vec::new())
            } else {
                let ctx = self.edit_context(s);
                let query = RetrievalQuery {
                    selected_text: selected.clone(),
                    receiver: ctx.receiver_summary,
                    occasion: ctx.occasion_summary,
                };
                let (mut ranked, w) = rank_records(&self.retrieval, &query, &records, self.embedder.as_deref());
                warnings.extend(w);
                if self.retrieval.rerank && ranked.len() > 1 {
                    let candidates: Vec<StylebookRecord> = ranked.iter().map(|r| r.record.clone()).collect();
                    match self.pipeline.rerank(&selected, &candidates) {
                        Ok(order) => ranked.sort_by_key(|r| order.iter().position(|id| id == &r.record.record_id)),
                        Err(e) => warnings.push(format!("reranking unavailable ({e}); similarity order kept")),
                    }
                }
                let suggestions: Vec<QuickFixSuggestion> = ranked
                    .into_iter()
                    .map(|r| QuickFixSuggestion {
                        record_id: r.record.record_id,
                        modification_name: r.record.modification_name,
                        target_span: span,
                        proposed_text: None,
                        similarity_score: r.score,
                    })
                    .collect();
                if suggestions.is_empty() {
                    (QueryStatus::NoMatches, suggestions)
                } else {
                    (QueryStatus::Ok, suggestions)
                }
            };
            for w in &warnings {
                tracing::warn!(warning = %w, "quick fix query");
            }
            self.log(
                s,
                EventKind::QuickfixSurfaced {
                    span,
                    record_ids: suggestions.iter().map(|q| q.record_id.to_string()).collect(),
                },
            );
            Ok(QuickFixQuery {
                status,
                span,
                suggestions,
                warnings,
            })
        })
    }

    /// Rewrite the passage with a stylebook record. Usage is always counted;
    /// only an accepted fix changes the draft and counts as an acceptance.
    pub fn apply_quickfix(&self, id: &SessionId, record_id: &RecordId, span: Span, accept: bool) -> Result<QuickFixApplied> {
        self.with_session(id, |s| {
            require(s, "apply_quickfix", &[Analyzed])?;
            Self::check_span(s.body(), span)?;
            let record = self.store.get_record(record_id)?;
            let outcome = self.pipeline.apply_quickfix(s.body(), span, &record)?;
            let mut flags = Vec::new();
            if outcome.extended {
                flags.push("[extended to sentence boundaries]".to_owned());
            }
            let rebuilt = if accept {
                Some(self.units_after_edit(s, outcome.span, &outcome.proposed_text, &outcome.body)?)
            } else {
                None
            };
            let updated = self.store.bump_usage(record_id, accept)?;
            let mut revision = None;
            if let Some((units, links, warnings)) = rebuilt {
                let prior_units = std::mem::replace(&mut s.units, units);
                let prior_links = match links {
                    Some(l) => Some(std::mem::replace(&mut s.links, l)),
                    None => None,
                };
                s.warnings.extend(warnings);
                let before = s.draft().expect("analyzed").revision;
                let after = Self::push_revision(s, outcome.body.clone());
                s.quickfixes.push(AppliedQuickFix {
                    record_id: record_id.clone(),
                    span: outcome.span,
                    revision_before: before,
                    revision_after: after,
                    undone: false,
                    prior_units,
                    prior_links,
                });
                revision = Some(after);
            }
            self.log(
                s,
                EventKind::QuickfixApplied {
                    record_id: record_id.to_string(),
                    span,
                    accepted: accept,
                    revision,
                },
            );
            Ok(QuickFixApplied {
                record_id: record_id.clone(),
                span: outcome.span,
                extended: outcome.extended,
                flags,
                proposed_text: outcome.proposed_text,
                accepted: accept,
                revision,
                usage_count: updated.usage_count,
                acceptance_count: updated.acceptance_count,
            })
        })
    }

    /// Revert the latest accepted quick fix with a new revision restoring the
    /// prior text, and withdraw its acceptance. Only possible while that fix
    /// produced the current revision.
    pub fn undo_quickfix(&self, id: &SessionId) -> Result<SessionView> {
        self.with_session(id, |s| {
            require(s, "undo_quickfix", &[Analyzed])?;
            let current = s.draft().expect("analyzed").revision;
            let pos = s
                .quickfixes
                .iter()
                .rposition(|q| !q.undone)
                .ok_or(Error::State {
                    operation: "undo_quickfix",
                    state: "no quick fix to undo".into(),
                })?;
            if s.quickfixes[pos].revision_after != current {
                return Err(Error::State {
                    operation: "undo_quickfix",
                    state: "draft changed after the quick fix".into(),
                });
            }
            let record_id = s.quickfixes[pos].record_id.clone();
            self.store.rollback_acceptance(&record_id)?;
            let before = s.quickfixes[pos].revision_before as usize;
            let body = s.revisions[before].body.clone();
            let fix = &mut s.quickfixes[pos];
            fix.undone = true;
            let units = std::mem::take(&mut fix.prior_units);
            let links = fix.prior_links.take();
            s.units = units;
            if let Some(links) = links {
                s.links = links;
            }
            let revision = Self::push_revision(s, body);
            self.log(
                s,
                EventKind::QuickfixUndone {
                    record_id: record_id.to_string(),
                    revision,
                },
            );
            Ok(s.view())
        })
    }

    fn learn(&self, s: &mut Session, edit_pos: usize) -> Result<StylebookRecord> {
        let ctx = self.edit_context(s);
        let record = self.pipeline.analyze_edit(&s.edits[edit_pos].event, &ctx)?;
        let record = self.store.insert_record(record)?;
        let edit = &mut s.edits[edit_pos];
        edit.status = EditStatus::Recorded;
        edit.record_id = Some(record.record_id.clone());
        let kind = EventKind::StylebookRecorded {
            edit_id: edit.edit_id.to_string(),
            record_id: record.record_id.to_string(),
        };
        self.log(s, kind);
        Ok(record)
    }

    /// Replace the text at `span`. Substantive edits become stylebook
    /// records: immediately when a rationale is given, otherwise after the
    /// writer answers the rationale request or at finalization.
    pub fn manual_edit(
        &self,
        id: &SessionId,
        span: Span,
        new_text: &str,
        rationale: Option<String>,
    ) -> Result<ManualEditOutcome> {
        self.with_session(id, |s| {
            require(s, "manual_edit", &[Analyzed])?;
            Self::check_span(s.body(), span)?;
            let new_text = crate::domain::normalize_newlines(new_text);
            let original = slice(s.body(), span).expect("span checked").to_owned();
            if original == new_text {
                return Err(Error::validation("the edit leaves the text unchanged"));
            }
            let new_body = replace(s.body(), span, &new_text).expect("span checked");
            let (units, links, mut warnings) = self.units_after_edit(s, span, &new_text, &new_body)?;
            let rationale = rationale.map(|r| r.trim().to_owned()).filter(|r| !r.is_empty());
            let draft = s.draft().expect("analyzed").clone();
            s.units = units;
            if let Some(links) = links {
                s.links = links;
            }
            let revision = Self::push_revision(s, new_body);
            let edit_id = EditId::new(format!("e{}", s.edits.len() + 1));
            let event = EditEvent {
                draft_id: draft.draft_id.clone(),
                revision_before: draft.revision,
                span,
                original_text: original.clone(),
                revised_text: new_text.clone(),
                user_rationale: rationale.clone(),
                timestamp: self.clock.now(),
            };
            let whitespace_only = whitespace_normalized(&original) == whitespace_normalized(&new_text);
            s.edits.push(TrackedEdit {
                edit_id: edit_id.clone(),
                event,
                status: if whitespace_only { EditStatus::Ignored } else { EditStatus::Pending },
                record_id: None,
            });
            self.log(
                s,
                EventKind::ManualEdit {
                    span,
                    new_text,
                    rationale: rationale.clone(),
                    edit_id: edit_id.to_string(),
                    revision,
                },
            );
            let pos = s.edits.len() - 1;
            let mut record = None;
            if !whitespace_only && rationale.is_some() {
                match self.learn(s, pos) {
                    Ok(r) => record = Some(r),
                    Err(e) => {
                        tracing::warn!(%e, "edit analysis failed; edit kept pending");
                        warnings.push(format!("edit could not be learned yet ({e})"));
                    }
                }
            }
            s.warnings.extend(warnings.iter().cloned());
            let edit = s.edits[pos].clone();
            Ok(ManualEditOutcome {
                rationale_requested: edit.status == EditStatus::Pending && rationale.is_none(),
                edit,
                revision,
                record,
                warnings,
            })
        })
    }

    /// Answer the rationale request for a pending edit. `None` lets the
    /// analysis agent infer the rationale.
    pub fn provide_rationale(&self, id: &SessionId, edit_id: &EditId, rationale: Option<String>) -> Result<ManualEditOutcome> {
        self.with_session(id, |s| {
            require(s, "provide_rationale", &[Analyzed])?;
            let pos = s
                .edits
                .iter()
                .position(|e| &e.edit_id == edit_id)
                .ok_or_else(|| Error::not_found("edit", edit_id.as_str()))?;
            if s.edits[pos].status != EditStatus::Pending {
                return Err(Error::State {
                    operation: "provide_rationale",
                    state: format!("edit {edit_id} is not pending"),
                });
            }
            let rationale = rationale.map(|r| r.trim().to_owned()).filter(|r| !r.is_empty());
            let previous = s.edits[pos].event.user_rationale.clone();
            s.edits[pos].event.user_rationale = rationale.clone().or_else(|| previous.clone());
            self.log(
                s,
                EventKind::RationaleProvided {
                    edit_id: edit_id.to_string(),
                    rationale,
                },
            );
            match self.learn(s, pos) {
                Ok(record) => {
                    let edit = s.edits[pos].clone();
                    Ok(ManualEditOutcome {
                        revision: s.draft().expect("analyzed").revision,
                        rationale_requested: false,
                        edit,
                        record: Some(record),
                        warnings: Vec::new(),
                    })
                }
                Err(e) => {
                    s.events.pop();
                    s.edits[pos].event.user_rationale = previous;
                    Err(e)
                }
            }
        })
    }

    /// Save the session's persona or situation factors as an anchor.
    pub fn save_anchor(&self, id: &SessionId, kind: AnchorKind, name_override: Option<String>) -> Result<Anchor> {
        self.with_session(id, |s| {
            require(s, "save_anchor", &[Analyzed, Finalized])?;
            let category = match kind {
                AnchorKind::Persona => FactorCategory::Persona,
                AnchorKind::Situation => FactorCategory::Situation,
            };
            let selections: Vec<FactorSelection> = s
                .selections
                .iter()
                .filter(|sel| !sel.skipped)
                .filter(|sel| self.catalog().get(&sel.factor_id).is_some_and(|f| f.category == category))
                .cloned()
                .collect();
            if selections.is_empty() {
                return Err(Error::validation(format!("the session has no answered {category} factors")));
            }
            let override_name = name_override.as_deref().map(str::trim).filter(|n| !n.is_empty());
            let name = match override_name {
                Some(n) => n.to_owned(),
                None => self.pipeline.name_anchor(kind, &s.task, &selections)?,
            };
            let anchor = self.store.insert_anchor(Anchor {
                anchor_id: AnchorId::default(),
                kind,
                name,
                factor_configuration: selections,
                source_task: s.task.clone(),
                created_at: self.clock.now(),
            })?;
            self.log(
                s,
                EventKind::AnchorSaved {
                    kind,
                    name_override: override_name.map(str::to_owned),
                    anchor_id: anchor.anchor_id.to_string(),
                    name: anchor.name.clone(),
                },
            );
            Ok(anchor)
        })
    }

    /// Close the session. Edits still waiting for a rationale are learned
    /// with an inferred one; failures are reported as warnings.
    pub fn finalize(&self, id: &SessionId) -> Result<SessionSummary> {
        self.with_session(id, |s| {
            require(s, "finalize", &[Analyzed])?;
            let pending: Vec<usize> = (0..s.edits.len()).filter(|&i| s.edits[i].status == EditStatus::Pending).collect();
            for pos in pending {
                if let Err(e) = self.learn(s, pos) {
                    let edit_id = s.edits[pos].edit_id.clone();
                    s.warnings.push(format!("edit {edit_id} could not be learned ({e})"));
                    s.edits[pos].status = EditStatus::Ignored;
                }
            }
            s.pending_preview = None;
            s.state = Finalized;
            self.log(s, EventKind::Finalized {});
            Ok(summarize(&s.events))
        })
    }
}
