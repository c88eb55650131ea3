use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::sync::Arc;

use super::link::{describe_intents, describe_units, fallback_links, sanitize, sort_links, unlinked};
use super::segment::{segment, Segmentation};
use super::{
    retry_prompt, AdaptedFactors, AgentName, AnalyzedIntents, AnchorNameOutput, EditAnalysis, ExtractedUnits,
    Gateway, GeneratedDraft, ProposedLinks, ProposedRewrite, QuickFixProposal, RawAdaptStatus, RerankOutput,
};
use crate::catalog::{Catalog, Curation};
use crate::domain::{
    char_len, normalize_newlines, sentence_bounds, slice, splits_word, trim_span, validate_link_graph,
    whitespace_normalized, Anchor, AnchorId, AnchorKind, CommunicativeUnit, EditEvent, FactorCategory, FactorId,
    FactorSelection, Intent, IntentId, IntentOrigin, RationaleOrigin, RecordId, Span, StylebookRecord, TaskContext,
    UnitId, UnitIntentLink,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineOptions {
    /// Alternatives kept per intent, 1 to 5.
    pub alternatives_per_intent: usize,
    pub min_factors: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            alternatives_per_intent: 2,
            min_factors: crate::catalog::DEFAULT_MIN_FACTORS,
        }
    }
}

impl PipelineOptions {
    pub fn validate(&self) -> Result<()> {
        if !(1..=5).contains(&self.alternatives_per_intent) {
            return Err(Error::Config(format!(
                "alternatives_per_intent must be between 1 and 5, got {}",
                self.alternatives_per_intent
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extraction {
    pub units: Vec<CommunicativeUnit>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Linking {
    pub links: Vec<UnitIntentLink>,
    pub warnings: Vec<String>,
    pub repair_round: bool,
    /// Links added by the lexical fallback.
    pub fallback: Vec<UnitIntentLink>,
}

/// New text for the trimmed content of one unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replacement {
    pub unit_id: UnitId,
    pub span: Span,
    pub new_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteResult {
    pub intent_id: IntentId,
    pub new_value: String,
    pub replacements: Vec<Replacement>,
    pub body: String,
    pub rationale_summary: String,
}

impl RewriteResult {
    pub fn is_noop(&self) -> bool {
        self.replacements.is_empty()
    }

    pub fn changed_units(&self) -> Vec<&UnitId> {
        self.replacements.iter().map(|r| &r.unit_id).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptStatus {
    Kept,
    Transformed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdaptedFactor {
    pub factor_id: FactorId,
    pub status: AdaptStatus,
    pub selection: FactorSelection,
    pub original: FactorSelection,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdaptedFactorSet {
    pub anchor_id: AnchorId,
    pub entries: Vec<AdaptedFactor>,
    /// True when the target task matched the anchor's source task and no
    /// agent was consulted.
    pub identity: bool,
    pub warnings: Vec<String>,
}

impl AdaptedFactorSet {
    pub fn selections(&self) -> Vec<FactorSelection> {
        self.entries.iter().map(|e| e.selection.clone()).collect()
    }

    pub fn count(&self, status: AdaptStatus) -> usize {
        self.entries.iter().filter(|e| e.status == status).count()
    }
}

/// Receiver and occasion summaries attached to learned records.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditContext {
    pub receiver_summary: String,
    pub occasion_summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuickFixOutcome {
    /// Span actually rewritten, after any sentence extension and trimming.
    pub span: Span,
    pub extended: bool,
    pub proposed_text: String,
    pub body: String,
    pub rationale_summary: String,
}

/// Replace each span; spans must be disjoint.
pub fn apply_replacements(body: &str, replacements: &[Replacement]) -> Result<String> {
    let mut ordered: Vec<&Replacement> = replacements.iter().collect();
    ordered.sort_by_key(|r| std::cmp::Reverse(r.span.start));
    let mut out = body.to_owned();
    let mut limit = usize::MAX;
    for r in ordered {
        if r.span.end > limit {
            return Err(Error::validation(format!("replacement spans overlap at {}", r.span)));
        }
        out = crate::domain::replace(&out, r.span, &r.new_text)
            .ok_or_else(|| Error::validation(format!("replacement span {} is outside the body", r.span)))?;
        limit = r.span.start;
    }
    Ok(out)
}

/// Shift unit spans after in-unit replacements so they partition the new body.
pub fn reoffset_units(units: &[CommunicativeUnit], replacements: &[Replacement]) -> Vec<CommunicativeUnit> {
    let delta = |r: &Replacement| char_len(&r.new_text) as isize - r.span.len() as isize;
    units
        .iter()
        .map(|u| {
            let mut u = u.clone();
            let before: isize = replacements
                .iter()
                .filter(|r| r.span.end <= u.span.start && r.unit_id != u.unit_id)
                .map(delta)
                .sum();
            let inside: isize = replacements.iter().filter(|r| r.unit_id == u.unit_id).map(delta).sum();
            u.span.start = (u.span.start as isize + before) as usize;
            u.span.end = (u.span.end as isize + before + inside) as usize;
            u
        })
        .collect()
}

/// Orchestrates the agents over one gateway and catalog.
#[derive(Debug, Clone)]
pub struct Pipeline {
    gateway: Arc<Gateway>,
    catalog: Arc<Catalog>,
    options: PipelineOptions,
}

impl Pipeline {
    pub fn new(gateway: Arc<Gateway>, catalog: Arc<Catalog>, options: PipelineOptions) -> Result<Self> {
        options.validate()?;
        Ok(Pipeline {
            gateway,
            catalog,
            options,
        })
    }

    pub fn gateway(&self) -> &Arc<Gateway> {
        &self.gateway
    }

    pub fn catalog(&self) -> &Arc<Catalog> {
        &self.catalog
    }

    pub fn options(&self) -> &PipelineOptions {
        &self.options
    }

    pub fn curate(&self, task: &TaskContext) -> Result<Curation> {
        self.catalog.curate_factors(task, &self.gateway, self.options.min_factors)
    }

    pub fn generate_draft(
        &self,
        task: &TaskContext,
        selections: &[FactorSelection],
        stylebook_hints: &[StylebookRecord],
    ) -> Result<String> {
        task.validate()?;
        let factor_block = self.catalog.render_factor_context(selections)?;
        let hints = if stylebook_hints.is_empty() {
            "(none)".to_owned()
        } else {
            stylebook_hints
                .iter()
                .map(|r| format!("- {}: {}", r.modification_name, r.rationale))
                .collect::<Vec<_>>()
                .join("\n")
        };
        let prompt = self.gateway.render(
            AgentName::DraftGenerator,
            &[
                ("task", &task.task_description),
                ("recipient", task.recipient_hint.as_deref().unwrap_or("(not given)")),
                ("factor_block", or_none(&factor_block)),
                ("stylebook_hints", &hints),
            ],
        )?;
        let out: GeneratedDraft = self
            .gateway
            .complete_structured(&self.gateway.request(AgentName::DraftGenerator, prompt))?
            .value;
        Ok(normalize_newlines(out.body.trim()))
    }

    pub fn analyze_intents(&self, task: &TaskContext, selections: &[FactorSelection], body: &str) -> Result<Vec<Intent>> {
        let factor_block = self.catalog.render_factor_context(selections)?;
        let alternatives = self.options.alternatives_per_intent.to_string();
        let prompt = self.gateway.render(
            AgentName::IntentAnalyzer,
            &[
                ("task", &task.task_description),
                ("factor_block", or_none(&factor_block)),
                ("body", body),
                ("alternatives", &alternatives),
            ],
        )?;
        let out: AnalyzedIntents = self
            .gateway
            .complete_structured(&self.gateway.request(AgentName::IntentAnalyzer, prompt))?
            .value;
        Ok(out
            .intents
            .iter()
            .enumerate()
            .map(|(i, raw)| {
                let mut alternatives = raw.clean_alternatives();
                alternatives.truncate(self.options.alternatives_per_intent);
                Intent {
                    intent_id: IntentId::new(format!("i{}", i + 1)),
                    intent_type: raw.intent_type.trim().to_owned(),
                    current_value: raw.current_value.trim().to_owned(),
                    alternative_values: alternatives,
                    origin: IntentOrigin::Derived,
                }
            })
            .collect())
    }

    /// Segment `body` into units. An answer that yields no usable unit is
    /// re-prompted once before failing.
    pub fn extract_units(&self, body: &str) -> Result<Extraction> {
        let labels = crate::domain::RECOMMENDED_UNIT_LABELS.join(", ");
        let prompt = self
            .gateway
            .render(AgentName::UnitExtractor, &[("labels", &labels), ("body", body)])?;
        let mut request = self.gateway.request(AgentName::UnitExtractor, prompt.clone());
        let mut retried = false;
        loop {
            let out: ExtractedUnits = self.gateway.complete_structured(&request)?.value;
            match segment(body, &out.units) {
                Ok(Segmentation { units, mut warnings }) => {
                    if retried {
                        warnings.insert(0, "extractor re-prompted after an unusable answer".into());
                    }
                    for w in &warnings {
                        tracing::warn!(warning = %w, "segmentation repaired");
                    }
                    return Ok(Extraction { units, warnings });
                }
                Err(err) if !retried => {
                    tracing::warn!(%err, "re-prompting unit extractor");
                    request.prompt = retry_prompt(&prompt, &format!("{err}; the units must quote text from the email"));
                    retried = true;
                }
                Err(err) => return Err(err),
            }
        }
    }

    /// Intent analysis and unit extraction, run concurrently.
    pub fn analyze(
        &self,
        task: &TaskContext,
        selections: &[FactorSelection],
        body: &str,
    ) -> Result<(Vec<Intent>, Extraction)> {
        let (intents, extraction) = std::thread::scope(|s| {
            let intents = s.spawn(|| self.analyze_intents(task, selections, body));
            let extraction = self.extract_units(body);
            (intents.join().expect("intent analysis thread panicked"), extraction)
        });
        Ok((intents?, extraction?))
    }

    pub fn link_units_intents(&self, body: &str, units: &[CommunicativeUnit], intents: &[Intent]) -> Result<Linking> {
        let prompt = self.gateway.render(
            AgentName::UnitIntentLinker,
            &[("units", &describe_units(body, units)), ("intents", &describe_intents(intents))],
        )?;
        let mut warnings = Vec::new();
        let mut links = Vec::new();
        let mut repair_round = false;
        match self
            .gateway
            .complete_structured::<ProposedLinks>(&self.gateway.request(AgentName::UnitIntentLinker, prompt.clone()))
        {
            Ok(out) => {
                let (clean, mut w) = sanitize(&out.value.links, units, intents);
                links = clean;
                warnings.append(&mut w);
                let (lu, li) = unlinked(units, intents, &links);
                if !lu.is_empty() || !li.is_empty() {
                    repair_round = true;
                    let problem = format!(
                        "every unit and intent needs a link; missing units: {}; missing intents: {}",
                        join_ids(lu.iter().map(|u| u.as_str())),
                        join_ids(li.iter().map(|i| i.as_str()))
                    );
                    let request = self
                        .gateway
                        .request(AgentName::UnitIntentLinker, retry_prompt(&prompt, &problem));
                    match self.gateway.complete_structured::<ProposedLinks>(&request) {
                        Ok(out) => {
                            let (extra, mut w) = sanitize(&out.value.links, units, intents);
                            warnings.append(&mut w);
                            for l in extra {
                                if !links.contains(&l) {
                                    links.push(l);
                                }
                            }
                        }
                        Err(Error::Schema { message, .. }) => {
                            warnings.push(format!("link repair answer unusable: {message}"))
                        }
                        Err(e) => return Err(e),
                    }
                }
            }
            Err(Error::Schema { message, .. }) => {
                warnings.push(format!("linker answer unusable, using lexical links: {message}"));
            }
            Err(e) => return Err(e),
        }
        let fallback = fallback_links(body, units, intents, &mut links);
        if !fallback.is_empty() {
            warnings.push(format!("{} link(s) added by lexical fallback", fallback.len()));
        }
        sort_links(units, intents, &mut links);
        let report = validate_link_graph(units, intents, &links);
        if !report.is_empty() {
            return Err(Error::invalid_report("link graph is incomplete", report));
        }
        Ok(Linking {
            links,
            warnings,
            repair_round,
            fallback,
        })
    }

    /// Rewrite the units linked to `intent_id` so they realize `new_value`.
    /// Only linked units may change; an answer touching others is re-prompted
    /// once, then rejected with [`Error::Scope`].
    pub fn rewrite_for_intent(
        &self,
        body: &str,
        units: &[CommunicativeUnit],
        intents: &[Intent],
        links: &[UnitIntentLink],
        intent_id: &IntentId,
        new_value: &str,
    ) -> Result<RewriteResult> {
        let intent = intents
            .iter()
            .find(|i| &i.intent_id == intent_id)
            .ok_or_else(|| Error::not_found("intent", intent_id.as_str()))?;
        let new_value = new_value.trim();
        if new_value.is_empty() {
            return Err(Error::validation("new intent value is empty"));
        }
        let mut result = RewriteResult {
            intent_id: intent_id.clone(),
            new_value: new_value.to_owned(),
            replacements: Vec::new(),
            body: body.to_owned(),
            rationale_summary: String::new(),
        };
        if new_value == intent.current_value {
            return Ok(result);
        }
        let linked: BTreeSet<&UnitId> = links.iter().filter(|l| &l.intent_id == intent_id).map(|l| &l.unit_id).collect();
        if linked.is_empty() {
            return Err(Error::validation(format!("intent {intent_id} has no linked units")));
        }
        let linked_list = units
            .iter()
            .filter(|u| linked.contains(&u.unit_id))
            .map(|u| u.unit_id.as_str())
            .collect::<Vec<_>>()
            .join(", ");
        let prompt = self.gateway.render(
            AgentName::IntentRewriter,
            &[
                ("intent_type", &intent.intent_type),
                ("current_value", &intent.current_value),
                ("new_value", new_value),
                ("linked_units", &linked_list),
                ("units", &describe_units(body, units)),
                ("body", body),
            ],
        )?;
        let mut request = self.gateway.request(AgentName::IntentRewriter, prompt.clone());
        let mut attempt = 0;
        let proposal = loop {
            let out: ProposedRewrite = self.gateway.complete_structured(&request)?.value;
            let outside: Vec<String> = out
                .replacements
                .iter()
                .map(|r| r.unit_id.trim())
                .filter(|id| !linked.iter().any(|l| l.as_str() == *id))
                .map(str::to_owned)
                .collect();
            if outside.is_empty() {
                break out;
            }
            if attempt > 0 {
                return Err(Error::Scope { unit_ids: outside });
            }
            tracing::warn!(?outside, "rewrite left its scope; re-prompting");
            request.prompt = retry_prompt(
                &prompt,
                &format!("you changed units {} but only {linked_list} may be changed", outside.join(", ")),
            );
            attempt += 1;
        };
        for r in &proposal.replacements {
            let unit = units
                .iter()
                .find(|u| u.unit_id.as_str() == r.unit_id.trim())
                .expect("in-scope units exist");
            let content = trim_span(body, unit.span);
            let new_text = normalize_newlines(r.new_text.trim());
            if slice(body, content) == Some(new_text.as_str()) {
                continue;
            }
            result.replacements.push(Replacement {
                unit_id: unit.unit_id.clone(),
                span: content,
                new_text,
            });
        }
        result.replacements.sort_by_key(|r| r.span.start);
        result.body = apply_replacements(body, &result.replacements)?;
        result.rationale_summary = proposal.rationale_summary.trim().to_owned();
        Ok(result)
    }

    /// Carry an anchor's factors over to `target`. A target equal to the
    /// anchor's source task (ignoring whitespace) returns the configuration
    /// unchanged without consulting the agent.
    pub fn adapt_anchor(&self, anchor: &Anchor, target: &TaskContext) -> Result<AdaptedFactorSet> {
        target.validate()?;
        let kept = |sel: &FactorSelection, note: &str| AdaptedFactor {
            factor_id: sel.factor_id.clone(),
            status: AdaptStatus::Kept,
            selection: sel.clone(),
            original: sel.clone(),
            note: note.to_owned(),
        };
        if anchor.source_task.same_task(target) {
            return Ok(AdaptedFactorSet {
                anchor_id: anchor.anchor_id.clone(),
                entries: anchor.factor_configuration.iter().map(|s| kept(s, "same task")).collect(),
                identity: true,
                warnings: Vec::new(),
            });
        }
        let factors = anchor
            .factor_configuration
            .iter()
            .map(|s| {
                format!(
                    "- {}: option={}; elaboration={}",
                    s.factor_id,
                    s.selected_option.as_deref().unwrap_or("null"),
                    s.elaboration.as_deref().unwrap_or("null")
                )
            })
            .collect::<Vec<_>>()
            .join("\n");
        let prompt = self.gateway.render(
            AgentName::AnchorAdapter,
            &[
                ("source_task", &anchor.source_task.task_description),
                ("target_task", &target.task_description),
                ("factors", &factors),
            ],
        )?;
        let out: AdaptedFactors = self
            .gateway
            .complete_structured(&self.gateway.request(AgentName::AnchorAdapter, prompt))?
            .value;
        let mut warnings = Vec::new();
        let mut entries = Vec::with_capacity(anchor.factor_configuration.len());
        for original in &anchor.factor_configuration {
            let mut answers = out.entries.iter().filter(|e| e.factor_id.trim() == original.factor_id.as_str());
            let Some(answer) = answers.next() else {
                warnings.push(format!("`{}` missing from adaptation; kept", original.factor_id));
                entries.push(kept(original, "unmodified by adaptation"));
                continue;
            };
            if answers.next().is_some() {
                warnings.push(format!("`{}` answered more than once; first answer used", original.factor_id));
            }
            let note = answer.note.trim().to_owned();
            let entry = match answer.status {
                RawAdaptStatus::Kept => kept(original, &note),
                RawAdaptStatus::Transformed => {
                    let clean = |v: &Option<String>| v.as_deref().map(str::trim).filter(|s| !s.is_empty()).map(str::to_owned);
                    let selection = FactorSelection {
                        factor_id: original.factor_id.clone(),
                        selected_option: clean(&answer.selected_option),
                        elaboration: clean(&answer.elaboration),
                        skipped: false,
                    };
                    if selection.check().is_err() {
                        warnings.push(format!("`{}` transformed to nothing; kept", original.factor_id));
                        kept(original, "unmodified by adaptation")
                    } else if &selection == original {
                        kept(original, &note)
                    } else {
                        AdaptedFactor {
                            factor_id: original.factor_id.clone(),
                            status: AdaptStatus::Transformed,
                            selection,
                            original: original.clone(),
                            note,
                        }
                    }
                }
            };
            entries.push(entry);
        }
        for extra in &out.entries {
            if !anchor.factor_configuration.iter().any(|s| s.factor_id.as_str() == extra.factor_id.trim()) {
                warnings.push(format!("adaptation mentioned `{}`, which the anchor lacks; ignored", extra.factor_id.trim()));
            }
        }
        Ok(AdaptedFactorSet {
            anchor_id: anchor.anchor_id.clone(),
            entries,
            identity: false,
            warnings,
        })
    }

    pub fn name_anchor(&self, kind: AnchorKind, task: &TaskContext, selections: &[FactorSelection]) -> Result<String> {
        let category = match kind {
            AnchorKind::Persona => FactorCategory::Persona,
            AnchorKind::Situation => FactorCategory::Situation,
        };
        let factors = self.catalog.render_category(selections, category).replace("; ", "\n");
        let kind_name = match kind {
            AnchorKind::Persona => "persona",
            AnchorKind::Situation => "situation",
        };
        let prompt = self.gateway.render(
            AgentName::AnchorNamer,
            &[("kind", kind_name), ("task", &task.task_description), ("factors", or_none(&factors))],
        )?;
        let out: AnchorNameOutput = self
            .gateway
            .complete_structured(&self.gateway.request(AgentName::AnchorNamer, prompt))?
            .value;
        Ok(out.name.trim().to_owned())
    }

    /// Distill a manual edit into a stylebook record. The record id is left
    /// empty; the store assigns one on insert.
    pub fn analyze_edit(&self, event: &EditEvent, ctx: &EditContext) -> Result<StylebookRecord> {
        if whitespace_normalized(&event.original_text) == whitespace_normalized(&event.revised_text) {
            return Err(Error::NoOpEdit);
        }
        let user_rationale = event
            .user_rationale
            .as_deref()
            .map(str::trim)
            .filter(|r| !r.is_empty());
        let prompt = self.gateway.render(
            AgentName::EditAnalyzer,
            &[
                ("original", &event.original_text),
                ("revised", &event.revised_text),
                ("rationale", user_rationale.unwrap_or("(not given)")),
                ("receiver", or_none(&ctx.receiver_summary)),
                ("occasion", or_none(&ctx.occasion_summary)),
            ],
        )?;
        let out: EditAnalysis = self
            .gateway
            .complete_structured(&self.gateway.request(AgentName::EditAnalyzer, prompt))?
            .value;
        let (rationale, rationale_origin) = match user_rationale {
            Some(r) => (r.to_owned(), RationaleOrigin::UserProvided),
            None => (out.rationale.trim().to_owned(), RationaleOrigin::AgentInferred),
        };
        Ok(StylebookRecord {
            record_id: RecordId::default(),
            modification_name: out.modification_name.trim().to_owned(),
            original_text: event.original_text.clone(),
            revised_text: event.revised_text.clone(),
            rationale,
            rationale_origin,
            receiver_description: out.receiver_description.trim().to_owned(),
            occasion_description: out.occasion_description.trim().to_owned(),
            created_at: event.timestamp,
            usage_count: 0,
            acceptance_count: 0,
        })
    }

    /// Rewrite the passage at `target` following `record`. A selection that
    /// cuts through a word is widened to whole sentences first. Usage
    /// counters are not touched here.
    pub fn apply_quickfix(&self, body: &str, target: Span, record: &StylebookRecord) -> Result<QuickFixOutcome> {
        if target.is_empty() {
            return Err(Error::validation("quick fix target span is empty"));
        }
        if !target.is_within(char_len(body)) {
            return Err(Error::validation(format!("quick fix target {target} is outside the body")));
        }
        let mut span = target;
        let extended = splits_word(body, target.start) || splits_word(body, target.end);
        if extended {
            span = sentence_bounds(body, target);
        }
        span = trim_span(body, span);
        if span.is_empty() {
            return Err(Error::validation("quick fix target contains only whitespace"));
        }
        let selected = slice(body, span).expect("span checked");
        let prompt = self.gateway.render(
            AgentName::QuickfixRewriter,
            &[
                ("modification_name", &record.modification_name),
                ("rationale", &record.rationale),
                ("record_original", &record.original_text),
                ("record_revised", &record.revised_text),
                ("selected", selected),
                ("body", body),
            ],
        )?;
        let out: QuickFixProposal = self
            .gateway
            .complete_structured(&self.gateway.request(AgentName::QuickfixRewriter, prompt))?
            .value;
        let proposed_text = normalize_newlines(out.proposed_text.trim());
        let new_body = crate::domain::replace(body, span, &proposed_text).expect("span checked");
        Ok(QuickFixOutcome {
            span,
            extended,
            proposed_text,
            body: new_body,
            rationale_summary: out.rationale_summary.trim().to_owned(),
        })
    }

    /// Ask the reranking agent to reorder `candidates`. Unknown ids are
    /// ignored and omitted candidates keep their relative order at the end.
    pub fn rerank(&self, selected: &str, candidates: &[StylebookRecord]) -> Result<Vec<RecordId>> {
        if candidates.len() < 2 {
            return Ok(candidates.iter().map(|r| r.record_id.clone()).collect());
        }
        let listing = candidates
            .iter()
            .map(|r| {
                format!(
                    "- {}: {} (before: {} / after: {})",
                    r.record_id,
                    r.modification_name,
                    r.original_text.replace('\n', "\\n"),
                    r.revised_text.replace('\n', "\\n")
                )
            })
            .collect::<Vec<_>>()
            .join("\n");
        let prompt = self
            .gateway
            .render(AgentName::RetrievalReranker, &[("selected", selected), ("candidates", &listing)])?;
        let out: RerankOutput = self
            .gateway
            .complete_structured(&self.gateway.request(AgentName::RetrievalReranker, prompt))?
            .value;
        let mut order: Vec<RecordId> = Vec::with_capacity(candidates.len());
        for id in out.record_ids {
            let id = RecordId::new(id.trim());
            if candidates.iter().any(|r| r.record_id == id) && !order.contains(&id) {
                order.push(id);
            }
        }
        for r in candidates {
            if !order.contains(&r.record_id) {
                order.push(r.record_id.clone());
            }
        }
        Ok(order)
    }
}

fn or_none(text: &str) -> &str {
    if text.trim().is_empty() {
        "(none)"
    } else {
        text
    }
}

fn join_ids<'a>(ids: impl Iterator<Item = &'a str>) -> String {
    let v: Vec<&str> = ids.collect();
    if v.is_empty() {
        "none".into()
    } else {
        v.join(", ")
    }
}
