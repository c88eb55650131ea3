//! The tone-factor taxonomy: eight persona factors tied to the
//! writer-recipient relationship and six situation factors tied to the
//! occasion. Curation picks a task-relevant subset with tailored options.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::agents::{AgentName, CuratedFactors, Gateway};
use crate::domain::{
    FactorCategory, FactorDefinition, FactorId, FactorPrompt, FactorSelection, Issue, TaskContext,
    ValidationReport,
};
use crate::{Error, Result};

const BUILTIN_CATALOG: &str = include_str!("../data/catalog.json");

/// Default lower bound on the number of curated factors.
pub const DEFAULT_MIN_FACTORS: usize = 6;

/// Baseline entries every catalog must carry, in canonical order.
pub const BASELINE_FACTORS: [(&str, FactorCategory); 14] = [
    ("Relationship Type", FactorCategory::Persona),
    ("Familiarity", FactorCategory::Persona),
    ("Power/Status", FactorCategory::Persona),
    ("Gender Dynamics", FactorCategory::Persona),
    ("Personality Traits", FactorCategory::Persona),
    ("Relationship Needs", FactorCategory::Persona),
    ("Age", FactorCategory::Persona),
    ("Cultural Context", FactorCategory::Persona),
    ("Emotional Intent", FactorCategory::Situation),
    ("Competing Goals", FactorCategory::Situation),
    ("Promptness", FactorCategory::Situation),
    ("Communication Purpose", FactorCategory::Situation),
    ("Occasion", FactorCategory::Situation),
    ("Avoid Negative Consequence", FactorCategory::Situation),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Catalog {
    pub version: u32,
    pub factors: Vec<FactorDefinition>,
}

/// Result of factor curation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Curation {
    pub prompts: Vec<FactorPrompt>,
    pub warnings: Vec<String>,
}

impl Catalog {
    /// The catalog shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_CATALOG).expect("builtin catalog is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("reading catalog {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let catalog: Catalog =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("catalog: {e}")))?;
        catalog.check()?;
        Ok(catalog)
    }

    /// Ids must be unique, every entry needs options, and the baseline
    /// entries must be present in canonical order with matching categories.
    /// Deployments may append further factors after the baseline.
    fn check(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for f in &self.factors {
            if !ids.insert(f.factor_id.as_str()) {
                return Err(Error::Config(format!("duplicate factor id {}", f.factor_id)));
            }
            if f.source_options.is_empty() {
                return Err(Error::Config(format!("factor {} has no options", f.factor_id)));
            }
        }
        if self.factors.len() < BASELINE_FACTORS.len() {
            return Err(Error::Config("catalog is missing baseline factors".into()));
        }
        for (def, (name, category)) in self.factors.iter().zip(BASELINE_FACTORS) {
            if def.name != name || def.category != category {
                return Err(Error::Config(format!(
                    "baseline factor mismatch: expected {name} ({category}), found {} ({})",
                    def.name, def.category
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, id: &FactorId) -> Option<&FactorDefinition> {
        self.factors.iter().find(|f| &f.factor_id == id)
    }

    fn index_of(&self, id: &FactorId) -> Option<usize> {
        self.factors.iter().position(|f| &f.factor_id == id)
    }

    /// Catalog entries in canonical order, optionally restricted to one
    /// category.
    pub fn list_factors(&self, category: Option<FactorCategory>) -> Vec<&FactorDefinition> {
        self.factors
            .iter()
            .filter(|f| category.is_none_or(|c| f.category == c))
            .collect()
    }

    /// Sort key placing persona factors before situation factors and
    /// catalog order within a category.
    fn order_key(&self, id: &FactorId) -> (FactorCategory, usize) {
        let idx = self.index_of(id).unwrap_or(usize::MAX);
        let cat = self
            .factors
            .get(idx)
            .map(|f| f.category)
            .unwrap_or(FactorCategory::Situation);
        (cat, idx)
    }

    /// Every factor with its catalog options; used when curation is
    /// unavailable.
    pub fn fallback_prompts(&self) -> Vec<FactorPrompt> {
        let mut prompts: Vec<FactorPrompt> = self
            .factors
            .iter()
            .map(|f| FactorPrompt {
                factor_id: f.factor_id.clone(),
                suggested_options: f.source_options.clone(),
                rationale: None,
            })
            .collect();
        prompts.sort_by_key(|p| self.order_key(&p.factor_id));
        prompts
    }

    /// Lines describing the catalog for the curation prompt.
    pub fn describe(&self) -> String {
        self.factors
            .iter()
            .map(|f| {
                format!(
                    "- {} ({}; {}): {} Default options: {}",
                    f.factor_id,
                    f.name,
                    f.category,
                    f.description,
                    f.source_options.join(" | ")
                )
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Ask the curation agent for the factors relevant to `task`.
    ///
    /// Unknown or repeated factor ids are dropped with a warning. When fewer
    /// than `min_factors` remain, catalog factors are appended in canonical
    /// order with their default options.
    pub fn curate_factors(
        &self,
        task: &TaskContext,
        gateway: &Gateway,
        min_factors: usize,
    ) -> Result<Curation> {
        task.validate()?;
        let prompt = gateway.render(
            AgentName::FactorCurator,
            &[
                ("task", task.task_description.as_str()),
                ("recipient", task.recipient_hint.as_deref().unwrap_or("(not given)")),
                ("catalog", &self.describe()),
                ("min_factors", &min_factors.to_string()),
            ],
        )?;
        let request = gateway.request(AgentName::FactorCurator, prompt);
        let curated: CuratedFactors = gateway.complete_structured(&request)?.value;
        Ok(self.accept_curation(curated, min_factors))
    }

    pub(crate) fn accept_curation(&self, curated: CuratedFactors, min_factors: usize) -> Curation {
        let mut warnings = Vec::new();
        let mut seen = BTreeSet::new();
        let mut prompts = Vec::new();
        for entry in curated.factors {
            let id = FactorId::new(entry.factor_id.trim());
            if self.get(&id).is_none() {
                tracing::warn!(factor = %id, "curation returned an unknown factor; dropped");
                warnings.push(format!("dropped unknown factor `{id}`"));
                continue;
            }
            if !seen.insert(id.clone()) {
                warnings.push(format!("dropped repeated factor `{id}`"));
                continue;
            }
            let mut options: Vec<String> = Vec::new();
            for opt in entry.suggested_options {
                let opt = opt.trim().to_owned();
                if !opt.is_empty() && !options.contains(&opt) {
                    options.push(opt);
                }
            }
            prompts.push(FactorPrompt {
                factor_id: id,
                suggested_options: options,
                rationale: entry.rationale.filter(|r| !r.trim().is_empty()),
            });
        }
        let wanted = min_factors.min(self.factors.len());
        if prompts.len() < wanted {
            for f in &self.factors {
                if prompts.len() >= wanted {
                    break;
                }
                if seen.insert(f.factor_id.clone()) {
                    warnings.push(format!("added `{}` with default options", f.factor_id));
                    prompts.push(FactorPrompt {
                        factor_id: f.factor_id.clone(),
                        suggested_options: f.source_options.clone(),
                        rationale: None,
                    });
                }
            }
        }
        prompts.sort_by_key(|p| self.order_key(&p.factor_id));
        Curation { prompts, warnings }
    }

    /// Flags unknown factors, repeated factors and selections that break the
    /// skipped/present rule.
    pub fn validate_selections(&self, selections: &[FactorSelection]) -> ValidationReport {
        let mut report = ValidationReport::default();
        let mut seen = BTreeSet::new();
        for sel in selections {
            let id = sel.factor_id.0.clone();
            if self.get(&sel.factor_id).is_none() {
                report.push(Issue::UnknownFactor { factor_id: id.clone() });
            }
            if !seen.insert(id.clone()) {
                report.push(Issue::DuplicateFactor { factor_id: id.clone() });
            }
            if let Err(reason) = sel.check() {
                report.push(Issue::InvalidSelection { factor_id: id, reason });
            }
        }
        report
    }

    /// Deterministic prompt block: one line per answered factor in catalog
    /// order, `<Name>: <option>; note: <elaboration>` with absent parts left
    /// out. Skipped factors produce no line.
    pub fn render_factor_context(&self, selections: &[FactorSelection]) -> Result<String> {
        let report = self.validate_selections(selections);
        if !report.is_empty() {
            return Err(Error::invalid_report("factor selections are invalid", report));
        }
        let mut ordered: Vec<(usize, &FactorSelection)> = selections
            .iter()
            .filter(|s| !s.skipped)
            .map(|s| (self.index_of(&s.factor_id).unwrap_or(usize::MAX), s))
            .collect();
        ordered.sort_by_key(|(idx, _)| *idx);
        let lines: Vec<String> = ordered
            .into_iter()
            .map(|(idx, sel)| {
                let name = &self.factors[idx].name;
                let mut parts = Vec::new();
                if let Some(opt) = &sel.selected_option {
                    parts.push(opt.trim().to_owned());
                }
                if let Some(note) = &sel.elaboration {
                    parts.push(format!("note: {}", note.trim()));
                }
                format!("{name}: {}", parts.join("; "))
            })
            .collect();
        Ok(lines.join("\n"))
    }

    /// Render only the selections of one category; used for the receiver and
    /// occasion summaries attached to stylebook records.
    pub fn render_category(&self, selections: &[FactorSelection], category: FactorCategory) -> String {
        let filtered: Vec<FactorSelection> = selections
            .iter()
            .filter(|s| self.get(&s.factor_id).is_some_and(|f| f.category == category))
            .cloned()
            .collect();
        self.render_factor_context(&filtered)
            .unwrap_or_default()
            .replace('\n', "; ")
    }

    /// Known factor ids grouped by category, for anchors and tools.
    pub fn ids_by_category(&self) -> BTreeMap<FactorCategory, Vec<FactorId>> {
        let mut map: BTreeMap<FactorCategory, Vec<FactorId>> = BTreeMap::new();
        for f in &self.factors {
            map.entry(f.category).or_default().push(f.factor_id.clone());
        }
        map
    }
}
