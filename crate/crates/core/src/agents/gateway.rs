use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use super::templates::TemplateSet;
use super::AgentName;
use crate::error::GatewayError;
use crate::{Error, Result};

/// One prompt sent to the provider.
#[derive(Debug, Clone, Copy)]
pub struct ChatCall<'a> {
    pub agent: AgentName,
    pub prompt: &'a str,
    pub temperature: f32,
}

/// A language-model provider. Implementations must be safe to share across
/// threads; the pipeline issues concurrent calls for independent agents.
pub trait LlmClient: Send + Sync {
    fn complete(&self, call: &ChatCall<'_>) -> Result<String, GatewayError>;
}

impl<T: LlmClient + ?Sized> LlmClient for Arc<T> {
    fn complete(&self, call: &ChatCall<'_>) -> Result<String, GatewayError> {
        (**self).complete(call)
    }
}

/// Identifies the JSON shape an agent must answer with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaId {
    CuratedFactors,
    GeneratedDraft,
    AnalyzedIntents,
    ExtractedUnits,
    ProposedLinks,
    ProposedRewrite,
    AdaptedFactors,
    AnchorName,
    EditAnalysis,
    QuickFixProposal,
    Rerank,
}

/// Typed agent output. `check` runs after JSON decoding; an `Err` sends the
/// message back to the agent on the next attempt.
pub trait StructuredOutput: DeserializeOwned {
    const SCHEMA: SchemaId;
    fn check(&self) -> Result<(), String>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRequest {
    pub agent_name: AgentName,
    pub prompt: String,
    pub output_schema: SchemaId,
    pub temperature_hint: f32,
    pub max_retries: u32,
}

impl AgentRequest {
    pub fn validate(&self) -> Result<()> {
        if self.output_schema != self.agent_name.schema() {
            return Err(Error::validation(format!(
                "agent {} answers with {:?}, not {:?}",
                self.agent_name,
                self.agent_name.schema(),
                self.output_schema
            )));
        }
        if self.prompt.trim().is_empty() {
            return Err(Error::validation("agent prompt is empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Completion<T> {
    pub value: T,
    /// Number of re-prompts needed; 0 when the first answer was valid.
    pub retry_count: u32,
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewaySettings {
    pub max_retries: u32,
    pub generation_temperature: f32,
    pub structure_temperature: f32,
}

impl Default for GatewaySettings {
    fn default() -> Self {
        GatewaySettings {
            max_retries: 2,
            generation_temperature: 0.7,
            structure_temperature: 0.0,
        }
    }
}

/// Prompt sent after an invalid answer.
pub fn retry_prompt(original: &str, problem: &str) -> String {
    format!(
        "{original}\n\nYour previous reply could not be used: {problem}\nReply again with a single JSON object in the required format and nothing else."
    )
}

/// Pull the JSON object out of a reply that may be wrapped in prose or a
/// fenced code block.
pub fn extract_json(raw: &str) -> &str {
    let trimmed = raw.trim();
    match (trimmed.find('{'), trimmed.rfind('}')) {
        (Some(start), Some(end)) if start < end => &trimmed[start..=end],
        _ => trimmed,
    }
}

pub fn parse_output<T: StructuredOutput>(raw: &str) -> Result<T, String> {
    let value: T = serde_json::from_str(extract_json(raw)).map_err(|e| format!("invalid JSON for {:?}: {e}", T::SCHEMA))?;
    value.check()?;
    Ok(value)
}

/// Enforces structured output with bounded re-prompting on top of an
/// [`LlmClient`], and renders agent prompts from the template set.
pub struct Gateway {
    client: Arc<dyn LlmClient>,
    templates: TemplateSet,
    settings: GatewaySettings,
    attempts: AtomicU64,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("settings", &self.settings)
            .field("attempts", &self.attempts.load(Ordering::Relaxed))
            .finish_non_exhaustive()
    }
}

impl Gateway {
    pub fn new(client: Arc<dyn LlmClient>, templates: TemplateSet, settings: GatewaySettings) -> Self {
        Gateway {
            client,
            templates,
            settings,
            attempts: AtomicU64::new(0),
        }
    }

    /// Gateway with the built-in templates and default settings.
    pub fn with_client(client: Arc<dyn LlmClient>) -> Self {
        Self::new(client, TemplateSet::builtin(), GatewaySettings::default())
    }

    pub fn settings(&self) -> &GatewaySettings {
        &self.settings
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    /// Provider calls made so far, retries included.
    pub fn attempts(&self) -> u64 {
        self.attempts.load(Ordering::Relaxed)
    }

    pub fn render(&self, agent: AgentName, vars: &[(&str, &str)]) -> Result<String> {
        self.templates.render(agent, vars)
    }

    /// Request with the agent's schema, default temperature and retry budget.
    pub fn request(&self, agent: AgentName, prompt: String) -> AgentRequest {
        let temperature_hint = if agent.is_generative() {
            self.settings.generation_temperature
        } else {
            self.settings.structure_temperature
        };
        AgentRequest {
            agent_name: agent,
            prompt,
            output_schema: agent.schema(),
            temperature_hint,
            max_retries: self.settings.max_retries,
        }
    }

    /// Send `request` and decode the answer as `T`. Invalid answers are
    /// re-prompted with the problem appended, at most `max_retries` times;
    /// transport failures are returned immediately.
    pub fn complete_structured<T: StructuredOutput>(&self, request: &AgentRequest) -> Result<Completion<T>> {
        request.validate()?;
        if T::SCHEMA != request.output_schema {
            return Err(Error::validation(format!(
                "request expects {:?} but caller decodes {:?}",
                request.output_schema,
                T::SCHEMA
            )));
        }
        let mut prompt = request.prompt.clone();
        let mut last_problem = String::new();
        let mut last_raw = String::new();
        for attempt in 0..=request.max_retries {
            let call = ChatCall {
                agent: request.agent_name,
                prompt: &prompt,
                temperature: request.temperature_hint,
            };
            self.attempts.fetch_add(1, Ordering::Relaxed);
            let raw = self.client.complete(&call)?;
            match parse_output::<T>(&raw) {
                Ok(value) => {
                    return Ok(Completion {
                        value,
                        retry_count: attempt,
                        raw,
                    })
                }
                Err(problem) => {
                    tracing::debug!(agent = %request.agent_name, attempt, %problem, "agent output rejected");
                    prompt = retry_prompt(&request.prompt, &problem);
                    last_problem = problem;
                    last_raw = raw;
                }
            }
        }
        Err(Error::Schema {
            agent: request.agent_name.to_string(),
            attempts: request.max_retries + 1,
            message: last_problem,
            last_raw,
        })
    }
}
