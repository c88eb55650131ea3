//! Prompt-based agents and the gateway they talk through.
//!
//! Every agent renders a versioned template, sends it through the
//! [`Gateway`], and receives a schema-checked JSON answer. Outputs are then
//! normalized (segmentation repair, link fallback, scope enforcement) before
//! anything downstream sees them.

mod gateway;
pub mod link;
pub mod live;
mod pipeline;
pub mod schema;
pub mod segment;
mod templates;
pub mod transcript;

pub use gateway::{
    extract_json, parse_output, retry_prompt, AgentRequest, ChatCall, Completion, Gateway, GatewaySettings,
    LlmClient, SchemaId, StructuredOutput,
};
pub use pipeline::{
    apply_replacements, reoffset_units, AdaptStatus, AdaptedFactor, AdaptedFactorSet, EditContext, Extraction, Linking,
    Pipeline, PipelineOptions, QuickFixOutcome, Replacement, RewriteResult,
};
pub use schema::*;
pub use templates::{Template, TemplateSet};
pub use transcript::{
    fingerprint, normalize_prompt, MockClient, MockTranscript, NetworkGuard, RecordingClient, ScriptedClient,
};

use serde::{Deserialize, Serialize};
use std::fmt;

/// Registered agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentName {
    FactorCurator,
    DraftGenerator,
    IntentAnalyzer,
    UnitExtractor,
    UnitIntentLinker,
    IntentRewriter,
    AnchorAdapter,
    AnchorNamer,
    EditAnalyzer,
    QuickfixRewriter,
    RetrievalReranker,
}

impl AgentName {
    pub const ALL: [AgentName; 11] = [
        AgentName::FactorCurator,
        AgentName::DraftGenerator,
        AgentName::IntentAnalyzer,
        AgentName::UnitExtractor,
        AgentName::UnitIntentLinker,
        AgentName::IntentRewriter,
        AgentName::AnchorAdapter,
        AgentName::AnchorNamer,
        AgentName::EditAnalyzer,
        AgentName::QuickfixRewriter,
        AgentName::RetrievalReranker,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentName::FactorCurator => "factor_curator",
            AgentName::DraftGenerator => "draft_generator",
            AgentName::IntentAnalyzer => "intent_analyzer",
            AgentName::UnitExtractor => "unit_extractor",
            AgentName::UnitIntentLinker => "unit_intent_linker",
            AgentName::IntentRewriter => "intent_rewriter",
            AgentName::AnchorAdapter => "anchor_adapter",
            AgentName::AnchorNamer => "anchor_namer",
            AgentName::EditAnalyzer => "edit_analyzer",
            AgentName::QuickfixRewriter => "quickfix_rewriter",
            AgentName::RetrievalReranker => "retrieval_reranker",
        }
    }

    pub fn parse(name: &str) -> Option<AgentName> {
        Self::ALL.into_iter().find(|a| a.as_str() == name)
    }

    pub fn schema(self) -> SchemaId {
        match self {
            AgentName::FactorCurator => SchemaId::CuratedFactors,
            AgentName::DraftGenerator => SchemaId::GeneratedDraft,
            AgentName::IntentAnalyzer => SchemaId::AnalyzedIntents,
            AgentName::UnitExtractor => SchemaId::ExtractedUnits,
            AgentName::UnitIntentLinker => SchemaId::ProposedLinks,
            AgentName::IntentRewriter => SchemaId::ProposedRewrite,
            AgentName::AnchorAdapter => SchemaId::AdaptedFactors,
            AgentName::AnchorNamer => SchemaId::AnchorName,
            AgentName::EditAnalyzer => SchemaId::EditAnalysis,
            AgentName::QuickfixRewriter => SchemaId::QuickFixProposal,
            AgentName::RetrievalReranker => SchemaId::Rerank,
        }
    }

    /// Agents that write prose run warm; structure extraction runs at zero.
    pub fn is_generative(self) -> bool {
        matches!(
            self,
            AgentName::DraftGenerator | AgentName::IntentRewriter | AgentName::QuickfixRewriter | AgentName::AnchorNamer
        )
    }
}

impl fmt::Display for AgentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
