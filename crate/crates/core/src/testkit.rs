//! A deterministic stand-in for the language model.
//!
//! [`SyntheticClient`] reads the rendered prompt and answers every agent
//! with a valid, prompt-dependent response. It exists for tests, fuzzing and
//! demos; it writes nothing worth sending.

use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::agents::{AgentName, ChatCall, Gateway, LlmClient, Pipeline, PipelineOptions};
use crate::catalog::Catalog;
use crate::clock::LogicalClock;
use crate::domain::RECOMMENDED_UNIT_LABELS;
use crate::error::GatewayError;
use crate::service::ComposeService;
use crate::store::ReuseStore;
use std::sync::Arc;

#[derive(Debug, Default)]
pub struct SyntheticClient {
    calls: AtomicUsize,
}

impl SyntheticClient {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

fn seed(prompt: &str) -> u64 {
    let digest = Sha256::digest(prompt.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn between<'a>(text: &'a str, open: &str, close: &str) -> Option<&'a str> {
    let start = text.find(open)? + open.len();
    let end = text[start..].find(close)? + start;
    Some(&text[start..end])
}

fn line_value<'a>(prompt: &'a str, key: &str) -> &'a str {
    prompt
        .lines()
        .find_map(|l| l.strip_prefix(key))
        .map(str::trim)
        .unwrap_or("")
}

fn email(prompt: &str) -> &str {
    between(prompt, "<email>\n", "\n</email>").unwrap_or("")
}

/// `- id [label]: text` and `- id [type, value]` lines.
fn listed(prompt: &str, prefix: char) -> Vec<(String, String)> {
    prompt
        .lines()
        .filter_map(|l| {
            let rest = l.strip_prefix("- ")?;
            let (id, tail) = rest.split_once(' ')?;
            let mut chars = id.chars();
            if chars.next()? != prefix || !chars.all(|c| c.is_ascii_digit()) {
                return None;
            }
            Some((id.to_owned(), tail.to_owned()))
        })
        .collect()
}

const TOPICS: [&str; 6] = [
    "I wanted to follow up on the points we discussed last week.",
    "The timeline we agreed on no longer works for me, and I would like to explain why.",
    "I appreciate the support you have given me throughout this project.",
    "There are a few details I would like to clarify before we move forward.",
    "I have attached a short summary so the context is easy to review.",
    "Your perspective on this would help me decide on the next step.",
];

fn draft(prompt: &str) -> String {
    let s = seed(prompt);
    let task = line_value(prompt, "Task:");
    let recipient = match line_value(prompt, "Recipient:") {
        "" | "(not given)" => "there",
        r => r,
    };
    let mut parts = vec![format!("Dear {recipient},"), format!("I am writing regarding the following: {task}")];
    let n = 1 + (s % 3) as usize;
    for i in 0..n {
        parts.push(TOPICS[(s as usize / 7 + i * 5) % TOPICS.len()].to_owned());
    }
    parts.push("Could you let me know what you think when you have a moment?".into());
    parts.push("Best regards,\nAlex".into());
    parts.join("\n\n")
}

fn units(body: &str) -> Value {
    let mut out = Vec::new();
    let mut rest = body;
    let mut i = 0;
    while !rest.is_empty() {
        let cut = rest.find("\n\n").map_or(rest.len(), |p| {
            let after = &rest[p..];
            p + after.len() - after.trim_start_matches('\n').len()
        });
        let label = if i == 0 {
            RECOMMENDED_UNIT_LABELS[0]
        } else if cut == rest.len() {
            RECOMMENDED_UNIT_LABELS[4]
        } else {
            RECOMMENDED_UNIT_LABELS[1 + (i - 1) % 3]
        };
        out.push(json!({"label": label, "text": &rest[..cut]}));
        rest = &rest[cut..];
        i += 1;
    }
    json!({ "units": out })
}

fn respond(call: &ChatCall<'_>) -> Value {
    let prompt = call.prompt;
    match call.agent {
        AgentName::FactorCurator => {
            let factors: Vec<Value> = prompt
                .lines()
                .filter_map(|l| {
                    let rest = l.strip_prefix("- ")?;
                    let (id, tail) = rest.split_once(" (")?;
                    let options: Vec<&str> = tail.split("Default options: ").nth(1)?.split(" | ").take(3).collect();
                    Some(json!({"factor_id": id, "suggested_options": options, "rationale": "relevant to the task"}))
                })
                .take(8)
                .collect();
            json!({ "factors": factors })
        }
        AgentName::DraftGenerator => json!({ "body": draft(prompt) }),
        AgentName::IntentAnalyzer => json!({
            "intents": [
                {"intent_type": "Opening Strategy", "current_value": "Warm and personal", "alternative_values": ["Direct and brief", "Formal and reserved", "Apologetic"]},
                {"intent_type": "Request Framing", "current_value": "Polite question", "alternative_values": ["Firm deadline", "Open invitation"]},
                {"intent_type": "Relationship Signal", "current_value": "Appreciative", "alternative_values": ["Neutral", "Deferential"]}
            ]
        }),
        AgentName::UnitExtractor => units(email(prompt)),
        AgentName::UnitIntentLinker => {
            let units = listed(prompt, 'u');
            let intents = listed(prompt, 'i');
            let mut links = Vec::new();
            for (k, (u, _)) in units.iter().enumerate() {
                if !intents.is_empty() {
                    links.push(json!({"unit_id": u, "intent_id": intents[k % intents.len()].0}));
                }
            }
            for (k, (i, _)) in intents.iter().enumerate().skip(units.len()) {
                links.push(json!({"unit_id": units[k % units.len().max(1)].0, "intent_id": i}));
            }
            json!({ "links": links })
        }
        AgentName::IntentRewriter => {
            let linked: Vec<&str> = line_value(prompt, "Linked units:").split(", ").collect();
            let new_value = line_value(prompt, "New value:");
            let units = listed(prompt, 'u');
            let target = linked.first().copied().unwrap_or("u1");
            let text = units
                .iter()
                .find(|(id, _)| id == target)
                .and_then(|(_, tail)| tail.split_once("]: ").map(|(_, t)| t.replace("\\n", "\n")))
                .unwrap_or_default();
            json!({
                "replacements": [{"unit_id": target, "new_text": format!("{} [{}]", text.trim(), new_value)}],
                "rationale_summary": format!("Adjusted toward {new_value}.")
            })
        }
        AgentName::AnchorAdapter => {
            let entries: Vec<Value> = prompt
                .lines()
                .filter_map(|l| l.strip_prefix("- ")?.split_once(": option="))
                .enumerate()
                .map(|(k, (id, _))| {
                    if k == 0 {
                        json!({"factor_id": id, "status": "transformed", "elaboration": "adjusted for the new task", "note": "fits the new purpose"})
                    } else {
                        json!({"factor_id": id, "status": "kept", "note": "still applies"})
                    }
                })
                .collect();
            json!({ "entries": entries })
        }
        AgentName::AnchorNamer => json!({ "name": format!("Saved {} profile", line_value(prompt, "Suggest a short descriptive name (2 to 5 words) for a saved").split(' ').next().unwrap_or("tone")) }),
        AgentName::EditAnalyzer => json!({
            "modification_name": "Prefer the revised wording",
            "rationale": "The revision reads better for this reader.",
            "receiver_description": "the same kind of recipient",
            "occasion_description": "a similar request"
        }),
        AgentName::QuickfixRewriter => {
            let selected = between(prompt, "Selected passage:\n", "\n\n<email>").unwrap_or("").trim();
            let before = line_value(prompt, "  before:");
            let after = line_value(prompt, "  after:");
            let proposed = if !before.is_empty() && selected.contains(before) {
                selected.replace(before, after)
            } else {
                format!("{selected} (revised)")
            };
            json!({ "proposed_text": proposed, "rationale_summary": "Applied the saved rule." })
        }
        AgentName::RetrievalReranker => {
            let ids: Vec<&str> = prompt
                .lines()
                .filter_map(|l| l.strip_prefix("- ")?.split_once(':').map(|(id, _)| id))
                .collect();
            json!({ "record_ids": ids })
        }
    }
}

impl LlmClient for SyntheticClient {
    fn complete(&self, call: &ChatCall<'_>) -> Result<String, GatewayError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(respond(call).to_string())
    }
}

/// A service over `client` with the builtin catalog, a logical clock and the
/// given store.
pub fn service_with(client: Arc<dyn LlmClient>, store: Arc<ReuseStore>) -> ComposeService {
    let gateway = Arc::new(Gateway::with_client(client));
    let pipeline = Pipeline::new(gateway, Arc::new(Catalog::builtin()), PipelineOptions::default())
        .expect("default options are valid");
    ComposeService::new(pipeline, store, Arc::new(LogicalClock::new()))
}

/// A synthetic service over an in-memory store.
pub fn synthetic_service() -> ComposeService {
    service_with(Arc::new(SyntheticClient::new()), Arc::new(ReuseStore::in_memory()))
}
