//! Deterministic offline replay of agent calls.
//!
//! A transcript maps a request fingerprint to a canned response. The
//! fingerprint is the lowercase hex SHA-256 of
//!
//! ```text
//! <agent_name> 0x1F <normalized prompt>
//! ```
//!
//! where the prompt is normalized by converting line endings to `\n`,
//! stripping trailing whitespace from every line and trimming leading and
//! trailing blank lines. The algorithm is part of the file format and must
//! not change without bumping [`MockTranscript::VERSION`].

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, HashMap, VecDeque};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use super::{AgentName, ChatCall, LlmClient};
use crate::error::GatewayError;
use crate::{Error, Result};

pub fn normalize_prompt(prompt: &str) -> String {
    let text = crate::domain::normalize_newlines(prompt);
    let lines: Vec<&str> = text.lines().map(str::trim_end).collect();
    let first = lines.iter().position(|l| !l.is_empty()).unwrap_or(lines.len());
    let last = lines.iter().rposition(|l| !l.is_empty()).map_or(first, |i| i + 1);
    lines[first..last].join("\n")
}

pub fn fingerprint(agent: AgentName, prompt: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(agent.as_str().as_bytes());
    hasher.update([0x1f]);
    hasher.update(normalize_prompt(prompt).as_bytes());
    hex::encode(hasher.finalize())
}

/// Response payload: strings are returned verbatim, anything else is sent as
/// compact JSON.
fn response_text(value: &Value) -> String {
    match value {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub fingerprint: String,
    /// Informational; matching uses the fingerprint alone.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<AgentName>,
    pub response: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockTranscript {
    pub version: u32,
    pub entries: Vec<TranscriptEntry>,
}

impl Default for MockTranscript {
    fn default() -> Self {
        MockTranscript {
            version: Self::VERSION,
            entries: Vec::new(),
        }
    }
}

impl MockTranscript {
    pub const VERSION: u32 = 1;

    pub fn from_json(text: &str) -> Result<Self> {
        let t: MockTranscript = serde_json::from_str(text).map_err(|e| Error::Config(format!("transcript: {e}")))?;
        t.check()?;
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("reading transcript {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("transcript serializes");
        s.push('\n');
        s
    }

    pub fn check(&self) -> Result<()> {
        if self.version != Self::VERSION {
            return Err(Error::Config(format!("unsupported transcript version {}", self.version)));
        }
        let mut seen = std::collections::BTreeSet::new();
        for e in &self.entries {
            if !seen.insert(e.fingerprint.as_str()) {
                return Err(Error::Config(format!("duplicate transcript fingerprint {}", e.fingerprint)));
            }
        }
        Ok(())
    }

    pub fn insert(&mut self, agent: AgentName, prompt: &str, response: Value) {
        let fp = fingerprint(agent, prompt);
        self.entries.retain(|e| e.fingerprint != fp);
        self.entries.push(TranscriptEntry {
            fingerprint: fp,
            agent: Some(agent),
            response,
        });
    }
}

/// Answers from a transcript by fingerprint. Misses go to the optional
/// fallback client, or fail with [`GatewayError::TranscriptMiss`].
pub struct MockClient {
    responses: HashMap<String, String>,
    hits: Mutex<BTreeMap<String, usize>>,
    fallback: Option<Arc<dyn LlmClient>>,
}

impl MockClient {
    pub fn new(transcript: &MockTranscript) -> Self {
        MockClient {
            responses: transcript
                .entries
                .iter()
                .map(|e| (e.fingerprint.clone(), response_text(&e.response)))
                .collect(),
            hits: Mutex::new(BTreeMap::new()),
            fallback: None,
        }
    }

    pub fn with_fallback(mut self, fallback: Arc<dyn LlmClient>) -> Self {
        self.fallback = Some(fallback);
        self
    }

    /// Fingerprints served so far with their hit counts.
    pub fn hits(&self) -> BTreeMap<String, usize> {
        self.hits.lock().unwrap().clone()
    }
}

impl LlmClient for MockClient {
    fn complete(&self, call: &ChatCall<'_>) -> Result<String, GatewayError> {
        let fp = fingerprint(call.agent, call.prompt);
        if let Some(response) = self.responses.get(&fp) {
            *self.hits.lock().unwrap().entry(fp).or_default() += 1;
            return Ok(response.clone());
        }
        match &self.fallback {
            Some(client) => client.complete(call),
            None => Err(GatewayError::TranscriptMiss {
                agent: call.agent.to_string(),
                fingerprint: fp,
            }),
        }
    }
}

/// Wraps another client and records every exchange as transcript entries.
pub struct RecordingClient {
    inner: Arc<dyn LlmClient>,
    recorded: Mutex<MockTranscript>,
}

impl RecordingClient {
    pub fn new(inner: Arc<dyn LlmClient>) -> Self {
        RecordingClient {
            inner,
            recorded: Mutex::new(MockTranscript::default()),
        }
    }

    /// Entries grouped by agent in pipeline order. Within one agent calls
    /// are sequential, so the result does not depend on thread timing.
    pub fn transcript(&self) -> MockTranscript {
        let mut t = self.recorded.lock().unwrap().clone();
        t.entries
            .sort_by_key(|e| e.agent.and_then(|a| AgentName::ALL.iter().position(|x| *x == a)));
        t
    }
}

impl LlmClient for RecordingClient {
    fn complete(&self, call: &ChatCall<'_>) -> Result<String, GatewayError> {
        let response = self.inner.complete(call)?;
        let value = serde_json::from_str::<Value>(&response)
            .ok()
            .filter(Value::is_object)
            .unwrap_or_else(|| Value::String(response.clone()));
        self.recorded.lock().unwrap().insert(call.agent, call.prompt, value);
        Ok(response)
    }
}

/// Serves per-agent response queues in call order, ignoring prompt text.
/// Used to author transcripts: run a script against it under a
/// [`RecordingClient`].
#[derive(Default)]
pub struct ScriptedClient {
    queues: Mutex<BTreeMap<AgentName, VecDeque<Value>>>,
}

impl ScriptedClient {
    pub fn new() -> Self {
        Self::default()
    }

    /// Load `{"<agent_name>": [response, ...], ...}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let map: BTreeMap<String, Vec<Value>> =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("scripted responses: {e}")))?;
        let client = ScriptedClient::new();
        for (name, responses) in map {
            let agent = AgentName::parse(&name).ok_or_else(|| Error::Config(format!("unknown agent `{name}`")))?;
            for r in responses {
                client.push(agent, r);
            }
        }
        Ok(client)
    }

    pub fn push(&self, agent: AgentName, response: Value) {
        self.queues.lock().unwrap().entry(agent).or_default().push_back(response);
    }

    pub fn remaining(&self) -> usize {
        self.queues.lock().unwrap().values().map(VecDeque::len).sum()
    }
}

impl LlmClient for ScriptedClient {
    fn complete(&self, call: &ChatCall<'_>) -> Result<String, GatewayError> {
        self.queues
            .lock()
            .unwrap()
            .get_mut(&call.agent)
            .and_then(VecDeque::pop_front)
            .map(|v| response_text(&v))
            .ok_or_else(|| GatewayError::ScriptExhausted(call.agent.to_string()))
    }
}

/// Stand-in for the network in offline modes: every call fails and is
/// counted.
#[derive(Default)]
pub struct NetworkGuard {
    attempts: AtomicUsize,
}

impl NetworkGuard {
    pub fn attempts(&self) -> usize {
        self.attempts.load(Ordering::SeqCst)
    }
}

impl LlmClient for NetworkGuard {
    fn complete(&self, _call: &ChatCall<'_>) -> Result<String, GatewayError> {
        self.attempts.fetch_add(1, Ordering::SeqCst);
        Err(GatewayError::NetworkForbidden)
    }
}
