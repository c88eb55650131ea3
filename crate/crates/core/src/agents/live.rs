//! HTTP clients for OpenAI-compatible chat-completion and embedding APIs.

use serde_json::{json, Value};
use std::time::Duration;

use super::{ChatCall, LlmClient};
use crate::error::GatewayError;
use crate::store::Embedder;

#[derive(Debug, Clone, PartialEq)]
pub struct LiveSettings {
    /// Base URL, e.g. `https://api.openai.com/v1`.
    pub endpoint: String,
    pub model: String,
    pub api_key: String,
    pub timeout: Duration,
}

fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into()
}

fn post(agent: &ureq::Agent, settings: &LiveSettings, path: &str, payload: Value) -> Result<Value, GatewayError> {
    let url = format!("{}/{path}", settings.endpoint.trim_end_matches('/'));
    let mut response = agent
        .post(&url)
        .header("Authorization", &format!("Bearer {}", settings.api_key))
        .send_json(payload)
        .map_err(|e| GatewayError::Unreachable(e.to_string()))?;
    let status = response.status().as_u16();
    if status == 401 || status == 403 {
        let body = response.body_mut().read_to_string().unwrap_or_default();
        return Err(GatewayError::Auth(body));
    }
    if !(200..300).contains(&status) {
        let body = response.body_mut().read_to_string().unwrap_or_default();
        return Err(GatewayError::Http { status, body });
    }
    response
        .body_mut()
        .read_json::<Value>()
        .map_err(|e| GatewayError::Protocol(e.to_string()))
}

pub struct ChatClient {
    settings: LiveSettings,
    agent: ureq::Agent,
}

impl ChatClient {
    pub fn new(settings: LiveSettings) -> Self {
        let agent = agent(settings.timeout);
        ChatClient { settings, agent }
    }
}

impl LlmClient for ChatClient {
    fn complete(&self, call: &ChatCall<'_>) -> Result<String, GatewayError> {
        let payload = json!({
            "model": self.settings.model,
            "temperature": call.temperature,
            "response_format": {"type": "json_object"},
            "messages": [{"role": "user", "content": call.prompt}],
        });
        let reply = post(&self.agent, &self.settings, "chat/completions", payload)?;
        reply["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| GatewayError::Protocol("reply lacks choices[0].message.content".into()))
    }
}

pub struct HttpEmbedder {
    settings: LiveSettings,
    agent: ureq::Agent,
}

impl HttpEmbedder {
    pub fn new(settings: LiveSettings) -> Self {
        let agent = agent(settings.timeout);
        HttpEmbedder { settings, agent }
    }
}

impl Embedder for HttpEmbedder {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, GatewayError> {
        let payload = json!({"model": self.settings.model, "input": texts});
        let reply = post(&self.agent, &self.settings, "embeddings", payload)?;
        let data = reply["data"]
            .as_array()
            .ok_or_else(|| GatewayError::Protocol("reply lacks `data`".into()))?;
        let vectors: Vec<Vec<f32>> = data
            .iter()
            .map(|d| {
                d["embedding"]
                    .as_array()
                    .map(|v| v.iter().filter_map(Value::as_f64).map(|x| x as f32).collect())
                    .ok_or_else(|| GatewayError::Protocol("entry lacks `embedding`".into()))
            })
            .collect::<Result<_, _>>()?;
        if vectors.len() != texts.len() {
            return Err(GatewayError::Protocol(format!(
                "asked for {} embeddings, got {}",
                texts.len(),
                vectors.len()
            )));
        }
        Ok(vectors)
    }
}
