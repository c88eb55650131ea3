//! Versioned prompt templates, one file per agent.
//!
//! File layout:
//!
//! ```text
//! # agent: draft_generator
//! # version: 1
//! ---
//! prompt text with {{placeholders}}
//! ```
//!
//! Substitution is a single pass: placeholder syntax inside substituted
//! values is left as is. A placeholder without a value is an error.

use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

use super::AgentName;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub agent: AgentName,
    pub version: u32,
    pub body: String,
    /// SHA-256 of the full file text.
    pub sha256: String,
}

impl Template {
    pub fn parse(text: &str) -> Result<Template> {
        let text = crate::domain::normalize_newlines(text);
        let (header, body) = text
            .split_once("\n---\n")
            .ok_or_else(|| Error::Config("template is missing the `---` header separator".into()))?;
        let mut agent = None;
        let mut version = None;
        for line in header.lines() {
            let line = line.trim().trim_start_matches('#').trim();
            if let Some((key, value)) = line.split_once(':') {
                match key.trim() {
                    "agent" => agent = AgentName::parse(value.trim()),
                    "version" => version = value.trim().parse().ok(),
                    _ => {}
                }
            }
        }
        let agent = agent.ok_or_else(|| Error::Config("template header lacks a known `agent`".into()))?;
        let version = version.ok_or_else(|| Error::Config(format!("template {agent} lacks a `version`")))?;
        Ok(Template {
            agent,
            version,
            body: body.to_owned(),
            sha256: hex::encode(Sha256::digest(text.as_bytes())),
        })
    }

    pub fn placeholders(&self) -> Vec<&str> {
        let mut out = Vec::new();
        let mut rest = self.body.as_str();
        while let Some(open) = rest.find("{{") {
            let after = &rest[open + 2..];
            match after.find("}}") {
                Some(close) => {
                    let name = after[..close].trim();
                    if !out.contains(&name) {
                        out.push(name);
                    }
                    rest = &after[close + 2..];
                }
                None => break,
            }
        }
        out
    }

    pub fn render(&self, vars: &[(&str, &str)]) -> Result<String> {
        let mut out = String::with_capacity(self.body.len() * 2);
        let mut rest = self.body.as_str();
        while let Some(open) = rest.find("{{") {
            out.push_str(&rest[..open]);
            let after = &rest[open + 2..];
            let Some(close) = after.find("}}") else {
                out.push_str(&rest[open..]);
                rest = "";
                break;
            };
            let name = after[..close].trim();
            let value = vars
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::Config(format!("template {} needs a value for `{name}`", self.agent)))?;
            out.push_str(value);
            rest = &after[close + 2..];
        }
        out.push_str(rest);
        Ok(out.trim_end().to_owned())
    }
}

macro_rules! builtin {
    ($($file:literal),* $(,)?) => {
        [$(include_str!(concat!("../../templates/", $file, ".txt"))),*]
    };
}

const BUILTIN: [&str; 11] = builtin!(
    "factor_curator",
    "draft_generator",
    "intent_analyzer",
    "unit_extractor",
    "unit_intent_linker",
    "intent_rewriter",
    "anchor_adapter",
    "anchor_namer",
    "edit_analyzer",
    "quickfix_rewriter",
    "retrieval_reranker",
);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    templates: BTreeMap<AgentName, Template>,
}

impl TemplateSet {
    pub fn builtin() -> Self {
        let templates = BUILTIN
            .iter()
            .map(|text| {
                let t = Template::parse(text).expect("builtin template parses");
                (t.agent, t)
            })
            .collect();
        TemplateSet { templates }
    }

    /// Built-in templates overridden by any `<agent_name>.txt` found in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut set = Self::builtin();
        for agent in AgentName::ALL {
            let path = dir.join(format!("{agent}.txt"));
            if !path.exists() {
                continue;
            }
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::Config(format!("reading {}: {e}", path.display())))?;
            let template = Template::parse(&text)?;
            if template.agent != agent {
                return Err(Error::Config(format!(
                    "{} declares agent {}, expected {agent}",
                    path.display(),
                    template.agent
                )));
            }
            set.templates.insert(agent, template);
        }
        Ok(set)
    }

    pub fn get(&self, agent: AgentName) -> &Template {
        &self.templates[&agent]
    }

    pub fn render(&self, agent: AgentName, vars: &[(&str, &str)]) -> Result<String> {
        self.get(agent).render(vars)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Template> {
        self.templates.values()
    }
}
