//! TOML configuration.
//!
//! ```toml
//! store_path = "personamail-store.json"
//!
//! [gateway]
//! endpoint = "https://api.openai.com/v1"
//! model = "gpt-4o"
//! api_key_env = "PERSONAMAIL_API_KEY"
//!
//! [retrieval]
//! threshold = 0.25
//! ```
//!
//! Every key is optional.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::agents::live::LiveSettings;
use crate::agents::{GatewaySettings, PipelineOptions};
use crate::store::RetrievalSettings;
use crate::{Error, Result};

pub const DEFAULT_API_KEY_ENV: &str = "PERSONAMAIL_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub store_path: PathBuf,
    pub catalog_path: Option<PathBuf>,
    pub template_dir: Option<PathBuf>,
    pub gateway: GatewayConfig,
    pub retrieval: RetrievalSettings,
    pub pipeline: PipelineOptions,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            store_path: PathBuf::from("personamail-store.json"),
            catalog_path: None,
            template_dir: None,
            gateway: GatewayConfig::default(),
            retrieval: RetrievalSettings::default(),
            pipeline: PipelineOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub endpoint: String,
    pub model: String,
    pub embedding_model: Option<String>,
    pub api_key_env: String,
    pub timeout_secs: u64,
    #[serde(flatten)]
    pub settings: GatewaySettings,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            endpoint: "https://api.openai.com/v1".into(),
            model: "gpt-4o".into(),
            embedding_model: None,
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            timeout_secs: 60,
            settings: GatewaySettings::default(),
        }
    }
}

impl GatewayConfig {
    /// Live client settings; fails when the key variable is unset or empty.
    pub fn live_settings(&self) -> Result<LiveSettings> {
        let api_key = std::env::var(&self.api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| Error::Config(format!("environment variable {} is not set", self.api_key_env)))?;
        Ok(LiveSettings {
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            api_key,
            timeout: Duration::from_secs(self.timeout_secs),
        })
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("reading {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.retrieval.validate()?;
        self.pipeline.validate()?;
        if !(0.0..=2.0).contains(&self.gateway.settings.generation_temperature)
            || !(0.0..=2.0).contains(&self.gateway.settings.structure_temperature)
        {
            return Err(Error::Config("temperatures must be within [0, 2]".into()));
        }
        Ok(())
    }
}
