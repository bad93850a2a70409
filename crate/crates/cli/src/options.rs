use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{Context, Result};
use clap::Args;
use promptad_core::client::{Mode, ModelConfig};
use promptad_core::prompt::{load_preset, parse_template, PromptTemplate, Scenario, TemplateStore};

/// A template store directory, seeded from a preset when empty.
#[derive(Args, Clone)]
pub struct StoreArgs {
    #[arg(long, default_value = "templates")]
    pub store: PathBuf,
    /// Preset used as version 1 of an empty store.
    #[arg(long = "preset", default_value = "cable")]
    pub preset: Scenario,
}

impl StoreArgs {
    pub fn open(&self) -> Result<TemplateStore> {
        TemplateStore::open(&self.store, load_preset(self.preset))
            .with_context(|| format!("opening template store {}", self.store.display()))
    }
}

/// Where a command takes its template from; the scenario preset by default.
#[derive(Args, Clone, Default)]
pub struct TemplateArgs {
    /// Use the current version of this template store.
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Use this template file.
    #[arg(long, conflicts_with = "store")]
    pub template: Option<PathBuf>,
}

impl TemplateArgs {
    pub fn resolve(&self, scenario: Scenario) -> Result<PromptTemplate> {
        if let Some(path) = &self.template {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            return parse_template(&text).with_context(|| format!("parsing {}", path.display()));
        }
        if let Some(dir) = &self.store {
            let store = TemplateStore::open(dir, load_preset(scenario))
                .with_context(|| format!("opening template store {}", dir.display()))?;
            return Ok(store.current().clone());
        }
        Ok(load_preset(scenario))
    }
}

/// Detector model settings.
#[derive(Args, Clone, Default)]
pub struct ModelArgs {
    #[arg(long)]
    pub model: Option<String>,
    /// Chat-completions URL.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// live, record or replay.
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Response cache directory for record and replay.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Environment variable with the API key.
    #[arg(long)]
    pub api_key_env: Option<String>,
    #[arg(long)]
    pub max_in_flight: Option<usize>,
}

impl ModelArgs {
    pub fn config(&self) -> ModelConfig {
        let mut c = ModelConfig::default();
        overlay(
            &mut c,
            &self.model,
            &self.endpoint,
            self.mode,
            &self.cache,
            self.temperature,
            &self.api_key_env,
        );
        if let Some(n) = self.max_in_flight {
            c.max_in_flight = n;
        }
        c
    }
}

/// Pre-processor model settings, prefixed `--pre-`.
#[derive(Args, Clone, Default)]
pub struct PreprocessorArgs {
    #[arg(long = "pre-model")]
    pub model: Option<String>,
    #[arg(long = "pre-endpoint")]
    pub endpoint: Option<String>,
    #[arg(long = "pre-mode")]
    pub mode: Option<Mode>,
    #[arg(long = "pre-cache")]
    pub cache: Option<PathBuf>,
    #[arg(long = "pre-temperature")]
    pub temperature: Option<f64>,
    #[arg(long = "pre-api-key-env")]
    pub api_key_env: Option<String>,
}

impl PreprocessorArgs {
    pub fn config(&self) -> ModelConfig {
        let mut c = ModelConfig::preprocessor();
        overlay(
            &mut c,
            &self.model,
            &self.endpoint,
            self.mode,
            &self.cache,
            self.temperature,
            &self.api_key_env,
        );
        c
    }
}

fn overlay(
    c: &mut ModelConfig,
    model: &Option<String>,
    endpoint: &Option<String>,
    mode: Option<Mode>,
    cache: &Option<PathBuf>,
    temperature: Option<f64>,
    api_key_env: &Option<String>,
) {
    if let Some(m) = model {
        c.model_id = m.clone();
    }
    if let Some(e) = endpoint {
        c.endpoint_url = e.clone();
    }
    if let Some(m) = mode {
        c.mode = m;
    }
    if let Some(dir) = cache {
        c.cache_dir = Some(dir.clone());
    }
    if let Some(t) = temperature {
        c.temperature = t;
    }
    if let Some(k) = api_key_env {
        c.api_key_env = Some(k.clone());
    }
}

/// `scenario=path` pair for `serve --data`.
#[derive(Debug, Clone)]
pub struct DataRoot {
    pub scenario: Scenario,
    pub path: PathBuf,
}

impl FromStr for DataRoot {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (scenario, path) = s
            .split_once('=')
            .ok_or_else(|| format!("expected scenario=path, got {s:?}"))?;
        Ok(Self {
            scenario: scenario.parse().map_err(|e| format!("{e}"))?,
            path: path.into(),
        })
    }
}
