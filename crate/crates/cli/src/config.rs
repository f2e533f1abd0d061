//! Layered run settings: config file, then environment, then flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spatial_core::agent::Paradigm;
use spatial_core::corpus::MEDIA_ROOT_ENV;
use spatial_core::eval::MraConfig;

use crate::CliError;

macro_rules! overlay {
    ($base:expr, $top:expr; $($f:ident),+) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )+
    };
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointSettings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timeout_secs: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retry_budget: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolSettings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixtures: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MraSettings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSettings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paradigm: Option<Paradigm>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_turns: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_attempts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_frames: Option<usize>,
}

/// Every layer has the same shape; unset fields defer to lower layers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parallelism: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub media_root: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blind: Option<bool>,
    pub core: EndpointSettings,
    pub judge: EndpointSettings,
    pub tools: ToolSettings,
    pub mra: MraSettings,
    pub agent: AgentSettings,
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
    }

    /// Reads `SPATIAL_*` variables through `var`.
    pub fn from_env(var: impl Fn(&str) -> Option<String>) -> Result<Self, CliError> {
        fn num<T: std::str::FromStr>(name: &str, v: Option<String>) -> Result<Option<T>, CliError> {
            v.map(|s| s.trim().parse().map_err(|_| CliError::Validation(format!("{name}={s:?} is not a number"))))
                .transpose()
        }
        let get = |name: &str| var(name).filter(|v| !v.is_empty());
        Ok(Self {
            seed: num("SPATIAL_SEED", get("SPATIAL_SEED"))?,
            parallelism: num("SPATIAL_PARALLELISM", get("SPATIAL_PARALLELISM"))?,
            media_root: get(MEDIA_ROOT_ENV).map(PathBuf::from),
            core: EndpointSettings {
                endpoint: get("SPATIAL_CORE_ENDPOINT"),
                model: get("SPATIAL_CORE_MODEL"),
                ..Default::default()
            },
            judge: EndpointSettings {
                endpoint: get("SPATIAL_JUDGE_ENDPOINT"),
                model: get("SPATIAL_JUDGE_MODEL"),
                ..Default::default()
            },
            tools: ToolSettings {
                endpoint: get("SPATIAL_TOOLS_ENDPOINT"),
                fixtures: get("SPATIAL_TOOL_FIXTURES").map(PathBuf::from),
            },
            ..Default::default()
        })
    }

    /// Fields set in `top` win.
    pub fn overlay(mut self, top: &Settings) -> Self {
        overlay!(self, top; seed, parallelism, media_root, blind);
        overlay!(self.core, top.core; endpoint, model, timeout_secs, retry_budget, max_tokens);
        overlay!(self.judge, top.judge; endpoint, model, timeout_secs, retry_budget, max_tokens);
        overlay!(self.tools, top.tools; endpoint, fixtures);
        overlay!(self.mra, top.mra; start, end, interval);
        overlay!(self.agent, top.agent; paradigm, max_turns, max_attempts, max_frames);
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn parallelism(&self) -> usize {
        self.parallelism
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1)
    }

    pub fn mra_config(&self) -> Result<MraConfig, CliError> {
        let d = MraConfig::default();
        let cfg = MraConfig {
            start: self.mra.start.unwrap_or(d.start),
            end: self.mra.end.unwrap_or(d.end),
            interval: self.mra.interval.unwrap_or(d.interval),
        };
        cfg.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(cfg)
    }

    /// Fails when a configured media root does not exist.
    pub fn check_media_root(&self) -> Result<(), CliError> {
        match &self.media_root {
            Some(root) if !root.is_dir() => {
                Err(CliError::Validation(format!("media root {} does not exist", root.display())))
            }
            _ => Ok(()),
        }
    }
}
